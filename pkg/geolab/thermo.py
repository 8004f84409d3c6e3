"""
Geodesic Lab - Thermodynamic Module

This module evaluates the distortion function and its Birkhoff sums, builds
finite-depth approximations of the transfer operator on cylinder graphs,
brackets the pressure P(s) between rigorous lower and upper values, and
solves P(delta_R) = 0 with an error enclosure.

Convention: for a point z of the region, tau(z) = 2 log|z| > 0. Branch
weights are exp(-s * tau), and the Birkhoff sum over a periodic orbit is the
length of the closed geodesic.
"""

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.sparse import csr_matrix
from scipy.stats import linregress

from .errors import BoundaryPointError
from .geodesics import Alphabet, orbit_points
from .hurwitz import SQRT2, Partition, build_partition, in_region, on_boundary
from .subshift import TransitionMatrix, Word, build_transitions, require_admissible

POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
DEFAULT_DEPTHS = (2, 3)
CELL_DISK_RADIUS = SQRT2 / 4


class CylinderWeight(NamedTuple):
    word: Word
    rep_point: complex
    weight_log: float


class PressureEstimate(BaseModel):
    """Bracket for P(s) at one cylinder depth"""

    s: float = Field(description="Exponent")
    depth: int = Field(description="Cylinder depth n")
    lower: float = Field(description="Rigorous lower bound for P(s)")
    upper: float = Field(description="Rigorous upper bound for P(s)")
    center: float = Field(description="Estimate from representative points")
    converged: bool = Field(default=True, description="Power iteration met its tolerance")

    @property
    def width(self) -> float:
        return self.upper - self.lower


class DeltaEstimate(BaseModel):
    """Root of the pressure with its certified bracket"""

    R: float = Field(description="Partition radius")
    delta: float = Field(description="Root of the center pressure")
    lo: float = Field(description="Root of the lower pressure bound")
    hi: float = Field(description="Root of the upper pressure bound")
    certified: bool = Field(description="Bracket width within tolerance")
    depth: int = Field(description="Deepest cylinder depth used")
    tail: Optional[float] = Field(default=None, description="Tail sum beyond the radius at s = delta")


class SpectralBound(NamedTuple):
    lower: float
    upper: float
    estimate: float
    iterations: int
    converged: bool


def tau(z: complex) -> float:
    """
    Distortion at a point of the region: 2 log|z|.

    Raises:
        BoundaryPointError: z lies on a removed line or circle
    """
    z = complex(z)
    if on_boundary(z):
        raise BoundaryPointError(f"Point {z} lies on a removed boundary")
    if not in_region(z):
        raise ValueError(f"Point {z} is outside the region")
    return 2.0 * math.log(abs(z))


def tau_s(u: complex) -> float:
    """Distortion in S-coordinates: -2 log|u| with |u| < 1"""
    u = complex(u)
    if u == 0:
        raise ValueError("The origin has no distortion value")
    return -2.0 * math.log(abs(u))


def birkhoff_sum(alphabet: Alphabet, word: Sequence[int], z: complex) -> float:
    """S_n tau along the forward orbit of z following the word"""
    total = 0.0
    z = complex(z)
    for letter in word:
        total += 2.0 * math.log(abs(z))
        z = alphabet.forward[letter].mobius(z)
    return total


def periodic_birkhoff_sum(alphabet: Alphabet, word: Sequence[int]) -> float:
    """S_n tau at the periodic point of a cyclically admissible word"""
    return float(sum(2.0 * math.log(abs(z)) for z in orbit_points(alphabet, word)))


def _apply_inverse(alphabet: Alphabet, letter: int, z: complex) -> complex:
    g = alphabet.inverse_complex[letter]
    return (g[0, 0] * z + g[0, 1]) / (g[1, 0] * z + g[1, 1])


def _pull_back(alphabet: Alphabet, word: Sequence[int], z: complex) -> List[complex]:
    """Orbit z_1..z_n of the point of [word] landing on z after n steps"""
    points = [0j] * len(word)
    for position in range(len(word) - 1, -1, -1):
        z = _apply_inverse(alphabet, word[position], z)
        points[position] = z
    return points


def cylinder_weight(alphabet: Alphabet, transitions: TransitionMatrix, word: Sequence[int]) -> CylinderWeight:
    """Representative point of [word] and the Birkhoff sum there"""
    word = tuple(word)
    require_admissible(transitions, word)
    if transitions.bits[word[-1], word[0]]:
        points = orbit_points(alphabet, word)
    else:
        landing = alphabet.partition[transitions.successors(word[-1])[0]].center
        points = _pull_back(alphabet, word, landing)
    return CylinderWeight(word, points[0], float(sum(2.0 * math.log(abs(z)) for z in points)))


def cylinder_contains(partition: Partition, alphabet: Alphabet, word: Sequence[int], z: complex, tol: float = 1e-9) -> bool:
    """Whether the orbit of z visits the parts of the word in order, within tol of the part boundaries"""
    z = complex(z)
    for letter in word:
        part = partition[letter]
        if not all(c.side * c.cline.value(z.real, z.imag) > -tol for c in part.constraints()):
            return False
        z = alphabet.forward[letter].mobius(z)
    return True


def spectral_radius(matrix: csr_matrix, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> SpectralBound:
    """Power iteration with Collatz-Wielandt bounds min(Av/v) <= rho <= max(Av/v)"""
    v = np.ones(matrix.shape[0])
    lo = hi = 0.0
    for iteration in range(1, max_iter + 1):
        w = matrix @ v
        ratios = w / v
        lo, hi = float(ratios.min()), float(ratios.max())
        if hi - lo <= tol * hi:
            return SpectralBound(lo, hi, 0.5 * (lo + hi), iteration, True)
        v = w / w.max()
    return SpectralBound(lo, hi, 0.5 * (lo + hi), max_iter, False)


@dataclass
class _Level:
    prefix: np.ndarray
    first: np.ndarray
    last: np.ndarray
    suffix: np.ndarray
    center: np.ndarray
    radius: np.ndarray
    log_lo: np.ndarray
    log_hi: np.ndarray
    composite: np.ndarray
    keys: np.ndarray

    def __len__(self) -> int:
        return len(self.first)


def _fixed_points(g: np.ndarray) -> np.ndarray:
    a, b, c, d = g[:, 0, 0], g[:, 0, 1], g[:, 1, 0], g[:, 1, 1]
    root = np.sqrt((a + d) ** 2 - 4.0 * (a * d - b * c))
    safe_c = np.where(np.abs(c) > 1e-300, c, 1.0)
    plus = ((a - d) + root) / (2.0 * safe_c)
    minus = ((a - d) - root) / (2.0 * safe_c)
    pick = np.abs(c * plus + d) >= np.abs(c * minus + d)
    with np.errstate(divide="ignore", invalid="ignore"):
        parabolic = b / (d - a)
    return np.where(np.abs(c) > 1e-300, np.where(pick, plus, minus), parabolic)


class CylinderLevels:
    """Admissible words level by level, with disk and modulus enclosures of their cylinders"""

    def __init__(self, alphabet: Alphabet, transitions: TransitionMatrix):
        self.alphabet = alphabet
        self.transitions = transitions
        self.size = transitions.size
        parts = alphabet.partition
        self.cell_center = np.array([p.center for p in parts])
        self.targets = np.array([complex(p.round_target) for p in parts])
        self.signs = np.array([p.branch_sign for p in parts])
        self.log_rmin = np.log(alphabet.rmin)
        self.log_rmax = np.log(alphabet.rmax)
        sparse = transitions.to_sparse()
        self._indptr, self._indices = sparse.indptr, sparse.indices
        labels = np.arange(self.size)
        self.levels: List[_Level] = [
            _Level(
                prefix=np.zeros(self.size, dtype=np.int64),
                first=labels,
                last=labels,
                suffix=np.zeros(self.size, dtype=np.int64),
                center=self.cell_center.copy(),
                radius=np.full(self.size, CELL_DISK_RADIUS),
                log_lo=self.log_rmin.copy(),
                log_hi=self.log_rmax.copy(),
                composite=alphabet.inverse_complex.copy(),
                keys=labels.astype(np.int64),
            )
        ]

    def level(self, n: int) -> _Level:
        if n < 1:
            raise ValueError(f"Cylinder depth must be >= 1, got {n}")
        while len(self.levels) < n:
            self.levels.append(self._extend(self.levels[-1]))
        return self.levels[n - 1]

    def _extend(self, parent: _Level) -> _Level:
        counts = np.diff(self._indptr)[parent.last]
        total = int(counts.sum())
        prefix = np.repeat(np.arange(len(parent)), counts)
        offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        last = self._indices[np.repeat(self._indptr[parent.last], counts) + offsets].astype(np.int64)
        first = parent.first[prefix]
        suffix = np.searchsorted(parent.keys, parent.suffix[prefix] * self.size + last)

        # g_first applied to the suffix cylinder's disk
        c, r = parent.center[suffix], parent.radius[suffix]
        denom = np.abs(c) ** 2 - r ** 2
        sign = np.where(self.signs[first] == 1, 1.0, -1.0)
        image_center = self.targets[first] + sign * np.conj(c) / denom
        image_radius = r / denom
        use_image = image_radius < CELL_DISK_RADIUS
        center = np.where(use_image, image_center, self.cell_center[first])
        radius = np.where(use_image, image_radius, CELL_DISK_RADIUS)

        modulus = np.abs(center)
        log_lo = np.log(np.maximum(modulus - radius, np.exp(self.log_rmin[first])))
        log_hi = np.log(np.minimum(modulus + radius, np.exp(self.log_rmax[first])))
        log_lo = np.maximum(log_lo, parent.log_lo[prefix])
        log_hi = np.minimum(log_hi, parent.log_hi[prefix])
        log_hi = np.maximum(log_hi, log_lo)

        composite = np.einsum("kij,kjl->kil", self.alphabet.inverse_complex[first], parent.composite[suffix])
        return _Level(
            prefix=prefix,
            first=first,
            last=last,
            suffix=suffix.astype(np.int64),
            center=center,
            radius=radius,
            log_lo=log_lo,
            log_hi=log_hi,
            composite=composite,
            keys=prefix.astype(np.int64) * self.size + last,
        )

    def representative_log(self, n: int) -> np.ndarray:
        """log|z| at the periodic point of each n-word when it lies in the word's disk, else at the disk center"""
        level = self.level(n)
        points = _fixed_points(level.composite)
        cyclic = self.transitions.bits[level.last, level.first]
        inside = np.abs(points - level.center) <= level.radius
        rep = np.where(cyclic & inside, points, level.center)
        return np.clip(np.log(np.abs(rep)), level.log_lo, level.log_hi)


class CylinderGraph(NamedTuple):
    rows: np.ndarray
    cols: np.ndarray
    log_lo: np.ndarray
    log_hi: np.ndarray
    log_center: np.ndarray
    states: int


def cylinder_graph(levels: CylinderLevels, n: int) -> CylinderGraph:
    """
    Weighted graph of the depth-n approximation.

    Depth 1 is diag(w) A over letters. For n >= 2 the states are the
    (n-1)-words and each n-word is an edge from its prefix to its suffix,
    weighted by the modulus range of its cylinder's first point.
    """
    if n == 1:
        pairs = levels.level(2)
        single = levels.level(1)
        first = pairs.first
        return CylinderGraph(
            rows=pairs.prefix,
            cols=pairs.suffix,
            log_lo=single.log_lo[first],
            log_hi=single.log_hi[first],
            log_center=levels.representative_log(1)[first],
            states=len(single),
        )
    level = levels.level(n)
    return CylinderGraph(
        rows=level.prefix,
        cols=level.suffix,
        log_lo=level.log_lo,
        log_hi=level.log_hi,
        log_center=levels.representative_log(n),
        states=len(levels.level(n - 1)),
    )


class PressureModel:
    """P(s) brackets on one cylinder graph"""

    def __init__(self, graph: CylinderGraph, depth: int, tol: float = POWER_TOL):
        self.graph = graph
        self.depth = depth
        self.tol = tol

    def _matrix(self, log_weights: np.ndarray) -> csr_matrix:
        g = self.graph
        return csr_matrix((log_weights, (g.rows, g.cols)), shape=(g.states, g.states))

    def _log_rho(self, logs: np.ndarray, s: float) -> SpectralBound:
        return spectral_radius(self._matrix(np.exp(-2.0 * s * logs)), tol=self.tol)

    def upper(self, s: float) -> float:
        return math.log(self._log_rho(self.graph.log_lo, s).upper)

    def lower(self, s: float) -> float:
        return math.log(self._log_rho(self.graph.log_hi, s).lower)

    def center(self, s: float) -> float:
        return math.log(self._log_rho(self.graph.log_center, s).estimate)

    def estimate(self, s: float) -> PressureEstimate:
        sup = self._log_rho(self.graph.log_lo, s)
        inf = self._log_rho(self.graph.log_hi, s)
        mid = self._log_rho(self.graph.log_center, s)
        return PressureEstimate(
            s=s,
            depth=self.depth,
            lower=math.log(inf.lower),
            upper=math.log(sup.upper),
            center=math.log(mid.estimate),
            converged=sup.converged and inf.converged and mid.converged,
        )


def pressure_model(alphabet: Alphabet, transitions: TransitionMatrix, n: int, levels: Optional[CylinderLevels] = None) -> PressureModel:
    levels = levels or CylinderLevels(alphabet, transitions)
    return PressureModel(cylinder_graph(levels, n), n)


def pressure(s: float, transitions: TransitionMatrix, alphabet: Alphabet, n: int = 2) -> PressureEstimate:
    """Bracket for P(s) from sup and inf weights over the n-cylinders"""
    if s <= 0:
        raise ValueError(f"Exponent must be positive, got {s}")
    return pressure_model(alphabet, transitions, n).estimate(s)


def dense_pressure(model: PressureModel, s: float) -> Tuple[float, float]:
    """log spectral radii of the inf and sup weight matrices from a full eigenvalue solve"""
    out = []
    for logs in (model.graph.log_hi, model.graph.log_lo):
        dense = model._matrix(np.exp(-2.0 * s * logs)).toarray()
        out.append(math.log(float(np.max(np.abs(np.linalg.eigvals(dense))))))
    return out[0], out[1]


def _root(fn, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Zero of a decreasing function by bisection"""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _upper_start(fn) -> float:
    hi = 2.0
    while fn(hi) > 0:
        hi *= 1.5
        if hi > 64:
            raise ValueError("Pressure does not change sign below s = 64")
    return hi


def solve_delta(
    partition: Partition,
    tol: float = 1e-3,
    depths: Sequence[int] = DEFAULT_DEPTHS,
    transitions: Optional[TransitionMatrix] = None,
    alphabet: Optional[Alphabet] = None,
) -> DeltaEstimate:
    """
    Solve P(s) = 0 at increasing depths until the bracket is narrower than tol.

    Args:
        partition: Partition of radius R >= 4
        tol: Target bracket width, at least 1e-4
        depths: Cylinder depths tried in order
        transitions: Transition matrix, built when omitted
        alphabet: Branch data, built when omitted

    Returns:
        DeltaEstimate with the deepest bracket computed; certified is False
        when the last depth leaves the bracket wider than tol
    """
    if partition.radius < 4:
        raise ValueError(f"Delta solver needs R >= 4, got {partition.radius}")
    if tol < 1e-4:
        raise ValueError(f"Tolerance must be >= 1e-4, got {tol}")
    transitions = transitions if transitions is not None else build_transitions(partition)
    alphabet = alphabet or Alphabet(partition)
    levels = CylinderLevels(alphabet, transitions)
    estimate = None
    for depth in depths:
        model = PressureModel(cylinder_graph(levels, depth), depth)
        top = _upper_start(model.upper)
        lo = _root(model.lower, 0.0, top)
        hi = _root(model.upper, 0.0, top)
        delta = min(max(_root(model.center, 0.0, top), lo), hi)
        estimate = DeltaEstimate(R=partition.radius, delta=delta, lo=lo, hi=hi, certified=hi - lo <= tol, depth=depth)
        if estimate.certified:
            break
    if estimate is None:
        raise ValueError("No depths given")
    if estimate.delta > 1:
        estimate.tail = tail_bound(partition.radius, estimate.delta)
    return estimate


def full_shift_pressure(k: int, c: float, s: float, n: int = 2) -> PressureEstimate:
    """Control system: full shift on k symbols with constant tau = c, where P(s) = log k - s c"""
    if k < 1:
        raise ValueError(f"Need at least one symbol, got {k}")
    states = k ** (n - 1)
    rows = np.repeat(np.arange(states), k)
    cols = (rows * k + np.tile(np.arange(k), states)) % states
    graph = CylinderGraph(rows, cols, np.full(len(rows), c / 2), np.full(len(rows), c / 2), np.full(len(rows), c / 2), states)
    return PressureModel(graph, n).estimate(s)


def tail_bound(R: float, s: float, cutoff: Optional[int] = None) -> float:
    """Sum of |z|^(-2s) over Gaussian integers with |z| > R - 1, with an integral bound past the cutoff"""
    if s <= 1:
        raise ValueError(f"Tail sum diverges for s <= 1, got {s}")
    cutoff = cutoff or int(4 * R + 64)
    grid = np.arange(-cutoff, cutoff + 1, dtype=np.float64)
    x, y = np.meshgrid(grid, grid)
    modulus = np.hypot(x, y)
    mask = (modulus > R - 1) & (modulus <= cutoff)
    annulus = float(np.sum(modulus[mask] ** (-2.0 * s)))
    return annulus + 2.0 * math.pi * cutoff ** (2.0 - 2.0 * s) / (2.0 * s - 2.0)


def delta_trend(radii: Iterable[float], depth: int = 1, tol: float = 1e-3) -> List[DeltaEstimate]:
    """delta_R for several radii at one common depth"""
    out = []
    for R in radii:
        partition = build_partition(R)
        transitions = build_transitions(partition, certify=False)
        out.append(solve_delta(partition, tol=tol, depths=(depth,), transitions=transitions))
    return out


def _random_walk(transitions: TransitionMatrix, start: int, length: int, rng: random.Random) -> List[int]:
    word = [start]
    while len(word) < length:
        word.append(rng.choice(transitions.successors(word[-1])))
    return word


def _continuation_orbit(alphabet: Alphabet, transitions: TransitionMatrix, word: List[int], extra: int, rng: random.Random) -> List[complex]:
    tail = _random_walk(transitions, rng.choice(transitions.successors(word[-1])), extra, rng)
    landing = alphabet.partition[tail[-1]].center
    return _pull_back(alphabet, word + tail, landing)[: len(word)]


def birkhoff_distortion_check(
    alphabet: Alphabet,
    transitions: TransitionMatrix,
    n: int,
    k: int = 8,
    samples: int = 200,
    seed: int = 0,
) -> float:
    """
    Max |S_n tau(b||x) - S_n tau(b||x0)| over random prefixes b of length n
    and pairs of random admissible continuations of length k.
    """
    rng = random.Random(seed)
    worst = 0.0
    for _ in range(samples):
        prefix = _random_walk(transitions, rng.randrange(transitions.size), n, rng)
        x = _continuation_orbit(alphabet, transitions, prefix, k, rng)
        x0 = _continuation_orbit(alphabet, transitions, prefix, k, rng)
        deviation = abs(sum(2.0 * math.log(abs(z)) for z in x) - sum(2.0 * math.log(abs(z)) for z in x0))
        worst = max(worst, deviation)
    return worst


def distortion_decay(
    alphabet: Alphabet,
    transitions: TransitionMatrix,
    depths: Sequence[int] = (2, 3, 4, 5, 6, 7, 8),
    samples: int = 200,
    k: int = 8,
    seed: int = 0,
) -> float:
    """Slope of log max |tau(x) - tau(x0)| against the depth of the shared cylinder"""
    rng = random.Random(seed)
    logs = []
    for depth in depths:
        worst = 0.0
        for _ in range(samples):
            prefix = _random_walk(transitions, rng.randrange(transitions.size), depth, rng)
            x = _continuation_orbit(alphabet, transitions, prefix, k, rng)[0]
            x0 = _continuation_orbit(alphabet, transitions, prefix, k, rng)[0]
            worst = max(worst, abs(2.0 * math.log(abs(x)) - 2.0 * math.log(abs(x0))))
        logs.append(math.log(max(worst, 1e-300)))
    return float(linregress(list(depths), logs).slope)


PRESSURE_COLUMNS = ["R", "s", "n", "lower", "upper", "center"]


def write_pressure_csv(R: float, estimates: Iterable[PressureEstimate], path: Path):
    with Path(path).open("w") as handle:
        handle.write(",".join(PRESSURE_COLUMNS) + "\n")
        for e in estimates:
            values = [format(R, ".17g"), format(e.s, ".17g"), str(e.depth)]
            values += [format(x, ".17g") for x in (e.lower, e.upper, e.center)]
            handle.write(",".join(values) + "\n")


def write_delta_json(estimate: DeltaEstimate, path: Path):
    data = {
        "R": estimate.R,
        "delta": format(estimate.delta, ".17g"),
        "lo": format(estimate.lo, ".17g"),
        "hi": format(estimate.hi, ".17g"),
        "certified": estimate.certified,
        "depth": estimate.depth,
        "tail": None if estimate.tail is None else format(estimate.tail, ".17g"),
    }
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
