"""
Geodesic Lab - Sieve Module

This module builds the sifting set of glued words xi || a || omega, tallies
the traces of its matrices without materializing it, and keeps the sieve
ledger |U_q| = beta(q) |Pi| + r(q). It also provides the Mertens and
sieve-dimension checks over Gaussian primes, the almost-prime count, and the
square-free discriminant harvest with trace multiplicities.
"""

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from sympy import primerange

from .congruence import beta
from .errors import NormBoundError
from .gaussian import (
    GaussianInt,
    ResidueRing,
    gaussian_primes_up_to,
    gcd as gaussian_gcd,
    is_squarefree,
)
from .geodesics import Alphabet, semigroup_ball, word_to_ints
from .hurwitz import Partition, build_partition
from .subshift import GlueTable, TransitionMatrix, Word, build_glue_table, build_transitions

DEFAULT_X, DEFAULT_Y, DEFAULT_Z = 32.0, 4.0, 4.0
GLUE_RADIUS = 8.0
LEDGER_LIMIT = 200
EXACT_MERTENS_LIMIT = 1000
EXACT_PRODUCT_LIMIT = 10_000
DEFAULT_ETA = 0.05
EXACT_FLOAT = 2 ** 53


def most_populous_slice(words: Sequence[Tuple[Word, object]]) -> Tuple[int, List[Word]]:
    """Word length with the most words, ties going to the shorter length"""
    lengths = Counter(len(word) for word, _ in words)
    if not lengths:
        raise ValueError("No words to slice")
    best = min(lengths, key=lambda n: (-lengths[n], n))
    return best, [word for word, _ in words if len(word) == best]


class TraceTally(NamedTuple):
    """Distinct traces (re, im) of the glued matrices with multiplicities"""

    traces: np.ndarray
    counts: np.ndarray
    max_frob_sq: int

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> Dict[GaussianInt, int]:
        return {GaussianInt(int(re), int(im)): int(c) for (re, im), c in zip(self.traces, self.counts)}


@dataclass(eq=False)
class SiftingSet:
    """Pi = {xi || iota || a || iota' || omega}, kept as its three factor lists"""

    R: float
    X: float
    Y: float
    Z: float
    l_x: int
    l_z: int
    xi: List[Word]
    aleph: List[Word]
    omega: List[Word]
    alphabet: Alphabet
    glue: GlueTable
    _tally: Optional[TraceTally] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.xi) * len(self.aleph) * len(self.omega)

    @property
    def N(self) -> float:
        return self.X * self.Y * self.Z

    def glued(self, xi: Word, a: Word, omega: Word) -> Word:
        return (
            tuple(xi) + self.glue.connector(xi[-1], a[0]) + tuple(a)
            + self.glue.connector(a[-1], omega[0]) + tuple(omega)
        )

    def materialize(self, limit: int = 200_000) -> List[Word]:
        if self.size > limit:
            raise NormBoundError(f"Sifting set has {self.size} words, above the materialization limit {limit}")
        return [self.glued(x, a, w) for x in self.xi for a in self.aleph for w in self.omega]

    def tally(self) -> TraceTally:
        if self._tally is None:
            self._tally = _tally_traces(self)
        return self._tally

    def constant(self) -> float:
        """Measured C with every glued matrix in B_{C N}"""
        return math.sqrt(self.tally().max_frob_sq) / self.N


def _complex(alphabet: Alphabet, word: Sequence[int]) -> np.ndarray:
    v = word_to_ints(alphabet, word)
    return np.array([[v[0] + 1j * v[1], v[2] + 1j * v[3]], [v[4] + 1j * v[5], v[6] + 1j * v[7]]])


def _tally_traces(sifting: SiftingSet) -> TraceTally:
    """
    Trace of M_omega M_iota' M_a M_iota M_xi for every triple.

    V = M_iota M_xi depends on xi and the first letter of a; W = M_omega M_iota' M_a
    on the rest, and tr(W V) is summed entrywise. Float products are exact only
    while every squared norm stays below 2^53, which is checked.

    Raises:
        NormBoundError: a product leaves the range where floats are exact
    """
    alphabet = sifting.alphabet
    by_first: Dict[int, np.ndarray] = {}
    for first in sorted({a[0] for a in sifting.aleph}):
        by_first[first] = np.array([_complex(alphabet, tuple(x) + sifting.glue.connector(x[-1], first)) for x in sifting.xi])
    tally: Counter = Counter()
    worst = 0
    for a in sifting.aleph:
        v = by_first[a[0]]
        vmax = np.abs(v).max()
        w = np.array([_complex(alphabet, tuple(a) + sifting.glue.connector(a[-1], o[0]) + tuple(o)) for o in sifting.omega])
        if 4 * np.abs(w).max() * vmax >= EXACT_FLOAT:
            raise NormBoundError(f"Factors of word {tuple(a)} are too large for exact float products")
        products = np.einsum("oij,xjk->oxik", w, v)
        traces = products[:, :, 0, 0] + products[:, :, 1, 1]
        frob = np.sum(products.real ** 2 + products.imag ** 2, axis=(2, 3))
        if frob.max() >= EXACT_FLOAT:
            raise NormBoundError(f"Trace products reach ||M||^2 = {frob.max():.3g}, beyond exact float range 2^53")
        worst = max(worst, int(np.rint(frob.max())))
        pairs = np.stack([np.rint(traces.real).ravel(), np.rint(traces.imag).ravel()], axis=1).astype(np.int64)
        keys, counts = np.unique(pairs, axis=0, return_counts=True)
        for (re, im), c in zip(keys, counts):
            tally[(int(re), int(im))] += int(c)
    ordered = sorted(tally)
    return TraceTally(
        traces=np.array(ordered, dtype=np.int64).reshape(len(ordered), 2),
        counts=np.array([tally[k] for k in ordered], dtype=np.int64),
        max_frob_sq=worst,
    )


def build_sifting_set(
    R: float,
    X: float = DEFAULT_X,
    Y: float = DEFAULT_Y,
    Z: float = DEFAULT_Z,
    partition: Optional[Partition] = None,
    glue_partition: Optional[Partition] = None,
) -> SiftingSet:
    """
    Xi and Omega are the most populous fixed-length slices of the semigroup
    balls B_X and B_Z over the radius-R alphabet; Aleph is every word of the
    radius-8 alphabet in B_Y. Words are relabelled into the larger alphabet,
    where the glue table lives.
    """
    if R < 4:
        raise ValueError(f"Sifting set needs R >= 4, got {R}")
    for name, value in (("X", X), ("Y", Y), ("Z", Z)):
        if value < 2:
            raise ValueError(f"{name} must be >= 2, got {value}")
    partition = partition or build_partition(R)
    glue_partition = glue_partition or build_partition(max(R, GLUE_RADIUS))
    small = Alphabet(partition)
    small_transitions = build_transitions(partition, certify=False)
    big = Alphabet(glue_partition)
    big_transitions = build_transitions(glue_partition, certify=False)
    relabel = partition.label_map(glue_partition)

    l_x, xi = most_populous_slice(semigroup_ball(small, small_transitions, X))
    l_z, omega = most_populous_slice(semigroup_ball(small, small_transitions, Z))
    aleph = [word for word, _ in semigroup_ball(big, big_transitions, Y)]
    if not aleph:
        raise ValueError(f"No words of the radius-{glue_partition.radius} alphabet lie in B_{Y}")
    return SiftingSet(
        R=R,
        X=X,
        Y=Y,
        Z=Z,
        l_x=l_x,
        l_z=l_z,
        xi=[tuple(int(relabel[x]) for x in word) for word in xi],
        aleph=aleph,
        omega=[tuple(int(relabel[x]) for x in word) for word in omega],
        alphabet=big,
        glue=build_glue_table(big_transitions),
    )


def _require_squarefree(q: GaussianInt):
    if not q:
        raise ValueError("Modulus must be nonzero")
    if not q.is_unit() and not is_squarefree(q):
        raise ValueError(f"Modulus {q} is not square-free")


def _discriminant_divisible(traces: np.ndarray, q: GaussianInt) -> np.ndarray:
    ring = ResidueRing(q)
    re, im = traces[:, 0], traces[:, 1]
    return ring.index_array(re * re - im * im - 4, 2 * re * im) == 0


def count_U(sifting: SiftingSet, q: GaussianInt) -> int:
    """#{w in Pi : tr^2 - 4 = 0 mod q}, tested on each distinct trace"""
    q = GaussianInt.coerce(q)
    _require_squarefree(q)
    tally = sifting.tally()
    if q.is_unit():
        return tally.total
    return int(tally.counts[_discriminant_divisible(tally.traces, q)].sum())


def count_U_by_levels(sifting: SiftingSet, q: GaussianInt) -> int:
    """The same count as a sum of trace-level sets over the square roots of 4 mod q"""
    q = GaussianInt.coerce(q)
    _require_squarefree(q)
    tally = sifting.tally()
    if q.is_unit():
        return tally.total
    ring = ResidueRing(q)
    roots = [ring.index(t) for t in ring.elements if ring.is_zero(t * t - 4)]
    levels = ring.index_array(tally.traces[:, 0], tally.traces[:, 1])
    return int(sum(tally.counts[levels == root].sum() for root in roots))


def squarefree_moduli(Q: int) -> List[GaussianInt]:
    """Canonical square-free Gaussian integers with norm <= Q, the unit 1 first"""
    if Q > LEDGER_LIMIT:
        raise NormBoundError(f"Ledger level {Q} exceeds the desk bound {LEDGER_LIMIT}")
    out = []
    bound = math.isqrt(Q)
    for re in range(1, bound + 1):
        for im in range(0, bound + 1):
            z = GaussianInt(re, im)
            if z.norm() <= Q and z.canonical() == z and is_squarefree(z):
                out.append(z)
    return sorted(out, key=lambda z: (z.norm(), z.re, z.im))


class LedgerRow(NamedTuple):
    q: GaussianInt
    U: int
    beta: Fraction
    main: Fraction
    remainder: Fraction


@dataclass
class SieveLedger:
    """Congruence counts against beta(q)|Pi| for every square-free modulus up to the level"""

    level: int
    size: int
    rows: List[LedgerRow]

    @property
    def total_remainder(self) -> Fraction:
        return sum((abs(row.remainder) for row in self.rows), Fraction(0))

    @property
    def health(self) -> float:
        """sum |r(q)| / |Pi|"""
        return float(self.total_remainder / self.size) if self.size else 0.0


def sieve_ledger(sifting: SiftingSet, Q: int) -> SieveLedger:
    size = sifting.tally().total
    rows = []
    for q in squarefree_moduli(Q):
        U = count_U(sifting, q)
        b = beta(q)
        main = b * size
        rows.append(LedgerRow(q, U, b, main, U - main))
    return SieveLedger(level=Q, size=size, rows=rows)


def write_ledger_csv(ledger: SieveLedger, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["q_re", "q_im", "Uq", "beta_num", "beta_den", "main", "remainder"])
        for row in ledger.rows:
            writer.writerow([
                row.q.re, row.q.im, row.U, row.beta.numerator, row.beta.denominator,
                str(row.main), str(row.remainder),
            ])


def almost_prime_count(sifting: SiftingSet, level: int) -> int:
    """Words whose tr^2 - 4 has no Gaussian prime factor of norm <= level"""
    tally = sifting.tally()
    survivors = np.ones(len(tally.counts), dtype=bool)
    for prime in gaussian_primes_up_to(level):
        survivors &= ~_discriminant_divisible(tally.traces, prime)
    return int(tally.counts[survivors].sum())


class MertensReport(BaseModel):
    """Sums of 1/N(p) over Gaussian primes against log log n"""

    n: int
    total: float = Field(description="sum over N(p) <= n of 1/N(p)")
    exact: Optional[str] = Field(default=None, description="The same sum as an exact fraction, for small n")
    deviation: float = Field(description="total - log log n")
    split_one: float = Field(description="sum over rational p <= n, p = 1 mod 4 of 1/p")
    split_three: float = Field(description="sum over rational p <= n, p = 3 mod 4 of 1/p")

    @property
    def split_one_drift(self) -> float:
        return self.split_one - 0.5 * math.log(math.log(self.n))

    @property
    def split_three_drift(self) -> float:
        return self.split_three - 0.5 * math.log(math.log(self.n))


def mertens_check(n: int) -> MertensReport:
    if n < 10:
        raise ValueError(f"Mertens check needs n >= 10, got {n}")
    norms: List[int] = []
    split_one = split_three = 0.0
    for p in primerange(2, n + 1):
        if p == 2:
            norms.append(2)
        elif p % 4 == 1:
            norms.extend((p, p))
            split_one += 1.0 / p
        else:
            split_three += 1.0 / p
            if p * p <= n:
                norms.append(p * p)
    total = math.fsum(1.0 / v for v in norms)
    exact = str(sum((Fraction(1, v) for v in norms), Fraction(0))) if n <= EXACT_MERTENS_LIMIT else None
    return MertensReport(
        n=n,
        total=total,
        exact=exact,
        deviation=total - math.log(math.log(n)),
        split_one=split_one,
        split_three=split_three,
    )


class DimensionReport(BaseModel):
    """prod over w <= N(p) < z of (1 - beta(p))^-1 against (log z / log w)^2"""

    w: float
    z: float
    product: float
    exact: Optional[str] = Field(default=None, description="Exact product for small z")
    reference: float
    ratio: float


def dimension_product(w: float, z: float) -> DimensionReport:
    if not 2 <= w <= z:
        raise ValueError(f"Need 2 <= w <= z, got w={w}, z={z}")
    if z > 10**6:
        raise NormBoundError(f"Dimension product limited to z <= 10^6, got {z}")
    numerator, denominator = 1, 1
    log_product = 0.0
    primes = gaussian_primes_up_to(max(2, math.ceil(z))) if z > 2 else []
    for p in primes:
        norm = p.norm()
        if not (w <= norm < z):
            continue
        b = beta(p)
        factor = 1 / (1 - b)
        log_product += math.log(factor)
        if z <= EXACT_PRODUCT_LIMIT:
            numerator *= factor.numerator
            denominator *= factor.denominator
    reference = (math.log(z) / math.log(w)) ** 2
    product = math.exp(log_product)
    return DimensionReport(
        w=w,
        z=z,
        product=product,
        exact=str(Fraction(numerator, denominator)) if z <= EXACT_PRODUCT_LIMIT else None,
        reference=reference,
        ratio=product / reference,
    )


def squarefree_disc_shortcut(t: GaussianInt) -> bool:
    """tr^2 - 4 = (t - 2)(t + 2) is square-free iff both factors are and they are coprime"""
    t = GaussianInt.coerce(t)
    lower, upper = t - 2, t + 2
    if not lower or not upper:
        return False
    return is_squarefree(lower) and is_squarefree(upper) and gaussian_gcd(lower, upper).is_unit()


def trace_multiplicity_bruteforce(X: float, t: GaussianInt) -> int:
    """#{s in SL2(Z[i]) : ||s||^2 < X^2, tr s = t} by direct search, X <= 8"""
    if X > 8:
        raise NormBoundError(f"Brute-force trace multiplicity limited to X <= 8, got {X}")
    t = GaussianInt.coerce(t)
    limit = X * X
    reach = int(math.floor(X))
    disk = [GaussianInt(re, im) for re in range(-reach, reach + 1) for im in range(-reach, reach + 1) if re * re + im * im < limit]
    count = 0
    for a in disk:
        d = t - a
        rest = limit - a.norm() - d.norm()
        if rest <= 0:
            continue
        product = a * d - 1
        if not product:
            smaller = [z for z in disk if z.norm() < rest]
            count += 2 * len(smaller) - 1
            continue
        for b in disk:
            if not b or b.norm() >= rest:
                continue
            c = product.exact_div(b)
            if c is not None and b.norm() + c.norm() < rest:
                count += 1
    return count


class HarvestRow(NamedTuple):
    trace: GaussianInt
    multiplicity: int
    discriminant: GaussianInt
    squarefree: bool


@dataclass
class HarvestReport:
    """Traces of Gamma_R in B_X with multiplicities and the square-free discriminant family"""

    R: float
    X: float
    words: int
    rows: List[HarvestRow]
    # square-free traces with M(t) >= N(t)^(2 delta - 2 - 2 eta)
    threshold_count: Optional[int] = None
    delta: Optional[float] = None
    eta: float = DEFAULT_ETA

    @property
    def squarefree_traces(self) -> List[GaussianInt]:
        return [row.trace for row in self.rows if row.squarefree]

    @property
    def discriminants(self) -> List[GaussianInt]:
        return sorted({row.discriminant for row in self.rows if row.squarefree}, key=lambda d: (d.norm(), d.re, d.im))


def harvest(
    alphabet: Alphabet,
    transitions: TransitionMatrix,
    X: float,
    delta: Optional[float] = None,
    eta: float = DEFAULT_ETA,
) -> HarvestReport:
    """
    Bucket the words of Gamma_R in B_X by trace, keep the traces with
    square-free t^2 - 4, and count those meeting the multiplicity threshold.
    """
    words = semigroup_ball(alphabet, transitions, X)
    multiplicity: Counter = Counter()
    for _, m in words:
        multiplicity[GaussianInt(m[0] + m[6], m[1] + m[7])] += 1
    rows = []
    for t in sorted(multiplicity, key=lambda z: (z.norm(), z.re, z.im)):
        D = t * t - 4
        rows.append(HarvestRow(t, multiplicity[t], D, bool(D) and is_squarefree(D)))
    threshold = None
    if delta is not None:
        threshold = sum(
            1 for row in rows
            if row.squarefree and row.multiplicity >= row.trace.norm() ** (2 * delta - 2 - 2 * eta)
        )
    return HarvestReport(
        R=alphabet.partition.radius,
        X=X,
        words=len(words),
        rows=rows,
        threshold_count=threshold,
        delta=delta,
        eta=eta,
    )


def write_harvest_csv(report: HarvestReport, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t_re", "t_im", "M", "disc_re", "disc_im", "squarefree"])
        for row in report.rows:
            writer.writerow([row.trace.re, row.trace.im, row.multiplicity, row.discriminant.re, row.discriminant.im, int(row.squarefree)])
