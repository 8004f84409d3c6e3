"""
Geodesic Lab - Congruence Module

This module works with SL2 over the residue rings Z[i]/(q): reduction of
integral matrices, full enumeration for small moduli, trace-fiber counts,
group orders, the local densities rho_t and beta, generator checks for the
branch matrices, and equidistribution statistics of norm-ball matrices
across residue classes.
"""

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import linregress

from .errors import NormBoundError
from .gaussian import (
    GaussianInt,
    IntMat,
    Mat2,
    ONE,
    ONE_PLUS_I,
    ResidueRing,
    factor,
    is_gaussian_prime,
)
from .geodesics import Alphabet

ENUMERATION_LIMIT = ResidueRing.TABLE_LIMIT


@dataclass(frozen=True)
class SL2Residue:
    """Element of SL2(Z[i]/(q)) with entries stored as reduced representatives"""

    ring: ResidueRing
    a: GaussianInt
    b: GaussianInt
    c: GaussianInt
    d: GaussianInt

    @classmethod
    def of(cls, ring: ResidueRing, a, b, c, d) -> "SL2Residue":
        a, b, c, d = (ring.reduce(GaussianInt.coerce(x)) for x in (a, b, c, d))
        if not ring.is_zero(a * d - b * c - ONE):
            raise ValueError(f"Determinant of [[{a}, {b}], [{c}, {d}]] is not 1 mod {ring.modulus}")
        return cls(ring, a, b, c, d)

    @classmethod
    def identity(cls, ring: ResidueRing) -> "SL2Residue":
        return cls.of(ring, 1, 0, 0, 1)

    def __matmul__(self, other: "SL2Residue") -> "SL2Residue":
        if other.ring != self.ring:
            raise ValueError(f"Cannot multiply residues mod {self.ring.modulus} and {other.ring.modulus}")
        r = self.ring.reduce
        return SL2Residue(
            self.ring,
            r(self.a * other.a + self.b * other.c),
            r(self.a * other.b + self.b * other.d),
            r(self.c * other.a + self.d * other.c),
            r(self.c * other.b + self.d * other.d),
        )

    def inverse(self) -> "SL2Residue":
        r = self.ring.reduce
        return SL2Residue(self.ring, self.d, r(-self.b), r(-self.c), self.a)

    def trace(self) -> GaussianInt:
        return self.ring.reduce(self.a + self.d)

    def key(self) -> Tuple[int, int, int, int]:
        return tuple(self.ring.index(x) for x in (self.a, self.b, self.c, self.d))

    def is_identity(self) -> bool:
        return self == SL2Residue.identity(self.ring)


def reduce_matrix(m: Mat2, q: GaussianInt) -> SL2Residue:
    ring = q if isinstance(q, ResidueRing) else ResidueRing(q)
    return SL2Residue.of(ring, m.a, m.b, m.c, m.d)


def _require_small(ring: ResidueRing):
    if ring.size > ENUMERATION_LIMIT:
        raise NormBoundError(f"Norm {ring.size} of {ring.modulus} exceeds the enumeration bound {ENUMERATION_LIMIT}")


def _det_minus_one(ring: ResidueRing) -> np.ndarray:
    """ad - 1 as a residue index, for every pair (a, d)"""
    minus_one = ring.neg_table[ring.one]
    return ring.add_table[ring.mul_table, minus_one]


def _bc_counts(ring: ResidueRing) -> np.ndarray:
    return np.bincount(ring.mul_table.ravel(), minlength=ring.size)


def enumerate_sl2(q: GaussianInt) -> np.ndarray:
    """
    Every element of SL2(Z[i]/(q)) as residue indices (a, b, c, d), in lexicographic order.

    Raises:
        NormBoundError: norm of q above the enumeration bound
    """
    ring = ResidueRing(q)
    _require_small(ring)
    n = ring.size
    mul = ring.mul_table.ravel()
    order = np.argsort(mul, kind="stable")
    starts = np.searchsorted(mul[order], np.arange(n + 1))
    targets = _det_minus_one(ring)
    blocks = []
    for a in range(n):
        rows = []
        for d in range(n):
            v = targets[a, d]
            pairs = order[starts[v]: starts[v + 1]]
            if len(pairs):
                block = np.empty((len(pairs), 4), dtype=np.int32)
                block[:, 0] = a
                block[:, 1] = pairs // n
                block[:, 2] = pairs % n
                block[:, 3] = d
                rows.append(block)
        if rows:
            chunk = np.concatenate(rows)
            chunk = chunk[np.lexsort((chunk[:, 3], chunk[:, 2], chunk[:, 1]))]
            blocks.append(chunk)
    return np.concatenate(blocks) if blocks else np.empty((0, 4), dtype=np.int32)


def sl2_order_bruteforce(q: GaussianInt) -> int:
    """|SL2(q)| by counting solutions of bc = ad - 1"""
    ring = ResidueRing(q)
    _require_small(ring)
    return int(_bc_counts(ring)[_det_minus_one(ring)].sum())


def sl2_order(q: GaussianInt) -> int:
    """|SL2(q)| = N(q)^3 prod over p | q of (1 - 1/N(p)^2)"""
    q = GaussianInt.coerce(q)
    if not q:
        raise ValueError("Modulus must be nonzero")
    order = Fraction(q.norm() ** 3)
    for prime in factor(q).primes():
        order *= 1 - Fraction(1, prime.norm() ** 2)
    return int(order)


def trace_histogram(q: GaussianInt) -> np.ndarray:
    """Number of elements of SL2(q) with each trace residue index"""
    ring = ResidueRing(q)
    _require_small(ring)
    weights = _bc_counts(ring)[_det_minus_one(ring)]
    return np.bincount(ring.add_table.ravel(), weights=weights.ravel(), minlength=ring.size).astype(np.int64)


def trace_fiber_count(q: GaussianInt, t) -> int:
    """
    #{g in SL2(q) : tr g = t} for a Gaussian prime q.

    Raises:
        NormBoundError: norm of q above the enumeration bound
    """
    q = GaussianInt.coerce(q)
    if not is_gaussian_prime(q):
        raise ValueError(f"Trace fibers need a Gaussian prime, got {q}")
    ring = ResidueRing(q)
    return int(trace_histogram(q)[ring.index(GaussianInt.coerce(t))])


@lru_cache(maxsize=None)
def _rho_cached(re_part: int, im_part: int, t_re: int, t_im: int) -> Fraction:
    p = GaussianInt(re_part, im_part)
    n = p.norm()
    t = GaussianInt(t_re, t_im)
    if n <= ENUMERATION_LIMIT:
        order = sl2_order(p)
        return Fraction(n * trace_fiber_count(p, t) - order, order)
    if ResidueRing(p).is_zero(t * t - 4):
        return Fraction(1, n * n - 1)
    raise NormBoundError(f"rho_t({p}) for t = {t} needs enumeration, norm {n} exceeds {ENUMERATION_LIMIT}")


def rho_t(p: GaussianInt, t=2) -> Fraction:
    """(N(p) * #{tr = t} - |SL2(p)|) / |SL2(p)|"""
    p = GaussianInt.coerce(p)
    if not is_gaussian_prime(p):
        raise ValueError(f"rho_t needs a Gaussian prime, got {p}")
    t = GaussianInt.coerce(t)
    c = p.canonical()
    return _rho_cached(c.re, c.im, t.re, t.im)


def square_roots_of_four(p: GaussianInt) -> int:
    """#{t mod p : t^2 = 4}"""
    ring = ResidueRing(p)
    if ring.size <= ENUMERATION_LIMIT:
        four = ring.index(GaussianInt(4, 0))
        return int(np.count_nonzero(np.diag(ring.mul_table) == four))
    return 1 if p.canonical() == ONE_PLUS_I else 2


def beta(q: GaussianInt) -> Fraction:
    """
    Local density of square-free-discriminant traces, multiplicative over q.

    Raises:
        ValueError: q is not square-free
    """
    q = GaussianInt.coerce(q)
    if not q:
        raise ValueError("Modulus must be nonzero")
    if q.is_unit():
        return Fraction(1)
    factorization = factor(q)
    if not factorization.is_squarefree():
        raise ValueError(f"beta needs a square-free modulus, got {q}")
    value = Fraction(1)
    for prime in factorization.primes():
        value *= square_roots_of_four(prime) * (1 + rho_t(prime)) / prime.norm()
    return value


def _reduce_array(ring: ResidueRing, matrices: np.ndarray) -> np.ndarray:
    """(M, 8) integer matrices to (M, 4) residue indices"""
    return np.stack([ring.index_array(matrices[:, 2 * k], matrices[:, 2 * k + 1]) for k in range(4)], axis=1)


def _keys(indices: np.ndarray, n: int) -> np.ndarray:
    idx = indices.astype(np.int64)
    return ((idx[:, 0] * n + idx[:, 1]) * n + idx[:, 2]) * n + idx[:, 3]


def group_closure_mod(q: GaussianInt, matrices: Iterable[Mat2]) -> np.ndarray:
    """Subgroup of SL2(q) generated by the reductions of the given matrices, as sorted keys"""
    ring = ResidueRing(q)
    _require_small(ring)
    n = ring.size
    mul, add = ring.mul_table, ring.add_table
    generators = [reduce_matrix(m, ring).key() for m in matrices]
    seen = _keys(np.array([SL2Residue.identity(ring).key()]), n)
    frontier = np.array([SL2Residue.identity(ring).key()], dtype=np.int64)
    while len(frontier):
        found = []
        for a, b, c, d in generators:
            x = frontier
            product = np.stack([
                add[mul[x[:, 0], a], mul[x[:, 1], c]],
                add[mul[x[:, 0], b], mul[x[:, 1], d]],
                add[mul[x[:, 2], a], mul[x[:, 3], c]],
                add[mul[x[:, 2], b], mul[x[:, 3], d]],
            ], axis=1)
            found.append(product)
        candidates = np.concatenate(found)
        keys, first = np.unique(_keys(candidates, n), return_index=True)
        fresh = ~np.isin(keys, seen)
        frontier = candidates[first[fresh]]
        seen = np.union1d(seen, keys[fresh])
    return seen


def quasirandom_dimension(p: GaussianInt) -> Fraction:
    """Lower bound (N(p) - 1) / 2 for the dimension of a nontrivial irreducible representation of SL2(p)"""
    return Fraction(GaussianInt.coerce(p).norm() - 1, 2)


def reduces_onto(q: GaussianInt, matrices: Iterable[Mat2]) -> bool:
    return len(group_closure_mod(q, matrices)) == sl2_order(q)


class EquidistReport(BaseModel):
    """Distribution of norm-ball matrices across the classes of SL2(q)"""

    q: Tuple[int, int] = Field(description="Modulus (re, im)")
    X: float = Field(description="Norm-ball radius")
    R: Optional[float] = Field(default=None, description="Partition radius")
    total: int = Field(description="Number of matrices binned")
    group_order: int = Field(description="|SL2(q)|")
    classes_hit: int = Field(description="Classes with a nonzero count")
    expected: float = Field(description="total / |SL2(q)|")
    max_rel_dev: float = Field(description="max |count - expected| / expected over all classes")
    l2_dev: float = Field(description="Root-mean-square relative deviation")
    trace_max_rel_dev: float = Field(description="Max relative deviation across trace levels")
    counts: List[int] = Field(description="Count per class index in lexicographic order")


def equidist_stats(matrices: Sequence[IntMat], q: GaussianInt, X: float, R: Optional[float] = None) -> EquidistReport:
    """
    Bin matrices by their reduction mod q and compare with the uniform distribution.

    Args:
        matrices: Integer matrices in to_ints() layout
        q: Modulus with norm within the enumeration bound
        X: Ball radius the matrices were drawn from
        R: Partition radius, recorded in the report

    Returns:
        EquidistReport with per-class counts indexed like enumerate_sl2(q)
    """
    if len(matrices) == 0:
        raise ValueError(f"No matrices to bin at X = {X}")
    q = GaussianInt.coerce(q)
    ring = ResidueRing(q)
    n = ring.size
    group = enumerate_sl2(q)
    group_keys = _keys(group, n)
    reduced = _reduce_array(ring, np.asarray(matrices, dtype=np.int64))
    positions = np.searchsorted(group_keys, _keys(reduced, n))
    counts = np.bincount(positions, minlength=len(group))
    order = len(group)
    expected = len(matrices) / order
    relative = (counts - expected) / expected

    traces = ring.add_table[reduced[:, 0], reduced[:, 3]]
    histogram = trace_histogram(q)
    levels = histogram > 0
    trace_counts = np.bincount(traces, minlength=n)
    trace_expected = len(matrices) * histogram / order
    trace_relative = (trace_counts[levels] - trace_expected[levels]) / trace_expected[levels]

    canonical = ring.modulus
    return EquidistReport(
        q=(canonical.re, canonical.im),
        X=X,
        R=R,
        total=int(counts.sum()),
        group_order=order,
        classes_hit=int(np.count_nonzero(counts)),
        expected=expected,
        max_rel_dev=float(np.max(np.abs(relative))),
        l2_dev=float(math.sqrt(np.mean(relative ** 2))),
        trace_max_rel_dev=float(np.max(np.abs(trace_relative))),
        counts=counts.astype(int).tolist(),
    )


def fit_decay(xs: Sequence[float], deviations: Sequence[float]) -> float:
    """Exponent of deviation ~ X^slope by least squares on log-log data"""
    result = linregress(np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(deviations, dtype=float)))
    return float(result.slope)


def write_equidist_csv(report: EquidistReport, path: Path):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["R", "X", "q_re", "q_im", "class_index", "count", "expected"])
        R = "" if report.R is None else format(report.R, ".17g")
        for index, count in enumerate(report.counts):
            writer.writerow([R, format(report.X, ".17g"), report.q[0], report.q[1], index, count, format(report.expected, ".17g")])


GENERATORS: Dict[str, Mat2] = {
    "T1": Mat2.of(1, 1, 0, 1),
    "Ti": Mat2.of(1, GaussianInt(0, 1), 0, 1),
    "Q": Mat2(GaussianInt(0, -1), GaussianInt(0, 0), GaussianInt(0, 0), GaussianInt(0, 1)),
    "S": Mat2.of(0, -1, 1, 0),
}

Factor = Tuple[int, int]


class GeneratorReport(BaseModel):
    """Witness products of branch matrices for the generators of SL2(Z[i])"""

    ok: bool = Field(description="Every generator has a witness")
    witnesses: Dict[str, List[Tuple[int, int]]] = Field(description="Generator -> [(label, +1 or -1)], product left to right")
    missing: List[str] = Field(default_factory=list, description="Generators without a witness within the depth")
    depth: int = Field(description="Longest product searched")


def _product(alphabet: Alphabet, word: Sequence[Factor]) -> Mat2:
    result = Mat2.identity()
    for label, exponent in word:
        result = result @ (alphabet.forward[label] if exponent > 0 else alphabet.inverse[label])
    return result


def verify_generators(alphabet: Alphabet, targets: Optional[Dict[str, Mat2]] = None) -> GeneratorReport:
    """
    Meet-in-the-middle search for each generator as a product of at most four
    branch matrices or their inverses; each witness is multiplied out exactly.
    """
    targets = targets or GENERATORS
    letters: List[Tuple[Factor, Mat2]] = []
    for label in range(len(alphabet)):
        letters.append(((label, 1), alphabet.forward[label]))
        letters.append(((label, -1), alphabet.inverse[label]))

    half: Dict[IntMat, Tuple[Factor, ...]] = {Mat2.identity().to_ints(): ()}
    for f1, m1 in letters:
        half.setdefault(m1.to_ints(), (f1,))
    for f1, m1 in letters:
        for f2, m2 in letters:
            half.setdefault((m1 @ m2).to_ints(), (f1, f2))

    witnesses: Dict[str, List[Factor]] = {}
    missing: List[str] = []
    for name, target in targets.items():
        best: Optional[Tuple[Factor, ...]] = None
        for key, left in half.items():
            right = half.get((Mat2.from_ints(key).inverse() @ target).to_ints())
            if right is not None and (best is None or len(left) + len(right) < len(best)):
                best = left + right
        if best is not None and _product(alphabet, best) == target:
            witnesses[name] = list(best)
        else:
            missing.append(name)
    return GeneratorReport(ok=not missing, witnesses=witnesses, missing=missing, depth=4)
