"""
Geodesic Lab - Character Sums Module

This module realizes the additive characters of Z[i]/(q) through the trace
pairing (h, z) -> Re(h z conj(q)) / N(q), and evaluates Kloosterman sums and
the SL2 dot-product character sums against their Weil-type bounds.
"""

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .congruence import enumerate_sl2, sl2_order
from .errors import BoundViolationError
from .gaussian import GaussianInt, ResidueRing, factor, is_gaussian_prime

SUM_TOL = 1e-9


@dataclass(frozen=True)
class AdditiveCharacter:
    """chi_h(z) = exp(2 pi i Re(h z conj(q)) / N(q))"""

    ring: ResidueRing
    multiplier: GaussianInt

    @property
    def order(self) -> int:
        """Least k >= 1 with k * h = 0 mod q"""
        for k in range(1, self.ring.size + 1):
            if self.ring.size % k == 0 and self.ring.is_zero(self.multiplier * k):
                return k
        raise AssertionError(f"Character {self.multiplier} mod {self.ring.modulus} has no order")

    def is_trivial(self) -> bool:
        return self.ring.is_zero(self.multiplier)

    def phase(self, z: GaussianInt) -> int:
        """Re(h z conj(q)) mod N(q)"""
        w = self.multiplier * GaussianInt.coerce(z) * self.ring.modulus.conjugate()
        return w.re % self.ring.size

    def __call__(self, z: GaussianInt) -> complex:
        return complex(np.exp(2j * math.pi * self.phase(z) / self.ring.size))

    def phase_table(self) -> np.ndarray:
        """Phase of every residue, indexed like ResidueRing.index"""
        hq = self.multiplier * self.ring.modulus.conjugate()
        elements = self.ring.elements
        re_part = np.array([e.re for e in elements], dtype=np.int64)
        im_part = np.array([e.im for e in elements], dtype=np.int64)
        return np.mod(hq.re * re_part - hq.im * im_part, self.ring.size)

    def values(self) -> np.ndarray:
        return np.exp(2j * np.pi * self.phase_table() / self.ring.size)


def all_characters(ring: ResidueRing) -> List[AdditiveCharacter]:
    return [AdditiveCharacter(ring, h) for h in ring.elements]


def characters_of_order(ring: ResidueRing, q: int) -> List[AdditiveCharacter]:
    """
    Additive characters of exact order q.

    Raises:
        ValueError: q does not divide N(modulus)
    """
    if q < 1 or ring.size % q:
        raise ValueError(f"Order {q} does not divide the ring size {ring.size}")
    return [chi for chi in all_characters(ring) if chi.order == q]


def standard_character(ring: ResidueRing) -> AdditiveCharacter:
    """The character with chi(1) = exp(2 pi i / N), when one exists"""
    for chi in all_characters(ring):
        if chi.phase(GaussianInt(1, 0)) == 1 % ring.size:
            return chi
    raise ValueError(f"No character mod {ring.modulus} sends 1 to a primitive N-th root of unity")


def _require_nontrivial_field(chi: AdditiveCharacter):
    if chi.is_trivial():
        raise ValueError("Kloosterman sums need a nontrivial character")
    if not is_gaussian_prime(chi.ring.modulus):
        raise ValueError(f"Kloosterman sums need a prime modulus, got {chi.ring.modulus}")


def kloosterman(chi: AdditiveCharacter, a: GaussianInt, b: GaussianInt) -> complex:
    """K(chi; a, b) = sum over units c of chi(a c + b c^-1)"""
    _require_nontrivial_field(chi)
    ring = chi.ring
    units = np.array(ring.units, dtype=np.int64)
    inverses = ring.inv_table[units]
    ai, bi = ring.index(GaussianInt.coerce(a)), ring.index(GaussianInt.coerce(b))
    arguments = ring.add_table[ring.mul_table[ai, units], ring.mul_table[bi, inverses]]
    return complex(np.sum(chi.values()[arguments]))


def kloosterman_bound(chi: AdditiveCharacter) -> float:
    return 2.0 * math.sqrt(chi.ring.size)


def check_kloosterman(chi: AdditiveCharacter) -> float:
    """
    Largest |K(chi; a, b)| over all residues a, b.

    Raises:
        BoundViolationError: some value exceeds 2 N(q)^(1/2)
    """
    _require_nontrivial_field(chi)
    ring = chi.ring
    values = chi.values()
    units = np.array(ring.units, dtype=np.int64)
    inverses = ring.inv_table[units]
    mul, add = ring.mul_table, ring.add_table
    # sums[a, b] over c
    arguments = add[mul[:, units][:, None, :], mul[:, inverses][None, :, :]]
    magnitudes = np.abs(values[arguments].sum(axis=2))
    worst = float(magnitudes.max())
    bound = kloosterman_bound(chi)
    violations = int(np.count_nonzero(magnitudes > bound + SUM_TOL))
    if violations:
        raise BoundViolationError(f"Kloosterman sum {worst:.6f} exceeds Weil bound {bound:.6f} mod {ring.modulus}", violations)
    return worst


def _xi_indices(ring: ResidueRing, xi: Sequence[GaussianInt]) -> np.ndarray:
    if len(xi) != 4:
        raise ValueError(f"xi needs four components, got {len(xi)}")
    return np.array([ring.index(GaussianInt.coerce(v)) for v in xi], dtype=np.int64)


def _dot(ring: ResidueRing, group: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """s . xi residue index for each group element (rows) and each xi (columns)"""
    mul, add = ring.mul_table, ring.add_table
    g = group.astype(np.int64)
    terms = [mul[g[:, k][:, None], xi[:, k][None, :]] for k in range(4)]
    return add[add[terms[0], terms[1]], add[terms[2], terms[3]]]


def sl2_charsum(q: GaussianInt, chi: AdditiveCharacter, xi: Sequence[GaussianInt]) -> complex:
    """Sum over s in SL2(q) of chi(a x + b y + c z + d w), by direct enumeration"""
    ring = chi.ring
    if ring != ResidueRing(q):
        raise ValueError(f"Character modulus {ring.modulus} does not match {q}")
    group = enumerate_sl2(q)
    dots = _dot(ring, group, _xi_indices(ring, xi)[None, :])[:, 0]
    return complex(np.sum(chi.values()[dots]))


def sl2_charsum_strata(q: GaussianInt, chi: AdditiveCharacter, xi: Sequence[GaussianInt]) -> complex:
    """
    The same sum for a prime modulus, split into the c = 0 and c != 0 strata.

    For y != 0 the c = 0 stratum vanishes and the rest is
    N K(chi; z - y^-1 w x, -y); for y = 0 both strata reduce to complete sums.
    """
    ring = chi.ring
    if not is_gaussian_prime(ring.modulus):
        raise ValueError(f"Strata reduction needs a prime modulus, got {ring.modulus}")
    if chi.is_trivial():
        return complex(sl2_order(q))
    x, y, z, w = (ring.reduce(GaussianInt.coerce(v)) for v in xi)
    n = ring.size
    if not ring.is_zero(y):
        y_inv = ring.element(int(ring.inv_table[ring.index(y)]))
        return n * kloosterman(chi, z - y_inv * w * x, -y)
    c_zero = n * kloosterman(chi, x, w)
    if not ring.is_zero(w):
        return c_zero
    values = chi.values()
    units = np.array(ring.units, dtype=np.int64)
    sum_a = np.sum(values[ring.mul_table[ring.index(x), :]])
    sum_c = np.sum(values[ring.mul_table[ring.index(z), units]])
    return c_zero + complex(n * sum_a * sum_c)


def sl2_charsum_bound(q: GaussianInt) -> float:
    return 2.0 * GaussianInt.coerce(q).norm() ** 1.5


class PrimeComponent(NamedTuple):
    prime: GaussianInt
    character: AdditiveCharacter


def factor_character(chi: AdditiveCharacter) -> List[PrimeComponent]:
    """chi(z) = prod over p | q of chi_p(z mod p) for a square-free modulus"""
    q = chi.ring.modulus
    factorization = factor(q)
    if not factorization.is_squarefree():
        raise ValueError(f"Character factorization needs a square-free modulus, got {q}")
    components = []
    for prime in factorization.primes():
        local = ResidueRing(prime)
        rest = q.exact_div(prime)
        inverse = local.element(int(local.inv_table[local.index(rest)]))
        idempotent = rest * inverse
        target = [Fraction(chi.phase(idempotent * u), chi.ring.size) for u in local.elements]
        for h in local.elements:
            candidate = AdditiveCharacter(local, h)
            if all(Fraction(candidate.phase(u), local.size) == t for u, t in zip(local.elements, target)):
                components.append(PrimeComponent(prime, candidate))
                break
        else:
            raise AssertionError(f"No local character mod {prime} matches {chi.multiplier} mod {q}")
    return components


def sl2_charsum_factored(q: GaussianInt, chi: AdditiveCharacter, xi: Sequence[GaussianInt]) -> complex:
    """Product over prime divisors of the local SL2 sums"""
    total = complex(1.0)
    for prime, local in factor_character(chi):
        total *= sl2_charsum(prime, local, xi)
    return total


class MarginRow(NamedTuple):
    q: GaussianInt
    character_index: int
    xi: Tuple[GaussianInt, ...]
    magnitude: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.magnitude


def charsum_margins(
    q: GaussianInt,
    characters: Optional[Iterable[AdditiveCharacter]] = None,
    xis: Optional[Iterable[Sequence[GaussianInt]]] = None,
    batch: int = 512,
    strict: bool = True,
) -> List[MarginRow]:
    """
    |sum| against 2 N(q)^(3/2) for nontrivial characters and vectors xi.

    By default xi ranges over all vectors with unit components. Since
    chi_h(s . xi) = chi_1(s . h xi), every sum is read off the sums of chi_1.

    Raises:
        BoundViolationError: some sum exceeds the bound and strict is set
    """
    ring = ResidueRing(q)
    q = ring.modulus
    characters = list(characters) if characters is not None else [chi for chi in all_characters(ring) if not chi.is_trivial()]
    if xis is None:
        units = ring.units
        xi_array = np.array(list(itertools.product(units, repeat=4)), dtype=np.int64)
    else:
        xi_array = np.array([_xi_indices(ring, xi) for xi in xis], dtype=np.int64)
    group = enumerate_sl2(q)
    base = AdditiveCharacter(ring, GaussianInt(1, 0)).values()
    bound = sl2_charsum_bound(q)
    rows: List[MarginRow] = []
    for index, chi in enumerate(characters):
        h = ring.index(chi.multiplier)
        scaled = ring.mul_table[h, xi_array]
        for start in range(0, len(scaled), batch):
            block = scaled[start: start + batch]
            sums = base[_dot(ring, group, block)].sum(axis=0)
            for offset, value in enumerate(sums):
                xi = tuple(ring.element(int(k)) for k in xi_array[start + offset])
                rows.append(MarginRow(q, index, xi, float(abs(value)), bound))
    violations = [row for row in rows if row.margin < -SUM_TOL]
    if violations and strict:
        worst = min(violations, key=lambda row: row.margin)
        raise BoundViolationError(
            f"SL2 character sum {worst.magnitude:.6f} exceeds {bound:.6f} mod {q} at xi = {tuple(str(v) for v in worst.xi)}",
            len(violations),
        )
    return rows


def write_margins_csv(rows: Iterable[MarginRow], path: Path):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["q", "character_index", "xi", "abs_sum", "bound", "margin"])
        for row in rows:
            writer.writerow([
                str(row.q), row.character_index, " ".join(str(v) for v in row.xi),
                format(row.magnitude, ".17g"), format(row.bound, ".17g"), format(row.margin, ".17g"),
            ])
