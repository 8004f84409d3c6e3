"""
Geodesic Lab - Gaussian Integer Module

This module provides exact arithmetic in Z[i]: norms, units, nearest-rounding
division, GCD, factorization, square-free tests, prime enumeration, residue
rings Z[i]/(q), and 2x2 matrices over Z[i].
"""

import os
import re
from dataclasses import dataclass
from functools import lru_cache
from math import gcd as _int_gcd
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import factorint, isprime, primerange
from sympy.ntheory import sqrt_mod

from .errors import NormBoundError

DEFAULT_FACTOR_BOUND = int(os.getenv("GEODESIC_LAB_FACTOR_BOUND", str(10**12)))

_GAUSSIAN_PATTERN = re.compile(
    r"^\(?\s*(?P<re>[+-]?\d+)?\s*(?:(?P<sign>[+-])\s*(?P<im>\d*)\s*\*?\s*i)?\s*\)?$"
)
_PURE_IMAG_PATTERN = re.compile(r"^\(?\s*(?P<sign>[+-]?)\s*(?P<im>\d*)\s*\*?\s*i\s*\)?$")


@dataclass(frozen=True, order=True)
class GaussianInt:
    """Exact element re + im*i of Z[i]"""

    re: int
    im: int = 0

    @classmethod
    def coerce(cls, value: Union["GaussianInt", int, complex, str, Sequence[int]]) -> "GaussianInt":
        """Build a GaussianInt from an int, complex with integral parts, string or pair"""
        if isinstance(value, GaussianInt):
            return value
        if isinstance(value, bool):
            raise ValueError(f"Cannot interpret {value!r} as a Gaussian integer")
        if isinstance(value, (int, np.integer)):
            return cls(int(value), 0)
        if isinstance(value, complex):
            if value.real != int(value.real) or value.imag != int(value.imag):
                raise ValueError(f"Complex value {value} has non-integral parts")
            return cls(int(value.real), int(value.imag))
        if isinstance(value, str):
            return parse_gaussian(value)
        if isinstance(value, (tuple, list)) and len(value) == 2:
            return cls(int(value[0]), int(value[1]))
        raise ValueError(f"Cannot interpret {value!r} as a Gaussian integer")

    def __add__(self, other):
        other = _as_gaussian(other)
        if other is None:
            return NotImplemented
        return GaussianInt(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_gaussian(other)
        if other is None:
            return NotImplemented
        return GaussianInt(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        other = _as_gaussian(other)
        if other is None:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        other = _as_gaussian(other)
        if other is None:
            return NotImplemented
        return GaussianInt(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __neg__(self) -> "GaussianInt":
        return GaussianInt(-self.re, -self.im)

    def __pow__(self, exponent: int) -> "GaussianInt":
        if exponent < 0:
            raise ValueError("Negative powers are not Gaussian integers")
        result = ONE
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __divmod__(self, other) -> Tuple["GaussianInt", "GaussianInt"]:
        """Nearest-rounding division: |remainder|^2 <= norm(other)/2"""
        other = _as_gaussian(other)
        if other is None:
            return NotImplemented
        n = other.norm()
        if n == 0:
            raise ZeroDivisionError("Division by zero Gaussian integer")
        num = self * other.conjugate()
        q = GaussianInt((2 * num.re + n) // (2 * n), (2 * num.im + n) // (2 * n))
        return q, self - q * other

    def __floordiv__(self, other) -> "GaussianInt":
        return divmod(self, other)[0]

    def __mod__(self, other) -> "GaussianInt":
        return divmod(self, other)[1]

    def __bool__(self) -> bool:
        return self.re != 0 or self.im != 0

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    def __str__(self) -> str:
        if self.im == 0:
            return str(self.re)
        imag = {1: "i", -1: "-i"}.get(self.im, f"{self.im}i")
        if self.re == 0:
            return imag
        sign = "+" if self.im > 0 else "-"
        magnitude = "" if abs(self.im) == 1 else str(abs(self.im))
        return f"{self.re}{sign}{magnitude}i"

    def conjugate(self) -> "GaussianInt":
        return GaussianInt(self.re, -self.im)

    def norm(self) -> int:
        return self.re * self.re + self.im * self.im

    def is_unit(self) -> bool:
        return self.norm() == 1

    def times_i(self) -> "GaussianInt":
        return GaussianInt(-self.im, self.re)

    def associates(self) -> List["GaussianInt"]:
        out = [self]
        for _ in range(3):
            out.append(out[-1].times_i())
        return out

    def canonical(self) -> "GaussianInt":
        """First-quadrant associate (re > 0, im >= 0); zero maps to zero"""
        if not self:
            return self
        for candidate in self.associates():
            if candidate.re > 0 and candidate.im >= 0:
                return candidate
        raise AssertionError(f"No first-quadrant associate for {self}")

    def exact_div(self, other: "GaussianInt") -> Optional["GaussianInt"]:
        """Quotient if other divides self exactly, otherwise None"""
        q, r = divmod(self, other)
        return None if r else q

    def divides(self, other: "GaussianInt") -> bool:
        if not self:
            return not other
        return not (other % self)


ZERO = GaussianInt(0, 0)
ONE = GaussianInt(1, 0)
I = GaussianInt(0, 1)
UNITS = (ONE, I, GaussianInt(-1, 0), GaussianInt(0, -1))
ONE_PLUS_I = GaussianInt(1, 1)


def _as_gaussian(value) -> Optional[GaussianInt]:
    if isinstance(value, GaussianInt):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return GaussianInt(int(value), 0)
    return None


def parse_gaussian(text: str) -> GaussianInt:
    """Parse strings such as '3', '1+i', '-2i', '3-2i', '(2+i)'"""
    compact = text.strip().replace(" ", "").replace("j", "i")
    if not compact:
        raise ValueError("Empty Gaussian integer literal")
    match = _PURE_IMAG_PATTERN.match(compact)
    if match:
        magnitude = int(match.group("im")) if match.group("im") else 1
        return GaussianInt(0, -magnitude if match.group("sign") == "-" else magnitude)
    match = _GAUSSIAN_PATTERN.match(compact)
    if not match or match.group("re") is None:
        raise ValueError(f"Invalid Gaussian integer literal: {text!r}")
    real = int(match.group("re"))
    imag = 0
    if match.group("sign"):
        magnitude = int(match.group("im")) if match.group("im") else 1
        imag = -magnitude if match.group("sign") == "-" else magnitude
    return GaussianInt(real, imag)


def norm(z: GaussianInt) -> int:
    """Norm re^2 + im^2; multiplicative"""
    return GaussianInt.coerce(z).norm()


def gcd(a: GaussianInt, b: GaussianInt) -> GaussianInt:
    """Greatest common divisor, normalized to the canonical associate"""
    a, b = GaussianInt.coerce(a), GaussianInt.coerce(b)
    if not a and not b:
        raise ValueError("gcd(0, 0) is undefined")
    while b:
        a, b = b, a % b
    return a.canonical()


def content(values: Iterable[GaussianInt]) -> GaussianInt:
    """gcd of a nonempty collection, ignoring zeros"""
    result = ZERO
    for value in values:
        if value:
            result = value.canonical() if not result else gcd(result, value)
    if not result:
        raise ValueError("Content of an all-zero collection is undefined")
    return result


@dataclass(frozen=True)
class GaussianFactorization:
    """unit * prod(prime ** exponent), primes canonical and sorted by (norm, re, im)"""

    unit: GaussianInt
    factors: Tuple[Tuple[GaussianInt, int], ...]

    def value(self) -> GaussianInt:
        result = self.unit
        for prime, exponent in self.factors:
            result = result * prime**exponent
        return result

    def is_squarefree(self) -> bool:
        return all(exponent == 1 for _, exponent in self.factors)

    def primes(self) -> List[GaussianInt]:
        return [prime for prime, _ in self.factors]

    def to_dict(self) -> Dict[str, object]:
        return {
            "unit": str(self.unit),
            "factors": [[str(prime), exponent] for prime, exponent in self.factors],
        }


@lru_cache(maxsize=None)
def split_prime(p: int) -> GaussianInt:
    """Canonical Gaussian prime above a rational prime p = 1 mod 4"""
    if p % 4 != 1 or not isprime(p):
        raise ValueError(f"{p} is not a rational prime congruent to 1 mod 4")
    root = sqrt_mod(p - 1, p)
    return gcd(GaussianInt(p, 0), GaussianInt(int(root), 1))


def primes_above(p: int) -> List[GaussianInt]:
    """Canonical Gaussian primes dividing the rational prime p"""
    if p == 2:
        return [ONE_PLUS_I]
    if p % 4 == 3:
        return [GaussianInt(p, 0)]
    pi = split_prime(p)
    return sorted({pi, pi.conjugate().canonical()}, key=_prime_key)


def _prime_key(z: GaussianInt) -> Tuple[int, int, int]:
    return (z.norm(), z.re, z.im)


def factor(z: GaussianInt, bound: int = DEFAULT_FACTOR_BOUND) -> GaussianFactorization:
    """
    Factor z exactly by factoring its norm over Z and splitting each rational prime.

    Args:
        z: Nonzero Gaussian integer
        bound: Largest accepted norm

    Returns:
        GaussianFactorization whose value() reproduces z
    """
    z = GaussianInt.coerce(z)
    if not z:
        raise ValueError("Cannot factor zero")
    n = z.norm()
    if n > bound:
        raise NormBoundError(f"Norm {n} of {z} exceeds factorization bound {bound}")

    rest = z
    factors: List[Tuple[GaussianInt, int]] = []
    for p in sorted(factorint(n)):
        for prime in primes_above(p):
            exponent = 0
            while True:
                quotient = rest.exact_div(prime)
                if quotient is None:
                    break
                rest = quotient
                exponent += 1
            if exponent:
                factors.append((prime, exponent))

    if not rest.is_unit():
        raise AssertionError(f"Factorization of {z} left non-unit cofactor {rest}")
    factors.sort(key=lambda item: _prime_key(item[0]))
    return GaussianFactorization(unit=rest, factors=tuple(factors))


@lru_cache(maxsize=65536)
def _squarefree_cached(re_part: int, im_part: int) -> bool:
    return factor(GaussianInt(re_part, im_part)).is_squarefree()


def is_squarefree(z: GaussianInt) -> bool:
    """True iff every prime exponent of z is 1 (units are square-free)"""
    z = GaussianInt.coerce(z)
    if not z:
        raise ValueError("Square-freeness of zero is undefined")
    return _squarefree_cached(z.re, z.im)


def is_gaussian_prime(z: GaussianInt) -> bool:
    z = GaussianInt.coerce(z)
    n = z.norm()
    if isprime(n):
        return True
    c = z.canonical()
    return c.im == 0 and c.re % 4 == 3 and isprime(c.re)


def gaussian_primes_up_to(limit: int) -> List[GaussianInt]:
    """One canonical prime per associate class with norm <= limit, sorted by (norm, re, im)"""
    if limit < 2:
        raise ValueError(f"Prime enumeration needs limit >= 2, got {limit}")
    primes: List[GaussianInt] = []
    for p in primerange(2, limit + 1):
        if p % 4 == 3:
            if p * p <= limit:
                primes.append(GaussianInt(p, 0))
            continue
        primes.extend(primes_above(p))
    primes.sort(key=_prime_key)
    return primes


def gaussian_prime_norms_up_to(limit: int) -> Iterator[int]:
    """Norms of canonical Gaussian primes <= limit, with multiplicity, no splitting"""
    for p in primerange(2, limit + 1):
        if p == 2:
            yield 2
        elif p % 4 == 1:
            yield p
            yield p
        elif p * p <= limit:
            yield p * p


def reduce_mod4(z: GaussianInt) -> GaussianInt:
    return GaussianInt(z.re % 4, z.im % 4)


@lru_cache(maxsize=1)
def square_residues_mod4() -> frozenset:
    """All squares in Z[i]/(4), by squaring each of the 16 residues"""
    residues = (GaussianInt(a, b) for a in range(4) for b in range(4))
    return frozenset(reduce_mod4(x * x) for x in residues)


def _signed_mod4(z: GaussianInt) -> GaussianInt:
    r = reduce_mod4(z)
    return GaussianInt(r.re - 4 if r.re == 3 else r.re, r.im - 4 if r.im == 3 else r.im)


def discriminant_residue_class(D: GaussianInt) -> Optional[GaussianInt]:
    """Class of D mod 4 as one of 0, 1, -1, 2i when D is a square mod 4, else None"""
    D = GaussianInt.coerce(D)
    if reduce_mod4(D) not in square_residues_mod4():
        return None
    return _signed_mod4(D)


class ResidueRing:
    """
    Z[i]/(q) with representatives x + y*i, 0 <= x < n/g, 0 <= y < g.

    Here n = norm(q) and g is the rational content of q. The ideal (q) has
    Hermite basis (n/g, 0), (u, g), which gives O(1) reduction.
    """

    TABLE_LIMIT = 200

    def __init__(self, modulus: GaussianInt):
        modulus = GaussianInt.coerce(modulus)
        if not modulus:
            raise ValueError("Residue ring modulus must be nonzero")
        self.modulus = modulus.canonical()
        self.size = self.modulus.norm()
        a, b = self.modulus.re, self.modulus.im
        self.g = _int_gcd(a, b)
        self.width = self.size // self.g
        # b*s + a*t = g  =>  s*q + t*(i*q) = (a*s - b*t) + g*i
        _, s, t = _extended_gcd(b, a)
        self.shift = (a * s - b * t) % self.width if self.width else 0
        self._elements: Optional[List[GaussianInt]] = None
        self._add: Optional[np.ndarray] = None
        self._mul: Optional[np.ndarray] = None
        self._neg: Optional[np.ndarray] = None
        self._inv: Optional[np.ndarray] = None

    def __repr__(self) -> str:
        return f"ResidueRing({self.modulus})"

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        return isinstance(other, ResidueRing) and other.modulus == self.modulus

    def __hash__(self) -> int:
        return hash(("ResidueRing", self.modulus))

    def reduce(self, z: GaussianInt) -> GaussianInt:
        z = GaussianInt.coerce(z)
        k = z.im // self.g
        return GaussianInt((z.re - k * self.shift) % self.width, z.im - k * self.g)

    def index(self, z: GaussianInt) -> int:
        r = self.reduce(z)
        return r.re * self.g + r.im

    def index_array(self, re_part: np.ndarray, im_part: np.ndarray) -> np.ndarray:
        """Vectorised index() over int64 arrays"""
        re_part = np.asarray(re_part, dtype=np.int64)
        im_part = np.asarray(im_part, dtype=np.int64)
        k = np.floor_divide(im_part, self.g)
        x = np.mod(re_part - k * self.shift, self.width)
        y = im_part - k * self.g
        return x * self.g + y

    def element(self, index: int) -> GaussianInt:
        return GaussianInt(index // self.g, index % self.g)

    @property
    def elements(self) -> List[GaussianInt]:
        if self._elements is None:
            self._elements = [self.element(k) for k in range(self.size)]
        return self._elements

    @property
    def zero(self) -> int:
        return 0

    @property
    def one(self) -> int:
        return self.index(ONE)

    def is_zero(self, z: GaussianInt) -> bool:
        z = GaussianInt.coerce(z)
        w = z * self.modulus.conjugate()
        return w.re % self.size == 0 and w.im % self.size == 0

    def _require_tables(self):
        if self.size > self.TABLE_LIMIT:
            raise NormBoundError(
                f"Residue tables need norm <= {self.TABLE_LIMIT}, modulus {self.modulus} has norm {self.size}"
            )

    @property
    def add_table(self) -> np.ndarray:
        if self._add is None:
            self._require_tables()
            re_part = np.array([e.re for e in self.elements], dtype=np.int64)
            im_part = np.array([e.im for e in self.elements], dtype=np.int64)
            self._add = self.index_array(
                re_part[:, None] + re_part[None, :], im_part[:, None] + im_part[None, :]
            )
        return self._add

    @property
    def mul_table(self) -> np.ndarray:
        if self._mul is None:
            self._require_tables()
            re_part = np.array([e.re for e in self.elements], dtype=np.int64)
            im_part = np.array([e.im for e in self.elements], dtype=np.int64)
            prod_re = re_part[:, None] * re_part[None, :] - im_part[:, None] * im_part[None, :]
            prod_im = re_part[:, None] * im_part[None, :] + im_part[:, None] * re_part[None, :]
            self._mul = self.index_array(prod_re, prod_im)
        return self._mul

    @property
    def neg_table(self) -> np.ndarray:
        if self._neg is None:
            self._neg = np.array([self.index(-e) for e in self.elements], dtype=np.int64)
        return self._neg

    @property
    def inv_table(self) -> np.ndarray:
        """Inverse index for units, -1 for non-units"""
        if self._inv is None:
            hits = self.mul_table == self.one
            self._inv = np.where(hits.any(axis=1), hits.argmax(axis=1), -1).astype(np.int64)
        return self._inv

    @property
    def units(self) -> List[int]:
        return [int(k) for k in np.nonzero(self.inv_table >= 0)[0]]

    def is_field(self) -> bool:
        return is_gaussian_prime(self.modulus)


def _extended_gcd(a: int, b: int) -> Tuple[int, int, int]:
    """(g, s, t) with a*s + b*t = g = gcd(a, b) >= 0"""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


IntMat = Tuple[int, int, int, int, int, int, int, int]


@dataclass(frozen=True)
class Mat2:
    """2x2 matrix [[a, b], [c, d]] over Z[i]"""

    a: GaussianInt
    b: GaussianInt
    c: GaussianInt
    d: GaussianInt

    @classmethod
    def of(cls, a, b, c, d) -> "Mat2":
        return cls(*(GaussianInt.coerce(x) for x in (a, b, c, d)))

    @classmethod
    def identity(cls) -> "Mat2":
        return cls(ONE, ZERO, ZERO, ONE)

    @classmethod
    def from_ints(cls, values: Sequence[int]) -> "Mat2":
        """Inverse of to_ints(): (a.re, a.im, b.re, b.im, c.re, c.im, d.re, d.im)"""
        return cls(
            GaussianInt(values[0], values[1]),
            GaussianInt(values[2], values[3]),
            GaussianInt(values[4], values[5]),
            GaussianInt(values[6], values[7]),
        )

    def to_ints(self) -> IntMat:
        return (
            self.a.re, self.a.im, self.b.re, self.b.im,
            self.c.re, self.c.im, self.d.re, self.d.im,
        )

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __neg__(self) -> "Mat2":
        return Mat2(-self.a, -self.b, -self.c, -self.d)

    def __str__(self) -> str:
        return f"[[{self.a}, {self.b}], [{self.c}, {self.d}]]"

    def det(self) -> GaussianInt:
        return self.a * self.d - self.b * self.c

    def trace(self) -> GaussianInt:
        return self.a + self.d

    def inverse(self) -> "Mat2":
        """Inverse of a determinant-one matrix"""
        if self.det() != ONE:
            raise ValueError(f"Matrix {self} has determinant {self.det()}, expected 1")
        return Mat2(self.d, -self.b, -self.c, self.a)

    def frobenius_sq(self) -> int:
        return self.a.norm() + self.b.norm() + self.c.norm() + self.d.norm()

    def is_plus_minus_identity(self) -> bool:
        return self.b == ZERO and self.c == ZERO and self.a == self.d and self.a in (ONE, -ONE)

    def to_complex(self) -> np.ndarray:
        return np.array(
            [[complex(self.a), complex(self.b)], [complex(self.c), complex(self.d)]],
            dtype=np.complex128,
        )

    def mobius(self, z: complex) -> complex:
        return (complex(self.a) * z + complex(self.b)) / (complex(self.c) * z + complex(self.d))


def int_mat_mul(x: IntMat, y: IntMat) -> IntMat:
    """Product of two matrices in to_ints() layout, for hot loops"""
    ar, ai, br, bi, cr, ci, dr, di = x
    er, ei, fr, fi, gr, gi, hr, hi = y
    return (
        ar * er - ai * ei + br * gr - bi * gi, ar * ei + ai * er + br * gi + bi * gr,
        ar * fr - ai * fi + br * hr - bi * hi, ar * fi + ai * fr + br * hi + bi * hr,
        cr * er - ci * ei + dr * gr - di * gi, cr * ei + ci * er + dr * gi + di * gr,
        cr * fr - ci * fi + dr * hr - di * hi, cr * fi + ci * fr + dr * hi + di * hr,
    )


def int_mat_frobenius_sq(x: IntMat) -> int:
    return sum(v * v for v in x)
