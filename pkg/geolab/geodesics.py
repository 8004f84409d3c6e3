"""
Geodesic Lab - Geodesics Module

This module maps admissible words to SL2(Z[i]) matrices and computes the
invariants of closed geodesics: trace, discriminant, length, holonomy,
visual points and Dirichlet forms. It also enumerates the words whose
matrices lie in the Frobenius ball B_X, both as conjugacy representatives
(canonical primitive cyclic words) and as plain semigroup words.
"""

import cmath
import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InadmissibleWordError, NormBoundError, NotLoxodromicError
from .gaussian import (
    GaussianInt,
    IntMat,
    Mat2,
    ONE,
    content,
    discriminant_residue_class,
    int_mat_frobenius_sq,
    int_mat_mul,
    is_squarefree,
)
from .hurwitz import Partition, branch_matrix
from .subshift import TransitionMatrix, Word, is_primitive, minimal_rotation, require_admissible

IDENTITY_INTS: IntMat = (1, 0, 0, 0, 0, 0, 1, 0)
FLOAT_TOL = 1e-9


class Alphabet:
    """Branch data per part label: exact matrices, complex inverses and modulus bounds"""

    def __init__(self, partition: Partition):
        self.partition = partition
        branches = [branch_matrix(p) for p in partition]
        self.forward: List[Mat2] = [b.forward for b in branches]
        self.inverse: List[Mat2] = [b.inverse for b in branches]
        self.forward_ints: List[IntMat] = [m.to_ints() for m in self.forward]
        self.inverse_complex = np.array([m.to_complex() for m in self.inverse])
        ranges = np.array([p.modulus_range() for p in partition]).reshape(len(partition), 2)
        self.rmin = np.maximum(math.sqrt(2.0), ranges[:, 0])
        self.rmax = ranges[:, 1]
        # 2 log|z| lower bound per letter
        self.tau_min = 2.0 * np.log(self.rmin)

    def __len__(self) -> int:
        return len(self.forward)

    def successor_reach(self, transitions: TransitionMatrix) -> np.ndarray:
        """For each letter, the smallest farthest-corner modulus among its successors"""
        masked = np.where(transitions.bits, self.rmax[None, :], np.inf)
        return masked.min(axis=1)


def word_to_matrix(alphabet: Alphabet, word: Sequence[int], transitions: Optional[TransitionMatrix] = None) -> Mat2:
    """
    Forward composite M_{p_n} ... M_{p_1} along the itinerary; identity for the empty word.

    Raises:
        InadmissibleWordError: transitions given and the word breaks them
    """
    if transitions is not None:
        require_admissible(transitions, word)
    product = IDENTITY_INTS
    for letter in word:
        product = int_mat_mul(alphabet.forward_ints[letter], product)
    return Mat2.from_ints(product)


def word_to_ints(alphabet: Alphabet, word: Sequence[int]) -> IntMat:
    product = IDENTITY_INTS
    for letter in word:
        product = int_mat_mul(alphabet.forward_ints[letter], product)
    return product


def _attracting_fixed_point(g: np.ndarray) -> complex:
    a, b, c, d = g[0, 0], g[0, 1], g[1, 0], g[1, 1]
    if abs(c) < 1e-300:
        return b / (d - a)
    root = cmath.sqrt((a + d) ** 2 - 4 * (a * d - b * c))
    candidates = [((a - d) + root) / (2 * c), ((a - d) - root) / (2 * c)]
    return max(candidates, key=lambda z: abs(c * z + d))


def periodic_point(alphabet: Alphabet, word: Sequence[int]) -> complex:
    """Point of the first part whose orbit follows the periodic word forever"""
    g = np.eye(2, dtype=np.complex128)
    for letter in word:
        g = g @ alphabet.inverse_complex[letter]
    return _attracting_fixed_point(g)


def orbit_points(alphabet: Alphabet, word: Sequence[int]) -> List[complex]:
    """z_1..z_n of the periodic orbit, computed backward through the contracting inverse branches"""
    z1 = periodic_point(alphabet, word)
    points = [0j] * len(word)
    points[0] = z1
    current = z1
    for position in range(len(word) - 1, 0, -1):
        inv = alphabet.inverse_complex[word[position]]
        current = (inv[0, 0] * current + inv[0, 1]) / (inv[1, 0] * current + inv[1, 1])
        points[position] = current
    return points


def _trace_complex(m) -> complex:
    if isinstance(m, Mat2):
        return complex(m.trace())
    if isinstance(m, GaussianInt):
        return complex(m)
    arr = np.asarray(m)
    if arr.shape == (2, 2):
        return complex(arr[0, 0] + arr[1, 1])
    return complex(m)


def length_holonomy(m: Union[Mat2, np.ndarray, complex]) -> Tuple[float, float]:
    """
    Translation length and holonomy from the trace: tr = 2cosh(l/2 + i theta/2).

    Raises:
        NotLoxodromicError: the eigenvalues lie on the unit circle
    """
    t = _trace_complex(m)
    root = cmath.sqrt(t * t - 4)
    lam = max((t + root) / 2, (t - root) / 2, key=abs)
    if abs(abs(lam) - 1.0) < 1e-12:
        raise NotLoxodromicError(f"Trace {t} is not loxodromic")
    length = 2.0 * math.log(abs(lam))
    holonomy = (2.0 * cmath.phase(lam)) % (2.0 * math.pi)
    return length, holonomy


def visual_points(m: Mat2) -> Tuple[complex, Optional[complex]]:
    """
    Fixed points ((a - d) +- sqrt(tr^2 - 4)) / 2c of the Moebius action.

    When c = 0 the second point is infinity and is returned as None.
    """
    a, b, c, d = (complex(x) for x in (m.a, m.b, m.c, m.d))
    t = a + d
    if abs(t * t - 4) < 1e-12:
        raise NotLoxodromicError(f"Matrix {m} is not loxodromic")
    if c == 0:
        return b / (d - a), None
    root = cmath.sqrt(t * t - 4)
    return ((a - d) + root) / (2 * c), ((a - d) - root) / (2 * c)


def hyperbolic_distance_identity_check(m) -> float:
    """|2cosh d(j, m.j) - ||m||^2| using the upper half-space action"""
    g = m.to_complex() if isinstance(m, Mat2) else np.asarray(m, dtype=np.complex128)
    a, b, c, d = g[0, 0], g[0, 1], g[1, 0], g[1, 1]
    denom = abs(c) ** 2 + abs(d) ** 2
    z_image = (b * np.conj(d) + a * np.conj(c)) / denom
    t_image = 1.0 / denom
    cosh_d = 1.0 + (abs(z_image) ** 2 + (1.0 - t_image) ** 2) / (2.0 * t_image)
    frobenius = float(np.sum(np.abs(g) ** 2))
    return abs(2.0 * cosh_d - frobenius)


@dataclass(frozen=True)
class DirichletForm:
    """Primitive form a x^2 + b xy + c y^2, with original = scale * (a, b, c)"""

    a: GaussianInt
    b: GaussianInt
    c: GaussianInt
    scale: GaussianInt

    def discriminant(self) -> GaussianInt:
        return self.b * self.b - 4 * self.a * self.c

    def coefficients(self) -> Tuple[GaussianInt, GaussianInt, GaussianInt]:
        return (self.a, self.b, self.c)

    def roots(self) -> Tuple[complex, complex]:
        a, b, c = complex(self.a), complex(self.b), complex(self.c)
        root = cmath.sqrt(b * b - 4 * a * c)
        return (-b + root) / (2 * a), (-b - root) / (2 * a)

    def key(self) -> Tuple[int, ...]:
        return (self.a.re, self.a.im, self.b.re, self.b.im, self.c.re, self.c.im)


def dirichlet_form(m: Mat2) -> DirichletForm:
    """Q(x, y) = c x^2 + (d - a) xy - b y^2 divided by its content and unit-normalized"""
    if m.is_plus_minus_identity():
        raise ValueError(f"Matrix {m} has the zero form")
    coefficients = (m.c, m.d - m.a, -m.b)
    g = content(coefficients)
    primitive = [x.exact_div(g) for x in coefficients]
    lead = next(x for x in primitive if x)
    unit = next(u for u in (ONE, GaussianInt(0, 1), GaussianInt(-1, 0), GaussianInt(0, -1)) if (lead * u).canonical() == lead * u)
    normalized = [x * unit for x in primitive]
    # original = g * primitive = g * unit^-1 * normalized
    scale = g * unit.conjugate()
    return DirichletForm(normalized[0], normalized[1], normalized[2], scale)


def is_fundamental_eligible(D: GaussianInt) -> bool:
    """Square-free with D = +-1 mod 4"""
    D = GaussianInt.coerce(D)
    if not D:
        raise ValueError("Zero discriminant")
    residue = discriminant_residue_class(D)
    if residue not in (ONE, GaussianInt(-1, 0)):
        return False
    return is_squarefree(D)


@dataclass(frozen=True)
class GeodesicClass:
    """Canonical primitive cyclic word with its matrix and geodesic invariants"""

    word: Word
    matrix: Mat2
    trace: GaussianInt
    discriminant: GaussianInt
    frob_sq: int
    length: float
    holonomy: float

    @classmethod
    def from_word(cls, word: Word, matrix: Mat2) -> "GeodesicClass":
        trace = matrix.trace()
        length, holonomy = length_holonomy(matrix)
        return cls(
            word=tuple(word),
            matrix=matrix,
            trace=trace,
            discriminant=trace * trace - 4,
            frob_sq=matrix.frobenius_sq(),
            length=length,
            holonomy=holonomy,
        )

    @cached_property
    def squarefree_disc(self) -> bool:
        try:
            return is_squarefree(self.discriminant)
        except NormBoundError:
            return False

    @cached_property
    def fundamental_eligible(self) -> bool:
        try:
            return is_fundamental_eligible(self.discriminant)
        except NormBoundError:
            return False

    @property
    def sort_key(self) -> Tuple[int, Word]:
        return (len(self.word), self.word)


class _SearchTables(NamedTuple):
    successors: List[List[int]]
    cyclic: np.ndarray
    forward: List[IntMat]
    weights: List[float]


def _search_tables(alphabet: Alphabet, transitions: TransitionMatrix) -> _SearchTables:
    return _SearchTables(
        successors=[transitions.successors(x) for x in range(transitions.size)],
        cyclic=transitions.bits,
        forward=alphabet.forward_ints,
        weights=alphabet.tau_min.tolist(),
    )


def _classes_from_first(args) -> List[Tuple[Word, IntMat]]:
    tables, first, limit_sq, budget, primitive_only = args
    found: List[Tuple[Word, IntMat]] = []
    word = [first]

    def visit(matrix: IntMat, spent: float):
        if tables.cyclic[word[-1], first] and int_mat_frobenius_sq(matrix) < limit_sq:
            candidate = tuple(word)
            if minimal_rotation(candidate) == candidate and (not primitive_only or is_primitive(candidate)):
                found.append((candidate, matrix))
        for y in tables.successors[word[-1]]:
            if y < first:
                continue
            total = spent + tables.weights[y]
            if total > budget:
                continue
            word.append(y)
            visit(int_mat_mul(tables.forward[y], matrix), total)
            word.pop()

    if tables.weights[first] <= budget:
        visit(tables.forward[first], tables.weights[first])
    return found


def enumerate_ball(
    alphabet: Alphabet,
    transitions: TransitionMatrix,
    X: float,
    aperiodic_only: bool = True,
    workers: int = 1,
) -> List[GeodesicClass]:
    """
    Canonical cyclic words whose matrices satisfy ||M||^2 < X^2.

    Args:
        alphabet: Branch data of the partition
        transitions: Transition matrix of the same partition
        X: Ball radius, at least sqrt(2)
        aperiodic_only: Keep only primitive words
        workers: Processes used to split the search by first letter

    Returns:
        GeodesicClass list sorted by (word length, word)
    """
    if X < math.sqrt(2.0):
        raise ValueError(f"Ball radius must be >= sqrt(2), got {X}")
    tables = _search_tables(alphabet, transitions)
    # ||g||^2 > e^l and l >= sum of 2 log rmin over the word
    budget = 2.0 * math.log(X) + 1e-12
    limit_sq = X * X
    jobs = [(tables, first, limit_sq, budget, aperiodic_only) for first in range(transitions.size)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_classes_from_first, jobs))
    else:
        chunks = [_classes_from_first(job) for job in jobs]
    classes = [GeodesicClass.from_word(word, Mat2.from_ints(m)) for chunk in chunks for word, m in chunk]
    classes.sort(key=lambda g: g.sort_key)
    return classes


def enumerate_ball_reference(
    alphabet: Alphabet,
    transitions: TransitionMatrix,
    X: float,
    aperiodic_only: bool = True,
    max_length: Optional[int] = None,
) -> List[GeodesicClass]:
    """Unpruned enumeration over every word length n < 2 log X / log 2, optionally capped at max_length"""
    from .subshift import enumerate_words

    longest = math.ceil(2.0 * math.log(X) / math.log(2.0)) - 1
    max_length = longest if max_length is None else min(longest, max_length)
    classes = []
    for n in range(1, max_length + 1):
        for word in enumerate_words(transitions, n):
            if not transitions.bits[word[-1], word[0]] or minimal_rotation(word) != word:
                continue
            if aperiodic_only and not is_primitive(word):
                continue
            matrix = word_to_ints(alphabet, word)
            if int_mat_frobenius_sq(matrix) < X * X:
                classes.append(GeodesicClass.from_word(word, Mat2.from_ints(matrix)))
    classes.sort(key=lambda g: g.sort_key)
    return classes


def semigroup_ball(
    alphabet: Alphabet,
    transitions: TransitionMatrix,
    X: float,
    length: Optional[int] = None,
) -> List[Tuple[Word, IntMat]]:
    """
    All nonempty admissible words with ||M||^2 < X^2, optionally of one length.

    A word p_1..p_n has ||M|| >= e^{L/2} / sqrt(1 + c^2) where
    L = log 2 + sum_{k>=2} 2 log rmin(p_k) and c bounds the modulus of a successor.
    """
    if X < math.sqrt(2.0):
        raise ValueError(f"Ball radius must be >= sqrt(2), got {X}")
    reach = float(np.max(alphabet.successor_reach(transitions)))
    budget = 2.0 * math.log(X) + math.log(1.0 + reach * reach) + 1e-12
    limit_sq = X * X
    successors = [transitions.successors(x) for x in range(transitions.size)]
    weights = alphabet.tau_min.tolist()
    forward = alphabet.forward_ints
    found: List[Tuple[Word, IntMat]] = []
    word: List[int] = []

    def visit(matrix: IntMat, spent: float):
        if (length is None or len(word) == length) and int_mat_frobenius_sq(matrix) < limit_sq:
            found.append((tuple(word), matrix))
        if length is not None and len(word) >= length:
            return
        for y in successors[word[-1]]:
            total = spent + weights[y]
            if total > budget:
                continue
            word.append(y)
            visit(int_mat_mul(forward[y], matrix), total)
            word.pop()

    for first in range(transitions.size):
        word.append(first)
        visit(forward[first], math.log(2.0))
        word.pop()
    found.sort(key=lambda item: (len(item[0]), item[0]))
    return found


def find_collisions(classes: Iterable[GeodesicClass]) -> Dict[Tuple, List[Word]]:
    """Distinct canonical words sharing trace and primitive Dirichlet form"""
    groups: Dict[Tuple, List[Word]] = {}
    for g in classes:
        try:
            form = dirichlet_form(g.matrix).key()
        except ValueError:
            continue
        groups.setdefault((g.trace.re, g.trace.im) + form, []).append(g.word)
    return {key: words for key, words in groups.items() if len(words) > 1}


GEODESIC_COLUMNS = [
    "word", "trace_re", "trace_im", "disc_re", "disc_im", "frob_sq",
    "length", "holonomy", "squarefree", "fundamental_eligible",
]


def write_geodesics_csv(classes: Iterable[GeodesicClass], path: Path):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(GEODESIC_COLUMNS)
        for g in classes:
            writer.writerow([
                " ".join(str(x) for x in g.word),
                g.trace.re, g.trace.im, g.discriminant.re, g.discriminant.im, g.frob_sq,
                format(g.length, ".17g"), format(g.holonomy, ".17g"),
                int(g.squarefree_disc), int(g.fundamental_eligible),
            ])


def read_geodesics_csv(path: Path) -> List[Dict[str, object]]:
    rows = []
    with Path(path).open(newline="") as handle:
        for record in csv.DictReader(handle):
            rows.append({
                "word": tuple(int(x) for x in record["word"].split()),
                "trace": GaussianInt(int(record["trace_re"]), int(record["trace_im"])),
                "discriminant": GaussianInt(int(record["disc_re"]), int(record["disc_im"])),
                "frob_sq": int(record["frob_sq"]),
                "length": float(record["length"]),
                "holonomy": float(record["holonomy"]),
                "squarefree": record["squarefree"] == "1",
                "fundamental_eligible": record["fundamental_eligible"] == "1",
            })
    return rows
