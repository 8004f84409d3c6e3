"""
Geodesic Lab - Subshift Module

This module builds the subshift of finite type over a partition: the exact
transition matrix, irreducibility/aperiodicity certificates, admissible-word
enumeration, canonical periodic words, and the glue-word dictionary.
"""

import csv
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import CertificationError, InadmissibleWordError
from .hurwitz import (
    Cline,
    Constraint,
    Partition,
    part_image,
)

Word = Tuple[int, ...]

CERTIFY_LIMIT = 400
SMALL_COEFFICIENT = 2 ** 20


class TransitionMatrix:
    """A[x][y] = 1 iff part y lies in the image of part x"""

    def __init__(
        self,
        bits: np.ndarray,
        row_pattern: Optional[np.ndarray] = None,
        patterns: Optional[np.ndarray] = None,
    ):
        self.bits = np.ascontiguousarray(np.asarray(bits, dtype=bool))
        if self.bits.ndim != 2 or self.bits.shape[0] != self.bits.shape[1]:
            raise ValueError(f"Transition matrix must be square, got shape {self.bits.shape}")
        self._row_pattern = row_pattern
        self._patterns = patterns
        self._successors: Optional[List[List[int]]] = None

    def __repr__(self) -> str:
        return f"TransitionMatrix(size={self.size}, ones={self.nnz})"

    @classmethod
    def from_edges(cls, size: int, edges: Iterable[Tuple[int, int]]) -> "TransitionMatrix":
        bits = np.zeros((size, size), dtype=bool)
        for x, y in edges:
            bits[x, y] = True
        return cls(bits)

    @property
    def size(self) -> int:
        return self.bits.shape[0]

    @property
    def nnz(self) -> int:
        return int(self.bits.sum())

    def __getitem__(self, item):
        return self.bits[item]

    def successors(self, x: int) -> List[int]:
        if self._successors is None:
            self._successors = [np.nonzero(row)[0].tolist() for row in self.bits]
        return self._successors[x]

    def patterns(self) -> Tuple[np.ndarray, np.ndarray]:
        """(row_pattern, patterns) with bits == patterns[row_pattern]"""
        if self._patterns is None:
            self._patterns, self._row_pattern = np.unique(self.bits, axis=0, return_inverse=True)
            self._row_pattern = np.asarray(self._row_pattern).ravel()
        return self._row_pattern, self._patterns

    def to_sparse(self) -> csr_matrix:
        return csr_matrix(self.bits.astype(np.float64))

    def restrict(self, labels: Sequence[int]) -> "TransitionMatrix":
        idx = np.asarray(labels)
        return TransitionMatrix(self.bits[np.ix_(idx, idx)])

    def write_csv(self, path: Path):
        path = Path(path)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["from_label", "to_label"])
            for x, y in zip(*np.nonzero(self.bits)):
                writer.writerow([int(x), int(y)])


class SubshiftReport(NamedTuple):
    irreducible: bool
    period: int
    primitivity_index: Optional[int]


class PeriodicWord(NamedTuple):
    word: Word
    primitive: bool


class _PartTable:
    """Per-part arrays for deciding exactly which parts satisfy an image constraint"""

    def __init__(self, partition: Partition):
        self.partition = partition
        self.k = np.array([p.cell[0] for p in partition], dtype=np.int64)
        self.l = np.array([p.cell[1] for p in partition], dtype=np.int64)
        own: Dict[Cline, List[Tuple[int, int]]] = {}
        for part in partition:
            for constraint in part.constraints():
                normal = constraint.normalized()
                own.setdefault(normal.cline, []).append((part.label, normal.side))
        self.own = {
            cline: (np.array([label for label, _ in pairs]), np.array([side for _, side in pairs]))
            for cline, pairs in own.items()
        }
        samples = [partition.samples(p.label) for p in partition]
        self.counts = np.array([len(s) for s in samples], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.counts)[:-1]]).astype(np.int64)
        points = np.concatenate(samples) if samples else np.zeros(0, dtype=complex)
        self.x = points.real
        self.y = points.imag

    def __len__(self) -> int:
        return len(self.k)

    def sampled(self, constraint: Constraint) -> Tuple[np.ndarray, np.ndarray]:
        """(all samples satisfy, no sample satisfies) per part"""
        holds = constraint.holds(self.x, self.y).astype(np.int64)
        hits = np.add.reduceat(holds, self.offsets) if len(holds) else np.zeros(len(self), dtype=np.int64)
        return hits == self.counts, hits == 0

    def _cells(self, cl: Cline) -> Tuple[np.ndarray, np.ndarray]:
        # Python ints once int64 products could overflow
        if max(abs(cl.a), abs(cl.b.re), abs(cl.b.im), abs(cl.c)) > SMALL_COEFFICIENT:
            return self.k.astype(object), self.l.astype(object)
        return self.k, self.l

    def _corner_values(self, cl: Cline) -> List[np.ndarray]:
        """4 * form at the four cell corners, as exact integers"""
        k, l = self._cells(cl)
        values = []
        for dx, dy in ((0, 0), (0, 1), (1, 0), (1, 1)):
            X, Y = k + dx, l + dy
            values.append(cl.a * (X * X + Y * Y) + 4 * (cl.b.re * X + cl.b.im * Y) + 4 * cl.c)
        return values

    def exact_sign(self, cl: Cline) -> np.ndarray:
        """
        Sign of the form on each open part: +1, -1, or 0 where the cline may cross it.

        Lines are decided by the signs at the cell corners. For circles the form
        is evaluated at the cell point nearest the centre and at the farthest
        corner. Parts bounded by the cline itself take the side they lie on.
        """
        corners = self._corner_values(cl)
        lo = np.minimum.reduce(corners)
        hi = np.maximum.reduce(corners)
        if cl.a == 0:
            positive = np.asarray((lo >= 0) & (hi > 0), dtype=bool)
            negative = np.asarray((hi <= 0) & (lo < 0), dtype=bool)
        else:
            # nearest cell point to the centre, in units of 1/(2a)
            k, l = self._cells(cl)
            nx = np.minimum(np.maximum(-2 * cl.b.re, k * cl.a), (k + 1) * cl.a)
            ny = np.minimum(np.maximum(-2 * cl.b.im, l * cl.a), (l + 1) * cl.a)
            near = nx * nx + ny * ny + 4 * (cl.b.re * nx + cl.b.im * ny) + 4 * cl.a * cl.c
            positive = np.asarray(near >= 0, dtype=bool)
            negative = ~positive & np.asarray(hi <= 0, dtype=bool)
        sign = np.zeros(len(self), dtype=np.int64)
        sign[positive] = 1
        sign[negative] = -1
        if cl in self.own:
            labels, sides = self.own[cl]
            sign[labels] = sides
        return sign

    def decide(self, constraint: Constraint, source: int) -> np.ndarray:
        """Boolean vector of parts contained in the half-space"""
        cl, side = constraint.cline, constraint.side
        n = len(self)
        if cl.a > 0:
            radius_sq = Fraction(cl.b.norm() - cl.a * cl.c, cl.a * cl.a)
            center_re, center_im = Fraction(-cl.b.re, cl.a), Fraction(-cl.b.im, cl.a)
            if radius_sq <= 0:
                return np.full(n, side > 0)
            if center_im <= 0 and center_im * center_im >= radius_sq:
                return np.full(n, side > 0)
            if within_inner_disk(center_re, center_im, radius_sq):
                return np.full(n, side > 0)
        sign = self.exact_sign(cl)
        crossing = np.nonzero(sign == 0)[0]
        if len(crossing):
            raise CertificationError(
                f"Containment undecidable for transition {source} -> {int(crossing[0])} "
                f"against {constraint.cline} (side {constraint.side})"
            )
        return sign == side


def within_inner_disk(center_re: Fraction, center_im: Fraction, radius_sq: Fraction) -> bool:
    """Closed disk lies in |z| <= sqrt(2), which no part meets: |c| + r <= sqrt(2)"""
    center_sq = center_re * center_re + center_im * center_im
    slack = 2 - center_sq - radius_sq
    return slack >= 0 and 4 * center_sq * radius_sq <= slack * slack


def build_transitions(partition: Partition, certify: Optional[bool] = None) -> TransitionMatrix:
    """
    Exact transition matrix: part y follows part x iff y lies in the image of x.

    Args:
        partition: Partition whose parts form the alphabet
        certify: Cross-check every row against interior samples (default: small partitions)

    Returns:
        TransitionMatrix with row patterns shared by parts with equal images
    """
    table = _PartTable(partition)
    n = len(partition)
    cache: Dict[Tuple[Constraint, ...], int] = {}
    rows: List[np.ndarray] = []
    row_pattern = np.zeros(n, dtype=np.int64)
    for part in partition:
        image = tuple(part_image(part))
        if image not in cache:
            row = np.ones(n, dtype=bool)
            for constraint in image:
                row &= table.decide(constraint, part.label)
            cache[image] = len(rows)
            rows.append(row)
        row_pattern[part.label] = cache[image]
    patterns = np.array(rows, dtype=bool).reshape(len(rows), n)
    matrix = TransitionMatrix(patterns[row_pattern], row_pattern=row_pattern, patterns=patterns)

    if certify is None:
        certify = n <= CERTIFY_LIMIT
    if certify:
        certify_markov(partition, matrix, table)
    empty = np.nonzero(~matrix.bits.any(axis=1))[0]
    if len(empty):
        raise CertificationError(f"Part {int(empty[0])} has no successor")
    return matrix


def certify_markov(partition: Partition, matrix: TransitionMatrix, table: Optional[_PartTable] = None):
    """Interior samples agree with the exact rows: no part straddles an image, no recorded bit is contradicted"""
    table = table or _PartTable(partition)
    seen: Dict[Tuple[Constraint, ...], int] = {}
    for part in partition:
        image = tuple(part_image(part))
        if image in seen:
            continue
        seen[image] = part.label
        inside = np.ones(len(table), dtype=bool)
        for constraint in image:
            all_in, none_in = table.sampled(constraint)
            mixed = np.nonzero(~(all_in | none_in))[0]
            if len(mixed):
                raise CertificationError(
                    f"Markov property fails: part {int(mixed[0])} straddles {constraint.cline} "
                    f"in the image of part {part.label}"
                )
            inside &= all_in
        mismatch = np.nonzero(inside != matrix.bits[part.label])[0]
        if len(mismatch):
            raise CertificationError(
                f"Transition {part.label} -> {int(mismatch[0])} disagrees with interior samples"
            )


def check_irreducible_aperiodic(matrix: TransitionMatrix) -> SubshiftReport:
    """Strong connectivity, period (gcd of cycle lengths) and primitivity index"""
    bits = matrix.bits
    n = matrix.size
    count, _ = connected_components(csr_matrix(bits.astype(np.int8)), directed=True, connection="strong")
    irreducible = count == 1

    level = np.full(n, -1, dtype=np.int64)
    level[0] = 0
    frontier = np.zeros(n, dtype=bool)
    frontier[0] = True
    depth = 0
    while frontier.any():
        depth += 1
        reached = bits[frontier].any(axis=0) & (level < 0)
        level[reached] = depth
        frontier = reached
    if irreducible:
        src, dst = np.nonzero(bits)
        period = int(np.gcd.reduce(np.abs(level[src] + 1 - level[dst])))
    else:
        period = 0

    index = None
    if irreducible and period == 1:
        step = bits.astype(np.float64)
        power = step.copy()
        for k in range(1, (n - 1) ** 2 + 2):
            if power.all():
                index = k
                break
            power = ((power @ step) > 0).astype(np.float64)
    return SubshiftReport(irreducible=bool(irreducible), period=period, primitivity_index=index)


def is_admissible(matrix: TransitionMatrix, word: Sequence[int]) -> bool:
    return all(matrix.bits[x, y] for x, y in zip(word, word[1:]))


def require_admissible(matrix: TransitionMatrix, word: Sequence[int]):
    for position, (x, y) in enumerate(zip(word, word[1:])):
        if not matrix.bits[x, y]:
            raise InadmissibleWordError(f"Word {tuple(word)} breaks at position {position}: {x} -> {y}", position)


def enumerate_words(
    matrix: TransitionMatrix,
    n: int,
    start: Optional[int] = None,
    end: Optional[int] = None,
) -> Iterator[Word]:
    """Admissible words of length n in lexicographic order, optionally pinned at either end"""
    if n < 0:
        raise ValueError(f"Word length must be >= 0, got {n}")
    if n == 0:
        yield ()
        return
    size = matrix.size
    # reach[r][x]: x can be followed by r more letters ending at `end`
    reach = [np.ones(size, dtype=bool) if end is None else np.eye(size, dtype=bool)[end]]
    for _ in range(n - 1):
        reach.append(matrix.bits[:, reach[-1]].any(axis=1) if end is not None else reach[-1])
    firsts = [start] if start is not None else range(size)
    word: List[int] = []

    def extend(remaining: int) -> Iterator[Word]:
        if remaining == 0:
            yield tuple(word)
            return
        for y in matrix.successors(word[-1]):
            if reach[remaining - 1][y]:
                word.append(y)
                yield from extend(remaining - 1)
                word.pop()

    for x in firsts:
        if reach[n - 1][x]:
            word.append(x)
            yield from extend(n - 1)
            word.pop()


def count_words(matrix: TransitionMatrix, n: int, start: Optional[int] = None, end: Optional[int] = None) -> int:
    """Number of admissible words of length n via matrix powers"""
    if n == 0:
        return 1
    step = matrix.bits.astype(object)
    vector = np.ones(matrix.size, dtype=object) if end is None else np.eye(matrix.size, dtype=object)[end]
    for _ in range(n - 1):
        vector = step.dot(vector)
    return int(vector[start] if start is not None else vector.sum())


def minimal_rotation(word: Sequence[int]) -> Word:
    word = tuple(word)
    return min(word[k:] + word[:k] for k in range(len(word))) if word else word


def is_primitive(word: Sequence[int]) -> bool:
    """Not a proper power, via the smallest period of the failure function"""
    n = len(word)
    if n == 0:
        return False
    fail = [0] * n
    k = 0
    for i in range(1, n):
        while k and word[i] != word[k]:
            k = fail[k - 1]
        if word[i] == word[k]:
            k += 1
        fail[i] = k
    period = n - fail[-1]
    return not (period < n and n % period == 0)


def canonical_periodic(matrix: TransitionMatrix, word: Sequence[int]) -> PeriodicWord:
    """Lexicographically least rotation of a cyclically admissible word and its primitivity"""
    word = tuple(word)
    if not word:
        raise InadmissibleWordError("Periodic words must be nonempty")
    require_admissible(matrix, word)
    if not matrix.bits[word[-1], word[0]]:
        raise InadmissibleWordError(f"Word {word} is not cyclically admissible: {word[-1]} -> {word[0]}")
    return PeriodicWord(minimal_rotation(word), is_primitive(word))


class GlueTable:
    """Least admissible length-3 connector for every (last letter, first letter) pair"""

    def __init__(self, connectors: np.ndarray):
        self.connectors = connectors

    @property
    def size(self) -> int:
        return self.connectors.shape[0]

    def connector(self, x: int, y: int) -> Word:
        iota = tuple(int(v) for v in self.connectors[x, y])
        if iota[0] < 0:
            raise CertificationError(f"No glue word connects {x} to {y}")
        return iota

    def is_complete(self) -> bool:
        return bool((self.connectors[:, :, 0] >= 0).all())


def build_glue_table(matrix: TransitionMatrix) -> GlueTable:
    n = matrix.size
    bits = matrix.bits
    step = bits.astype(np.float64)
    reach4 = (np.linalg.matrix_power(step, 4) > 0) if n else bits
    connectors = np.full((n, n, 3), -1, dtype=np.int32)
    for x in range(n):
        assigned = np.zeros(n, dtype=bool)
        target = reach4[x]
        done = False
        for u1 in matrix.successors(x):
            for u2 in matrix.successors(u1):
                for u3 in matrix.successors(u2):
                    fresh = bits[u3] & ~assigned
                    if fresh.any():
                        connectors[x, fresh] = (u1, u2, u3)
                        assigned |= fresh
                        if (assigned == target).all():
                            done = True
                            break
                if done:
                    break
            if done:
                break
    return GlueTable(connectors)


def glue(a: Sequence[int], b: Sequence[int], table: GlueTable) -> Word:
    """a || iota || b with iota depending only on (last(a), first(b))"""
    if not a or not b:
        raise ValueError("Glue needs two nonempty words")
    return tuple(a) + table.connector(a[-1], b[0]) + tuple(b)


def write_words(words: Iterable[Sequence[int]], path: Path):
    with Path(path).open("w") as handle:
        for word in words:
            handle.write(",".join(str(x) for x in word) + "\n")
