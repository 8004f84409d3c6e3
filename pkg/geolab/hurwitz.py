"""
Geodesic Lab - Hurwitz Map Module

This module implements the nearest-integer continued-fraction map on the
region X = {Im z > 0, |z - 1| > 1, |z + 1| > 1, |z - i| > 1}, its Markov
partition into half-grid cells split by C(1+i) and C(-1+i), the radius-R
restriction, and exact inverse-branch matrices in SL2(Z[i]).

Geometry is exact: clines are integer Hermitian forms and every sample point
used for decisions is a dyadic rational, so float64 evaluation of a cline at a
sample point is exact.
"""

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import BoundaryPointError
from .gaussian import ONE, ZERO, GaussianInt, Mat2

SQRT2 = math.sqrt(2.0)

S_MATRIX = Mat2.of(0, -1, 1, 0)
Q_MATRIX = Mat2(GaussianInt(0, -1), ZERO, ZERO, GaussianInt(0, 1))

EXTERIOR_CENTERS = (GaussianInt(0, 1), GaussianInt(1, 0), GaussianInt(-1, 0))
SPLIT_CENTERS = (GaussianInt(1, 1), GaussianInt(-1, 1))

INSIDE = "inside"
OUTSIDE = "outside"
NOT_ADJACENT = "not-adjacent"

# Fine sampling grid per cell axis; offsets (2i+1)/(4*FINE_GRID) are dyadic.
FINE_GRID = 64
REPRESENTATIVES = 24


def translation(m: GaussianInt) -> Mat2:
    """T_m = [[1, m], [0, 1]]"""
    return Mat2(ONE, GaussianInt.coerce(m), ZERO, ONE)


@dataclass(frozen=True)
class Cline:
    """
    Line or circle {z : a|z|^2 + 2 Re(conj(b) z) + c = 0}.

    Stored as the integer Hermitian matrix [[a, b], [conj(b), c]]; the form is
    negative on the inside of a circle.
    """

    a: int
    b: GaussianInt
    c: int

    @classmethod
    def circle(cls, center: GaussianInt, radius_sq: int = 1) -> "Cline":
        center = GaussianInt.coerce(center)
        return cls(1, -center, center.norm() - radius_sq)

    @classmethod
    def vertical(cls, t: Fraction) -> "Cline":
        """Re z = t for a half-integer t"""
        t = Fraction(t)
        if (2 * t).denominator != 1:
            raise ValueError(f"Vertical grid line needs a half-integer, got {t}")
        return cls(0, GaussianInt(1, 0), -int(2 * t))

    @classmethod
    def horizontal(cls, t: Fraction) -> "Cline":
        """Im z = t for a half-integer t"""
        t = Fraction(t)
        if (2 * t).denominator != 1:
            raise ValueError(f"Horizontal grid line needs a half-integer, got {t}")
        return cls(0, GaussianInt(0, 1), -int(2 * t))

    @property
    def kind(self) -> str:
        return "line" if self.a == 0 else "circle"

    def value(self, x, y):
        """Form value at x + iy; numpy arrays are evaluated elementwise"""
        return self.a * (x * x + y * y) + 2 * (self.b.re * x + self.b.im * y) + self.c

    def exact_value(self, x: Fraction, y: Fraction) -> Fraction:
        return self.a * (x * x + y * y) + 2 * (self.b.re * x + self.b.im * y) + self.c

    def pullback(self, n: Mat2) -> "Cline":
        """Form H' = N* H N, so that H'(z) has the sign of H(N z)"""
        p, q, r, s = n.a, n.b, n.c, n.d
        bc = self.b.conjugate()
        hp0 = p * self.a + r * self.b
        hq0 = q * self.a + s * self.b
        hp1 = p * bc + r * self.c
        hq1 = q * bc + s * self.c
        h00 = p.conjugate() * hp0 + r.conjugate() * hp1
        h01 = p.conjugate() * hq0 + r.conjugate() * hq1
        h11 = q.conjugate() * hq0 + s.conjugate() * hq1
        if h00.im or h11.im:
            raise AssertionError(f"Pulled-back form is not Hermitian: {h00}, {h11}")
        return Cline(h00.re, h01, h11.re)

    def image(self, m: Mat2) -> "Cline":
        """Image of the cline under the Moebius map of m (det 1)"""
        return self.pullback(m.inverse())

    def describe(self) -> Dict[str, object]:
        if self.a == 0:
            if self.b.im == 0 and self.b.re:
                return {"kind": "vertical", "re": Fraction(-self.c, 2 * self.b.re)}
            if self.b.re == 0 and self.b.im:
                return {"kind": "horizontal", "im": Fraction(-self.c, 2 * self.b.im)}
            return {"kind": "line", "b": str(self.b), "c": self.c}
        center = (Fraction(-self.b.re, self.a), Fraction(-self.b.im, self.a))
        radius_sq = Fraction(self.b.norm() - self.a * self.c, self.a * self.a)
        return {"kind": "circle", "center": center, "radius_sq": radius_sq}

    def __str__(self) -> str:
        info = self.describe()
        if info["kind"] == "vertical":
            return f"Re z = {info['re']}"
        if info["kind"] == "horizontal":
            return f"Im z = {info['im']}"
        if info["kind"] == "circle":
            cx, cy = info["center"]
            return f"|z - ({cx}+{cy}i)|^2 = {info['radius_sq']}"
        return f"2Re(conj({self.b}) z) + {self.c} = 0"


class Constraint(NamedTuple):
    """Half-space of a cline: side -1 means form < 0, side +1 means form > 0"""

    cline: Cline
    side: int

    def normalized(self) -> "Constraint":
        cl, side = self.cline, self.side
        content = math.gcd(math.gcd(abs(cl.a), abs(cl.c)), math.gcd(abs(cl.b.re), abs(cl.b.im)))
        if content > 1:
            cl = Cline(cl.a // content, GaussianInt(cl.b.re // content, cl.b.im // content), cl.c // content)
        flip = cl.a < 0 or (cl.a == 0 and (cl.b.re < 0 or (cl.b.re == 0 and cl.b.im < 0)))
        if flip:
            cl = Cline(-cl.a, -cl.b, -cl.c)
            side = -side
        return Constraint(cl, side)

    def holds(self, x, y):
        return self.side * self.cline.value(x, y) > 0


@dataclass(frozen=True)
class Part:
    """One cell of the partition, possibly split by C(1+i) and C(-1+i)"""

    label: int
    cell: Tuple[int, int]
    flags: Tuple[str, str]
    round_target: GaussianInt
    branch_sign: int
    clipped_by: Tuple[GaussianInt, ...] = ()

    @property
    def key(self) -> Tuple[Tuple[int, int], Tuple[str, str]]:
        return (self.cell, self.flags)

    @property
    def box(self) -> Tuple[Fraction, Fraction, Fraction, Fraction]:
        k, l = self.cell
        return Fraction(k, 2), Fraction(k + 1, 2), Fraction(l, 2), Fraction(l + 1, 2)

    @property
    def center(self) -> complex:
        k, l = self.cell
        return complex((2 * k + 1) / 4, (2 * l + 1) / 4)

    def constraints(self) -> List[Constraint]:
        """Half-spaces whose intersection is the part"""
        x0, x1, y0, y1 = self.box
        out = [
            Constraint(Cline.vertical(x0), +1),
            Constraint(Cline.vertical(x1), -1),
            Constraint(Cline.horizontal(y0), +1),
            Constraint(Cline.horizontal(y1), -1),
        ]
        out.extend(Constraint(Cline.circle(c), +1) for c in EXTERIOR_CENTERS)
        cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
        for center, flag in zip(SPLIT_CENTERS, self.flags):
            circle = Cline.circle(center)
            if flag == INSIDE:
                out.append(Constraint(circle, -1))
            elif flag == OUTSIDE:
                out.append(Constraint(circle, +1))
            else:
                out.append(Constraint(circle, 1 if circle.exact_value(cx, cy) > 0 else -1))
        return out

    def modulus_range(self) -> Tuple[float, float]:
        """Distance from the origin to the closed cell box, and to its farthest corner"""
        x0, x1, y0, y1 = self.box
        nx = Fraction(0) if x0 <= 0 <= x1 else min(abs(x0), abs(x1))
        ny = Fraction(0) if y0 <= 0 <= y1 else min(abs(y0), abs(y1))
        fx, fy = max(abs(x0), abs(x1)), max(abs(y0), abs(y1))
        return math.sqrt(nx * nx + ny * ny), math.sqrt(fx * fx + fy * fy)

    def rmin(self) -> float:
        """Lower bound for |z| on the part"""
        return max(SQRT2, self.modulus_range()[0])

    def to_dict(self) -> Dict[str, object]:
        return {
            "label": self.label,
            "cell": list(self.cell),
            "flags": list(self.flags),
            "round_target": [self.round_target.re, self.round_target.im],
            "branch_sign": self.branch_sign,
        }


class BranchMatrix(NamedTuple):
    forward: Mat2
    inverse: Mat2


def in_region(z: complex) -> bool:
    """Open region X: upper half-plane outside C(i), C(1), C(-1)"""
    return z.imag > 0 and all(abs(z - complex(c)) > 1 for c in EXTERIOR_CENTERS)


def nearest_gaussian(z: complex) -> GaussianInt:
    """Closest Gaussian integer; ties go to the smaller real part, then the smaller imaginary part"""
    z = complex(z)
    return GaussianInt(math.ceil(z.real - 0.5), math.ceil(z.imag - 0.5))


def on_boundary(z: complex, tol: float = 1e-15) -> bool:
    """True on the removed half-grid lines or on the partition circles"""
    z = complex(z)
    if (2 * z.real).is_integer() or (2 * z.imag).is_integer():
        return True
    for center in EXTERIOR_CENTERS + SPLIT_CENTERS:
        if abs(abs(z - complex(center)) ** 2 - 1.0) < tol:
            return True
    return False


def apply_fhat(z: complex) -> complex:
    """
    One step of the Hurwitz map: -1/(z - [z]) above the target, 1/(z - [z]) below.

    Raises:
        BoundaryPointError: z lies on a removed line or circle
        ValueError: z is outside the region
    """
    z = complex(z)
    if on_boundary(z):
        raise BoundaryPointError(f"Point {z} lies on a removed boundary")
    if not in_region(z):
        raise ValueError(f"Point {z} is outside the region")
    m = nearest_gaussian(z)
    w = z - complex(m)
    return -1 / w if z.imag > m.im else 1 / w


def to_s_coordinates(z: complex) -> complex:
    return -1 / complex(z)


def from_s_coordinates(u: complex) -> complex:
    return -1 / complex(u)


def apply_f(u: complex) -> complex:
    """The conjugate map S o fhat o S on S(X)"""
    return to_s_coordinates(apply_fhat(from_s_coordinates(u)))


def branch_matrix(part: Part) -> BranchMatrix:
    """Exact forward matrix S Q^j T_{-m} and its inverse"""
    forward = S_MATRIX
    if part.branch_sign:
        forward = forward @ Q_MATRIX
    forward = forward @ translation(-part.round_target)
    return BranchMatrix(forward, forward.inverse())


def part_image(part: Part) -> List[Constraint]:
    """Constraints of the image of the part under its branch, normalized"""
    forward = branch_matrix(part).forward
    images = (Constraint(c.cline.image(forward), c.side).normalized() for c in part.constraints())
    return sorted(set(images), key=lambda c: (c.cline.a, c.cline.b.re, c.cline.b.im, c.cline.c, c.side))


def _circle_crosses_box(center: GaussianInt, box: Tuple[Fraction, Fraction, Fraction, Fraction]) -> bool:
    """Unit circle about center meets the open box"""
    x0, x1, y0, y1 = box
    cx, cy = Fraction(center.re), Fraction(center.im)
    dx = max(x0 - cx, Fraction(0), cx - x1)
    dy = max(y0 - cy, Fraction(0), cy - y1)
    near = dx * dx + dy * dy
    far = max((x - cx) ** 2 + (y - cy) ** 2 for x in (x0, x1) for y in (y0, y1))
    return near < 1 < far


def _cell_grid(k: int, l: int, grid: int = FINE_GRID) -> Tuple[np.ndarray, np.ndarray]:
    offsets = (2 * np.arange(grid) + 1) / (4.0 * grid)
    xs = k / 2 + offsets
    ys = l / 2 + offsets
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return gx.ravel(), gy.ravel()


def part_samples(part: Part, limit: Optional[int] = REPRESENTATIVES) -> np.ndarray:
    """Dyadic interior points of the part, evenly thinned to at most limit"""
    k, l = part.cell
    gx, gy = _cell_grid(k, l)
    mask = gy > 0
    for constraint in part.constraints():
        mask &= constraint.holds(gx, gy)
    points = gx[mask] + 1j * gy[mask]
    if limit is not None and len(points) > limit:
        points = points[np.linspace(0, len(points) - 1, limit).round().astype(int)]
    return points


def _split_cell(k: int, l: int) -> List[Tuple[Tuple[str, str], Tuple[GaussianInt, ...]]]:
    gx, gy = _cell_grid(k, l)
    in_x = gy > 0
    for center in EXTERIOR_CENTERS:
        in_x &= Cline.circle(center).value(gx, gy) > 0
    if not in_x.any():
        return []
    box = (Fraction(k, 2), Fraction(k + 1, 2), Fraction(l, 2), Fraction(l + 1, 2))
    clipped_by = tuple(c for c in EXTERIOR_CENTERS if _circle_crosses_box(c, box))
    options = [
        (INSIDE, OUTSIDE) if _circle_crosses_box(center, box) else (NOT_ADJACENT,)
        for center in SPLIT_CENTERS
    ]
    pieces = []
    for flags in product(*options):
        mask = in_x.copy()
        for center, flag in zip(SPLIT_CENTERS, flags):
            if flag == INSIDE:
                mask &= Cline.circle(center).value(gx, gy) < 0
            elif flag == OUTSIDE:
                mask &= Cline.circle(center).value(gx, gy) > 0
        if mask.any():
            pieces.append((tuple(flags), clipped_by))
    return pieces


@dataclass(eq=False)
class Partition:
    """Radius-R restriction of the Markov partition, labels 0..n-1 sorted by (cell, flags)"""

    radius: float
    parts: Tuple[Part, ...]
    _index: Dict[tuple, int] = field(default_factory=dict, repr=False)
    _samples: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {p.key: p.label for p in self.parts}

    def __len__(self) -> int:
        return len(self.parts)

    def __getitem__(self, label: int) -> Part:
        return self.parts[label]

    def __iter__(self):
        return iter(self.parts)

    def label_of(self, key) -> Optional[int]:
        return self._index.get(key)

    def find(self, cell: Tuple[int, int], flags: Optional[Tuple[str, str]] = None) -> List[Part]:
        return [p for p in self.parts if p.cell == tuple(cell) and (flags is None or p.flags == tuple(flags))]

    def locate(self, z: complex) -> Optional[Part]:
        """Part containing an interior point, or None"""
        z = complex(z)
        cell = (math.floor(2 * z.real), math.floor(2 * z.imag))
        for part in self.find(cell):
            if all(c.holds(z.real, z.imag) for c in part.constraints()):
                return part
        return None

    def samples(self, label: int) -> np.ndarray:
        if label not in self._samples:
            self._samples[label] = part_samples(self.parts[label])
        return self._samples[label]

    def label_map(self, other: "Partition") -> np.ndarray:
        """Labels in other for each part of self; -1 where absent"""
        return np.array([other.label_of(p.key) if other.label_of(p.key) is not None else -1 for p in self.parts])

    def to_json(self) -> Dict[str, object]:
        return {"radius": self.radius, "parts": [p.to_dict() for p in self.parts]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, data: Dict[str, object]) -> "Partition":
        parts = []
        for record in data["parts"]:
            k, l = record["cell"]
            box = (Fraction(k, 2), Fraction(k + 1, 2), Fraction(l, 2), Fraction(l + 1, 2))
            parts.append(
                Part(
                    label=int(record["label"]),
                    cell=(int(k), int(l)),
                    flags=tuple(record["flags"]),
                    round_target=GaussianInt(*record["round_target"]),
                    branch_sign=int(record["branch_sign"]),
                    clipped_by=tuple(c for c in EXTERIOR_CENTERS if _circle_crosses_box(c, box)),
                )
            )
        return cls(radius=data["radius"], parts=tuple(parts))


def build_partition(radius: float) -> Partition:
    """
    All parts whose cell closure lies in |z| < radius.

    Args:
        radius: R >= 3

    Returns:
        Partition with deterministic labels
    """
    bound = Fraction(str(radius))
    if bound < 3:
        raise ValueError(f"Partition radius must be >= 3, got {radius}")
    bound_sq = bound * bound
    reach = math.ceil(2 * bound)
    found = []
    for k in range(-reach - 1, reach + 1):
        for l in range(0, reach + 1):
            corners = (
                (Fraction(k + dx, 2), Fraction(l + dy, 2)) for dx in (0, 1) for dy in (0, 1)
            )
            if any(x * x + y * y >= bound_sq for x, y in corners):
                continue
            for flags, clipped_by in _split_cell(k, l):
                found.append(((k, l), flags, clipped_by))
    found.sort(key=lambda item: (item[0], item[1]))
    parts = tuple(
        Part(
            label=label,
            cell=cell,
            flags=flags,
            round_target=GaussianInt((cell[0] + 1) // 2, (cell[1] + 1) // 2),
            branch_sign=cell[1] % 2,
            clipped_by=clipped_by,
        )
        for label, (cell, flags, clipped_by) in enumerate(found)
    )
    return Partition(radius=float(radius), parts=parts)


def inverse_branch_point(part: Part, y: complex) -> complex:
    """The preimage of y in the part's branch: m - 1/y or m + 1/y"""
    m = complex(part.round_target)
    return m + 1 / y if part.branch_sign else m - 1 / y
