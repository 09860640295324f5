"""Lens contour, jump matrices and the local parametrices near z = -1.

Three problems share the same contour and outer parametrix ``N``:

* ``P``      log weight, Bessel index 1, Szego function from quadrature;
* ``Phat``   model weight ``(1+x) exp(d0 x)``, index 1, closed-form Szego function;
* ``Ptilde`` Legendre weight, index 0, trivial Szego function.

Points on the contour carry a side; their boundary values are evaluated a
distance ``eta = 10^-(digits+10)`` off the contour along the normal, with
enough working precision that the offset is the only perturbation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import mpmath as mp

from .szego import SzegoEvaluator, f2w_hat, phi, szego_Fhat
from .weights import Side, WeightSpec

class RayProximityError(ValueError):
    """A Bessel-matrix evaluation point is too close to a jump ray."""


@dataclass(frozen=True)
class Matrix2C:
    """2x2 complex matrix ``[[a, b], [c, d]]``."""

    a: mp.mpc
    b: mp.mpc
    c: mp.mpc
    d: mp.mpc

    @classmethod
    def rows(cls, r0, r1) -> "Matrix2C":
        return cls(mp.mpc(r0[0]), mp.mpc(r0[1]), mp.mpc(r1[0]), mp.mpc(r1[1]))

    @classmethod
    def identity(cls) -> "Matrix2C":
        return cls(mp.mpc(1), mp.mpc(0), mp.mpc(0), mp.mpc(1))

    @classmethod
    def diag(cls, x, y=None) -> "Matrix2C":
        """``diag(x, y)``; with one argument this is ``x^{sigma_3}``."""
        x = mp.mpc(x)
        return cls(x, mp.mpc(0), mp.mpc(0), 1 / x if y is None else mp.mpc(y))

    def __matmul__(self, o: "Matrix2C") -> "Matrix2C":
        return Matrix2C(self.a * o.a + self.b * o.c, self.a * o.b + self.b * o.d,
                        self.c * o.a + self.d * o.c, self.c * o.b + self.d * o.d)

    def __add__(self, o: "Matrix2C") -> "Matrix2C":
        return Matrix2C(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)

    def __sub__(self, o: "Matrix2C") -> "Matrix2C":
        return Matrix2C(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)

    def scale(self, s) -> "Matrix2C":
        return Matrix2C(s * self.a, s * self.b, s * self.c, s * self.d)

    def det(self) -> mp.mpc:
        return self.a * self.d - self.b * self.c

    def inv(self) -> "Matrix2C":
        det = self.det()
        return Matrix2C(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def conj(self) -> "Matrix2C":
        return Matrix2C(mp.conj(self.a), mp.conj(self.b), mp.conj(self.c), mp.conj(self.d))

    def norm(self) -> mp.mpf:
        """Max-entry modulus."""
        return max(abs(self.a), abs(self.b), abs(self.c), abs(self.d))

    def entries(self) -> tuple:
        return (self.a, self.b, self.c, self.d)


SIGMA_ROT = ((0, 1), (-1, 0))


def _rot() -> Matrix2C:
    return Matrix2C.rows(*SIGMA_ROT)


def lower(x) -> Matrix2C:
    return Matrix2C.rows((1, 0), (x, 1))


# -- outer parametrix and conformal coordinate -------------------------------

def outer_a(z) -> mp.mpc:
    """``((z-1)/(z+1))^{1/4}`` with its cut on (-1, 1) and value 1 at infinity."""
    z = mp.mpc(z)
    return mp.root(z - 1, 4) / mp.root(z + 1, 4)


def outer_parametrix_N(z) -> Matrix2C:
    z = mp.mpc(z)
    if z.imag == 0 and -1 <= z.real <= 1:
        raise ValueError("N is not defined on [-1, 1]")
    a = outer_a(z)
    p, m = (a + 1 / a) / 2, (a - 1 / a) / (2j)
    return Matrix2C(p, m, -m, p)


def xi_map(z) -> mp.mpc:
    """``log^2(-phi(z))/4``; holomorphic near -1 with ``xi(-1) = 0``, ``xi'(-1) = -1/2``."""
    z = mp.mpc(z)
    if z == -1:
        return mp.mpc(0)
    return mp.log(-phi(z)) ** 2 / 4


# -- Bessel model problem ------------------------------------------------------

class Sector(enum.Enum):
    RIGHT = "right"
    UPPER_LEFT = "upper-left"
    LOWER_LEFT = "lower-left"


RAY_ANGLES = {"gamma1": 2, "gamma2": 3, "gamma3": -2}  # in units of pi/3


def _ray_distance(zeta: mp.mpc) -> mp.mpf:
    dist = abs(zeta)
    for k in RAY_ANGLES.values():
        rotated = zeta * mp.expjpi(-mp.mpf(k) / 3)
        if rotated.real > 0:
            dist = min(dist, abs(rotated.imag))
    return dist


def _classify(zeta: mp.mpc) -> Sector:
    arg = mp.arg(zeta)
    third = 2 * mp.pi / 3
    if abs(arg) < third:
        return Sector.RIGHT
    return Sector.UPPER_LEFT if arg > 0 else Sector.LOWER_LEFT


@dataclass(frozen=True)
class BesselPoint:
    """A point of the Bessel-problem plane together with the sector whose
    formula is used.  Constructing one directly allows evaluating a sector's
    formula up to and on its boundary rays (boundary values)."""

    zeta: mp.mpc
    sector: Sector

    def __post_init__(self):
        zeta = mp.mpc(self.zeta)
        object.__setattr__(self, "zeta", zeta)
        if zeta == 0:
            raise ValueError("zeta = 0 is the branch point")
        arg = mp.arg(zeta)
        slack = mp.mpf(10) ** (-mp.mp.dps // 2)
        third = 2 * mp.pi / 3
        ok = {
            Sector.RIGHT: abs(arg) <= third + slack,
            Sector.UPPER_LEFT: arg >= third - slack or (zeta.imag == 0 and zeta.real < 0),
            Sector.LOWER_LEFT: arg <= -third + slack or (zeta.imag == 0 and zeta.real < 0),
        }[self.sector]
        if not ok:
            raise ValueError(f"sector {self.sector.value} inconsistent with arg {mp.nstr(arg, 8)}")

    @classmethod
    def at(cls, zeta, digits: int | None = None) -> "BesselPoint":
        """Classify ``zeta`` by its argument.

        With ``digits`` given, points closer than ``10^-(digits/2)`` to a ray
        are rejected since their sector is numerically ambiguous.
        """
        zeta = mp.mpc(zeta)
        if digits is not None and _ray_distance(zeta) < mp.mpf(10) ** (-digits / 2):
            raise RayProximityError(f"zeta={mp.nstr(zeta, 10)} is within 10^-{digits / 2} of a ray")
        return cls(zeta, _classify(zeta))


def _bessel_block(nu: int, x, kind: str):
    """Value and derivative of I, K, H1 or H2 of order ``nu`` at ``x``."""
    f = {"I": mp.besseli, "K": mp.besselk, "H1": mp.hankel1, "H2": mp.hankel2}[kind]
    val = f(nu, x)
    below = f(nu - 1, x) if nu else None
    if kind == "I":
        der = f(1, x) if nu == 0 else below - nu / x * val
    elif kind == "K":
        der = -f(1, x) if nu == 0 else -below - nu / x * val
    else:
        der = -f(1, x) if nu == 0 else below - nu / x * val
    return val, der


def psi_matrix(nu: int, point: BesselPoint, digits: int = 40) -> Matrix2C:
    """Bessel model matrix ``Psi_nu(zeta)`` in the sector recorded on ``point``."""
    if nu not in (0, 1):
        raise ValueError("nu must be 0 or 1")
    with mp.workdps(digits + 15):
        zeta = mp.mpc(point.zeta)
        if point.sector is Sector.RIGHT:
            r = mp.sqrt(zeta)
            x = 2 * r
            I, Ip = _bessel_block(nu, x, "I")
            K, Kp = _bessel_block(nu, x, "K")
            M = Matrix2C(I, -1j / mp.pi * K, -2j * mp.pi * r * Ip, -2 * r * Kp)
        else:
            m = mp.sqrt(-zeta)
            x = 2 * m
            H1, H1p = _bessel_block(nu, x, "H1")
            H2, H2p = _bessel_block(nu, x, "H2")
            phase = mp.expjpi(mp.mpf(nu) / 2)
            if point.sector is Sector.UPPER_LEFT:
                r = 1j * m
                M = Matrix2C(H1 / 2, -H2 / 2, -mp.pi * r * H1p, mp.pi * r * H2p)
                M = M @ Matrix2C.diag(phase, 1 / phase)
            else:
                r = -1j * m
                M = Matrix2C(H2 / 2, H1 / 2, mp.pi * r * H2p, mp.pi * r * H1p)
                M = M @ Matrix2C.diag(1 / phase, phase)
    with mp.workdps(digits):
        return Matrix2C(*(+e for e in M.entries()))


def psi_jump(nu: int, ray: str) -> Matrix2C:
    """Jump of ``Psi_nu`` across ``gamma1``, ``gamma2`` or ``gamma3`` (rays oriented outward)."""
    if ray == "gamma1":
        return lower(mp.expjpi(nu))
    if ray == "gamma2":
        return _rot()
    if ray == "gamma3":
        return lower(mp.expjpi(-nu))
    raise ValueError(f"unknown ray {ray!r}")


RAY_SIDES = {
    # ray: (sector on the + side, sector on the - side); + is left of the orientation
    "gamma1": (Sector.UPPER_LEFT, Sector.RIGHT),
    "gamma2": (Sector.LOWER_LEFT, Sector.UPPER_LEFT),
    "gamma3": (Sector.RIGHT, Sector.LOWER_LEFT),
}


def psi_ray_residual(nu: int, ray: str, radius, digits: int = 40) -> mp.mpf:
    """Relative defect of ``Psi_+ = Psi_- J`` at the point of ``ray`` with modulus ``radius``."""
    with mp.workdps(digits + 15):
        zeta = mp.mpf(radius) * mp.expjpi(mp.mpf(RAY_ANGLES[ray]) / 3)
        if ray == "gamma2":
            zeta = mp.mpc(-mp.mpf(radius), 0)
        plus_sec, minus_sec = RAY_SIDES[ray]
        plus = psi_matrix(nu, BesselPoint(zeta, plus_sec), digits + 10)
        minus = psi_matrix(nu, BesselPoint(zeta, minus_sec), digits + 10)
        diff = plus - minus @ psi_jump(nu, ray)
        return diff.norm() / (minus.norm() * psi_jump(nu, ray).norm())


# -- lens contour ---------------------------------------------------------------

class Segment(enum.Enum):
    SIGMA1 = "sigma1"    # upper lobe, -1 -> 1 + delta
    SIGMA2 = "sigma2"    # lower lobe, -1 -> 1 + delta
    INTERVAL = "interval"  # (-1, 1), left to right
    RIGHT = "right"      # (1, 1 + delta), right to left


@dataclass(frozen=True)
class ContourPoint:
    """A point of the lens contour given by its segment and parameter.

    ``z`` and ``tangent`` are recomputed at the active precision, so a point
    built at low precision can still be offset by a tiny ``eta`` later.
    """

    contour: "LensContour"
    segment: Segment
    param: object
    inner: bool = True

    @property
    def z(self) -> mp.mpc:
        return self.contour.locate(self)[0]

    @property
    def tangent(self) -> mp.mpc:
        """Unit vector along the orientation."""
        return self.contour.locate(self)[1]

    def offset(self, side: Side, eta) -> mp.mpc:
        """Point a distance ``eta`` off the contour on the given side (+ is to the left)."""
        z, tangent = self.contour.locate(self)
        sign = 1 if side is Side.PLUS else -1
        return z + sign * 1j * tangent * eta


@dataclass(frozen=True)
class LensContour:
    """Lens-shaped contour with fixed, n-independent geometry.

    Inside the disk ``|z+1| < radius`` the lobes are the preimages of the rays
    ``arg = -/+ 2 pi/3`` under ``xi``; outside they continue as quadratic
    Bezier arcs of height ``lobe_height`` ending at ``1 + delta``.
    """

    delta: object = mp.mpf(1) / 2
    lobe_height: object = mp.mpf(1) / 4
    radius: object = mp.mpf(1) / 4

    def lobe_inner(self, upper: bool, r) -> tuple[mp.mpc, mp.mpc]:
        """Lobe point with ``xi = r e^{-/+ 2 pi i/3}`` and its unit tangent."""
        r = mp.mpf(r)
        rot = mp.expjpi(mp.mpf(-1 if upper else 1) / 3)
        u = 2 * mp.sqrt(r) * rot
        z = -mp.cosh(u)
        # dz/dr = -sinh(u) du/dr, du/dr = rot/sqrt(r)
        dz = -mp.sinh(u) * rot / mp.sqrt(r)
        return z, dz / abs(dz)

    @property
    def r_exit(self) -> mp.mpf:
        """Parameter where the inner lobe leaves the disk around -1."""
        radius = mp.mpf(self.radius)
        lo, hi = mp.mpf(0), mp.mpf(1)
        for _ in range(mp.mp.prec + 10):
            mid = (lo + hi) / 2
            if abs(self.lobe_inner(True, mid)[0] + 1) > radius:
                hi = mid
            else:
                lo = mid
        return (lo + hi) / 2

    def lobe_outer(self, upper: bool, t) -> tuple[mp.mpc, mp.mpc]:
        t = mp.mpf(t)
        p0 = self.lobe_inner(upper, self.r_exit)[0]
        p2 = mp.mpc(1 + mp.mpf(self.delta))
        sign = 1 if upper else -1
        ctrl = mp.mpc((p0.real + p2.real) / 2, sign * 2 * mp.mpf(self.lobe_height) - p0.imag / 2)
        z = (1 - t) ** 2 * p0 + 2 * t * (1 - t) * ctrl + t ** 2 * p2
        dz = 2 * (1 - t) * (ctrl - p0) + 2 * t * (p2 - ctrl)
        return z, dz / abs(dz)

    def locate(self, point: ContourPoint) -> tuple[mp.mpc, mp.mpc]:
        seg, param = point.segment, mp.mpf(point.param)
        if seg in (Segment.SIGMA1, Segment.SIGMA2):
            upper = seg is Segment.SIGMA1
            if point.inner:
                return self.lobe_inner(upper, param)
            return self.lobe_outer(upper, param)
        if seg is Segment.INTERVAL:
            return mp.mpc(param), mp.mpc(1)
        return mp.mpc(param), mp.mpc(-1)

    def boundary_crossings(self) -> list:
        """Angles (about -1) where the contour meets the circle ``|z+1| = radius``."""
        ang = mp.arg(self.lobe_inner(True, self.r_exit)[0] + 1)
        return [mp.mpf(0), ang, -ang]

    def inside_points(self, segment: Segment, count: int = 5) -> list:
        """Sample points of ``segment`` inside the disk, away from -1 and the rim."""
        if segment is Segment.RIGHT:
            raise ValueError("only SIGMA1, SIGMA2 and INTERVAL meet the disk")
        pts = []
        for j in range(count):
            frac = mp.mpf(1) / 25 + mp.mpf(9) / 10 * (j + 1) / (count + 1)
            if segment is Segment.INTERVAL:
                param = -1 + mp.mpf(self.radius) * frac
            else:
                param = self.r_exit * frac
            pts.append(ContourPoint(self, segment, param))
        return pts

    def outside_points(self, segment: Segment, count: int = 5) -> list:
        pts = []
        for j in range(count):
            frac = mp.mpf(j + 1) / (count + 1)
            if segment in (Segment.SIGMA1, Segment.SIGMA2):
                pts.append(ContourPoint(self, segment, frac, inner=False))
            elif segment is Segment.INTERVAL:
                radius = mp.mpf(self.radius)
                pts.append(ContourPoint(self, segment, -1 + radius + frac * (2 - radius), inner=False))
            else:
                pts.append(ContourPoint(self, segment, 1 + frac * mp.mpf(self.delta), inner=False))
        return pts

    def rim_points(self, count: int = 16, clearance=mp.mpf("0.1")) -> list:
        """Points on ``|z+1| = radius`` at least ``clearance`` radians from the contour."""
        cross = self.boundary_crossings()
        pts = []
        for j in range(count):
            ang = -mp.pi + 2 * mp.pi * (j + mp.mpf(1) / 2) / count
            if all(abs(ang - c) > clearance for c in cross):
                pts.append(-1 + mp.mpf(self.radius) * mp.expj(ang))
        return pts


# -- problems ---------------------------------------------------------------

class Kind(enum.Enum):
    P = "P"
    PHAT = "Phat"
    PTILDE = "Ptilde"


class LocalProblem:
    """Weight data (Szego function, ``W``, ``F^2/w``) for one of the three problems."""

    def __init__(self, kind: Kind, digits: int = 40, d0=None):
        self.kind = kind
        self.digits = digits
        self.nu = 0 if kind is Kind.PTILDE else 1
        self.d0 = None
        self._ev = None
        self._cache: dict = {}
        if kind is Kind.PHAT:
            if d0 is None:
                from .szego import compute_d0
                d0 = compute_d0(max(digits + 10, 64)).value
            self.d0 = d0 if isinstance(d0, mp.mpf) else WeightSpec.model(d0).d0
        elif kind is Kind.P:
            self._ev = SzegoEvaluator(WeightSpec.log(), digits + 10)

    def F(self, z) -> mp.mpc:
        if self.kind is Kind.P:
            key = (mp.mp.dps, mp.mpc(z))
            if key not in self._cache:
                self._cache[key] = self._ev.F(z)
            return self._cache[key]
        if self.kind is Kind.PHAT:
            return szego_Fhat(z, self.d0)
        return mp.mpc(1)

    def W(self, z) -> mp.mpc:
        """``sqrt(-w)`` with its cut on ``(-1, inf)`` near -1."""
        z = mp.mpc(z)
        if self.kind is Kind.P:
            w = -mp.log1p(-(z + 1) / 2)
        elif self.kind is Kind.PHAT:
            w = (1 + z) * mp.exp(self.d0 * z)
        else:
            return mp.mpc(1)
        return mp.sqrt(-w)

    def f2w(self, z) -> mp.mpc:
        if self.kind is Kind.P:
            return self._ev.f2w(z)
        if self.kind is Kind.PHAT:
            return f2w_hat(z, self.d0)
        return mp.mpc(1)

    def f2w_right(self, x) -> mp.mpc:
        """The ``(1, 1+delta)`` jump coefficient before the ``phi^{-2n}`` factor."""
        if self.kind is Kind.P:
            x = mp.mpc(x)
            return self._ev.f2w(x, Side.PLUS) + self._ev.f2w(x, Side.MINUS)
        return 2 * self.f2w(x)


def jump_matrix(point: ContourPoint, problem: LocalProblem, n: int) -> Matrix2C:
    """Jump matrix ``v``, ``vhat`` or ``vtilde`` at a point of the lens contour."""
    s = point.z
    if s == 1 or s == -1:
        raise ValueError("no jump defined at the endpoints")
    if point.segment is Segment.INTERVAL:
        return _rot()
    ph = phi(s)
    if point.segment is Segment.RIGHT:
        return lower(problem.f2w_right(s) * ph ** (-2 * n))
    return lower(problem.f2w(s) * ph ** (-2 * n))


def _extra_digits(z, n: int) -> int:
    zeta = n * n * xi_map(z)
    growth = float(2 * abs(mp.sqrt(zeta).real)) / math.log(10)
    return 15 + int(growth) + max(0, int(-math.log10(float(abs(z + 1)))))


def local_E(problem: LocalProblem, z) -> Matrix2C:
    z = mp.mpc(z)
    N = outer_parametrix_N(z)
    c = Matrix2C.rows((1, 1j), (1j, 1)).scale(1 / mp.sqrt(2))
    WF = problem.W(z) / problem.F(z)
    xi = xi_map(z)
    return N @ Matrix2C.diag(WF) @ c @ Matrix2C.diag(mp.power(xi, mp.mpf(1) / 4))


def local_parametrix(problem: LocalProblem, z, n: int, digits: int | None = None) -> Matrix2C:
    """Local parametrix at ``z`` in the disk around -1, off the contour."""
    if n < 1:
        raise ValueError("n must be positive")
    digits = digits or problem.digits
    z = mp.mpc(z)
    if z.imag == 0 and z.real >= -1:
        raise ValueError("z lies on the contour; use parametrix_boundary")
    with mp.workdps(digits + _extra_digits(z, n)):
        zeta = n * n * xi_map(z)
        point = BesselPoint(zeta, _classify(zeta))
        psi = psi_matrix(problem.nu, point, mp.mp.dps)
        root = mp.sqrt(zeta)
        D = Matrix2C.diag(mp.exp(-2 * root))
        if problem.kind is not Kind.PTILDE:
            D = D @ Matrix2C.diag(problem.F(z) / problem.W(z))
        P = local_E(problem, z) @ Matrix2C.diag(mp.sqrt(2 * mp.pi * n)) @ psi @ D
    with mp.workdps(digits):
        return Matrix2C(*(+e for e in P.entries()))


def parametrix_boundary(problem: LocalProblem, point: ContourPoint, side: Side, n: int,
                        digits: int | None = None) -> Matrix2C:
    digits = digits or problem.digits
    with mp.workdps(2 * digits + 30):
        eta = mp.mpf(10) ** (-(digits + 10))
        return local_parametrix(problem, point.offset(side, eta), n, 2 * digits + 20)


def parametrix_jump_residual(problem: LocalProblem, point: ContourPoint, n: int,
                             digits: int | None = None) -> mp.mpf:
    """Relative defect of ``P_+ = P_- v`` at a contour point inside the disk."""
    digits = digits or problem.digits
    plus = parametrix_boundary(problem, point, Side.PLUS, n, digits)
    minus = parametrix_boundary(problem, point, Side.MINUS, n, digits)
    with mp.workdps(2 * digits + 30):
        v = jump_matrix(point, problem, n)
        return (plus - minus @ v).norm() / (minus.norm() * v.norm())


def matching_defect(problem: LocalProblem, n: int, contour: LensContour | None = None,
                    count: int = 16) -> mp.mpf:
    """``max ||P(s) N(s)^{-1} - I||`` over rim points of the disk around -1."""
    contour = contour or LensContour()
    worst = mp.mpf(0)
    for s in contour.rim_points(count):
        P = local_parametrix(problem, s, n)
        worst = max(worst, (P @ outer_parametrix_N(s).inv() - Matrix2C.identity()).norm())
    return worst


def growth_envelope(kind: Kind, n: int, t) -> mp.mpf:
    t = mp.mpf(t)
    if kind is Kind.PTILDE:
        return t ** (-mp.mpf(1) / 4)
    return max(t ** (-mp.mpf(1) / 4), t ** (-mp.mpf(1) / 2) / mp.sqrt(n))


SCAN_ANGLES = (1, 4, 6, -4, -1)  # multiples of pi/6, clear of the contour


@dataclass(frozen=True)
class GrowthScan:
    kind: Kind
    n: int
    ratios: tuple  # (t, angle, ||P||/envelope)

    @property
    def max_ratio(self) -> mp.mpf:
        return max(r for _, _, r in self.ratios)


def parametrix_growth_scan(problem: LocalProblem, n: int, points: int = 9) -> GrowthScan:
    """Sample ``||P(z)|| / envelope`` on rays ``z + 1 = t e^{i theta}``, ``t in [10^-2, 10^2]/n^2``."""
    out = []
    for j in range(points):
        t = mp.mpf(10) ** (-2 + 4 * mp.mpf(j) / (points - 1)) / n ** 2
        for k in SCAN_ANGLES:
            z = -1 + t * mp.expjpi(mp.mpf(k) / 6)
            norm = local_parametrix(problem, z, n).norm()
            out.append((t, k, norm / growth_envelope(problem.kind, n, t)))
    return GrowthScan(problem.kind, n, tuple(out))


def bessel_core(nu: int, z, n: int, digits: int = 40) -> Matrix2C:
    """``(2 pi n)^{sigma_3/2} Psi_nu(n^2 xi(z)) [-phi(z)]^{-n sigma_3}`` without E or F/W."""
    z = mp.mpc(z)
    with mp.workdps(digits + _extra_digits(z, n)):
        zeta = n * n * xi_map(z)
        psi = psi_matrix(nu, BesselPoint(zeta, _classify(zeta)), mp.mp.dps)
        M = Matrix2C.diag(mp.sqrt(2 * mp.pi * n)) @ psi @ Matrix2C.diag(mp.exp(-2 * mp.sqrt(zeta)))
    with mp.workdps(digits):
        return Matrix2C(*(+e for e in M.entries()))
