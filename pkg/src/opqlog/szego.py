"""Exterior conformal map, Szego functions and the constant d0.

The Szego function of a weight ``w`` on [-1, 1] is evaluated through

    E(z) = c/2 + R(z)/(2 pi) * int_0^pi (g(cos t) - c)/(z - cos t) dt,
    R(z) = (z^2 - 1)^{1/2},

which holds for any constant ``c`` because the Cauchy transform of the
arcsine density is ``pi/R(z)``.  Choosing ``c = g(z)`` keeps the integrand
regular as ``z`` approaches the interval.  For weights vanishing at -1 the
factor ``(1+x)`` is split off analytically and ``g = log(w/(1+x))``; for the
others ``g = log w``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import gmpy2
import mpmath as mp

from .numerics import bits_for_digits, gmpy_from_mpf, mpf_from_gmpy, sqrt_z2m1
from .weights import Side, WeightKind, WeightSpec, weight_eval


class DomainError(ValueError):
    """Point lies on the cut where only boundary values are defined."""


class QuadratureAccuracyError(ArithmeticError):
    """Two refinement levels of the Szego quadrature disagree."""


def _on_interval(z: mp.mpc) -> bool:
    return z.imag == 0 and -1 <= z.real <= 1


def phi(z) -> mp.mpc:
    """``phi(z) = z + (z^2-1)^{1/2}``, mapping the slit plane onto ``|phi| > 1``."""
    z = mp.mpc(z)
    if _on_interval(z):
        raise DomainError("phi is not defined on [-1, 1]; use phi_boundary")
    return z + sqrt_z2m1(z)


def phi_boundary(x, side: Side) -> mp.mpc:
    """Boundary values ``phi_pm(x) = x +/- i sqrt(1 - x^2)`` on (-1, 1)."""
    x = mp.mpf(x)
    if not -1 < x < 1:
        raise DomainError("phi_boundary needs -1 < x < 1")
    sign = {Side.PLUS: 1, Side.MINUS: -1}[side]
    return mp.mpc(x, sign * mp.sqrt((1 - x) * (1 + x)))


def jacobi_factor(z) -> mp.mpc:
    """Szego function ``(z+1)^{1/2}/phi(z)^{1/2}`` of the weight ``1 + x``."""
    z = mp.mpc(z)
    return mp.sqrt(z + 1) / mp.sqrt(phi(z))


def szego_Fhat(z, d0) -> mp.mpc:
    """Closed-form Szego function of the model weight ``(1+x) exp(d0 x)``."""
    z = mp.mpc(z)
    return jacobi_factor(z) * mp.exp(d0 * (z - sqrt_z2m1(z)) / 2)


def f2w_hat(z, d0) -> mp.mpc:
    """``Fhat^2/what = phi^{-1} exp(-(z^2-1)^{1/2} d0)``."""
    z = mp.mpc(z)
    return mp.exp(-sqrt_z2m1(z) * d0) / phi(z)


def _log_weight_ratio(u):
    # log(2/(1-s))/(1+s) with u = 1+s; -log1p(-u/2)/u without cancellation near u=0
    return -mp.log1p(-u / 2) / u


@dataclass
class SzegoEvaluator:
    """Quadrature evaluator for the Szego function of one weight.

    Parameters
    ----------
    weight : WeightSpec
        Weight on [-1, 1].
    digits : int
        Target accuracy in decimal digits.  Internally ``digits + 20`` are
        carried to absorb cancellation in the subtracted integrand.
    quad_nodes : int, optional
        Gauss-Legendre nodes per panel of the graded mesh; at least 16.
    """

    weight: WeightSpec
    digits: int = 40
    quad_nodes: int | None = None
    _rules: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.quad_nodes is None:
            # panels with ratio 2 converge like 5.8^{-2q} ~ 10^{-1.53 q}
            self.quad_nodes = max(16, math.ceil((self.digits + 10) / 1.5))
        if self.quad_nodes < 16:
            raise ValueError("quad_nodes must be >= 16")

    @property
    def work_dps(self) -> int:
        return self.digits + 20

    @property
    def factored(self) -> bool:
        return self.weight.vanishes_at_minus_one

    # reduced log-weight g on the interval, from t = 1 - s and u = 1 + s
    def _g_real(self, t, u):
        kind = self.weight.kind
        if kind is WeightKind.MODEL:
            return self.weight.d0 * (u - 1 if u < 1 else 1 - t)
        if kind is WeightKind.LEGENDRE:
            return mp.mpf(0)
        w = _log_weight_ratio(u) * u if u < 1 else mp.log(2 / t)
        if kind is WeightKind.LOG:
            return mp.log(w / u)
        return mp.log(w + mp.log(_kval(self.weight)))

    def g(self, z) -> mp.mpc:
        """Analytic continuation of the reduced log-weight (any branch is admissible)."""
        z = mp.mpc(z)
        kind = self.weight.kind
        if kind is WeightKind.MODEL:
            return self.weight.d0 * z
        if kind is WeightKind.LEGENDRE:
            return mp.mpc(0)
        h = z + 1
        if kind is WeightKind.LOG:
            return mp.log(_log_weight_ratio(h))
        return mp.log(-mp.log1p(-h / 2) + mp.log(_kval(self.weight)))

    def _depth(self, singular: bool) -> int:
        # a log-log endpoint needs panels down to 10^-(work_dps); a smooth
        # endpoint only needs to resolve |z -/+ 1| >= 10^-work_dps, i.e. angles
        # down to 10^-(work_dps/2)
        decades = self.work_dps + 2 if singular else self.work_dps // 2 + 2
        return math.ceil(decades * math.log2(10)) + 2

    def _rule(self, q: int):
        if q in self._rules:
            return self._rules[q]
        kind = self.weight.kind
        right_singular = kind in (WeightKind.LOG, WeightKind.LOGK)
        with mp.workdps(self.work_dps):
            X, W = mp.gauss_quadrature(q, "legendre")
            nodes, weights, gvals = [], [], []
            for right in (True, False):
                half = mp.pi / 2
                depth = self._depth(right_singular and right)
                edges = [half / mp.mpf(2) ** k for k in range(depth + 1)] + [mp.mpf(0)]
                for hi, lo in zip(edges[:-1], edges[1:]):
                    mid, rad = (hi + lo) / 2, (hi - lo) / 2
                    for x, wq in zip(X, W):
                        ang = mid + rad * x
                        sn, cs = mp.sin(ang / 2), mp.cos(ang / 2)
                        near, far = 2 * sn * sn, 2 * cs * cs
                        # ang is the angle from the endpoint: right half has
                        # 1 - s = near, left half has 1 + s = near
                        if right:
                            nodes.append(1 - near)
                            gvals.append(self._g_real(near, far))
                        else:
                            nodes.append(near - 1)
                            gvals.append(self._g_real(far, near))
                        weights.append(rad * wq)
        with gmpy2.context(precision=bits_for_digits(self.work_dps)):
            rule = ([gmpy_from_mpf(v) for v in nodes], [gmpy_from_mpf(v) for v in weights],
                    [gmpy_from_mpf(v) for v in gvals])
        self._rules[q] = rule
        return rule

    def _J(self, z, c, q):
        nodes, weights, gvals = self._rule(q)
        with gmpy2.context(precision=bits_for_digits(self.work_dps)):
            zg = gmpy2.mpc(gmpy_from_mpf(z.real), gmpy_from_mpf(z.imag))
            cg = gmpy2.mpc(gmpy_from_mpf(c.real), gmpy_from_mpf(c.imag))
            total = gmpy2.mpc(0)
            for sj, wj, gj in zip(nodes, weights, gvals):
                total += wj * (gj - cg) / (zg - sj)
            return mp.mpc(mpf_from_gmpy(total.real), mpf_from_gmpy(total.imag))

    def _J_checked(self, z, c):
        fine = self._J(z, c, self.quad_nodes + self.quad_nodes // 2)
        coarse = self._J(z, c, self.quad_nodes)
        tol = mp.mpf(10) ** (-self.digits) * max(1, abs(fine))
        if abs(fine - coarse) > tol:
            raise QuadratureAccuracyError(
                f"refinement levels differ by {mp.nstr(abs(fine - coarse), 3)} at z={z}")
        return fine

    def exponent(self, z):
        """``(E(z), R(z) J(z) / pi)`` with ``c = g(z)`` subtraction."""
        z = mp.mpc(z)
        if _on_interval(z):
            raise DomainError("z on [-1, 1]; use boundary()")
        c = self.g(z)
        R = sqrt_z2m1(z)
        RJ = R * self._J_checked(z, c) / mp.pi
        return c / 2 + RJ / 2, RJ

    def F(self, z) -> mp.mpc:
        """Szego function at ``z`` off [-1, 1]."""
        if self.weight.kind is WeightKind.LEGENDRE:
            return mp.mpc(1)
        with mp.workdps(self.work_dps):
            z = mp.mpc(z)
            E, _ = self.exponent(z)
            val = mp.exp(E)
            if self.factored:
                val *= jacobi_factor(z)
        with mp.workdps(self.digits):
            return +val

    def f2w(self, z, side: Side = Side.OFF) -> mp.mpc:
        """``F(z)^2/w(z)``; on ``x > 1`` pass ``side`` to pick ``w_+`` or ``w_-``."""
        if self.weight.kind is WeightKind.LEGENDRE:
            return mp.mpc(1)
        with mp.workdps(self.work_dps):
            z = mp.mpc(z)
            if z.imag == 0 and z.real > 1 and self.weight.kind in (WeightKind.LOG,
                                                                  WeightKind.LOGK):
                if side is Side.OFF:
                    raise DomainError("z on the cut of w; pass side=PLUS or MINUS")
                val = self.F(z) ** 2 / weight_eval(self.weight, z, side)
            else:
                _, RJ = self.exponent(z)
                val = mp.exp(RJ)
                if self.factored:
                    val /= phi(z)
        with mp.workdps(self.digits):
            return +val

    def boundary(self, x, side: Side, method: str = "extrapolate") -> mp.mpc:
        """Boundary value ``F_pm(x)`` on (-1, 1).

        ``method="extrapolate"`` evaluates ``F(x +/- i eps)`` on a geometric
        sequence of ``eps`` and extrapolates polynomially to ``eps = 0``;
        ``method="direct"`` uses the regular boundary form of the integral.
        """
        if side is Side.OFF:
            raise ValueError("boundary values need side PLUS or MINUS")
        sign = 1 if side is Side.PLUS else -1
        if self.weight.kind is WeightKind.LEGENDRE:
            return mp.mpc(1)
        with mp.workdps(self.work_dps):
            x = mp.mpf(x)
            if not -1 < x < 1:
                raise DomainError("boundary values need -1 < x < 1")
            if method == "direct":
                c = self._g_real(1 - x, 1 + x)
                J = self._J_checked(mp.mpc(x), c)
                rt = mp.sqrt((1 - x) * (1 + x))
                E = c / 2 + sign * 1j * rt * J / (2 * mp.pi)
                val = mp.exp(E)
                if self.factored:
                    val *= mp.sqrt(1 + x) / mp.sqrt(phi_boundary(x, side))
            elif method == "extrapolate":
                eps, vals = epsilon_sequence(self.digits), []
                for e in eps:
                    vals.append(self.F(mp.mpc(x, sign * e)))
                val = neville_at_zero(eps, vals)
            else:
                raise ValueError(f"unknown method {method!r}")
        with mp.workdps(self.digits):
            return +val

    def F_infinity(self) -> mp.mpf:
        """``lim F(z)`` as ``z -> +inf``; real and positive."""
        if self.weight.kind is WeightKind.LEGENDRE:
            return mp.mpf(1)
        with mp.workdps(self.work_dps):
            _, weights, gvals = self._rule(self.quad_nodes)
            E = mp.fsum(mpf_from_gmpy(w * g) for w, g in zip(weights, gvals)) / (2 * mp.pi)
            val = mp.exp(E)
            if self.factored:
                val /= mp.sqrt(2)
        with mp.workdps(self.digits):
            return +val


def _kval(w: WeightSpec) -> mp.mpf:
    return mp.mpf(w.k.numerator) / w.k.denominator


def epsilon_sequence(digits: int) -> list:
    """Offsets ``10^-6, 10^-10, ...`` whose product falls below ``10^-(digits+5)``."""
    eps, prod, j = [], mp.mpf(1), 0
    while prod > mp.mpf(10) ** (-(digits + 5)):
        e = mp.mpf(10) ** (-(6 + 4 * j))
        eps.append(e)
        prod *= e
        j += 1
    return eps


def neville_at_zero(xs, ys):
    """Value at 0 of the interpolating polynomial through ``(xs, ys)``."""
    p = list(ys)
    n = len(xs)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i])
    return p[0]


@functools.lru_cache(maxsize=32)
def _evaluator(weight: WeightSpec, digits: int) -> SzegoEvaluator:
    return SzegoEvaluator(weight, digits)


def szego_F(z, w: WeightSpec, digits: int = 40) -> mp.mpc:
    return _evaluator(w, digits).F(z)


def f2w(z, w: WeightSpec, side: Side = Side.OFF, digits: int = 40) -> mp.mpc:
    return _evaluator(w, digits).f2w(z, side)


# -- d0 ---------------------------------------------------------------------

@dataclass(frozen=True)
class ContourSpec:
    """Closed contour through 1: vertical segments at Re = 1, horizontal
    segments at height ``rho``, and a half-circle of radius ``rho`` around -1."""

    rho: mp.mpf
    levels: int = 60
    ratio: int = 4


@dataclass(frozen=True)
class D0Result:
    value: mp.mpf
    residual: mp.mpf
    imag_part: mp.mpf
    contour: ContourSpec
    digits: int


def _d0_integrand(u):
    # zeta = 1 + u; log(w/(1+zeta)) / ((zeta^2-1)^{1/2} (zeta+1))
    w = mp.log(2) - mp.log(-u)
    return mp.log(w / (2 + u)) / (mp.sqrt(u) * mp.sqrt(u + 2) * (2 + u))


def d0_contour(contour: ContourSpec, digits: int) -> mp.mpc:
    """Raw value of ``(1/2 pi i) oint log(w/(1+z))/((z^2-1)^{1/2}(z+1)) dz``."""
    with mp.workdps(digits + 10):
        rho = mp.mpf(contour.rho)
        ys = [mp.mpf(0)] + [rho / mp.mpf(contour.ratio) ** k
                            for k in range(contour.levels, -1, -1)]
        up = mp.quad(lambda y: _d0_integrand(1j * y) * 1j, ys)
        top = mp.quad(lambda x: _d0_integrand(x - 1 + 1j * rho), [1, 0, -1])
        arc = mp.quad(lambda t: _d0_integrand(-2 + rho * mp.expj(t)) * 1j * rho * mp.expj(t),
                      [mp.pi / 2, mp.pi, 3 * mp.pi / 2])
        bottom = mp.quad(lambda x: _d0_integrand(x - 1 - 1j * rho), [-1, 0, 1])
        down = mp.quad(lambda y: _d0_integrand(-1j * y) * 1j, ys)
        total = (up + top + arc + bottom + down) / (2j * mp.pi)
    with mp.workdps(digits):
        return +total


def _q_series(u):
    # 2 w(-1+u)/u - 1 = sum_{m>=1} (u/2)^m/(m+1), summed directly for small u
    if abs(u) >= mp.mpf(1) / 2:
        return -2 * mp.log1p(-u / 2) / u - 1
    h, total, p, m = u / 2, mp.mpf(0), u / 2, 1
    while True:
        term = p / (m + 1)
        total += term
        if abs(term) < mp.eps * abs(total):
            return total
        p *= h
        m += 1


def d0_real_axis(digits: int) -> mp.mpf:
    """d0 from the collapsed contour: ``(1/pi) int (g(s)+log 2)/((1+s) sqrt(1-s^2)) ds``."""
    with mp.workdps(digits + 10):
        def left(v):
            u = mp.exp(-v)
            return mp.log1p(_q_series(u)) / mp.sqrt(u * (2 - u))

        def right(v):
            t = mp.exp(-v)
            g_plus_log2 = mp.log(mp.log(2 / t)) - mp.log(2 - t) + mp.log(2)
            return g_plus_log2 / ((2 - t) * mp.sqrt(2 - t)) * mp.sqrt(t)

        cuts = [0, 1, 10, 100, mp.inf]
        val = (mp.quad(left, cuts) + mp.quad(right, cuts)) / mp.pi
    with mp.workdps(digits):
        return +val


@functools.lru_cache(maxsize=8)
def compute_d0(digits: int = 64, rho=0.5, levels: int = 60) -> D0Result:
    """The constant d0 of the model weight, by contour quadrature.

    ``residual`` is the distance to the independent real-axis evaluation and
    ``imag_part`` the size of the imaginary part of the raw contour integral.
    """
    if digits < 32:
        raise ValueError("digits must be >= 32")
    spec = ContourSpec(mp.mpf(rho), levels)
    raw = d0_contour(spec, digits)
    oracle = d0_real_axis(digits)
    with mp.workdps(digits):
        return D0Result(+raw.real, abs(raw.real - oracle), abs(raw.imag), spec, digits)


# -- expansion checks --------------------------------------------------------

def plus_one_ratio(ev: SzegoEvaluator, r) -> mp.mpf:
    """``(F^2/w_+ + F^2/w_- - 2) / (-3 pi^2 / log^2(2/r))`` at ``x = 1 + r``."""
    with mp.workdps(ev.work_dps):
        r = mp.mpf(r)
        x = mp.mpc(1 + r)
        s = ev.f2w(x, Side.PLUS) + ev.f2w(x, Side.MINUS)
        return (s.real - 2) / (-3 * mp.pi ** 2 / mp.log(2 / r) ** 2)


def plus_one_defect(ev: SzegoEvaluator, z) -> mp.mpc:
    """``F^2/w - (1 - i pi/w - pi^2/(2 w^2))`` for ``Im z > 0``."""
    with mp.workdps(ev.work_dps):
        z = mp.mpc(z)
        w = weight_eval(ev.weight, z)
        return ev.f2w(z) - (1 - 1j * mp.pi / w - mp.pi ** 2 / (2 * w ** 2))


def shift_difference(n: int, r, rt, ev: SzegoEvaluator) -> mp.mpf:
    """Shift difference ``S`` of ``F^2/w_pm`` between ``1 + r`` and ``1 + rt``.

    ``S`` is real because the two sides are complex conjugates.
    """
    with mp.workdps(ev.work_dps):
        r, rt = mp.mpf(r), mp.mpf(rt)
        if not (0 < r < 1 and 0 < rt < 1):
            raise ValueError("need 0 < r, rt < 1")
        if r == rt:
            return mp.mpf(0)

        def both(rr):
            x = mp.mpc(1 + rr)
            F2 = ev.F(x) ** 2
            w_p = weight_eval(ev.weight, x, Side.PLUS)
            w_m = weight_eval(ev.weight, x, Side.MINUS)
            return F2 / w_p + F2 / w_m

        S = both(r) - both(rt)
        return S.real


def shift_envelope(n: int, r) -> mp.mpf:
    r = mp.mpf(r)
    L = abs(mp.log(r))
    return r * mp.log(L) + 1 / (n * L ** 3) + mp.mpf(1) / n ** 2
