"""Precision policy and scalar types shared by every other module.

All analytic work runs on :mod:`mpmath` numbers inside an explicit
``workdps`` block; the recurrence engines drop down to :mod:`gmpy2`
for their inner loops.  Precision is always counted in decimal digits.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

import gmpy2
import mpmath as mp

Rational = Fraction

DEFAULT_BASE_DIGITS = 40
DEFAULT_GUARD_DIGITS = 8

ENGINES = ("chebyshev", "moment-float", "exact")


class PrecisionExhaustedError(ArithmeticError):
    """Raised when a computation lost all significant digits at the requested precision."""


class InvariantError(RuntimeError):
    """Raised when an internal mathematical invariant is violated."""


def _env_base_digits() -> int:
    raw = os.environ.get("OPQ_DIGITS")
    if raw is None:
        return DEFAULT_BASE_DIGITS
    value = int(raw)
    if value < 32:
        raise ValueError(f"OPQ_DIGITS must be >= 32, got {value}")
    return value


@dataclass(frozen=True)
class PrecisionConfig:
    """Working precision split into reported digits and guard digits."""

    base_digits: int = field(default_factory=_env_base_digits)
    guard_digits: int = DEFAULT_GUARD_DIGITS

    def __post_init__(self):
        if self.base_digits < 32:
            raise ValueError("base_digits must be >= 32")
        if self.guard_digits < 8:
            raise ValueError("guard_digits must be >= 8")

    @property
    def effective_digits(self) -> int:
        return self.base_digits + self.guard_digits

    def raised(self, extra: int) -> "PrecisionConfig":
        return PrecisionConfig(self.base_digits + extra, self.guard_digits)


def digits_for_recurrence(n_max: int, algo: str = "chebyshev",
                          config: PrecisionConfig | None = None) -> int:
    """Working digits needed to compute recurrence coefficients up to ``n_max``.

    The modified Chebyshev algorithm against Legendre moments loses only
    about two digits per decade of ``n``; the power-moment (Hankel) route
    in floating point loses roughly 0.9 digits per index.  The guard digits
    of ``config`` are added on top of the policy value.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    config = config or PrecisionConfig()
    base = config.base_digits
    if algo == "chebyshev":
        policy = max(64, 2 * math.ceil(math.log10(n_max + 2)) + base)
    elif algo == "moment-float":
        policy = max(64, math.ceil(0.9 * n_max) + base)
    else:
        raise ValueError(f"unknown engine tag {algo!r}")
    return policy + config.guard_digits


def bits_for_digits(digits: int) -> int:
    return int(math.ceil(digits * math.log2(10))) + 8


def gmpy_context(digits: int) -> gmpy2.context:
    return gmpy2.context(precision=bits_for_digits(digits))


def mpf_from_gmpy(x) -> mp.mpf:
    """Convert an ``mpfr`` to an ``mpf`` without going through a decimal string."""
    if x == 0:
        return mp.mpf(0)
    man, exp = x.as_mantissa_exp()
    # make_mpf skips the rounding to the ambient mpmath precision
    return mp.mp.make_mpf(mp.libmp.from_man_exp(int(man), int(exp)))


def gmpy_from_mpf(x):
    """Exact ``mpf`` to ``mpfr`` conversion (rounded only by the active gmpy2 context)."""
    sign, man, exp, _ = (x if isinstance(x, mp.mpf) else mp.mpf(x))._mpf_
    if not man:
        if exp:
            raise ValueError("cannot convert a non-finite value")
        return gmpy2.mpfr(0)
    val = gmpy2.mul_2exp(gmpy2.mpfr(man), exp)
    return -val if sign else val


def principal_sqrt(z) -> mp.mpc:
    """Principal square root: branch cut on (-inf, 0), ``Re(result) >= 0``."""
    return mp.sqrt(mp.mpc(z))


def sqrt_z2m1(z) -> mp.mpc:
    """``(z^2 - 1)^{1/2}`` with its cut on ``[-1, 1]`` and ``~ z`` at infinity."""
    z = mp.mpc(z)
    return mp.sqrt(z - 1) * mp.sqrt(z + 1)


def tolerance(digits: int) -> mp.mpf:
    return mp.mpf(10) ** (-digits)


def correct_digits(value, reference) -> float:
    """Number of agreeing decimal digits between ``value`` and ``reference``."""
    err = abs(mp.mpc(value) - mp.mpc(reference))
    scale = max(abs(mp.mpc(reference)), mp.mpf(1))
    if err == 0:
        return math.inf
    return float(-mp.log10(err / scale))


def precision_stability(fn: Callable[[int], object], config: PrecisionConfig,
                        extra: int = 20) -> mp.mpf:
    """Change in ``fn(digits)`` when the working precision is raised by ``extra`` digits.

    ``fn`` receives the effective digit count and returns an mpmath scalar.
    """
    lo = fn(config.effective_digits)
    hi = fn(config.raised(extra).effective_digits)
    with mp.workdps(config.effective_digits + extra):
        return abs(mp.mpc(hi) - mp.mpc(lo))


Number = Union[int, float, str, Fraction, mp.mpf]


def _as_mpf(x: Number, digits: int) -> mp.mpf:
    with mp.workdps(digits):
        if isinstance(x, Fraction):
            return mp.mpf(x.numerator) / x.denominator
        return mp.mpf(x)


@dataclass(frozen=True)
class BigReal:
    """A real value tagged with the decimal precision it is valid to.

    Mixed-precision arithmetic rounds to the smaller precision of the two
    operands; precision is never widened implicitly.
    """

    value: mp.mpf
    digits: int

    @classmethod
    def of(cls, x: Number, digits: int) -> "BigReal":
        if digits <= 0:
            raise ValueError("digits must be positive")
        return cls(_as_mpf(x, digits), digits)

    def _binary(self, other, op):
        if isinstance(other, BigReal):
            digits = min(self.digits, other.digits)
            rhs = other.value
        else:
            digits = self.digits
            rhs = other
        with mp.workdps(digits):
            rhs = _as_mpf(rhs, digits) if not isinstance(rhs, mp.mpf) else rhs
            return BigReal(op(+self.value, +rhs), digits)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return self._binary(other, lambda a, b: b / a)

    def __neg__(self):
        return BigReal(-self.value, self.digits)

    def __abs__(self):
        return BigReal(abs(self.value), self.digits)

    def __lt__(self, other):
        return self.value < (other.value if isinstance(other, BigReal) else other)

    def __gt__(self, other):
        return self.value > (other.value if isinstance(other, BigReal) else other)

    def __le__(self, other):
        return self.value <= (other.value if isinstance(other, BigReal) else other)

    def __ge__(self, other):
        return self.value >= (other.value if isinstance(other, BigReal) else other)

    def __float__(self):
        return float(self.value)

    def to_string(self, digits: int | None = None) -> str:
        """Decimal string at ``digits`` significant digits (default: all carried digits)."""
        return mp.nstr(self.value, digits or self.digits)

    def __str__(self):
        return self.to_string()


@dataclass(frozen=True)
class BigComplex:
    """Complex value with equal-precision real and imaginary parts."""

    re: BigReal
    im: BigReal

    def __post_init__(self):
        if self.re.digits != self.im.digits:
            raise ValueError("real and imaginary parts must carry equal digits")

    @classmethod
    def of(cls, z, digits: int) -> "BigComplex":
        with mp.workdps(digits):
            z = mp.mpc(z)
            return cls(BigReal(+z.real, digits), BigReal(+z.imag, digits))

    @property
    def digits(self) -> int:
        return self.re.digits

    @property
    def value(self) -> mp.mpc:
        return mp.mpc(self.re.value, self.im.value)

    def conjugate(self) -> "BigComplex":
        return BigComplex(self.re, -self.im)

    def _binary(self, other, op):
        if isinstance(other, BigComplex):
            digits = min(self.digits, other.digits)
            rhs = other.value
        elif isinstance(other, BigReal):
            digits = min(self.digits, other.digits)
            rhs = other.value
        else:
            digits = self.digits
            rhs = other
        with mp.workdps(digits):
            return BigComplex.of(op(self.value, mp.mpc(rhs)), digits)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b)

    def __truediv__(self, other):
        return self._binary(other, lambda a, b: a / b)

    def __abs__(self):
        with mp.workdps(self.digits):
            return BigReal(abs(self.value), self.digits)

    def sqrt(self) -> "BigComplex":
        with mp.workdps(self.digits):
            return BigComplex.of(principal_sqrt(self.value), self.digits)
