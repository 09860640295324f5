"""Weights on [-1, 1], their exact power moments and Legendre-modified moments."""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Union

import mpmath as mp

from .numerics import BigReal


class WeightKind(enum.Enum):
    LOG = "log"
    LOGK = "logk"
    MODEL = "model"
    LEGENDRE = "legendre"


class Side(enum.Enum):
    PLUS = "+"
    MINUS = "-"
    OFF = "off"


class SingularityError(ValueError):
    """Evaluation requested at a singular point of the weight."""


@dataclass(frozen=True)
class WeightSpec:
    """A weight function on [-1, 1].

    ``Log`` is ``log(2/(1-x))``, ``LogK`` is ``log(2k/(1-x))`` with ``k > 1``,
    ``Model`` is ``(1+x) exp(d0 x)`` and ``Legendre`` is identically one.
    """

    kind: WeightKind
    k: Fraction | None = None
    d0: mp.mpf | None = None

    def __post_init__(self):
        if self.kind is WeightKind.LOGK:
            if self.k is None or Fraction(self.k) <= 1:
                raise ValueError("LogK requires a rational k > 1")
            object.__setattr__(self, "k", Fraction(self.k))
        elif self.k is not None:
            raise ValueError(f"{self.kind.value} weight takes no k parameter")
        if self.kind is WeightKind.MODEL:
            if self.d0 is None:
                raise ValueError("Model weight requires d0")
            d0 = self.d0.value if isinstance(self.d0, BigReal) else self.d0
            if not isinstance(d0, mp.mpf):
                # never round d0 to the ambient precision
                with mp.workdps(max(mp.mp.dps, 120)):
                    d0 = mp.mpf(d0)
            object.__setattr__(self, "d0", d0)
        elif self.d0 is not None:
            raise ValueError(f"{self.kind.value} weight takes no d0 parameter")

    @classmethod
    def log(cls) -> "WeightSpec":
        return cls(WeightKind.LOG)

    @classmethod
    def logk(cls, k) -> "WeightSpec":
        return cls(WeightKind.LOGK, k=Fraction(k))

    @classmethod
    def model(cls, d0) -> "WeightSpec":
        return cls(WeightKind.MODEL, d0=d0)

    @classmethod
    def legendre(cls) -> "WeightSpec":
        return cls(WeightKind.LEGENDRE)

    @property
    def has_exact_moments(self) -> bool:
        return self.kind is not WeightKind.MODEL

    @property
    def vanishes_at_minus_one(self) -> bool:
        return self.kind in (WeightKind.LOG, WeightKind.MODEL)

    @property
    def label(self) -> str:
        if self.kind is WeightKind.LOGK:
            return f"logk:{self.k}"
        if self.kind is WeightKind.MODEL:
            return f"model:{mp.nstr(self.d0, 30)}"
        return self.kind.value

    def __call__(self, x):
        """Real weight value at ``x`` in (-1, 1)."""
        return weight_eval(self, x, Side.OFF).real


def _log_like_moment(n: int) -> Fraction:
    # x = 1 - 2u turns the integral into moments of -log u on [0, 1]
    return 2 * sum(Fraction(comb(n, j) * (-2) ** j, (j + 1) ** 2) for j in range(n + 1))


def _poly_moment(n: int) -> Fraction:
    return Fraction(2, n + 1) if n % 2 == 0 else Fraction(0)


@dataclass(frozen=True)
class LogExtendedRational:
    """Exact number ``p + q log k`` with rational ``p, q`` and fixed rational ``k``.

    The set is closed under addition and rational scaling, which is all the
    moment computations need; products of two such numbers leave it.
    """

    p: Fraction
    q: Fraction
    k: Fraction

    def __post_init__(self):
        object.__setattr__(self, "p", Fraction(self.p))
        object.__setattr__(self, "q", Fraction(self.q))
        object.__setattr__(self, "k", Fraction(self.k))

    def _check(self, other: "LogExtendedRational"):
        if other.k != self.k:
            raise ValueError("cannot combine values with different log bases")

    def __add__(self, other):
        if isinstance(other, LogExtendedRational):
            self._check(other)
            return LogExtendedRational(self.p + other.p, self.q + other.q, self.k)
        if isinstance(other, (int, Fraction)):
            return LogExtendedRational(self.p + other, self.q, self.k)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return LogExtendedRational(-self.p, -self.q, self.k)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return LogExtendedRational(self.p * other, self.q * other, self.k)
        if isinstance(other, LogExtendedRational):
            self._check(other)
            if self.q == 0:
                return other * self.p
            if other.q == 0:
                return self * other.p
            raise TypeError("product leaves Q + Q log k")
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (1 / Fraction(other))
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, LogExtendedRational):
            return (self.p, self.q, self.k) == (other.p, other.q, other.k)
        if isinstance(other, (int, Fraction)):
            return self.q == 0 and self.p == other
        return NotImplemented

    def __hash__(self):
        return hash((self.p, self.q, self.k)) if self.q else hash(self.p)

    def collapse(self) -> Union[Fraction, "LogExtendedRational"]:
        return self.p if self.q == 0 else self

    def to_mpf(self, digits: int | None = None) -> mp.mpf:
        with mp.workdps(digits or mp.mp.dps):
            k = mp.mpf(self.k.numerator) / self.k.denominator
            return _frac_mpf(self.p) + _frac_mpf(self.q) * mp.log(k)

    def __str__(self):
        return f"{self.p}+{self.q}*log({self.k})"


def _frac_mpf(x: Fraction) -> mp.mpf:
    return mp.mpf(x.numerator) / x.denominator


Exact = Union[Fraction, LogExtendedRational]


def power_moment(w: WeightSpec, n: int) -> Exact:
    """Exact moment ``int_{-1}^{1} x^n w(x) dx``.

    Parameters
    ----------
    w : WeightSpec
        Any weight except ``Model``.
    n : int
        Non-negative exponent.

    Returns
    -------
    Fraction or LogExtendedRational
        ``LogK`` moments carry a ``log k`` part; the others are rational.
    """
    if n < 0:
        raise ValueError("moment index must be non-negative")
    if w.kind is WeightKind.LOG:
        return _log_like_moment(n)
    if w.kind is WeightKind.LEGENDRE:
        return _poly_moment(n)
    if w.kind is WeightKind.LOGK:
        return LogExtendedRational(_log_like_moment(n), _poly_moment(n), w.k)
    raise ValueError("the model weight has no exact moments; use modified_moment_model")


def legendre_modified_moment(w: WeightSpec, k: int) -> Exact:
    """Exact ``int P_k(x) w(x) dx`` with ``P_k`` the classical Legendre polynomial."""
    if k < 0:
        raise ValueError("moment index must be non-negative")
    if w.kind is WeightKind.LEGENDRE:
        return Fraction(2) if k == 0 else Fraction(0)
    if w.kind in (WeightKind.LOG, WeightKind.LOGK):
        base = Fraction(2) if k == 0 else Fraction(2, k * (k + 1))
        if w.kind is WeightKind.LOG:
            return base
        return LogExtendedRational(base, 2 if k == 0 else 0, w.k)
    raise ValueError("use modified_moment_model for the model weight")


def spherical_bessel_i(k: int, c, digits: int) -> mp.mpf:
    """Modified spherical Bessel function ``i_k(c)`` by its power series.

    ``i_k(c) = c^k/(2k+1)!! * sum_m (c^2/2)^m / (m! prod_{j=1..m} (2k+2j+1))``.
    """
    with mp.workdps(digits + 10):
        c = mp.mpf(c)
        if c == 0:
            return mp.mpf(1) if k == 0 else mp.mpf(0)
        lead = mp.mpf(1)
        for j in range(1, k + 1):
            lead = lead * c / (2 * j + 1)
        half_c2 = c * c / 2
        term = mp.mpf(1)
        total = mp.mpf(1)
        eps = mp.mpf(10) ** (-(digits + 5))
        for m in range(1, 10 * digits + 1):
            term = term * half_c2 / (m * (2 * k + 2 * m + 1))
            total += term
            if abs(term) <= eps * abs(total):
                break
        else:
            raise ArithmeticError(f"i_{k}({c}) series did not converge in {10 * digits} terms")
        return +(lead * total)


def modified_moment_model(d0, k: int, digits: int) -> mp.mpf:
    """``int P_k(x) (1+x) exp(d0 x) dx`` via modified spherical Bessel functions."""
    if k < 0:
        raise ValueError("moment index must be non-negative")
    d0 = d0.value if isinstance(d0, BigReal) else d0
    with mp.workdps(digits + 10):
        ik = spherical_bessel_i(k, d0, digits)
        ikp = spherical_bessel_i(k + 1, d0, digits)
        ikm = spherical_bessel_i(k - 1, d0, digits) if k > 0 else mp.mpf(0)
        val = 2 * ik + (2 * (k + 1) * ikp + 2 * k * ikm) / (2 * k + 1)
    with mp.workdps(digits):
        return +val


def model_modified_moments(d0, count: int, digits: int) -> list:
    """First ``count`` model-weight modified moments, sharing the ``i_k`` evaluations."""
    d0 = d0.value if isinstance(d0, BigReal) else d0
    with mp.workdps(digits + 10):
        i = [spherical_bessel_i(k, d0, digits) for k in range(count + 1)]
        out = []
        for k in range(count):
            ikm = i[k - 1] if k > 0 else 0
            out.append(2 * i[k] + (2 * (k + 1) * i[k + 1] + 2 * k * ikm) / (2 * k + 1))
    with mp.workdps(digits):
        return [+v for v in out]


def weight_eval(w: WeightSpec, z, side: Side = Side.OFF) -> mp.mpc:
    """Analytic continuation of ``w`` off its cut, or its boundary value on ``x > 1``.

    The ``Log`` and ``LogK`` weights are continued as ``log(2k) - Log(1-z)``
    with the principal logarithm, so the cut is ``[1, inf)`` and the values
    from above and below are ``log(2k/(x-1)) +/- i pi``.
    """
    z = mp.mpc(z)
    if w.kind is WeightKind.LEGENDRE:
        return mp.mpc(1)
    if w.kind is WeightKind.MODEL:
        return (1 + z) * mp.exp(w.d0 * z)
    base = mp.log(2) if w.kind is WeightKind.LOG else mp.log(2 * _frac_mpf(w.k))
    if z == 1:
        raise SingularityError("weight is singular at z = 1")
    if z.imag == 0 and z.real > 1:
        if side is Side.OFF:
            raise SingularityError("z lies on the cut [1, inf); pass side=PLUS or MINUS")
        sign = 1 if side is Side.PLUS else -1
        return mp.mpc(base - mp.log(z.real - 1), sign * mp.pi)
    return base - mp.log(1 - z)


class MomentKind(enum.Enum):
    POWER = "power"
    LEGENDRE_MODIFIED = "legendre"


@dataclass(frozen=True)
class MomentVector:
    """A finite run of moments of one weight, exact when possible."""

    entries: tuple
    kind: MomentKind
    weight: WeightSpec

    def __post_init__(self):
        if not self.entries:
            raise ValueError("moment vector is empty")
        first = self.entries[0]
        value = first.to_mpf(30) if isinstance(first, LogExtendedRational) else first
        if not value > 0:
            raise ValueError("total mass must be positive")
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self):
        return len(self.entries)

    @property
    def exact(self) -> bool:
        return all(isinstance(e, (Fraction, LogExtendedRational)) for e in self.entries)

    @classmethod
    def power(cls, w: WeightSpec, count: int) -> "MomentVector":
        return cls(tuple(power_moment(w, n) for n in range(count)), MomentKind.POWER, w)

    @classmethod
    def legendre(cls, w: WeightSpec, count: int, digits: int | None = None) -> "MomentVector":
        """Legendre-modified moments; ``digits`` is needed only for the model weight."""
        if w.kind is WeightKind.MODEL:
            if digits is None:
                raise ValueError("model moments need a working precision")
            entries = model_modified_moments(w.d0, count, digits)
        else:
            entries = [legendre_modified_moment(w, k) for k in range(count)]
        return cls(tuple(entries), MomentKind.LEGENDRE_MODIFIED, w)


def _format_entry(value, digits: int) -> tuple[str, str, str]:
    if isinstance(value, Fraction):
        return str(value.numerator), str(value.denominator), ""
    if isinstance(value, LogExtendedRational):
        return "", "", str(value)
    with mp.workdps(digits + 5):
        return "", "", mp.nstr(mp.mpf(value), digits)


def moments_to_csv(mv: MomentVector, digits: int = 40, header: dict | None = None) -> str:
    """CSV text with columns index, numerator, denominator, decimal."""
    buf = io.StringIO()
    if header is not None:
        buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "numerator", "denominator", "decimal"])
    for i, e in enumerate(mv.entries):
        writer.writerow([i, *_format_entry(e, digits)])
    return buf.getvalue()


def moments_to_json(mv: MomentVector, digits: int = 40, header: dict | None = None) -> str:
    rows = []
    for i, e in enumerate(mv.entries):
        num, den, dec = _format_entry(e, digits)
        row = {"index": i}
        if num:
            row["value"] = f"{num}/{den}"
        else:
            row["value"] = dec
        rows.append(row)
    doc = {"metadata": header or {}, "kind": mv.kind.value,
           "weight": mv.weight.label, "moments": rows}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_weight(text: str, d0=None) -> WeightSpec:
    """Parse ``log``, ``legendre``, ``logk:<k>`` or ``model[:<d0>]``."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "log" and not arg:
        return WeightSpec.log()
    if name == "legendre" and not arg:
        return WeightSpec.legendre()
    if name == "logk":
        if not arg:
            raise ValueError("logk needs a parameter, e.g. logk:2")
        return WeightSpec.logk(Fraction(arg))
    if name == "model":
        if arg:
            return WeightSpec.model(arg)
        if d0 is None:
            raise ValueError("model weight needs d0")
        return WeightSpec.model(d0)
    raise ValueError(f"unknown weight {text!r}")

