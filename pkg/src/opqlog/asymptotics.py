"""Asymptotic formulas for the recurrence coefficients and constant extraction.

Constants are never read off a single index.  Every fit is a least-squares
regression over at least 20 log-spaced indices spanning at least a decade,
carried out in mpmath so that reports are reproducible bit for bit.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp

from .numerics import BigReal
from .recurrence import RecurrenceTable
from .weights import WeightKind

MIN_FIT_POINTS = 20
FIT_SAMPLES = 30


class InsufficientRangeError(ValueError):
    """The table does not cover enough indices for a fit."""


class ModelKind(enum.Enum):
    LOG = "log"
    LOGK = "logk"
    GENERAL = "general"
    MODEL = "model"


@dataclass(frozen=True)
class AsymptoticModel:
    """Truncated two-term expansion of ``a_n`` and ``b_n``.

    All kinds are instances of the general (alpha, beta, B, C) form

        a_n ~ (beta^2 - alpha^2)/(4n^2) + 2B/(n^2 log n) + 2C/(n^2 log^2 n)
        b_n ~ 1/2 - (alpha^2 + beta^2 - 1/2)/(8n^2) + B/(n^2 log n) + C/(n^2 log^2 n)

    with Jacobi-type exponents ``alpha`` at +1 and ``beta`` at -1.
    """

    kind: ModelKind
    alpha: Fraction = Fraction(0)
    beta: Fraction = Fraction(0)
    B: Fraction = Fraction(0)
    C: Fraction = Fraction(0)

    def __post_init__(self):
        for name in ("alpha", "beta", "B", "C"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.alpha <= -1 or self.beta <= -1:
            raise ValueError("exponents must exceed -1")

    @classmethod
    def log_weight(cls) -> "AsymptoticModel":
        return cls(ModelKind.LOG, 0, 1, 0, Fraction(-3, 32))

    @classmethod
    def logk_weight(cls) -> "AsymptoticModel":
        return cls(ModelKind.LOGK, 0, 0, 0, Fraction(-3, 32))

    @classmethod
    def general(cls, alpha, beta, B, C) -> "AsymptoticModel":
        return cls(ModelKind.GENERAL, alpha, beta, B, C)

    @classmethod
    def model_weight(cls) -> "AsymptoticModel":
        return cls(ModelKind.MODEL, 0, 1, 0, 0)

    @classmethod
    def for_weight(cls, kind: WeightKind) -> "AsymptoticModel":
        return {
            WeightKind.LOG: cls.log_weight,
            WeightKind.LOGK: cls.logk_weight,
            WeightKind.MODEL: cls.model_weight,
            WeightKind.LEGENDRE: lambda: cls(ModelKind.GENERAL, 0, 0, 0, 0),
        }[kind]()

    @property
    def a_leading(self) -> Fraction:
        """Coefficient of ``1/n^2`` in ``a_n``."""
        return (self.beta ** 2 - self.alpha ** 2) / 4

    @property
    def b_leading(self) -> Fraction:
        """Coefficient of ``1/n^2`` in ``b_n``."""
        return -(self.alpha ** 2 + self.beta ** 2 - Fraction(1, 2)) / 8


def _q(x: Fraction) -> mp.mpf:
    return mp.mpf(x.numerator) / x.denominator


def asympt_eval(model: AsymptoticModel, n: int, digits: int = 40) -> tuple[mp.mpf, mp.mpf]:
    """Truncated predictions ``(a_pred, b_pred)`` at index ``n``."""
    if n < 2:
        raise ValueError("the expansion needs n >= 2")
    with mp.workdps(digits):
        n2 = mp.mpf(n) ** 2
        L = mp.log(n)
        a = _q(model.a_leading) / n2 + 2 * _q(model.B) / (n2 * L) + 2 * _q(model.C) / (n2 * L ** 2)
        b = (mp.mpf(1) / 2 + _q(model.b_leading) / n2 + _q(model.B) / (n2 * L)
             + _q(model.C) / (n2 * L ** 2))
        return +a, +b


class Target(enum.Enum):
    A_LOG2 = "a_log2_coeff"
    B_LOG2 = "b_log2_coeff"
    A_LEADING = "a_leading"
    B_LEADING = "b_leading"


@dataclass(frozen=True)
class FitReport:
    target: Target
    target_constant: BigReal
    fitted: BigReal
    relative_error: BigReal
    n_range: tuple
    residual_decay_slope: BigReal
    samples: int

    def as_dict(self) -> dict:
        return {
            "target": self.target.value,
            "target_constant": self.target_constant.to_string(20),
            "fitted": self.fitted.to_string(20),
            "relative_error": self.relative_error.to_string(6),
            "n_range": list(self.n_range),
            "residual_decay_slope": self.residual_decay_slope.to_string(6),
            "samples": self.samples,
        }


def fit_indices(lo: int, hi: int, count: int = FIT_SAMPLES) -> list:
    """Distinct, roughly log-spaced integers in ``[lo, hi]``."""
    if lo < 2 or hi < lo:
        raise InsufficientRangeError(f"bad index range [{lo}, {hi}]")
    with mp.workdps(30):
        pts = sorted({int(mp.nint(mp.mpf(lo) * (mp.mpf(hi) / lo) ** (mp.mpf(j) / (count - 1))))
                      for j in range(count)})
    if len(pts) < MIN_FIT_POINTS:
        raise InsufficientRangeError(f"only {len(pts)} indices in [{lo}, {hi}]")
    return pts


def linear_fit(xs, ys) -> tuple[mp.mpf, mp.mpf]:
    """Least-squares ``y = c + d x``."""
    k = len(xs)
    sx, sy = mp.fsum(xs), mp.fsum(ys)
    sxx = mp.fsum(x * x for x in xs)
    sxy = mp.fsum(x * y for x, y in zip(xs, ys))
    d = (k * sxy - sx * sy) / (k * sxx - sx * sx)
    return (sy - d * sx) / k, d


def _a(table: RecurrenceTable, n: int) -> mp.mpf:
    return table.a_mpf(n)


def _b(table: RecurrenceTable, n: int) -> mp.mpf:
    return mp.sqrt(table.b2_mpf(n))


def log2_scaled(table: RecurrenceTable, n: int, which: str,
                model: AsymptoticModel | None = None,
                reference: RecurrenceTable | None = None) -> mp.mpf:
    """``(x_n - leading_n) n^2 log^2 n`` for ``x = a`` or ``b``.

    Without ``reference`` the leading part is the ``1/n^2`` (and constant)
    part of ``model``; with it, the leading part is the reference table's own
    coefficient, i.e. the scaled difference ``(x_n - xref_n) n^2 log^2 n``.
    """
    get = _a if which == "a" else _b
    if reference is not None:
        lead = get(reference, n)
    else:
        model = model or AsymptoticModel.for_weight(table.weight.kind)
        n2 = mp.mpf(n) ** 2
        lead = (_q(model.a_leading) / n2 if which == "a"
                else mp.mpf(1) / 2 + _q(model.b_leading) / n2)
    return (get(table, n) - lead) * mp.mpf(n) ** 2 * mp.log(n) ** 2


def _usable_hi(table: RecurrenceTable, which: str) -> int:
    return table.N if which == "a" else len(table.b2) - 1


def _resolve_range(table: RecurrenceTable, which: str, n_range) -> tuple[int, int]:
    hi_max = _usable_hi(table, which)
    if n_range is None:
        lo, hi = max(2, hi_max // 10), hi_max
    else:
        lo, hi = n_range
        if hi > hi_max:
            raise InsufficientRangeError(f"table reaches n={hi_max}, need {hi}")
    if hi < 10 * lo:
        raise InsufficientRangeError("fit range must span at least one decade")
    return lo, hi


def _log_fit(ys_fn, target_value, lo, hi, target: Target, digits: int) -> FitReport:
    ns = fit_indices(lo, hi)
    inv_logs = [1 / mp.log(n) for n in ns]
    ys = [ys_fn(n) for n in ns]
    c, _ = linear_fit(inv_logs, ys)
    # residual against the fitted limit should decay like 1/log n
    pairs = [(mp.log(mp.log(n)), mp.log(abs(y - c))) for n, y in zip(ns, ys) if y != c]
    if len(pairs) < 2:
        # the correction vanishes identically (e.g. a table against itself)
        slope = mp.ninf
    else:
        _, slope = linear_fit([p[0] for p in pairs], [p[1] for p in pairs])
    return _report(target, target_value, c, slope, lo, hi, len(ns), digits)


def _power_fit(ys_fn, target_value, lo, hi, target: Target, digits: int) -> FitReport:
    ns = fit_indices(lo, hi)
    ys = [ys_fn(n) for n in ns]
    c, _ = linear_fit([1 / mp.mpf(n) for n in ns], ys)
    pairs = [(mp.log(n), mp.log(abs(y - target_value))) for n, y in zip(ns, ys)]
    _, slope = linear_fit([p[0] for p in pairs], [p[1] for p in pairs])
    return _report(target, target_value, c, slope, lo, hi, len(ns), digits)


def _report(target, target_value, fitted, slope, lo, hi, count, digits) -> FitReport:
    err = abs(fitted - target_value)
    rel = err / abs(target_value) if target_value else err
    return FitReport(target, BigReal.of(target_value, digits), BigReal.of(fitted, digits),
                     BigReal.of(rel, digits), (lo, hi), BigReal.of(slope, digits), count)


def extract_constant(table: RecurrenceTable, target: Target, n_range=None,
                     reference: RecurrenceTable | None = None, digits: int = 30) -> FitReport:
    """Fit one asymptotic constant from a recurrence table.

    Parameters
    ----------
    table : RecurrenceTable
        Coefficients of the weight under study; must reach ``n >= 1000``
        unless ``n_range`` is given.
    target : Target
        ``A_LOG2``/``B_LOG2`` fit ``c_n = c + d/log n`` to the scaled
        log-squared correction; ``A_LEADING``/``B_LEADING`` fit the ratio of
        the coefficient's ``1/n^2`` part to its predicted value as ``c + d/n``.
    n_range : (int, int), optional
        Fit window; defaults to the top decade of the table.
    reference : RecurrenceTable, optional
        For the log-squared targets, subtract this table's coefficients
        instead of the model's leading terms.

    Returns
    -------
    FitReport
        ``residual_decay_slope`` is the log-log slope of ``|c_n - c|`` against
        ``log n`` (log-squared targets) or of the ratio residual against ``n``.
    """
    which = "a" if target in (Target.A_LOG2, Target.A_LEADING) else "b"
    if n_range is None and _usable_hi(table, which) < 1000:
        raise InsufficientRangeError("constant extraction needs a table reaching n >= 1000")
    lo, hi = _resolve_range(table, which, n_range)
    model = AsymptoticModel.for_weight(table.weight.kind)
    work = max(digits + 10, (table.digits or 40))
    with mp.workdps(work):
        if target in (Target.A_LOG2, Target.B_LOG2):
            expected = _q(2 * model.C if which == "a" else model.C)
            fn = lambda n: log2_scaled(table, n, which, model, reference)
            return _log_fit(fn, expected, lo, hi, target, digits)
        lead = model.a_leading if which == "a" else model.b_leading
        if lead == 0:
            raise ValueError(f"{table.weight.label} has no 1/n^2 term in {which}_n")
        if which == "a":
            fn = lambda n: _a(table, n) * mp.mpf(n) ** 2 / _q(lead)
        else:
            fn = lambda n: (_b(table, n) - mp.mpf(1) / 2) * mp.mpf(n) ** 2 / _q(lead)
        return _power_fit(fn, mp.mpf(1), lo, hi, target, digits)


@dataclass(frozen=True)
class DifferenceReport:
    rows: tuple  # (n, a_n - ahat_n, b_n - bhat_n)
    a_fit: FitReport
    b_fit: FitReport

    def as_dict(self) -> dict:
        return {"a_fit": self.a_fit.as_dict(), "b_fit": self.b_fit.as_dict(),
                "rows": [[n, mp.nstr(da, 20), mp.nstr(db, 20)] for n, da, db in self.rows]}


def difference_report(table: RecurrenceTable, reference: RecurrenceTable, n_range=None,
                      digits: int = 30) -> DifferenceReport:
    """Compare two tables index by index and fit the log-squared constants of the difference."""
    hi_common = min(table.N, reference.N)
    if hi_common < 2:
        raise InsufficientRangeError("tables share no usable indices")
    a_fit = extract_constant(table, Target.A_LOG2, n_range, reference, digits)
    b_fit = extract_constant(table, Target.B_LOG2, n_range, reference, digits)
    work = max(digits + 10, (table.digits or 40))
    with mp.workdps(work):
        rows = tuple((n, _a(table, n) - _a(reference, n), _b(table, n) - _b(reference, n))
                     for n in fit_indices(*b_fit.n_range))
    return DifferenceReport(rows, a_fit, b_fit)


def scaled_remainder(table: RecurrenceTable, model: AsymptoticModel, n: int) -> tuple:
    """``(a_n - a_pred, (a_n - a_pred) n^2 log^3 n)`` and the same for ``b``."""
    a_pred, b_pred = asympt_eval(model, n, mp.mp.dps)
    scale = mp.mpf(n) ** 2 * mp.log(n) ** 3
    ra = _a(table, n) - a_pred
    rb = _b(table, n) - b_pred
    return ra, ra * scale, rb, rb * scale


def remainder_constant(table: RecurrenceTable, model: AsymptoticModel | None = None,
                       n_range=(500, 5000)) -> tuple[mp.mpf, mp.mpf]:
    """Smallest ``K`` with ``|x_n - x_pred| <= K/(n^2 log^3 n)`` on the fit indices, for ``a`` and ``b``."""
    model = model or AsymptoticModel.for_weight(table.weight.kind)
    lo, hi = n_range
    hi = min(hi, table.N - 1)
    with mp.workdps(max(40, table.digits or 40)):
        ka = kb = mp.mpf(0)
        for n in fit_indices(lo, hi):
            _, sa, _, sb = scaled_remainder(table, model, n)
            ka, kb = max(ka, abs(sa)), max(kb, abs(sb))
    return ka, kb


def improvement_pairs(table: RecurrenceTable, starts=(250, 1000),
                      reference: RecurrenceTable | None = None) -> list:
    """``(n, |c_n + 3/16|, |c_4n + 3/16|)`` for the scaled ``a`` correction."""
    model = AsymptoticModel.for_weight(table.weight.kind)
    target = _q(2 * model.C)
    out = []
    with mp.workdps(max(40, table.digits or 40)):
        for n in starts:
            e1 = abs(log2_scaled(table, n, "a", model, reference) - target)
            e4 = abs(log2_scaled(table, 4 * n, "a", model, reference) - target)
            out.append((n, e1, e4))
    return out


def asympt_rows(table: RecurrenceTable, model: AsymptoticModel | None = None,
                n_range=None, digits: int = 30) -> list:
    """Rows ``(n, a_n, a_pred, scaled_residual)`` on the fit indices of ``n_range``."""
    model = model or AsymptoticModel.for_weight(table.weight.kind)
    lo, hi = n_range or (max(2, table.N // 10), table.N)
    rows = []
    for n in fit_indices(lo, hi):
        a_pred, _ = asympt_eval(model, n, mp.mp.dps)
        scaled = (_a(table, n) - a_pred) * mp.mpf(n) ** 2 * mp.log(n) ** 3
        rows.append((n, mp.nstr(_a(table, n), digits, strip_zeros=False),
                     mp.nstr(a_pred, digits, strip_zeros=False), mp.nstr(scaled, 12)))
    return rows
