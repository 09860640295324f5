"""Three-term recurrence coefficients: exact Gram-Schmidt and modified Chebyshev.

Coefficients follow the orthonormal convention
``x p_n = b_n p_{n+1} + a_n p_n + b_{n-1} p_{n-1}``; tables store ``a_0..a_N``
and ``b_0^2..b_{N-1}^2`` (squares are rational when the moments are).
"""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import gmpy2
import mpmath as mp
import numpy as np

from .numerics import (DEFAULT_GUARD_DIGITS, InvariantError, PrecisionExhaustedError,
                       bits_for_digits, gmpy_from_mpf, mpf_from_gmpy)
from .weights import (LogExtendedRational, MomentKind, MomentVector, WeightKind,
                      WeightSpec, model_modified_moments, parse_weight, power_moment)

EXACT_MAX_N = 64


class Engine(enum.Enum):
    EXACT_GRAM = "exact-gram"
    MODIFIED_CHEBYSHEV = "modified-chebyshev"


class GramDeterminantError(InvariantError):
    """A Gram determinant vanished, which signals inconsistent moments."""


@dataclass(frozen=True)
class RecurrenceTable:
    """Recurrence coefficients with provenance.

    ``a`` has ``N+1`` entries and ``b2`` has ``N``, or ``N+1`` for a closed
    table that also carries ``b_N^2``.  ``digits`` is ``None`` for tables held
    in exact rational arithmetic.
    """

    a: tuple
    b2: tuple
    weight: WeightSpec
    engine: Engine
    digits: int | None

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(self.a))
        object.__setattr__(self, "b2", tuple(self.b2))
        if len(self.b2) not in (len(self.a) - 1, len(self.a)):
            raise ValueError("need len(b2) == len(a) - 1, or len(a) for a closed table")

    @property
    def N(self) -> int:
        return len(self.a) - 1

    @property
    def exact(self) -> bool:
        return self.digits is None

    def a_mpf(self, n: int) -> mp.mpf:
        return _to_mpf(self.a[n])

    def b2_mpf(self, n: int) -> mp.mpf:
        return _to_mpf(self.b2[n])

    def b(self, n: int, digits: int | None = None) -> mp.mpf:
        """``b_n`` as a positive real (irrational in general, even for exact tables)."""
        with mp.workdps(digits or self.digits or mp.mp.dps):
            return mp.sqrt(_to_mpf(self.b2[n]))

    @property
    def closed(self) -> bool:
        return len(self.b2) == len(self.a)

    def truncated(self, N: int, closed: bool = False) -> "RecurrenceTable":
        """Prefix up to ``a_N``; with ``closed`` it also keeps ``b_N^2``."""
        if N > self.N or (closed and N >= len(self.b2)):
            raise ValueError(f"table only reaches n={self.N}")
        return RecurrenceTable(self.a[:N + 1], self.b2[:N + 1 if closed else N], self.weight,
                               self.engine, self.digits)

    def check_invariants(self) -> None:
        """Raise :class:`InvariantError` unless ``|a_n| <= 1`` and ``0 < b_n^2 < 1``."""
        for n, a in enumerate(self.a):
            if abs(a) > 1:
                raise InvariantError(f"|a_{n}| > 1")
        for n, b2 in enumerate(self.b2):
            if not 0 < b2 < 1:
                raise InvariantError(f"b_{n}^2 outside (0, 1)")


def _to_mpf(x) -> mp.mpf:
    if isinstance(x, Fraction):
        return mp.mpf(x.numerator) / x.denominator
    if isinstance(x, LogExtendedRational):
        return x.to_mpf()
    return mp.mpf(x)


def recurrence_exact(w: WeightSpec, N: int, digits: int | None = None) -> RecurrenceTable:
    """Gram-Schmidt on monomials against exact power moments.

    Parameters
    ----------
    w : WeightSpec
        ``Log`` or ``Legendre`` run in exact rational arithmetic.  ``LogK``
        moments live in ``Q + Q log k``, which is not closed under division,
        so they are evaluated at ``digits`` precision instead.
    N : int
        Highest index of ``a``; at most 64.
    """
    if N < 0 or N > EXACT_MAX_N:
        raise ValueError(f"exact engine supports 0 <= N <= {EXACT_MAX_N}")
    if not w.has_exact_moments:
        raise ValueError("weight has no exact power moments")
    raw = [power_moment(w, j) for j in range(2 * N + 2)]
    if w.kind is WeightKind.LOGK:
        if digits is None:
            raise ValueError("LogK needs a working precision for the Gram-Schmidt divisions")
        ctx = gmpy2.context(precision=bits_for_digits(digits))
        with ctx:
            mu = [_lext_to_mpfr(m) for m in raw]
            a, b2 = _gram_schmidt(mu)
        return RecurrenceTable([mpf_from_gmpy(x) for x in a], [mpf_from_gmpy(x) for x in b2],
                               w, Engine.EXACT_GRAM, digits)
    mu = [gmpy2.mpq(m.numerator, m.denominator) for m in raw]
    a, b2 = _gram_schmidt(mu)
    return RecurrenceTable([Fraction(int(x.numerator), int(x.denominator)) for x in a],
                           [Fraction(int(x.numerator), int(x.denominator)) for x in b2],
                           w, Engine.EXACT_GRAM, None)


def _lext_to_mpfr(m: LogExtendedRational):
    k = gmpy2.mpq(m.k.numerator, m.k.denominator)
    return (gmpy2.mpq(m.p.numerator, m.p.denominator)
            + gmpy2.mpq(m.q.numerator, m.q.denominator) * gmpy2.log(gmpy2.mpfr(k)))


def _gram_schmidt(mu: Sequence) -> tuple[list, list]:
    N = (len(mu) - 2) // 2
    polys: list[list] = []
    norms: list = []

    def against_power(p, n):
        # <x^n, p>
        return sum(c * mu[i + n] for i, c in enumerate(p))

    for n in range(N + 1):
        # pi_n = x^n - sum_j <x^n, pi_j>/<pi_j, pi_j> pi_j
        p = [mu[0] * 0] * n + [mu[0] * 0 + 1]
        for j in range(n):
            coef = against_power(polys[j], n) / norms[j]
            for i, c in enumerate(polys[j]):
                p[i] -= coef * c
        # pi_n is orthogonal to lower degrees, so <pi_n, pi_n> = <x^n, pi_n>
        nrm = against_power(p, n)
        if nrm == 0:
            raise GramDeterminantError(f"<pi_{n}, pi_{n}> vanished")
        polys.append(p)
        norms.append(nrm)
    # <x pi_n, pi_n> = <x^{n+1}, pi_n> + c_{n-1} <x^n, pi_n>
    a = [(against_power(polys[n], n + 1) + (polys[n][n - 1] * norms[n] if n else 0)) / norms[n]
         for n in range(N + 1)]
    b2 = [norms[n + 1] / norms[n] for n in range(N)]
    return a, b2


def _legendre_monic_data(M: int, conv):
    """Monic Legendre recurrence ``(alpha, beta)`` and leading-coefficient scales."""
    alpha = np.array([conv(0)] * M, dtype=object)
    beta = np.array([conv(2)] + [conv(k * k) / conv(4 * k * k - 1) for k in range(1, M)],
                    dtype=object)
    lead = [conv(1)]
    for k in range(1, M):
        lead.append(lead[-1] * conv(2 * k - 1) / conv(k))
    return alpha, beta, lead


def recurrence_chebyshev(moments: MomentVector, N: int, digits: int | None,
                         on_progress: Callable[[int, list, list], None] | None = None,
                         progress_every: int = 500) -> RecurrenceTable:
    """Modified Chebyshev algorithm against the Legendre reference recurrence.

    Parameters
    ----------
    moments : MomentVector
        Legendre-modified moments ``int P_k w``; needs ``2N+2`` entries.
    N : int
        Highest index of ``a``.
    digits : int or None
        Working decimal digits, or ``None`` for exact rational arithmetic
        (only possible when all moments are rational).
    on_progress : callable, optional
        Called as ``on_progress(k, a, b2)`` every ``progress_every`` steps
        with the coefficient prefixes computed so far.

    Raises
    ------
    PrecisionExhaustedError
        If a computed ``b_n^2`` is not positive.
    """
    if moments.kind is not MomentKind.LEGENDRE_MODIFIED:
        raise ValueError("modified Chebyshev needs Legendre-modified moments")
    M = 2 * N + 2
    if len(moments) < M:
        raise ValueError(f"need {M} modified moments for N={N}, got {len(moments)}")
    entries = moments.entries[:M]
    if digits is None:
        if not all(isinstance(e, Fraction) for e in entries):
            raise ValueError("exact mode needs rational moments")
        conv = gmpy2.mpq
        m = [gmpy2.mpq(e.numerator, e.denominator) for e in entries]
        return _chebyshev_core(m, N, conv, moments.weight, None, on_progress, progress_every)

    ctx = gmpy2.context(precision=bits_for_digits(digits))
    with ctx:
        conv = gmpy2.mpfr
        m = []
        for e in entries:
            if isinstance(e, Fraction):
                m.append(gmpy2.mpfr(e.numerator) / e.denominator)
            elif isinstance(e, LogExtendedRational):
                m.append(_lext_to_mpfr(e))
            else:
                m.append(gmpy_from_mpf(e))
        return _chebyshev_core(m, N, conv, moments.weight, digits, on_progress, progress_every)


def _chebyshev_core(m, N, conv, weight, digits, on_progress, every):
    M = 2 * N + 2
    alpha, beta, lead = _legendre_monic_data(M, conv)
    sig = np.array([m[k] / lead[k] for k in range(M)], dtype=object)
    sig_prev = np.array([conv(0)] * M, dtype=object)
    if not sig[0] > 0:
        raise PrecisionExhaustedError("total mass is not positive")
    a = [alpha[0] + sig[1] / sig[0]]
    b2 = []
    for k in range(1, N + 1):
        new = np.empty(M, dtype=object)
        lo, hi = k, M - k
        new[lo:hi] = (sig[lo + 1:hi + 1] - (a[k - 1] - alpha[lo:hi]) * sig[lo:hi]
                      - (b2[k - 2] if k >= 2 else 0) * sig_prev[lo:hi]
                      + beta[lo:hi] * sig[lo - 1:hi - 1])
        if not new[k] > 0:
            raise PrecisionExhaustedError(
                f"b_{k - 1}^2 lost positivity at this precision; raise digits")
        a.append(alpha[k] + new[k + 1] / new[k] - sig[k] / sig[k - 1])
        b2.append(new[k] / sig[k - 1])
        sig_prev, sig = sig, new
        if on_progress is not None and k % every == 0:
            on_progress(k, _export(a, digits), _export(b2, digits))
    return RecurrenceTable(_export(a, digits), _export(b2, digits), weight,
                           Engine.MODIFIED_CHEBYSHEV, digits)


def _export(values, digits):
    if digits is None:
        return [Fraction(int(x.numerator), int(x.denominator)) for x in values]
    return [mpf_from_gmpy(x) for x in values]


def chebyshev_table(w: WeightSpec, N: int, digits: int | None, **kwargs) -> RecurrenceTable:
    """Convenience wrapper: build the modified moments of ``w`` and run the engine."""
    count = 2 * N + 2
    if w.kind is WeightKind.MODEL:
        if digits is None:
            raise ValueError("the model weight has no exact moments")
        entries = model_modified_moments(w.d0, count, digits + 10)
        mv = MomentVector(tuple(entries), MomentKind.LEGENDRE_MODIFIED, w)
    else:
        mv = MomentVector.legendre(w, count)
    return recurrence_chebyshev(mv, N, digits, **kwargs)


def _sturm_count(a, b2, x) -> int:
    """Number of eigenvalues of the Jacobi matrix below ``x``."""
    count = 0
    q = a[0] - x
    tiny = gmpy2.mpfr(2) ** (-4 * gmpy2.get_context().precision)
    for i in range(len(a)):
        if i:
            q = (a[i] - x) - b2[i - 1] / q
        if q == 0:
            q = -tiny
        if q < 0:
            count += 1
    return count


@dataclass(frozen=True)
class GaussRule:
    nodes: tuple
    weights: tuple


def gauss_rule(table: RecurrenceTable, M: int, digits: int | None = None,
               mass=None) -> GaussRule:
    """M-point Gauss rule from the Jacobi matrix by Sturm-sequence bisection.

    ``mass`` is the total mass of the weight; it defaults to the exact zeroth
    moment when one exists.
    """
    if M < 1 or M > table.N + 1:
        raise ValueError(f"table supports at most {table.N + 1} nodes")
    digits = digits or table.digits or 64
    if mass is None:
        mass = _to_mpf_digits(power_moment(table.weight, 0), digits)
    ctx = gmpy2.context(precision=bits_for_digits(digits))
    with ctx:
        a = [_gm(table.a[i]) for i in range(M)]
        b2 = [_gm(table.b2[i]) for i in range(M - 1)]
        bound = max(abs(a[i]) + (gmpy2.sqrt(b2[i - 1]) if i else 0)
                    + (gmpy2.sqrt(b2[i]) if i < M - 1 else 0) for i in range(M))
        tol = gmpy2.mpfr(2) ** (-(ctx.precision - 4))
        nodes = []
        for j in range(M):
            lo, hi = -bound, bound
            for _ in range(4 * ctx.precision):
                mid = (lo + hi) / 2
                if _sturm_count(a, b2, mid) > j:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= tol * max(1, abs(mid)):
                    break
            else:
                raise ArithmeticError("Sturm bisection did not converge")
            nodes.append((lo + hi) / 2)
        b = [gmpy2.sqrt(x) for x in b2]
        mass_g = _gm(mass)
        weights = []
        for x in nodes:
            p_prev, p = gmpy2.mpfr(0), gmpy2.mpfr(1)
            total = gmpy2.mpfr(1)
            for k in range(M - 1):
                p_next = ((x - a[k]) * p - (b[k - 1] * p_prev if k else 0)) / b[k]
                p_prev, p = p, p_next
                total += p * p
            weights.append(mass_g / total)
        return GaussRule(tuple(mpf_from_gmpy(x) for x in nodes),
                         tuple(mpf_from_gmpy(x) for x in weights))


def _gm(x):
    if isinstance(x, Fraction):
        return gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator))
    if isinstance(x, LogExtendedRational):
        return _lext_to_mpfr(x)
    return gmpy_from_mpf(x)


def _to_mpf_digits(x, digits):
    with mp.workdps(digits):
        return _to_mpf(x)


def gauss_roundtrip(table: RecurrenceTable, M: int, digits: int | None = None) -> mp.mpf:
    """Max error of the M-point Gauss rule on ``x^j``, ``0 <= j <= 2M-1``.

    Raises :class:`InvariantError` if any node falls outside (-1, 1).
    """
    digits = digits or table.digits or 64
    rule = gauss_rule(table, M, digits)
    with mp.workdps(digits):
        if any(not -1 < x < 1 for x in rule.nodes):
            raise InvariantError("Gauss node outside (-1, 1)")
        err = mp.mpf(0)
        powers = [mp.mpf(1)] * M
        for j in range(2 * M):
            quad = mp.fsum(w * p for w, p in zip(rule.weights, powers))
            err = max(err, abs(quad - _to_mpf(power_moment(table.weight, j))))
            powers = [p * x for p, x in zip(powers, rule.nodes)]
        return err


def _rat_str(x: Fraction) -> str:
    # gmpy2 is not bound by the int-to-str digit limit that huge exact tables hit
    return f"{gmpy2.mpz(x.numerator).digits()}/{gmpy2.mpz(x.denominator).digits()}"


def _fmt(x, digits: int | None) -> str:
    if isinstance(x, Fraction):
        return _rat_str(x)
    with mp.workdps(digits + 5):
        return mp.nstr(mp.mpf(x), digits, strip_zeros=False)


def _b_text(table: RecurrenceTable, n: int, digits: int) -> str:
    """``b_n`` from the printed ``b_n^2``, so a re-parsed table prints identically."""
    if table.exact:
        value = table.b(n, digits + 5)
    else:
        with mp.workdps(table.digits):
            b2 = mp.mpf(_fmt(table.b2[n], digits))
        with mp.workdps(digits + 5):
            value = mp.sqrt(b2)
    with mp.workdps(digits + 5):
        return mp.nstr(value, digits, strip_zeros=False)


def _report_digits(table: RecurrenceTable) -> int:
    if table.digits is None:
        return 40
    return max(table.digits - DEFAULT_GUARD_DIGITS, 1)


def table_metadata(table: RecurrenceTable) -> dict:
    return {"weight": table.weight.label, "engine": table.engine.value,
            "digits": "exact" if table.digits is None else table.digits}


def table_to_csv(table: RecurrenceTable, header: dict | None = None) -> str:
    """CSV with columns ``n, a_n, b_n, b_n^2`` and a leading JSON metadata comment."""
    meta = dict(header or {})
    meta.update(table_metadata(table))
    digits = _report_digits(table)
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "a_n", "b_n", "b_n^2"])
    for n in range(table.N + 1):
        if n < len(table.b2):
            row = [n, _fmt(table.a[n], digits), _b_text(table, n, digits),
                   _fmt(table.b2[n], digits)]
        else:
            row = [n, _fmt(table.a[n], digits), "", ""]
        writer.writerow(row)
    return buf.getvalue()


def _parse_scalar(text: str, exact: bool):
    if exact:
        q = gmpy2.mpq(text.strip())
        return Fraction(int(q.numerator), int(q.denominator))
    return mp.mpf(text)


def table_from_csv(text: str) -> RecurrenceTable:
    """Inverse of :func:`table_to_csv`; the ``b_n`` column is rederived from ``b_n^2``."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError("missing metadata header")
    meta = json.loads(lines[0][2:])
    exact = meta["digits"] == "exact"
    digits = None if exact else int(meta["digits"])
    rows = list(csv.reader(lines[1:]))
    if rows[0] != ["n", "a_n", "b_n", "b_n^2"]:
        raise ValueError("unexpected CSV columns")
    a, b2 = [], []
    with mp.workdps(digits or 15):
        for row in rows[1:]:
            a.append(_parse_scalar(row[1], exact))
            if row[3]:
                b2.append(_parse_scalar(row[3], exact))
    return RecurrenceTable(a, b2, parse_weight(meta["weight"]), Engine(meta["engine"]), digits)


def table_to_json(table: RecurrenceTable, header: dict | None = None) -> str:
    digits = _report_digits(table)
    rows = []
    for n in range(table.N + 1):
        row = {"n": n, "a_n": _fmt(table.a[n], digits)}
        if n < len(table.b2):
            row["b_n^2"] = _fmt(table.b2[n], digits)
            row["b_n"] = _b_text(table, n, digits)
        rows.append(row)
    meta = dict(header or {})
    meta.update(table_metadata(table))
    return json.dumps({"metadata": meta, "rows": rows}, indent=2, sort_keys=True) + "\n"
