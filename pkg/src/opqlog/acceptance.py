"""End-to-end acceptance checks, shared by the ``report`` command and the test suite.

Each check returns a :class:`CheckResult` carrying the measured quantities
next to the threshold they were compared against.
"""
from __future__ import annotations

import functools
import os
import random
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp

from . import rh
from .asymptotics import Target, difference_report, extract_constant, linear_fit
from .recurrence import (chebyshev_table, gauss_rule, gauss_roundtrip, recurrence_exact)
from .szego import (ContourSpec, SzegoEvaluator, compute_d0, plus_one_ratio, shift_difference,
                    d0_contour, f2w_hat, phi_boundary, shift_envelope, szego_Fhat)
from .weights import Side, WeightSpec, weight_eval

LOG_A_EXACT = (Fraction(1, 2), Fraction(1, 14), Fraction(263, 9058), Fraction(1995511, 126347454),
            Fraction(436364251361, 43886567673522))
LOG_B2_EXACT = (Fraction(7, 36), Fraction(2588, 11025), Fraction(71180289, 293026300),
             Fraction(1329399823424, 5405644687527),
             Fraction(39672481023099631594375, 160381475127054568640484))

ASYMPT_N = 5000
ASYMPT_DIGITS = 136
PARAMETRIX_DIGITS = 40


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={v}" for k, v in self.measured.items())
        return f"[{status}] criterion {self.number}: {self.title} ({parts})"


def _fmt(x, n=4) -> str:
    return mp.nstr(x, n)


def _timed(fn):
    @functools.wraps(fn)
    def run(*args, **kwargs) -> CheckResult:
        start = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - start
        return res
    return run


@functools.lru_cache(maxsize=None)
def d0_value(digits: int = 80) -> mp.mpf:
    return compute_d0(digits).value


@functools.lru_cache(maxsize=None)
def log_table(N: int = ASYMPT_N, digits: int = ASYMPT_DIGITS):
    return chebyshev_table(WeightSpec.log(), N, digits)


@functools.lru_cache(maxsize=None)
def model_table(N: int = ASYMPT_N, digits: int = ASYMPT_DIGITS):
    with mp.workdps(digits + 10):
        d0 = d0_value(digits + 10)
    return chebyshev_table(WeightSpec.model(d0), N, digits)


@_timed
def check_exact_log_coefficients() -> CheckResult:
    from .cli import main
    from .recurrence import table_from_csv
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "t1.csv")
        start = time.perf_counter()
        code = main(["recur", "--weight", "log", "--exact", "--n", "4", "--output", path])
        elapsed = time.perf_counter() - start
        with open(path) as fh:
            table = table_from_csv(fh.read())
    hits = sum(x == y for x, y in zip(table.a, LOG_A_EXACT)) + sum(
        x == y for x, y in zip(table.b2, LOG_B2_EXACT))
    ok = code == 0 and hits == 10 and len(table.a) == 5 and elapsed < 5
    return CheckResult(1, "exact log coefficients", ok, {"matching": f"{hits}/10",
                                                    "runtime_s": f"{elapsed:.2f}"})


@_timed
def check_engine_equivalence(N: int = 12) -> CheckResult:
    mismatches = []
    for w in (WeightSpec.log(), WeightSpec.legendre()):
        cheb = chebyshev_table(w, N, None)
        gram = recurrence_exact(w, N)
        if tuple(cheb.a) != tuple(gram.a) or tuple(cheb.b2) != tuple(gram.b2):
            mismatches.append(w.label)
    return CheckResult(2, "engine equivalence", not mismatches,
                       {"N": N, "mismatches": mismatches or "none"})


@_timed
def check_gauss_roundtrip(n: int = 40, digits: int = 128) -> CheckResult:
    table = chebyshev_table(WeightSpec.log(), n, None)
    err = gauss_roundtrip(table, n, digits)
    rule = gauss_rule(table, n, digits)
    inside = all(-1 < x < 1 for x in rule.nodes)
    ok = err <= mp.mpf(10) ** -100 and inside
    return CheckResult(3, "Gauss round-trip", ok, {"max_error": _fmt(err), "nodes_inside": inside})


@_timed
def check_log_squared_constants() -> CheckResult:
    table = log_table()
    with mp.workdps(ASYMPT_DIGITS):
        fa = extract_constant(table, Target.A_LOG2)
        fb = extract_constant(table, Target.B_LOG2)
    ea, eb = fa.relative_error.value, fb.relative_error.value
    ok = ea <= mp.mpf("0.15") and eb <= mp.mpf("0.25")
    return CheckResult(4, "log-squared constants", ok, {
        "c_a": fa.fitted.to_string(6), "rel_a": _fmt(ea), "c_b": fb.fitted.to_string(6),
        "rel_b": _fmt(eb), "slope_a": fa.residual_decay_slope.to_string(4)})


@_timed
def check_model_expansion() -> CheckResult:
    table = model_table()
    with mp.workdps(ASYMPT_DIGITS):
        fit = extract_constant(table, Target.A_LEADING, (100, 2000))
    slope = fit.residual_decay_slope.value
    ok = abs(slope + 1) <= mp.mpf("0.2")
    return CheckResult(5, "model-weight expansion", ok, {"slope": _fmt(slope, 5),
                                                         "limit": fit.fitted.to_string(8)})


def interior_points(count: int = 20) -> list:
    return [mp.cos((j + mp.mpf(1) / 2) * mp.pi / count) for j in range(count)]


@_timed
def check_szego_identities(digits: int = 48, target: int = 40) -> CheckResult:
    ev = SzegoEvaluator(WeightSpec.log(), digits)
    worst_prod = worst_abs = worst_phi = mp.mpf(0)
    with mp.workdps(ev.work_dps):
        for x in interior_points():
            w = weight_eval(ev.weight, x).real
            fp = ev.boundary(x, Side.PLUS)
            fm = ev.boundary(x, Side.MINUS)
            worst_prod = max(worst_prod, abs(fp * fm - w) / w)
            worst_abs = max(worst_abs, abs(abs(fp) ** 2 - w) / w,
                            abs(abs(fm) ** 2 - w) / w)
            worst_phi = max(worst_phi, abs(phi_boundary(x, Side.PLUS)
                                           * phi_boundary(x, Side.MINUS) - 1))
        phi_tol = mp.mpf(10) ** (-(mp.mp.dps - 2))
    tol = mp.mpf(10) ** -target
    ok = worst_prod <= tol and worst_abs <= tol and worst_phi <= phi_tol
    return CheckResult(6, "Szego identities", ok, {"F+F- - w": _fmt(worst_prod),
                                                   "|F|^2 - w": _fmt(worst_abs),
                                                   "phi+phi- - 1": _fmt(worst_phi)})


@_timed
def check_d0(digits: int = 64) -> CheckResult:
    first = d0_contour(ContourSpec(mp.mpf("0.5"), 60, 4), digits)
    second = d0_contour(ContourSpec(mp.mpf("0.3"), 80, 3), digits)
    with mp.workdps(digits):
        shape_gap = abs(first - second)
        d0 = first.real
    model = WeightSpec.model(d0)
    ev = SzegoEvaluator(model, 55)
    rng = random.Random(20240917)
    worst = mp.mpf(0)
    with mp.workdps(ev.work_dps):
        for _ in range(20):
            sign = rng.choice((-1, 1))
            z = mp.mpc(mp.mpf(rng.uniform(-2, 2)), sign * mp.mpf(rng.uniform(0.05, 1.5)))
            ref = szego_Fhat(z, d0)
            worst = max(worst, abs(ev.F(z) - ref) / abs(ref))
    ok = shape_gap <= mp.mpf(10) ** -50 and worst <= mp.mpf(10) ** -45
    return CheckResult(7, "d0 consistency", ok, {"contour_gap": _fmt(shape_gap),
                                                 "Fhat_vs_quadrature": _fmt(worst)})


@_timed
def check_local_slopes(digits: int = 40) -> CheckResult:
    ev = SzegoEvaluator(WeightSpec.log(), digits)
    d0 = d0_value()
    slopes = []
    with mp.workdps(ev.work_dps):
        ts = [mp.mpf(10) ** (-2 - mp.mpf(k) / 2) for k in range(9)]
        for theta in (mp.mpf(2) / 3, mp.mpf(1) / 2, mp.mpf(-5) / 6):
            zs = [-1 + t * mp.expjpi(theta) for t in ts]
            ds = [abs(ev.f2w(z) - f2w_hat(z, d0)) for z in zs]
            slopes.append(linear_fit([mp.log(t) for t in ts], [mp.log(d) for d in ds])[1])
        worst_ratio = mp.mpf(0)
        ratio_ok = True
        for e in range(4, 13):
            r = mp.mpf(10) ** -e
            q = plus_one_ratio(ev, r)
            worst_ratio = max(worst_ratio, abs(q - 1) * abs(mp.log(r)))
            ratio_ok &= abs(q - 1) <= 2 / abs(mp.log(r))
    slope_ok = all(abs(s - mp.mpf("1.5")) <= mp.mpf("0.1") for s in slopes)
    return CheckResult(8, "local-behaviour slopes", slope_ok and ratio_ok, {
        "slopes": [_fmt(s, 5) for s in slopes], "max |q-1| |log r|": _fmt(worst_ratio)})


def parametrix_suite(digits: int = PARAMETRIX_DIGITS, n_list=(16, 32, 64, 128),
                     growth_n=(20, 40, 80, 160)) -> dict:
    """All numbers behind the parametrix criterion, per kind."""
    contour = rh.LensContour()
    out = {"psi": {}, "kinds": {}}
    with mp.workdps(digits):
        rng = random.Random(5)
        det_psi = mp.mpf(0)
        ray_res = mp.mpf(0)
        for nu in (0, 1):
            for _ in range(6):
                zeta = mp.mpf(rng.uniform(0.1, 60)) * mp.expj(mp.mpf(rng.uniform(-3.1, 3.1)))
                try:
                    point = rh.BesselPoint.at(zeta, digits)
                except rh.RayProximityError:
                    continue
                det_psi = max(det_psi, abs(rh.psi_matrix(nu, point, digits).det() - 1))
            for ray in ("gamma1", "gamma2", "gamma3"):
                for radius in ("0.05", "0.7", "4", "25", "300"):
                    ray_res = max(ray_res, rh.psi_ray_residual(nu, ray, mp.mpf(radius), digits))
        out["psi"] = {"det_defect": det_psi, "ray_residual": ray_res}
        for kind in rh.Kind:
            problem = rh.LocalProblem(kind, digits)
            det_p = mp.mpf(0)
            for z in (mp.mpc(-1.1, 0.05), mp.mpc(-0.9, 0.1), mp.mpc(-1.05, -0.2)):
                for n in (16, 128):
                    det_p = max(det_p, abs(rh.local_parametrix(problem, z, n).det() - 1))
            jump = mp.mpf(0)
            for seg in (rh.Segment.SIGMA1, rh.Segment.SIGMA2, rh.Segment.INTERVAL):
                for pt in contour.inside_points(seg, 3):
                    for n in (16, 128):
                        jump = max(jump, rh.parametrix_jump_residual(problem, pt, n, digits))
            defects = [rh.matching_defect(problem, n, contour) for n in n_list]
            scans = [rh.parametrix_growth_scan(problem, n) for n in growth_n]
            maxima = [s.max_ratio for s in scans]
            out["kinds"][kind.value] = {
                "det_defect": det_p, "jump_residual": jump,
                "matching": list(zip(n_list, defects)),
                "growth": list(zip(growth_n, maxima)),
                "growth_constant": max(maxima),
                "growth_spread": max(maxima) / min(maxima),
            }
    return out


@_timed
def check_parametrix(digits: int = PARAMETRIX_DIGITS) -> CheckResult:
    data = parametrix_suite(digits)
    det_tol = mp.mpf(10) ** -(digits - 10)
    jump_tol = mp.mpf(10) ** -(digits - 12)
    ok = data["psi"]["det_defect"] <= det_tol and data["psi"]["ray_residual"] < jump_tol
    measured = {"psi_det": _fmt(data["psi"]["det_defect"]),
                "psi_jump": _fmt(data["psi"]["ray_residual"])}
    for name, kd in data["kinds"].items():
        scaled = [n * d for n, d in kd["matching"]]
        spread = max(scaled) / min(scaled)
        ok &= kd["det_defect"] <= det_tol and kd["jump_residual"] < jump_tol
        ok &= spread <= mp.mpf("1.5") and kd["growth_spread"] <= 2
        measured[name] = (f"det {_fmt(kd['det_defect'], 2)}, jump {_fmt(kd['jump_residual'], 2)}, "
                          f"n*defect spread {_fmt(spread, 3)}, growth C {_fmt(kd['growth_constant'], 3)}"
                          f" spread {_fmt(kd['growth_spread'], 3)}")
    return CheckResult(9, "parametrix suite", ok, measured)


def shift_ratios(digits: int = 40, ns=(100, 1000, 10000)) -> list:
    ev = SzegoEvaluator(WeightSpec.log(), digits)
    out = []
    with mp.workdps(ev.work_dps):
        for n in ns:
            r, rt = mp.mpf(1) / n ** 2, mp.mpf(1) / (n + 1) ** 2
            S = shift_difference(n, r, rt, ev)
            out.append((n, S, abs(S) / shift_envelope(n, r)))
    return out


@_timed
def check_shift_envelope() -> CheckResult:
    rows = shift_ratios()
    logs = [mp.log(q) for _, _, q in rows]
    K = mp.exp(mp.fsum(logs) / len(logs))
    spread = max(abs(x - mp.log(K)) for x in logs) / mp.log(10)
    ok = spread <= 1
    return CheckResult(10, "shift-difference envelope", ok, {
        "K": _fmt(K), "ratios": [_fmt(q, 3) for _, _, q in rows], "max_decades_from_K": _fmt(spread, 3)})


DETERMINISM_COMMANDS = (
    ["recur", "--weight", "log", "--exact", "--n", "6"],
    ["recur", "--weight", "legendre", "--n", "40", "--digits", "40", "--format", "json"],
    ["moments", "--weight", "logk:3", "--count", "8", "--kind", "legendre", "--format", "json"],
    ["szego-eval", "--weight", "log", "--digits", "34", "--z", "0.3,0.2", "--z", "1.5"],
    ["d0", "--digits", "34"],
)


@_timed
def check_determinism() -> CheckResult:
    diffs = []
    with tempfile.TemporaryDirectory() as tmp:
        for idx, cmd in enumerate(DETERMINISM_COMMANDS):
            blobs = []
            for rep in range(2):
                path = os.path.join(tmp, f"out{idx}_{rep}")
                subprocess.run([sys.executable, "-m", "opqlog", *cmd, "--output", path],
                               check=True, capture_output=True)
                with open(path, "rb") as fh:
                    blobs.append(fh.read())
            if blobs[0] != blobs[1] or not blobs[0]:
                diffs.append(cmd[0])
    return CheckResult(11, "determinism", not diffs, {"commands": len(DETERMINISM_COMMANDS),
                                                      "differing": diffs or "none"})


CHECKS = {
    1: check_exact_log_coefficients, 2: check_engine_equivalence, 3: check_gauss_roundtrip,
    4: check_log_squared_constants, 5: check_model_expansion, 6: check_szego_identities,
    7: check_d0, 8: check_local_slopes, 9: check_parametrix, 10: check_shift_envelope,
    11: check_determinism,
}


def run_all(selected=None) -> list:
    return [CHECKS[k]() for k in sorted(selected or CHECKS)]


def difference_check(n_range=None) -> dict:
    """Log-squared constants from the log-minus-model differences."""
    with mp.workdps(ASYMPT_DIGITS):
        rep = difference_report(log_table(), model_table(), n_range)
    return {"a": rep.a_fit, "b": rep.b_fit, "rows": rep.rows}
