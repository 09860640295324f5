"""Command-line interface.

Exit codes: 0 success, 1 precision exhausted, 2 invalid configuration,
3 internal invariant violated, 4 at least one ``report`` check failed.
"""
from __future__ import annotations

import argparse
import enum
import json
import os
import sys
from dataclasses import dataclass

import mpmath as mp

from . import __version__
from .numerics import InvariantError, PrecisionConfig, PrecisionExhaustedError, digits_for_recurrence

EXIT_PRECISION = 1
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_REPORT_FAILED = 4


class Command(enum.Enum):
    MOMENTS = "moments"
    RECUR = "recur"
    SZEGO_EVAL = "szego-eval"
    D0 = "d0"
    PARAMETRIX_CHECK = "parametrix-check"
    ASYMPT = "asympt"
    REPORT = "report"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: Command
    weight: str | None
    digits: int
    output: str | None
    fmt: str
    args: argparse.Namespace

    def __post_init__(self):
        if self.digits < 32:
            raise ConfigError("digits must be >= 32")
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.fmt!r}")

    def metadata(self, **extra) -> dict:
        meta = {"command": self.command.value, "weight": self.weight, "digits": self.digits,
                "tool-version": __version__}
        meta.update(extra)
        return meta


def _n_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("expected LO:HI")
    lo, hi = int(lo), int(hi)
    if not 2 <= lo < hi:
        raise argparse.ArgumentTypeError("need 2 <= LO < HI")
    return lo, hi


def _n_list(text: str) -> tuple:
    values = tuple(int(t) for t in text.split(",") if t.strip())
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("expected a comma-separated list of positive integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opqlog", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, weight=True, fmt="csv"):
        if weight:
            p.add_argument("--weight", default="log",
                           help="log, legendre, logk:<k> or model[:<d0>] (default: log)")
        p.add_argument("--digits", type=int, default=None,
                       help="base decimal digits (default: $OPQ_DIGITS or 40)")
        p.add_argument("--output", "-o", default=None, help="output file (default: stdout)")
        p.add_argument("--format", dest="fmt", choices=("csv", "json"), default=fmt)

    p = sub.add_parser("moments", help="power or Legendre-modified moments")
    common(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--kind", choices=("power", "legendre"), default="power")

    p = sub.add_parser("recur", help="recurrence coefficients a_n, b_n")
    common(p)
    p.add_argument("--n", type=int, required=True, help="highest index of a_n")
    p.add_argument("--exact", action="store_true", help="exact rational arithmetic")
    p.add_argument("--engine", choices=("modified-chebyshev", "exact-gram"),
                   default="modified-chebyshev")
    p.add_argument("--checkpoint", default=None, help="checkpoint CSV, rewritten every 500 indices")
    p.add_argument("--resume", action="store_true", help="reuse the checkpoint if it suffices")

    p = sub.add_parser("szego-eval", help="Szego function, phi and F^2/w at points")
    common(p, fmt="json")
    p.add_argument("--z", action="append", required=True, metavar="RE[,IM]")
    p.add_argument("--side", choices=("+", "-"), default=None,
                   help="boundary side for points on the real axis")

    p = sub.add_parser("d0", help="the model-weight constant d0")
    common(p, weight=False, fmt="json")
    p.add_argument("--rho", default="0.5")
    p.add_argument("--levels", type=int, default=60)

    p = sub.add_parser("parametrix-check", help="local parametrix verification")
    common(p, weight=False, fmt="json")
    p.add_argument("--kind", choices=("P", "Phat", "Ptilde"), default="Ptilde")
    p.add_argument("--n-list", type=_n_list, default=(16, 32, 64, 128))

    p = sub.add_parser("asympt", help="asymptotic predictions and fitted constants")
    common(p)
    p.add_argument("--n-range", type=_n_range, required=True)
    p.add_argument("--table", default=None, help="recurrence CSV to use instead of computing one")

    p = sub.add_parser("report", help="run the acceptance checks")
    common(p, weight=False, fmt="json")
    p.add_argument("--only", type=_n_list, default=None, help="criterion numbers to run")
    return parser


def _write(config: RunConfig, text: str) -> None:
    if config.output:
        with open(config.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _weight(config: RunConfig):
    from .weights import parse_weight
    text = config.weight
    if text.strip().lower() == "model":
        from .szego import compute_d0
        return parse_weight(text, compute_d0(max(config.digits + 10, 64)).value)
    return parse_weight(text)


def _cmd_moments(config: RunConfig) -> int:
    from .weights import MomentVector, moments_to_csv, moments_to_json
    a = config.args
    if a.count < 1:
        raise ConfigError("count must be positive")
    w = _weight(config)
    if a.kind == "power":
        mv = MomentVector.power(w, a.count)
    else:
        mv = MomentVector.legendre(w, a.count, config.digits + 10)
    meta = config.metadata(kind=a.kind)
    if config.fmt == "csv":
        _write(config, moments_to_csv(mv, config.digits, meta))
    else:
        _write(config, moments_to_json(mv, config.digits, meta))
    return 0


def _load_checkpoint(path: str, weight_label: str, digits, N: int):
    from .recurrence import table_from_csv
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        table = table_from_csv(fh.read())
    if table.weight.label != weight_label or table.digits != digits or len(table.b2) <= N:
        return None
    return table.truncated(N, closed=True)


def _cmd_recur(config: RunConfig) -> int:
    from .recurrence import (EXACT_MAX_N, Engine, RecurrenceTable, chebyshev_table,
                             recurrence_exact, table_to_csv, table_to_json)
    a = config.args
    if a.n < 0:
        raise ConfigError("n must be non-negative")
    w = _weight(config)
    if a.exact:
        if not w.has_exact_moments:
            raise ConfigError(f"{w.label} has no rational moments; drop --exact")
        digits = None
    else:
        digits = digits_for_recurrence(a.n, "chebyshev", PrecisionConfig(config.digits))
    meta = config.metadata()

    # one extra step so that b_N^2 is reported alongside a_N
    closed = a.engine != "exact-gram" or a.n < EXACT_MAX_N
    reach = a.n + 1 if closed else a.n
    table = None
    if a.checkpoint and a.resume:
        table = _load_checkpoint(a.checkpoint, w.label, digits, a.n)
    if table is None:
        if a.engine == "exact-gram":
            table = recurrence_exact(w, reach, digits)
        else:
            kwargs = {}
            if a.checkpoint:
                def save(k, a_pref, b2_pref):
                    part = RecurrenceTable(a_pref, b2_pref, w, Engine.MODIFIED_CHEBYSHEV, digits)
                    tmp = a.checkpoint + ".tmp"
                    with open(tmp, "w", newline="") as fh:
                        fh.write(table_to_csv(part, meta))
                    os.replace(tmp, a.checkpoint)
                kwargs["on_progress"] = save
            table = chebyshev_table(w, reach, digits, **kwargs)
        table = table.truncated(a.n, closed=closed)
    table.check_invariants()
    writer = table_to_csv if config.fmt == "csv" else table_to_json
    text = writer(table, meta)
    if a.checkpoint:
        with open(a.checkpoint, "w", newline="") as fh:
            fh.write(text)
    _write(config, text)
    return 0


def _parse_point(text: str):
    re_part, _, im_part = text.partition(",")
    return mp.mpc(mp.mpf(re_part.strip()), mp.mpf(im_part.strip() or 0))


def _cmd_szego(config: RunConfig) -> int:
    from .szego import SzegoEvaluator, compute_d0, phi, phi_boundary, szego_Fhat
    from .weights import Side, weight_eval
    a = config.args
    if config.fmt != "json":
        raise ConfigError("szego-eval writes JSON only")
    w = _weight(config)
    digits = config.digits
    ev = SzegoEvaluator(w, digits)
    d0 = compute_d0(max(digits + 10, 64)).value
    side = {None: None, "+": Side.PLUS, "-": Side.MINUS}[a.side]
    cut_right = w.kind.value in ("log", "logk")
    rows = []
    with mp.workdps(ev.work_dps):
        for text in a.z:
            z = _parse_point(text)
            x = z.real
            if z.imag == 0 and abs(x) == 1:
                raise ConfigError(f"point {text} is an endpoint")
            if z.imag == 0 and abs(x) < 1:
                if side is None:
                    raise ConfigError(f"point {text} lies on [-1, 1]; pass --side")
                F = ev.boundary(x, side)
                row = {"F": F, "phi": phi_boundary(x, side), "Fhat": None,
                       "f2w": F ** 2 / weight_eval(w, x, side)}
            else:
                row = {"F": ev.F(z), "phi": phi(z), "Fhat": szego_Fhat(z, d0)}
                if z.imag == 0 and x > 1 and cut_right:
                    row["f2w"] = ev.f2w(z, side) if side is not None else None
                else:
                    row["f2w"] = ev.f2w(z)
            row["z"] = z
            rows.append({k: _cstr(v, digits) for k, v in row.items()})
    doc = {"metadata": config.metadata(side=a.side), "points": rows}
    _write(config, _json(doc))
    return 0


def _cstr(v, digits: int):
    if v is None:
        return None
    v = mp.mpc(v)
    return {"re": mp.nstr(v.real, digits, strip_zeros=False),
            "im": mp.nstr(v.imag, digits, strip_zeros=False)}


def _cmd_d0(config: RunConfig) -> int:
    from .szego import compute_d0
    a = config.args
    if config.fmt != "json":
        raise ConfigError("d0 writes JSON only")
    res = compute_d0(config.digits, mp.mpf(a.rho), a.levels)
    doc = {
        "metadata": config.metadata(),
        "d0": mp.nstr(res.value, config.digits, strip_zeros=False),
        "residual": mp.nstr(res.residual, 5),
        "imag_part": mp.nstr(res.imag_part, 5),
        "contour": {"rho": mp.nstr(res.contour.rho, 10), "levels": res.contour.levels,
                    "ratio": res.contour.ratio},
    }
    _write(config, _json(doc))
    return 0


def _cmd_parametrix(config: RunConfig) -> int:
    from . import rh
    a = config.args
    if config.fmt != "json":
        raise ConfigError("parametrix-check writes JSON only")
    digits = config.digits
    kind = rh.Kind(a.kind)
    contour = rh.LensContour()
    with mp.workdps(digits):
        problem = rh.LocalProblem(kind, digits)
        jumps = {}
        for seg in (rh.Segment.SIGMA1, rh.Segment.SIGMA2, rh.Segment.INTERVAL):
            jumps[seg.value] = max(rh.parametrix_jump_residual(problem, pt, n, digits)
                                   for pt in contour.inside_points(seg, 3) for n in a.n_list)
        defects = [(n, rh.matching_defect(problem, n, contour)) for n in a.n_list]
        scans = [rh.parametrix_growth_scan(problem, n) for n in a.n_list]
        det = max(abs(rh.local_parametrix(problem, z, n).det() - 1)
                  for z in (mp.mpc(-1.1, 0.05), mp.mpc(-0.9, 0.1)) for n in a.n_list)
        maxima = [s.max_ratio for s in scans]
        doc = {
            "metadata": config.metadata(kind=kind.value, n_list=list(a.n_list)),
            "det_defect": mp.nstr(det, 5),
            "max_jump_residual": {k: mp.nstr(v, 5) for k, v in jumps.items()},
            "matching_defect": [{"n": n, "defect": mp.nstr(d, 10), "n_times_defect": mp.nstr(n * d, 10)}
                                for n, d in defects],
            "growth": [{"n": s.n, "max_ratio": mp.nstr(s.max_ratio, 10)} for s in scans],
            "growth_constant": mp.nstr(max(maxima), 10),
            "growth_spread": mp.nstr(max(maxima) / min(maxima), 10),
        }
    _write(config, _json(doc))
    return 0


def _cmd_asympt(config: RunConfig) -> int:
    from .asymptotics import (AsymptoticModel, Target, asympt_rows, extract_constant)
    from .recurrence import chebyshev_table, table_from_csv
    a = config.args
    lo, hi = a.n_range
    if a.table:
        with open(a.table) as fh:
            table = table_from_csv(fh.read())
    else:
        w = _weight(config)
        digits = digits_for_recurrence(hi + 1, "chebyshev", PrecisionConfig(config.digits))
        table = chebyshev_table(w, hi + 1, digits)
    model = AsymptoticModel.for_weight(table.weight.kind)
    with mp.workdps(max(config.digits, table.digits or 40)):
        targets = ((Target.A_LEADING, Target.B_LEADING) if model.C == 0
                   else (Target.A_LOG2, Target.B_LOG2))
        fits = [extract_constant(table, t, (lo, hi)) for t in targets]
        meta = config.metadata(weight=table.weight.label, model=model.kind.value, n_range=[lo, hi])
        if config.fmt == "json":
            doc = {"metadata": meta, "fits": [f.as_dict() for f in fits]}
            _write(config, _json(doc))
            return 0
        import csv
        import io
        buf = io.StringIO()
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "a_n", "a_pred", "scaled_residual"])
        writer.writerows(asympt_rows(table, model, (lo, hi), config.digits))
        for f in fits:
            buf.write("# fit " + json.dumps(f.as_dict(), sort_keys=True) + "\n")
        _write(config, buf.getvalue())
    return 0


def _cmd_report(config: RunConfig) -> int:
    from .acceptance import run_all
    results = run_all(config.args.only)
    for res in results:
        print(res.line(), file=sys.stderr if config.output is None else sys.stdout)
    doc = {"metadata": config.metadata(),
           "criteria": [{"number": r.number, "title": r.title, "passed": r.passed,
                         "measured": {k: str(v) for k, v in r.measured.items()}} for r in results]}
    _write(config, _json(doc))
    return 0 if all(r.passed for r in results) else EXIT_REPORT_FAILED


HANDLERS = {
    Command.MOMENTS: _cmd_moments, Command.RECUR: _cmd_recur, Command.SZEGO_EVAL: _cmd_szego,
    Command.D0: _cmd_d0, Command.PARAMETRIX_CHECK: _cmd_parametrix, Command.ASYMPT: _cmd_asympt,
    Command.REPORT: _cmd_report,
}


def run(config: RunConfig) -> int:
    with mp.workdps(config.digits):
        return HANDLERS[config.command](config)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        digits = args.digits if args.digits is not None else PrecisionConfig().base_digits
        config = RunConfig(Command(args.command), getattr(args, "weight", None), digits,
                           args.output, args.fmt, args)
        return run(config)
    except PrecisionExhaustedError as exc:
        print(f"opqlog: precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except InvariantError as exc:
        print(f"opqlog: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigError, ValueError) as exc:
        print(f"opqlog: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"opqlog: precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION


if __name__ == "__main__":
    sys.exit(main())
