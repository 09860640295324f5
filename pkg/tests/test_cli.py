import json

import mpmath as mp
import pytest

from opqlog import acceptance, cli
from opqlog.acceptance import LOG_A_EXACT, LOG_B2_EXACT, CheckResult
from opqlog.numerics import InvariantError, PrecisionExhaustedError
from opqlog.recurrence import recurrence_exact, table_from_csv
from opqlog.weights import WeightSpec


def run(tmp_path, *args, name="out"):
    path = tmp_path / name
    code = cli.main([*args, "--output", str(path)])
    return code, path.read_text() if path.exists() else None


def header(text):
    assert text.startswith("# ")
    return json.loads(text.splitlines()[0][2:])


def test_exact_log_row(tmp_path):
    code, text = run(tmp_path, "recur", "--weight", "log", "--exact", "--n", "4")
    assert code == 0
    last = text.splitlines()[-1].split(",")
    assert last[0] == "4" and last[1] == "436364251361/43886567673522"
    assert last[3] == "39672481023099631594375/160381475127054568640484"
    table = table_from_csv(text)
    assert table.closed
    assert tuple(table.a) == LOG_A_EXACT and tuple(table.b2) == LOG_B2_EXACT


def test_exact_csv_round_trip(tmp_path):
    code, text = run(tmp_path, "recur", "--weight", "legendre", "--exact", "--n", "30",
                     "--engine", "exact-gram")
    assert code == 0
    table = table_from_csv(text)
    ref = recurrence_exact(WeightSpec.legendre(), 31).truncated(30, closed=True)
    assert list(table.a) == list(ref.a) and list(table.b2) == list(ref.b2)


def test_metadata_headers(tmp_path):
    meta = header(run(tmp_path, "recur", "--weight", "log", "--n", "10")[1])
    assert {"command", "weight", "digits", "tool-version"} <= set(meta)
    assert meta["command"] == "recur" and meta["weight"] == "log"
    meta = header(run(tmp_path, "moments", "--weight", "logk:2", "--count", "5")[1])
    assert meta["command"] == "moments"
    doc = json.loads(run(tmp_path, "szego-eval", "--z", "0.3,0.2", "--z", "0.5", "--side", "+",
                         "--digits", "34")[1])
    assert doc["metadata"]["digits"] == 34 and len(doc["points"]) == 2
    assert doc["points"][1]["Fhat"] is None


def test_env_digits(tmp_path, monkeypatch):
    monkeypatch.setenv("OPQ_DIGITS", "50")
    doc = json.loads(run(tmp_path, "szego-eval", "--weight", "legendre", "--z", "2")[1])
    assert doc["metadata"]["digits"] == 50
    assert len(doc["points"][0]["phi"]["re"].lstrip("0.").replace(".", "")) >= 49


@pytest.mark.parametrize("args", [
    ["recur", "--n", "4", "--digits", "10"],
    ["recur", "--weight", "unknown", "--n", "4"],
    ["recur", "--weight", "logk:2", "--exact", "--n", "4"],
    ["szego-eval", "--z", "0.5"],
    ["szego-eval", "--z", "1"],
    ["asympt", "--n-range", "100:200", "--weight", "legendre"],
])
def test_invalid_configuration(tmp_path, args):
    assert cli.main([*args, "--output", str(tmp_path / "x")]) == cli.EXIT_CONFIG


def test_env_digits_too_low(monkeypatch):
    monkeypatch.setenv("OPQ_DIGITS", "20")
    assert cli.main(["recur", "--n", "2"]) == cli.EXIT_CONFIG


@pytest.mark.parametrize("exc,code", [(PrecisionExhaustedError("lost"), cli.EXIT_PRECISION),
                                      (InvariantError("b < 0"), cli.EXIT_INVARIANT)])
def test_failure_exit_codes(monkeypatch, exc, code):
    def boom(config):
        raise exc
    monkeypatch.setitem(cli.HANDLERS, cli.Command.RECUR, boom)
    assert cli.main(["recur", "--n", "2"]) == code


def test_invariant_violation_from_table(monkeypatch, tmp_path):
    from opqlog import recurrence

    def broken(*args, **kwargs):
        t = recurrence.recurrence_exact(WeightSpec.log(), 4)
        return recurrence.RecurrenceTable(list(t.a), [-x for x in t.b2], t.weight, t.engine, None)
    monkeypatch.setattr(recurrence, "chebyshev_table", broken)
    assert cli.main(["recur", "--n", "3", "--exact", "--output", str(tmp_path / "x")]) == cli.EXIT_INVARIANT


def test_checkpoint_and_resume(tmp_path, monkeypatch):
    ckpt = tmp_path / "ckpt.csv"
    code, first = run(tmp_path, "recur", "--n", "1100", "--checkpoint", str(ckpt), name="a")
    assert code == 0 and ckpt.read_text() == first
    from opqlog import recurrence

    def refuse(*args, **kwargs):
        raise AssertionError("resume should not recompute")
    monkeypatch.setattr(recurrence, "chebyshev_table", refuse)
    code, second = run(tmp_path, "recur", "--n", "1000", "--checkpoint", str(ckpt), "--resume", name="b")
    assert code == 0
    assert second.splitlines()[1:1002] == first.splitlines()[1:1002]
    assert table_from_csv(second).N == 1000


def test_progress_checkpoint_is_valid_table(tmp_path, monkeypatch):
    ckpt = tmp_path / "ckpt.csv"
    seen = []
    real_replace = cli.os.replace

    def spy(src, dst):
        real_replace(src, dst)
        seen.append(table_from_csv(open(dst).read()).N)
    monkeypatch.setattr(cli.os, "replace", spy)
    assert run(tmp_path, "recur", "--n", "1100", "--checkpoint", str(ckpt))[0] == 0
    assert seen == [500, 1000]


def test_d0_command(tmp_path):
    code, text = run(tmp_path, "d0", "--digits", "64")
    doc = json.loads(text)
    assert code == 0
    assert mp.mpf(doc["residual"]) < mp.mpf(10) ** -40
    assert doc["d0"].startswith("0.404773997435614552")
    assert doc["metadata"]["weight"] is None


def test_parametrix_check_command(tmp_path):
    code, text = run(tmp_path, "parametrix-check", "--kind", "Ptilde", "--n-list", "16,32",
                     "--digits", "32")
    doc = json.loads(text)
    assert code == 0
    assert all(mp.mpf(v) < mp.mpf(10) ** -20 for v in doc["max_jump_residual"].values())
    scaled = [mp.mpf(r["n_times_defect"]) for r in doc["matching_defect"]]
    assert max(scaled) / min(scaled) < mp.mpf("1.5")


def test_asympt_with_table(tmp_path):
    table_path = tmp_path / "log.csv"
    assert cli.main(["recur", "--n", "1100", "--output", str(table_path)]) == 0
    code, text = run(tmp_path, "asympt", "--n-range", "100:1000", "--table", str(table_path))
    assert code == 0
    lines = text.splitlines()
    assert header(text)["n_range"] == [100, 1000]
    assert lines[1] == "n,a_n,a_pred,scaled_residual"
    fits = [json.loads(l[len("# fit "):]) for l in lines if l.startswith("# fit ")]
    assert [f["target"] for f in fits] == ["a_log2_coeff", "b_log2_coeff"]
    assert float(fits[0]["fitted"]) < 0
    code, text = run(tmp_path, "asympt", "--n-range", "100:1000", "--table", str(table_path),
                     "--format", "json", name="j")
    assert len(json.loads(text)["fits"]) == 2


def test_report_exit_codes(tmp_path, monkeypatch):
    code, text = run(tmp_path, "report", "--only", "1,2")
    assert code == 0
    assert [c["passed"] for c in json.loads(text)["criteria"]] == [True, True]
    monkeypatch.setitem(acceptance.CHECKS, 2, lambda: CheckResult(2, "forced", False))
    assert run(tmp_path, "report", "--only", "1,2", name="r2")[0] == cli.EXIT_REPORT_FAILED


def test_deterministic_output(tmp_path):
    args = ["recur", "--weight", "log", "--n", "50"]
    assert run(tmp_path, *args, name="a")[1] == run(tmp_path, *args, name="b")[1]
