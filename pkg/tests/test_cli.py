import json
import time

import pytest

from ellhyp.cli import main, suite_rows


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gamma(capsys):
    code, out, _ = run(capsys, "gamma", "--x", "0.3+0.1j", "--p", "0.2", "--q", "0.3")
    doc = json.loads(out)
    assert code == 0
    assert complex(*doc["value"]) == pytest.approx(complex(1.2062517523508826, 0.43617004449778595), rel=1e-14)
    assert doc["truncation"]["reflection_residual"] < 1e-14


def test_gamma_pole_is_usage_error(capsys):
    code, _, err = run(capsys, "gamma", "--x", "1", "--p", "0.2", "--q", "0.3")
    assert code == 1 and "pole" in err


def test_verify_pass(capsys):
    code, out, _ = run(capsys, "verify", "--identity", "elliptic_beta", "--p", "0.2", "--q", "0.2", "--seed", "1")
    assert code == 0
    assert json.loads(out)["verdict"] == "pass"


def test_verify_unknown_identity(capsys):
    code, _, err = run(capsys, "verify", "--identity", "nope")
    assert code == 1 and "unknown identity" in err


def test_verify_bad_flags(capsys):
    assert run(capsys, "verify", "--identity", "elliptic_beta", "--n", "2")[0] == 1
    assert run(capsys, "verify")[0] == 1
    assert run(capsys, "verify", "--identity", "elliptic_beta", "--grid", "12")[0] == 1


def test_verify_vanishing(capsys):
    code, out, _ = run(capsys, "verify", "--identity", "vanishing_4param", "--seed", "0")
    doc = json.loads(out)
    assert code == 0
    assert abs(complex(*doc["lhs"])) <= 1e-8 * doc["extra"]["scale"]


def test_no_converge_exit_code(capsys, tmp_path):
    # an 8-point grid cannot be refined, so convergence is never reached
    pf = tmp_path / "p.json"
    pf.write_text(json.dumps({f"t{r}": 0.55 for r in range(1, 6)}))
    code, out, _ = run(capsys, "verify", "--identity", "elliptic_beta", "--params", str(pf), "--grid", "8,8")
    assert code == 3
    assert json.loads(out)["verdict"] == "no-converge"


def test_fail_exit_code(capsys, monkeypatch):
    from ellhyp.catalog import CatalogEntry

    monkeypatch.setattr(CatalogEntry, "tolerance", lambda self, n, m=None: 1e-20)
    code, out, _ = run(capsys, "verify", "--identity", "elliptic_beta", "--seed", "1")
    assert code == 2 and json.loads(out)["verdict"] == "fail"


def test_byte_stable_reports(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "verify", "--identity", "selberg_e7", "--seed", "4", "--sign", "s=-1", "--no-timing", "--json", str(a))
    run(capsys, "verify", "--identity", "selberg_e7", "--seed", "4", "--sign", "s=-1", "--no-timing",
        "--workers", "3", "--json", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_params_file_and_config(capsys, tmp_path):
    pf = tmp_path / "p.json"
    pf.write_text(json.dumps({f"t{r}": [0.55, 0.0] for r in range(1, 6)}))
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"identity": "elliptic_beta", "params": str(pf), "no_timing": True}))
    code, out, _ = run(capsys, "--config", str(cfg), "verify")
    doc = json.loads(out)
    assert code == 0 and doc["seed"] is None and doc["seconds"] is None
    assert doc["params"]["t6"]["value"][0] == pytest.approx(0.04 / 0.55 ** 5)


def test_cache_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("ELLHYP_CACHE_DIR", str(tmp_path / "cache"))
    args = ("verify", "--identity", "dixon_eval", "--seed", "2", "--no-timing")
    _, first, _ = run(capsys, *args)
    assert len(list((tmp_path / "cache").iterdir())) == 1
    _, second, _ = run(capsys, *args)
    assert first == second


def test_suite_rows():
    smoke = suite_rows("smoke", 1)
    full = suite_rows("full", 2)
    assert all(n == 1 for _, n, _, _, _ in smoke)
    assert any(n == 2 for _, n, _, _, _ in full)
    assert len({(r[0], r[1], r[2], tuple(r[3].items()), r[4]) for r in full}) == len(full)
    assert not any(r[0] == "as_extended" for r in full)
    assert any(r[0] == "as_extended" for r in suite_rows("full", 1, include_slow=True))


def test_smoke_suite(capsys, tmp_path):
    out = tmp_path / "s.json"
    t0 = time.perf_counter()
    code = main(["suite", "--suite", "smoke", "--seeds", "1", "--no-timing", "--json", str(out)])
    assert time.perf_counter() - t0 < 60
    assert code == 0
    doc = json.loads(out.read_text())
    keys = [(r["identity"], r["n"], r["m"] or 0, sorted(r["signs"].items()), r["seed"]) for r in doc["rows"]]
    assert keys == sorted(keys)
    assert doc["counts"] == {"pass": len(keys)}


def test_fubini_cli(capsys):
    code, out, _ = run(capsys, "fubini", "--case", "counterexample")
    doc = json.loads(out)
    assert code == 2 and not doc["admissible"]
    assert doc["offending"][0]["product"] == "1"
    assert doc["prefactor_arguments"]["open"]["total"] > 0
    code, out, _ = run(capsys, "fubini", "--case", "elliptic_beta")
    assert code == 0 and json.loads(out)["prefactor_arguments"]["open"]["total"] == 36
    assert run(capsys, "fubini", "--case", "missing_case")[0] == 1
    assert run(capsys, "fubini", "--identity", "selberg_e7", "--n", "2")[0] == 0


def test_list(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0 and len(json.loads(out)) >= 13
