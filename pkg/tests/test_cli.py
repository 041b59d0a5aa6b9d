import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from chainbound.cli import main
from chainbound.entropy import FiniteMetricSpace
from chainbound.sim import empirical_tail, read_suprema


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def line_space(tmp_path):
    """Three points on a line; small enough to profile instantly, with an onset for small C."""
    p = tmp_path / "line.csv"
    p.write_text(FiniteMetricSpace.from_points([0.0, 0.01, 1.0]).to_csv())
    return p


def write_tail(path, u, ci_hi):
    lines = ["u,count,p_hat,ci_lo,ci_hi"] + [f"{a!r},0,0.0,0.0,{b!r}" for a, b in zip(u, ci_hi)]
    path.write_text("\n".join(lines) + "\n")


class TestBound:
    def test_singleton_row(self, capsys):
        code, out, _ = run(["bound", "--space", "preset:singleton", "--phi", "subgaussian",
                            "--u", "3", "--C", "1"], capsys)
        assert code == 0
        (r,) = rows(out)
        assert float(r["bound"]) == (math.e + 1) * math.exp(-4.5)
        assert r["N"] == "1" and r["flags"] == "below_u0|k_inverse_capped"
        assert list(r) == ["u", "C", "N", "delta", "phi_star", "bound", "flags"]

    def test_missing_space(self, capsys):
        code, _, err = run(["bound", "--u", "3"], capsys)
        assert code == 2 and "space" in err

    def test_below_slope_onset(self, capsys):
        code, _, err = run(["bound", "--space", "preset:singleton", "--u", "0"], capsys)
        assert code == 3 and "u = 0" in err

    def test_bad_grid(self, capsys):
        code, _, err = run(["bound", "--space", "preset:singleton", "--u", "3,2"], capsys)
        assert code == 2 and "bound.u" in err

    def test_bad_phi(self, capsys):
        code, _, _ = run(["bound", "--space", "preset:singleton", "--phi", "cauchy"], capsys)
        assert code == 2

    def test_optimize_keeps_one_row_per_u(self, line_space, capsys):
        code, out, _ = run(["bound", "--space", line_space, "--u", "5,6", "--C", "0.02,0.05,0.1",
                            "--optimize"], capsys)
        assert code == 0 and len(rows(out)) == 2

    def test_json_format(self, capsys):
        code, out, _ = run(["bound", "--space", "preset:two-point", "--u", "2,3", "--C", "1",
                            "--format", "json"], capsys)
        obj = json.loads(out)
        assert code == 0 and "created" in obj["meta"] and len(obj["rows"]) == 2
        assert set(obj["rows"][0]) == {"u", "C", "N", "delta", "phi_star", "bound", "flags"}

    def test_martingale_mode(self, capsys):
        code, out, _ = run(["bound", "--mode", "martingale:1", "--u", "3,6"], capsys)
        r = rows(out)
        assert code == 0 and float(r[1]["bound"]) < float(r[0]["bound"])

    def test_t2_fixed_subgaussian_matches_t1(self, line_space, capsys):
        args = ["bound", "--space", line_space, "--u", "6", "--C", "0.05"]
        _, a, _ = run(args, capsys)
        _, b, _ = run(args + ["--mode", "t2-fixed:10"], capsys)
        assert a == b

    def test_reproducible_bytes(self, line_space, tmp_path, capsys):
        outs = []
        for k in range(2):
            p = tmp_path / f"b{k}.csv"
            run(["bound", "--space", line_space, "--u", "5:7:5", "--C", "0.05,0.1", "--out", p], capsys)
            outs.append(p.read_bytes())
        assert outs[0] == outs[1]

    def test_config_file(self, line_space, tmp_path, capsys):
        cfg = tmp_path / "run.yaml"
        cfg.write_text(f"experiment: demo\nspace: {line_space}\nbound:\n  u: [5.5, 6.0]\n  C: [0.05]\n")
        code, out, _ = run(["bound", "--config", cfg], capsys)
        assert code == 0 and [r["u"] for r in rows(out)] == ["5.5", "6.0"]

    def test_malformed_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("bound:\n  u: [1, 2\n")
        code, _, err = run(["bound", "--config", cfg], capsys)
        assert code == 2 and "line" in err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("bound:\n  uu: [1]\n")
        code, _, err = run(["bound", "--config", cfg], capsys)
        assert code == 2 and "bound.uu" in err


class TestSimulate:
    def test_gaussian_reproducible(self, tmp_path, capsys):
        cov = tmp_path / "cov.csv"
        np.savetxt(cov, np.eye(3), delimiter=",")
        args = ["simulate", "--kind", f"gaussian:{cov}", "--replicates", 5000, "--seed", 3,
                "--u", "1,2,3"]
        _, a, _ = run(args, capsys)
        _, b, _ = run(args, capsys)
        assert a == b
        r = rows(a)
        assert list(r[0]) == ["u", "count", "p_hat", "ci_lo", "ci_hi"]
        assert [int(x["count"]) for x in r] == sorted((int(x["count"]) for x in r), reverse=True)

    def test_raw_suprema(self, tmp_path, capsys):
        raw = tmp_path / "sup.bin"
        code, out, _ = run(["simulate", "--kind", "exampleA:64", "--replicates", 2000, "--seed", 1,
                            "--u", "0.1,1", "--raw", raw], capsys)
        sup = read_suprema(str(raw))
        assert code == 0 and sup.size == 2000
        t = empirical_tail(sup, [0.1, 1.0])
        assert [int(r["count"]) for r in rows(out)] == t.counts.tolist()

    @pytest.mark.parametrize("kind", ["exampleA:256", "polymart:1,256", "polymart:2,256",
                                      "sum:rademacher:3,10", "sum:exampleA:3,4"])
    def test_kinds(self, kind, capsys):
        code, out, _ = run(["simulate", "--kind", kind, "--replicates", 500, "--seed", 2,
                            "--u", "2.5,3"], capsys)
        assert code == 0 and len(rows(out)) == 2

    def test_polymart_two_sided_rejected(self, capsys):
        code, _, _ = run(["simulate", "--kind", "polymart:1,64", "--replicates", 10, "--seed", 0,
                          "--u", "3", "--two-sided"], capsys)
        assert code == 2

    def test_missing_seed(self, capsys):
        code, _, _ = run(["simulate", "--kind", "exampleA:4", "--replicates", 10, "--u", "1"], capsys)
        assert code == 2

    def test_unknown_kind(self, capsys):
        code, _, _ = run(["simulate", "--kind", "cauchy:3", "--replicates", 10, "--seed", 0,
                          "--u", "1"], capsys)
        assert code == 2


class TestVerify:
    def test_bound_one_passes(self, tmp_path, capsys):
        b = tmp_path / "b.csv"
        b.write_text("u,C,N,delta,phi_star,bound,flags\n2.0,1.0,1,1.0,2.0,1.0,\n3.0,1.0,1,1.0,4.5,1.0,\n")
        t = tmp_path / "t.csv"
        write_tail(t, [2.0, 3.0], [0.9, 1.0])
        code, out, _ = run(["verify", "--bound", b, "--tail", t], capsys)
        assert code == 0 and all(r["dominated"] == "true" for r in rows(out))

    def test_heavy_tail_fails(self, line_space, tmp_path, capsys):
        b = tmp_path / "b.csv"
        run(["bound", "--space", line_space, "--u", "6", "--C", "0.05", "--out", b], capsys)
        assert rows(b.read_text())[0]["flags"] == ""
        X = np.random.default_rng(0).laplace(size=(100_000, 3))
        tail = empirical_tail(X, [6.0])
        t = tmp_path / "t.csv"
        write_tail(t, [6.0], [float(tail.ci_hi[0])])
        code, out, _ = run(["verify", "--bound", b, "--tail", t], capsys)
        assert code == 1 and rows(out)[0]["dominated"] == "false"

    def test_grid_mismatch(self, tmp_path, capsys):
        b = tmp_path / "b.csv"
        b.write_text("u,C,N,delta,phi_star,bound,flags\n2.0,1.0,1,1.0,2.0,1.0,\n")
        t = tmp_path / "t.csv"
        write_tail(t, [2.5], [0.1])
        code, _, err = run(["verify", "--bound", b, "--tail", t], capsys)
        assert code == 2 and "u grids differ" in err

    def test_empty_overlap(self, tmp_path, capsys):
        b = tmp_path / "b.csv"
        b.write_text("u,C,N,delta,phi_star,bound,flags\n2.0,1.0,1,1.0,2.0,1.0,below_u0\n")
        t = tmp_path / "t.csv"
        write_tail(t, [2.0], [0.1])
        code, _, err = run(["verify", "--bound", b, "--tail", t], capsys)
        assert code == 2 and "onset" in err

    def test_json_inputs(self, line_space, tmp_path, capsys):
        b = tmp_path / "b.json"
        run(["bound", "--space", line_space, "--u", "6", "--C", "0.05", "--format", "json",
             "--out", b], capsys)
        t = tmp_path / "t.json"
        run(["simulate", "--kind", "sum:rademacher:3,1", "--replicates", 1000, "--seed", 0,
             "--u", "6", "--format", "json", "--out", t], capsys)
        code, out, _ = run(["verify", "--bound", b, "--tail", t, "--format", "json"], capsys)
        # zero exceedances in 1000 draws still leave a 99% upper limit near 0.005,
        # far above a 1e-7 bound: the verdict is an honest failure
        obj = json.loads(out)
        assert code == 1 and obj["pass"] is False
        assert obj["rows"][0]["log_ratio"] < 0 and obj["rows"][0]["in_range"] is True


class TestInspectAndFit:
    def test_chain_inspect(self, capsys):
        code, out, _ = run(["chain-inspect", "--space", "preset:two-point", "--t0", "0"], capsys)
        r = rows(out)
        assert code == 0 and [x["size"] for x in r] == ["1", "2"]
        assert float(r[1]["L_term"]) == 0.25

    def test_chain_inspect_json(self, capsys):
        code, out, _ = run(["chain-inspect", "--space", "preset:gaussian-grid:16", "--t0", "3",
                            "--delta", "0.5", "--strategy", "refine", "--format", "json"], capsys)
        obj = json.loads(out)
        assert code == 0 and obj["chain"]["ball_center"] == 3 and obj["L"] >= 0

    def test_phi_fit(self, tmp_path, capsys):
        data = tmp_path / "x.csv"
        np.savetxt(data, np.random.default_rng(1).standard_normal((20_000, 2)), delimiter=",",
                   header="a,b", comments="")
        code, out, _ = run(["phi-fit", "--data", data, "--lambda-grid", "0.1:2:20",
                            "--format", "json"], capsys)
        obj = json.loads(out)
        assert code == 0 and obj["kind"] == "natural"
        code, out, _ = run(["phi-fit", "--data", data, "--norm-phi", "subgaussian"], capsys)
        taus = [float(r["tau"]) for r in rows(out)]
        assert code == 0 and all(0.9 < t < 1.1 for t in taus)

    def test_phi_fit_then_bound(self, tmp_path, capsys):
        data = tmp_path / "x.csv"
        np.savetxt(data, np.random.default_rng(2).standard_normal((20_000, 1)), delimiter=",")
        phi = tmp_path / "phi.json"
        run(["phi-fit", "--data", data, "--format", "json", "--out", phi], capsys)
        code, out, _ = run(["bound", "--space", "preset:singleton", "--phi", f"natural:{phi}",
                            "--u", "1,2", "--C", "1"], capsys)
        assert code == 0 and len(rows(out)) == 2

    def test_missing_data_file(self, tmp_path, capsys):
        code, _, _ = run(["phi-fit", "--data", tmp_path / "nope.csv"], capsys)
        assert code == 2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "chainbound", "bound", "--space", "preset:singleton",
         "--u", "3", "--C", "1"],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    assert "0.0413063799605608" in proc.stdout


def test_no_subcommand(capsys):
    assert main([]) == 2
