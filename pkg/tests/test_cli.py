"""Command-line driver: exit codes, artifact formats, determinism, config files."""
import hashlib
import json
import math

import numpy as np
import pytest

from stripwetting import cli
from stripwetting.pq_exact import constants, transfer_matrix_Z
from stripwetting.return_kernel import load_kernel


def _read_csv(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_critical_point_pq_json(tmp_path):
    out = tmp_path / "crit.json"
    code = cli.run(["critical-point", "--law", "pq:p=0.3", "--a", "1",
                    "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    c = constants(0.3)
    assert abs(payload["beta_c"] - c.beta_c_1) < 1e-6
    assert payload["nodes"] == 2
    assert payload["refinement_delta"] < 1e-10


def test_critical_point_stdout_and_summary(capsys):
    code = cli.run(["critical-point", "--law", "pq:p=0.3", "--a", "1",
                    "--nmax", "512"])
    assert code == 0
    captured = capsys.readouterr()
    payload = json.loads(captured.out)
    assert abs(payload["beta_c"] - constants(0.3).beta_c_1) < 1e-5
    # artifact owns stdout, so the one-line summary moves to stderr
    assert "beta_c=" in captured.err


def test_pq_exact_constants(capsys):
    code = cli.run(["pq-exact", "--p", "0.3", "--json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["sumK"] == pytest.approx(0.7, abs=1e-12)
    # serialized at 12 significant digits
    assert payload["beta_c_1"] == pytest.approx(constants(0.3).beta_c_1, abs=1e-12)
    assert len(payload["cubic"]) == 3


def test_pq_z_matches_library(capsys):
    code = cli.run(["pq-z", "--p", "0.3", "--a", "1", "--beta", "0.6",
                    "--N", "10", "--boundary", "constrained"])
    assert code == 0
    printed = float(capsys.readouterr().out.strip())
    exact = transfer_matrix_Z(0.3, 1, 0.6, 10, boundary="constrained")
    assert printed == pytest.approx(exact, rel=1e-11)


def test_unknown_subcommand_exits_2(capsys):
    assert cli.run(["frobnicate"]) == 2
    capsys.readouterr()


def test_unknown_flag_exits_2(capsys):
    assert cli.run(["pq-exact", "--p", "0.3", "--bogus"]) == 2
    capsys.readouterr()


def test_missing_required_flag_exits_2(capsys):
    assert cli.run(["critical-point", "--law", "pq:p=0.3"]) == 2
    capsys.readouterr()


def test_bad_grid_spec_exits_2(capsys):
    code = cli.run(["free-energy", "--law", "pq:p=0.3", "--a", "1",
                    "--beta-grid", "0.3:0.7"])
    assert code == 2
    capsys.readouterr()


def test_kernel_requires_out_then_roundtrips(tmp_path, capsys):
    assert cli.run(["kernel", "--law", "pq:p=0.3", "--a", "1"]) == 2
    assert "--out" in capsys.readouterr().err
    out = tmp_path / "k.swk"
    code = cli.run(["kernel", "--law", "pq:p=0.3", "--a", "1", "--nmax", "256",
                    "--out", str(out)])
    assert code == 0
    kernel = load_kernel(str(out))
    assert kernel.n_max == 256
    assert kernel.values[0, 0, 0] == pytest.approx(0.4, abs=1e-15)


def test_simulate_deterministic_and_thread_invariant(tmp_path):
    args = ["simulate", "--law", "pq:p=0.3", "--a", "1", "--beta", "0.3",
            "--N", "32", "--paths", "25000", "--boundary", "free",
            "--seed", "42"]
    outs = [tmp_path / f"run{i}.csv" for i in range(3)]
    dumps = [tmp_path / f"run{i}.bin" for i in range(3)]
    assert cli.run(args + ["--out", str(outs[0]), "--dump", str(dumps[0])]) == 0
    assert cli.run(args + ["--out", str(outs[1]), "--dump", str(dumps[1])]) == 0
    assert cli.run(args + ["--out", str(outs[2]), "--dump", str(dumps[2]),
                           "--threads", "4"]) == 0
    # byte-identical reruns, including under a different thread count
    assert _sha(outs[0]) == _sha(outs[1]) == _sha(outs[2])
    assert _sha(dumps[0]) == _sha(dumps[1]) == _sha(dumps[2])
    header, rows = _read_csv(outs[0])
    assert header == ["path", "n_contacts", "last_contact", "L_A", "R_A",
                      "endpoint", "sup_height"]
    assert len(rows) == 25000


def test_simulate_seed_changes_output(tmp_path):
    base = ["simulate", "--law", "pq:p=0.3", "--a", "1", "--beta", "0.3",
            "--N", "32", "--paths", "2000", "--boundary", "constrained"]
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert cli.run(base + ["--seed", "1", "--out", str(a)]) == 0
    assert cli.run(base + ["--seed", "2", "--out", str(b)]) == 0
    assert _sha(a) != _sha(b)


def test_free_energy_csv(tmp_path):
    out = tmp_path / "fe.csv"
    code = cli.run(["free-energy", "--law", "pq:p=0.3", "--a", "1",
                    "--nmax", "512", "--beta-grid", "0.3:0.7:3",
                    "--out", str(out)])
    assert code == 0
    header, rows = _read_csv(out)
    assert header == ["beta", "F", "delta_residual"]
    betas = [float(r[0]) for r in rows]
    F = [float(r[1]) for r in rows]
    assert betas == pytest.approx([0.3, 0.5, 0.7])
    assert all(b > a for a, b in zip(F, F[1:]))       # F increasing in beta
    assert all(float(r[2]) < 1e-9 for r in rows)      # fixed points solved tight


def test_ladder_pq_exact_and_continuous_needs_seed(tmp_path, capsys):
    out = tmp_path / "lad.csv"
    code = cli.run(["ladder", "--law", "pq:p=0.3", "--out", str(out)])
    assert code == 0
    header, rows = _read_csv(out)
    assert header == ["x", "U", "V", "asc_tail", "desc_tail", "stderr"]
    assert all(float(r[5]) == 0.0 for r in rows)      # exact tables, no MC error
    assert cli.run(["ladder", "--law", "gauss:sigma=1.0"]) == 2
    assert "seed" in capsys.readouterr().err


def test_scaling_test_supercritical_json(tmp_path):
    out = tmp_path / "sc.json"
    code = cli.run(["scaling-test", "--law", "pq:p=0.3", "--a", "1",
                    "--kind", "supercritical", "--beta", "1.6", "--N", "64",
                    "--paths", "2000", "--boundary", "free", "--seed", "7",
                    "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["regime"] == "supercritical"
    assert payload["N"] == 64
    assert payload["t"] == [0.25, 0.5, 0.75]
    assert payload["n_paths"] == 2000
    quants = payload["ks"]
    assert quants[0] <= quants[1] <= quants[2]
    assert quants[2] < 1.0                            # pinned paths stay low


def test_contact_stats_headers(tmp_path):
    base = ["contact-stats", "--law", "pq:p=0.3", "--a", "1", "--beta", "0.02",
            "--N", "64", "--paths", "3000", "--seed", "11",
            "--grid", "0,8,32"]
    free = tmp_path / "free.csv"
    cons = tmp_path / "cons.csv"
    assert cli.run(base + ["--boundary", "free", "--out", str(free)]) == 0
    assert cli.run(base + ["--boundary", "constrained", "--out", str(cons)]) == 0
    header, rows = _read_csv(free)
    assert header == ["L", "tail_max_contact"]
    assert float(rows[0][1]) == 1.0                   # index 0 always a contact
    header, rows = _read_csv(cons)
    assert header == ["L", "tail_L", "tail_R"]
    assert [r[0] for r in rows] == ["0", "8", "32"]


def test_renewal_check_csv(tmp_path):
    out = tmp_path / "rn.csv"
    code = cli.run(["renewal-check", "--law", "pq:p=0.3", "--a", "1",
                    "--nmax", "512", "--beta", "0.62", "--N-list", "50,200",
                    "--out", str(out)])
    assert code == 0
    header, rows = _read_csv(out)
    assert header == ["N", "value", "TV"]
    assert [r[0] for r in rows] == ["50", "200"]
    assert float(rows[1][2]) < 1e-6                   # mixed by N=200
    assert float(rows[1][1]) > 0.0


def test_asymptotics_localized_flattens(tmp_path):
    out = tmp_path / "as.csv"
    code = cli.run(["asymptotics", "--law", "pq:p=0.3", "--a", "1",
                    "--kind", "localized", "--beta", "0.62",
                    "--N-list", "400,800", "--out", str(out)])
    assert code == 0
    header, rows = _read_csv(out)
    assert header == ["N", "value", "TV"]
    assert float(rows[0][2]) == 0.0                   # first row has no step change
    assert float(rows[1][2]) < 1e-4


def test_config_file_supplies_and_flags_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults for the lattice walk\np = 0.25\n")
    assert cli.run(["pq-exact", "--config", str(cfg)]) == 0
    assert json.loads(capsys.readouterr().out)["p"] == pytest.approx(0.25)
    assert cli.run(["pq-exact", "--config", str(cfg), "--p", "0.3"]) == 0
    assert json.loads(capsys.readouterr().out)["p"] == pytest.approx(0.3)


def test_config_file_for_kernel_knobs(tmp_path):
    cfg = tmp_path / "crit.cfg"
    cfg.write_text("law = pq:p=0.3\na = 1\nnmax = 512\n")
    out = tmp_path / "crit.json"
    code = cli.run(["critical-point", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert abs(payload["beta_c"] - constants(0.3).beta_c_1) < 1e-4


def test_missing_config_file_exits_2(capsys):
    assert cli.run(["pq-exact", "--config", "/nonexistent/x.cfg", "--p", "0.3"]) == 2
    capsys.readouterr()


def test_kernel_cache_dir_reused(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("STRIPWET_CACHE_DIR", str(tmp_path))
    args = ["critical-point", "--law", "gauss:sigma=1.0", "--a", "1.0",
            "--nodes", "16", "--nmax", "48"]
    assert cli.run(args) == 0
    first = json.loads(capsys.readouterr().out)
    cached = list(tmp_path.glob("kernel_*.swk"))
    assert len(cached) == 1
    assert cli.run(args) == 0                          # served from cache
    second = json.loads(capsys.readouterr().out)
    assert second["beta_c"] == first["beta_c"]
    assert list(tmp_path.glob("kernel_*.swk")) == cached


def test_gaussian_critical_point_sane(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("STRIPWET_CACHE_DIR", str(tmp_path))
    code = cli.run(["critical-point", "--law", "gauss:sigma=1.0", "--a", "1.0",
                    "--nodes", "24", "--nmax", "64"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert 0.3 < payload["beta_c"] < 0.6
    assert math.isfinite(payload["refinement_delta"])
