import csv
import json
import subprocess
import sys

import pytest

from nsbh.cli import main
from nsbh.io import read_snapshot

SOLVE = """[grid]
nh = 16
nv = 16
[solver]
n_cutoff = 5
dt = 0.05
t_end = 0.1
certified = yes
snapshots = yes
[init]
generator = random
seed = 3
u_norm = 0.05
rho_norm = 0.02
"""


def only_run(base):
    (d,) = [p for p in base.iterdir() if p.is_dir()]
    return d


@pytest.fixture
def cfgfile(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(SOLVE)
    return p


class TestUsage:
    def test_no_arguments(self, capsys):
        assert main([]) == 1

    def test_unknown_flag(self, capsys):
        assert main(["verify", "--inequality", "bernstein", "--bogus"]) == 1
        assert "unrecognized" in capsys.readouterr().err

    def test_bad_threads(self, tmp_path, cfgfile):
        assert main(["solve", str(cfgfile), "--threads", "0", "--run-dir", str(tmp_path)]) == 1

    def test_missing_config(self, tmp_path):
        assert main(["solve", str(tmp_path / "absent.ini"), "--run-dir", str(tmp_path)]) == 1

    def test_module_entry(self):
        r = subprocess.run([sys.executable, "-m", "nsbh", "--version"], capture_output=True, text=True)
        assert r.returncode == 0 and r.stdout.startswith("nsbh ")


class TestSolve:
    def test_outputs_and_manifest(self, tmp_path, cfgfile, capsys):
        base = tmp_path / "runs"
        assert main(["solve", str(cfgfile), "--run-dir", str(base)]) == 0
        d = only_run(base)
        assert d.name.endswith("-seed3")
        man = json.loads((d / "manifest.json").read_text())
        assert man["status"] == "ok" and man["subcommand"] == "solve" and man["seed"] == 3
        assert set(man["outputs"]) == {"ledger.csv", "admission.json", "summary.json", "final.bin",
                                       "snapshots/snap_00000.bin", "snapshots/snap_00001.bin",
                                       "snapshots/snap_00002.bin"}
        assert man["config"]["solver"]["dt"] == "0.05" and man["filter_bank"]["grid"]["Nh"] == 16
        g, t, X = read_snapshot(d / "final.bin")
        assert t == pytest.approx(0.1) and X.shape == (4, 16, 16, 16)
        assert len((d / "ledger.csv").read_text().splitlines()) == 4

    def test_admission_violation_exits_2(self, tmp_path, cfgfile, capsys):
        cfgfile.write_text(SOLVE.replace("u_norm = 0.05", "u_norm = 1.0"))
        assert main(["solve", str(cfgfile), "--run-dir", str(tmp_path)]) == 2
        assert "C0^2" in capsys.readouterr().err
        man = json.loads((only_run(tmp_path) / "manifest.json").read_text())
        assert man["status"] == "admission_failed"

    def test_config_error_has_line(self, tmp_path, cfgfile, capsys):
        cfgfile.write_text(SOLVE.replace("dt = 0.05", "dt = soon"))
        assert main(["solve", str(cfgfile), "--run-dir", str(tmp_path)]) == 1
        assert "run.ini:6: bad value for 'dt'" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, cfgfile, capsys):
        cfgfile.write_text(SOLVE + "colour = red\n")
        assert main(["solve", str(cfgfile), "--run-dir", str(tmp_path)]) == 1
        assert "unknown key 'colour'" in capsys.readouterr().err

    def test_env_run_dir(self, tmp_path, cfgfile, monkeypatch, capsys):
        monkeypatch.setenv("NSBH_RUN_DIR", str(tmp_path / "env"))
        assert main(["solve", str(cfgfile)]) == 0
        assert only_run(tmp_path / "env").is_dir()

    def test_run_dir_collision(self, tmp_path, cfgfile, capsys):
        for _ in range(2):
            assert main(["solve", str(cfgfile), "--run-dir", str(tmp_path)]) == 0
        assert len([p for p in tmp_path.iterdir() if p.is_dir()]) == 2


class TestVerify:
    def test_prints_report(self, tmp_path, capsys):
        rc = main(["verify", "--inequality", "embedding", "--grid", "8,8", "--ensemble", "2",
                   "--run-dir", str(tmp_path)])
        body = json.loads(capsys.readouterr().out)
        assert rc == 0 and body["certified"] and body["inequality"] == "embedding"
        assert body["report"]["n_samples"] == 2
        assert (only_run(tmp_path) / "report.json").read_text() == json.dumps(body, sort_keys=True, indent=1) + "\n"

    def test_summary_csv_lists_max_ratios(self, tmp_path, capsys):
        rc = main(["verify", "--inequality", "lemma5", "--grid", "8,8", "--ensemble", "2",
                   "--params", "s=0.75", "delta=0.25", "--run-dir", str(tmp_path)])
        body = json.loads(capsys.readouterr().out)
        assert rc == 0 and body["params"] == {"s": 0.75, "delta": 0.25}
        rows = list(csv.DictReader((only_run(tmp_path) / "summary.csv").open()))
        assert [r["inequality_id"] for r in rows] == [body[k]["inequality_id"] for k in ("transport", "buoyancy")]
        assert float(rows[0]["max_ratio"]) == body["transport"]["ratio"]

    @pytest.mark.parametrize("params", [["s"], ["sigma=0.5"], ["s=abc"]])
    def test_bad_params(self, tmp_path, capsys, params):
        rc = main(["verify", "--inequality", "lemma5", "--grid", "8,8", "--ensemble", "1",
                   "--params", *params, "--run-dir", str(tmp_path)])
        assert rc == 1 and "--params" in capsys.readouterr().err

    def test_product_needs_full_set(self, tmp_path, capsys):
        rc = main(["verify", "--inequality", "product", "--grid", "8,8", "--ensemble", "1",
                   "--params", "sigma=0.5", "--run-dir", str(tmp_path)])
        assert rc == 1

    def test_bad_grid(self, tmp_path, capsys):
        assert main(["verify", "--inequality", "bernstein", "--grid", "8", "--run-dir", str(tmp_path)]) == 1


class TestNorms:
    def test_norms_of_snapshot(self, tmp_path, cfgfile, capsys):
        main(["solve", str(cfgfile), "--run-dir", str(tmp_path / "a")])
        snap = only_run(tmp_path / "a") / "final.bin"
        capsys.readouterr()
        rc = main(["norms", str(snap), "--norm", "H:0:0.5", "--norm", "L:4h,infv", "--field", "rho",
                   "--run-dir", str(tmp_path / "b")])
        body = json.loads(capsys.readouterr().out)
        assert rc == 0 and set(body["norms"]) == {"H:0:0.5", "L:4h,infv"} and body["field"] == "rho"

    def test_bad_snapshot(self, tmp_path, capsys):
        (tmp_path / "x.bin").write_bytes(b"junk")
        assert main(["norms", str(tmp_path / "x.bin"), "--norm", "H:0:0", "--run-dir", str(tmp_path)]) == 1


class TestUniqueness:
    def test_pair_audit(self, tmp_path, cfgfile, capsys):
        cfgfile.write_text(SOLVE.replace("snapshots = yes\n", "s = 0.75\n") + "[pair]\neps = 1e-6\nkind = shear\n")
        assert main(["uniqueness", str(cfgfile), "--run-dir", str(tmp_path)]) == 0
        d = only_run(tmp_path)
        audit = json.loads((d / "audit.json").read_text())
        assert audit["kind"] == "gronwall" and audit["certified"] and audit["perturbation"] == "shear:1e-06"
        assert (d / "series.csv").read_text().startswith("t,w_sq,")
