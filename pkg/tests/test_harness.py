import json
import numpy as np
import pytest

from fracks.errors import ConfigurationError, InputError, OutputError
from fracks.harness import parse_config, run_scenario, run_transport, scenario_from_document, verify_suite
from fracks.harness.cli import main
from fracks.harness.config import OUTPUT_ROOT_ENV, load_schema
from fracks.harness.runner import ChildResult, mass_monotonicity, worst_exit
from fracks.torus import read_snapshot

MINIMAL = {"d": 2, "n": 64, "alpha": 1.0, "beta": 2.0, "flow": {"kind": "zero"}, "t_end": 0.5}


def small(**kw):
    doc = {"d": 2, "n": 16, "alpha": 1.0, "beta": 2.0, "flow": {"kind": "alternating_shear", "amplitude": 2.0},
           "t_end": 0.05, "initial": {"kind": "random_smooth", "seed": 1}, "diag_every": 2}
    doc.update(kw)
    return doc


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def row(label, value, status, code, blowup=None, interval=0.01):
    return ChildResult(label, value, status, code, 0.0, 0, 1.0, 1.0, blowup, None, None, "skipped", interval)


class TestParse:
    def test_minimal_fills_defaults(self, tmp_path):
        scen = parse_config(write(tmp_path, MINIMAL))
        doc = scen.document
        assert doc["version"] == 1 and doc["scheme"] == "lawson" and doc["diag_every"] == 10
        assert doc["blowup_threshold"] == 1000 and doc["dt"]["c_adv"] == 0.4 and doc["dt"]["c_max"] == 0.01
        assert doc["flow"]["amplitude"] == 0
        assert scen.base.n == 64 and scen.base.t_end == 0.5 and scen.sweep is None

    def test_schema_documents_defaults(self):
        props = load_schema()["properties"]
        assert all("default" in props[k] for k in props if k not in ("d", "n", "alpha", "beta", "flow", "t_end"))

    def test_alpha_range_names_key(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc:
            parse_config(write(tmp_path, {**MINIMAL, "alpha": 2.5}))
        assert exc.value.key == "alpha"

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc:
            parse_config(write(tmp_path, {**MINIMAL, "gamma": 1}))
        assert exc.value.key == "gamma"

    def test_nested_unknown_key(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc:
            parse_config(write(tmp_path, {**MINIMAL, "flow": {"kind": "zero", "speed": 1}}))
        assert exc.value.key == "flow.speed"

    def test_missing_required(self, tmp_path):
        doc = dict(MINIMAL)
        del doc["t_end"]
        with pytest.raises(ConfigurationError) as exc:
            parse_config(write(tmp_path, doc))
        assert exc.value.key == "t_end"

    def test_sweep_children(self, tmp_path):
        scen = parse_config(write(tmp_path, {**MINIMAL, "flow": {"kind": "alternating_shear"},
                                             "sweep": {"axis": "A", "values": [0, 10, 100, 1000]}}))
        kids = scen.children()
        assert [k.label for k in kids] == ["A_0", "A_10", "A_100", "A_1000"]
        assert [k.config.flow.amplitude for k in kids] == [0, 10, 100, 1000]

    def test_sweep_value_out_of_range(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc:
            parse_config(write(tmp_path, {**MINIMAL, "sweep": {"axis": "alpha", "values": [1.0, 3.0]}}))
        assert exc.value.key.startswith("sweep")

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            parse_config(tmp_path / "absent.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        with pytest.raises(ConfigurationError):
            parse_config(path)

    def test_snapshot_after_end(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc:
            parse_config(write(tmp_path, {**MINIMAL, "snapshot_times": [1.0]}))
        assert exc.value.key == "snapshot_times"

    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
        scen = parse_config(write(tmp_path, {**MINIMAL, "outputs": "here"}))
        assert scen.outputs == tmp_path / "root" / "here"

    def test_shipped_scenarios_parse(self):
        from importlib import resources

        folder = resources.files("fracks.harness") / "scenarios"
        names = sorted(p.name for p in folder.iterdir() if p.name.endswith(".json"))
        assert names == ["blowup.json", "headline.json", "mass_sweep.json", "mixing.json", "suppression.json"]
        for name in names:
            scenario_from_document(json.loads((folder / name).read_text()))


class TestRun:
    def test_single_run_outputs(self, tmp_path):
        scen = scenario_from_document(small(outputs=str(tmp_path / "out"), snapshot_times=[0.0, 0.02]))
        res = run_scenario(scen, workers=1)
        assert res.exit_code == 0 and len(res.rows) == 1
        child = tmp_path / "out" / "scenario"
        assert (child / "diag.csv").is_file()
        ver = json.loads((child / "verification.json").read_text())
        assert ver["status"] == "COMPLETED" and ver["pass"]
        field, meta = read_snapshot(child / "snapshots" / "rho_t0.020000")
        assert meta["t"] == pytest.approx(0.02, abs=1e-12)
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["exit_code"] == 0 and len(summary["rows"]) == 1
        assert (tmp_path / "out" / "summary.csv").read_text().count("\n") == 2

    def test_unwritable_before_compute(self, monkeypatch):
        called = []
        monkeypatch.setattr("fracks.harness.runner.run_child", lambda *a: called.append(a))
        # procfs refuses new directories even for root
        with pytest.raises(OutputError):
            run_scenario(scenario_from_document(small(outputs="/proc/fracks-unwritable/out")), workers=1)
        assert not called

    def test_output_is_a_file(self, tmp_path):
        f = tmp_path / "file"
        f.write_text("x")
        with pytest.raises(OutputError):
            run_scenario(scenario_from_document(small(outputs=str(f))), workers=1)

    def test_sweep_rows_once_each(self, tmp_path):
        scen = scenario_from_document(small(outputs=str(tmp_path / "o"), sweep={"axis": "A", "values": [0, 1, 2]}))
        res = run_scenario(scen, workers=2)
        assert [r.label for r in res.rows] == ["A_0", "A_1", "A_2"]
        assert all((tmp_path / "o" / r.label / "diag.csv").is_file() for r in res.rows)

    def test_reproducible_bytes(self, tmp_path):
        a = run_scenario(scenario_from_document(small(outputs=str(tmp_path / "a"))), workers=1)
        b = run_scenario(scenario_from_document(small(outputs=str(tmp_path / "b"))), workers=1)
        for name in ("scenario/diag.csv", "summary.csv"):
            assert (a.outputs / name).read_bytes() == (b.outputs / name).read_bytes()

    def test_pool_matches_serial(self, tmp_path):
        doc = small(sweep={"axis": "A", "values": [0, 3]})
        a = run_scenario(scenario_from_document({**doc, "outputs": str(tmp_path / "a")}), workers=1)
        b = run_scenario(scenario_from_document({**doc, "outputs": str(tmp_path / "b")}), workers=2)
        for label in ("A_0", "A_3"):
            assert (a.outputs / label / "diag.csv").read_bytes() == (b.outputs / label / "diag.csv").read_bytes()

    def test_failed_child_exit_code(self, tmp_path):
        doc = small(outputs=str(tmp_path / "o"), initial={"kind": "random_smooth", "seed": 0, "mean": 0.1})
        res = run_scenario(scenario_from_document(doc), workers=1)
        assert res.rows[0].status == "FAILED" and res.exit_code == 1

    def test_transport(self, tmp_path):
        res = run_transport(scenario_from_document(small(outputs=str(tmp_path / "t"), t_end=0.5,
                                                         snapshot_times=[0.25])))
        lines = (tmp_path / "t" / "transport.csv").read_text().splitlines()
        assert lines[0] == "t,mean,l2_fluct,max,min" and len(lines) == 22  # 21 uniform times, 0.25 among them
        means = [float(line.split(",")[1]) for line in lines[1:]]
        assert np.ptp(means) <= 1e-6 * means[0]
        assert (tmp_path / "t" / "snapshots" / "rho_t0.250000.json").is_file()
        assert res.exit_code == 0


class TestExitCodes:
    def test_worst(self):
        assert worst_exit([0, 0]) == 0
        assert worst_exit([0, 2]) == 2
        assert worst_exit([2, 1, 0]) == 1

    def test_expected_blowup_is_success(self, tmp_path):
        from fixtures import BUMP

        doc = {"d": 2, "n": 128, "alpha": 1.0, "beta": 2.0, "flow": {"kind": "zero"}, "t_end": 1.0,
               "initial": BUMP, "dt": {"policy": "cfl", "c_max": 0.001}, "scheme": "split",
               "blowup_threshold": 4, "diag_every": 5, "outputs": str(tmp_path / "b")}
        res = run_scenario(scenario_from_document({**doc, "expect": "blowup"}), workers=1)
        assert res.rows[0].status == "BLOWUP" and res.exit_code == 0
        res = run_scenario(scenario_from_document(doc), workers=1)
        assert res.exit_code == 2

    def test_mass_monotonicity(self):
        rows = [row("m1", 1.0, "BLOWUP", 2, 0.02), row("m2", 1.5, "BLOWUP", 2, 0.012), row("m0", 0.5, "COMPLETED", 0)]
        assert mass_monotonicity(rows) is True
        rows.append(row("m3", 2.0, "BLOWUP", 2, 0.05))
        assert mass_monotonicity(rows) is False
        assert mass_monotonicity(rows[:1]) is None


class TestCli:
    def test_run(self, tmp_path, capsys):
        code = main(["run", str(write(tmp_path, small())), "-o", str(tmp_path / "o")])
        assert code == 0
        assert "COMPLETED" in capsys.readouterr().out

    def test_run_rejects_sweep(self, tmp_path, capsys):
        path = write(tmp_path, small(sweep={"axis": "A", "values": [0, 1]}))
        assert main(["run", str(path), "-o", str(tmp_path / "o")]) == 1
        assert "sweep" in capsys.readouterr().err

    def test_sweep(self, tmp_path, capsys):
        path = write(tmp_path, small(sweep={"axis": "A", "values": [0, 1]}))
        assert main(["sweep", str(path), "-o", str(tmp_path / "o"), "-j", "1"]) == 0
        out = capsys.readouterr().out
        assert "A_0" in out and "A_1" in out

    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
        assert main(["run", str(write(tmp_path, small(outputs="rel")))]) == 0
        assert (tmp_path / "root" / "rel" / "summary.csv").is_file()

    def test_transport(self, tmp_path):
        assert main(["transport", str(write(tmp_path, small())), "-o", str(tmp_path / "t")]) == 0

    def test_missing_config(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "nope.json")]) == 1
        assert "not found" in capsys.readouterr().err

    def test_check_maxprinciple_json(self, capsys):
        code = main(["check-maxprinciple", "--alpha", "1", "--d", "1", "--p", "1", "--trials", "50"])
        rep = json.loads(capsys.readouterr().out)
        assert code == 0 and rep["passed"] and rep["trials"] == 50 and rep["violations"] == 0

    def test_check_maxprinciple_mutation_exit(self, capsys):
        code = main(["check-maxprinciple", "--alpha", "1", "--d", "1", "--p", "1", "--trials", "200",
                     "--c-lower-scale", "200"])
        assert code == 1 and not json.loads(capsys.readouterr().out)["passed"]

    def test_verify_filter(self, tmp_path, capsys):
        out_json = tmp_path / "v.json"
        assert main(["verify", "--filter", "cordoba", "--json", str(out_json)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 1 and lines[0].startswith("PASS") and "cordoba" in lines[0]
        assert [c["check"] for c in json.loads(out_json.read_text())] == ["cordoba"]

    def test_verify_no_match(self):
        assert main(["verify", "--filter", "nonexistent"]) == 1


def test_verify_suite_checks_report_errors(monkeypatch):
    from fracks.harness import verify

    monkeypatch.setitem(verify.CHECKS, "drift", lambda: 1 / 0)
    (chk,) = verify_suite("drift")
    assert not chk.passed and "ZeroDivisionError" in chk.detail["error"]
