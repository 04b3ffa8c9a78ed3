import json

import pytest

from hypmeas.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_NUMERIC, EXIT_PASS, main


def run(capsys, argv, environ=None):
    code = main(argv, environ=environ or {})
    out = capsys.readouterr().out
    return code, json.loads(out) if out else None


def records(report):
    return {r["formula_id"]: r for r in report["result"]["records"]}


class TestBounds:
    def test_seminorm_large_deviation(self, capsys):
        code, rep = run(capsys, ["bounds", "--alpha", "-1", "--r", "3", "--seminorm"])
        assert code == EXIT_PASS
        recs = records(rep)
        assert recs["modulus_seminorm"]["value"] == pytest.approx(0.5)
        assert recs["large_deviation"]["value"] == pytest.approx(1 / 3)
        assert recs["large_deviation_simplified"]["value"] == pytest.approx(0.5)

    def test_rate_and_plot(self, capsys, tmp_path):
        plot = tmp_path / "rate.csv"
        code, rep = run(capsys, ["bounds", "--alpha", "0", "--delta", "0.5", "--p", "0.5",
                                 "--plot", str(plot)])
        assert code == EXIT_PASS
        assert records(rep)["rate_function"]["value"] == pytest.approx(0.75)
        lines = plot.read_bytes().decode().split("\n")
        assert lines[0] == "x,y" and lines[-1] == "" and "\r" not in plot.read_bytes().decode()
        assert len(lines) == 13

    def test_seminorm_plot(self, capsys, tmp_path):
        plot = tmp_path / "mod.csv"
        run(capsys, ["bounds", "--alpha", "0", "--r", "3", "--seminorm", "--plot", str(plot)])
        assert "1,1" in plot.read_text().splitlines()

    def test_missing_inputs(self, capsys):
        code, rep = run(capsys, ["bounds", "--alpha", "0"])
        assert code == EXIT_CONFIG and rep["error"]


class TestConfig:
    def test_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"seed": 5, "alpha": "0", "epsilon": 0.5, "seminorm": True}))
        base = ["bounds", "--config", str(cfg)]
        assert run(capsys, base)[1]["seed"] == 5
        assert run(capsys, base, {"HYPMEAS_SEED": "7"})[1]["seed"] == 7
        assert run(capsys, base + ["--seed", "9"], {"HYPMEAS_SEED": "7"})[1]["seed"] == 9

    def test_unknown_field(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"colour": "red"}))
        assert main(["bounds", "--config", str(cfg)], environ={}) == EXIT_CONFIG
        assert "unknown" in capsys.readouterr().err

    def test_bad_env_seed(self, capsys):
        assert main(["bounds", "--alpha", "0", "--epsilon", "0.5", "--seminorm"],
                    environ={"HYPMEAS_SEED": "x"}) == EXIT_CONFIG

    def test_bad_model(self, capsys):
        code, rep = run(capsys, ["check-concavity", "--model", "hyperbolic-7"])
        assert code == EXIT_CONFIG and "hyperbolic" in rep["error"]


class TestSubcommands:
    def test_check_concavity_pass(self, capsys):
        code, rep = run(capsys, ["check-concavity", "--model", "cauchy-2", "--trials", "3000"])
        assert code == EXIT_PASS and rep["pass"]

    def test_check_concavity_fail(self, capsys):
        # Cauchy is not log-concave
        code, _ = run(capsys, ["check-concavity", "--model", "cauchy-2", "--alpha", "0",
                               "--trials", "3000"])
        assert code == EXIT_FAIL

    def test_budget_exit(self, capsys):
        code, _ = run(capsys, ["dilate", "--model", "uniform-square", "--set", "ball:0.2",
                               "--delta", "0.5", "--samples", "10"])
        assert code == EXIT_NUMERIC

    def test_dilate_intervals(self, capsys):
        code, rep = run(capsys, ["dilate", "--set", "intervals:[[0, 0.1]]", "--delta", "0.2"])
        assert code == EXIT_PASS
        assert rep["result"]["measure"] == pytest.approx(0.5)

    def test_dilate_not_ball(self, capsys):
        code, rep = run(capsys, ["dilate", "--model", "cauchy-2", "--set", "not-ball:1",
                                 "--delta", "0.5", "--samples", "4000"])
        assert code == EXIT_PASS
        assert rep["result"]["contraction"]["scale"] == pytest.approx(3.0)

    @pytest.mark.parametrize("ineq", ["duality", "rate", "deviation"])
    def test_verify(self, capsys, ineq):
        code, rep = run(capsys, ["verify", "--inequality", ineq, "--alpha", "-1",
                                 "--model", "cauchy-2", "--trials", "50", "--samples", "20000",
                                 "--r", "3", "--epsilon", "0.2"])
        assert code == EXIT_PASS, rep["error"]

    def test_verify_dilation(self, capsys):
        code, rep = run(capsys, ["verify", "--inequality", "dilation", "--model", "cauchy-2",
                                 "--set", "not-ball:1", "--delta", "0.5", "--samples", "20000"])
        assert code == EXIT_PASS and rep["pass"]

    def test_localize_files(self, capsys, tmp_path):
        out = tmp_path / "loc.json"
        code = main(["localize", "--model", "uniform-square", "--u", "const:1",
                     "--v", "affine:0.1,1,0", "--out", str(out)], environ={})
        assert code == EXIT_PASS
        rep = json.loads(out.read_text())
        trace = (tmp_path / "loc.trace.jsonl").read_text().splitlines()
        assert len(trace) == rep["result"]["steps"] + 1
        assert json.loads((tmp_path / "loc.needle.json").read_text())["alpha"] is not None


def test_deterministic_apart_from_timestamp(capsys):
    argv = ["dilate", "--model", "uniform-square", "--set", "ball:0.2", "--delta", "0.5",
            "--samples", "3000"]
    _, a = run(capsys, argv)
    _, b = run(capsys, argv)
    a.pop("timestamp"), b.pop("timestamp")
    assert a == b
