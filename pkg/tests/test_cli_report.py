import json

import pytest

from subgauss.cli_report import (
    emit_report,
    parse_config,
    run_cli,
)
from subgauss.errors import IoError, SchemaError, ValidationError
from subgauss.experiments import ExperimentReport, ReportRow, report_metadata

CX_ARGS = ["counterexample", "--dims", "8,16,64", "--samples", "20000", "--seed", "7"]


def tiny_report(passed=True):
    rows = (ReportRow("wishart", 16, None, "kappa_median", 30.0),
            ReportRow("wishart", 16, None, "kappa_exceed_rate",
                      0.0 if passed else 0.5, bound=0.01))
    return ExperimentReport("wishart", rows, report_metadata("wishart", 1, {}))


class TestParseConfig:
    def test_valid_counterexample(self):
        run = parse_config(
            '{"experiment":"counterexample","dims":[16,64,256],"samples":100000,"seed":7}')
        assert run.experiment == "counterexample"
        assert run.parameters["dims"] == [16, 64, 256]
        assert run.seed == 7

    def test_kappa_below_one_rejected(self):
        with pytest.raises(ValidationError):
            parse_config('{"experiment":"theorem","kappas":[0.5]}')

    def test_unknown_key_named(self):
        with pytest.raises(SchemaError, match="kapa"):
            parse_config('{"experiment":"theorem","kapa":[1]}')

    def test_not_json(self):
        with pytest.raises(SchemaError):
            parse_config("dims: [16]")

    def test_missing_experiment(self):
        with pytest.raises(SchemaError, match="experiment"):
            parse_config('{"dims":[16]}')

    def test_wrong_type(self):
        with pytest.raises(ValidationError):
            parse_config('{"experiment":"counterexample","samples":"many"}')

    def test_seed_from_environment(self, monkeypatch):
        monkeypatch.setenv("SUBGAUSS_SEED", "99")
        run = parse_config('{"experiment":"wishart"}')
        assert run.seed == 99

    def test_seed_default_constant(self, monkeypatch):
        monkeypatch.delenv("SUBGAUSS_SEED", raising=False)
        run = parse_config('{"experiment":"wishart"}')
        assert run.seed == 42

    def test_round_trip_through_echo(self):
        original = parse_config(
            '{"experiment":"counterexample","dims":[8,16,64],"samples":20000,"seed":3}')
        again = parse_config(json.dumps(original.echo()))
        assert again == original

    def test_all_experiment_builds_every_config(self):
        from subgauss.cli_report import build_experiment_configs

        run = parse_config('{"experiment":"all","seed":1}')
        configs = build_experiment_configs(run)
        assert set(configs) == {"theorem", "corollary", "wishart", "counterexample"}

    def test_all_experiment_rejects_parameter_keys(self):
        with pytest.raises(SchemaError):
            parse_config('{"experiment":"all","dims":[16]}')


class TestEmitReport:
    def test_csv_plus_sidecar_plus_curves(self, tmp_path):
        paths = emit_report(tiny_report(), "csv", tmp_path)
        names = {p.name for p in paths}
        assert names == {"wishart.csv", "wishart.json", "wishart_curves.csv"}
        header = (tmp_path / "wishart.csv").read_text().splitlines()[0]
        assert header == "experiment,n,kappa,estimator,value,ci_low,ci_high,bound,pass"

    def test_empty_report_header_only(self, tmp_path):
        report = ExperimentReport("wishart", (), report_metadata("wishart", 1, {}))
        emit_report(report, "csv", tmp_path)
        assert len((tmp_path / "wishart.csv").read_text().splitlines()) == 1

    def test_json_format_embeds_rows(self, tmp_path):
        (path,) = emit_report(tiny_report(), "json", tmp_path)
        doc = json.loads(path.read_text())
        assert doc["row_count"] == 2
        assert doc["rows"][0]["estimator"] == "kappa_median"

    def test_refuses_overwrite_without_force(self, tmp_path):
        emit_report(tiny_report(), "csv", tmp_path)
        with pytest.raises(IoError, match="force"):
            emit_report(tiny_report(), "csv", tmp_path)

    def test_force_overwrites(self, tmp_path):
        emit_report(tiny_report(), "csv", tmp_path)
        emit_report(tiny_report(), "csv", tmp_path, force=True)

    def test_unwritable_target_raises_io_error(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(IoError):
            emit_report(tiny_report(), "csv", blocker / "sub")

    def test_sidecar_carries_config_echo(self, tmp_path):
        emit_report(tiny_report(), "csv", tmp_path,
                    run_config_echo={"experiment": "wishart", "seed": 1})
        doc = json.loads((tmp_path / "wishart.json").read_text())
        assert doc["run_config"]["experiment"] == "wishart"


class TestRunCli:
    def test_selftest_exit_zero(self, capsys):
        assert run_cli(["selftest"]) == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 4

    def test_counterexample_writes_reports(self, tmp_path, capsys):
        code = run_cli(CX_ARGS + ["--out", str(tmp_path / "a")])
        assert code == 0
        assert (tmp_path / "a" / "counterexample.csv").exists()

    def test_byte_identical_across_seeds_and_threads(self, tmp_path):
        run_cli(CX_ARGS + ["--out", str(tmp_path / "a")])
        run_cli(CX_ARGS + ["--out", str(tmp_path / "b"), "--threads", "4"])
        a = (tmp_path / "a" / "counterexample.csv").read_bytes()
        b = (tmp_path / "b" / "counterexample.csv").read_bytes()
        assert a == b

    def test_seed_changes_output(self, tmp_path):
        # counterexample values are exact closed forms, so probe seed
        # sensitivity on an experiment with genuine sampling noise
        base = ["wishart", "--dims", "16", "--trials", "100"]
        run_cli(base + ["--seed", "7", "--out", str(tmp_path / "a")])
        run_cli(base + ["--seed", "8", "--out", str(tmp_path / "c")])
        a = (tmp_path / "a" / "wishart.csv").read_bytes()
        c = (tmp_path / "c" / "wishart.csv").read_bytes()
        assert a != c

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text('{"experiment":"counterexample","dims":[8,16,64],"samples":20000}')
        code = run_cli(["counterexample", "--config", str(cfg), "--seed", "7",
                        "--out", str(tmp_path / "out")])
        assert code == 0

    def test_usage_error_exit_64(self):
        assert run_cli(["bogus"]) == 64

    def test_validation_error_exit_64(self):
        assert run_cli(["theorem", "--kappas", "0.5"]) == 64

    def test_schema_error_exit_64(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"experiment":"theorem","kapa":[1]}')
        assert run_cli(["theorem", "--config", str(cfg)]) == 64

    def test_overwrite_refusal_exit_2(self, tmp_path):
        out = str(tmp_path / "a")
        assert run_cli(CX_ARGS + ["--out", out]) == 0
        assert run_cli(CX_ARGS + ["--out", out]) == 2
        assert run_cli(CX_ARGS + ["--out", out, "--force"]) == 0

    def test_bound_violation_exit_1(self, tmp_path, monkeypatch):
        import subgauss.cli_report as cli

        monkeypatch.setattr(cli, "run_experiments",
                            lambda run, threads=1: [tiny_report(passed=False)])
        assert run_cli(CX_ARGS + ["--out", str(tmp_path / "x")]) == 1

    def test_threads_env_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SUBGAUSS_THREADS", "2")
        assert run_cli(CX_ARGS + ["--out", str(tmp_path / "env")]) == 0

    def test_config_for_other_experiment_rejected(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text('{"experiment":"wishart"}')
        assert run_cli(["counterexample", "--config", str(cfg)]) == 64
