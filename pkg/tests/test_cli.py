import csv
from importlib.resources import files

import pytest

from granrtc.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_MISMATCH, EXIT_OK, main
from granrtc.curves import XiCurvePair, parse_curve, validate, write_curve
from granrtc.mta import format_mta, sleep_run_spec

ARRIVAL = XiCurvePair([1, 3, 5, 7], [3, 5, 8, 10])
RUN = XiCurvePair([1, 2, 3, 4], [2, 4, 6, 8])


@pytest.fixture
def bundle(tmp_path):
    write_curve(ARRIVAL, tmp_path / "arrival.xi")
    write_curve(RUN, tmp_path / "run.xi")
    (tmp_path / "model.mta").write_text(format_mta(sleep_run_spec(RUN, 2), {"run": "run.xi"}))
    return tmp_path


def args(bundle, *extra):
    return ["--model", str(bundle / "model.mta"), "--arrival", str(bundle / "arrival.xi"),
            "--out", str(bundle / "out"), *extra]


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestValidate:
    def test_valid_bundle(self, bundle, capsys):
        assert main(["validate", *args(bundle)]) == EXIT_OK
        assert "ok" in capsys.readouterr().out

    def test_lower_above_upper(self, bundle, capsys):
        (bundle / "arrival.xi").write_text("xi g=1 N=2\n1 3 2\n2 4 5\n")
        assert main(["validate", *args(bundle)]) == EXIT_INVALID
        assert "lower[1] > upper[1]" in capsys.readouterr().err

    def test_missing_target(self, bundle, capsys):
        text = (bundle / "model.mta").read_text().replace("-> run", "-> nowhere")
        (bundle / "model.mta").write_text(text)
        assert main(["validate", *args(bundle)]) == EXIT_INVALID
        assert "'nowhere' does not exist" in capsys.readouterr().err

    def test_parse_error_has_position(self, bundle, capsys):
        (bundle / "model.mta").write_text("mode a\n  service=none\n  bogus\ninitial a q=0\n")
        assert main(["validate", *args(bundle)]) == EXIT_INVALID
        assert "line 3" in capsys.readouterr().err

    def test_unreadable(self, bundle):
        (bundle / "arrival.xi").unlink()
        assert main(["validate", *args(bundle)]) == EXIT_INVALID

    def test_bundled_example(self, capsys):
        data = files("granrtc") / "data"
        code = main(["validate", "--model", str(data / "sleep_run.mta"), "--arrival", str(data / "arrival.xi"),
                     "--granularities", "1,2,3,4", "--points", "6"])
        assert code == EXIT_OK

    def test_bad_granularities(self, bundle):
        with pytest.raises(SystemExit):
            main(["validate", *args(bundle, "--granularities", "2,2")])


class TestAnalyze:
    def test_files_written(self, bundle):
        assert main(["analyze", *args(bundle, "--granularities", "1,2", "--points", "4",
                                      "--horizon", "20")]) == EXIT_OK
        out = bundle / "out"
        for name in ("curve_g1", "curve_g2", "combined", "combined_closed"):
            rows = read_csv(out / f"{name}.csv")
            assert rows and list(rows[0]) == ["k", "lower", "upper"]
            assert (out / f"{name}_lower.dat").exists() and (out / f"{name}_upper.dat").exists()
        summary = (out / "summary.txt").read_text()
        assert "config_hash=" in summary and "version=" in summary and "distance=" in summary

    def test_single_granularity_without_closure(self, bundle):
        assert main(["analyze", *args(bundle, "--points", "3", "--horizon", "20", "--no-closure")]) == EXIT_OK
        out = bundle / "out"
        assert read_csv(out / "combined.csv") == read_csv(out / "curve_g1.csv")
        assert not (out / "combined_closed.csv").exists()

    def test_reproducible(self, bundle):
        opts = ("--granularities", "1,2", "--points", "4", "--horizon", "16")
        main(["analyze", *args(bundle, *opts)])
        first = {p.name: p.read_text() for p in (bundle / "out").glob("*.csv")}
        main(["analyze", *args(bundle, *opts)])
        second = {p.name: p.read_text() for p in (bundle / "out").glob("*.csv")}
        assert first == second

    def test_curve_files_reparse(self, bundle):
        main(["analyze", *args(bundle, "--granularities", "1,2", "--points", "4", "--horizon", "16")])
        for path in (bundle / "out").glob("*.csv"):
            rows = read_csv(path)
            text = f"xi g=1 N={len(rows)}\n" + "".join(f"{r['k']} {r['lower']} {r['upper']}\n" for r in rows)
            assert validate(parse_curve(text)) == []

    def test_oracle_check_passes(self, bundle):
        assert main(["analyze", *args(bundle, "--points", "3", "--horizon", "10", "--oracle-check")]) == EXIT_OK
        assert "verdict=pass" in (bundle / "out" / "summary.txt").read_text()

    def test_oracle_check_refuses_large(self, bundle):
        code = main(["analyze", *args(bundle, "--points", "3", "--horizon", "40", "--oracle-check",
                                      "--oracle-events", "5")])
        assert code == EXIT_BUDGET

    def test_parallel_matches_serial(self, bundle):
        opts = ("--granularities", "1,2", "--points", "4", "--horizon", "16")
        main(["analyze", *args(bundle, *opts)])
        serial = read_curve_csvs(bundle / "out")
        main(["analyze", *args(bundle, *opts, "--jobs", "2")])
        assert read_curve_csvs(bundle / "out") == serial

    def test_granularity_larger_than_points(self, bundle):
        assert main(["analyze", *args(bundle, "--granularities", "4", "--points", "2")]) == EXIT_INVALID


def read_curve_csvs(out):
    return {p.name: p.read_text() for p in out.glob("*.csv")}


class TestOracleCommand:
    def test_wire(self, bundle, capsys):
        code = main(["oracle", "--model", "wire", "--arrival", str(bundle / "arrival.xi"),
                     "--points", "3", "--horizon", "10"])
        assert code == EXIT_OK
        assert capsys.readouterr().out.strip().endswith("pass")

    def test_tiny_component(self, bundle, capsys):
        assert main(["oracle", *args(bundle, "--points", "3", "--horizon", "10")]) == EXIT_OK

    def test_oversized(self, bundle, capsys):
        code = main(["oracle", *args(bundle, "--points", "3", "--horizon", "60")])
        assert code == EXIT_BUDGET
        assert "refused" in capsys.readouterr().err


def test_mismatch_exit_code(bundle, monkeypatch):
    import granrtc.cli as cli

    def wrong(*a, **k):
        return [0, 0, 0], [0, 0, 0]

    monkeypatch.setattr(cli, "oracle_output_windows", wrong)
    assert main(["oracle", *args(bundle, "--points", "3", "--horizon", "10")]) == EXIT_MISMATCH
