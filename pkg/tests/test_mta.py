import pytest

from granrtc.curves import INF, XiCurvePair, write_curve
from granrtc.engine import run_component
from granrtc.mta import (
    InvalidSpec,
    Kind,
    Mode,
    MtaFormatError,
    MtaSpec,
    MtaTransition,
    check_spec,
    coarse_thresholds,
    format_mta,
    parse_mta,
    read_mta,
    sleep_run_spec,
    translate_coarse,
    translate_fine,
    validate_spec,
)
from tinycases import tiny_cases

RUN = XiCurvePair([1, 2, 3], [2, 4, 6])


def derived_window(level, g):
    """Coarse counts Q compatible with a fine count ``level``: g(Q-1) < level < g(Q+1)."""
    return [Q for Q in range(0, level + 2) if g * (Q - 1) < level < g * (Q + 1)]


class TestThresholds:
    def test_crossing_between_second_and_third_coarse_event(self):
        th = coarse_thresholds(1, 12, 5)
        assert (th.YL, th.YU) == (2, 3)

    def test_small(self):
        th = coarse_thresholds(1, 4, 3)
        assert (th.YL, th.YU) == (1, 2)

    @pytest.mark.parametrize("b", [1, 4, 9, 17])
    def test_granularity_one_collapses(self, b):
        th = coarse_thresholds(b, b, 1)
        assert th.YL == th.YU == b + 1 and th.HL == th.HU == b - 1

    def test_against_sandwich_derivation(self):
        for g in range(1, 9):
            for b in range(1, 31):
                th = coarse_thresholds(b, b, g)
                assert th.YL <= th.YU <= th.YL + 1 and th.HL <= th.HU <= th.HL + 1
                for Q in derived_window(b + 1, g):
                    assert th.YL <= Q <= th.YU
                for Q in derived_window(b - 1, g):
                    assert th.HL <= Q <= th.HU

    def test_unbounded_high(self):
        assert coarse_thresholds(0, INF, 3).YL == INF

    def test_bad_granularity(self):
        with pytest.raises(ValueError):
            coarse_thresholds(1, 4, 0)


class TestValidateSpec:
    def test_sleep_run_is_valid(self):
        assert validate_spec(sleep_run_spec(RUN, 5)) == []

    def test_missing_target(self):
        spec = MtaSpec((Mode("a", RUN, transitions=(MtaTransition(Kind.SYNC, "zz", "s"),)),), "a")
        assert any("'zz' does not exist" in d for d in validate_spec(spec))

    def test_duplicate_ids_and_initial(self):
        spec = MtaSpec((Mode("a", RUN), Mode("a", RUN)), "b")
        diags = validate_spec(spec)
        assert any("duplicate mode id" in d for d in diags)
        assert any("initial mode" in d for d in diags)

    def test_two_timeouts(self):
        trs = (MtaTransition(Kind.TIMEOUT, "a"), MtaTransition(Kind.TIMEOUT, "a"))
        spec = MtaSpec((Mode("a", RUN, dwell_max=3, transitions=trs),), "a")
        assert any("more than one timeout" in d for d in validate_spec(spec))

    def test_backlog_order(self):
        spec = MtaSpec((Mode("a", RUN, backlog_low=3, backlog_high=2),), "a")
        assert any("blow > bhigh" in d for d in validate_spec(spec))

    def test_dwell_order(self):
        spec = MtaSpec((Mode("a", RUN, dwell_min=4, dwell_max=2,
                             transitions=(MtaTransition(Kind.TIMEOUT, "a"),)),), "a")
        assert any("dwell bounds" in d for d in validate_spec(spec))

    def test_timeout_needs_finite_dwell(self):
        spec = MtaSpec((Mode("a", RUN, transitions=(MtaTransition(Kind.TIMEOUT, "a"),)),), "a")
        assert any("finite dwell" in d for d in validate_spec(spec))

    def test_below_needs_positive_low(self):
        spec = MtaSpec((Mode("a", RUN, transitions=(MtaTransition(Kind.BELOW, "a"),)),), "a")
        assert any("blow >= 1" in d for d in validate_spec(spec))

    def test_service_must_progress(self):
        spec = MtaSpec((Mode("a", XiCurvePair([0, 1], [1, 2])),), "a")
        assert any("lower[1] must be >= 1" in d for d in validate_spec(spec))

    def test_check_raises(self):
        with pytest.raises(InvalidSpec):
            check_spec(MtaSpec((Mode("a", RUN),), "b"))


class TestTranslation:
    def test_fine_sleep_run_shape(self):
        net = translate_fine(sleep_run_spec(RUN, 5))
        assert net.pe_states == ("S_sleep", "S_sleep1", "S_run", "S_run1")
        assert len(net.sm_generators) == 2

    def test_single_mode(self):
        net = translate_fine(MtaSpec((Mode("m", RUN),), "m"))
        assert net.pe_states == ("S_m", "S_m1")
        assert all(src != "S_m1" for src, _, _ in net.pe_edges)

    def test_coarse_states_and_window(self):
        net = translate_coarse(sleep_run_spec(RUN, 5), 3)
        assert "S_sleep_inc" in net.pe_states and "S_run_dec" in net.pe_states
        sleep = net.modes[0]
        assert (sleep.thresholds.YL, sleep.thresholds.YU) == (1, 2)
        assert net.modes[1].trans_window == (RUN.lower[0], RUN.upper[2])
        assert net.modes[1].service.lower == (3,)

    def test_coarse_initial_backlog(self):
        spec = MtaSpec((Mode("m", RUN),), "m", 6)
        assert translate_coarse(spec, 3).initial_backlog == 2
        with pytest.raises(ValueError):
            translate_coarse(spec, 4)

    def test_granularity_one_matches_fine(self):
        for case in tiny_cases(8):
            fine = run_component(translate_fine(case.spec), case.arrival, 1, 5, case.horizon).curve
            coarse = run_component(translate_coarse(case.spec, 1), case.arrival, 1, 5, case.horizon).curve
            assert fine == coarse


MODEL = """\
# two modes
mode sleep
  service=none
  bhigh=4
  on above -> run
mode run
  service=run.xi
  blow=1
  dwell=[0,inf]
  on below -> sleep
initial sleep q=0
"""


class TestFormat:
    def test_parse(self, tmp_path):
        write_curve(RUN, tmp_path / "run.xi")
        spec = parse_mta(MODEL, tmp_path)
        assert spec == sleep_run_spec(RUN, 5)

    def test_round_trip(self, tmp_path):
        write_curve(RUN, tmp_path / "run.xi")
        spec = sleep_run_spec(RUN, 5)
        (tmp_path / "m.mta").write_text(format_mta(spec, {"run": "run.xi"}))
        assert read_mta(tmp_path / "m.mta") == spec

    def test_error_line(self, tmp_path):
        with pytest.raises(MtaFormatError) as err:
            parse_mta("mode a\n  service=none\n  speed=3\ninitial a q=0\n", tmp_path)
        assert err.value.line == 3

    def test_missing_curve_file(self, tmp_path):
        with pytest.raises(MtaFormatError):
            parse_mta("mode a\n  service=nope.xi\ninitial a q=0\n", tmp_path)

    def test_missing_initial(self, tmp_path):
        with pytest.raises(MtaFormatError):
            parse_mta("mode a\n  service=none\n", tmp_path)
