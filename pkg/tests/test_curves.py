import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from granrtc.curves import (
    INF,
    AlphaCurvePair,
    CoarseCurveSet,
    CurveFormatError,
    EmptyStreamSet,
    XiCurvePair,
    alpha_from_xi,
    causality_closure,
    combine,
    distance,
    format_curve,
    normalize_windows,
    parse_curve,
    read_curve,
    sample,
    validate,
    write_csv,
    write_curve,
    write_gnuplot,
    xi_from_alpha,
)


@st.composite
def curve_pairs(draw, max_n=4, top=8):
    n = draw(st.integers(1, max_n))
    lo = sorted(draw(st.lists(st.integers(0, top), min_size=n, max_size=n)))
    up = sorted(draw(st.lists(st.integers(0, top), min_size=n, max_size=n)))
    up = [max(a, b) for a, b in zip(lo, up)]
    up = [up[0]] + [max(up[i], up[i - 1]) for i in range(1, n)]
    return XiCurvePair(lo, up)


class TestValidate:
    def test_valid(self):
        assert validate(XiCurvePair([1, 2, 3], [2, 4, 6])) == []

    def test_lower_decreasing(self):
        assert "lower not nondecreasing at k=2" in validate(XiCurvePair([3, 2, 1], [4, 4, 4]))

    def test_lower_above_upper(self):
        assert "lower[1] > upper[1]" in validate(XiCurvePair([2, 3], [1, 5]))

    def test_unbounded_upper_allowed(self):
        assert validate(XiCurvePair([1, 2], [5, INF])) == []

    def test_negative(self):
        assert "lower[1] < 0" in validate(XiCurvePair([-1, 2], [5, 6]))

    def test_pair_accessors(self):
        x = XiCurvePair([1, 2], [3, INF])
        assert x.N == 2
        assert x.lower_at(0) == 0 and x.upper_at(3) == INF
        assert x.upper_at(2) == INF


class TestAlphaConversion:
    def test_identity_stream(self):
        a = AlphaCurvePair(list(range(11)), list(range(11)))
        x = xi_from_alpha(a, 4)
        assert x.lower == (1, 2, 3, 4) and x.upper == (1, 2, 3, 4)

    def test_no_forced_events(self):
        a = AlphaCurvePair([0] * 6, [0, 1, 1, 2, 2, 3])
        assert xi_from_alpha(a, 1).upper == (INF,)

    def test_alpha_upper_from_lower_curve(self):
        a = alpha_from_xi(XiCurvePair([2, 4], [3, 6]), 3)
        assert a.upper[3] == 1

    def test_identity_alpha(self):
        a = alpha_from_xi(XiCurvePair([1, 2, 3], [1, 2, 3]), 3)
        assert a.lower == (0, 1, 2, 3) and a.upper == (0, 1, 2, 3)

    def test_random_staircase_against_scan(self):
        rng = random.Random(3)
        for _ in range(50):
            lo = [0]
            up = [0]
            for _ in range(10):
                lo.append(lo[-1] + rng.randint(0, 1))
                up.append(max(lo[-1], up[-1] + rng.randint(0, 2)))
            a = AlphaCurvePair(lo, up)
            x = xi_from_alpha(a, 4)
            for k in range(1, 5):
                hits = [d for d in range(11) if lo[d] >= k]
                assert x.upper[k - 1] == (min(hits) if hits else INF)
                hits = [d for d in range(11) if up[d] >= k]
                assert x.lower[k - 1] == (min(hits) if hits else 11)

    @given(curve_pairs())
    def test_round_trip_within_bounds(self, x):
        back = xi_from_alpha(alpha_from_xi(x, 12), x.N)
        for k in range(x.N):
            if 0 < x.upper[k] <= 12:
                assert back.upper[k] == x.upper[k]
            if x.lower[k] <= 12:
                assert back.lower[k] == x.lower[k]

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            xi_from_alpha(AlphaCurvePair([1, 1], [1, 2]), 1)


class TestSample:
    def test_identity(self):
        x = XiCurvePair([1, 2, 3], [2, 4, 6])
        assert sample(x, 1) == x

    def test_picks_multiples(self):
        x = XiCurvePair(list(range(1, 10)), list(range(11, 20)))
        s = sample(x, 3)
        assert s.lower == (3, 6, 9) and s.upper == (13, 16, 19) and s.granularity == 3

    def test_floor_length(self):
        x = XiCurvePair(list(range(1, 8)), list(range(2, 9)))
        assert sample(x, 3).N == 2

    def test_bad_granularity(self):
        with pytest.raises(ValueError):
            sample(XiCurvePair([1], [2]), 0)


class TestCombine:
    def test_two_coarse_points(self):
        # only the k=2 points are known; k=1 takes the loosest monotone value
        s = CoarseCurveSet([(10, XiCurvePair([50, 100], [111, 111])),
                            (9, XiCurvePair([45, 90], [108, 108]))])
        assert combine(s, 10).upper[9] == 108

    def test_single_fine_entry(self):
        x = XiCurvePair([1, 3, 4], [2, 5, 7])
        assert combine(CoarseCurveSet([(1, x)]), 3) == x

    def test_against_lattice(self):
        a = XiCurvePair([2, 5, 7], [4, 8, 11])
        b = XiCurvePair([4, 8, 13], [7, 11, 16])
        c = combine(CoarseCurveSet([(2, a), (3, b)]), 9)
        for n in range(1, 10):
            ups = [p.upper[k - 1] for g, p in ((2, a), (3, b)) for k in range(1, 4) if k * g >= n]
            los = [p.lower[k - 1] for g, p in ((2, a), (3, b)) for k in range(1, 4) if k * g <= n]
            assert c.upper[n - 1] == (min(ups) if ups else INF)
            assert c.lower[n - 1] == (max(los) if los else 0)

    def test_adding_entry_never_loosens(self):
        a = XiCurvePair([2, 5, 7], [4, 8, 11])
        b = XiCurvePair([4, 8, 13], [7, 11, 16])
        one = combine(CoarseCurveSet([(2, a)]), 6)
        two = combine(CoarseCurveSet([(2, a), (3, b)]), 6)
        assert all(t <= o for t, o in zip(two.upper, one.upper))
        assert all(t >= o for t, o in zip(two.lower, one.lower))

    def test_empty_set(self):
        with pytest.raises(ValueError):
            combine(CoarseCurveSet([]), 3)

    def test_duplicate_granularity(self):
        x = XiCurvePair([1], [2])
        with pytest.raises(ValueError):
            CoarseCurveSet([(2, x), (2, x)])


class TestClosure:
    def test_already_tight(self):
        x = XiCurvePair([2, 4, 6], [2, 4, 6])
        assert causality_closure(x) == x

    def test_three_point_example_is_tight(self):
        # (0, 1, 2, 6) satisfies the pair, so no bound can move
        x = XiCurvePair([1, 2, 6], [4, 5, 7])
        assert causality_closure(x) == x

    def test_window_one_interval(self):
        x = XiCurvePair([1, 2, 9], [6, 7, 10])
        c = causality_closure(x)
        assert c.upper[0] <= min(6, 10 - 2)
        assert c.lower[0] >= max(1, 9 - 7)

    def test_empty_stream_set(self):
        with pytest.raises(EmptyStreamSet):
            causality_closure(XiCurvePair([3, 4], [3, 5]))

    @settings(max_examples=200)
    @given(curve_pairs())
    def test_tighter_and_idempotent(self, x):
        try:
            c = causality_closure(x)
        except EmptyStreamSet:
            return
        assert all(a >= b for a, b in zip(c.lower, x.lower))
        assert all(a <= b for a, b in zip(c.upper, x.upper))
        assert causality_closure(c) == c
        for a, b in itertools.product(range(1, c.N + 1), repeat=2):
            if a + b <= c.N:
                assert c.lower[a + b - 1] >= c.lower[a - 1] + c.lower[b - 1]
                assert c.upper[a + b - 1] <= c.upper[a - 1] + c.upper[b - 1]


class TestDistance:
    def test_sampled_is_zero(self):
        x = XiCurvePair(list(range(1, 7)), list(range(2, 8)))
        assert distance(x, sample(x, 2), 2, 3) == 0

    def test_unit_slack(self):
        x = XiCurvePair(list(range(2, 8)), list(range(4, 10)))
        s = sample(x, 2)
        loose = XiCurvePair([v - 1 for v in s.lower], [v + 1 for v in s.upper], 2)
        d = distance(x, loose, 2, 3)
        assert d == 1 and isinstance(d, Fraction)

    def test_kmax_from_length(self):
        x = XiCurvePair(list(range(1, 25)), list(range(1, 25)))
        for g in (1, 2, 3, 5, 7):
            assert distance(x, sample(x, g), g, 24 // g) == 0

    def test_out_of_range(self):
        x = XiCurvePair([1, 2], [1, 2])
        with pytest.raises(IndexError):
            distance(x, sample(x, 2), 2, 2)

    def test_unbounded_gap(self):
        x = XiCurvePair([1, 2], [1, 2])
        assert distance(x, XiCurvePair([1], [INF], 2), 2, 1) == INF


class TestNormalize:
    def test_missing_points(self):
        x = normalize_windows([1, None, 5], [4, None, 3])
        assert x.lower == (1, 1, 5) and x.upper == (4, INF, INF)


class TestFiles:
    def test_round_trip(self, tmp_path):
        x = XiCurvePair([1, 3, 4], [2, 6, INF], 3)
        write_curve(x, tmp_path / "c.xi")
        assert read_curve(tmp_path / "c.xi") == x
        assert parse_curve(format_curve(x)) == x

    def test_bad_line_reports_position(self):
        with pytest.raises(CurveFormatError) as err:
            parse_curve("xi g=1 N=2\n1 1 2\n2 x 3\n")
        assert err.value.line == 3

    def test_csv_and_gnuplot(self, tmp_path):
        x = XiCurvePair([1, 3], [2, INF])
        write_csv(x, tmp_path / "c.csv")
        assert (tmp_path / "c.csv").read_text().splitlines()[0] == "k,lower,upper"
        write_gnuplot([(1, 2), (2, INF)], tmp_path / "u.dat")
        assert (tmp_path / "u.dat").read_text().splitlines()[0].split() == ["1", "2"]
