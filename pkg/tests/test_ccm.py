import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from donorscreen import (
    CcmConfig,
    DataError,
    EmbeddingConfig,
    NeighborSet,
    UsageError,
    ccm_curve,
    ccm_score,
    convergence_diagnostic,
    cross_map_estimate,
    cross_map_weights,
    delay_embed,
    find_neighbors,
    series,
)
from donorscreen.ccm import CcmCurve, write_curve_csv


def cfg_for(library_sizes, d=2, tau=1, mode="holdout", normalize=False, theiler=None):
    return CcmConfig(
        embedding=EmbeddingConfig(d=d, tau=tau),
        library_sizes=tuple(library_sizes),
        prediction_mode=mode,
        theiler_window=theiler,
        normalize=normalize,
    )


def logistic_series(T, x0=0.37, r=3.9, burn=100):
    x = x0
    vals = []
    for _ in range(T + burn):
        x = r * x * (1.0 - x)
        vals.append(x)
    return series(vals[burn:])


class TestFindNeighbors:
    def test_monotone_ramp_picks_last_library_points(self):
        # strictly increasing series: closest embedded vectors to a point just
        # past the library end are the latest library points
        s = series(np.arange(30.0))
        e = delay_embed(s, EmbeddingConfig(d=2, tau=1))
        library = [t for t in e.base_times if t <= 19]
        got = find_neighbors(e, 20, library)
        # brute-force oracle
        target = e.vectors[e.row_of(20)]
        dists = sorted(
            (float(np.linalg.norm(e.vectors[e.row_of(t)] - target)), t) for t in library
        )
        expected = [t for _, t in dists[:3]]
        assert list(got.indices) == expected
        assert set(got.indices) == {17, 18, 19}

    def test_tie_breaks_toward_earlier_time(self):
        # periodic series puts several library vectors at identical distance
        s = series([0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.5])
        e = delay_embed(s, EmbeddingConfig(d=2, tau=1))
        got = find_neighbors(e, 8, [t for t in e.base_times if t <= 7])
        # vectors at base 2, 4, 6 are identical; earliest must rank first
        first_tied = [t for t in got.indices if t in (2, 4, 6)]
        assert first_tied == sorted(first_tied)

    def test_exclusion_radius(self):
        rng = np.random.default_rng(5)
        s = series(rng.normal(size=40))
        e = delay_embed(s, EmbeddingConfig(d=2, tau=1))
        t = 20
        got = find_neighbors(e, t, list(e.base_times), exclude_radius=3)
        assert np.all(np.abs(got.indices - t) > 3)

    def test_too_few_points(self):
        s = series(np.arange(10.0))
        e = delay_embed(s, EmbeddingConfig(d=3, tau=1))
        with pytest.raises(DataError, match="eligible"):
            find_neighbors(e, 9, [2, 3])

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        s = series(rng.normal(size=50))
        e = delay_embed(s, EmbeddingConfig(d=3, tau=1))
        lib = list(e.base_times[:-5])
        a = find_neighbors(e, 48, lib)
        b = find_neighbors(e, 48, lib)
        np.testing.assert_array_equal(a.indices, b.indices)
        np.testing.assert_array_equal(a.distances, b.distances)


class TestCrossMapWeights:
    def test_hand_computed_values(self):
        n = NeighborSet(target_time=9, indices=[1, 2, 3], distances=[1.0, 2.0, 3.0])
        w = cross_map_weights(n)
        np.testing.assert_allclose(w, [0.66524096, 0.24472847, 0.09003057], atol=1e-7)

    def test_equal_distances_uniform(self):
        n = NeighborSet(target_time=9, indices=[1, 2, 3], distances=[2.0, 2.0, 2.0])
        np.testing.assert_allclose(cross_map_weights(n), np.full(3, 1 / 3), atol=1e-15)

    def test_zero_distance_rule(self):
        n = NeighborSet(target_time=9, indices=[1, 2, 3], distances=[0.0, 0.0, 5.0])
        np.testing.assert_allclose(cross_map_weights(n), [0.5, 0.5, 0.0], atol=1e-15)

    @given(
        st.lists(st.floats(min_value=1e-6, max_value=1e6), min_size=2, max_size=8),
        st.floats(min_value=1e-3, max_value=1e3),
    )
    def test_normalization_and_scale_invariance(self, dists, c):
        d = np.sort(np.asarray(dists))
        n1 = NeighborSet(target_time=0, indices=np.arange(1, len(d) + 1), distances=d)
        n2 = NeighborSet(target_time=0, indices=np.arange(1, len(d) + 1), distances=c * d)
        w1, w2 = cross_map_weights(n1), cross_map_weights(n2)
        assert abs(w1.sum() - 1.0) < 1e-12
        np.testing.assert_allclose(w1, w2, atol=1e-12)


class TestCrossMapEstimate:
    def test_uniform_average(self):
        n = NeighborSet(target_time=5, indices=[0, 1], distances=[1.0, 1.0])
        got = cross_map_estimate(n, np.array([0.5, 0.5]), series([2.0, 4.0, 9.0]))
        assert got == pytest.approx(3.0, abs=1e-15)

    def test_vertex_weight(self):
        n = NeighborSet(target_time=5, indices=[2, 0], distances=[0.5, 1.0])
        got = cross_map_estimate(n, np.array([1.0, 0.0]), series([7.0, 1.0, -3.0]))
        assert got == -3.0

    def test_convexity_property(self):
        rng = np.random.default_rng(7)
        target = series(rng.normal(size=50))
        for _ in range(1000):
            k = int(rng.integers(2, 6))
            idx = rng.choice(50, size=k, replace=False)
            raw = np.sort(rng.uniform(0.1, 5.0, size=k))
            n = NeighborSet(target_time=0, indices=idx, distances=raw)
            w = cross_map_weights(n)
            est = cross_map_estimate(n, w, target)
            sel = target.values[idx]
            assert sel.min() - 1e-12 <= est <= sel.max() + 1e-12


class TestCcmScore:
    def test_constant_target_scores_zero(self):
        rng = np.random.default_rng(8)
        src = series(rng.normal(size=40))
        tgt = series(np.full(40, 3.25))
        cfg = cfg_for([10], d=2)
        assert ccm_score(src, tgt, cfg, 10) == pytest.approx(0.0, abs=1e-12)

    def test_white_noise_reference_level(self):
        # frozen Monte-Carlo reference: independent N(0,1) pairs, T=500,
        # holdout L=400, d=2. The score hovers near E|N(0, 1+sum w^2)|
        # (about 0.88) and is far from zero.
        rng = np.random.default_rng(9)
        scores = []
        for _ in range(10):
            src = series(rng.normal(size=500))
            tgt = series(rng.normal(size=500))
            scores.append(ccm_score(src, tgt, cfg_for([400], d=2), 400))
        mean = float(np.mean(scores))
        assert 0.75 < mean < 1.05
        assert min(scores) > 0.5

    def test_holdout_full_library_rejected(self):
        s = series(np.arange(20.0))
        cfg = cfg_for([20], d=2)
        with pytest.raises(UsageError):
            ccm_score(s, s, cfg, 20)

    def test_source_affine_invariance(self):
        rng = np.random.default_rng(10)
        src = series(rng.normal(size=60))
        tgt = series(rng.normal(size=60))
        cfg = cfg_for([30], d=3)
        base = ccm_score(src, tgt, cfg, 30)
        moved = ccm_score(series(2.5 * src.values - 7.0), tgt, cfg, 30)
        assert moved == pytest.approx(base, abs=1e-10)

    def test_target_scale_equivariance(self):
        rng = np.random.default_rng(11)
        src = series(rng.normal(size=60))
        tgt = series(rng.normal(size=60))
        cfg = cfg_for([30], d=3)
        base = ccm_score(src, tgt, cfg, 30)
        scaled = ccm_score(src, series(4.0 * tgt.values), cfg, 30)
        assert scaled == pytest.approx(4.0 * base, rel=1e-10)

    def test_normalization_flag_applies_zscore(self):
        rng = np.random.default_rng(12)
        src = series(rng.normal(size=60))
        tgt = series(rng.normal(size=60))
        cfg_raw = cfg_for([30], d=3, normalize=False)
        cfg_norm = cfg_for([30], d=3, normalize=True)
        raw_on_scaled = ccm_score(src, series(10.0 * tgt.values + 3), cfg_norm, 30)
        normed = ccm_score(src, tgt, cfg_norm, 30)
        assert raw_on_scaled == pytest.approx(normed, rel=1e-10)
        assert ccm_score(src, tgt, cfg_raw, 30) != pytest.approx(normed, rel=1e-3)


class TestCcmCurve:
    def test_self_map_scores_near_zero_at_large_L(self):
        s = logistic_series(500)
        cfg = cfg_for([50, 150, 300, 450], d=2, mode="leave_one_out", normalize=False)
        curve = ccm_curve(s, s, cfg)
        assert curve.mae_source_to_target[-1] < 0.01
        assert curve.mae_target_to_source[-1] < 0.01

    def test_degenerate_grid(self):
        rng = np.random.default_rng(13)
        src, tgt = series(rng.normal(size=40)), series(rng.normal(size=40))
        curve = ccm_curve(src, tgt, cfg_for([20], d=2))
        assert len(curve.mae_source_to_target) == 1
        assert len(curve.mae_target_to_source) == 1

    def test_row_count_in_export(self, tmp_path):
        rng = np.random.default_rng(14)
        src, tgt = series(rng.normal(size=40)), series(rng.normal(size=40))
        curve = ccm_curve(src, tgt, cfg_for([10, 20, 30], d=2))
        out = tmp_path / "c.csv"
        write_curve_csv(curve, out)
        lines = out.read_text().splitlines()
        assert len(lines) == 1 + 2 * 3
        assert lines[0] == "L,direction,mae"

    def test_threads_bit_identical(self):
        rng = np.random.default_rng(15)
        src, tgt = series(rng.normal(size=80)), series(rng.normal(size=80))
        cfg = cfg_for([20, 40, 60], d=3)
        a = ccm_curve(src, tgt, cfg, threads=1)
        b = ccm_curve(src, tgt, cfg, threads=8)
        assert a.mae_source_to_target == b.mae_source_to_target
        assert a.mae_target_to_source == b.mae_target_to_source


class TestConvergenceDiagnostic:
    def test_min_and_gap(self):
        c = CcmCurve(
            pair=("a", "b"),
            library_sizes=(10, 20),
            mae_source_to_target=(0.9, 0.2),
            mae_target_to_source=(0.8, 0.5),
        )
        d = convergence_diagnostic(c)
        assert d.min_mae == pytest.approx(0.2)
        assert d.gap == pytest.approx(0.3)
        assert d.converged

    def test_identical_directions_zero_gap(self):
        c = CcmCurve(
            pair=("a", "b"),
            library_sizes=(10, 20),
            mae_source_to_target=(0.5, 0.4),
            mae_target_to_source=(0.5, 0.4),
        )
        assert convergence_diagnostic(c).gap == 0.0

    def test_rising_curve_not_converged(self):
        c = CcmCurve(
            pair=("a", "b"),
            library_sizes=(10, 20),
            mae_source_to_target=(0.4, 0.6),
            mae_target_to_source=(0.5, 0.4),
        )
        assert not convergence_diagnostic(c).converged


class TestConfigValidation:
    def test_min_library_size(self):
        with pytest.raises(UsageError, match="minimum"):
            cfg_for([5], d=3)   # needs (3-1)*1 + 4 = 6

    def test_ascending_required(self):
        with pytest.raises(UsageError, match="ascending"):
            cfg_for([10, 10], d=2)

    def test_default_theiler_window(self):
        cfg = cfg_for([12], d=3, tau=2)
        assert cfg.theiler_window == 4
