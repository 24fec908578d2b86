"""Input generators, record synthesis, and the CSV round trips."""

from __future__ import annotations

import numpy as np
import pytest

from srivc.ctlti import tf_from_theta
from srivc.holdsim import Hold, SampledSignal
from srivc.signals import (
    NoiseSpec,
    SampledRecord,
    analytic_multisine_output,
    drop_initial,
    gen_gaussian_noise,
    gen_multisine,
    gen_prbs,
    gen_random_binary,
    read_record,
    read_signal,
    synthesize_record,
    write_record,
    write_signal,
)

# sin(0.5) + sin(2) + sin(5) + sin(7), the default multisine at t = 1
MULTISINE_AT_1 = 1.086785289485536


class TestRandomBinary:
    def test_levels(self):
        u = gen_random_binary(1000, 2.5, seed=3)
        assert set(np.unique(u.values)) == {-2.5, 2.5}

    def test_deterministic_in_seed(self):
        a = gen_random_binary(500, 1.0, seed=9)
        b = gen_random_binary(500, 1.0, seed=9)
        c = gen_random_binary(500, 1.0, seed=10)
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_prefix_stable_in_length(self):
        # longer draws extend, never reshuffle, the shorter ones
        short = gen_random_binary(100, 1.0, seed=4)
        long = gen_random_binary(400, 1.0, seed=4)
        np.testing.assert_array_equal(long.values[:100], short.values)

    def test_nearly_white(self):
        u = gen_random_binary(10000, 1.0, seed=1).values
        for lag in (1, 2, 5):
            r = np.mean(u[:-lag] * u[lag:])
            assert abs(r) < 0.05

    def test_grid_passthrough(self):
        u = gen_random_binary(10, 1.0, seed=0, T=0.25, t0=3.0)
        assert u.T == 0.25
        assert u.t0 == 3.0
        assert u.times()[0] == 3.0

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            gen_random_binary(0)
        with pytest.raises(ValueError):
            gen_random_binary(10, amplitude=0.0)


class TestPrbs:
    def test_period_and_balance(self):
        # order 5 register: period 31, one extra high sample per period
        u = gen_prbs(93, 1.5, seed=2, order=5)
        period = u.values[:31]
        np.testing.assert_array_equal(u.values[31:62], period)
        np.testing.assert_array_equal(u.values[62:93], period)
        assert set(np.unique(period)) == {-1.5, 1.5}
        assert abs(np.sum(period)) == pytest.approx(1.5)

    def test_auto_order_is_smallest_covering(self):
        auto = gen_prbs(31, 1.0, seed=6)
        explicit = gen_prbs(31, 1.0, seed=6, order=5)
        np.testing.assert_array_equal(auto.values, explicit.values)

    def test_seed_shifts_phase(self):
        a = gen_prbs(31, 1.0, seed=0, order=5).values
        b = gen_prbs(31, 1.0, seed=1, order=5).values
        assert not np.array_equal(a, b)
        # same maximal-length cycle, different start: sorted content matches
        np.testing.assert_array_equal(np.sort(a), np.sort(b))

    def test_unsupported_order(self):
        with pytest.raises(ValueError, match="register length"):
            gen_prbs(10, order=8)


class TestMultisine:
    def test_zero_phase_at_origin(self):
        t = np.arange(50) * 0.1
        u = gen_multisine(t)
        assert u.values[0] == 0.0

    def test_amplitude_bound(self):
        t = np.arange(5000) * 0.01
        u = gen_multisine(t)
        assert np.max(np.abs(u.values)) <= 4.0

    def test_value_at_unit_time(self):
        t = np.arange(21) * 0.1
        u = gen_multisine(t)
        assert t[10] == 1.0
        np.testing.assert_allclose(u.values[10], MULTISINE_AT_1, atol=1e-9)

    def test_amplitude_broadcast(self):
        t = np.arange(30) * 0.1
        base = gen_multisine(t)
        doubled = gen_multisine(t, amplitudes=2.0)
        np.testing.assert_allclose(doubled.values, 2.0 * base.values, rtol=1e-15)

    def test_per_tone_amplitudes(self):
        t = np.arange(30) * 0.1
        u = gen_multisine(t, freqs=[1.0, 3.0], amplitudes=[2.0, 0.5])
        ref = 2.0 * np.sin(t) + 0.5 * np.sin(3.0 * t)
        np.testing.assert_allclose(u.values, ref, rtol=1e-15)

    def test_nonuniform_grid_rejected(self):
        with pytest.raises(ValueError, match="uniform"):
            gen_multisine([0.0, 0.1, 0.3])


class TestAnalyticOutput:
    def test_unity_system_passes_input_through(self):
        t = np.arange(200) * 0.05
        unit = tf_from_theta([1.0], 0, 0)
        u = gen_multisine(t)
        y = analytic_multisine_output(unit, t)
        np.testing.assert_array_equal(y.values, u.values)

    def test_single_tone_quadrature(self, canonical_system):
        # |G(j5)| = 1 with -90 degree phase, so sin(5t) comes out as -cos(5t)
        t = np.arange(400) * 0.02
        y = analytic_multisine_output(canonical_system, t, freqs=[5.0])
        np.testing.assert_allclose(y.values, -np.cos(5.0 * t), atol=1e-12)

    def test_requires_stable_system(self):
        t = np.arange(50) * 0.1
        with pytest.raises(ValueError, match="stable"):
            analytic_multisine_output(tf_from_theta([1.0, -1.0, 1.0], 2, 0), t)


class TestFineGridAgreement:
    """Simulated hold output converges to the closed-form stationary response.

    Comparisons skip the first six seconds so the simulation's start-up
    transient (decay rate 2.5) is below 1e-6 of the signal scale.
    """

    def _tail_deviation(self, system, T, hold):
        t = np.arange(int(round(12.0 / T)) + 1) * T
        u = gen_multisine(t)
        rec = synthesize_record(system, u, hold, NoiseSpec(0.0))
        ref = analytic_multisine_output(system, t)
        tail = t >= 6.0
        return np.max(np.abs(rec.y.values[tail] - ref.values[tail]))

    def test_zoh_fine_grid(self, canonical_system):
        assert self._tail_deviation(canonical_system, 1e-4, Hold.ZOH) < 1e-3

    def test_foh_fine_grid(self, canonical_system):
        assert self._tail_deviation(canonical_system, 1e-3, Hold.FOH) < 1e-5

    def test_zoh_coarse_grid_retains_offset(self, canonical_system):
        # the half-sample staircase lag shrinks only linearly with T
        assert self._tail_deviation(canonical_system, 1e-3, Hold.ZOH) > 1e-3


class TestGridConsistency:
    def test_multisine_shared_times_bitwise(self):
        coarse = gen_multisine(np.arange(101) * 0.1)
        fine = gen_multisine(np.arange(201) * 0.05)
        np.testing.assert_array_equal(fine.values[::2], coarse.values)

    def test_analytic_output_shared_times_bitwise(self, canonical_system):
        coarse = analytic_multisine_output(canonical_system, np.arange(101) * 0.1)
        fine = analytic_multisine_output(canonical_system, np.arange(201) * 0.05)
        np.testing.assert_array_equal(fine.values[::2], coarse.values)


class TestGaussianNoise:
    def test_sample_variance(self):
        e = gen_gaussian_noise(100000, NoiseSpec(0.5), seed=12)
        assert abs(np.var(e.values) / 0.5 - 1.0) < 0.05
        assert abs(np.mean(e.values)) < 0.01

    def test_zero_variance_exact_zeros(self):
        e = gen_gaussian_noise(100, NoiseSpec(0.0), seed=12)
        np.testing.assert_array_equal(e.values, np.zeros(100))

    def test_deterministic_in_seed(self):
        a = gen_gaussian_noise(100, NoiseSpec(1.0), seed=5)
        b = gen_gaussian_noise(100, NoiseSpec(1.0), seed=5)
        np.testing.assert_array_equal(a.values, b.values)

    def test_ar1_coloring(self):
        spec = NoiseSpec(1.0, ([1.0], [1.0, -0.9]))
        e = gen_gaussian_noise(100000, spec, seed=8).values
        r1 = np.mean(e[:-1] * e[1:]) / np.var(e)
        assert abs(r1 - 0.9) < 0.02

    def test_unstable_coloring_rejected(self):
        with pytest.raises(ValueError, match="unit circle"):
            NoiseSpec(1.0, ([1.0], [1.0, -1.0]))

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError, match="variance"):
            NoiseSpec(-0.1)


class TestSynthesizeRecord:
    def test_step_response_closed_form(self, canonical_system):
        wd = 5.0 * np.sqrt(3.0) / 2.0
        u = SampledSignal(values=np.ones(200), T=0.05)
        rec = synthesize_record(canonical_system, u, Hold.ZOH, NoiseSpec(0.0))
        t = u.times()
        ref = 1.0 - np.exp(-2.5 * t) * (np.cos(wd * t) + (2.5 / wd) * np.sin(wd * t))
        np.testing.assert_allclose(rec.y.values, ref, atol=1e-9)

    def test_zero_input_output_is_exactly_the_noise(self, canonical_system):
        u = SampledSignal(values=np.zeros(300), T=0.1)
        rec = synthesize_record(canonical_system, u, Hold.ZOH, NoiseSpec(0.25), seed=33)
        e = gen_gaussian_noise(300, NoiseSpec(0.25), seed=33, T=0.1)
        np.testing.assert_array_equal(rec.y.values, e.values)

    def test_superposition(self, canonical_system):
        rng = np.random.default_rng(14)
        ua = SampledSignal(values=rng.normal(size=150), T=0.1)
        ub = SampledSignal(values=rng.normal(size=150), T=0.1)
        usum = SampledSignal(values=ua.values + ub.values, T=0.1)
        ya = synthesize_record(canonical_system, ua, Hold.FOH, NoiseSpec(0.0)).y.values
        yb = synthesize_record(canonical_system, ub, Hold.FOH, NoiseSpec(0.0)).y.values
        ys = synthesize_record(canonical_system, usum, Hold.FOH, NoiseSpec(0.0)).y.values
        np.testing.assert_allclose(ys, ya + yb, atol=1e-12)

    def test_analytic_path_needs_frequencies(self, canonical_system):
        u = gen_multisine(np.arange(100) * 0.1)
        with pytest.raises(ValueError, match="frequencies"):
            synthesize_record(canonical_system, u, None, NoiseSpec(0.0))

    def test_analytic_meta_hold(self, canonical_system):
        u = gen_multisine(np.arange(100) * 0.1)
        rec = synthesize_record(
            canonical_system, u, None, NoiseSpec(0.0), analytic_freqs=(0.5, 2.0, 5.0, 7.0)
        )
        assert rec.meta.hold == "analytic"
        ref = analytic_multisine_output(canonical_system, u.times())
        np.testing.assert_array_equal(rec.y.values, ref.values)

    def test_meta_provenance(self, canonical_system):
        u = gen_random_binary(50, 1.0, seed=2, T=0.1)
        rec = synthesize_record(canonical_system, u, Hold.FOH, NoiseSpec(0.1), seed=44)
        assert rec.meta.system == "num:1.0;den:0.04,0.2,1.0"
        assert rec.meta.hold == "foh"
        assert rec.meta.variance == 0.1
        assert rec.meta.seed == 44
        assert rec.meta.N == 50
        assert rec.meta.T == 0.1

    def test_requires_stable_system(self):
        u = gen_random_binary(50, 1.0, seed=2)
        with pytest.raises(ValueError, match="stable"):
            synthesize_record(tf_from_theta([1.0, -2.0, 1.0], 2, 0), u, Hold.ZOH, NoiseSpec(0.0))


class TestDropInitial:
    def test_trims_and_shifts(self, canonical_system):
        u = gen_random_binary(100, 1.0, seed=1, T=0.1)
        rec = synthesize_record(canonical_system, u, Hold.ZOH, NoiseSpec(0.1), seed=2)
        trimmed = drop_initial(rec, 30)
        assert trimmed.N == 70
        np.testing.assert_array_equal(trimmed.u.values, rec.u.values[30:])
        np.testing.assert_array_equal(trimmed.y.values, rec.y.values[30:])
        assert trimmed.u.t0 == pytest.approx(3.0)
        assert trimmed.meta.N == 70
        assert trimmed.meta.t0 == pytest.approx(3.0)

    def test_zero_drop_is_identity(self, canonical_system):
        u = gen_random_binary(20, 1.0, seed=1, T=0.1)
        rec = synthesize_record(canonical_system, u, Hold.ZOH, NoiseSpec(0.0))
        assert drop_initial(rec, 0) is rec

    def test_bounds(self, canonical_system):
        u = gen_random_binary(20, 1.0, seed=1, T=0.1)
        rec = synthesize_record(canonical_system, u, Hold.ZOH, NoiseSpec(0.0))
        with pytest.raises(ValueError):
            drop_initial(rec, 20)
        with pytest.raises(ValueError):
            drop_initial(rec, -1)


class TestCsvRoundTrips:
    def test_signal_round_trip_exact(self, tmp_path):
        sig = gen_gaussian_noise(64, NoiseSpec(1.0), seed=7, T=0.1, t0=0.5)
        path = tmp_path / "sig.csv"
        write_signal(sig, path)
        back = read_signal(path)
        np.testing.assert_array_equal(back.values, sig.values)
        assert np.isclose(back.T, sig.T, rtol=1e-12)
        # a second write of the re-read signal is byte-identical
        path2 = tmp_path / "sig2.csv"
        write_signal(back, path2)
        assert path2.read_bytes() == path.read_bytes()

    def test_record_round_trip_with_meta(self, canonical_system, tmp_path):
        u = gen_random_binary(40, 1.0, seed=3, T=0.1)
        rec = synthesize_record(canonical_system, u, Hold.ZOH, NoiseSpec(0.1), seed=9)
        path = tmp_path / "rec.csv"
        write_record(rec, path)
        assert (tmp_path / "rec.csv.meta").exists()
        back = read_record(path)
        np.testing.assert_array_equal(back.u.values, rec.u.values)
        np.testing.assert_array_equal(back.y.values, rec.y.values)
        assert back.T == rec.T  # sidecar pins the exact period
        assert back.meta == rec.meta
        path2 = tmp_path / "rec2.csv"
        write_record(back, path2)
        assert path2.read_bytes() == path.read_bytes()
        assert (tmp_path / "rec2.csv.meta").read_bytes() == (
            tmp_path / "rec.csv.meta"
        ).read_bytes()

    def test_record_without_meta(self, tmp_path):
        u = SampledSignal(values=np.arange(10.0), T=0.5)
        y = SampledSignal(values=np.arange(10.0) ** 2, T=0.5)
        rec = SampledRecord(u=u, y=y)
        path = tmp_path / "plain.csv"
        write_record(rec, path)
        assert not (tmp_path / "plain.csv.meta").exists()
        back = read_record(path)
        assert back.meta is None
        np.testing.assert_array_equal(back.y.values, rec.y.values)

    def test_meta_length_mismatch_rejected(self, canonical_system, tmp_path):
        u = gen_random_binary(40, 1.0, seed=3, T=0.1)
        rec = synthesize_record(canonical_system, u, Hold.ZOH, NoiseSpec(0.0))
        path = tmp_path / "rec.csv"
        write_record(rec, path)
        meta = (tmp_path / "rec.csv.meta").read_text().replace("N=40", "N=39")
        (tmp_path / "rec.csv.meta").write_text(meta)
        with pytest.raises(ValueError, match="meta N"):
            read_record(path)

    def test_meta_period_mismatch_rejected(self, canonical_system, tmp_path):
        u = gen_random_binary(40, 1.0, seed=3, T=0.1)
        rec = synthesize_record(canonical_system, u, Hold.ZOH, NoiseSpec(0.0))
        path = tmp_path / "rec.csv"
        write_record(rec, path)
        meta = (tmp_path / "rec.csv.meta").read_text().replace("T=0.1", "T=0.2")
        (tmp_path / "rec.csv.meta").write_text(meta)
        with pytest.raises(ValueError, match="meta T"):
            read_record(path)

    def test_missing_meta_key_rejected(self, canonical_system, tmp_path):
        u = gen_random_binary(40, 1.0, seed=3, T=0.1)
        rec = synthesize_record(canonical_system, u, Hold.ZOH, NoiseSpec(0.0))
        path = tmp_path / "rec.csv"
        write_record(rec, path)
        lines = (tmp_path / "rec.csv.meta").read_text().splitlines()
        (tmp_path / "rec.csv.meta").write_text(
            "\n".join(l for l in lines if not l.startswith("seed=")) + "\n"
        )
        with pytest.raises(ValueError, match="missing key"):
            read_record(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,in,out\n0.0,1.0,2.0\n0.1,1.0,2.0\n")
        with pytest.raises(ValueError, match="header"):
            read_record(path)
