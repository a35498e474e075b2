import numpy as np
import pytest

from spatialsift import (
    WaveBuffer,
    MultiChannelSpectrogram,
    stft,
    magnitude,
    short_term_rtf,
    whiten,
    update_long_term,
    lstsc,
    lstsc_map,
    ipd_feature,
    build_feature_stack,
)
from spatialsift.spatial import LongTermRtfState, MODULUS_FLOOR
from spatialsift import uca, place_scene, simulate_rir, render
from spatialsift.room import interference_gain
from spatialsift.synth import speech_like, interference_like


def oracle_short_term_rtf(Y, ref, R):
    # Literal direct-summation oracle with clamped windows and the same floor.
    M, T, F = Y.shape
    others = [m for m in range(M) if m != ref]
    power = np.abs(Y[ref]) ** 2
    floor = MODULUS_FLOOR * np.mean(power)
    rtf = np.zeros((T, F, M - 1), dtype=complex)
    valid = np.zeros((T, F), dtype=bool)
    for l in range(T):
        lo, hi = max(0, l - R // 2), min(T - 1, l + R // 2)
        for f in range(F):
            den = 0.0
            for n in range(lo, hi + 1):
                den += abs(Y[ref, n, f]) ** 2
            valid[l, f] = den >= floor
            den = max(den, floor)
            for j, m in enumerate(others):
                num = 0.0
                for n in range(lo, hi + 1):
                    num += Y[m, n, f] * np.conj(Y[ref, n, f])
                rtf[l, f, j] = num / den
    return rtf, valid


def random_spec(rng, channels=4, frames=10, bins=7):
    data = rng.standard_normal((channels, frames, bins)) + 1j * rng.standard_normal(
        (channels, frames, bins)
    )
    return MultiChannelSpectrogram(data)


def random_whitened(rng, shape):
    w, _ = whiten(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return w


class TestShortTermRtf:
    def test_matches_direct_summation_oracle(self):
        rng = np.random.default_rng(10)
        spec = random_spec(rng)
        rtf, valid = short_term_rtf(spec, ref_channel=0, R=2)
        oracle, oracle_valid = oracle_short_term_rtf(spec.data, 0, 2)
        np.testing.assert_allclose(rtf, oracle, rtol=1e-10, atol=1e-12)
        np.testing.assert_array_equal(valid, oracle_valid)

    def test_nonzero_ref_channel_and_r_zero(self):
        rng = np.random.default_rng(11)
        spec = random_spec(rng, channels=3)
        rtf, valid = short_term_rtf(spec, ref_channel=2, R=0)
        oracle, _ = oracle_short_term_rtf(spec.data, 2, 0)
        np.testing.assert_allclose(rtf, oracle, rtol=1e-10, atol=1e-12)

    def test_proportional_channel_cancels(self):
        rng = np.random.default_rng(12)
        base = rng.standard_normal((1, 8, 5)) + 1j * rng.standard_normal((1, 8, 5))
        spec = MultiChannelSpectrogram(np.concatenate([base, 2.0 * base]))
        rtf, _ = short_term_rtf(spec)
        np.testing.assert_allclose(rtf[..., 0], 2.0, rtol=1e-12)

    def test_phase_factor(self):
        rng = np.random.default_rng(13)
        base = rng.standard_normal((1, 8, 5)) + 1j * rng.standard_normal((1, 8, 5))
        rot = np.exp(1j * np.pi / 3)
        spec = MultiChannelSpectrogram(np.concatenate([base, rot * base]))
        rtf, _ = short_term_rtf(spec)
        np.testing.assert_allclose(rtf[..., 0], rot, rtol=1e-12)

    def test_single_channel_rejected(self):
        spec = MultiChannelSpectrogram(np.zeros((1, 4, 3), dtype=complex))
        with pytest.raises(ValueError, match="at least 2 channels"):
            short_term_rtf(spec)

    def test_odd_r_rejected(self):
        rng = np.random.default_rng(14)
        with pytest.raises(ValueError, match="even"):
            short_term_rtf(random_spec(rng), R=3)


class TestWhiten:
    def test_real_positive(self):
        w, valid = whiten(np.array([2.0 + 0j]))
        assert w[0] == 1.0 + 0j and valid[0]

    def test_unit_modulus(self):
        w, valid = whiten(np.array([1.0 + 1.0j]))
        np.testing.assert_allclose(w[0], (1 + 1j) / np.sqrt(2), rtol=1e-15)
        assert abs(abs(w[0]) - 1.0) < 1e-9

    def test_zero_flagged(self):
        w, valid = whiten(np.array([0.0 + 0j]))
        assert not valid[0]
        assert w[0] == 1.0 + 0j  # neutral placeholder

    def test_random_all_unit(self):
        rng = np.random.default_rng(15)
        v = rng.standard_normal(100) + 1j * rng.standard_normal(100)
        w, valid = whiten(v)
        assert valid.all()
        np.testing.assert_allclose(np.abs(w), 1.0, atol=1e-9)


class TestLongTermUpdate:
    def test_lambda_zero_equals_whiten(self):
        rng = np.random.default_rng(16)
        state = LongTermRtfState.empty(3, lam=0.0)
        update_long_term(state, random_whitened(rng, 3))  # initialize
        r = random_whitened(rng, 3)
        update_long_term(state, r)
        expected, _ = whiten(r)
        np.testing.assert_array_equal(state.values, expected)

    def test_lambda_one_state_unchanged(self):
        rng = np.random.default_rng(17)
        state = LongTermRtfState.empty(3, lam=1.0)
        first = random_whitened(rng, 3)
        update_long_term(state, first)
        before = state.values.copy()
        update_long_term(state, random_whitened(rng, 3))
        np.testing.assert_array_equal(state.values, before)

    def test_half_blend_hand_value(self):
        # previous [1], new [j]: blend 0.5 + 0.5j, whitened exp(j pi / 4)
        state = LongTermRtfState.empty(1, lam=0.5)
        update_long_term(state, np.array([1.0 + 0j]))
        update_long_term(state, np.array([1j]))
        np.testing.assert_allclose(state.values[0], np.exp(1j * np.pi / 4), rtol=1e-15)

    def test_first_call_initializes(self):
        rng = np.random.default_rng(18)
        state = LongTermRtfState.empty(4, lam=0.9)
        r = random_whitened(rng, 4)
        update_long_term(state, r)
        np.testing.assert_array_equal(state.values, r)
        assert state.initialized.all()

    def test_invalid_entries_hold_previous(self):
        state = LongTermRtfState.empty(2, lam=0.5)
        update_long_term(state, np.array([1.0 + 0j, 1j]))
        before = state.values.copy()
        update_long_term(state, np.array([1j, 1.0 + 0j]), valid=np.array([False, True]))
        assert state.values[0] == before[0]
        assert state.values[1] != before[1]

    def test_cancelling_blend_holds_previous(self):
        # lam 0.5 with r = -previous blends to zero, which cannot be
        # re-whitened; the recursion keeps the previous direction.
        state = LongTermRtfState.empty(1, lam=0.5)
        update_long_term(state, np.array([1j]))
        update_long_term(state, np.array([-1j]))
        assert state.values[0] == 1j

    def test_shape_mismatch_rejected(self):
        state = LongTermRtfState.empty(3, lam=0.5)
        with pytest.raises(ValueError, match="shape"):
            update_long_term(state, np.ones(4, dtype=complex))

    def test_bad_lambda_rejected(self):
        with pytest.raises(ValueError, match="forgetting factor"):
            LongTermRtfState.empty(2, lam=1.5)


class TestCoherence:
    def test_self_coherence_exactly_one(self):
        rng = np.random.default_rng(19)
        for m in (2, 3, 4, 8):
            r = random_whitened(rng, m - 1)
            assert lstsc(r, r) == 1.0
            assert lstsc(r, -r) == -1.0

    def test_orthogonal_phases(self):
        assert lstsc(np.array([1j]), np.array([1.0 + 0j])) == 0.0

    def test_all_invalid_gives_zero(self):
        r = np.array([1.0 + 0j, 1j])
        assert lstsc(r, r, valid=np.array([False, False])) == 0.0

    def test_range_on_random_pairs(self):
        rng = np.random.default_rng(20)
        for m in (2, 3, 4, 8):
            a = random_whitened(rng, (500, m - 1))
            b = random_whitened(rng, (500, m - 1))
            g = lstsc(a, b)
            assert np.all(g >= -1.0) and np.all(g <= 1.0)


class TestLstscMap:
    def test_streaming_equals_batch_bitwise(self):
        rng = np.random.default_rng(21)
        spec = random_spec(rng, frames=20, bins=9)
        batch = lstsc_map(spec, lam=0.9)
        rtf, den_valid = short_term_rtf(spec)
        white, w_valid = whiten(rtf)
        valid = w_valid & den_valid[..., np.newaxis]
        state = LongTermRtfState.empty(white.shape[1:], 0.9)
        from spatialsift.spatial import _coherence

        for l in range(spec.num_frames):
            gamma, _ = _coherence(white[l], state.values, valid[l] & state.initialized)
            update_long_term(state, white[l], valid[l])
            np.testing.assert_array_equal(batch.gamma[l], np.clip(gamma, -1, 1))

    def test_local_plane_contrasts_directional_vs_diffuse(self):
        # frame-to-frame stable directions score near 1 on the local plane,
        # random ones do not
        rng = np.random.default_rng(35)
        stable = rng.standard_normal((1, 1, 7)) + 1j * rng.standard_normal((1, 1, 7))
        stable = np.repeat(np.repeat(stable, 4, axis=0), 30, axis=1)
        stable *= rng.standard_normal((1, 30, 7)) + 1j * rng.standard_normal((1, 30, 7))
        diffuse = rng.standard_normal((4, 30, 7)) + 1j * rng.standard_normal((4, 30, 7))
        g_stable = lstsc_map(MultiChannelSpectrogram(stable), lam=0.1).gamma[2:]
        g_diffuse = lstsc_map(MultiChannelSpectrogram(diffuse), lam=0.1).gamma[2:]
        assert g_stable.mean() > 0.99
        # adjacent estimates share 2 of the 3 averaged frames at R=2, so a
        # diffuse field keeps some residual correlation; R=0 removes it
        assert g_diffuse.mean() < 0.7
        g_independent = lstsc_map(MultiChannelSpectrogram(diffuse), R=0, lam=0.1).gamma[2:]
        assert abs(g_independent.mean()) < 0.2

    def test_range_invariant(self):
        rng = np.random.default_rng(22)
        for _ in range(3):
            spec = random_spec(rng, channels=3, frames=15, bins=11)
            m = lstsc_map(spec, lam=rng.uniform(0, 1))
            assert np.all(m.gamma >= -1.0) and np.all(m.gamma <= 1.0)

    def test_per_channel_gain_invariance(self):
        rng = np.random.default_rng(23)
        spec = random_spec(rng)
        gains = np.array([1.0, 2.5, 0.3, 7.0])[:, np.newaxis, np.newaxis]
        scaled = MultiChannelSpectrogram(spec.data * gains)
        for lam in (0.999, 0.1):
            a = lstsc_map(spec, lam=lam).gamma
            b = lstsc_map(scaled, lam=lam).gamma
            np.testing.assert_allclose(a, b, atol=1e-9)

    def test_global_complex_scale_invariance(self):
        rng = np.random.default_rng(24)
        spec = random_spec(rng)
        scaled = MultiChannelSpectrogram(spec.data * (0.8 - 1.3j))
        np.testing.assert_allclose(
            lstsc_map(spec).gamma, lstsc_map(scaled).gamma, atol=1e-9
        )

    def test_static_source_convergence(self):
        # Single fixed source, anechoic, noiseless: gamma approaches 1.
        rng = np.random.default_rng(25)
        scene = place_scene(60, 300, uca(0.035, 4), t60=0.0)
        rirs = simulate_rir(scene)
        dry = speech_like(rng, 2.0, pause_prob=0.0)
        wave = render(WaveBuffer(dry), rirs[0])
        gamma = lstsc_map(stft(wave), lam=0.999).gamma
        assert gamma[20:].mean() > 0.95

    def test_interference_first_half_then_target(self):
        # Interference-only first half, target added second half: dominant
        # interference bins stay coherent, dominant target bins do not.
        rng = np.random.default_rng(26)
        scene = place_scene(45, 290, uca(0.035, 4), t60=0.2)
        rirs = simulate_rir(scene)
        n = 64000
        tdry = speech_like(rng, 4.0, pause_prob=0.0)
        tdry[: n // 2] = 0.0
        idry = interference_like(rng, 4.0)
        target = render(WaveBuffer(tdry), rirs[0])
        target = WaveBuffer(target.samples[:, :n])
        interf = render(WaveBuffer(idry), rirs[1])
        interf = WaveBuffer(interf.samples[:, :n])
        g = interference_gain(target, interf, 5.0)
        mix = WaveBuffer(target.samples + g * interf.samples)
        gamma = lstsc_map(stft(mix), lam=0.999).gamma
        t_mag = magnitude(stft(target))[0]
        i_mag = g * magnitude(stft(interf))[0]
        ratio_db = 20 * np.log10((t_mag + 1e-12) / (i_mag + 1e-12))
        assert gamma[ratio_db < -6.0].mean() > gamma[ratio_db > 6.0].mean()


class TestIpd:
    def test_identical_channels_give_one(self):
        rng = np.random.default_rng(27)
        base = rng.standard_normal((1, 6, 5)) + 1j * rng.standard_normal((1, 6, 5))
        spec = MultiChannelSpectrogram(np.repeat(base, 3, axis=0))
        planes = ipd_feature(spec)
        assert planes.shape == (2, 6, 5)
        np.testing.assert_allclose(planes, 1.0, atol=1e-12)

    def test_opposite_phase(self):
        rng = np.random.default_rng(28)
        base = rng.standard_normal((1, 6, 5)) + 1j * rng.standard_normal((1, 6, 5))
        spec = MultiChannelSpectrogram(np.concatenate([base, np.exp(1j * np.pi) * base]))
        np.testing.assert_allclose(ipd_feature(spec)[0], -1.0, atol=1e-12)

    def test_scalar_oracle(self):
        rng = np.random.default_rng(29)
        spec = random_spec(rng, channels=3, frames=4, bins=3)
        planes = ipd_feature(spec, ref_channel=1)
        others = [0, 2]
        for j, m in enumerate(others):
            for l in range(4):
                for f in range(3):
                    expected = np.cos(
                        np.angle(spec.data[m, l, f]) - np.angle(spec.data[1, l, f])
                    )
                    assert planes[j, l, f] == pytest.approx(expected, abs=1e-12)

    def test_average_pairs_single_plane(self):
        rng = np.random.default_rng(30)
        spec = random_spec(rng)
        planes = ipd_feature(spec, average_pairs=True)
        assert planes.shape[0] == 1
        np.testing.assert_allclose(planes[0], ipd_feature(spec).mean(axis=0))


class TestFeatureStack:
    def test_plane_layouts(self):
        rng = np.random.default_rng(31)
        spec = random_spec(rng, frames=8, bins=6)
        assert build_feature_stack(spec, "none").names == ("magnitude",)
        g = build_feature_stack(spec, "g-lstsc")
        assert g.names == ("magnitude", "g_lstsc") and g.plane_count == 2
        gl = build_feature_stack(spec, "gl-lstsc")
        assert gl.names == ("magnitude", "g_lstsc", "l_lstsc") and gl.plane_count == 3
        ipd = build_feature_stack(spec, "ipd")
        assert ipd.plane_count == 4  # magnitude + one plane per non-ref mic

    def test_magnitude_plane_is_reference_channel(self):
        rng = np.random.default_rng(32)
        spec = random_spec(rng)
        stack = build_feature_stack(spec, "g-lstsc")
        np.testing.assert_array_equal(stack.planes[0], magnitude(spec)[0])

    def test_unknown_kind_rejected(self):
        rng = np.random.default_rng(33)
        with pytest.raises(ValueError, match="feature kind"):
            build_feature_stack(random_spec(rng), "mel")

    def test_lstsc_shape_independent_of_mic_count(self):
        rng = np.random.default_rng(34)
        shapes = set()
        for channels in (2, 3, 4):
            spec = random_spec(rng, channels=channels, frames=8, bins=6)
            shapes.add(build_feature_stack(spec, "g-lstsc").planes.shape)
        assert len(shapes) == 1
