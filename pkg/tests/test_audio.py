import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.io import wavfile

from kinebeat.audio import (
    BeatList,
    OnsetEnvelope,
    beats_from_rhythm,
    estimate_tempo,
    onset_envelope,
    pick_beats,
    read_wav,
)
from kinebeat.rhythm import RhythmSequence

from conftest import click_wav_bytes, wav_bytes

SR = 22050


def envelope_of(wav, window=1024, hop=256):
    return onset_envelope(read_wav(wav), window=window, hop=hop)


class TestReadWav:
    def test_silence_pcm16(self):
        clip = read_wav(wav_bytes(np.zeros(SR), SR))
        assert clip.sample_rate == SR
        assert len(clip.samples) == SR
        assert not clip.samples.any()

    def test_full_scale_pcm16_scaling(self):
        buf = io.BytesIO()
        wavfile.write(buf, SR, np.array([32767, 0, -32768], dtype=np.int16))
        clip = read_wav(buf.getvalue())
        assert clip.samples[0] == 32767 / 32768
        assert clip.samples[2] == -1.0

    def test_stereo_averages_to_mono(self):
        buf = io.BytesIO()
        stereo = np.tile(np.array([[0.5, -0.5]], dtype=np.float32), (100, 1))
        wavfile.write(buf, SR, stereo)
        clip = read_wav(buf.getvalue())
        assert not clip.samples.any()

    def test_float32_passthrough(self):
        clip = read_wav(wav_bytes(np.linspace(-1, 1, 64), SR, fmt="float32"))
        assert clip.samples[0] == -1.0

    def test_unsupported_bit_depth(self):
        buf = io.BytesIO()
        wavfile.write(buf, SR, np.zeros(100, dtype=np.int32))
        with pytest.raises(ValueError, match="unsupported WAV sample format"):
            read_wav(buf.getvalue())

    def test_truncated_file(self):
        data = wav_bytes(np.zeros(SR), SR)
        with pytest.raises(ValueError, match="cannot decode"):
            read_wav(data[:30])


class TestOnsetEnvelope:
    def test_silence_is_all_zero(self):
        env = envelope_of(wav_bytes(np.zeros(SR), SR))
        assert not env.values.any()
        assert env.frame_rate == SR / 256

    def test_first_frame_flux_is_zero(self):
        env = envelope_of(click_wav_bytes(120))
        assert env.values[0] == 0.0

    def test_stationary_sine_has_negligible_flux(self):
        # A tone with a hop-periodic waveform: after the onset every full
        # window holds identical samples, so there is no spectral increase.
        cycle = 0.8 * np.sin(2 * np.pi * 3.0 * np.arange(256) / 256)
        x = np.concatenate([np.zeros(20 * 256), np.tile(cycle, 160)])
        env = envelope_of(wav_bytes(x, SR, fmt="float32"))
        attack_end = int((20 * 256 / SR + 0.15) * env.frame_rate)
        assert env.values.max() > 1.0  # the onset itself is visible
        assert env.values[attack_end:].max() <= 1e-6 * env.values.max()

    def test_click_train_maxima_within_one_frame(self):
        start, bpm = 0.25, 120
        env = envelope_of(click_wav_bytes(bpm, start=start))
        clicks = np.arange(start, 5.12, 60.0 / bpm)
        for c in clicks:
            frame = int(round(c * env.frame_rate))
            lo, hi = frame - 6, frame + 7
            local_max = lo + int(np.argmax(env.values[lo:hi]))
            assert abs(local_max - frame) <= 1

    def test_too_short_clip(self):
        with pytest.raises(ValueError, match="too short"):
            envelope_of(wav_bytes(np.zeros(100), SR))

    def test_polarity_flip_invariance(self, rng):
        x = rng.uniform(-0.5, 0.5, SR)
        a = envelope_of(wav_bytes(x, SR, fmt="float32"))
        b = envelope_of(wav_bytes(-x, SR, fmt="float32"))
        np.testing.assert_array_equal(a.values, b.values)

    @given(st.floats(0.05, 1.0), st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_attenuation_never_raises_envelope(self, c, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, SR // 2)
        full = envelope_of(wav_bytes(x, SR, fmt="float32"))
        quiet = onset_envelope(
            read_wav(wav_bytes(x, SR, fmt="float32")).__class__(SR, np.float32(c) * x)
        )
        assert (quiet.values <= full.values + 1e-9).all()


class TestPickBeats:
    def test_all_zero_envelope_gives_no_beats(self):
        env = OnsetEnvelope(frame_rate=86.0, values=np.zeros(200))
        assert len(pick_beats(env, delta=0.5)) == 0

    def test_single_spike(self):
        values = np.zeros(300)
        values[150] = 5.0
        env = OnsetEnvelope(frame_rate=100.0, values=values)
        beats = pick_beats(env)
        np.testing.assert_array_equal(beats.times, [1.5])

    def test_click_train_recovered(self):
        start, bpm = 0.25, 120
        env = envelope_of(click_wav_bytes(bpm, start=start))
        beats = pick_beats(env, window=0.3, delta=0.1)
        clicks = np.arange(start, 5.12, 60.0 / bpm)
        assert len(beats) == len(clicks)
        for t in beats.times:
            assert np.abs(clicks - t).min() <= 0.05
        spacing = np.diff(beats.times)
        assert np.abs(spacing - 0.5).max() <= 0.05

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_times_ascending_and_in_range(self, seed):
        rng = np.random.default_rng(seed)
        env = OnsetEnvelope(frame_rate=86.0, values=np.abs(rng.standard_normal(400)))
        beats = pick_beats(env)
        assert (np.diff(beats.times) > 0).all()
        if len(beats):
            assert beats.times[0] >= 0.0
            assert beats.times[-1] <= len(env.values) / env.frame_rate


class TestEstimateTempo:
    def test_120_bpm(self):
        env = envelope_of(click_wav_bytes(120))
        assert abs(estimate_tempo(env).bpm - 120) <= 1.0

    def test_90_bpm(self):
        env = envelope_of(click_wav_bytes(90))
        assert abs(estimate_tempo(env).bpm - 90) <= 1.0

    @pytest.mark.parametrize("period", [0.34, 0.4, 0.5, 0.66, 0.8, 1.0])
    def test_period_recovered_within_one_bpm(self, period):
        env = envelope_of(click_wav_bytes(60.0 / period, seconds=8.0), hop=64)
        assert abs(estimate_tempo(env).bpm - 60.0 / period) <= 1.0

    def test_time_stretch_halves_bpm(self):
        base = envelope_of(click_wav_bytes(120, seconds=8.0))
        slowed = envelope_of(click_wav_bytes(60, seconds=8.0))
        assert abs(estimate_tempo(slowed).bpm * 2 - estimate_tempo(base).bpm * 1) <= 2.0
        assert abs(estimate_tempo(slowed).bpm - 60.0) <= 1.0

    def test_white_noise_is_deterministic_and_in_range(self):
        rng = np.random.default_rng(7)
        values = np.abs(rng.standard_normal(800))
        env = OnsetEnvelope(frame_rate=86.13, values=values)
        a = estimate_tempo(env)
        b = estimate_tempo(OnsetEnvelope(frame_rate=86.13, values=values.copy()))
        assert a.bpm == b.bpm
        assert 60.0 <= a.bpm <= 180.0

    def test_silence_has_no_periodicity(self):
        env = envelope_of(wav_bytes(np.zeros(SR * 2), SR))
        with pytest.raises(ValueError, match="no periodicity"):
            estimate_tempo(env)

    def test_too_short_envelope(self):
        env = OnsetEnvelope(frame_rate=86.13, values=np.abs(np.sin(np.arange(40.0))))
        with pytest.raises(ValueError, match="too short"):
            estimate_tempo(env)

    def test_bad_range(self):
        env = OnsetEnvelope(frame_rate=86.13, values=np.ones(500))
        with pytest.raises(ValueError, match="bpm_min"):
            estimate_tempo(env, bpm_min=120, bpm_max=60)


class TestBeatsFromRhythm:
    def test_empty(self):
        r = RhythmSequence(fps=60.0, bits=np.zeros(10, dtype=int))
        assert len(beats_from_rhythm(r)) == 0

    def test_indices_divided_by_fps(self):
        bits = np.zeros(120, dtype=int)
        bits[[30, 90]] = 1
        beats = beats_from_rhythm(RhythmSequence(fps=60.0, bits=bits))
        np.testing.assert_array_equal(beats.times, [0.5, 1.5])

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_length_is_popcount(self, seed):
        rng = np.random.default_rng(seed)
        bits = (rng.random(100) < 0.2).astype(int)
        bits[:2] = 0
        beats = beats_from_rhythm(RhythmSequence(fps=60.0, bits=bits))
        assert len(beats) == bits.sum()


class TestBeatListJson:
    def test_roundtrip(self):
        beats = BeatList(times=np.array([0.5, 1.0, 2.25]))
        again = BeatList.from_json(beats.to_json())
        np.testing.assert_array_equal(again.times, beats.times)

    def test_rejects_descending(self):
        with pytest.raises(ValueError, match="ascending"):
            BeatList(times=np.array([1.0, 0.5]))
