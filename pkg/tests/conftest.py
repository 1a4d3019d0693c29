"""Shared synthetic fixtures: poses, oscillators, click-track WAVs."""

import io
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.io import wavfile

sys.path.insert(0, str(Path(__file__).parent))  # for tests.oracles as plain `oracles`

from kinebeat.pose import PoseSequence


def pose_from_xy(xy, fps=60.0, conf=1.0):
    """Wrap a (T, J, 2) coordinate array into a PoseSequence."""
    xy = np.asarray(xy, dtype=np.float64)
    frames = np.concatenate([xy, np.full(xy.shape[:2] + (1,), conf)], axis=2)
    return PoseSequence(fps=fps, frames=frames)


def triangle_pose(n_frames=480, half_period=30, fps=60.0, step=4.0):
    """Single joint sweeping back and forth at constant speed.

    Direction reverses every `half_period` frames: position peaks at frames
    half_period, 2*half_period, ... so the bin-switch acceleration spike
    lands exactly at each reversal.
    """
    t = np.arange(n_frames)
    phase = t % (2 * half_period)
    x = np.where(phase < half_period, phase, 2 * half_period - phase) * step
    xy = np.stack([x, np.zeros_like(x)], axis=1)[:, None, :]
    return pose_from_xy(xy, fps=fps)


def sine_pose(n_frames=512, period=60, fps=60.0, amp=50.0, phase=0.1):
    """Single joint in smooth horizontal simple harmonic motion.

    Speed varies continuously, so the acceleration envelope survives
    frame-repetition time stretching; used for the tempo-scaling checks.
    """
    t = np.arange(n_frames)
    x = amp * np.sin(2.0 * np.pi * t / period + phase)
    xy = np.stack([x, np.zeros_like(x)], axis=1)[:, None, :]
    return pose_from_xy(xy, fps=fps)


def repeat_frames(seq, times):
    """Integer slow-down: each frame repeated `times` times, fps unchanged."""
    return PoseSequence(fps=seq.fps, frames=np.repeat(seq.frames, times, axis=0))


def decimate_frames(seq, step):
    """Integer speed-up: keep every `step`-th frame, fps unchanged."""
    return PoseSequence(fps=seq.fps, frames=seq.frames[::step])


def click_wav_bytes(bpm, seconds=5.12, sample_rate=22050, amp=0.9, start=0.25, fmt="pcm16"):
    """A WAV of 1-sample unit impulses every 60/bpm seconds."""
    n = int(round(seconds * sample_rate))
    samples = np.zeros(n, dtype=np.float64)
    period = 60.0 / bpm
    t = start
    while t < seconds:
        samples[int(round(t * sample_rate))] = amp
        t += period
    return wav_bytes(samples, sample_rate, fmt=fmt)


def wav_bytes(samples, sample_rate, fmt="pcm16"):
    buf = io.BytesIO()
    if fmt == "pcm16":
        wavfile.write(buf, sample_rate, (np.asarray(samples) * 32767).astype(np.int16))
    elif fmt == "float32":
        wavfile.write(buf, sample_rate, np.asarray(samples, dtype=np.float32))
    else:
        raise ValueError(fmt)
    return buf.getvalue()


def random_pose_frames(rng, n_frames, n_joints, scale=100.0):
    """Random (T, J, 3) nested lists with confidences in [0, 1]."""
    xy = rng.uniform(-scale, scale, size=(n_frames, n_joints, 2))
    conf = rng.uniform(0.0, 1.0, size=(n_frames, n_joints, 1))
    return np.concatenate([xy, conf], axis=2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
