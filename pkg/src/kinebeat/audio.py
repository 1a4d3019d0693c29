"""Musical beat and tempo detection from WAV audio.

The detector is the classical deterministic chain: magnitude STFT with a
periodic Hann window, log compression, half-wave-rectified spectral flux as
the onset envelope, windowed peak picking with an adaptive mean threshold,
and autocorrelation tempo estimation. No model weights are involved, so the
whole chain is reproducible from its parameters alone.

Only full analysis windows are taken (no zero padding, so a truncated
signal edge never fabricates spectral increase), and each frame is indexed
by its center: envelope index t corresponds to time t / frame_rate with
frame_rate = sample_rate / hop, window centers falling on multiples of the
hop. A percussive event therefore raises the envelope at the frames whose
centers straddle it, not a window-length earlier.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .rhythm import RhythmSequence

DEFAULT_STFT_WINDOW = 1024
DEFAULT_STFT_HOP = 256
DEFAULT_PEAK_WINDOW_SECONDS = 0.3
DEFAULT_PEAK_DELTA = 0.1
DEFAULT_BPM_MIN = 60.0
DEFAULT_BPM_MAX = 180.0


@dataclass(frozen=True)
class AudioClip:
    """Mono samples in [-1, 1] at an integer sample rate."""

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if not (isinstance(self.sample_rate, (int, np.integer)) and self.sample_rate > 0):
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or len(samples) < 1:
            raise ValueError("samples must be a non-empty mono vector")
        if not np.isfinite(samples).all():
            raise ValueError("samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class OnsetEnvelope:
    """Nonnegative onset-strength curve sampled at frame_rate Hz."""

    frame_rate: float
    values: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.frame_rate) and self.frame_rate > 0):
            raise ValueError(f"frame_rate must be positive, got {self.frame_rate!r}")
        object.__setattr__(self, "frame_rate", float(self.frame_rate))
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("envelope must be a vector")
        if not np.isfinite(values).all() or (values < 0).any():
            raise ValueError("envelope values must be finite and nonnegative")


@dataclass(frozen=True)
class BeatList:
    """Strictly ascending beat timestamps in seconds."""

    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", times)
        if times.ndim != 1:
            raise ValueError("beat times must be a vector")
        if len(times) and not np.isfinite(times).all():
            raise ValueError("beat times must be finite")
        if len(times) and times[0] < 0:
            raise ValueError("beat times must be nonnegative")
        if len(times) > 1 and not (np.diff(times) > 0).all():
            raise ValueError("beat times must be strictly ascending")

    def __len__(self) -> int:
        return len(self.times)

    def to_json(self) -> bytes:
        return json.dumps({"beats_sec": self.times.tolist()}).encode("utf-8")

    @classmethod
    def from_json(cls, data: bytes) -> "BeatList":
        try:
            doc = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"malformed beats JSON: {exc}") from exc
        if not isinstance(doc, dict) or "beats_sec" not in doc:
            raise ValueError('beats JSON must be an object with "beats_sec"')
        return cls(times=np.asarray(doc["beats_sec"], dtype=np.float64))


@dataclass(frozen=True)
class TempoEstimate:
    bpm: float

    def __post_init__(self):
        if not (math.isfinite(self.bpm) and self.bpm > 0):
            raise ValueError(f"bpm must be positive, got {self.bpm!r}")
        object.__setattr__(self, "bpm", float(self.bpm))

    def to_json(self) -> bytes:
        return json.dumps({"bpm": self.bpm}).encode("utf-8")

    @classmethod
    def from_json(cls, data: bytes) -> "TempoEstimate":
        try:
            doc = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"malformed tempo JSON: {exc}") from exc
        if not isinstance(doc, dict) or "bpm" not in doc:
            raise ValueError('tempo JSON must be an object with "bpm"')
        return cls(bpm=float(doc["bpm"]))


def read_wav(data: bytes) -> AudioClip:
    """Decode a RIFF/WAVE file: PCM 16-bit or IEEE float 32-bit, 1-2 channels.

    Stereo is mixed to mono by channel average. 16-bit samples are scaled
    by 1/32768; float samples are clipped into [-1, 1].
    """
    try:
        rate, raw = wavfile.read(io.BytesIO(data))
    except Exception as exc:
        raise ValueError(f"cannot decode WAV: {exc}") from exc
    if raw.dtype == np.int16:
        samples = raw.astype(np.float64) / 32768.0
    elif raw.dtype == np.float32:
        samples = np.clip(raw.astype(np.float64), -1.0, 1.0)
    else:
        raise ValueError(f"unsupported WAV sample format {raw.dtype}; need int16 or float32")
    if samples.ndim == 2:
        if samples.shape[1] > 2:
            raise ValueError(f"unsupported channel count {samples.shape[1]}; need 1 or 2")
        samples = samples.mean(axis=1)
    return AudioClip(sample_rate=int(rate), samples=samples)


def onset_envelope(
    clip: AudioClip, window: int = DEFAULT_STFT_WINDOW, hop: int = DEFAULT_STFT_HOP
) -> OnsetEnvelope:
    """Half-wave-rectified spectral flux of the log-compressed magnitude STFT.

    Magnitudes are compressed as log(1 + 10 * |X|); the flux at a frame is
    the sum over frequency of the positive bin-wise increase from the
    previous frame, and the first frame's flux is 0. The flux of the window
    starting at sample l * hop lands at envelope index l + window // (2 *
    hop), its center; the leading indices before the first full window are
    zero.
    """
    if not (window >= hop >= 1):
        raise ValueError(f"need window >= hop >= 1, got window={window}, hop={hop}")
    x = clip.samples
    n_frames = 1 + (len(x) - window) // hop if len(x) >= window else 0
    if n_frames < 2:
        raise ValueError(f"clip too short: {len(x)} samples hold {n_frames} full window(s)")
    idx = hop * np.arange(n_frames)[:, None] + np.arange(window)[None, :]
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window) / window)
    spectra = np.abs(np.fft.rfft(x[idx] * hann, axis=1))
    logmag = np.log1p(10.0 * spectra)
    flux = np.maximum(0.0, logmag[1:] - logmag[:-1]).sum(axis=1)
    lead = window // (2 * hop)
    values = np.concatenate([np.zeros(lead + 1), flux])
    return OnsetEnvelope(frame_rate=clip.sample_rate / hop, values=values)


def pick_beats(
    env: OnsetEnvelope,
    window: float = DEFAULT_PEAK_WINDOW_SECONDS,
    delta: float = DEFAULT_PEAK_DELTA,
) -> BeatList:
    """Pick onset-envelope peaks as musical beats.

    Frame t is a beat iff its value is strictly positive, is >= every value
    within round(window * frame_rate / 2) frames (first-of-plateau on ties),
    and is >= the mean over that same window plus delta times the whole
    signal's standard deviation. Beat time is t / frame_rate.
    """
    if not (window > 0):
        raise ValueError(f"window must be positive, got {window!r}")
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta!r}")
    v = env.values
    n = len(v)
    half = int(round(window * env.frame_rate / 2.0))
    sigma = float(v.std())
    times = []
    for t in range(n):
        if not v[t] > 0.0:
            continue
        if t > 0 and v[t - 1] == v[t]:
            continue
        lo = max(0, t - half)
        hi = min(n, t + half + 1)
        seg = v[lo:hi]
        if v[t] >= seg.max() and v[t] >= seg.mean() + delta * sigma:
            times.append(t / env.frame_rate)
    return BeatList(times=np.asarray(times, dtype=np.float64))


def estimate_tempo(
    env: OnsetEnvelope, bpm_min: float = DEFAULT_BPM_MIN, bpm_max: float = DEFAULT_BPM_MAX
) -> TempoEstimate:
    """Tempo from the autocorrelation of the mean-removed onset envelope.

    Candidate lags are those whose BPM falls in [bpm_min, bpm_max]; the lag
    with the largest autocorrelation wins, ties going to the longer lag
    (slower tempo). Raises when the envelope is too short for the longest
    candidate lag or shows no periodicity (constant envelope, or no lag
    with positive correlation).
    """
    if not (bpm_min < bpm_max) or bpm_min <= 0:
        raise ValueError(f"need 0 < bpm_min < bpm_max, got {bpm_min}, {bpm_max}")
    fr = env.frame_rate
    lag_min = max(1, math.ceil(60.0 * fr / bpm_max))
    lag_max = math.floor(60.0 * fr / bpm_min)
    if lag_min > lag_max:
        raise ValueError(f"no integer lag lies in [{bpm_min}, {bpm_max}] BPM at {fr:.2f} Hz")
    v = env.values
    if len(v) <= lag_max:
        raise ValueError(f"envelope too short for the longest lag: {len(v)} <= {lag_max}")
    if v.std() == 0.0:
        raise ValueError("no periodicity above threshold: envelope is constant")
    v = v - v.mean()
    best_lag = None
    best_r = -math.inf
    for lag in range(lag_min, lag_max + 1):
        r = float(np.dot(v[:-lag], v[lag:]))
        if r >= best_r:  # >= prefers the longer lag on ties
            best_r = r
            best_lag = lag
    if best_r <= 0.0:
        raise ValueError("no periodicity above threshold: autocorrelation has no positive peak")
    return TempoEstimate(bpm=60.0 * fr / best_lag)


def beats_from_rhythm(r: RhythmSequence) -> BeatList:
    """Convert a kinematic rhythm sequence into beat timestamps."""
    return BeatList(times=r.beat_times())
