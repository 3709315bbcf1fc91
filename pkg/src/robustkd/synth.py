"""Synthetic speech, room impulse responses, and environmental noise.

The speech generator is a harmonic source driven through per-speaker formant
resonance bumps. Each keyword is a fixed sequence of three vowel-like segments
with its own pitch and energy contour; segment boundaries snap to the 20 ms
frame grid so frame labels are a pure function of (keyword, duration). The
fundamental carries the most energy by construction, so a clip's dominant
spectral peak sits at the speaker's f0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip, Rir, peak_normalize, room_class_for_rt60
from .errors import ConfigError
from .rng import stream

FRAME_SAMPLES = 320  # one frame per 20 ms at 16 kHz

# vowel-like phones: (name, F1 Hz, F2 Hz)
PHONES = [
    ("aa", 730.0, 1090.0),
    ("iy", 270.0, 2290.0),
    ("uw", 300.0, 870.0),
    ("eh", 530.0, 1840.0),
    ("ae", 660.0, 1720.0),
    ("ao", 570.0, 840.0),
]
SILENCE_ID = len(PHONES)
NUM_FRAME_CLASSES = len(PHONES) + 1

# keyword -> (phone sequence, f0 contour endpoints/mid, per-segment energy)
KEYWORDS = [
    ((0, 1, 2), (0.92, 1.00, 1.08), (1.0, 0.75, 0.9)),   # rising pitch
    ((3, 4, 5), (1.08, 1.00, 0.92), (0.8, 1.0, 0.7)),    # falling pitch
    ((0, 3, 1), (1.00, 1.00, 1.00), (1.0, 1.0, 1.0)),    # flat pitch
    ((2, 4, 0), (0.94, 1.08, 0.94), (0.7, 1.0, 0.8)),    # peak
    ((5, 1, 4), (1.06, 0.93, 1.06), (0.9, 0.7, 1.0)),    # dip
    ((2, 5, 3), (0.95, 1.07, 1.00), (1.0, 0.85, 0.95)),  # rise-fall
]
NUM_KEYWORDS = len(KEYWORDS)


@dataclass(frozen=True)
class SpeakerSpec:
    speaker_id: int
    f0_hz: float
    formant_scale: float


def make_speakers(n: int, seed: int) -> list[SpeakerSpec]:
    """Log-spaced f0 bases in [90, 250] Hz with seeded formant scaling."""
    rng = stream(seed, "speakers")
    f0s = np.geomspace(90.0, 250.0, n)
    scales = rng.uniform(0.88, 1.12, size=n)
    return [SpeakerSpec(i, float(f0s[i]), float(scales[i])) for i in range(n)]


def keyword_frame_labels(keyword_id: int, num_frames: int) -> np.ndarray:
    """Per-frame phone class labels, silence at the edges."""
    phones = KEYWORDS[keyword_id][0]
    sil = max(1, round(0.08 * num_frames))
    live = num_frames - 2 * sil
    if live < 3:
        raise ConfigError(f"{num_frames} frames too few for a 3-segment keyword")
    seg = live // 3
    bounds = [sil, sil + seg, sil + 2 * seg, sil + live]
    labels = np.full(num_frames, SILENCE_ID, dtype=np.int64)
    for k, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:])):
        labels[lo:hi] = phones[k]
    return labels


def _formant_gain(freqs: np.ndarray, f1: float, f2: float) -> np.ndarray:
    g1 = 3.0 * np.exp(-0.5 * ((freqs - f1) / 120.0) ** 2)
    g2 = 2.5 * np.exp(-0.5 * ((freqs - f2) / 150.0) ** 2)
    return 1.0 + g1 + g2


def synth_speech(speaker: SpeakerSpec, keyword_id: int, duration_s: float, seed: int, sample_rate: int = 16000):
    """Render one utterance; returns (AudioClip, frame_labels)."""
    if not 70.0 <= speaker.f0_hz <= 300.0:
        raise ConfigError(f"f0 {speaker.f0_hz} Hz outside [70, 300]")
    if duration_s < 0.2:
        raise ConfigError(f"duration {duration_s} s below the 0.2 s minimum")
    if not 0 <= keyword_id < NUM_KEYWORDS:
        raise ConfigError(f"keyword id {keyword_id} outside [0, {NUM_KEYWORDS})")
    rng = stream(seed, "synth_speech")
    n = int(round(duration_s * sample_rate))
    num_frames = n // FRAME_SAMPLES
    labels = keyword_frame_labels(keyword_id, num_frames)
    _, contour, energies = KEYWORDS[keyword_id]

    # piecewise-linear f0 contour across the utterance
    t_rel = np.arange(n) / max(n - 1, 1)
    f0_track = speaker.f0_hz * np.interp(t_rel, [0.0, 0.5, 1.0], contour)
    phase = 2.0 * np.pi * np.cumsum(f0_track) / sample_rate

    signal = rng.normal(scale=1e-4, size=n)  # noise floor
    n_harm = max(2, int(5500.0 / (speaker.f0_hz * max(contour))))
    harm_phases = rng.uniform(0.0, 2.0 * np.pi, size=n_harm)
    rolloff = 1.0 / np.arange(1, n_harm + 1) ** 1.5
    rolloff[0] *= 2.0  # keep the fundamental dominant over formant-boosted harmonics
    ramp = max(1, int(0.005 * sample_rate))

    frame_edges = np.flatnonzero(np.diff(labels) != 0) + 1
    seg_bounds = [0, *frame_edges.tolist(), num_frames]
    for lo_f, hi_f in zip(seg_bounds[:-1], seg_bounds[1:]):
        phone = labels[lo_f]
        if phone == SILENCE_ID:
            continue
        seg_index = KEYWORDS[keyword_id][0].index(phone)
        lo, hi = lo_f * FRAME_SAMPLES, hi_f * FRAME_SAMPLES
        f1, f2 = PHONES[phone][1] * speaker.formant_scale, PHONES[phone][2] * speaker.formant_scale
        harm_freqs = np.arange(1, n_harm + 1) * speaker.f0_hz
        amps = rolloff * _formant_gain(harm_freqs, f1, f2)
        seg = (np.sin(np.outer(np.arange(1, n_harm + 1), phase[lo:hi]) + harm_phases[:, None]) * amps[:, None]).sum(axis=0)
        env = np.ones(hi - lo)
        m = min(ramp, env.size // 2)
        env[:m] = 0.5 - 0.5 * np.cos(np.pi * np.arange(m) / m)
        env[-m:] = env[:m][::-1]
        signal[lo:hi] += energies[seg_index] * env * seg

    return AudioClip(peak_normalize(signal, 0.5), sample_rate), labels


def synth_rir(rt60_s: float, sample_rate: int, seed: int) -> Rir:
    """Unit direct-path tap followed by exponentially-shaped white noise.

    The deterministic envelope exp(-3 ln10 t / rt60) puts the energy decay at
    exactly -60 dB when t == rt60.
    """
    if not 0.05 <= rt60_s <= 2.0:
        raise ConfigError(f"rt60 {rt60_s} s outside [0.05, 2.0]")
    rng = stream(seed, "synth_rir")
    n_tail = int(np.ceil(1.1 * rt60_s * sample_rate))
    t = np.arange(1, n_tail + 1) / sample_rate
    envelope = np.exp(-3.0 * np.log(10.0) * t / rt60_s)
    tail = 0.35 * rng.normal(size=n_tail) * envelope
    n5ms = max(1, int(0.005 * sample_rate))
    head_peak = np.max(np.abs(tail[: n5ms - 1])) if n5ms > 1 else 0.0
    if head_peak >= 1.0:
        tail *= 0.95 / head_peak
    taps = np.concatenate([[1.0], tail])
    return Rir(
        taps=taps,
        sample_rate=sample_rate,
        rt60_s=rt60_s,
        room_class=room_class_for_rt60(rt60_s),
        rir_id=f"rir-{seed}-{rt60_s:g}",
    )


NOISE_KINDS = ("indoor", "outdoor", "transport")


def _band_noise(rng, n: int, sample_rate: int, lo: float, hi: float) -> np.ndarray:
    spectrum = np.fft.rfft(rng.normal(size=n))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    gain = np.where((freqs >= lo) & (freqs <= hi), 1.0, 0.02)
    return np.fft.irfft(spectrum * gain, n)


def synth_noise(kind: str, duration_s: float, seed: int, sample_rate: int = 16000) -> AudioClip:
    """One noise clip from the three-family taxonomy used for breakdowns."""
    if kind not in NOISE_KINDS:
        raise ConfigError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")
    rng = stream(seed, "synth_noise", kind)
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    if kind == "indoor":
        # mains hum plus babble-like modulated mid-band noise
        hum = sum(np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi)) / (k + 1)
                  for k, f in enumerate([50.0, 100.0, 150.0, 250.0]))
        babble = _band_noise(rng, n, sample_rate, 300.0, 3000.0)
        mod = 1.0 + 0.6 * np.sin(2 * np.pi * rng.uniform(3.0, 7.0) * t + rng.uniform(0, 2 * np.pi))
        signal = 0.5 * hum + babble * mod
    elif kind == "outdoor":
        # wind band with slow gusting
        wind = _band_noise(rng, n, sample_rate, 40.0, 600.0)
        gust = 1.0 + 0.8 * np.sin(2 * np.pi * rng.uniform(0.3, 1.5) * t + rng.uniform(0, 2 * np.pi))
        signal = wind * gust
    else:
        # periodic engine harmonics plus broadband hiss
        f0 = rng.uniform(35.0, 75.0)
        engine = sum(np.sin(2 * np.pi * f0 * (k + 1) * t + rng.uniform(0, 2 * np.pi)) / (k + 1)
                     for k in range(12))
        hiss = _band_noise(rng, n, sample_rate, 500.0, 4000.0)
        signal = engine + 0.4 * hiss
    return AudioClip(peak_normalize(signal, 0.7), sample_rate)
