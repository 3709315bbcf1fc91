"""Audio clips, PCM16 WAV I/O, SNR mixing, and room-impulse-response convolution."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError, MetricError

PCM_SCALE = 32767.0


@dataclass
class AudioClip:
    """Mono samples in [-1, 1] at a fixed rate."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise FormatError("AudioClip requires a non-empty 1-d sample array")
        if not np.all(np.isfinite(self.samples)):
            raise FormatError("AudioClip samples must be finite")
        if self.sample_rate <= 0:
            raise FormatError(f"sample rate must be positive, got {self.sample_rate}")
        peak = np.max(np.abs(self.samples))
        if peak > 1.0 + 1e-9:
            raise FormatError(f"samples exceed [-1, 1] (peak {peak:.4f}); renormalize before wrapping")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def __len__(self):
        return self.samples.size


@dataclass
class Rir:
    """Room impulse response; taps[0] is the direct-path peak."""

    taps: np.ndarray
    sample_rate: int
    rt60_s: float
    room_class: str
    rir_id: str = ""

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.float64)
        n5ms = max(1, int(0.005 * self.sample_rate))
        head = np.abs(self.taps[:n5ms])
        if head.size and head.argmax() != 0:
            raise FormatError("rir: direct-path tap must be the peak of the first 5 ms")


def room_class_for_rt60(rt60_s: float) -> str:
    """<0.3 s small, 0.3-0.7 s medium, >0.7 s large."""
    if rt60_s < 0.3:
        return "small"
    if rt60_s <= 0.7:
        return "medium"
    return "large"


# -- WAV container -------------------------------------------------------------


def write_wav(path, clip: AudioClip) -> None:
    """Write PCM16 mono little-endian."""
    pcm = np.clip(np.round(clip.samples * PCM_SCALE), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    fmt = b"fmt " + struct.pack(
        "<IHHIIHH", 16, 1, 1, clip.sample_rate, clip.sample_rate * 2, 2, 16
    )
    data = b"data" + struct.pack("<I", len(payload))
    with open(path, "wb") as fh:
        fh.write(header + fmt + data + payload)


def read_wav(path) -> AudioClip:
    """Read PCM16 mono; any other flavour is a FormatError naming the offense."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt_seen = False
    sample_rate = None
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack("<I", raw[pos + 4 : pos + 8])
        body = raw[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise FormatError(f"{path}: truncated fmt chunk")
            audio_format, channels, sample_rate, _, _, bits = struct.unpack("<HHIIHH", body[:16])
            if audio_format != 1:
                raise FormatError(f"{path}: not PCM (format tag {audio_format})")
            if channels != 1:
                raise FormatError(f"{path}: multichannel ({channels} channels), expected mono")
            if bits != 16:
                raise FormatError(f"{path}: {bits}-bit samples, expected 16-bit")
            fmt_seen = True
        elif chunk_id == b"data":
            if not fmt_seen:
                raise FormatError(f"{path}: data chunk before fmt chunk")
            if len(body) < chunk_size:
                raise FormatError(f"{path}: truncated data chunk ({len(body)} of {chunk_size} bytes)")
            if chunk_size == 0:
                raise FormatError(f"{path}: zero-length data payload")
            pcm = np.frombuffer(body[:chunk_size], dtype="<i2")
            return AudioClip(pcm.astype(np.float64) / PCM_SCALE, sample_rate)
        pos += 8 + chunk_size + (chunk_size & 1)
    raise FormatError(f"{path}: no data chunk found")


# -- contamination primitives --------------------------------------------------


@dataclass
class MixInfo:
    alpha: float
    renorm_scale: float = 1.0
    scaled_noise: np.ndarray = field(default=None, repr=False)


def _power(x: np.ndarray) -> float:
    return float(np.mean(x * x))


def mix_at_snr(speech: AudioClip, noise: AudioClip, snr_db: float):
    """speech + alpha*noise with alpha chosen so the mean-square SNR is exact.

    Noise is looped or trimmed to the speech length before scaling. Returns
    (AudioClip, MixInfo); the clip is peak-renormalized only when the raw mix
    exceeds 1, with the applied scale recorded in MixInfo.renorm_scale (the raw
    mix is clip.samples / renorm_scale).
    """
    if speech.sample_rate != noise.sample_rate:
        raise FormatError(
            f"sample-rate mismatch: speech {speech.sample_rate} Hz vs noise {noise.sample_rate} Hz"
        )
    n = len(speech)
    tiled = np.tile(noise.samples, n // len(noise) + 1)[:n]
    p_speech = _power(speech.samples)
    p_noise = _power(tiled)
    if p_speech == 0.0:
        raise MetricError("speech has zero power")
    if p_noise == 0.0:
        raise MetricError("noise has zero power")
    alpha = np.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0)))
    scaled = alpha * tiled
    mix = speech.samples + scaled
    scale = 1.0
    peak = np.max(np.abs(mix))
    if peak > 1.0:
        scale = 1.0 / peak
        mix = mix * scale
    clip = AudioClip(mix, speech.sample_rate)
    return clip, MixInfo(alpha=float(alpha), renorm_scale=scale, scaled_noise=scaled)


def fft_convolve(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    n = x.size + h.size - 1
    nfft = 1 << (n - 1).bit_length()
    out = np.fft.irfft(np.fft.rfft(x, nfft) * np.fft.rfft(h, nfft), nfft)
    return out[:n]


def apply_rir(speech: AudioClip, rir: Rir):
    """Convolve with the RIR, truncated to the input length.

    taps[0] is the direct path, so output sample k keeps its alignment with
    input sample k. Returns (AudioClip, renorm_scale).
    """
    if speech.sample_rate != rir.sample_rate:
        raise FormatError(
            f"sample-rate mismatch: speech {speech.sample_rate} Hz vs rir {rir.sample_rate} Hz"
        )
    wet = fft_convolve(speech.samples, rir.taps)[: len(speech)]
    scale = 1.0
    peak = np.max(np.abs(wet))
    if peak > 1.0:
        scale = 1.0 / peak
        wet = wet * scale
    return AudioClip(wet, speech.sample_rate), scale


def peak_normalize(samples: np.ndarray, target: float = 0.5) -> np.ndarray:
    peak = np.max(np.abs(samples))
    if peak == 0.0:
        raise ConfigError("cannot peak-normalize silence")
    return samples * (target / peak)
