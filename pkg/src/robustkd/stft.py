"""STFT analysis/synthesis and the multi-resolution STFT loss.

Two parallel implementations share one definition:

  * numpy stft/istft on AudioClips for the contamination and mask-head input
    path (no gradients needed);
  * tensor-graph versions (stft_magnitude, istft_from_magnitude) built from
    explicit DFT-basis matmuls so the enhancement losses can backpropagate
    into the mask and waveform heads.

Synthesis uses least-squares (weighted) overlap-add: frames are multiplied by
the analysis window again and divided by the summed squared window, which
reconstructs interior samples exactly even for non-COLA hops such as the
window-400/hop-320 pair that aligns mask frames with encoder frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import tensor as T
from .audio import AudioClip
from .errors import ConfigError, ShapeError
from .tensor import Tensor

# analysis resolutions for the multi-resolution loss: (fft, hop, window)
MR_STFT_RESOLUTIONS = ((512, 50, 240), (1024, 120, 600), (2048, 240, 1200))

# mask-head analysis: hop equals the encoder frame stride
MASK_FFT = 512
MASK_HOP = 320
MASK_WINDOW = 400

_MAG_EPS = 1e-24
_LOG_FLOOR = 1e-7


@dataclass
class StftFrame:
    """Magnitude/phase spectrogram, bins x frames."""

    magnitude: np.ndarray
    phase: np.ndarray
    fft_size: int
    hop: int
    window_length: int

    def __post_init__(self):
        expect = self.fft_size // 2 + 1
        if self.magnitude.shape[0] != expect:
            raise ShapeError(f"expected {expect} bins for fft {self.fft_size}, got {self.magnitude.shape[0]}")
        if self.magnitude.shape != self.phase.shape:
            raise ShapeError("magnitude and phase shapes differ")

    @property
    def num_frames(self) -> int:
        return self.magnitude.shape[1]


def _check_geometry(fft_size: int, hop: int, window_length: int):
    if hop > window_length:
        raise ConfigError(f"hop {hop} larger than window {window_length}")
    if window_length > fft_size:
        raise ConfigError(f"window {window_length} larger than fft size {fft_size}")
    if hop <= 0:
        raise ConfigError("hop must be positive")


@lru_cache(maxsize=None)
def _window(window_length: int) -> np.ndarray:
    return np.hanning(window_length)


def stft(clip: AudioClip, fft_size: int = MASK_FFT, hop: int = MASK_HOP, window_length: int = MASK_WINDOW) -> StftFrame:
    _check_geometry(fft_size, hop, window_length)
    x = clip.samples
    if x.size < window_length:
        raise ShapeError(f"clip of {x.size} samples shorter than the {window_length}-sample window")
    num = (x.size - window_length) // hop + 1
    win = _window(window_length)
    frames = np.stack([x[i * hop : i * hop + window_length] * win for i in range(num)])
    spec = np.fft.rfft(frames, n=fft_size, axis=-1)  # [num, F]
    return StftFrame(np.abs(spec).T.copy(), np.angle(spec).T.copy(), fft_size, hop, window_length)


def istft(frame: StftFrame, sample_rate: int = 16000) -> AudioClip:
    """Weighted overlap-add inverse; output has (N-1)*hop + window samples."""
    spec = (frame.magnitude * np.exp(1j * frame.phase)).T  # [num, F]
    num = spec.shape[0]
    win = _window(frame.window_length)
    time_frames = np.fft.irfft(spec, n=frame.fft_size, axis=-1)[:, : frame.window_length]
    out_len = (num - 1) * frame.hop + frame.window_length
    out = np.zeros(out_len)
    wsum = np.zeros(out_len)
    for i in range(num):
        sl = slice(i * frame.hop, i * frame.hop + frame.window_length)
        out[sl] += time_frames[i] * win
        wsum[sl] += win * win
    out /= np.maximum(wsum, 1e-12)
    # reconstruction overshoot at low-weight edge samples stays within float noise
    return AudioClip(np.clip(out, -1.0, 1.0), sample_rate)


# -- differentiable paths ---------------------------------------------------------


@lru_cache(maxsize=None)
def _forward_basis(fft_size: int, window_length: int):
    """Real/imag rfft of a window-length frame as two [window, F] matrices."""
    n = np.arange(window_length)[:, None]
    k = np.arange(fft_size // 2 + 1)[None, :]
    angle = 2.0 * np.pi * n * k / fft_size
    return np.cos(angle), -np.sin(angle)


@lru_cache(maxsize=None)
def _inverse_basis(fft_size: int, window_length: int):
    """irfft restricted to the first window_length samples, as [F, window] matrices."""
    bins = fft_size // 2 + 1
    k = np.arange(bins)[:, None]
    n = np.arange(window_length)[None, :]
    angle = 2.0 * np.pi * k * n / fft_size
    weight = np.full((bins, 1), 2.0)
    weight[0] = 1.0
    if fft_size % 2 == 0:
        weight[-1] = 1.0
    real = weight * np.cos(angle) / fft_size
    imag = -weight * np.sin(angle) / fft_size
    return real, imag


def stft_magnitude(x: Tensor, fft_size: int, hop: int, window_length: int) -> Tensor:
    """Differentiable centered STFT magnitude: [..., n] -> [..., T, F]."""
    _check_geometry(fft_size, hop, window_length)
    pad = window_length // 2
    padded = T.pad_last(Tensor.lift(x), pad, pad)
    fr = T.frames(padded, window_length, hop) * _window(window_length)
    cos_b, sin_b = _forward_basis(fft_size, window_length)
    re = fr @ cos_b
    im = fr @ sin_b
    return (re.square() + im.square() + _MAG_EPS).sqrt()


def istft_from_magnitude(mag: Tensor, phase: np.ndarray, fft_size: int, hop: int, window_length: int) -> Tensor:
    """Differentiable weighted-OLA synthesis from magnitude with a fixed phase.

    mag: [..., T, F] tensor; phase: [T, F] constant. Returns [..., out_len].
    """
    _check_geometry(fft_size, hop, window_length)
    num = mag.shape[-2]
    if phase.shape != mag.shape[-2:]:
        raise ShapeError(f"phase shape {phase.shape} != magnitude frame shape {mag.shape[-2:]}")
    re = mag * np.cos(phase)
    im = mag * np.sin(phase)
    inv_r, inv_i = _inverse_basis(fft_size, window_length)
    time_frames = (re @ inv_r + im @ inv_i) * _window(window_length)
    out_len = (num - 1) * hop + window_length
    win = _window(window_length)
    wsum = np.zeros(out_len)
    for i in range(num):
        wsum[i * hop : i * hop + window_length] += win * win
    return T.overlap_add(time_frames, hop, out_len) * (1.0 / np.maximum(wsum, 1e-12))


def mr_stft_loss(estimate, reference, resolutions=MR_STFT_RESOLUTIONS) -> Tensor:
    """Sum over resolutions of spectral convergence + log-magnitude L1.

    estimate may be a Tensor (gradients flow) or an array; reference is fixed.
    Accepts [n] or [batch, n]; batched inputs average the per-clip terms.
    """
    est = Tensor.lift(estimate)
    ref = np.asarray(reference, dtype=np.float64)
    if est.shape[-1] != ref.shape[-1]:
        raise ShapeError(f"length mismatch: estimate {est.shape[-1]} vs reference {ref.shape[-1]}")
    batched = est.ndim == 2
    total = Tensor(0.0)
    for fft_size, hop, window_length in resolutions:
        est_mag = stft_magnitude(est, fft_size, hop, window_length)
        with T.no_grad():
            ref_mag = stft_magnitude(Tensor(ref), fft_size, hop, window_length).data
        diff_fro = (est_mag - ref_mag).square().sum(axis=(-2, -1)).sqrt()
        ref_fro = np.maximum(np.sqrt(np.sum(ref_mag**2, axis=(-2, -1))), 1e-12)
        sc = diff_fro * (1.0 / ref_fro)
        log_l1 = (est_mag.maximum(_LOG_FLOOR).log() - np.log(np.maximum(ref_mag, _LOG_FLOOR))).abs().mean(axis=(-2, -1))
        term = sc + log_l1
        total = total + (term.mean() if batched else term)
    return total
