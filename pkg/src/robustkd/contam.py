"""Training-time contamination and fixed-condition scenario views.

Training draws one of four actions uniformly (none / noise / reverb / both);
evaluation applies a single fixed condition. All randomness for one item comes
from one named stream, so a (seed, item) pair replays bit-exactly no matter
how many workers process the set or in which order.

For the combined action the speech is reverberated first and the noise is then
mixed at the target SNR measured against the reverberant speech, keeping the
SNR definition exact; the order is recorded here so reports can say so.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip, Rir, apply_rir, mix_at_snr
from .errors import ConfigError
from .rng import stream

ACTIONS = ("none", "noise", "reverb", "noise+reverb")
CONDITIONS = ("c", "n", "r", "n+r")
_CONDITION_ACTION = {"c": "none", "n": "noise", "r": "reverb", "n+r": "noise+reverb"}


@dataclass
class NamedNoise:
    noise_id: str
    kind: str
    clip: AudioClip


@dataclass
class ContaminationSpec:
    """Pools and ranges used for the uniform training-time draw."""

    noise_pool: list = field(default_factory=list)
    rir_pool: list = field(default_factory=list)
    snr_range_db: tuple = (0.0, 20.0)

    def __post_init__(self):
        lo, hi = self.snr_range_db
        if lo > hi:
            raise ConfigError(f"snr range [{lo}, {hi}] has low > high")


@dataclass
class ScenarioSpec:
    """One evaluation condition: c, n, r, or n+r."""

    condition: str
    snr_range_db: tuple = (-5.0, 20.0)
    rir_pool: list = field(default_factory=list)
    noise_pool: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise ConfigError(f"unknown condition {self.condition!r}; expected one of {CONDITIONS}")
        lo, hi = self.snr_range_db
        if lo > hi:
            raise ConfigError(f"snr range [{lo}, {hi}] has low > high")
        if "r" in self.condition and not self.rir_pool:
            raise ConfigError(f"condition {self.condition!r} needs a non-empty rir pool")


@dataclass
class NoisyView:
    """A distorted view of a clip plus the exact recipe that produced it."""

    clip: AudioClip
    action: str
    seed: int
    snr_db: float | None = None
    rir_id: str | None = None
    noise_id: str | None = None
    rt60_s: float | None = None
    renorm_scale: float = 1.0

    def __post_init__(self):
        wants_noise = "noise" in self.action
        wants_reverb = "reverb" in self.action
        if (self.snr_db is not None) != wants_noise:
            raise ConfigError(f"snr_db must be present iff the action includes noise (action {self.action!r})")
        if (self.rir_id is not None) != wants_reverb:
            raise ConfigError(f"rir_id must be present iff the action includes reverb (action {self.action!r})")

    def sidecar(self, source: str) -> dict:
        return {
            "source": source,
            "action": self.action,
            "snr_db": self.snr_db,
            "rir_id": self.rir_id,
            "rt60_s": self.rt60_s,
            "seed": self.seed,
            "renorm_scale": self.renorm_scale,
        }


def _pick_noise(rng: np.random.Generator, pool, clip_len: int) -> tuple:
    entry = pool[int(rng.integers(len(pool)))]
    samples = entry.clip.samples
    if samples.size > clip_len:
        offset = int(rng.integers(samples.size - clip_len + 1))
        samples = samples[offset : offset + clip_len]
    return entry.noise_id, AudioClip(samples, entry.clip.sample_rate)


def _apply(clip: AudioClip, action: str, rng: np.random.Generator, noise_pool, rir_pool, snr_range, seed: int) -> NoisyView:
    if action == "none":
        return NoisyView(clip=clip, action="none", seed=seed)
    snr_db = None
    rir = None
    noise_id = None
    renorm = 1.0
    out = clip
    if "reverb" in action:
        if not rir_pool:
            raise ConfigError("contamination requires a non-empty RIR pool")
        rir = rir_pool[int(rng.integers(len(rir_pool)))]
        out, scale = apply_rir(out, rir)
        renorm *= scale
    if "noise" in action:
        if not noise_pool:
            raise ConfigError("contamination requires a non-empty noise pool")
        snr_db = float(rng.uniform(snr_range[0], snr_range[1]))
        noise_id, noise = _pick_noise(rng, noise_pool, len(out))
        out, info = mix_at_snr(out, noise, snr_db)
        renorm *= info.renorm_scale
    return NoisyView(
        clip=out,
        action=action,
        seed=seed,
        snr_db=snr_db,
        rir_id=rir.rir_id if rir else None,
        noise_id=noise_id,
        rt60_s=rir.rt60_s if rir else None,
        renorm_scale=renorm,
    )


def contaminate(clip: AudioClip, spec: ContaminationSpec, seed: int) -> NoisyView:
    """Uniform draw over the four training actions, fully determined by `seed`."""
    rng = stream(seed, "contaminate")
    action = ACTIONS[int(rng.integers(4))]
    return _apply(clip, action, rng, spec.noise_pool, spec.rir_pool, spec.snr_range_db, seed)


def scenario_view(clip: AudioClip, spec: ScenarioSpec, item_index: int) -> NoisyView:
    """Apply the scenario's fixed condition, seeded by (spec.seed, item_index)."""
    rng = stream(spec.seed, "scenario", spec.condition, item_index)
    action = _CONDITION_ACTION[spec.condition]
    return _apply(clip, action, rng, spec.noise_pool, spec.rir_pool, spec.snr_range_db, spec.seed)
