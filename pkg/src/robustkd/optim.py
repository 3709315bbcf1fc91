"""AdamW with decoupled weight decay, plus the warmup/decay learning-rate ramp."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TrainingError
from .tensor import Tensor


@dataclass
class AdamWState:
    """Per-parameter moment estimates. `step` counts completed updates."""

    step: int = 0
    betas: tuple = (0.9, 0.999)
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, betas=(0.9, 0.999), epsilon=1e-8, weight_decay=0.0) -> "AdamWState":
        state = cls(betas=betas, epsilon=epsilon, weight_decay=weight_decay)
        for name, p in params.items():
            state.first_moment[name] = np.zeros_like(p.data)
            state.second_moment[name] = np.zeros_like(p.data)
        return state


def adamw_step(params: dict, state: AdamWState, lr: float, grads: dict | None = None) -> None:
    """One AdamW update over `params` (name -> Tensor), in place.

    Weight decay is decoupled: applied directly to parameters, scaled by lr,
    never mixed into the moment estimates. Bias-corrected moments per step.
    """
    if lr < 0:
        raise ConfigError(f"learning rate must be >= 0, got {lr}")
    state.step += 1
    b1, b2 = state.betas
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params.items():
        g = grads[name] if grads is not None else p.grad
        if g is None:
            g = np.zeros_like(p.data)
        g = np.asarray(g, dtype=np.float64)
        if g.size and np.isnan(g.sum()):
            raise TrainingError(f"NaN gradient for parameter {name!r}")
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        p.data = p.data - lr * update - lr * state.weight_decay * p.data


def lr_schedule(step: int, peak: float, warmup_steps: int, total_steps: int) -> float:
    """Linear ramp 0 -> peak over [0, warmup_steps], then linear decay to 0 at total_steps."""
    if total_steps <= 0:
        raise ConfigError("total_steps must be positive")
    if warmup_steps >= total_steps:
        raise ConfigError(f"warmup_steps {warmup_steps} must be < total_steps {total_steps}")
    if not 0 <= step <= total_steps:
        raise ConfigError(f"step {step} outside [0, {total_steps}]")
    if step <= warmup_steps:
        return peak if warmup_steps == 0 else peak * step / warmup_steps
    return peak * (total_steps - step) / (total_steps - warmup_steps)


def clip_grad_norm(params: dict, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most `max_norm`."""
    total = 0.0
    for name, p in params.items():
        if p.grad is None:
            continue
        if p.grad.size and np.isnan(p.grad.sum()):
            raise TrainingError(f"NaN gradient for parameter {name!r}")
        total += float(np.sum(p.grad * p.grad))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


def global_param_vector(params: dict) -> np.ndarray:
    """Flatten parameters in name order; used for determinism checks."""
    return np.concatenate([params[name].data.reshape(-1) for name in sorted(params)])
