"""Differentiable layers: linear, 1-d convolutions, BiLSTM, transformer.

Layers register parameters by name so checkpoints and the optimizer can
address them as a flat ``prefix.name -> Tensor`` mapping. Initialization draws
from named RNG streams (see rng.stream) so parameter values depend only on
(seed, stream name), never on construction order.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .tensor import Tensor


class Module:
    """Minimal parameter container with named traversal."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})

    def __setattr__(self, name, value):
        if isinstance(value, Tensor):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = ""):
        for name, p in self._params.items():
            yield (prefix + name, p)
        for name, mod in self._modules.items():
            yield from mod.named_parameters(prefix + name + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def freeze(self):
        for p in self.parameters():
            p.requires_grad = False

    def unfreeze(self):
        for p in self.parameters():
            p.requires_grad = True

    def num_trainable(self) -> int:
        return sum(p.size for p in self.parameters() if p.requires_grad)

    def state_arrays(self) -> dict:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state(self, arrays: dict, strict: bool = True):
        own = dict(self.named_parameters())
        for name, arr in arrays.items():
            if name not in own:
                if strict:
                    raise ShapeError(f"unknown parameter {name!r} in state")
                continue
            if own[name].data.shape != arr.shape:
                raise ShapeError(f"parameter {name!r}: shape {arr.shape} != expected {own[name].data.shape}")
            own[name].data = np.asarray(arr, dtype=np.float64)
        if strict:
            missing = set(own) - set(arrays)
            if missing:
                raise ShapeError(f"state missing parameters: {sorted(missing)}")


class ModuleList(Module):
    def __init__(self, modules=()):
        super().__init__()
        self._items = []
        for mod in modules:
            self.append(mod)

    def append(self, mod: Module):
        self._modules[str(len(self._items))] = mod
        self._items.append(mod)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        super().__init__()
        self.weight = uniform_init(rng, (d_in, d_out), d_in)
        self.bias = Tensor(np.zeros(d_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = centered.square().mean(axis=-1, keepdims=True)
        return centered / (var + self.eps).sqrt() * self.gamma + self.beta


def conv1d(x: Tensor, kernel: Tensor, bias: Tensor | None, stride: int, padding: int = 0) -> Tensor:
    """1-d convolution. x: [B?, C_in, T], kernel: [C_out, C_in, W] -> [B?, C_out, T'].

    T' = floor((T + 2*padding - W)/stride) + 1.
    """
    if stride < 1:
        raise ConfigError(f"conv1d stride must be >= 1, got {stride}")
    squeeze = x.ndim == 2
    if squeeze:
        x = x.reshape(1, *x.shape)
    c_out, c_in, width = kernel.shape
    if x.shape[-2] != c_in:
        raise ShapeError(f"conv1d expects {c_in} input channels, got {x.shape[-2]}")
    if padding:
        x = T.pad_last(x, padding, padding)
    if x.shape[-1] < width:
        raise ShapeError(f"conv1d input of {x.shape[-1]} samples shorter than kernel width {width}")
    patches = T.frames(x, width, stride)                      # [B, C_in, T', W]
    t_out = patches.shape[-2]
    b = patches.shape[0]
    patches = patches.transpose(0, 2, 1, 3).reshape(b, t_out, c_in * width)
    kmat = kernel.reshape(c_out, c_in * width).transpose(1, 0)
    out = patches @ kmat                                      # [B, T', C_out]
    if bias is not None:
        out = out + bias
    out = out.transpose(0, 2, 1)                              # [B, C_out, T']
    return out.reshape(c_out, t_out) if squeeze else out


def conv_transpose1d(x: Tensor, kernel: Tensor, bias: Tensor | None, stride: int) -> Tensor:
    """Adjoint of conv1d. x: [B?, C_in, T], kernel: [C_in, C_out, W] -> [B?, C_out, (T-1)*stride + W]."""
    if stride < 1:
        raise ConfigError(f"conv_transpose1d stride must be >= 1, got {stride}")
    squeeze = x.ndim == 2
    if squeeze:
        x = x.reshape(1, *x.shape)
    c_in, c_out, width = kernel.shape
    if x.shape[-2] != c_in:
        raise ShapeError(f"conv_transpose1d expects {c_in} input channels, got {x.shape[-2]}")
    t_in = x.shape[-1]
    if t_in < 1:
        raise ShapeError("conv_transpose1d requires a non-empty input")
    out_len = (t_in - 1) * stride + width
    b = x.shape[0]
    spread = x.transpose(0, 2, 1) @ kernel.reshape(c_in, c_out * width)   # [B, T, C_out*W]
    spread = spread.reshape(b, t_in, c_out, width).transpose(0, 2, 1, 3)  # [B, C_out, T, W]
    out = T.overlap_add(spread, stride, out_len)                          # [B, C_out, out_len]
    if bias is not None:
        out = out + bias.reshape(c_out, 1)
    return out.reshape(c_out, out_len) if squeeze else out


class Conv1d(Module):
    def __init__(self, c_in, c_out, width, stride, rng, padding: int = 0):
        super().__init__()
        self.kernel = uniform_init(rng, (c_out, c_in, width), c_in * width)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return conv1d(x, self.kernel, self.bias, self.stride, self.padding)


class ConvTranspose1d(Module):
    def __init__(self, c_in, c_out, width, stride, rng):
        super().__init__()
        self.kernel = uniform_init(rng, (c_in, c_out, width), c_in * width)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True)
        self.stride = stride

    def __call__(self, x: Tensor) -> Tensor:
        return conv_transpose1d(x, self.kernel, self.bias, self.stride)


class LSTMDirection(Module):
    """One direction of one LSTM layer. Gate order: input, forget, cell, output.

    Forget-gate bias starts at 1.0; weights are uniform(-1/sqrt(fan_in), +).
    """

    def __init__(self, d_in: int, hidden: int, rng: np.random.Generator, reverse: bool):
        super().__init__()
        self.w_ih = uniform_init(rng, (d_in, 4 * hidden), d_in)
        self.w_hh = uniform_init(rng, (hidden, 4 * hidden), hidden)
        bias = np.zeros(4 * hidden)
        bias[hidden : 2 * hidden] = 1.0
        self.bias = Tensor(bias, requires_grad=True)
        self.hidden = hidden
        self.reverse = reverse

    def __call__(self, x: Tensor) -> Tensor:
        batch, steps, _ = x.shape
        hid = self.hidden
        pre = x @ self.w_ih + self.bias                      # [B, T, 4H]
        h = Tensor(np.zeros((batch, hid)))
        c = Tensor(np.zeros((batch, hid)))
        order = range(steps - 1, -1, -1) if self.reverse else range(steps)
        outputs = [None] * steps
        for t in order:
            gates = pre[:, t, :] + h @ self.w_hh
            i = gates[:, :hid].sigmoid()
            f = gates[:, hid : 2 * hid].sigmoid()
            g = gates[:, 2 * hid : 3 * hid].tanh()
            o = gates[:, 3 * hid :].sigmoid()
            c = f * c + i * g
            h = o * c.tanh()
            outputs[t] = h
        return T.stack(outputs, axis=1)                      # [B, T, H]


class BiLSTM(Module):
    """Stacked bidirectional LSTM. Input [B?, T, D] -> [B?, T, 2H]."""

    def __init__(self, d_in: int, hidden: int, layers: int, rng_for):
        super().__init__()
        if layers < 1:
            raise ConfigError("BiLSTM needs at least one layer")
        dirs = []
        for layer in range(layers):
            d = d_in if layer == 0 else 2 * hidden
            dirs.append(LSTMDirection(d, hidden, rng_for(f"l{layer}.fwd"), reverse=False))
            dirs.append(LSTMDirection(d, hidden, rng_for(f"l{layer}.bwd"), reverse=True))
        self.dirs = ModuleList(dirs)
        self.layers = layers

    def __call__(self, x: Tensor) -> Tensor:
        squeeze = x.ndim == 2
        if squeeze:
            x = x.reshape(1, *x.shape)
        if x.shape[1] == 0:
            raise ShapeError("BiLSTM input has zero time steps")
        out = x
        for layer in range(self.layers):
            fwd = self.dirs[2 * layer](out)
            bwd = self.dirs[2 * layer + 1](out)
            out = T.concat([fwd, bwd], axis=-1)
        return out.reshape(*out.shape[1:]) if squeeze else out


class TransformerLayer(Module):
    """Post-norm multi-head self-attention + position-wise feed-forward."""

    def __init__(self, dim: int, heads: int, ffn_dim: int, rng_for):
        super().__init__()
        if dim % heads != 0:
            raise ConfigError(f"model dim {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.wq = Linear(dim, dim, rng_for("wq"))
        self.wk = Linear(dim, dim, rng_for("wk"))
        self.wv = Linear(dim, dim, rng_for("wv"))
        self.wo = Linear(dim, dim, rng_for("wo"))
        self.ln1 = LayerNorm(dim)
        self.ln2 = LayerNorm(dim)
        self.ffn1 = Linear(dim, ffn_dim, rng_for("ffn1"))
        self.ffn2 = Linear(ffn_dim, dim, rng_for("ffn2"))

    def attention(self, x: Tensor):
        b, steps, _ = x.shape
        h, dh = self.heads, self.dim // self.heads

        def split(t):
            return t.reshape(b, steps, h, dh).transpose(0, 2, 1, 3)  # [B, h, T, dh]

        q, k, v = split(self.wq(x)), split(self.wk(x)), split(self.wv(x))
        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(dh))
        attn = T.softmax(scores, axis=-1)                            # rows sum to 1
        ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(b, steps, self.dim)
        return self.wo(ctx), attn

    def __call__(self, x: Tensor, return_attn: bool = False):
        attended, attn = self.attention(x)
        x = self.ln1(x + attended)
        ff = self.ffn2(self.ffn1(x).gelu())
        x = self.ln2(x + ff)
        return (x, attn) if return_attn else x
