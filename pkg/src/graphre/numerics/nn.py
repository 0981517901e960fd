"""Parameters and the small set of layers the parser is built from."""
from __future__ import annotations

from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Parameter(Tensor):
    """A trainable leaf tensor carrying its own AdamW state."""

    __slots__ = ("name", "exp_avg", "exp_avg_sq", "step")

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.exp_avg = np.zeros_like(self.data)
        self.exp_avg_sq = np.zeros_like(self.data)
        self.step = 0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


class Module:
    """Attribute-registered container of parameters and submodules."""

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for key, value in vars(self).items():
            full = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for k, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{k}.")
                    elif isinstance(item, Parameter):
                        yield f"{full}.{k}", item

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        from ..errors import ConfigError

        own = dict(self.named_parameters())
        if set(own) != set(state):
            missing = sorted(set(own) - set(state))
            extra = sorted(set(state) - set(own))
            raise ConfigError(f"checkpoint mismatch: missing {missing[:5]}, unexpected {extra[:5]}")
        for name, p in own.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ConfigError(f"checkpoint shape mismatch for {name}: {value.shape} vs {p.shape}")
            p.data = value.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Parameter(xavier_uniform(rng, d_in, d_out))
        self.bias = Parameter(np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = T.matmul(x, self.weight)
        return out + self.bias if self.bias is not None else out


class MLP(Module):
    """One ELU hidden layer followed by a linear output layer."""

    def __init__(self, d_in: int, d_hidden: int, d_out: int, rng: np.random.Generator):
        self.hidden = Linear(d_in, d_hidden, rng)
        self.out = Linear(d_hidden, d_out, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.out(T.elu(self.hidden(x)))


class LSTMDirection(Module):
    def __init__(self, d_in: int, d_h: int, rng: np.random.Generator, reverse: bool = False):
        self.w_ih = Parameter(xavier_uniform(rng, d_in, 4 * d_h))
        self.w_hh = Parameter(xavier_uniform(rng, d_h, 4 * d_h))
        b = np.zeros(4 * d_h)
        b[d_h:2 * d_h] = 1.0  # forget gate
        self.b = Parameter(b)
        self.reverse = reverse

    def __call__(self, x: Tensor) -> Tensor:
        return T.lstm(x, self.w_ih, self.w_hh, self.b, reverse=self.reverse)


class BiLSTM(Module):
    """Stacked bidirectional LSTM; each layer outputs forward ⊕ backward states."""

    def __init__(self, d_in: int, d_h: int, n_layers: int, rng: np.random.Generator):
        self.layers = []
        for k in range(n_layers):
            src = d_in if k == 0 else 2 * d_h
            self.layers.append(
                _Pair(LSTMDirection(src, d_h, rng), LSTMDirection(src, d_h, rng, reverse=True))
            )
        self.d_out = 2 * d_h if n_layers else d_in

    def __call__(self, x: Tensor) -> Tensor:
        for pair in self.layers:
            x = T.concat([pair.fwd(x), pair.bwd(x)], axis=1)
        return x


class _Pair(Module):
    def __init__(self, fwd: LSTMDirection, bwd: LSTMDirection):
        self.fwd = fwd
        self.bwd = bwd


class LayerNorm(Module):
    def __init__(self, d: int):
        self.gain = Parameter(np.ones(d))
        self.bias = Parameter(np.zeros(d))

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gain, self.bias)


def name_parameters(module: Module, prefix: Optional[str] = None) -> None:
    """Stamp each parameter with its dotted attribute path."""
    for name, p in module.named_parameters(prefix or ""):
        p.name = name
