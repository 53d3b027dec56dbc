"""Parameter containers and the small layers the model is assembled from."""

import numpy as np

from .tensor import Tensor, matmul


class Module:
    """Base class that discovers parameters from instance attributes.

    Attributes holding a grad-enabled :class:`Tensor`, a :class:`Module`, or a
    list of modules are collected in definition order, so names such as
    ``blocks.0.temporal.w_q`` are stable across runs.
    """

    def named_parameters(self, prefix=""):
        out = {}
        for key, value in vars(self).items():
            if key.startswith("_"):
                continue
            name = f"{prefix}{key}"
            if isinstance(value, Tensor) and value.requires_grad:
                value.name = name
                out[name] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(name + "."))
            elif isinstance(value, (list, tuple)) and value and isinstance(value[0], Module):
                for i, sub in enumerate(value):
                    out.update(sub.named_parameters(f"{name}.{i}."))
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def num_parameters(self):
        return sum(p.data.size for p in self.parameters())


def param(values):
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)


def uniform_init(rng, shape, bound):
    return param(rng.uniform(-bound, bound, size=shape))


def kaiming_uniform(rng, fan_in, fan_out):
    """Fan-in scaled uniform weights, ``U(-sqrt(1/fan_in), sqrt(1/fan_in))``."""
    return uniform_init(rng, (fan_in, fan_out), np.sqrt(1.0 / fan_in))


class Linear(Module):
    """``y = x @ weight + bias`` over the last axis; bias starts at zero."""

    def __init__(self, fan_in, fan_out, rng, bias=True):
        self.weight = kaiming_uniform(rng, fan_in, fan_out)
        self.bias = param(np.zeros(fan_out)) if bias else None

    def __call__(self, x):
        y = matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y
