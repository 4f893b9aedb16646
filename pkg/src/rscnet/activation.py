"""Smooth activations with first/second derivatives and their constants."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import erf, expit

ArrayFn = Callable[[np.ndarray], np.ndarray]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Activation:
    """A pointwise activation phi with |phi'| <= lipschitz and |phi''| <= smoothness."""

    kind: str
    lipschitz: float
    smoothness: float
    value_at_zero: float
    fn: ArrayFn
    d1: ArrayFn
    d2: ArrayFn

    @property
    def phi0_abs(self) -> float:
        return abs(self.value_at_zero)

    @property
    def is_one_lipschitz(self) -> bool:
        return self.lipschitz <= 1.0 + 1e-12

    def __repr__(self) -> str:
        return f"Activation({self.kind})"


def _check_finite(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("activation input must be finite")
    return arr


def _scalar_or_array(value: np.ndarray, x):
    return float(value) if np.ndim(x) == 0 else value


def eval(a: Activation, x):
    arr = _check_finite(x)
    return _scalar_or_array(a.fn(arr), x)


def deriv(a: Activation, x):
    arr = _check_finite(x)
    return _scalar_or_array(a.d1(arr), x)


def deriv2(a: Activation, x):
    arr = _check_finite(x)
    return _scalar_or_array(a.d2(arr), x)


def _tanh_d1(x: np.ndarray) -> np.ndarray:
    t = np.tanh(x)
    return 1.0 - t * t


def _tanh_d2(x: np.ndarray) -> np.ndarray:
    t = np.tanh(x)
    return -2.0 * t * (1.0 - t * t)


def _sig_d1(x: np.ndarray) -> np.ndarray:
    s = expit(x)
    return s * (1.0 - s)


def _sig_d2(x: np.ndarray) -> np.ndarray:
    s = expit(x)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _gauss_pdf(x: np.ndarray) -> np.ndarray:
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def _gelu_d1(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * _gauss_pdf(x)


def _gelu_d2(x: np.ndarray) -> np.ndarray:
    return _gauss_pdf(x) * (2.0 - x * x)


def grid_sup(f: ArrayFn, lo: float = -20.0, hi: float = 20.0, step: float = 1e-4) -> float:
    """sup |f| on [lo, hi]: grid maximum refined by a bounded scalar search."""
    grid = np.arange(lo, hi + step / 2, step)
    vals = np.abs(f(grid))
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    best = float(vals[i])
    if b > a:
        res = minimize_scalar(lambda t: -abs(float(f(np.array(t)))), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


@lru_cache(maxsize=None)
def _gelu_constants() -> tuple[float, float]:
    return grid_sup(_gelu_d1), grid_sup(_gelu_d2)


def _zero(x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x, dtype=np.float64)


def _one(x: np.ndarray) -> np.ndarray:
    return np.ones_like(x, dtype=np.float64)


@lru_cache(maxsize=None)
def get(name: str) -> Activation:
    """Look up an activation by name: tanh, sigmoid, gelu, softplus, identity."""
    key = name.strip().lower()
    if key == "tanh":
        return Activation("tanh", 1.0, 4.0 / (3.0 * math.sqrt(3.0)), 0.0, np.tanh, _tanh_d1, _tanh_d2)
    if key == "sigmoid":
        return Activation("sigmoid", 0.25, 1.0 / (6.0 * math.sqrt(3.0)), 0.5, expit, _sig_d1, _sig_d2)
    if key == "softplus":
        return Activation("softplus", 1.0, 0.25, math.log(2.0), _softplus, expit, _sig_d1)
    if key == "gelu":
        lip, smooth = _gelu_constants()
        return Activation("gelu", lip, smooth, 0.0, _gelu, _gelu_d1, _gelu_d2)
    if key == "identity":
        return Activation("identity", 1.0, 0.0, 0.0, lambda x: np.asarray(x, dtype=np.float64) * 1.0, _one, _zero)
    raise ValueError(f"unknown activation {name!r}")


NAMES = ("tanh", "sigmoid", "gelu", "softplus", "identity")


def resolve(act: Activation | str) -> Activation:
    return get(act) if isinstance(act, str) else act
