"""Shared test helpers: finite-difference oracles and error measures."""

import numpy as np
import pytest


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-5) -> float:
    """Elementwise relative error with an absolute floor on the denominator.

    The floor keeps near-zero components meaningful: central differences at
    h = 1e-6 carry roundoff noise around 1e-10, so entries below the floor
    are effectively compared absolutely at floor * tolerance.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    den = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / den).max())


def fd_grad(loss_fn, arr: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function w.r.t. an array.

    ``loss_fn`` takes no arguments and reads ``arr`` by reference; entries
    are perturbed in place and restored.
    """
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = loss_fn()
        flat[i] = orig - h
        lo = loss_fn()
        flat[i] = orig
        out[i] = (hi - lo) / (2.0 * h)
    return grad


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
