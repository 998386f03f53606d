"""Synthetic channel generation for the benchmark harness.

Streams are split per (seed, user): user k draws from a PCG64 generator keyed
by SeedSequence([seed, k]), so adding users to a scenario never perturbs the
matrices of earlier users. Within a user, the real parts of H_k are drawn
first, then the imaginary parts.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .model import ChannelSet, SystemDims, decompose_user, stack

MODELS = ("iid-gaussian", "exp-correlated")


def _user_rng(seed: int, user: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, user]))


def _exp_correlation_sqrt(n: int, rho: float) -> np.ndarray:
    """Symmetric square root of the exponential correlation matrix rho^|i-j|."""
    idx = np.arange(n)
    C = rho ** np.abs(idx[:, None] - idx[None, :])
    w, Q = np.linalg.eigh(C)
    return (Q * np.sqrt(np.clip(w, 0.0, None))) @ Q.T


def generate_channels(dims: SystemDims, seed: int, model: str = "iid-gaussian",
                      rho: float = 0.0) -> ChannelSet:
    """Draw one channel realization and return its decomposed, stacked form.

    iid-gaussian: every entry of every H_k is circularly-symmetric complex
    Gaussian with unit variance. exp-correlated: the iid draw is colored on
    both sides, H_k = C_r^{1/2} H_iid C_t^{1/2}, with exponential correlation
    rho^|i-j| across receive and transmit antennas; rho = 0 reproduces the iid
    draw bit for bit.
    """
    if model not in MODELS:
        raise ConfigError(f"unknown channel model {model!r}, expected one of {MODELS}")
    if not 0.0 <= rho < 1.0:
        raise ConfigError(f"rho must be in [0, 1), got {rho}")
    if seed < 0:
        raise ConfigError(f"seed must be nonnegative, got {seed}")

    colored = model == "exp-correlated" and rho > 0.0
    sqrt_ct = _exp_correlation_sqrt(dims.T, rho) if colored else None
    sqrt_cr_cache: dict[int, np.ndarray] = {}

    users = []
    for k in range(dims.K):
        R_k = dims.R_k[k]
        rng = _user_rng(seed, k)
        H = (rng.standard_normal((R_k, dims.T))
             + 1j * rng.standard_normal((R_k, dims.T))) / np.sqrt(2.0)
        if colored:
            if R_k not in sqrt_cr_cache:
                sqrt_cr_cache[R_k] = _exp_correlation_sqrt(R_k, rho)
            H = sqrt_cr_cache[R_k] @ H @ sqrt_ct
        users.append(decompose_user(H, dims.L_k[k], user=k))
    return stack(users)
