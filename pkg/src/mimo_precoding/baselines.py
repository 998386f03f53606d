"""Closed-form precoders: MRT, ZF, RZF and ARZF, all normalized to the
per-antenna power budget by scaling with the maximal row norm."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateChannelError, DimensionError, SingularMatrixError, ZeroPrecoderError
from .model import ChannelSet, SystemParams
from .quality import PrecodingMatrix

KINDS = ("MRT", "ZF", "RZF", "ARZF")

_COND_WARN = 1e12


@dataclass(frozen=True)
class BaselineConfig:
    """Which closed-form precoder to build and with what constants.

    power_alloc holds the diagonal of the per-stream power allocation matrix;
    None means equal allocation (identity).
    """

    kind: str
    params: SystemParams
    power_alloc: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}, expected one of {KINDS}")
        if self.power_alloc is not None:
            p = np.asarray(self.power_alloc, dtype=float)
            if p.ndim != 1 or np.any(p <= 0):
                raise ValueError("power_alloc must be a 1-D array of positive entries")
            object.__setattr__(self, "power_alloc", p)


def normalize_power(W_raw: np.ndarray, P: float) -> PrecodingMatrix:
    """Scale so the largest antenna row sits exactly on the P/T power boundary.

    One global scalar preserves the precoder direction, so normalization
    absorbs any positive scaling of the input.
    """
    W = np.asarray(W_raw, dtype=np.complex128)
    if W.ndim != 2:
        raise DimensionError(f"precoder must be a matrix, got ndim={W.ndim}")
    T = W.shape[0]
    norms = np.sqrt(np.einsum("ml,ml->m", W, W.conj()).real)
    top = norms.max() if norms.size else 0.0
    if top == 0.0:
        raise ZeroPrecoderError("cannot normalize an all-zero precoding matrix")
    return PrecodingMatrix(W * (np.sqrt(P / T) / top))


def _power_diag(cfg: BaselineConfig, L: int) -> np.ndarray:
    if cfg.power_alloc is None:
        return np.ones(L)
    if cfg.power_alloc.shape[0] != L:
        raise DimensionError(
            f"power_alloc has length {cfg.power_alloc.shape[0]}, expected L={L}"
        )
    return cfg.power_alloc


def _regularized_inverse_precoder(channel: ChannelSet, reg_diag: np.ndarray | None,
                                  p_alloc: np.ndarray, context: str) -> np.ndarray:
    """V^H (V V^H + diag(reg))^{-1} P_alloc without forming the inverse."""
    Vt = channel.V_tilde
    gram = Vt @ Vt.conj().T
    if reg_diag is None:
        cond = np.linalg.cond(gram)
        if cond > 1e14:
            raise SingularMatrixError(
                f"{context}: stream correlation matrix is singular (cond {cond:.2g})"
            )
        if cond > _COND_WARN:
            warnings.warn(
                f"{context}: stream correlation matrix condition number above {_COND_WARN:g}",
                RuntimeWarning,
                stacklevel=3,
            )
        lhs = gram
    else:
        lhs = gram + np.diag(reg_diag)
    try:
        c, low = scipy.linalg.cho_factor(lhs, check_finite=False)
        X = scipy.linalg.cho_solve((c, low), np.diag(p_alloc).astype(np.complex128),
                                   check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularMatrixError(f"{context}: {exc}") from exc
    return Vt.conj().T @ X


def mrt(channel: ChannelSet, cfg: BaselineConfig) -> PrecodingMatrix:
    """Maximum-ratio transmission: beams along the conjugated singular vectors."""
    p = _power_diag(cfg, channel.dims.L)
    return normalize_power(channel.V_tilde.conj().T * p[None, :], cfg.params.P)


def zf(channel: ChannelSet, cfg: BaselineConfig) -> PrecodingMatrix:
    """Zero-forcing: decorrelates streams through the inverse Gram matrix."""
    p = _power_diag(cfg, channel.dims.L)
    W = _regularized_inverse_precoder(channel, None, p, "zero-forcing")
    return normalize_power(W, cfg.params.P)


def rzf(channel: ChannelSet, cfg: BaselineConfig) -> PrecodingMatrix:
    """Regularized zero-forcing with the scalar regularizer sigma2 * L / P."""
    L = channel.dims.L
    p = _power_diag(cfg, L)
    reg = np.full(L, cfg.params.regularizer)
    W = _regularized_inverse_precoder(channel, reg, p, "regularized zero-forcing")
    return normalize_power(W, cfg.params.P)


def arzf(channel: ChannelSet, cfg: BaselineConfig) -> PrecodingMatrix:
    """Adaptive RZF: per-stream regularization (sigma2 L / P) / s_l^2.

    The diagonal inverse-square singular values are the truncated L of them,
    matching the (L, L) Gram matrix.
    """
    s = channel.S_tilde
    if np.any(s <= 0):
        raise DegenerateChannelError("adaptive RZF needs positive leading singular values")
    p = _power_diag(cfg, channel.dims.L)
    reg = cfg.params.regularizer / s**2
    W = _regularized_inverse_precoder(channel, reg, p, "adaptive regularized zero-forcing")
    return normalize_power(W, cfg.params.P)


_BUILDERS = {"MRT": mrt, "ZF": zf, "RZF": rzf, "ARZF": arzf}


def compute_baseline(channel: ChannelSet, cfg: BaselineConfig) -> PrecodingMatrix:
    return _BUILDERS[cfg.kind](channel, cfg)
