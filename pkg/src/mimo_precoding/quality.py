"""Scalar quality measures: per-symbol SINR, effective per-user SINR, spectral
efficiency, single-user SINR, and the conjugate-detection approximations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detection import DetectionSet, irc_detection_set
from .errors import (
    DegenerateChannelError,
    DimensionError,
    InfiniteSusinrError,
    UndefinedSinrError,
)
from .model import ChannelSet, SystemParams, susinr_gain

_LN2 = math.log(2.0)

# Below this SINR, log2(1 + x) goes through log1p to keep low-SNR sweeps accurate.
_LOG1P_SWITCH = 1e-4


def as_array(W) -> np.ndarray:
    """Accept a PrecodingMatrix or a bare complex array."""
    if isinstance(W, PrecodingMatrix):
        return W.W
    return np.asarray(W, dtype=np.complex128)


@dataclass(frozen=True)
class PrecodingMatrix:
    """Transmit precoder of shape (T, L): rows map to antennas, columns to streams.

    Per-antenna feasibility (row power <= P/T) is checked by `feasible`, never
    assumed.
    """

    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=np.complex128, order="C")
        if W.ndim != 2:
            raise DimensionError(f"precoder must be a matrix, got ndim={W.ndim}")
        if not np.all(np.isfinite(W)):
            raise ValueError("precoder has non-finite entries")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def n_antennas(self) -> int:
        return self.W.shape[0]

    @property
    def n_streams(self) -> int:
        return self.W.shape[1]

    def row_power(self) -> np.ndarray:
        """Per-antenna power, the squared norm of each row."""
        return np.einsum("ml,ml->m", self.W, self.W.conj()).real

    def feasible_rows(self, P: float, tol: float = 1e-12) -> np.ndarray:
        return self.row_power() <= P / self.n_antennas + tol

    def feasible(self, P: float, tol: float = 1e-12) -> bool:
        return bool(np.all(self.feasible_rows(P, tol)))


@dataclass(frozen=True)
class SinrReport:
    """Per-symbol SINRs, per-user effective SINRs and the total spectral efficiency.

    Users whose effective SINR collapsed to zero (some per-symbol SINR was zero)
    contribute nothing to se_bits and are listed in zero_sinr_users.
    """

    per_symbol: np.ndarray         # (L,)
    per_user_effective: np.ndarray  # (K,)
    se_bits: float
    zero_sinr_users: tuple[int, ...] = ()


def _shannon_term(x: float) -> float:
    if x < _LOG1P_SWITCH:
        return math.log1p(x) / _LN2
    return math.log2(1.0 + x)


def symbol_sinr(W, H_k: np.ndarray, g_l: np.ndarray, sigma2: float, P: float, l: int) -> float:
    """SINR of the symbol in global column l at the detector row g_l.

    |g H w_l|^2 / (sum_{i != l} |g H w_i|^2 + ||g||^2 sigma2 / P).
    """
    Wm = as_array(W)
    g = np.asarray(g_l, dtype=np.complex128).ravel()
    a = g @ np.asarray(H_k, dtype=np.complex128) @ Wm
    power = np.abs(a) ** 2
    signal = power[l]
    noise = float(np.vdot(g, g).real) * sigma2 / P
    interference = float(np.sum(np.delete(power, l)))
    den = interference + noise
    if den == 0.0:
        raise UndefinedSinrError(
            f"symbol {l}: zero denominator (no interference and no effective noise)"
        )
    return float(signal / den)


def effective_sinr(per_symbol) -> float:
    """Geometric mean of a user's per-symbol SINRs; any zero collapses it to zero."""
    x = np.asarray(per_symbol, dtype=float)
    if x.size == 0:
        raise DimensionError("need at least one per-symbol SINR")
    if np.any(x < 0):
        raise ValueError("SINR values must be nonnegative")
    if np.any(x == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(x))))


def spectral_efficiency(W, channel: ChannelSet, detection: DetectionSet,
                        sigma2: float, P: float) -> SinrReport:
    """Total spectral efficiency sum_k L_k log2(1 + effective SINR_k) in bit/s/Hz."""
    Wm = as_array(W)
    dims = channel.dims
    per_symbol = np.empty(dims.L)
    per_user = np.empty(dims.K)
    zero_users = []
    se = 0.0
    for k, user in enumerate(channel.users):
        sl = dims.layer_slice(k)
        G_k = detection.blocks[k]
        Z = G_k @ (user.H @ Wm)                       # (L_k, L)
        power = np.abs(Z) ** 2
        g_power = np.einsum("lr,lr->l", G_k, G_k.conj()).real
        local = np.arange(dims.L_k[k])
        cols = np.arange(sl.start, sl.stop)
        signal = power[local, cols]
        off = power.copy()
        off[local, cols] = 0.0
        den = off.sum(axis=1) + g_power * sigma2 / P
        if np.any(den == 0.0):
            bad = int(cols[np.argmax(den == 0.0)])
            raise UndefinedSinrError(
                f"symbol {bad}: zero denominator (no interference and no effective noise)"
            )
        per_symbol[sl] = signal / den
        eff = effective_sinr(per_symbol[sl])
        per_user[k] = eff
        if eff == 0.0:
            zero_users.append(k)
        se += dims.L_k[k] * _shannon_term(eff)
    return SinrReport(
        per_symbol=per_symbol,
        per_user_effective=per_user,
        se_bits=float(se),
        zero_sinr_users=tuple(zero_users),
    )


def spectral_efficiency_irc(W, channel: ChannelSet, params: SystemParams) -> SinrReport:
    """Spectral efficiency with the MMSE-IRC detector recomputed for this precoder.

    This single path scores every algorithm in the benchmark harness and is the
    quantity maximized by the IRC objective.
    """
    detection = irc_detection_set(channel, as_array(W), params)
    return spectral_efficiency(W, channel, detection, params.sigma2, params.P)


def susinr(channel: ChannelSet, sigma2: float, P: float) -> float:
    """Single-user SINR of the channel in dB, a per-antenna-free quality scalar.

    (P / sigma2) times the double geometric mean over users of the leading
    squared singular values with the per-user 1/L_k factor kept inside the
    outer mean, exactly as susinr_gain computes it.
    """
    if P <= 0:
        raise ValueError(f"P must be positive, got {P}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    if sigma2 == 0:
        raise InfiniteSusinrError("single-user SINR is infinite at zero noise power")
    gain = susinr_gain(channel.dims, channel.S_tilde)
    return 10.0 * math.log10(P * gain / sigma2)


def sinr_conjugate(W, v_l: np.ndarray, s_l: float, sigma2: float, P: float, l: int) -> float:
    """Per-symbol SINR under conjugate detection.

    |v w_l|^2 / (sum_{i != l} |v w_i|^2 + sigma2 / (P s_l^2)). Identical to
    symbol_sinr evaluated at the conjugate-detection row g_l = u_l / s_l, for
    which g_l H_k = v_l and ||g_l||^2 = 1 / s_l^2.
    """
    if s_l <= 0:
        raise DegenerateChannelError(f"symbol {l}: singular value must be positive")
    Wm = as_array(W)
    a = np.asarray(v_l, dtype=np.complex128).ravel() @ Wm
    power = np.abs(a) ** 2
    signal = power[l]
    interference = float(np.sum(np.delete(power, l)))
    return float(signal / (interference + sigma2 / (P * s_l**2)))


def se_conjugate(W, v_rows: np.ndarray, s_values: np.ndarray, sigma2: float, P: float) -> float:
    """Approximated spectral efficiency assuming conjugate detection.

    Evaluated as sum_l log2(sum_i |v_l w_i|^2 + n_l) - sum_l log2(sum_{i!=l}
    |v_l w_i|^2 + n_l) with n_l = sigma2 / (P s_l^2). The two-sum form keeps the
    value and its gradient numerically consistent, and makes W = 0 give exactly
    zero. Aggregation is per symbol, unlike spectral_efficiency's per-user
    geometric mean; the two only coincide when every L_k equals one.
    """
    Wm = as_array(W)
    s = np.asarray(s_values, dtype=float)
    if np.any(s <= 0):
        raise DegenerateChannelError("singular values must be positive")
    A = np.asarray(v_rows, dtype=np.complex128) @ Wm    # (L, L)
    power = np.abs(A) ** 2
    noise = sigma2 / (P * s**2)
    off = power.copy()
    np.fill_diagonal(off, 0.0)
    totals = power.sum(axis=1) + noise
    rest = off.sum(axis=1) + noise
    return float(np.sum(np.log2(totals)) - np.sum(np.log2(rest)))
