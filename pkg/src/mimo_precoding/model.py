"""System model: dimensions, per-user channel SVD factors, stacked decomposition,
and noise calibration from a target single-user SINR.

Conventions. User k has channel H_k of shape (R_k, T) and is served L_k symbol
streams. The reduced SVD is stored as H_k = U^H S V with U (R_k, R_k) unitary,
S the vector of singular values sorted descending, and V (R_k, T) with
orthonormal rows. Truncated factors keep the leading L_k rows/values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateChannelError, DimensionError

# Singular values below this fraction of the largest one count as zero.
RANK_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    if out is a:
        out = a.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SystemDims:
    """Counts of users, antennas and symbol streams.

    K users, T transmit antennas, per-user receive antenna counts R_k and
    stream counts L_k with 1 <= L_k <= R_k <= T.
    """

    K: int
    T: int
    R_k: tuple[int, ...]
    L_k: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "R_k", tuple(int(r) for r in self.R_k))
        object.__setattr__(self, "L_k", tuple(int(l) for l in self.L_k))
        if self.K < 1 or self.T < 1:
            raise DimensionError(f"K and T must be positive, got K={self.K}, T={self.T}")
        if len(self.R_k) != self.K or len(self.L_k) != self.K:
            raise DimensionError(
                f"R_k and L_k must have length K={self.K}, "
                f"got {len(self.R_k)} and {len(self.L_k)}"
            )
        for k, (r, l) in enumerate(zip(self.R_k, self.L_k)):
            if not 1 <= l <= r <= self.T:
                raise DimensionError(
                    f"user {k}: need 1 <= L_k <= R_k <= T, got L_k={l}, R_k={r}, T={self.T}"
                )

    @classmethod
    def uniform(cls, K: int, T: int, R: int, L: int) -> "SystemDims":
        return cls(K=K, T=T, R_k=(R,) * K, L_k=(L,) * K)

    @property
    def R(self) -> int:
        """Total receive antennas."""
        return sum(self.R_k)

    @property
    def L(self) -> int:
        """Total symbol streams."""
        return sum(self.L_k)

    def layer_slice(self, k: int) -> slice:
        """Slice of user k's streams within the stacked L dimension."""
        start = sum(self.L_k[:k])
        return slice(start, start + self.L_k[k])

    def receive_slice(self, k: int) -> slice:
        """Slice of user k's rows within the stacked R dimension."""
        start = sum(self.R_k[:k])
        return slice(start, start + self.R_k[k])


@dataclass(frozen=True)
class SystemParams:
    """Station power, noise power and the constants derived from them.

    `noise_to_signal` (sigma2 / P) scales the noise term of per-symbol SINRs and
    regularizes detection. `regularizer` (sigma2 * L / P) is the distinct,
    larger constant used by the regularized precoders.
    """

    P: float
    sigma2: float
    L: int

    def __post_init__(self):
        if self.P <= 0:
            raise ValueError(f"P must be positive, got {self.P}")
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be nonnegative, got {self.sigma2}")
        if self.L < 1:
            raise DimensionError(f"L must be positive, got {self.L}")

    @property
    def noise_to_signal(self) -> float:
        return self.sigma2 / self.P

    @property
    def regularizer(self) -> float:
        return self.sigma2 * self.L / self.P


@dataclass(frozen=True)
class UserChannel:
    """One user's channel together with its reduced SVD, H = U^H diag(S) V."""

    H: np.ndarray  # (R_k, T)
    U: np.ndarray  # (R_k, R_k), unitary
    S: np.ndarray  # (R_k,), descending
    V: np.ndarray  # (R_k, T), orthonormal rows
    L_k: int

    @property
    def R_k(self) -> int:
        return self.H.shape[0]

    @property
    def T(self) -> int:
        return self.H.shape[1]

    @property
    def U_tilde(self) -> np.ndarray:
        """(L_k, R_k) leading rows of U."""
        return self.U[: self.L_k]

    @property
    def S_tilde(self) -> np.ndarray:
        """(L_k,) leading singular values."""
        return self.S[: self.L_k]

    @property
    def V_tilde(self) -> np.ndarray:
        """(L_k, T) leading rows of V."""
        return self.V[: self.L_k]


@dataclass(frozen=True)
class ChannelSet:
    """All users' channels plus the stacked factors H = U^H diag(S) V.

    Rows are stacked in user order, contiguous per user. U and U_tilde are
    block-diagonal with one block per user. All arrays are read-only.
    """

    dims: SystemDims
    users: tuple[UserChannel, ...]
    H: np.ndarray        # (R, T)
    S: np.ndarray        # (R,) diagonal entries
    U: np.ndarray        # (R, R) block-diagonal
    V: np.ndarray        # (R, T)
    S_tilde: np.ndarray  # (L,)
    U_tilde: np.ndarray  # (L, R) block-diagonal
    V_tilde: np.ndarray  # (L, T)


def decompose_user(H_k: np.ndarray, L_k: int, user: int | None = None) -> UserChannel:
    """Reduced SVD of one user channel, phase-canonicalized and truncation-checked.

    The phase of each row of V is fixed so that its largest-magnitude entry is
    real and positive (the matching row of U absorbs the conjugate phase), which
    makes decompositions reproducible across runs.

    Raises DegenerateChannelError if the channel rank is below L_k, since a zero
    leading singular value cannot be inverted by conjugate detection.
    """
    H = np.asarray(H_k, dtype=np.complex128)
    if H.ndim != 2:
        raise DimensionError(f"channel must be a matrix, got ndim={H.ndim}")
    R_k, T = H.shape
    if R_k > T:
        raise DimensionError(f"need R_k <= T, got R_k={R_k}, T={T}")
    if not 1 <= L_k <= R_k:
        raise DimensionError(f"need 1 <= L_k <= R_k, got L_k={L_k}, R_k={R_k}")
    if not np.all(np.isfinite(H)):
        raise ValueError("channel matrix has non-finite entries")

    u, s, vh = np.linalg.svd(H, full_matrices=False)
    order = np.argsort(-s, kind="stable")
    u, s, vh = u[:, order], s[order], vh[order]

    # Phase fix: one unitary diagonal applied to the rows of both U and V
    # leaves U^H S V unchanged.
    peak = np.argmax(np.abs(vh), axis=1)
    anchor = vh[np.arange(R_k), peak]
    mag = np.abs(anchor)
    phase = np.where(mag > 0, anchor / np.where(mag > 0, mag, 1.0), 1.0)
    vh = vh * np.conj(phase)[:, None]
    U = u.conj().T * np.conj(phase)[:, None]

    s_max = s[0] if R_k else 0.0
    if s_max == 0.0 or s[L_k - 1] <= RANK_TOL * s_max:
        who = f"user {user}" if user is not None else "channel"
        raise DegenerateChannelError(
            f"{who}: rank below requested stream count L_k={L_k} "
            f"(leading singular values {s[:L_k]})"
        )

    return UserChannel(H=_frozen(H), U=_frozen(U), S=_frozen(s), V=_frozen(vh), L_k=int(L_k))


def stack(users) -> ChannelSet:
    """Assemble per-user factors into the stacked decomposition.

    The product of the stacked factors reproduces the stacked channel because
    each diagonal block of U^H multiplies only its own user's rows of S V.
    """
    users = tuple(users)
    if not users:
        raise DimensionError("at least one user required")
    T = users[0].T
    for k, u in enumerate(users):
        if u.T != T:
            raise DimensionError(f"user {k} has T={u.T}, expected {T}")
    dims = SystemDims(
        K=len(users),
        T=T,
        R_k=tuple(u.R_k for u in users),
        L_k=tuple(u.L_k for u in users),
    )
    return ChannelSet(
        dims=dims,
        users=users,
        H=_frozen(np.vstack([u.H for u in users])),
        S=_frozen(np.concatenate([u.S for u in users])),
        U=_frozen(scipy.linalg.block_diag(*[u.U for u in users])),
        V=_frozen(np.vstack([u.V for u in users])),
        S_tilde=_frozen(np.concatenate([u.S_tilde for u in users])),
        U_tilde=_frozen(scipy.linalg.block_diag(*[u.U_tilde for u in users])),
        V_tilde=_frozen(np.vstack([u.V_tilde for u in users])),
    )


def build_channel_set(channels, layer_counts) -> ChannelSet:
    """decompose_user over a list of matrices, then stack."""
    users = [decompose_user(H, L, user=k) for k, (H, L) in enumerate(zip(channels, layer_counts))]
    return stack(users)


def susinr_gain(dims: SystemDims, s_tilde: np.ndarray) -> float:
    """Channel-quality factor of the single-user SINR.

    Geometric mean over users of (1/L_k) * geomean_l(s_l^2), with the 1/L_k
    factor multiplying inside the outer mean. Evaluated in log space.
    """
    s = np.asarray(s_tilde, dtype=float)
    if np.any(s <= 0):
        raise DegenerateChannelError("singular values must be positive")
    log_terms = []
    for k in range(dims.K):
        sl = s[dims.layer_slice(k)]
        L_k = dims.L_k[k]
        log_terms.append(-math.log(L_k) + (2.0 / L_k) * float(np.sum(np.log(sl))))
    return math.exp(sum(log_terms) / dims.K)


def noise_from_susinr(channel: ChannelSet, P: float, target_db: float) -> float:
    """Noise power sigma2 such that the channel's single-user SINR is target_db.

    Inverts susinr(channel, sigma2, P) = target_db in closed form.
    """
    if P <= 0:
        raise ValueError(f"P must be positive, got {P}")
    gain = susinr_gain(channel.dims, channel.S_tilde)
    return P * gain * 10.0 ** (-target_db / 10.0)
