"""Spectral-efficiency maximization over the precoder under per-antenna power
constraints.

The constrained problem is folded into an unconstrained one by composing the
objective with a row-wise differentiable projection onto the P/T power ball,
then running limited-memory quasi-Newton ascent on the real embedding of the
complex precoder. Gradients are complex ascent gradients (twice the derivative
with respect to the conjugated matrix) chained analytically through the
projection and, for the IRC objective, through the detector itself.

A softmax reparametrization of the precoder (feasible by construction) is
provided as an alternative route to the same problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from . import lbfgs
from .baselines import BaselineConfig, arzf, rzf
from .errors import NumericalFailureError, SingularMatrixError
from .model import ChannelSet, SystemParams
from .quality import PrecodingMatrix, as_array, se_conjugate, spectral_efficiency_irc

_LN2 = math.log(2.0)

OBJECTIVE_KINDS = ("cd", "irc")
START_KINDS = ("rzf", "arzf", "custom")


@dataclass(frozen=True)
class ObjectiveSpec:
    """What to maximize: the conjugate-detection surrogate or the exact
    MMSE-IRC spectral efficiency, both composed with the power projection.

    "cd" evaluates the per-symbol surrogate on the projected precoder; "irc"
    rebuilds the MMSE-IRC detector from the projected precoder on every
    evaluation and differentiates through it.
    """

    kind: str
    channel: ChannelSet
    params: SystemParams

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}, expected {OBJECTIVE_KINDS}")


@dataclass(frozen=True)
class CustomObjective:
    """Escape hatch for driving the maximizer with an arbitrary smooth objective.

    value/wirtinger_grad act on the already-projected precoder; wirtinger_grad
    must return the complex ascent gradient.
    """

    value: Callable[[np.ndarray], float]
    wirtinger_grad: Callable[[np.ndarray], np.ndarray]
    shape: tuple[int, int]
    P: float
    kind: str = "custom"


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 200
    tol_grad: float = 1e-5      # infinity norm of the real-embedded gradient
    tol_change: float = 1e-9    # on both objective change and step norm
    memory: int = 10
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    max_line_search: int = 25
    initial_step: float = 1.0
    start: str = "arzf"
    start_matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol_grad <= 0 or self.tol_change <= 0:
            raise ValueError("tolerances must be positive")
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        if self.start not in START_KINDS:
            raise ValueError(f"unknown start {self.start!r}, expected one of {START_KINDS}")
        if self.start == "custom" and self.start_matrix is None:
            raise ValueError("start='custom' requires start_matrix")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    grad_norm: float
    step: float
    se_irc_bits: float | None = None


@dataclass(frozen=True)
class OptimizationTrace:
    records: tuple[IterationRecord, ...]
    termination: str

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])


# ---------------------------------------------------------------------------
# Projection and its chain rule


def project(W, P: float) -> np.ndarray:
    """Row-wise projection onto the per-antenna power ball of radius sqrt(P/T).

    Rows already within budget pass through untouched; rows outside are
    rescaled onto the boundary. Rescaling repeats until every row power
    satisfies the budget in floating point, which makes the map exactly
    idempotent.
    """
    Wm = as_array(W)
    cap = P / Wm.shape[0]
    out = Wm.copy()
    for _ in range(4):
        power = np.einsum("ml,ml->m", out, out.conj()).real
        over = power > cap
        if not over.any():
            break
        out[over] *= np.sqrt(cap / power[over])[:, None]
    return out


def _chain_projection(D: np.ndarray, W: np.ndarray, P: float) -> np.ndarray:
    """Pull the gradient D at proj(W) back through the projection at W.

    Interior rows (including rows exactly on the boundary) use the identity
    branch. For a row outside the ball the projection w -> w sqrt(cap)/||w||
    contributes a tangential projection (the radial component of D carries no
    first-order change) scaled by sqrt(cap)/||w||.
    """
    cap = P / W.shape[0]
    power = np.einsum("ml,ml->m", W, W.conj()).real
    over = power > cap
    if not over.any():
        return D
    out = D.copy()
    w = W[over]
    d = D[over]
    r2 = power[over]
    radial = np.einsum("ml,ml->m", d, w.conj()).real
    out[over] = np.sqrt(cap / r2)[:, None] * (d - (radial / r2)[:, None] * w)
    return out


# ---------------------------------------------------------------------------
# Objective values and complex ascent gradients


def _spec_power(spec) -> float:
    if spec.kind == "custom":
        return spec.P
    return spec.params.P


def _spec_shape(spec) -> tuple[int, int]:
    if spec.kind == "custom":
        return spec.shape
    return (spec.channel.dims.T, spec.channel.dims.L)


def objective(W, spec) -> float:
    """Objective value at the projection of W."""
    Wp = project(W, _spec_power(spec))
    if spec.kind == "cd":
        ch, pr = spec.channel, spec.params
        return se_conjugate(Wp, ch.V_tilde, ch.S_tilde, pr.sigma2, pr.P)
    if spec.kind == "irc":
        return spectral_efficiency_irc(Wp, spec.channel, spec.params).se_bits
    return float(spec.value(Wp))


def _cd_gradient(Wp: np.ndarray, channel: ChannelSet, params: SystemParams) -> np.ndarray:
    Vt = channel.V_tilde
    s = channel.S_tilde
    A = Vt @ Wp                                    # (L, L), entry (l, i) = v_l w_i
    power = np.abs(A) ** 2
    noise = params.sigma2 / (params.P * s**2)
    off_power = power.copy()
    np.fill_diagonal(off_power, 0.0)
    totals = power.sum(axis=1) + noise
    rest = off_power.sum(axis=1) + noise
    A_off = A.copy()
    np.fill_diagonal(A_off, 0.0)
    M = A / totals[:, None] - A_off / rest[:, None]
    return (2.0 / _LN2) * (Vt.conj().T @ M)


def _irc_gradient(Wp: np.ndarray, channel: ChannelSet, params: SystemParams) -> np.ndarray:
    """Total derivative of the MMSE-IRC spectral efficiency in W.

    For each user, adjoints are pulled back through the detector
    G = A^H Q^{-1} with Q = B B^H + lam I and B = H_k W, then through
    B itself, reusing one Cholesky factorization of Q per user.
    """
    dims = channel.dims
    lam = params.noise_to_signal
    D_W = np.zeros((dims.T, dims.L), dtype=np.complex128)

    for k, user in enumerate(channel.users):
        sl = dims.layer_slice(k)
        L_k = dims.L_k[k]
        B = user.H @ Wp                             # (R_k, L)
        A = B[:, sl]
        Q = B @ B.conj().T + lam * np.eye(user.R_k)
        try:
            cho = scipy.linalg.cho_factor(Q, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise SingularMatrixError(f"irc gradient, user {k}: {exc}") from exc
        G = scipy.linalg.cho_solve(cho, A, check_finite=False).conj().T  # (L_k, R_k)
        Z = G @ B                                   # (L_k, L)
        power = np.abs(Z) ** 2
        g_power = np.einsum("lr,lr->l", G, G.conj()).real
        local = np.arange(L_k)
        cols = np.arange(sl.start, sl.stop)
        signal = power[local, cols]
        off = power.copy()
        off[local, cols] = 0.0
        den = off.sum(axis=1) + g_power * lam
        if np.any(den <= 0.0) or np.any(signal <= 0.0):
            raise NumericalFailureError(
                f"user {k}: spectral efficiency not differentiable "
                "(zero per-symbol SINR or denominator)"
            )
        sinr = signal / den
        geo = float(np.exp(np.mean(np.log(sinr))))
        # d SE_k / d sinr_l for SE_k = L_k log2(1 + geomean(sinr))
        c = geo / ((1.0 + geo) * _LN2 * sinr)
        u_w = c / den
        v_w = c * sinr / den

        D_Z = -v_w[:, None] * Z
        D_Z[local, cols] = u_w * Z[local, cols]
        nu = -v_w * lam                             # weights on the detector row powers
        D_G = D_Z @ B.conj().T + nu[:, None] * G
        D_A = scipy.linalg.cho_solve(cho, D_G.conj().T, check_finite=False)  # (R_k, L_k)
        Y = D_A @ G                                 # (R_k, R_k)
        D_B = G.conj().T @ D_Z - Y.conj().T @ B - Y @ B
        D_B[:, sl] += D_A
        D_W += user.H.conj().T @ D_B

    return 2.0 * D_W


def gradient(W, spec) -> np.ndarray:
    """Complex ascent gradient of the projected objective at W."""
    Wm = as_array(W)
    P = _spec_power(spec)
    Wp = project(Wm, P)
    if spec.kind == "cd":
        inner = _cd_gradient(Wp, spec.channel, spec.params)
    elif spec.kind == "irc":
        inner = _irc_gradient(Wp, spec.channel, spec.params)
    else:
        inner = np.asarray(spec.wirtinger_grad(Wp), dtype=np.complex128)
    out = _chain_projection(inner, Wm, P)
    if not np.all(np.isfinite(out)):
        raise NumericalFailureError("gradient has non-finite entries")
    return out


# ---------------------------------------------------------------------------
# Real embedding and the quasi-Newton drivers


def _embed(W: np.ndarray) -> np.ndarray:
    return np.concatenate([W.real.ravel(), W.imag.ravel()])


def _unembed(x: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    n = shape[0] * shape[1]
    return (x[:n] + 1j * x[n:]).reshape(shape)


def _starting_point(spec, cfg: OptimizerConfig) -> np.ndarray:
    P = _spec_power(spec)
    if cfg.start == "custom":
        return project(np.asarray(cfg.start_matrix, dtype=np.complex128), P)
    if spec.kind == "custom":
        raise ValueError("custom objectives need start='custom' with start_matrix")
    base_cfg = BaselineConfig(kind=cfg.start.upper(), params=spec.params)
    builder = rzf if cfg.start == "rzf" else arzf
    return builder(spec.channel, base_cfg).W.copy()


def _run_engine(spec, cfg: OptimizerConfig, x0: np.ndarray, shape, decode, score_fn):
    records: list[IterationRecord] = []

    def on_iteration(i, x, f, grad_norm, step):
        se = None
        if score_fn is not None:
            se = float(score_fn(decode(x)))
        records.append(IterationRecord(i, float(f), float(grad_norm), float(step), se))

    x, info = lbfgs.maximize(
        _make_value_and_grad(spec, shape, decode_space=decode),
        x0,
        max_iters=cfg.max_iters,
        tol_grad=cfg.tol_grad,
        tol_change=cfg.tol_change,
        memory=cfg.memory,
        c1=cfg.armijo_c1,
        backtrack=cfg.backtrack,
        max_line_search=cfg.max_line_search,
        initial_step=cfg.initial_step,
        value=_make_value(spec, shape, decode_space=decode),
        callback=on_iteration,
    )
    return x, OptimizationTrace(tuple(records), info["termination"])


def lbfgs_maximize(spec, cfg: OptimizerConfig | None = None, score_fn=None):
    """Quasi-Newton ascent in precoder space through the differentiable projection.

    Starts from the configured closed-form precoder (or a custom matrix),
    iterates on the real embedding of W and returns the projected result with
    its per-iteration trace. When score_fn is given it is evaluated on the
    projected precoder at every accepted iterate and stored in the trace.
    A failed line search returns the best iterate found so far rather than
    raising.
    """
    cfg = cfg or OptimizerConfig()
    shape = _spec_shape(spec)
    P = _spec_power(spec)
    W0 = _starting_point(spec, cfg)

    def decode(x):
        return project(_unembed(x, shape), P)

    x, trace = _run_engine(spec, cfg, _embed(W0), shape, decode, score_fn)
    return PrecodingMatrix(decode(x)), trace


def _make_value(spec, shape, decode_space=None):
    if isinstance(decode_space, _SoftmaxDecoder):
        return lambda x: objective(decode_space(x), spec)
    return lambda x: objective(_unembed(x, shape), spec)


def _make_value_and_grad(spec, shape, decode_space=None):
    if not isinstance(decode_space, _SoftmaxDecoder):
        def vag(x):
            W = _unembed(x, shape)
            return objective(W, spec), _embed(gradient(W, spec))
        return vag

    dec: _SoftmaxDecoder = decode_space

    def vag_softmax(x):
        W, aux = dec.decode_full(x)
        f = objective(W, spec)
        D = gradient(W, spec)
        return f, dec.chain(D, W, aux)

    return vag_softmax


# ---------------------------------------------------------------------------
# Softmax reparametrization


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _logit(p):
    return np.log(p) - np.log1p(-p)


@dataclass(frozen=True)
class SoftmaxParams:
    """Free parametrization of a feasible precoder.

    Row i distributes the fraction sigmoid(alpha_i) of its power budget P/T
    over streams via softmax(theta_i); phases are 2*pi*sigmoid(eta). Decoded
    rows therefore always sit strictly inside the power ball.
    """

    theta: np.ndarray  # (T, L)
    eta: np.ndarray    # (T, L)
    alpha: np.ndarray  # (T,)

    def decode(self, P: float) -> np.ndarray:
        t = self.theta - self.theta.max(axis=1, keepdims=True)
        e = np.exp(t)
        p = e / e.sum(axis=1, keepdims=True)
        T = self.theta.shape[0]
        q = p * _sigmoid(self.alpha)[:, None] * (P / T)
        phi = 2.0 * np.pi * _sigmoid(self.eta)
        return np.sqrt(q) * np.exp(1j * phi)

    @classmethod
    def from_precoder(cls, W0: np.ndarray, P: float) -> "SoftmaxParams":
        """Initialize so that decoding approximately reproduces W0."""
        W = np.asarray(W0, dtype=np.complex128)
        T = W.shape[0]
        power = np.abs(W) ** 2
        theta = np.log(power + 1e-12)
        frac = np.mod(np.angle(W), 2.0 * np.pi) / (2.0 * np.pi)
        eta = _logit(np.clip(frac, 1e-6, 1.0 - 1e-6))
        row_power = power.sum(axis=1)
        alpha = _logit(np.clip(T * row_power / P, 1e-6, 1.0 - 1e-6))
        return cls(theta=theta, eta=eta, alpha=alpha)


class _SoftmaxDecoder:
    """Maps the packed (theta, eta, alpha) vector to W and chains gradients back."""

    def __init__(self, shape: tuple[int, int], P: float):
        self.shape = shape
        self.P = P
        self.n = shape[0] * shape[1]

    def unpack(self, x: np.ndarray) -> SoftmaxParams:
        T, L = self.shape
        n = self.n
        return SoftmaxParams(
            theta=x[:n].reshape(T, L),
            eta=x[n:2 * n].reshape(T, L),
            alpha=x[2 * n:],
        )

    def pack(self, sp: SoftmaxParams) -> np.ndarray:
        return np.concatenate([sp.theta.ravel(), sp.eta.ravel(), sp.alpha])

    def decode_full(self, x: np.ndarray):
        sp = self.unpack(x)
        t = sp.theta - sp.theta.max(axis=1, keepdims=True)
        e = np.exp(t)
        p = e / e.sum(axis=1, keepdims=True)
        sa = _sigmoid(sp.alpha)
        se = _sigmoid(sp.eta)
        T = self.shape[0]
        q = p * sa[:, None] * (self.P / T)
        W = np.sqrt(q) * np.exp(1j * 2.0 * np.pi * se)
        return W, (p, sa, se)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.decode_full(x)[0]

    def chain(self, D: np.ndarray, W: np.ndarray, aux) -> np.ndarray:
        """Real gradient for the packed parameters from the complex ascent
        gradient D at W = decode(x).

        With r = Re(conj(D) * W) elementwise, the magnitude chain reduces to
        d/d theta_ik = (r_ik - p_ik * sum_j r_ij) / 2 and
        d/d alpha_i = (1 - sigmoid(alpha_i)) * sum_j r_ij / 2, with no division
        by the (possibly tiny) amplitudes. Phases use the imaginary part.
        """
        p, sa, se = aux
        cross = np.conj(D) * W
        r = cross.real
        row = r.sum(axis=1)
        d_theta = 0.5 * (r - p * row[:, None])
        d_alpha = 0.5 * (1.0 - sa) * row
        d_eta = -cross.imag * (2.0 * np.pi) * se * (1.0 - se)
        return np.concatenate([d_theta.ravel(), d_eta.ravel(), d_alpha])


def softmax_maximize(spec, cfg: OptimizerConfig | None = None, score_fn=None):
    """Maximize the same objective over the softmax parameters.

    The decoded precoder is feasible by construction (strictly inside the power
    ball), so the projection inside the objective is the identity along the
    whole trajectory. Uses the same quasi-Newton engine and configuration as
    lbfgs_maximize; expect slower convergence since boundary solutions require
    saturating sigmoids.
    """
    cfg = cfg or OptimizerConfig()
    shape = _spec_shape(spec)
    P = _spec_power(spec)
    W0 = _starting_point(spec, cfg)
    dec = _SoftmaxDecoder(shape, P)
    x0 = dec.pack(SoftmaxParams.from_precoder(W0, P))
    x, trace = _run_engine(spec, cfg, x0, shape, dec, score_fn)
    return PrecodingMatrix(dec(x)), trace
