"""Distributed unknown-input optimal state estimator for one agent.

Each agent runs the two-stage recursion

    z_{k+1}  = F z_k + T B_x u_{x,k} + (K1 + K2) y_k
    x^_{k+1} = z_{k+1} + H y_{k+1}

where the structural gains H and T = I - H C annihilate the unknown local
load current (direction E) from the estimation error, and K1 is chosen each
step to minimise the error covariance given process noise Q and measurement
noise R.  The estimation error then obeys

    e_{k+1} = F e_k - K1 v_k - H v_{k+1} + T w_k - T B_x a_k

so a bias ``a`` injected on a received neighbour voltage leaves a persistent
residual r = y - C x^ on the corresponding line-current channel while load
steps leave no trace at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DecouplingInfeasible,
    DimensionMismatch,
    RankDeficient,
    SingularInnovation,
)
from .lti import discretize_zoh, left_pinv
from .netmodel import AgentModelContinuous, Coupling


@dataclass
class AgentModel:
    """Discrete-time agent model the observer operates on.

    ``b_x`` stacks the local control input columns (first ``n_inputs``)
    with one column per received neighbour voltage, in coupling order.
    ``state_index``/``state_sign`` locate the local states in the global
    vector (sign -1 on line currents observed against their canonical
    orientation).
    """

    agent_id: int
    a: np.ndarray
    b_x: np.ndarray
    e: np.ndarray
    c: np.ndarray
    q: np.ndarray
    r: np.ndarray
    ts: float
    n_inputs: int
    labels: list[str]
    couplings: list[Coupling]
    state_index: np.ndarray
    state_sign: np.ndarray

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.c.shape[0]

    @property
    def n_neighbors(self) -> int:
        return len(self.couplings)


@dataclass
class ObserverGains:
    h: np.ndarray
    t: np.ndarray
    f: np.ndarray
    k1: np.ndarray
    k2: np.ndarray


@dataclass
class ObserverState:
    z: np.ndarray
    x_hat: np.ndarray
    p: np.ndarray
    gains: ObserverGains | None = None


@dataclass
class Residual:
    r: np.ndarray
    labels: list[str]


def discretize_agent(cont: AgentModelContinuous, ts: float) -> AgentModel:
    """Sample an agent model, folding neighbour couplings into ``b_x``."""
    b_x_c = np.hstack([cont.b_ci] + [cp.column[:, None] for cp in cont.couplings])
    dm = discretize_zoh(cont.a_ci, b_x_c, cont.e_ci, ts)
    model = AgentModel(
        agent_id=cont.agent_id,
        a=dm.a,
        b_x=dm.b,
        e=dm.e,
        c=cont.c_ci.copy(),
        q=cont.q_i.copy(),
        r=cont.r_i.copy(),
        ts=ts,
        n_inputs=cont.b_ci.shape[1],
        labels=list(cont.state_labels),
        couplings=list(cont.couplings),
        state_index=cont.state_index.copy(),
        state_sign=cont.state_sign.copy(),
    )
    structural_gains(model)  # fail fast if the load cannot be decoupled
    return model


def structural_gains(model: AgentModel) -> tuple[np.ndarray, np.ndarray]:
    """Gains H, T with (I - H C) E = 0 and T = I - H C.

    H = E [(C E)^T C E]^{-1} (C E)^T requires C E to have full column
    rank; a disturbance direction invisible in the measurements cannot be
    annihilated and raises ``DecouplingInfeasible``.  With no disturbance
    channel at all, H = 0 and T = I.
    """
    c = np.asarray(model.c, dtype=float)
    e = np.asarray(model.e, dtype=float)
    n = c.shape[1]
    if e.size == 0 or not e.any():
        return np.zeros((n, c.shape[0])), np.eye(n)
    try:
        ce_pinv = left_pinv(c @ e)
    except RankDeficient as exc:
        raise DecouplingInfeasible(
            f"agent {model.agent_id}: C E is rank deficient ({exc})"
        ) from exc
    h = e @ ce_pinv
    t = np.eye(n) - h @ c
    return h, t


def _clamp_psd(p: np.ndarray) -> np.ndarray:
    """Symmetrize and clip negative eigenvalues to zero."""
    p = (p + p.T) / 2.0
    w, v = np.linalg.eigh(p)
    if w[0] < 0.0:
        p = (v * np.clip(w, 0.0, None)) @ v.T
        p = (p + p.T) / 2.0
    return p


def gain_step(
    model: AgentModel,
    p_k: np.ndarray,
    r_k: np.ndarray | None = None,
    r_k1: np.ndarray | None = None,
    q: np.ndarray | None = None,
) -> tuple[ObserverGains, np.ndarray]:
    """One update of the optimal gain and error covariance.

    K1 = T A P C^T (C P C^T + R)^{-1} minimises the next error covariance

        P' = F P F^T + K1 R K1^T - H R' H^T + T Q T^T,   F = T A - K1 C

    which is symmetrized and eigenvalue-clipped to stay positive
    semidefinite against accumulated rounding (the -H R' H^T term makes
    the exact update indefinite-looking in finite precision).
    """
    r_k = model.r if r_k is None else np.asarray(r_k, dtype=float)
    r_k1 = model.r if r_k1 is None else np.asarray(r_k1, dtype=float)
    q = model.q if q is None else np.asarray(q, dtype=float)
    p_k = np.asarray(p_k, dtype=float)
    n, m = model.n, model.m
    if p_k.shape != (n, n):
        raise DimensionMismatch(f"p_k must be {n}x{n}, got {p_k.shape}")
    if r_k.shape != (m, m) or r_k1.shape != (m, m):
        raise DimensionMismatch(f"measurement covariances must be {m}x{m}")
    if q.shape != (n, n):
        raise DimensionMismatch(f"q must be {n}x{n}, got {q.shape}")

    h, t = structural_gains(model)
    ta = t @ model.a
    s = model.c @ p_k @ model.c.T + r_k
    try:
        # K1 = (T A) P C^T S^{-1}, via a solve on the symmetric S
        k1 = np.linalg.solve(s, (ta @ p_k @ model.c.T).T).T
    except np.linalg.LinAlgError as exc:
        raise SingularInnovation(
            f"agent {model.agent_id}: innovation covariance is singular"
        ) from exc
    if not np.all(np.isfinite(k1)):
        raise SingularInnovation(
            f"agent {model.agent_id}: innovation solve produced non-finite gains"
        )
    f = ta - k1 @ model.c
    k2 = f @ h
    p_next = f @ p_k @ f.T + k1 @ r_k @ k1.T - h @ r_k1 @ h.T + t @ q @ t.T
    return ObserverGains(h=h, t=t, f=f, k1=k1, k2=k2), _clamp_psd(p_next)


def init_observer(model: AgentModel, y0: np.ndarray) -> ObserverState:
    """Start from the first measurement with unit covariance.

    z is offset so that the first reconstructed estimate equals the
    initial guess: x^_0 = z_0 + H y_0.
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (model.m,):
        raise DimensionMismatch(f"y0 must have shape ({model.m},), got {y0.shape}")
    h, _ = structural_gains(model)
    if model.c.shape[0] == model.c.shape[1] and np.array_equal(
        model.c, np.eye(model.n)
    ):
        x0 = y0.copy()
    else:
        x0 = np.zeros(model.n)
    return ObserverState(z=x0 - h @ y0, x_hat=x0, p=np.eye(model.n), gains=None)


def observer_step(
    state: ObserverState,
    model: AgentModel,
    u_x: np.ndarray,
    y_k: np.ndarray,
    y_k1: np.ndarray,
) -> tuple[ObserverState, Residual]:
    """Advance the estimate one step and emit the residual r = y - C x^.

    ``u_x`` is the lifted input [local inputs; received neighbour
    voltages] applied over [k, k+1); ``y_k``/``y_k1`` the measurements at
    the step boundaries.  Gains must have been produced by ``gain_step``
    and stored on the state beforehand.
    """
    g = state.gains
    if g is None:
        raise DimensionMismatch("observer state carries no gains; run gain_step first")
    u_x = np.asarray(u_x, dtype=float)
    y_k = np.asarray(y_k, dtype=float)
    y_k1 = np.asarray(y_k1, dtype=float)
    if u_x.shape != (model.b_x.shape[1],):
        raise DimensionMismatch(
            f"u_x must have shape ({model.b_x.shape[1]},), got {u_x.shape}"
        )
    if y_k.shape != (model.m,) or y_k1.shape != (model.m,):
        raise DimensionMismatch(f"measurements must have shape ({model.m},)")

    z1 = g.f @ state.z + g.t @ (model.b_x @ u_x) + (g.k1 + g.k2) @ y_k
    x_hat = z1 + g.h @ y_k1
    r = y_k1 - model.c @ x_hat
    return (
        ObserverState(z=z1, x_hat=x_hat, p=state.p, gains=g),
        Residual(r=r, labels=list(model.labels)),
    )
