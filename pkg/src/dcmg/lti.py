"""Dense LTI helpers: matrix exponential, exact zero-order-hold
discretization and a rank-checked left pseudo-inverse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NonFinite,
    NonPositiveInput,
    NonSquare,
    RankDeficient,
)

# rank test threshold on the singular values of m^T m, relative to the largest
RANK_RTOL = 1e-12


@dataclass
class DiscreteModel:
    """Sampled model ``x_{k+1} = a x_k + b u_k + e d_k`` at step ``ts``."""

    a: np.ndarray
    b: np.ndarray
    e: np.ndarray
    ts: float


def matrix_exponential(m: np.ndarray) -> np.ndarray:
    """exp(m) of a square matrix (scaling-and-squaring with a Pade core)."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFinite("matrix exponential of a non-finite matrix")
    return scipy.linalg.expm(m)


def discretize_zoh(
    a_c: np.ndarray, b_c: np.ndarray, e_c: np.ndarray, ts: float
) -> DiscreteModel:
    """Exact discretization for inputs held constant over each step.

    Embeds the system in the augmented matrix [[a_c, b_c, e_c], [0, 0, 0]]
    whose exponential (scaled by ts) yields A = exp(a_c ts) in the top-left
    block and the held-input integrals int_0^ts exp(a_c s) ds [b_c | e_c]
    alongside it.
    """
    a_c = np.asarray(a_c, dtype=float)
    b_c = np.asarray(b_c, dtype=float)
    e_c = np.asarray(e_c, dtype=float)
    if a_c.ndim != 2 or a_c.shape[0] != a_c.shape[1]:
        raise NonSquare(f"a_c must be square, got shape {a_c.shape}")
    n = a_c.shape[0]
    if b_c.ndim != 2 or b_c.shape[0] != n:
        raise DimensionMismatch(f"b_c must have {n} rows, got shape {b_c.shape}")
    if e_c.ndim != 2 or e_c.shape[0] != n:
        raise DimensionMismatch(f"e_c must have {n} rows, got shape {e_c.shape}")
    if ts <= 0.0:
        raise NonPositiveInput(f"ts must be > 0, got {ts}")

    nb = b_c.shape[1]
    ne = e_c.shape[1]
    aug = np.zeros((n + nb + ne, n + nb + ne))
    aug[:n, :n] = a_c * ts
    aug[:n, n:] = np.hstack([b_c, e_c]) * ts
    ex = matrix_exponential(aug)
    return DiscreteModel(
        a=ex[:n, :n], b=ex[:n, n : n + nb], e=ex[:n, n + nb :], ts=ts
    )


def left_pinv(m: np.ndarray) -> np.ndarray:
    """(m^T m)^-1 m^T for a full-column-rank matrix.

    Computed through the SVD for conditioning; raises ``RankDeficient``
    when the smallest singular value of m^T m falls below ``RANK_RTOL``
    times the largest (or the matrix cannot have full column rank at all).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D array, got shape {m.shape}")
    rows, cols = m.shape
    if cols == 0:
        return np.zeros((0, rows))
    if rows < cols:
        raise RankDeficient(f"{rows}x{cols} matrix cannot have rank {cols}")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s[0] == 0.0 or (s[-1] / s[0]) ** 2 < RANK_RTOL:
        raise RankDeficient(
            f"column rank below {cols}: singular values span {s[-1]:.3e}..{s[0]:.3e}"
        )
    return (vt.T / s) @ u.T
