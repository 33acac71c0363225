"""Analytic drift and covariance of the Gaussian limit of (X_n - n m) / sqrt(n).

For a walk with operators A_1..A_2d (A_{d+i} stepping along -e_i) and unique
invariant state rho:

    m   = sum_j Tr(A_j rho A_j^*) e_j
    L_l - L^*(L_l) = sum_j A_j^* A_j (e_j . l) - (m . l) I          (Poisson)

and the covariance is assembled from rho, m and L_1..L_d. Measurement
records are the special case of steps e_1..e_n with no backward moves.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from oqrw.channel import (
    TOL_FIX,
    SpectralDiagnostics,
    adjoint_superoperator,
    apply_adjoint,
    apply_channel,
    invariant_state,
)
from oqrw.errors import NumericalConsistencyError, PoissonSolveError, StructuralError
from oqrw.operators import RecordModel, WalkModel, devectorize, hermitize, real_part, vectorize

TOL_RESIDUAL = 1e-9
TOL_SYM = 1e-10
TOL_COV_PSD = 1e-8


def jump_weights(model, rho_inf) -> np.ndarray:
    """Stationary jump probabilities Tr(A_j rho A_j^*), one per operator."""
    ops = model.kraus
    return np.array(
        [real_part(np.trace(a @ rho_inf @ a.conj().T), what="jump probability") for a in ops]
    )


def drift(model, rho_inf) -> np.ndarray:
    return jump_weights(model, rho_inf) @ model.steps


def poisson_rhs(model, m, l) -> np.ndarray:
    """sum_j A_j^* A_j (e_j . l) - (m . l) I."""
    l = np.asarray(l, dtype=float)
    coeff = model.steps @ l
    ops = model.kraus
    rhs = np.einsum("j,jba,jbc->ac", coeff, ops.conj(), ops)
    return rhs - float(np.dot(m, l)) * np.eye(model.hilbert_dim)


def solve_poisson(model, rho_inf, l, m=None, tol: float = TOL_RESIDUAL):
    """Gauge-fixed Hermitian solution of the Poisson equation for direction ``l``.

    Minimum-norm least squares on the vectorized system, Hermitized and shifted
    so that Tr(rho_inf L) = 0. Returns ``(L, residual)``.
    """
    if m is None:
        m = drift(model, rho_inf)
    rhs = poisson_rhs(model, m, l)
    h = model.hilbert_dim
    system = np.eye(h * h) - adjoint_superoperator(model)
    sol, *_ = np.linalg.lstsq(system, vectorize(rhs), rcond=None)
    L = hermitize(devectorize(sol, h))
    L = L - np.trace(rho_inf @ L).real * np.eye(h)
    residual = float(np.abs(L - apply_adjoint(model, L) - rhs).max())
    if residual > tol:
        raise PoissonSolveError(
            f"Poisson residual {residual:.3e} exceeds {tol:.1e}; the invariant state may not be unique",
            residual,
        )
    return L, residual


def _tr(a, b=None) -> float:
    return real_part(np.trace(a if b is None else a @ b), what="trace")


def covariance(model: WalkModel, rho_inf, m, L_ops) -> np.ndarray:
    """Covariance of the limiting Gaussian for a walk on Z^d.

    Works for any gauge of ``L_ops``: the terms in Tr(rho L_j) cancel constant shifts.
    """
    d = model.lattice_dim
    ops = model.kraus
    fwd = [a @ rho_inf @ a.conj().T for a in ops[:d]]
    bwd = [a @ rho_inf @ a.conj().T for a in ops[d:]]
    tr_L = [_tr(rho_inf, L) for L in L_ops]
    C = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            c = (_tr(fwd[i]) + _tr(bwd[i])) if i == j else 0.0
            c -= m[i] * m[j]
            c += _tr(fwd[i], L_ops[j]) + _tr(fwd[j], L_ops[i])
            c -= _tr(bwd[i], L_ops[j]) + _tr(bwd[j], L_ops[i])
            c -= m[i] * tr_L[j] + m[j] * tr_L[i]
            C[i, j] = c
    return C


def record_covariance(model: RecordModel, rho_inf, m, L_ops) -> np.ndarray:
    n = model.dim
    out = [a @ rho_inf @ a.conj().T for a in model.kraus]
    tr_L = [_tr(rho_inf, L) for L in L_ops]
    C = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            c = _tr(out[i]) if i == j else 0.0
            c -= m[i] * m[j]
            c += _tr(out[i], L_ops[j]) + _tr(out[j], L_ops[i])
            c -= m[i] * tr_L[j] + m[j] * tr_L[i]
            C[i, j] = c
    return C


def gamma_operator(model, m, L_l, l) -> np.ndarray:
    """Conditional-variance operator of the martingale increment along ``l``.

    Tr(rho_inf Gamma_l) equals l^T C l.
    """
    coeff = model.steps @ np.asarray(l, dtype=float) - float(np.dot(m, l))
    g = np.zeros((model.hilbert_dim,) * 2, dtype=complex)
    for c, a in zip(coeff, model.kraus):
        ad = a.conj().T
        g += (c * c) * (ad @ a) + (2.0 * c) * (ad @ L_l @ a)
    return g


def directional_variance(model, rho_inf, m, L_ops, l) -> float:
    """sigma_l^2 = Tr(rho_inf Gamma_l) with L_l = sum_i l_i L_i."""
    L_l = sum(li * L for li, L in zip(l, L_ops))
    return _tr(rho_inf, gamma_operator(model, m, L_l, l))


def variance_1d(model: WalkModel, rho_inf):
    """Return ``(m, sigma2)`` for a walk on Z from the two-operator formula."""
    if model.lattice_dim != 1:
        raise StructuralError("variance_1d needs a walk on Z")
    a1, a2 = model.kraus
    m = 1.0 - 2.0 * _tr(a2 @ rho_inf @ a2.conj().T)
    L, _ = solve_poisson(model, rho_inf, [1.0], m=np.array([m]))
    sigma2 = 1.0 - m * m + 4.0 * (
        _tr(rho_inf, a1.conj().T @ L @ a1) - _tr(a1 @ rho_inf @ a1.conj().T) * _tr(rho_inf, L)
    )
    return m, sigma2


@dataclass
class CLTReport:
    mode: str
    rho_inf: np.ndarray
    m: np.ndarray
    L_ops: list
    C: np.ndarray
    residuals: dict = field(default_factory=dict)
    diagnostics: SpectralDiagnostics | None = None
    jump_weights: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return len(self.m)

    def to_dict(self) -> dict:
        from oqrw.modelio import encode_matrix

        out = {
            "mode": self.mode,
            "rho_inf": encode_matrix(self.rho_inf),
            "m": [float(x) for x in self.m],
            "jump_weights": None if self.jump_weights is None else [float(x) for x in self.jump_weights],
            "L": [encode_matrix(L) for L in self.L_ops],
            "C": [[float(x) for x in row] for row in self.C],
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }
        if self.diagnostics is not None:
            out["spectral"] = self.diagnostics.to_dict()
        return out


def _check_covariance(C):
    asym = float(np.abs(C - C.T).max())
    if asym > TOL_SYM:
        raise NumericalConsistencyError(f"covariance asymmetric by {asym:.3e}")
    lam = float(np.linalg.eigvalsh(0.5 * (C + C.T)).min())
    if lam < -TOL_COV_PSD:
        raise NumericalConsistencyError(f"covariance has negative eigenvalue {lam:.3e}")
    return asym, lam


def _quadratic_form_check(model, rho_inf, m, L_ops, C, n_dirs=20, seed=0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_dirs):
        l = rng.standard_normal(len(m))
        worst = max(worst, abs(l @ C @ l - directional_variance(model, rho_inf, m, L_ops, l)))
    return worst


def walk_clt(model: WalkModel, tol_fix: float = TOL_FIX, tol_residual: float = TOL_RESIDUAL) -> CLTReport:
    """Invariant state, drift, Poisson solutions and covariance for a walk."""
    rho_inf, diag = invariant_state(model, tol_fix)
    m = drift(model, rho_inf)
    d = model.lattice_dim
    L_ops, res = [], []
    for i in range(d):
        L, r = solve_poisson(model, rho_inf, np.eye(d)[i], m=m, tol=tol_residual)
        L_ops.append(L)
        res.append(r)
    C = covariance(model, rho_inf, m, L_ops)
    asym, _ = _check_covariance(C)
    residuals = {
        "fixed_point": float(np.abs(apply_channel(model, rho_inf) - rho_inf).max()),
        "poisson": max(res),
        "covariance_asymmetry": asym,
        "quadratic_form": _quadratic_form_check(model, rho_inf, m, L_ops, C),
    }
    return CLTReport("walk", rho_inf, m, L_ops, C, residuals, diag, jump_weights(model, rho_inf))


def record_clt(model: RecordModel, tol_fix: float = TOL_FIX, tol_residual: float = TOL_RESIDUAL) -> CLTReport:
    """CLT parameters of the measurement-record walk S_n on Z^n."""
    rho_inf, diag = invariant_state(model, tol_fix)
    m = drift(model, rho_inf)
    n = model.dim
    L_ops, res = [], []
    for i in range(n):
        L, r = solve_poisson(model, rho_inf, np.eye(n)[i], m=m, tol=tol_residual)
        L_ops.append(L)
        res.append(r)
    C = record_covariance(model, rho_inf, m, L_ops)
    asym, _ = _check_covariance(C)
    C_walk = walk_clt(model.as_walk(), tol_fix, tol_residual).C
    residuals = {
        "fixed_point": float(np.abs(apply_channel(model, rho_inf) - rho_inf).max()),
        "poisson": max(res),
        "covariance_asymmetry": asym,
        "quadratic_form": _quadratic_form_check(model, rho_inf, m, L_ops, C),
        "walk_embedding": float(np.abs(C - C_walk).max()),
        "record_row_sum": float(np.abs(C.sum(axis=1)).max()),
    }
    return CLTReport("record", rho_inf, m, L_ops, C, residuals, diag, jump_weights(model, rho_inf))


def analyze(model, **kwargs) -> CLTReport:
    if isinstance(model, RecordModel):
        return record_clt(model, **kwargs)
    return walk_clt(model, **kwargs)

