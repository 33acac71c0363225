"""The completely positive map rho -> sum_j A_j rho A_j^*, its adjoint and fixed point."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from oqrw.errors import NonUniqueInvariantState, NumericalDegeneracyError, StructuralError
from oqrw.operators import (
    TOL_PSD,
    as_operator,
    dagger,
    devectorize,
    hermitize,
    trace_norm,
    vectorize,
)

TOL_FIX = 1e-8
TOL_SPEC = 1e-8


def _kraus(model) -> np.ndarray:
    return model.kraus if hasattr(model, "kraus") else np.asarray(model, dtype=complex)


def _matched(model, x) -> tuple[np.ndarray, np.ndarray]:
    ops = _kraus(model)
    x = as_operator(x)
    if x.shape != ops.shape[1:]:
        raise StructuralError(f"operator shape {x.shape} does not match Hilbert dimension {ops.shape[1]}")
    return ops, x


def apply_channel(model, rho) -> np.ndarray:
    ops, rho = _matched(model, rho)
    out = np.zeros_like(rho)
    for a in ops:
        out += a @ rho @ a.conj().T
    return out


def apply_adjoint(model, x) -> np.ndarray:
    ops, x = _matched(model, x)
    out = np.zeros_like(x)
    for a in ops:
        out += a.conj().T @ x @ a
    return out


def superoperator(model) -> np.ndarray:
    """h^2 x h^2 matrix S with S @ vec(rho) = vec(L(rho))."""
    ops = _kraus(model)
    h = ops.shape[1]
    s = np.zeros((h * h, h * h), dtype=complex)
    for a in ops:
        s += np.kron(a.conj(), a)
    return s


def adjoint_superoperator(model) -> np.ndarray:
    """Matrix of the adjoint map; equal to the conjugate transpose of :func:`superoperator`."""
    return dagger(superoperator(model))


@dataclass(frozen=True)
class SpectralDiagnostics:
    eigenvalues: np.ndarray
    fixed_space_dim: int
    peripheral: np.ndarray
    spectral_radius: float
    singular_values: np.ndarray
    tol_fix: float

    @property
    def has_peripheral_cycle(self) -> bool:
        """Peripheral eigenvalues other than 1 are present."""
        return bool(np.any(np.abs(self.peripheral - 1.0) > self.tol_fix))

    def to_dict(self) -> dict:
        def pairs(z):
            return [[float(v.real), float(v.imag)] for v in z]

        return {
            "eigenvalues": pairs(self.eigenvalues),
            "fixed_space_dim": self.fixed_space_dim,
            "peripheral": pairs(self.peripheral),
            "spectral_radius": self.spectral_radius,
            "smallest_singular_values": [float(s) for s in self.singular_values[-4:]],
            "peripheral_cycle": self.has_peripheral_cycle,
        }


def spectral_diagnostics(model, tol_fix: float = TOL_FIX, tol_spec: float = TOL_SPEC) -> SpectralDiagnostics:
    s = superoperator(model)
    eig = np.linalg.eigvals(s)
    eig = eig[np.lexsort((eig.imag, -np.abs(eig)))]
    sv = np.linalg.svd(s - np.eye(s.shape[0]), compute_uv=False)
    return SpectralDiagnostics(
        eigenvalues=eig,
        fixed_space_dim=int(np.sum(sv < tol_fix)),
        peripheral=eig[np.abs(eig) > 1.0 - tol_spec],
        spectral_radius=float(np.abs(eig).max()),
        singular_values=sv,
        tol_fix=tol_fix,
    )


def invariant_state(model, tol_fix: float = TOL_FIX, tol_psd: float = TOL_PSD):
    """Unique invariant state of the channel and its spectral diagnostics.

    Takes the right singular vector of ``S - I`` with smallest singular value.
    Raises :class:`NonUniqueInvariantState` when more than one singular value
    is below ``tol_fix``.
    """
    diag = spectral_diagnostics(model, tol_fix)
    if diag.fixed_space_dim > 1:
        raise NonUniqueInvariantState(
            f"channel has a {diag.fixed_space_dim}-dimensional fixed space; "
            "the invariant state is not unique",
            diag.fixed_space_dim,
            diag,
        )
    s = superoperator(model)
    _, _, vh = np.linalg.svd(s - np.eye(s.shape[0]))
    fixed = devectorize(vh[-1].conj())
    tr = np.trace(fixed)
    if abs(tr) < 1e-12:
        raise NumericalDegeneracyError("fixed operator is traceless")
    # Dividing by the trace removes the arbitrary phase of the singular vector.
    rho = hermitize(fixed / tr)
    rho /= np.trace(rho).real
    lam_min = np.linalg.eigvalsh(rho).min()
    if lam_min < -tol_psd:
        raise NumericalDegeneracyError(f"fixed operator is not positive (eigenvalue {lam_min:.3e})")
    return rho, diag


def cesaro_distance(states, target) -> float:
    """Trace-norm distance between the running average of ``states`` and ``target``."""
    states = np.asarray(states, dtype=complex)
    if states.ndim == 2:
        states = states[None]
    if states.shape[0] == 0:
        raise StructuralError("need at least one state")
    return trace_norm(states.mean(axis=0) - np.asarray(target))
