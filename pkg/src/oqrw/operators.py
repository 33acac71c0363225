"""Small dense operator algebra: Kraus families, density matrices, vectorization.

Matrices are plain ``numpy`` complex arrays. Vectorization stacks columns, so
``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from oqrw.errors import StructuralError, ValidationError

TOL_NORM = 1e-10
TOL_HERM = 1e-10
TOL_PSD = 1e-10
TOL_TRACE = 1e-10
TOL_UNITARY = 1e-10


def as_operator(a) -> np.ndarray:
    """Return ``a`` as a finite square complex matrix."""
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise StructuralError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise StructuralError("matrix has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def real_part(z, tol: float = 1e-10, what: str = "quantity") -> float:
    """Real part of a scalar that theory says is real; the imaginary residue must be tiny."""
    z = complex(z)
    if abs(z.imag) > tol:
        raise ValidationError(f"{what} has imaginary part {z.imag:.3e}", residual=abs(z.imag))
    return z.real


def vectorize(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization: entry (r, c) goes to index c*h + r."""
    return np.asarray(m).reshape(-1, order="F")


def devectorize(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise StructuralError(f"vector of length {v.size} is not a square operator")
    return v.reshape(dim, dim, order="F")


def trace_norm(a: np.ndarray) -> float:
    return float(np.linalg.svd(a, compute_uv=False).sum())


def is_density_matrix(rho, tol: float = TOL_PSD) -> bool:
    try:
        check_density_matrix(rho, tol)
    except (ValidationError, StructuralError):
        return False
    return True


def check_density_matrix(rho, tol: float = TOL_PSD) -> np.ndarray:
    """Validate Hermiticity, positivity and unit trace; return the matrix."""
    rho = as_operator(rho)
    herm_dev = np.abs(rho - dagger(rho)).max()
    if herm_dev > TOL_HERM:
        raise ValidationError(f"not Hermitian (deviation {herm_dev:.3e})", residual=herm_dev)
    lam_min = np.linalg.eigvalsh(hermitize(rho)).min()
    if lam_min < -tol:
        raise ValidationError(f"not positive (smallest eigenvalue {lam_min:.3e})", residual=-lam_min)
    tr_dev = abs(np.trace(rho) - 1.0)
    if tr_dev > TOL_TRACE:
        raise ValidationError(f"trace differs from 1 by {tr_dev:.3e}", residual=tr_dev)
    return rho


def maximally_mixed(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


@dataclass(frozen=True)
class KrausReport:
    residual: float
    dim: int
    n_operators: int
    valid: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "residual": self.residual,
            "hilbert_dim": self.dim,
            "n_operators": self.n_operators,
            "valid": self.valid,
            "tol": self.tol,
        }


def _stack(operators) -> np.ndarray:
    ops = [np.array(a, dtype=complex) for a in operators]
    if not ops:
        raise StructuralError("empty operator family")
    shapes = {a.shape for a in ops}
    if len(shapes) != 1:
        raise StructuralError(f"operators have mismatched shapes {sorted(shapes)}")
    stacked = np.stack(ops)
    if stacked.ndim != 3 or stacked.shape[1] != stacked.shape[2]:
        raise StructuralError(f"operators must be square, got shape {stacked.shape[1:]}")
    if not np.all(np.isfinite(stacked)):
        raise StructuralError("operators have non-finite entries")
    return stacked


def validate_kraus(operators, tol: float = TOL_NORM) -> KrausReport:
    """Report max |(sum_i A_i^* A_i - I)_jk| for a Kraus family."""
    ops = _stack(operators)
    h = ops.shape[1]
    total = np.einsum("iba,ibc->ac", ops.conj(), ops)
    residual = float(np.abs(total - np.eye(h)).max())
    return KrausReport(residual, h, ops.shape[0], residual <= tol, tol)


def normalization_defect(operators) -> np.ndarray:
    """The matrix sum_i A_i^* A_i - I."""
    ops = _stack(operators)
    return np.einsum("iba,ibc->ac", ops.conj(), ops) - np.eye(ops.shape[1])


class _KrausFamily:
    kraus: np.ndarray

    @property
    def hilbert_dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def n_jumps(self) -> int:
        return self.kraus.shape[0]

    def _check(self, tol):
        report = validate_kraus(self.kraus, tol)
        if not report.valid:
            raise ValidationError(
                f"Kraus normalization residual {report.residual:.3e} exceeds {tol:.1e}",
                residual=report.residual,
            )


@dataclass(frozen=True, eq=False)
class WalkModel(_KrausFamily):
    """Nearest-neighbour walk on Z^d.

    ``kraus[i]`` for ``i < d`` moves by ``+e_i``; ``kraus[d + i]`` moves by ``-e_i``.
    """

    lattice_dim: int
    kraus: np.ndarray
    name: str = ""
    tol: float = field(default=TOL_NORM, repr=False)

    def __post_init__(self):
        if int(self.lattice_dim) < 1:
            raise StructuralError("lattice_dim must be >= 1")
        ops = _stack(self.kraus)
        if ops.shape[0] != 2 * self.lattice_dim:
            raise StructuralError(
                f"a walk on Z^{self.lattice_dim} needs {2 * self.lattice_dim} operators, got {ops.shape[0]}"
            )
        ops.setflags(write=False)
        object.__setattr__(self, "kraus", ops)
        self._check(self.tol)

    @property
    def dim(self) -> int:
        return self.lattice_dim

    @property
    def steps(self) -> np.ndarray:
        d = self.lattice_dim
        eye = np.eye(d, dtype=np.int64)
        return np.concatenate([eye, -eye])

    def with_kraus(self, kraus) -> "WalkModel":
        return WalkModel(self.lattice_dim, kraus, self.name, self.tol)


@dataclass(frozen=True, eq=False)
class RecordModel(_KrausFamily):
    """Channel unraveled by repeated measurement; outcome i records a step e_i in Z^n."""

    kraus: np.ndarray
    name: str = ""
    tol: float = field(default=TOL_NORM, repr=False)

    def __post_init__(self):
        ops = _stack(self.kraus)
        ops.setflags(write=False)
        object.__setattr__(self, "kraus", ops)
        self._check(self.tol)

    @property
    def dim(self) -> int:
        return self.kraus.shape[0]

    @property
    def steps(self) -> np.ndarray:
        return np.eye(self.dim, dtype=np.int64)

    def as_walk(self) -> WalkModel:
        """Zero-padded walk on Z^n with A_i = M_i and A_{n+i} = 0."""
        padded = np.concatenate([self.kraus, np.zeros_like(self.kraus)])
        return WalkModel(self.dim, padded, self.name, self.tol)


def kraus_from_unitary(U, h_dim: int, k_dim: int, tol: float = TOL_UNITARY) -> RecordModel:
    """Kraus operators M_i = (I ⊗ <e_i|) U (I ⊗ |e_1>) of a system-probe unitary.

    ``U`` acts on H ⊗ K with the probe index varying fastest, i.e. row
    ``a * k_dim + i`` is system state ``a`` and probe state ``e_i``.
    """
    U = as_operator(U)
    n = h_dim * k_dim
    if U.shape != (n, n):
        raise StructuralError(f"U has shape {U.shape}, expected ({n}, {n})")
    dev = float(np.abs(dagger(U) @ U - np.eye(n)).max())
    if dev > tol:
        raise ValidationError(f"U is not unitary (deviation {dev:.3e})", residual=dev)
    blocks = U.reshape(h_dim, k_dim, h_dim, k_dim)
    kraus = [blocks[:, i, :, 0].copy() for i in range(k_dim)]
    return RecordModel(kraus)
