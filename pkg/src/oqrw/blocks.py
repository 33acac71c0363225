"""Walks whose Kraus operators are block diagonal for a given decomposition H = E_1 + ... + E_N.

The decomposition is supplied by the caller as orthogonal projectors. Each
block is analysed as a walk in its own right; a trajectory started from
rho0 ends up following block j with probability Tr(P_j rho0).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from oqrw.clt import CLTReport, jump_weights, walk_clt
from oqrw.errors import BlockStructureError, StructuralError
from oqrw.operators import TOL_NORM, WalkModel, as_operator, check_density_matrix, dagger

TOL_BLOCK = 1e-10
TOL_DISTINCT = 1e-8


@dataclass(frozen=True)
class BlockDecomposition:
    projectors: tuple   # N Hermitian projectors, h x h
    isometries: tuple   # V_j, h x k_j with orthonormal columns spanning ran P_j

    def __len__(self) -> int:
        return len(self.projectors)

    @property
    def block_dims(self) -> list[int]:
        return [V.shape[1] for V in self.isometries]


def _isometry(P: np.ndarray, tol: float) -> np.ndarray:
    # Gram-Schmidt over the projector's columns in index order, so the basis of
    # a coordinate block is the standard one.
    basis = []
    for col in P.T:
        v = col.copy()
        for b in basis:
            v = v - (b.conj() @ v) * b
        norm = np.linalg.norm(v)
        if norm > np.sqrt(tol):
            basis.append(v / norm)
    if not basis:
        raise BlockStructureError("projector has empty range", 0.0)
    return np.stack(basis, axis=1)


def verify_blocks(model: WalkModel, projectors, tol: float = TOL_BLOCK) -> BlockDecomposition:
    """Check the projector algebra and that every A_i commutes with every P_j."""
    Ps = [as_operator(P) for P in projectors]
    h = model.hilbert_dim
    if not Ps:
        raise StructuralError("empty projector list")
    for j, P in enumerate(Ps):
        if P.shape != (h, h):
            raise StructuralError(f"projector {j} has shape {P.shape}, expected {(h, h)}")
        r = float(np.abs(P - dagger(P)).max())
        if r > tol:
            raise BlockStructureError(f"projector {j} is not Hermitian", r, j)
        r = float(np.abs(P @ P - P).max())
        if r > tol:
            raise BlockStructureError(f"projector {j} is not idempotent", r, j)
    r = float(np.abs(sum(Ps) - np.eye(h)).max())
    if r > tol:
        raise BlockStructureError("projectors do not sum to the identity", r)
    for j in range(len(Ps)):
        for k in range(j + 1, len(Ps)):
            r = float(np.abs(Ps[j] @ Ps[k]).max())
            if r > tol:
                raise BlockStructureError(f"projectors {j} and {k} are not orthogonal", r, j)
    for j, P in enumerate(Ps):
        r = max(float(np.abs(P @ A - A @ P).max()) for A in model.kraus)
        if r > tol:
            raise BlockStructureError(f"Kraus operators are not block diagonal for projector {j}", r, j)
    return BlockDecomposition(tuple(Ps), tuple(_isometry(P, tol) for P in Ps))


def restrict(model: WalkModel, dec: BlockDecomposition, j: int, tol: float = TOL_NORM) -> WalkModel:
    """The walk on E_j with operators V_j* A_i V_j."""
    V = dec.isometries[j]
    ops = [dagger(V) @ A @ V for A in model.kraus]
    defect = float(np.abs(sum(dagger(A) @ A for A in ops) - np.eye(V.shape[1])).max())
    if defect > tol:
        raise BlockStructureError(f"restriction to block {j} is not trace preserving", defect, j)
    name = f"{model.name}[{j}]" if model.name else f"block{j}"
    return WalkModel(model.lattice_dim, ops, name=name)


def embed(dec: BlockDecomposition, restricted: list) -> list:
    """Reassemble full operators sum_j V_j A_i^(j) V_j* from per-block models."""
    n_ops = restricted[0].n_jumps
    return [
        sum(V @ r.kraus[i] @ dagger(V) for V, r in zip(dec.isometries, restricted))
        for i in range(n_ops)
    ]


def martingale_check(model: WalkModel, dec: BlockDecomposition, rho) -> np.ndarray:
    """Per-block sum_i Tr(P_j A_i rho A_i*) - Tr(P_j rho).

    Zero for block-diagonal models; reported rather than raised otherwise.
    """
    rho = as_operator(rho)
    out = []
    for P in dec.projectors:
        after = sum(np.trace(P @ A @ rho @ dagger(A)) for A in model.kraus)
        out.append(abs(after - np.trace(P @ rho)))
    return np.array(out)


def block_weights(dec: BlockDecomposition, rho0) -> np.ndarray:
    rho0 = check_density_matrix(rho0)
    return np.array([np.trace(P @ rho0).real for P in dec.projectors])


def block_initial_state(dec: BlockDecomposition, rho0, j: int) -> np.ndarray:
    """P_j rho0 P_j / Tr(P_j rho0): starting here samples the walk conditioned on block j."""
    P = dec.projectors[j]
    rho0 = as_operator(rho0)
    w = np.trace(P @ rho0).real
    if w <= 0:
        raise StructuralError(f"initial state has no weight on block {j}")
    return P @ rho0 @ P / w


@dataclass
class MixtureReport:
    weights: np.ndarray
    blocks: list            # CLTReport per block, in the block's own coordinates
    frequencies: np.ndarray  # (N, 2d) asymptotic jump frequencies per block
    drift_distances: np.ndarray
    frequency_distances: np.ndarray
    distinct: bool
    block_dims: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "block_dims": list(self.block_dims),
            "blocks": [
                {"m": b.m.tolist(), "C": b.C.tolist(), "jump_frequencies": q.tolist(), "report": b.to_dict()}
                for b, q in zip(self.blocks, self.frequencies)
            ],
            "drift_distances": self.drift_distances.tolist(),
            "frequency_distances": self.frequency_distances.tolist(),
            "distinct": self.distinct,
        }


def _pairwise(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)


def mixture_clt(model: WalkModel, dec: BlockDecomposition, rho0, tol_distinct: float = TOL_DISTINCT) -> MixtureReport:
    """Weights and per-block CLT parameters of a block-diagonal walk.

    Blocks are told apart by their asymptotic jump frequencies; if two blocks
    share them (closer than ``tol_distinct``) a warning is issued and
    ``distinct`` is False, so trajectory classification is not meaningful.
    """
    weights = block_weights(dec, rho0)
    reports: list[CLTReport] = []
    freqs = []
    for j in range(len(dec)):
        sub = restrict(model, dec, j)
        rep = walk_clt(sub)
        reports.append(rep)
        freqs.append(jump_weights(sub, rep.rho_inf))
    freqs = np.stack(freqs)
    drifts = np.stack([r.m for r in reports])
    dq = _pairwise(freqs)
    off = ~np.eye(len(dec), dtype=bool)
    distinct = bool(len(dec) == 1 or dq[off].min() > tol_distinct)
    if not distinct:
        warnings.warn("two blocks share their asymptotic jump frequencies; classification disabled", stacklevel=2)
    return MixtureReport(weights, reports, freqs, _pairwise(drifts), dq, distinct, dec.block_dims)
