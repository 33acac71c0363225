"""Deterministic evolution of the lattice state sum_i rho_i ⊗ |i><i|.

One step maps rho'_i = sum_j A_j rho_{i - e_j} A_j^*; site probabilities are
Tr(rho_i). Occupied sites are kept as a sorted coordinate array with a
matching stack of h x h blocks.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from oqrw.errors import StructuralError
from oqrw.operators import check_density_matrix


@dataclass(frozen=True)
class SiteDistribution:
    sites: np.ndarray   # (S, d) int64, lexicographically sorted
    blocks: np.ndarray  # (S, h, h) complex
    step_count: int = 0

    @classmethod
    def point_mass(cls, rho0, site) -> "SiteDistribution":
        rho0 = check_density_matrix(rho0)
        site = np.atleast_1d(np.asarray(site, dtype=np.int64))
        return cls(site[None, :].copy(), rho0[None].copy(), 0)

    @property
    def lattice_dim(self) -> int:
        return self.sites.shape[1]

    def __len__(self) -> int:
        return self.sites.shape[0]

    def as_dict(self) -> dict:
        return {tuple(int(x) for x in s): b for s, b in zip(self.sites, self.blocks)}

    def total_trace(self) -> float:
        return float(np.trace(self.blocks, axis1=1, axis2=2).real.sum())

    def translated(self, shift) -> "SiteDistribution":
        return SiteDistribution(self.sites + np.asarray(shift, dtype=np.int64), self.blocks, self.step_count)


def evolve_step(dist: SiteDistribution, model, prune: float = 0.0) -> SiteDistribution:
    """Apply the lattice map once.

    Contributions reach each target in operator order j = 1..2d, so the
    floating-point result does not depend on how sites are stored. With
    ``prune > 0`` blocks whose trace falls below it are dropped.
    """
    steps = model.steps
    if dist.lattice_dim != steps.shape[1]:
        raise StructuralError(f"distribution lives on Z^{dist.lattice_dim}, model on Z^{steps.shape[1]}")
    ops = model.kraus
    rho = dist.blocks
    contrib = np.einsum("jab,sbc,jdc->jsad", ops, rho, ops.conj())
    targets = (dist.sites[None, :, :] + steps[:, None, :]).reshape(-1, steps.shape[1])
    contrib = contrib.reshape(-1, *rho.shape[1:])
    sites, inverse = np.unique(targets, axis=0, return_inverse=True)
    blocks = np.zeros((len(sites),) + rho.shape[1:], dtype=complex)
    np.add.at(blocks, inverse.reshape(-1), contrib)
    if prune > 0:
        keep = np.trace(blocks, axis1=1, axis2=2).real >= prune
        sites, blocks = sites[keep], blocks[keep]
    return SiteDistribution(sites, blocks, dist.step_count + 1)


def evolve(dist: SiteDistribution, model, n_steps: int, prune: float = 0.0) -> SiteDistribution:
    for _ in range(n_steps):
        dist = evolve_step(dist, model, prune)
    return dist


def site_probabilities(dist: SiteDistribution) -> dict:
    probs = np.trace(dist.blocks, axis1=1, axis2=2).real
    return {tuple(int(x) for x in s): float(p) for s, p in zip(dist.sites, probs)}


def distribution_moments(dist: SiteDistribution):
    """Exact mean vector and covariance matrix of the site distribution."""
    p = np.trace(dist.blocks, axis1=1, axis2=2).real
    x = dist.sites.astype(float)
    mean = p @ x / p.sum()
    centered = x - mean
    cov = (centered * p[:, None]).T @ centered / p.sum()
    return mean, cov


def memory_estimate(n_steps: int, lattice_dim: int, hilbert_dim: int) -> int:
    """Upper bound in bytes for the blocks after ``n_steps`` from a point mass."""
    return (2 * n_steps + 1) ** lattice_dim * hilbert_dim**2 * 16


def to_csv(dist: SiteDistribution) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = dist.lattice_dim
    w.writerow([f"x{i + 1}" for i in range(d)] + ["probability"])
    probs = np.trace(dist.blocks, axis1=1, axis2=2).real
    for s, p in zip(dist.sites, probs):
        w.writerow([int(v) for v in s] + [repr(float(p))])
    return buf.getvalue()
