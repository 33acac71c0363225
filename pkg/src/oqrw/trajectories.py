"""Quantum-trajectory sampling of the walk.

From (rho, X) the chain jumps to (A_j rho A_j^* / p_j, X + e_j) with
probability p_j = Tr(A_j rho A_j^*). The site marginal of X_n is the walk's
distribution at time n.

Every trajectory draws its uniforms from its own Philox stream keyed by
(base_seed, trajectory index). Ensembles are cut into fixed-size chunks of
consecutive indices, so results do not depend on the number of workers.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from oqrw.errors import ImpossibleStateError, NumericalIntegrityError, StructuralError
from oqrw.operators import check_density_matrix

DEFAULT_SEED = 20120522
CHUNK_SIZE = 1000
UNIFORM_BLOCK = 1024
TOL_PROB_SUM = 1e-9
TOL_NEG_PROB = 1e-12
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int = DEFAULT_SEED
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = ((int(self.stream_id) & _MASK64) << 64) | (int(self.seed) & _MASK64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class TrajectoryState:
    rho: np.ndarray
    site: np.ndarray
    step: int = 0


@dataclass(frozen=True)
class JumpRecord:
    counts: np.ndarray
    jumps: np.ndarray | None = None

    @property
    def n_steps(self) -> int:
        return int(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        return self.counts / max(self.n_steps, 1)


def _effects(kraus: np.ndarray) -> np.ndarray:
    return np.einsum("jba,jbc->jac", kraus.conj(), kraus)


def _jump_probabilities(effects, rhos) -> np.ndarray:
    p = np.einsum("jac,nca->nj", effects, rhos).real
    low = p.min()
    if low < -TOL_NEG_PROB:
        raise NumericalIntegrityError(f"negative jump probability {low:.3e}")
    p = np.clip(p, 0.0, None)
    total = p.sum(axis=1)
    if np.any(total == 0.0):
        raise ImpossibleStateError("all jump probabilities vanished")
    dev = np.abs(total - 1.0).max()
    if dev > TOL_PROB_SUM:
        raise NumericalIntegrityError(f"jump probabilities sum to 1 only within {dev:.3e}")
    return p / total[:, None]


def _choose(p, u) -> np.ndarray:
    cdf = np.cumsum(p, axis=1)
    above = cdf > u[:, None]
    choice = np.argmax(above, axis=1)
    missed = ~above.any(axis=1)
    if missed.any():
        # u rounded past the last cumulative value: take the last allowed jump
        last = p.shape[1] - 1 - np.argmax((p > 0)[:, ::-1], axis=1)
        choice[missed] = last[missed]
    return choice


def _advance(kraus, effects, rhos, u):
    """One jump for every row of ``rhos``; returns (new states, chosen directions)."""
    p = _jump_probabilities(effects, rhos)
    j = _choose(p, u)
    a = kraus[j]
    new = a @ rhos @ np.conj(np.swapaxes(a, 1, 2))
    tr = np.trace(new, axis1=1, axis2=2).real
    new /= tr[:, None, None]
    new = 0.5 * (new + np.conj(np.swapaxes(new, 1, 2)))
    return new, j


def step(state: TrajectoryState, model, rng: np.random.Generator):
    """Single jump of one trajectory; returns ``(new_state, direction_index)``."""
    kraus = model.kraus
    u = np.array([rng.random()])
    new, j = _advance(kraus, _effects(kraus), state.rho[None], u)
    jj = int(j[0])
    site = np.asarray(state.site, dtype=np.int64) + model.steps[jj]
    return TrajectoryState(new[0], site, state.step + 1), jj


def _simulate(kraus, steps, rho0, x0, n_steps, generators, track_cesaro=True, keep_jumps=False):
    """Advance one trajectory per generator for ``n_steps`` jumps."""
    n = len(generators)
    effects = _effects(kraus)
    rhos = np.repeat(rho0[None], n, axis=0)
    counts = np.zeros((n, kraus.shape[0]), dtype=np.int64)
    cesaro = np.zeros_like(rhos) if track_cesaro else None
    jumps = np.empty((n, n_steps), dtype=np.int16) if keep_jumps else None
    rows = np.arange(n)
    done = 0
    while done < n_steps:
        block = min(UNIFORM_BLOCK, n_steps - done)
        uniforms = np.stack([g.random(block) for g in generators])
        for k in range(block):
            rhos, j = _advance(kraus, effects, rhos, uniforms[:, k])
            counts[rows, j] += 1
            if track_cesaro:
                cesaro += rhos
            if keep_jumps:
                jumps[:, done + k] = j
        done += block
    sites = np.asarray(x0, dtype=np.int64)[None, :] + counts @ steps
    if track_cesaro and n_steps > 0:
        cesaro /= n_steps
    return rhos, sites, counts, cesaro, jumps


def run_trajectory(model, rho0, x0, n_steps: int, rng, keep_jumps: bool = True):
    """One trajectory of ``n_steps`` jumps.

    ``rng`` is an :class:`RngStream` or a numpy ``Generator``. Returns the
    final :class:`TrajectoryState`, the :class:`JumpRecord` and the Cesàro
    average (1/n) sum_{k=1..n} rho_k.
    """
    if n_steps < 1:
        raise StructuralError("n_steps must be >= 1")
    rho0 = check_density_matrix(rho0)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.int64))
    rhos, sites, counts, cesaro, jumps = _simulate(
        model.kraus, model.steps, rho0, x0, n_steps, [gen], True, keep_jumps
    )
    record = JumpRecord(counts[0], None if jumps is None else jumps[0].astype(np.int64))
    return TrajectoryState(rhos[0], sites[0], n_steps), record, cesaro[0]


@dataclass
class EnsembleResult:
    final_sites: np.ndarray   # (N, D)
    counts: np.ndarray        # (N, J)
    final_states: np.ndarray  # (N, h, h)
    cesaro: np.ndarray | None
    x0: np.ndarray
    n_steps: int
    base_seed: int

    @property
    def n_traj(self) -> int:
        return self.final_sites.shape[0]

    @property
    def displacements(self) -> np.ndarray:
        return self.final_sites - self.x0[None, :]

    def records(self) -> list:
        return [JumpRecord(c) for c in self.counts]


def _chunk_job(args):
    kraus, steps, rho0, x0, n_steps, seed, start, stop, track_cesaro = args
    gens = [RngStream(seed, i).generator() for i in range(start, stop)]
    rhos, sites, counts, cesaro, _ = _simulate(kraus, steps, rho0, x0, n_steps, gens, track_cesaro)
    return rhos, sites, counts, cesaro


def simulate_ensemble(
    model,
    rho0,
    x0,
    n_steps: int,
    n_traj: int,
    base_seed: int = DEFAULT_SEED,
    workers: int = 1,
    track_cesaro: bool = True,
    chunk_size: int = CHUNK_SIZE,
) -> EnsembleResult:
    if n_steps < 1 or n_traj < 1:
        raise StructuralError("n_steps and n_traj must be positive")
    rho0 = check_density_matrix(rho0)
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.int64))
    if x0.shape != (model.steps.shape[1],):
        raise StructuralError(f"initial site must have length {model.steps.shape[1]}")
    kraus = np.array(model.kraus)
    steps = np.array(model.steps)
    jobs = [
        (kraus, steps, rho0, x0, n_steps, base_seed, s, min(s + chunk_size, n_traj), track_cesaro)
        for s in range(0, n_traj, chunk_size)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_job, jobs))
    else:
        parts = [_chunk_job(job) for job in jobs]
    return EnsembleResult(
        final_sites=np.concatenate([p[1] for p in parts]),
        counts=np.concatenate([p[2] for p in parts]),
        final_states=np.concatenate([p[0] for p in parts]),
        cesaro=np.concatenate([p[3] for p in parts]) if track_cesaro else None,
        x0=x0,
        n_steps=n_steps,
        base_seed=base_seed,
    )


@dataclass
class EmpiricalStats:
    samples: int
    n_steps: int
    standardized: bool
    mean: np.ndarray
    covariance: np.ndarray
    standard_errors: np.ndarray
    drift_mean: np.ndarray
    drift_standard_errors: np.ndarray
    covariance_standard_errors: np.ndarray
    histograms: list = field(default_factory=list)
    cesaro_state: np.ndarray | None = None

    def to_dict(self) -> dict:
        from oqrw.modelio import encode_matrix

        return {
            "samples": self.samples,
            "n_steps": self.n_steps,
            "statistic": "(X_n - X_0 - n m) / sqrt(n)" if self.standardized else "(X_n - X_0) / n",
            "mean": self.mean.tolist(),
            "covariance": self.covariance.tolist(),
            "standard_errors": self.standard_errors.tolist(),
            "covariance_standard_errors": self.covariance_standard_errors.tolist(),
            "drift_mean": self.drift_mean.tolist(),
            "drift_standard_errors": self.drift_standard_errors.tolist(),
            "histograms": [
                {"values": [int(v) for v in vals], "counts": [int(c) for c in cnts]}
                for vals, cnts in self.histograms
            ],
            "cesaro_state": None if self.cesaro_state is None else encode_matrix(self.cesaro_state),
        }


def ensemble_stats(ens: EnsembleResult, m=None) -> EmpiricalStats:
    """Moments of (X_n - n m)/sqrt(n) when ``m`` is given, of X_n / n otherwise."""
    n = ens.n_steps
    disp = ens.displacements.astype(float)
    N = disp.shape[0]
    if N < 2:
        raise StructuralError("need at least two trajectories")
    values = (disp - n * np.asarray(m, dtype=float)) / np.sqrt(n) if m is not None else disp / n
    mean = values.mean(axis=0)
    cov = np.atleast_2d(np.cov(values, rowvar=False))
    centered = values - mean
    prods = centered[:, :, None] * centered[:, None, :]
    cov_se = prods.std(axis=0, ddof=1) / np.sqrt(N)
    drift_vals = disp / n
    hists = [np.unique(ens.displacements[:, k], return_counts=True) for k in range(disp.shape[1])]
    return EmpiricalStats(
        samples=N,
        n_steps=n,
        standardized=m is not None,
        mean=mean,
        covariance=cov,
        standard_errors=np.sqrt(np.diag(cov) / N),
        drift_mean=drift_vals.mean(axis=0),
        drift_standard_errors=drift_vals.std(axis=0, ddof=1) / np.sqrt(N),
        covariance_standard_errors=cov_se,
        histograms=hists,
        cesaro_state=None if ens.cesaro is None else ens.cesaro.mean(axis=0),
    )


def monte_carlo(
    model,
    rho0,
    x0,
    n_steps: int,
    n_traj: int,
    base_seed: int = DEFAULT_SEED,
    workers: int = 1,
    m=None,
) -> EmpiricalStats:
    if n_traj < 2:
        raise StructuralError("n_traj must be >= 2")
    ens = simulate_ensemble(model, rho0, x0, n_steps, n_traj, base_seed, workers)
    return ensemble_stats(ens, m)


def zscores(stats: EmpiricalStats, m, C) -> dict:
    """Per-entry z-scores of empirical drift and covariance against analytic values.

    Entries with zero standard error get z = 0 when the difference is exactly
    zero and ``None`` otherwise.
    """

    def z(diff, se):
        out = np.full(diff.shape, np.nan)
        ok = se > 0
        out[ok] = diff[ok] / se[ok]
        out[~ok & (diff == 0)] = 0.0
        return [[None if np.isnan(v) else float(v) for v in row] for row in np.atleast_2d(out)]

    m = np.asarray(m, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    cov = stats.covariance if stats.standardized else stats.covariance * stats.n_steps
    cov_se = stats.covariance_standard_errors if stats.standardized else stats.covariance_standard_errors * stats.n_steps
    return {
        "drift": z(stats.drift_mean - m, stats.drift_standard_errors)[0],
        "covariance": z(cov - C, cov_se),
    }


@dataclass
class Classification:
    labels: np.ndarray
    fractions: np.ndarray
    standard_errors: np.ndarray
    distances: np.ndarray
    ambiguous: bool

    def to_dict(self) -> dict:
        return {
            "fractions": self.fractions.tolist(),
            "standard_errors": self.standard_errors.tolist(),
            "ambiguous": self.ambiguous,
        }


def classify_by_drift(records, candidates) -> Classification:
    """Label each trajectory with the candidate jump-frequency vector nearest to its own.

    ``records`` is a list of :class:`JumpRecord` or an (N, J) array of jump counts.
    """
    if isinstance(records, np.ndarray):
        counts = records
    else:
        counts = np.stack([r.counts for r in records])
    counts = np.asarray(counts, dtype=float)
    freqs = counts / counts.sum(axis=1, keepdims=True)
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    if cand.shape[1] != freqs.shape[1]:
        raise StructuralError(f"candidates have length {cand.shape[1]}, records {freqs.shape[1]}")
    dist = np.linalg.norm(freqs[:, None, :] - cand[None, :, :], axis=2)
    labels = np.argmin(dist, axis=1)
    N = len(labels)
    fractions = np.bincount(labels, minlength=len(cand)) / N
    se = np.sqrt(fractions * (1 - fractions) / N)
    ambiguous = False
    if len(cand) > 1:
        gaps = np.linalg.norm(cand[:, None] - cand[None], axis=2)
        min_gap = gaps[~np.eye(len(cand), dtype=bool)].min()
        noise_floor = float(np.median(dist[np.arange(N), labels]))
        if min_gap < 2 * noise_floor:
            ambiguous = True
            warnings.warn(
                f"candidate frequencies are {min_gap:.3g} apart, within twice the noise floor {noise_floor:.3g}",
                stacklevel=2,
            )
    return Classification(labels, fractions, se, dist, ambiguous)
