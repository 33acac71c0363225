"""Constructors for the reference models shipped in ``oqrw/models``.

``write_bundled`` regenerates the JSON files from these constructors.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.linalg import expm, block_diag

from oqrw.modelio import ModelFile, save_model
from oqrw.operators import RecordModel, WalkModel, kraus_from_unitary

SQRT3 = np.sqrt(3.0)


def bc_pair():
    """Left-mover B and right-mover C of the two-level walk on Z."""
    B = np.array([[1, 1], [0, 1]], dtype=complex) / SQRT3
    C = np.array([[1, 0], [-1, 1]], dtype=complex) / SQRT3
    return B, C


def trivial_pair(p: float = 0.5):
    B = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
    C = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex)
    return B, C


def bc_walk() -> WalkModel:
    B, C = bc_pair()
    return WalkModel(1, [C, B], name="bc_walk")


def trivial_walk(p: float = 0.5) -> WalkModel:
    B, C = trivial_pair(p)
    return WalkModel(1, [C, B], name="trivial_walk")


def nwse_operators(lam: float = 0.75, alpha: float = 0.25, beta: float = 0.25):
    """N, W, S, E for the two-dimensional combination of two walks on Z.

    gamma is fixed by alpha^2 + beta^2 + gamma^2 = 1.
    """
    gamma = np.sqrt(1.0 - alpha**2 - beta**2)
    B, C = bc_pair()
    N = np.sqrt(lam) * B
    S = np.sqrt(lam) * C
    W = np.sqrt(1 - lam) * np.array([[0, alpha], [0, beta]], dtype=complex)
    E = np.sqrt(1 - lam) * np.array([[1, 0], [0, gamma]], dtype=complex)
    return N, W, S, E


def oqrw_2d(lam: float = 0.75, alpha: float = 0.25, beta: float = 0.25) -> WalkModel:
    """E steps +e_1, N steps +e_2, W steps -e_1, S steps -e_2."""
    N, W, S, E = nwse_operators(lam, alpha, beta)
    return WalkModel(2, [E, N, W, S], name="oqrw_2d_corrected")


def oqrw_2d_printed_operators():
    """The 2D family with E = diag(1, sqrt(7/2)) / 4, which is not normalized."""
    N, W, S, _ = nwse_operators()
    E = np.diag([1.0, np.sqrt(3.5)]).astype(complex) / 4
    return [E, N, W, S]


def spontaneous_emission_unitary(h: float = 1.0) -> np.ndarray:
    sp = np.array([[0, 1], [0, 0]], dtype=complex)
    sm = sp.T.copy()
    H = 1j * np.kron(sp, sm) - 1j * np.kron(sm, sp)
    return expm(-1j * h * H)


def spontaneous_emission(h: float = 1.0) -> RecordModel:
    rec = kraus_from_unitary(spontaneous_emission_unitary(h), 2, 2)
    return RecordModel(rec.kraus, name="spontaneous_emission")


def bc_record() -> RecordModel:
    B, C = bc_pair()
    return RecordModel([B, C], name="bc_record")


def direct_sum(*models: WalkModel) -> WalkModel:
    d = models[0].lattice_dim
    ops = [block_diag(*(m.kraus[i] for m in models)) for i in range(2 * d)]
    return WalkModel(d, ops, name="direct_sum")


def block_projectors(dims) -> list:
    total = sum(dims)
    out, start = [], 0
    for k in dims:
        p = np.zeros((total, total), dtype=complex)
        p[start:start + k, start:start + k] = np.eye(k)
        out.append(p)
        start += k
    return out


def blocks_direct_sum() -> WalkModel:
    m = direct_sum(bc_walk(), trivial_walk())
    return WalkModel(1, m.kraus, name="blocks_direct_sum")


def _pure0(h):
    rho = np.zeros((h, h), dtype=complex)
    rho[0, 0] = 1
    return rho


def bundled_files() -> dict[str, ModelFile]:
    files = {}
    files["bc_walk"] = ModelFile(
        "walk", bc_walk(), 2, _pure0(2), np.zeros(1, dtype=np.int64),
        name="bc_walk",
        description="Two-level walk on Z: A_1 = C = [[1,0],[-1,1]]/sqrt3 (right), A_2 = B = [[1,1],[0,1]]/sqrt3 (left).",
    )
    files["trivial_walk"] = ModelFile(
        "walk", trivial_walk(0.5), 2, _pure0(2), np.zeros(1, dtype=np.int64),
        name="trivial_walk",
        description="Degenerate walk with p = 1/2: A_1 = diag(1, sqrt(1-p)) (right), A_2 = [[0, sqrt p],[0,0]] (left).",
    )
    files["oqrw_2d_corrected"] = ModelFile(
        "walk", oqrw_2d(), 2, np.eye(2, dtype=complex) / 2, np.zeros(2, dtype=np.int64),
        name="oqrw_2d_corrected",
        description=(
            "Walk on Z^2 with lambda = 3/4, alpha = beta = 1/4; operator order E (+e1), N (+e2), W (-e1), S (-e2). "
            "E = diag(1, sqrt(7/8))/2 restores normalization; the often-quoted E = diag(1, sqrt(7/2))/4 "
            "has the same (2,2) entry but a wrong (1,1) entry."
        ),
    )
    files["bc_record"] = ModelFile(
        "record", bc_record(), 2, _pure0(2), np.zeros(2, dtype=np.int64),
        name="bc_record",
        description="Measurement record of the channel rho -> B rho B* + C rho C* with M_1 = B, M_2 = C.",
    )
    files["spontaneous_emission"] = ModelFile(
        "record", spontaneous_emission(1.0), 2, np.eye(2, dtype=complex) / 2, np.zeros(2, dtype=np.int64),
        name="spontaneous_emission",
        description="Spontaneous emission record at interaction time h = 1 rad: M_1 = diag(1, cos h), M_2 = [[0, sin h],[0,0]].",
    )
    rho0 = np.diag([0.5, 0, 0.5, 0]).astype(complex)
    files["blocks_direct_sum"] = ModelFile(
        "walk", blocks_direct_sum(), 4, rho0, np.zeros(1, dtype=np.int64),
        blocks=block_projectors([2, 2]),
        name="blocks_direct_sum",
        description="bc_walk (+) trivial_walk, started from (1/2)(diag(1,0) (+) diag(1,0)).",
    )
    return files


def write_bundled(directory=None) -> list[Path]:
    directory = Path(directory) if directory else Path(__file__).parent / "models"
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, mf in bundled_files().items():
        path = directory / f"{name}.json"
        save_model(mf, path)
        written.append(path)
    return written


if __name__ == "__main__":
    for p in write_bundled():
        print(p)
