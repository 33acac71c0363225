"""JSON model files.

Schema::

    {
      "kind": "walk" | "record",
      "name": str, "description": str,           # optional metadata
      "lattice_dim": int,                         # walks only
      "hilbert_dim": int,
      "operators": [op, ...],                     # 2d for walks, n for records
      "initial_state": op,                        # optional, defaults to I/h
      "initial_site": [int, ...],                 # optional, defaults to origin
      "blocks": [op, ...]                         # optional orthogonal projectors
    }

Each ``op`` is row-major: a list of rows, each row a list of ``[re, im]`` pairs.
A flat list of h*h pairs is also accepted.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from oqrw.errors import OQRWError
from oqrw.operators import RecordModel, WalkModel, check_density_matrix, maximally_mixed


class ModelParseError(OQRWError):
    """The model file is unreadable or does not follow the schema."""

    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(data, dim: int, location: str = "") -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelParseError(f"not a numeric array ({exc})", location) from None
    if arr.shape == (dim * dim, 2):
        arr = arr.reshape(dim, dim, 2)
    if arr.shape != (dim, dim, 2):
        raise ModelParseError(f"expected {dim}x{dim} [re, im] pairs, got array of shape {arr.shape}", location)
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass
class ModelFile:
    kind: str
    model: WalkModel | RecordModel
    hilbert_dim: int
    initial_state: np.ndarray
    initial_site: np.ndarray
    blocks: list | None = None
    name: str = ""
    description: str = ""
    notes: list = field(default_factory=list)

    @property
    def lattice_dim(self) -> int:
        return self.model.dim

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "name": self.name, "description": self.description}
        if self.kind == "walk":
            out["lattice_dim"] = self.model.lattice_dim
        out["hilbert_dim"] = self.hilbert_dim
        out["operators"] = [encode_matrix(a) for a in self.model.kraus]
        out["initial_state"] = encode_matrix(self.initial_state)
        out["initial_site"] = [int(x) for x in self.initial_site]
        if self.blocks is not None:
            out["blocks"] = [encode_matrix(p) for p in self.blocks]
        return out


def _require(doc, key, location):
    if key not in doc:
        raise ModelParseError(f"missing required key '{key}'", location)
    return doc[key]


def decode_operators(doc: dict, source: str = "<model>") -> list:
    """Decode the operator list without checking normalization."""
    if not isinstance(doc, dict):
        raise ModelParseError("top level must be an object", source)
    h = _require(doc, "hilbert_dim", source)
    if not isinstance(h, int) or h < 1:
        raise ModelParseError("hilbert_dim must be a positive integer", f"{source}:hilbert_dim")
    raw_ops = _require(doc, "operators", source)
    if not isinstance(raw_ops, list) or not raw_ops:
        raise ModelParseError("operators must be a non-empty list", f"{source}:operators")
    return [decode_matrix(op, h, f"{source}:operators[{i}]") for i, op in enumerate(raw_ops)]


def parse_model(doc: dict, tol: float | None = None, source: str = "<model>") -> ModelFile:
    """Build a :class:`ModelFile` from a decoded JSON document.

    Schema problems raise :class:`ModelParseError`; a Kraus family that is not
    normalized raises :class:`oqrw.errors.ValidationError`.
    """
    if not isinstance(doc, dict):
        raise ModelParseError("top level must be an object", source)
    kind = _require(doc, "kind", source)
    if kind not in ("walk", "record"):
        raise ModelParseError(f"kind must be 'walk' or 'record', got {kind!r}", f"{source}:kind")
    ops = decode_operators(doc, source)
    h = doc["hilbert_dim"]

    extra = {} if tol is None else {"tol": tol}
    name = str(doc.get("name", ""))
    if kind == "walk":
        d = _require(doc, "lattice_dim", source)
        if not isinstance(d, int) or d < 1:
            raise ModelParseError("lattice_dim must be a positive integer", f"{source}:lattice_dim")
        if len(ops) != 2 * d:
            raise ModelParseError(f"a walk on Z^{d} needs {2 * d} operators, got {len(ops)}", f"{source}:operators")
        model = WalkModel(d, ops, name=name, **extra)
    else:
        model = RecordModel(ops, name=name, **extra)

    notes = []
    if "initial_state" in doc:
        rho0 = check_density_matrix(decode_matrix(doc["initial_state"], h, f"{source}:initial_state"))
    else:
        rho0 = maximally_mixed(h)
        msg = f"{source}: no initial_state given, using the maximally mixed state I/{h}"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    site = doc.get("initial_site", [0] * model.dim)
    try:
        site = np.array(site, dtype=np.int64)
    except (TypeError, ValueError):
        raise ModelParseError("initial_site must be a list of integers", f"{source}:initial_site") from None
    if site.shape != (model.dim,):
        raise ModelParseError(f"initial_site must have length {model.dim}", f"{source}:initial_site")
    blocks = None
    if "blocks" in doc:
        blocks = [decode_matrix(p, h, f"{source}:blocks[{i}]") for i, p in enumerate(doc["blocks"])]
    return ModelFile(
        kind=kind,
        model=model,
        hilbert_dim=h,
        initial_state=rho0,
        initial_site=site,
        blocks=blocks,
        name=name,
        description=str(doc.get("description", "")),
        notes=notes,
    )


def bundled_names() -> list[str]:
    root = resources.files("oqrw") / "models"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_path(name_or_path: str) -> Path:
    """A filesystem path, or the name of a bundled model."""
    p = Path(name_or_path)
    if p.exists():
        return p
    bundled = resources.files("oqrw") / "models" / f"{name_or_path}.json"
    if bundled.is_file():
        return Path(str(bundled))
    raise ModelParseError(f"no such file or bundled model: {name_or_path}")


def read_document(name_or_path: str) -> tuple[dict, str]:
    """Decode the JSON text of a model file; returns ``(document, source)``."""
    path = resolve_path(name_or_path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelParseError(str(exc), str(path)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from None
    return doc, str(path)


def load_model(name_or_path: str, tol: float | None = None) -> ModelFile:
    doc, source = read_document(name_or_path)
    return parse_model(doc, tol=tol, source=source)


def save_model(model_file: ModelFile, path) -> None:
    Path(path).write_text(json.dumps(model_file.to_dict(), indent=1) + "\n")
