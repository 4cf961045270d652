"""File formats.

Datasets are delimiter-separated ``theta,x`` text with optional ``#``
comment lines and one optional header line. Density matrices, Wigner grids
and bootstrap results are JSON documents carrying a ``format`` tag, a
``version``, explicit dimensions and the configuration that produced them.
Complex numbers are ``[re, im]`` pairs; floats are written with Python's
shortest round-trip representation, so reading a file back is lossless.
"""

from __future__ import annotations

import json
import math
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .data import QuadratureDataset
from .wigner import WignerGrid, WignerGridSpec

FORMAT_VERSION = 1
DATASET_TAG = "homotomo-dataset"
DENSITY_MATRIX_TAG = "homotomo.density_matrix"
WIGNER_TAG = "homotomo.wigner_grid"
UNCERTAINTY_TAG = "homotomo.uncertainty"
MAX_REPORTED_ERRORS = 10


class DataFormatError(ValueError):
    """An input file could not be parsed."""


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and an atomic rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def _load_json(path, tag: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("format") != tag:
        raise DataFormatError(f"{path}: expected format {tag!r}, found {doc.get('format')!r}")
    if int(doc.get("version", -1)) != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported format version {doc.get('version')!r}")
    return doc


def complex_to_pairs(matrix) -> list:
    m = np.asarray(matrix, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def pairs_to_complex(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise DataFormatError("complex matrix must be a nested list of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

_SPLIT_WS = re.compile(r"[\s]+")


def _split(line: str, delimiter: str | None) -> list[str]:
    if delimiter is not None:
        return [f.strip() for f in line.split(delimiter)]
    if "," in line:
        return [f.strip() for f in line.split(",")]
    return _SPLIT_WS.split(line.strip())


def ingest_dataset(
    path,
    phase_unit: str = "radians",
    delimiter: str | None = None,
    eta: float = 1.0,
) -> QuadratureDataset:
    """Read ``theta<delim>x`` records, one per line.

    Lines starting with ``#`` and blank lines are skipped. The first
    remaining line is treated as a header if it does not parse as two
    numbers. Without an explicit ``delimiter`` commas are used when present,
    otherwise whitespace. Phases in degrees are converted to radians.
    ``eta`` is attached as metadata. Any malformed line aborts the read with
    the first ten offenders listed.
    """
    if phase_unit not in ("radians", "degrees"):
        raise ValueError(f"phase_unit must be 'radians' or 'degrees', got {phase_unit!r}")
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc

    thetas: list[float] = []
    xs: list[float] = []
    bad: list[str] = []
    header_allowed = True
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = _split(line, delimiter)
        try:
            if len(fields) != 2:
                raise ValueError
            theta, x = float(fields[0]), float(fields[1])
            if not (math.isfinite(theta) and math.isfinite(x)):
                raise ValueError
        except ValueError:
            if header_allowed:
                header_allowed = False
                continue
            bad.append(f"line {lineno}: {line[:80]!r}")
            continue
        header_allowed = False
        thetas.append(theta)
        xs.append(x)
    if bad:
        shown = "; ".join(bad[:MAX_REPORTED_ERRORS])
        raise DataFormatError(f"{path}: {len(bad)} malformed line(s): {shown}")
    if not xs:
        raise DataFormatError(f"{path}: no records")
    th = np.asarray(thetas)
    if phase_unit == "degrees":
        th = np.deg2rad(th)
    return QuadratureDataset(th, np.asarray(xs), eta=eta, source=str(path))


def write_dataset(path, dataset: QuadratureDataset, config: dict | None = None) -> None:
    """Write a dataset in the ingestion format; values round-trip bit-exactly."""
    out = [f"# {DATASET_TAG} {FORMAT_VERSION}\n"]
    if config is not None:
        out.append("# config: " + json.dumps(config, separators=(",", ":")) + "\n")
    out.append("theta,x\n")
    out.extend(f"{t!r},{x!r}\n" for t, x in zip(dataset.thetas.tolist(), dataset.xs.tolist()))
    atomic_write_text(path, "".join(out))


def read_dataset_config(path) -> dict | None:
    """Config echo embedded in a dataset file by :func:`write_dataset`, if any."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("# config: "):
                return json.loads(line[len("# config: "):])
    return None


# ---------------------------------------------------------------------------
# Matrices, grids, bootstrap output
# ---------------------------------------------------------------------------


def write_density_matrix(path, rho, config: dict | None = None, extra: dict | None = None) -> None:
    rho = np.asarray(rho, dtype=complex)
    doc = {
        "format": DENSITY_MATRIX_TAG,
        "version": FORMAT_VERSION,
        "dim": rho.shape[0],
        "n_max": rho.shape[0] - 1,
        "data": complex_to_pairs(rho),
        "config": config or {},
    }
    if extra:
        doc.update(extra)
    atomic_write_text(path, _dumps(doc))


def read_density_matrix(path) -> tuple[np.ndarray, dict]:
    """Return ``(rho, document)``."""
    doc = _load_json(path, DENSITY_MATRIX_TAG)
    rho = pairs_to_complex(doc["data"])
    if rho.shape != (doc["dim"], doc["dim"]):
        raise DataFormatError(f"{path}: matrix shape {rho.shape} disagrees with dim={doc['dim']}")
    return rho, doc


def write_wigner_grid(path, grid: WignerGrid, config: dict | None = None) -> None:
    doc = {
        "format": WIGNER_TAG,
        "version": FORMAT_VERSION,
        "grid": grid.spec.to_dict(),
        "provenance": grid.provenance,
        "shape": list(grid.values.shape),
        "values": grid.values.tolist(),
        "meta": grid.meta,
        "config": config or {},
    }
    atomic_write_text(path, _dumps(doc))


def read_wigner_grid(path) -> WignerGrid:
    doc = _load_json(path, WIGNER_TAG)
    spec = WignerGridSpec.from_dict(doc["grid"])
    return WignerGrid(np.asarray(doc["values"], dtype=float), spec, doc["provenance"], doc.get("meta", {}))


def write_uncertainty(path, result, config: dict | None = None) -> None:
    doc = {
        "format": UNCERTAINTY_TAG,
        "version": FORMAT_VERSION,
        "dim": result.uncertainty.shape[0],
        "uncertainty": result.uncertainty.tolist(),
        "std": result.std.tolist(),
        "trace_distance": result.trace_distance,
        "n_replicas": result.n_replicas,
        "seeds": result.seeds,
        "config": config or {},
    }
    atomic_write_text(path, _dumps(doc))


def read_uncertainty(path) -> dict:
    doc = _load_json(path, UNCERTAINTY_TAG)
    doc["uncertainty"] = np.asarray(doc["uncertainty"], dtype=float)
    doc["std"] = np.asarray(doc["std"], dtype=float)
    return doc


def write_json(path, doc: dict) -> None:
    atomic_write_text(path, _dumps(doc))
