"""On-disk formats: matrix containers, scene bundles, result sets, configs.

Matrix container (extension ``.hbm``)
-------------------------------------
Byte-exact and trivially parseable:

* magic line ``HBUM1``
* one JSON header line with keys ``dtype`` (``f64`` or ``u32``), ``rows``,
  ``cols`` and ``order`` (always ``row-major``)
* the raw little-endian payload, row-major
* a footer line ``crc32:XXXXXXXX`` checksumming header and payload

Label fields are stored as ``u32`` grids of shape (height, width) holding
1-based values; the in-memory representation is 0-based, with the shift
applied only here.

Configuration files are JSON with exhaustive validation: unknown keys are
rejected and missing required keys are reported by name.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, ValidationError
from .lattice import Lattice
from .model import (
    AbundanceMatrix,
    EndmemberMatrix,
    LabelField,
    ModelConfig,
    ObservationMatrix,
    SupervisionData,
)
from .synthgen import SceneSpec, TrainingSplit, default_cluster_means

MAGIC = b"HBUM1\n"
_DTYPES = {"f64": np.dtype("<f8"), "u32": np.dtype("<u4")}
_DTYPE_NAMES = {np.dtype("<f8"): "f64", np.dtype("<u4"): "u32"}


# ---------------------------------------------------------------------------
# Matrix container
# ---------------------------------------------------------------------------


def write_matrix(path: str | Path, arr: np.ndarray) -> None:
    """Write a 2-D float64 or uint32 array to the checksummed container."""
    arr = np.ascontiguousarray(arr)
    if arr.ndim != 2:
        raise ValidationError("only 2-D arrays are stored")
    if arr.dtype == np.float64:
        name, stored = "f64", arr.astype("<f8", copy=False)
    elif arr.dtype == np.uint32:
        name, stored = "u32", arr.astype("<u4", copy=False)
    else:
        raise ValidationError(f"unsupported dtype {arr.dtype}; use float64 or uint32")
    header = (
        json.dumps(
            {"dtype": name, "rows": arr.shape[0], "cols": arr.shape[1], "order": "row-major"},
            sort_keys=True,
        ).encode()
        + b"\n"
    )
    payload = stored.tobytes(order="C")
    crc = zlib.crc32(header + payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header)
        fh.write(payload)
        fh.write(b"crc32:%08x\n" % crc)


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a container written by :func:`write_matrix`, verifying the
    checksum. Raises :class:`DataFormatError` on any corruption."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not raw.startswith(MAGIC):
        raise DataFormatError(f"{path}: bad magic, not a matrix container")
    body = raw[len(MAGIC):]
    nl = body.find(b"\n")
    if nl < 0:
        raise DataFormatError(f"{path}: missing header line")
    header_line = body[: nl + 1]
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: malformed header: {exc}") from exc
    if set(header) != {"dtype", "rows", "cols", "order"}:
        raise DataFormatError(f"{path}: header keys {sorted(header)} unexpected")
    if header["order"] != "row-major":
        raise DataFormatError(f"{path}: unsupported element order {header['order']}")
    if header["dtype"] not in _DTYPES:
        raise DataFormatError(f"{path}: unsupported dtype {header['dtype']}")
    dtype = _DTYPES[header["dtype"]]
    try:
        rows, cols = int(header["rows"]), int(header["cols"])
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: non-integer dimensions in header") from exc
    if rows < 0 or cols < 0:
        raise DataFormatError(f"{path}: negative dimensions")
    n_bytes = rows * cols * dtype.itemsize
    rest = body[nl + 1:]
    if len(rest) != n_bytes + 15:  # payload + b"crc32:%08x\n"
        raise DataFormatError(f"{path}: truncated or oversized payload")
    payload, footer = rest[:n_bytes], rest[n_bytes:]
    if not footer.startswith(b"crc32:") or not footer.endswith(b"\n"):
        raise DataFormatError(f"{path}: malformed checksum footer")
    try:
        expected = int(footer[6:-1], 16)
    except ValueError as exc:
        raise DataFormatError(f"{path}: malformed checksum footer") from exc
    actual = zlib.crc32(header_line + payload) & 0xFFFFFFFF
    if expected != actual:
        raise DataFormatError(
            f"{path}: checksum mismatch (stored {expected:08x}, computed {actual:08x})"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(rows, cols)
    return arr.astype(np.float64 if header["dtype"] == "f64" else np.uint32)


def write_label_field(path: str | Path, field: LabelField) -> None:
    """Store a label field as a 1-based u32 grid."""
    grid = (field.grid().astype(np.int64) + 1).astype(np.uint32)
    write_matrix(path, grid)


def read_label_field(path: str | Path, domain_size: int) -> LabelField:
    grid = read_matrix(path)
    if grid.dtype != np.uint32:
        raise DataFormatError(f"{path}: label fields must be stored as u32")
    if grid.size and (grid.min() < 1 or grid.max() > domain_size):
        raise DataFormatError(f"{path}: stored labels outside 1..{domain_size}")
    lat = Lattice(grid.shape[0], grid.shape[1])
    return LabelField((grid.astype(np.int64) - 1).astype(np.int32).ravel(), domain_size, lat)


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


def _check_keys(mapping: dict, required: set[str], optional: set[str], where: str) -> None:
    missing = required - set(mapping)
    if missing:
        raise ValidationError(f"{where}: missing required field '{sorted(missing)[0]}'")
    unknown = set(mapping) - required - optional
    if unknown:
        raise ValidationError(f"{where}: unknown field '{sorted(unknown)[0]}'")


def _load_json(path: str | Path, what: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{what} {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{what} {path} must contain a JSON object")
    return data


@dataclass
class GenerateConfig:
    """Everything ``hbum generate`` needs: the scene itself, the spectral
    setup and the training split."""

    scene: SceneSpec
    n_bands: int
    endmember_file: str | None
    min_endmember_angle_deg: float
    training: TrainingSplit

    def validate(self) -> None:
        self.scene.validate()
        self.training.validate()
        if self.n_bands < 1:
            raise ValidationError("bands must be >= 1")
        if self.min_endmember_angle_deg < 5.0:
            raise ValidationError("minimum endmember angle must be at least 5 degrees")


def _parse_snr(value) -> float:
    if isinstance(value, str):
        if value.lower() in ("inf", "+inf", "infinity"):
            return np.inf
        raise ValidationError(f"snr_db string must be 'inf', got '{value}'")
    return float(value)


def load_generate_config(path: str | Path, seed_override: int | None = None) -> GenerateConfig:
    data = _load_json(path, "scene config")
    _check_keys(
        data,
        required={"scene", "training", "seed"},
        optional={"bands", "endmember_file", "min_endmember_angle_deg"},
        where=str(path),
    )
    scene_raw = data["scene"]
    if not isinstance(scene_raw, dict):
        raise ValidationError(f"{path}: 'scene' must be an object")
    _check_keys(
        scene_raw,
        required={
            "height", "width", "clusters", "classes", "endmembers", "cluster_to_class",
        },
        optional={
            "dirichlet_means", "concentration", "snr_db", "potts_beta", "potts_sweeps",
        },
        where=f"{path}:scene",
    )
    n_clusters = int(scene_raw["clusters"])
    n_endmembers = int(scene_raw["endmembers"])
    means_raw = scene_raw.get("dirichlet_means", "auto")
    if isinstance(means_raw, str):
        if means_raw != "auto":
            raise ValidationError(f"{path}: dirichlet_means must be a matrix or 'auto'")
        means = default_cluster_means(n_clusters, n_endmembers)
    else:
        means = np.asarray(means_raw, dtype=np.float64)
    cluster_to_class = np.asarray(scene_raw["cluster_to_class"], dtype=np.int64) - 1
    seed = int(data["seed"]) if seed_override is None else int(seed_override)
    spec = SceneSpec(
        height=int(scene_raw["height"]),
        width=int(scene_raw["width"]),
        n_clusters=n_clusters,
        n_classes=int(scene_raw["classes"]),
        n_endmembers=n_endmembers,
        cluster_to_class=cluster_to_class,
        dirichlet_means=means,
        concentration=float(scene_raw.get("concentration", 30.0)),
        snr_db=_parse_snr(scene_raw.get("snr_db", 30.0)),
        potts_beta=float(scene_raw.get("potts_beta", 1.1)),
        potts_sweeps=int(scene_raw.get("potts_sweeps", 40)),
        seed=seed,
    )
    training_raw = data["training"]
    if not isinstance(training_raw, dict):
        raise ValidationError(f"{path}: 'training' must be an object")
    _check_keys(
        training_raw,
        required={"fraction"},
        optional={"kind", "eta"},
        where=f"{path}:training",
    )
    training = TrainingSplit(
        kind=str(training_raw.get("kind", "top_rows")),
        fraction=float(training_raw["fraction"]),
        eta=float(training_raw.get("eta", 0.95)),
    )
    cfg = GenerateConfig(
        scene=spec,
        n_bands=int(data.get("bands", 413)),
        endmember_file=data.get("endmember_file"),
        min_endmember_angle_deg=float(data.get("min_endmember_angle_deg", 15.0)),
        training=training,
    )
    cfg.validate()
    return cfg


def load_model_config(path: str | Path, overrides: dict | None = None) -> ModelConfig:
    """Load a model config; ``overrides`` maps field names (beta1, beta2,
    iterations, burnin, seed) to command-line values taking precedence."""
    data = _load_json(path, "model config")
    _check_keys(
        data,
        required={"clusters", "classes", "endmembers", "iterations", "burnin", "seed"},
        optional={
            "beta1", "beta2", "zeta", "xi", "gamma", "inner_iters", "schedule",
            "class_proportions",
        },
        where=str(path),
    )
    merged = dict(data)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    iterations = int(merged["iterations"])
    burnin = int(merged["burnin"])
    if iterations <= burnin:
        raise ValidationError(
            f"{path}: iterations ({iterations}) must exceed burnin ({burnin})"
        )
    zeta = merged.get("zeta", 1.0)
    pi_override = merged.get("class_proportions")
    config = ModelConfig(
        n_clusters=int(merged["clusters"]),
        n_classes=int(merged["classes"]),
        n_endmembers=int(merged["endmembers"]),
        beta1=float(merged.get("beta1", 0.8)),
        beta2=float(merged.get("beta2", 0.8)),
        zeta=np.asarray(zeta, dtype=np.float64) if not np.isscalar(zeta) else float(zeta),
        xi=float(merged.get("xi", 1.0)),
        gamma=float(merged.get("gamma", 0.1)),
        n_mc=iterations - burnin,
        n_burnin=burnin,
        seed=int(merged["seed"]),
        inner_iters=int(merged.get("inner_iters", 5)),
        schedule=str(merged.get("schedule", "checkerboard")),
        pi_override=None if pi_override is None else np.asarray(pi_override, dtype=np.float64),
    )
    config.validate()
    return config


# ---------------------------------------------------------------------------
# Scene bundles and result sets
# ---------------------------------------------------------------------------

BUNDLE_FILES = (
    "Y.hbm", "M.hbm", "A_true.hbm", "z_true.hbm", "omega_true.hbm",
    "labeled.hbm", "eta.hbm",
)


def write_manifest(path: str | Path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: str | Path) -> dict:
    return _load_json(path, "manifest")


def write_bundle(
    out_dir: str | Path,
    Y: ObservationMatrix,
    M: EndmemberMatrix,
    a_true: AbundanceMatrix,
    z_true: LabelField,
    omega_true: LabelField,
    sup: SupervisionData,
    manifest: dict,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "Y.hbm", Y.data)
    write_matrix(out / "M.hbm", M.data)
    write_matrix(out / "A_true.hbm", a_true.data)
    write_label_field(out / "z_true.hbm", z_true)
    write_label_field(out / "omega_true.hbm", omega_true)
    lat = Y.lattice
    labeled = np.zeros(lat.n_pixels, dtype=np.uint32)
    labeled[sup.labeled_idx] = sup.c.astype(np.int64) + 1
    eta = np.zeros(lat.n_pixels)
    eta[sup.labeled_idx] = sup.eta
    write_matrix(out / "labeled.hbm", labeled.reshape(lat.height, lat.width))
    write_matrix(out / "eta.hbm", eta.reshape(lat.height, lat.width))
    write_manifest(out / "scene_manifest.json", manifest)


@dataclass
class SceneBundle:
    Y: ObservationMatrix
    M: EndmemberMatrix
    a_true: AbundanceMatrix
    z_true: LabelField
    omega_true: LabelField
    sup: SupervisionData
    manifest: dict


def _manifest_counts(manifest: dict, where: Path) -> tuple[int, int]:
    try:
        counts = manifest["counts"]
        return int(counts["clusters"]), int(counts["classes"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{where}: manifest lacks a usable 'counts' section") from exc


def read_bundle(bundle_dir: str | Path) -> SceneBundle:
    bdir = Path(bundle_dir)
    manifest = read_manifest(bdir / "scene_manifest.json")
    n_clusters, n_classes = _manifest_counts(manifest, bdir)
    y_data = read_matrix(bdir / "Y.hbm")
    m_data = read_matrix(bdir / "M.hbm")
    a_data = read_matrix(bdir / "A_true.hbm")
    z_true = read_label_field(bdir / "z_true.hbm", n_clusters)
    omega_true = read_label_field(bdir / "omega_true.hbm", n_classes)
    lat = z_true.lattice
    if y_data.shape[1] != lat.n_pixels:
        raise DataFormatError(f"{bdir}: observation columns do not match the label grid")
    labeled = read_matrix(bdir / "labeled.hbm").ravel()
    eta = read_matrix(bdir / "eta.hbm").ravel()
    idx = np.flatnonzero(labeled > 0)
    if idx.size == 0:
        raise DataFormatError(f"{bdir}: bundle contains no labeled pixels")
    sup = SupervisionData.from_labels(
        idx, labeled[idx].astype(np.int64) - 1, eta[idx], n_classes, lat.n_pixels
    )
    Y = ObservationMatrix(y_data, lat)
    M = EndmemberMatrix(m_data)
    Y.validate()
    M.validate()
    return SceneBundle(Y, M, AbundanceMatrix(a_data), z_true, omega_true, sup, manifest)


RESULT_FILES = (
    "A_hat.hbm", "s2_hat.hbm", "psi_hat.hbm", "sigma2_hat.hbm", "Q_hat.hbm",
    "z_map.hbm", "omega_map.hbm", "omega_freq.hbm",
)


def write_results(out_dir: str | Path, estimates, omega_freq: np.ndarray, manifest: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "A_hat.hbm", estimates.A.data)
    write_matrix(out / "s2_hat.hbm", np.array([[estimates.noise.s2]]))
    write_matrix(out / "psi_hat.hbm", estimates.clusters.psi)
    write_matrix(out / "sigma2_hat.hbm", estimates.clusters.sigma2)
    write_matrix(out / "Q_hat.hbm", estimates.q.q)
    write_label_field(out / "z_map.hbm", estimates.z)
    write_label_field(out / "omega_map.hbm", estimates.omega)
    write_matrix(out / "omega_freq.hbm", omega_freq)
    write_manifest(out / "run_manifest.json", manifest)


@dataclass
class ResultSet:
    a_hat: AbundanceMatrix
    s2_hat: float
    psi_hat: np.ndarray
    sigma2_hat: np.ndarray
    q_hat: np.ndarray
    z_map: LabelField
    omega_map: LabelField
    omega_freq: np.ndarray
    manifest: dict


def read_results(results_dir: str | Path) -> ResultSet:
    rdir = Path(results_dir)
    manifest = read_manifest(rdir / "run_manifest.json")
    n_clusters, n_classes = _manifest_counts(manifest, rdir)
    return ResultSet(
        a_hat=AbundanceMatrix(read_matrix(rdir / "A_hat.hbm")),
        s2_hat=float(read_matrix(rdir / "s2_hat.hbm")[0, 0]),
        psi_hat=read_matrix(rdir / "psi_hat.hbm"),
        sigma2_hat=read_matrix(rdir / "sigma2_hat.hbm"),
        q_hat=read_matrix(rdir / "Q_hat.hbm"),
        z_map=read_label_field(rdir / "z_map.hbm", n_clusters),
        omega_map=read_label_field(rdir / "omega_map.hbm", n_classes),
        omega_freq=read_matrix(rdir / "omega_freq.hbm"),
        manifest=manifest,
    )
