"""Versioned binary container for trained models and fitted statistics.

Layout (all integers little-endian):

    magic "CSDG" | version u32 | metadata length u64 | metadata (UTF-8 INI)
    | tensor count u64 | per tensor: name length u32, name bytes,
      rank u32, dims u64 each, values as little-endian float64 (C order)

The metadata block records the stage (classifier or flow), hyperparameters,
the schema digest, the normalization stats and the seed, so a checkpoint is
self-describing and mismatched artifacts fail loudly. Round-trips are
bit-exact.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .classifier import PreferenceClassifier
from .errors import CheckpointError
from .flow import ConditionalFlow

MAGIC = b"CSDG"
VERSION = 1
STAGES = ("classifier", "flow")


# -- raw container -------------------------------------------------------------

def write_container(path, metadata_text: str, tensors: "OrderedDict[str, np.ndarray]") -> None:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    meta = metadata_text.encode("utf-8")
    buf.write(struct.pack("<Q", len(meta)))
    buf.write(meta)
    buf.write(struct.pack("<Q", len(tensors)))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        name_b = name.encode("utf-8")
        buf.write(struct.pack("<I", len(name_b)))
        buf.write(name_b)
        buf.write(struct.pack("<I", arr.ndim))
        for dim in arr.shape:
            buf.write(struct.pack("<Q", dim))
        buf.write(arr.tobytes())
    Path(path).write_bytes(buf.getvalue())


def read_container(path) -> tuple[str, "OrderedDict[str, np.ndarray]"]:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    buf = io.BytesIO(raw)

    def take(n: int, what: str) -> bytes:
        b = buf.read(n)
        if len(b) != n:
            raise CheckpointError(f"truncated checkpoint {path}: short read at {what}")
        return b

    if take(4, "magic") != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic bytes)")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise CheckpointError(f"{path}: format version {version} not supported "
                              f"(expected {VERSION})")
    (meta_len,) = struct.unpack("<Q", take(8, "metadata length"))
    metadata_text = take(meta_len, "metadata").decode("utf-8")
    (count,) = struct.unpack("<Q", take(8, "tensor count"))
    tensors: OrderedDict[str, np.ndarray] = OrderedDict()
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "tensor name length"))
        name = take(name_len, "tensor name").decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, "tensor rank"))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank, "tensor dims"))
        n_vals = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(take(8 * n_vals, f"tensor {name!r} data"), dtype="<f8")
        tensors[name] = data.reshape(dims).astype(np.float64)
    if buf.read(1):
        raise CheckpointError(f"{path}: trailing bytes after the last tensor")
    return metadata_text, tensors


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- metadata helpers -----------------------------------------------------------

def _new_ini() -> configparser.ConfigParser:
    ini = configparser.ConfigParser(interpolation=None)
    ini.optionxform = str
    return ini


def _ini_text(ini: configparser.ConfigParser) -> str:
    out = io.StringIO()
    ini.write(out)
    return out.getvalue()


def _parse_meta(text: str, path) -> configparser.ConfigParser:
    ini = _new_ini()
    try:
        ini.read_string(text)
    except configparser.Error as exc:
        raise CheckpointError(f"{path}: unreadable metadata block: {exc}") from exc
    return ini


def _stats_section(ini, norm_stats: dict) -> None:
    ini["stats"] = {name: f"{mean!r} {std!r}" for name, (mean, std) in norm_stats.items()}


def _read_stats(ini) -> dict:
    out = {}
    for name, value in ini["stats"].items():
        mean, std = value.split()
        out[name] = (float(mean), float(std))
    return out


def _check_header(ini, path, expected_stage: str, schema, upstream) -> None:
    head = ini["checkpoint"]
    if head["stage"] != expected_stage:
        raise CheckpointError(f"{path}: stage mismatch: expected {expected_stage!r}, "
                              f"found {head['stage']!r}")
    if schema is not None and head["schema_digest"] != schema.digest():
        raise CheckpointError(f"{path}: schema digest {head['schema_digest']} does not "
                              f"match the provided schema ({schema.digest()})")
    if upstream is not None and head.get("classifier_sha256") != upstream:
        raise CheckpointError(f"{path}: built against classifier checkpoint "
                              f"{head.get('classifier_sha256')}, expected {upstream}")


def _ints(values) -> str:
    return ", ".join(str(int(v)) for v in values)


def _parse_ints(text: str) -> tuple:
    return tuple(int(tok.strip()) for tok in text.split(",") if tok.strip())


# -- classifier stage -----------------------------------------------------------

def save_classifier_checkpoint(path, clf: PreferenceClassifier, schema,
                               norm_stats: dict, seed: int) -> None:
    ini = _new_ini()
    ini["checkpoint"] = {
        "stage": "classifier",
        "seed": str(int(seed)),
        "schema_digest": schema.digest(),
        "d_in": str(clf.n_features_in_),
        "k": str(len(clf.classes_)),
        "frozen": str(bool(getattr(clf, "frozen_", False))),
    }
    ini["hyper"] = {
        "hidden_sizes": _ints(clf.hidden_sizes),
        "dim_z": str(clf.dim_z),
        "epochs": str(clf.epochs),
        "batch_size": str(clf.batch_size),
        "lr": repr(float(clf.lr)),
        "beta1": repr(float(clf.beta1)),
        "beta2": repr(float(clf.beta2)),
        "eps": repr(float(clf.eps)),
        "weight_decay": repr(float(clf.weight_decay)),
        "random_state": str(clf.random_state),
    }
    _stats_section(ini, norm_stats)
    write_container(path, _ini_text(ini), clf.parameter_arrays())


def load_classifier_checkpoint(path, schema=None) -> tuple[PreferenceClassifier, dict]:
    text, tensors = read_container(path)
    ini = _parse_meta(text, path)
    _check_header(ini, path, "classifier", schema, None)
    head, hyper = ini["checkpoint"], ini["hyper"]
    clf = PreferenceClassifier(
        hidden_sizes=_parse_ints(hyper["hidden_sizes"]),
        dim_z=int(hyper["dim_z"]),
        epochs=int(hyper["epochs"]),
        batch_size=int(hyper["batch_size"]),
        lr=float(hyper["lr"]),
        beta1=float(hyper["beta1"]),
        beta2=float(hyper["beta2"]),
        eps=float(hyper["eps"]),
        weight_decay=float(hyper["weight_decay"]),
        n_classes=int(head["k"]),
        random_state=int(hyper["random_state"]),
    )
    clf.restore_arrays(int(head["d_in"]), int(head["k"]), tensors,
                       frozen=head["frozen"] == "True")
    meta = {"seed": int(head["seed"]), "schema_digest": head["schema_digest"],
            "norm_stats": _read_stats(ini)}
    return clf, meta


# -- flow stage -------------------------------------------------------------------

def save_flow_checkpoint(path, flow: ConditionalFlow, schema, norm_stats: dict,
                         seed: int, classifier_sha256: str) -> None:
    ini = _new_ini()
    ini["checkpoint"] = {
        "stage": "flow",
        "seed": str(int(seed)),
        "schema_digest": schema.digest(),
        "dim_x": str(flow.dim_x_),
        "dim_z": str(flow.dim_z_),
        "classifier_sha256": classifier_sha256,
    }
    ini["hyper"] = {
        "n_layers": str(flow.n_layers),
        "hidden_sizes": _ints(flow.hidden_sizes),
        "alpha": repr(float(flow.alpha)),
        "epochs": str(flow.epochs),
        "batch_size": str(flow.batch_size),
        "lr": repr(float(flow.lr)),
        "lr_final": "none" if flow.lr_final is None else repr(float(flow.lr_final)),
        "beta1": repr(float(flow.beta1)),
        "beta2": repr(float(flow.beta2)),
        "eps": repr(float(flow.eps)),
        "random_state": str(flow.random_state),
    }
    _stats_section(ini, norm_stats)
    write_container(path, _ini_text(ini), flow.parameter_arrays())


def load_flow_checkpoint(path, schema=None,
                         classifier_sha256=None) -> tuple[ConditionalFlow, dict]:
    text, tensors = read_container(path)
    ini = _parse_meta(text, path)
    _check_header(ini, path, "flow", schema, classifier_sha256)
    head, hyper = ini["checkpoint"], ini["hyper"]
    flow = ConditionalFlow(
        n_layers=int(hyper["n_layers"]),
        hidden_sizes=_parse_ints(hyper["hidden_sizes"]),
        alpha=float(hyper["alpha"]),
        epochs=int(hyper["epochs"]),
        batch_size=int(hyper["batch_size"]),
        lr=float(hyper["lr"]),
        lr_final=None if hyper["lr_final"] == "none" else float(hyper["lr_final"]),
        beta1=float(hyper["beta1"]),
        beta2=float(hyper["beta2"]),
        eps=float(hyper["eps"]),
        random_state=int(hyper["random_state"]),
    )
    flow.restore_arrays(int(head["dim_x"]), int(head["dim_z"]), tensors)
    meta = {"seed": int(head["seed"]), "schema_digest": head["schema_digest"],
            "classifier_sha256": head["classifier_sha256"],
            "norm_stats": _read_stats(ini)}
    return flow, meta
