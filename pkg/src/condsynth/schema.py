"""Tabular schema: feature columns, label classes, and the schema file format.

A schema file is INI-style text. Feature order and class order are
significant (they fix the encoded column layout and the integer class ids):

    [features]
    air_temp = numeric
    activity = categorical(seated, standing, walking)

    [label]
    name = preference
    classes = Warmer, NoChange, Cooler

Column and level names may not contain commas, parentheses, '=' or ':'.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import re
from dataclasses import dataclass, field

from .errors import DataError

__all__ = ["Feature", "Schema", "parse_schema", "read_schema", "write_schema"]

NUMERIC = "numeric"
CATEGORICAL = "categorical"

_CATEGORICAL_RE = re.compile(r"^categorical\s*\((.*)\)$")
_FORBIDDEN = re.compile(r"[,()=:\n]")


def _check_name(name: str, what: str) -> str:
    name = name.strip()
    if not name or _FORBIDDEN.search(name):
        raise DataError(f"invalid {what} name {name!r}")
    return name


@dataclass(frozen=True)
class Feature:
    """One input column: numeric, or categorical with an ordered level list."""

    name: str
    kind: str
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        _check_name(self.name, "feature")
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DataError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if len(self.levels) < 2:
                raise DataError(f"feature {self.name!r}: categorical needs >= 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise DataError(f"feature {self.name!r}: duplicate levels")
        elif self.levels:
            raise DataError(f"feature {self.name!r}: numeric column cannot have levels")

    @property
    def width(self) -> int:
        """Number of encoded columns this feature occupies."""
        return len(self.levels) if self.kind == CATEGORICAL else 1


@dataclass(frozen=True)
class Schema:
    """Ordered feature columns plus the label column and its class order."""

    features: tuple[Feature, ...]
    label: str
    classes: tuple[str, ...]
    _blocks: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.features:
            raise DataError("schema needs at least one feature")
        _check_name(self.label, "label")
        names = [f.name for f in self.features] + [self.label]
        if len(set(names)) != len(names):
            raise DataError("schema column names must be unique")
        if len(self.classes) < 2:
            raise DataError("schema needs at least 2 label classes")
        if len(set(self.classes)) != len(self.classes):
            raise DataError("duplicate label classes")
        for c in self.classes:
            _check_name(c, "class")
        blocks, start = [], 0
        for f in self.features:
            blocks.append((f, start, start + f.width))
            start += f.width
        object.__setattr__(self, "_blocks", tuple(blocks))

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def encoded_width(self) -> int:
        return self._blocks[-1][2]

    def encoded_blocks(self) -> tuple[tuple[Feature, int, int], ...]:
        """(feature, start, stop) for each feature's encoded column range."""
        return self._blocks

    def onehot_blocks(self) -> list[tuple[int, int]]:
        """Encoded column ranges occupied by one-hot expanded categoricals."""
        return [(s, e) for f, s, e in self._blocks if f.kind == CATEGORICAL]

    def class_index(self, name: str) -> int:
        try:
            return self.classes.index(name)
        except ValueError:
            raise DataError(f"unknown label class {name!r}; expected one of {list(self.classes)}") from None

    def to_text(self) -> str:
        lines = ["[features]"]
        for f in self.features:
            if f.kind == CATEGORICAL:
                lines.append(f"{f.name} = categorical({', '.join(f.levels)})")
            else:
                lines.append(f"{f.name} = numeric")
        lines += ["", "[label]", f"name = {self.label}", f"classes = {', '.join(self.classes)}", ""]
        return "\n".join(lines)

    def digest(self) -> str:
        """SHA-256 of the canonical text form; used for artifact integrity checks."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def _split_list(raw: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in raw.split(",") if part.strip())


def parse_schema(text: str) -> Schema:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep column-name case
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise DataError(f"malformed schema file: {exc}") from exc
    if not parser.has_section("features") or not parser.has_section("label"):
        raise DataError("schema file needs [features] and [label] sections")

    features = []
    for name, value in parser.items("features"):
        value = value.strip()
        if value == NUMERIC:
            features.append(Feature(name, NUMERIC))
            continue
        match = _CATEGORICAL_RE.match(value)
        if match:
            features.append(Feature(name, CATEGORICAL, _split_list(match.group(1))))
            continue
        raise DataError(f"feature {name!r}: cannot parse kind {value!r}")

    label_sec = parser["label"]
    if "name" not in label_sec or "classes" not in label_sec:
        raise DataError("schema [label] section needs 'name' and 'classes'")
    return Schema(tuple(features), label_sec["name"].strip(), _split_list(label_sec["classes"]))


def read_schema(path) -> Schema:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_schema(fh.read())
    except OSError as exc:
        raise DataError(f"cannot read schema file {path}: {exc}") from exc


def write_schema(path, schema: Schema) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(schema.to_text())
