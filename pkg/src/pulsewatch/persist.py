"""Canonical JSON documents for models and run reports.

Keys are sorted, indentation is two spaces and every float is written with
10 significant digits, so ``dumps(loads(text)) == text`` for anything this
module wrote.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import PulseWatchError
from .model import PersonalModel

__all__ = [
    "SCHEMA_VERSION",
    "ModelDocument",
    "SchemaError",
    "dumps",
    "atomic_write",
    "sha256_bytes",
    "save_model",
    "load_model",
]

SCHEMA_VERSION = 1


class SchemaError(PulseWatchError, ValueError):
    pass


def _encode(value, indent: int) -> str:
    pad = "  " * indent
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise SchemaError(f"cannot serialize non-finite float {value!r}")
        text = format(value, ".10g")
        if not math.isfinite(float(text)):  # rounding up past the float maximum
            text = repr(value)
        return "0" if text == "-0" else text
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=True)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {_encode(value[k], indent + 1)}'
            for k in sorted(value, key=str)
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in value):
            return "[" + ", ".join(_encode(v, indent + 1) for v in value) + "]"
        items = [f"{pad}  {_encode(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if hasattr(value, "item"):  # numpy scalar
        return _encode(value.item(), indent)
    raise SchemaError(f"cannot serialize {type(value).__name__}")


def dumps(obj) -> str:
    return _encode(obj, 0) + "\n"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def atomic_write(path, data: bytes | str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class ModelDocument:
    model: PersonalModel
    provenance: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "model": self.model.to_dict(),
            "provenance": self.provenance,
        }

    def dumps(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "ModelDocument":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"model document is not valid JSON: {exc}") from None
        if not isinstance(d, dict) or d.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema_version {d.get('schema_version') if isinstance(d, dict) else None!r}")
        try:
            model = PersonalModel.from_dict(d["model"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"invalid model section: {exc}") from None
        return cls(model=model, provenance=d.get("provenance", {}), schema_version=SCHEMA_VERSION)


def save_model(path, doc: ModelDocument) -> None:
    atomic_write(path, doc.dumps())


def load_model(path) -> ModelDocument:
    return ModelDocument.loads(Path(path).read_text(encoding="utf-8"))
