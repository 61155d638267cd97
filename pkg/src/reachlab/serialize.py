"""JSON reading and writing with exact float round-trips and located parse errors."""

from __future__ import annotations

import enum
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from reachlab.diagrams import EmbeddingSpec, PersistenceDiagram
from reachlab.errors import DomainError, InputError
from reachlab.orlicz import OrliczCost
from reachlab.spaces import MetricSpace, space_from_descriptor
from reachlab.transport import DiscreteMeasure


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return f"{x:.17g}"


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits.

    Non-finite floats use the ``NaN``/``Infinity`` tokens that ``json.loads``
    accepts, so the output always re-parses to the same values.
    """
    out: list[str] = []
    _write(obj, out, 0, indent)
    return "".join(out) + "\n"


def _write(obj: Any, out: list[str], level: int, indent: int) -> None:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, enum.Enum):
        obj = obj.value
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append({None: "null", True: "true", False: "false"}[None if obj is None else bool(obj)])
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for k, (key, val) in enumerate(obj.items()):
            out.append(("," if k else "") + pad + json.dumps(str(key)) + ": ")
            _write(val, out, level + 1, indent)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in seq):
            out.append("[")
            for k, v in enumerate(seq):
                out.append((", " if k else ""))
                _write(v, out, level + 1, indent)
            out.append("]")
            return
        out.append("[")
        for k, v in enumerate(seq):
            out.append(("," if k else "") + pad)
            _write(v, out, level + 1, indent)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def loads(text: str, source: str = "<input>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc


def read_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return loads(text, str(path))


def write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from exc


# --- descriptors ---------------------------------------------------------------------


def space_from_json(obj: Any) -> MetricSpace:
    return space_from_descriptor(obj)


def measure_to_json(mu: DiscreteMeasure) -> dict:
    return {
        "space": mu.space.descriptor(),
        "atoms": [{"point": mu.space.point_to_json(q), "weight": w} for q, w in mu.atoms],
    }


def measure_from_json(obj: Any, space: MetricSpace | None = None) -> DiscreteMeasure:
    """Measure descriptor; an explicit ``space`` overrides (and must match) the embedded one."""
    if not isinstance(obj, dict) or "atoms" not in obj:
        raise DomainError('measure JSON needs an "atoms" list')
    if space is None:
        if "space" not in obj:
            raise DomainError("measure JSON has no space and none was supplied")
        space = space_from_descriptor(obj["space"])
    elif "space" in obj and space_from_descriptor(obj["space"]) != space:
        raise DomainError("measure space does not match the supplied space")
    try:
        atoms = tuple((space.point_from_json(a["point"]), float(a["weight"])) for a in obj["atoms"])
    except (KeyError, TypeError) as exc:
        raise DomainError(f'each atom needs "point" and "weight": {exc}') from exc
    return DiscreteMeasure(space, atoms)


def gauge_from_json(obj: Any) -> OrliczCost:
    if not isinstance(obj, dict):
        raise DomainError("gauge descriptor must be a JSON object")
    try:
        return OrliczCost.from_descriptor(obj)
    except KeyError as exc:
        raise DomainError(f"gauge descriptor missing field {exc}") from exc


def diagram_from_json(obj: Any) -> PersistenceDiagram:
    return PersistenceDiagram.from_json(obj)


def embedding_from_json(obj: Any, space: MetricSpace) -> EmbeddingSpec:
    """Embedding spec; ``"landmarks": "all"`` takes every vertex of a finite graph."""
    if not isinstance(obj, dict) or "landmarks" not in obj:
        raise DomainError('embedding JSON needs "landmarks"')
    lm = obj["landmarks"]
    if lm == "all":
        n = len(getattr(space, "vertices", ()))
        if not n:
            raise DomainError('"landmarks": "all" needs a finite_graph')
        pts = tuple(space.point(i) for i in range(n))
    else:
        pts = tuple(space.point_from_json(q) for q in lm)
    return EmbeddingSpec(space, pts, obj.get("c"))
