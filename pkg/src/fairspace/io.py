"""Space and map files.

Space JSON::

    {"points": [...], "groups": [...], "measure": [...],   # measure optional
     "embedding": [[...], ...]}                            # or "dist": [[...], ...]

CSV spaces carry an embedding: header ``id,group,x1,..,xm``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import FairspaceError
from .spaces import GroupedMetricSpace, SpaceMap, from_embedding, validate_space

SPACE_KEYS = {"points", "groups", "measure", "embedding", "dist", "name", "group_names"}
MAP_KEYS = {"domain", "codomain", "assignment"}


def space_to_dict(space: GroupedMetricSpace) -> dict:
    out = {
        "points": list(space.ids),
        "groups": [space.group_names[g - 1] for g in space.groups],
        "group_names": list(space.group_names),
        "measure": space.measure.tolist(),
    }
    if space.embedding is not None:
        out["embedding"] = space.embedding.tolist()
    else:
        out["dist"] = space.dist.tolist()
    if space.name:
        out["name"] = space.name
    return out


def space_from_dict(data, name: str = "") -> GroupedMetricSpace:
    if not isinstance(data, dict):
        raise FairspaceError("SCHEMA_ERROR", "space file must hold a JSON object")
    unknown = set(data) - SPACE_KEYS
    if unknown:
        raise FairspaceError("SCHEMA_ERROR", f"unknown keys {sorted(unknown)}")
    if "points" not in data or "groups" not in data:
        raise FairspaceError("SCHEMA_ERROR", "space needs 'points' and 'groups'")
    if ("embedding" in data) == ("dist" in data):
        raise FairspaceError("SCHEMA_ERROR", "exactly one of 'embedding' and 'dist' is required")
    for key in ("points", "groups"):
        if not isinstance(data[key], list):
            raise FairspaceError("SCHEMA_ERROR", f"'{key}' must be a list")
    name = data.get("name", name)
    try:
        if "embedding" in data:
            return from_embedding(data["embedding"], data["groups"], data.get("measure"), data["points"],
                                  group_names=data.get("group_names"), name=name)
        return validate_space(data["dist"], data.get("measure"), data["groups"], data["points"],
                              group_names=data.get("group_names"), name=name)
    except (TypeError, ValueError) as exc:
        raise FairspaceError("SCHEMA_ERROR", f"malformed numeric data: {exc}")


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FairspaceError("IO_ERROR", str(exc))


def _load_csv(text: str, name: str) -> GroupedMetricSpace:
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise FairspaceError("SCHEMA_ERROR", "empty CSV")
    header = [h.strip() for h in rows[0]]
    m = len(header) - 2
    if header[:2] != ["id", "group"] or m < 1 or header[2:] != [f"x{i}" for i in range(1, m + 1)]:
        raise FairspaceError("SCHEMA_ERROR", "CSV header must be id,group,x1..xm")
    ids, groups, emb = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FairspaceError("SCHEMA_ERROR", f"line {lineno}: expected {len(header)} fields")
        ids.append(row[0].strip())
        groups.append(row[1].strip())
        try:
            emb.append([float(v) for v in row[2:]])
        except ValueError:
            raise FairspaceError("SCHEMA_ERROR", f"line {lineno}: non-numeric coordinate")
    return from_embedding(emb, groups, None, ids, name=name)


def parse_space_file(path) -> GroupedMetricSpace:
    """Load and validate a space from ``.json`` or ``.csv``."""
    text = _read_text(path)
    name = Path(path).stem
    if str(path).lower().endswith(".csv"):
        return _load_csv(text, name)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FairspaceError("SCHEMA_ERROR", f"invalid JSON: {exc}")
    return space_from_dict(data, name)


def map_to_dict(f: SpaceMap) -> dict:
    return {"domain": f.domain_name, "codomain": f.codomain_name, "assignment": f.assignment}


def parse_map_file(path, domain: GroupedMetricSpace, codomain: GroupedMetricSpace) -> SpaceMap:
    try:
        data = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise FairspaceError("SCHEMA_ERROR", f"invalid JSON: {exc}")
    if not isinstance(data, dict) or not isinstance(data.get("assignment"), dict):
        raise FairspaceError("SCHEMA_ERROR", "map file needs an 'assignment' object")
    unknown = set(data) - MAP_KEYS
    if unknown:
        raise FairspaceError("SCHEMA_ERROR", f"unknown keys {sorted(unknown)}")
    return SpaceMap.from_assignment(domain, codomain, {str(k): str(v) for k, v in data["assignment"].items()})


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
