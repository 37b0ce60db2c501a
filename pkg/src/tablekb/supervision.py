"""Distant supervision: align table lines against a reference database.

For each property the database contributes a value pool; table lines are
matched under a small family of recoverable reporting transforms (unit
scale for density, Celsius/Kelvin shifts for temperatures). One
transform is chosen per (table, property) by total match count, ties
resolved toward identity. A line is labeled when its match density over
numeric cells clears a threshold. Composition lines are matched under an
absolute tolerance, only where no property matched.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .errors import DataError
from .props import BY_CODE, BY_KEY, COMPOSITION, OTHER
from .table import Table, find_num

__all__ = [
    "RefRecord",
    "ReferenceDatabase",
    "TRANSFORMS",
    "AlignmentResult",
    "align_table",
    "align_dataset",
]

TRANSFORMS: dict[str, object] = {
    "identity": lambda v: v,
    "plus273": lambda v: v + 273.0,
    "minus273": lambda v: v - 273.0,
    "times1000": lambda v: v * 1000.0,
    "div1000": lambda v: v / 1000.0,
}

# a matched transform implies how the table reported the quantity
TRANSFORM_UNIT_HINTS: dict[tuple[int, str], str] = {
    (13, "times1000"): "g/cm3",
    (13, "div1000"): "kg/m3",
}
for _code in (5, 6, 7, 8, 9, 10):
    TRANSFORM_UNIT_HINTS[(_code, "plus273")] = "degC"
    TRANSFORM_UNIT_HINTS[(_code, "minus273")] = "K"


@dataclass(frozen=True)
class RefRecord:
    record_id: str
    composition: tuple[tuple[str, float], ...]
    properties: tuple[tuple[str, float, str], ...]  # (property key, value, unit)


@dataclass(frozen=True)
class ReferenceDatabase:
    records: tuple[RefRecord, ...]

    @staticmethod
    def load(path: str | Path) -> "ReferenceDatabase":
        records = []
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read reference database {path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                comp = tuple(sorted((str(k), float(v)) for k, v in obj.get("composition", {}).items()))
                props = []
                for key, entry in obj.get("properties", {}).items():
                    if key not in BY_KEY:
                        raise ValueError(f"unknown property key: {key}")
                    props.append((key, float(entry["value"]), str(entry.get("unit") or "")))
                records.append(
                    RefRecord(
                        record_id=str(obj["id"]),
                        composition=comp,
                        properties=tuple(sorted(props)),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"reference database line {lineno}: {exc}") from exc
        return ReferenceDatabase(records=tuple(records))

    def save(self, path: str | Path) -> None:
        lines = []
        for r in self.records:
            obj = {
                "id": r.record_id,
                "composition": {k: v for k, v in r.composition},
                "properties": {k: {"value": v, "unit": u} for k, v, u in r.properties},
            }
            lines.append(json.dumps(obj, separators=(",", ":"), ensure_ascii=False, sort_keys=True))
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    def property_pool(self, code: int) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """Values, source record indices, and units for one property."""
        key = BY_CODE[code].key
        vals, idxs, units = [], [], []
        for i, r in enumerate(self.records):
            for k, v, u in r.properties:
                if k == key:
                    vals.append(v)
                    idxs.append(i)
                    units.append(u)
        return np.asarray(vals, dtype=np.float64), np.asarray(idxs, dtype=np.int64), units

    def composition_pool(self) -> tuple[np.ndarray, np.ndarray]:
        vals, idxs = [], []
        for i, r in enumerate(self.records):
            for _k, v in r.composition:
                vals.append(v)
                idxs.append(i)
        return np.asarray(vals, dtype=np.float64), np.asarray(idxs, dtype=np.int64)


@dataclass
class AlignmentResult:
    transforms: dict[int, str] = field(default_factory=dict)
    axis_density: dict[tuple[str, int], float] = field(default_factory=dict)
    labeled: list[tuple[str, int, int]] = field(default_factory=list)  # (axis, index, code)
    candidates: list[tuple[str, int, int, int, float, str]] = field(default_factory=list)
    # candidates entries: (axis, line index, cell offset, db record index, value, unit hint)
    orientation: str = ""


def _transforms_for(code: int, cfg: PipelineConfig) -> list[str]:
    sup = cfg.supervision
    if code in sup.temperature_codes:
        return ["identity", "plus273", "minus273"]
    if code in sup.scale_transform_codes:
        return ["identity", "times1000", "div1000"]
    return ["identity"]


def _rel_tol(code: int, cfg: PipelineConfig) -> float:
    for c, t in cfg.supervision.rel_tol_overrides:
        if c == code:
            return t
    return cfg.supervision.rel_tol


def _match_matrix(values: np.ndarray, pool: np.ndarray, rel_tol: float) -> np.ndarray:
    """Boolean (len(values), len(pool)): relative closeness per pair."""
    if values.size == 0 or pool.size == 0:
        return np.zeros((values.size, pool.size), dtype=bool)
    diff = np.abs(values[:, None] - pool[None, :])
    scale = np.maximum(np.abs(values[:, None]), np.abs(pool[None, :]))
    return diff <= np.maximum(rel_tol * scale, 1e-12)


def _lines(table: Table) -> list[tuple[str, int, list[tuple[int, float]]]]:
    """All table lines with their numeric cells as (offset, value)."""
    out = []
    for j in range(table.num_cols):
        nums = []
        for i in range(1, table.num_rows):
            p = find_num(table.cells[i][j])
            if p is not None:
                nums.append((i, p.value))
        out.append(("col", j, nums))
    for i in range(table.num_rows):
        nums = []
        for j in range(1, table.num_cols):
            p = find_num(table.cells[i][j])
            if p is not None:
                nums.append((j, p.value))
        out.append(("row", i, nums))
    return out


def align_table(table: Table, db: ReferenceDatabase, cfg: PipelineConfig) -> tuple[Table, AlignmentResult]:
    """Label lines of one table by value agreement with the database."""
    result = AlignmentResult()
    sup = cfg.supervision
    row_labels = list(table.row_labels)
    col_labels = list(table.col_labels)
    lines = _lines(table)

    def label_of(axis: str, idx: int) -> int:
        return col_labels[idx] if axis == "col" else row_labels[idx]

    def set_label(axis: str, idx: int, code: int) -> None:
        if axis == "col":
            col_labels[idx] = code
        else:
            row_labels[idx] = code

    property_hit: set[tuple[str, int]] = set()
    for code in sorted(BY_CODE):
        pool, pool_idx, _units = db.property_pool(code)
        if pool.size == 0:
            continue
        tol = _rel_tol(code, cfg)
        names = _transforms_for(code, cfg)
        per_transform: dict[str, list[np.ndarray]] = {}
        totals: dict[str, int] = {}
        for name in names:
            fn = TRANSFORMS[name]
            mats = []
            total = 0
            for _axis, _idx, nums in lines:
                vals = np.asarray([fn(v) for _o, v in nums], dtype=np.float64)
                mat = _match_matrix(vals, pool, tol)
                mats.append(mat)
                total += int(mat.any(axis=1).sum())
            per_transform[name] = mats
            totals[name] = total
        best = max(names, key=lambda n: totals[n])  # ties keep earliest; identity is first
        if totals[best] == 0:
            continue
        result.transforms[code] = best
        unit_hint = TRANSFORM_UNIT_HINTS.get((code, best), "")
        for (axis, idx, nums), mat in zip(lines, per_transform[best]):
            if not nums:
                continue
            hits = mat.any(axis=1)
            density = float(hits.sum()) / len(nums)
            dkey = (axis, idx)
            result.axis_density[dkey] = max(result.axis_density.get(dkey, 0.0), density)
            if density >= sup.match_density_min:
                property_hit.add(dkey)
                for (offset, _v), row_hits in zip(nums, mat):
                    if row_hits.any():
                        rec = int(pool_idx[int(np.argmax(row_hits))])
                        result.candidates.append((axis, idx, offset, rec, _v, unit_hint))
                if label_of(axis, idx) == OTHER:
                    set_label(axis, idx, code)
                    result.labeled.append((axis, idx, code))

    comp_pool, comp_idx = db.composition_pool()
    if comp_pool.size:
        for axis, idx, nums in lines:
            if not nums or (axis, idx) in property_hit or label_of(axis, idx) != OTHER:
                continue
            vals = np.asarray([v for _o, v in nums], dtype=np.float64)
            mat = np.abs(vals[:, None] - comp_pool[None, :]) <= sup.composition_abs_tol
            density = float(mat.any(axis=1).sum()) / len(nums)
            if density >= sup.match_density_min:
                set_label(axis, idx, COMPOSITION)
                result.labeled.append((axis, idx, COMPOSITION))
                for (offset, v), row_hits in zip(nums, mat):
                    if row_hits.any():
                        rec = int(comp_idx[int(np.argmax(row_hits))])
                        result.candidates.append((axis, idx, offset, rec, v, ""))

    col_hits = sum(1 for a, _i, _c in result.labeled if a == "col")
    row_hits = sum(1 for a, _i, _c in result.labeled if a == "row")
    if col_hits or row_hits:
        result.orientation = "col" if col_hits >= row_hits else "row"
    return table.with_labels(row_labels=row_labels, col_labels=col_labels), result


def align_dataset(
    tables: list[Table], db: ReferenceDatabase, cfg: PipelineConfig
) -> tuple[list[Table], list[AlignmentResult]]:
    out_tables, out_results = [], []
    for t in tables:
        nt, res = align_table(t, db, cfg)
        out_tables.append(nt)
        out_results.append(res)
    return out_tables, out_results
