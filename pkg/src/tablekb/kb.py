"""Knowledge-base assembly, persistence, and screening.

Composition and property entities pair up two ways: within one table by
shared cross-axis index, and across tables of one article by equal
normalized material id. Same-table evidence takes precedence. Unlinked
entities persist under their own link kinds so coverage tallies stay
computable. Storage is a line-delimited UTF-8 file with a versioned
header and a sidecar index from material id to record byte offsets.
"""
from __future__ import annotations

import json
import operator
from dataclasses import dataclass
from pathlib import Path

from .composition import CompositionEntity
from .errors import DataError, QueryError
from .postprocess import ExtractedTuple
from .props import BY_CODE, code_for_name
from .table import EntityId, make_entity_id

__all__ = [
    "KB_SCHEMA",
    "KBRecord",
    "normalize_gid",
    "link_article",
    "link",
    "write_kb",
    "read_kb",
    "Predicate",
    "parse_predicate",
    "screen",
    "screen_table_text",
    "tuple_to_obj",
    "tuple_from_obj",
    "composition_to_obj",
    "composition_from_obj",
]

KB_SCHEMA = "tablekb-kb/1"


def normalize_gid(gid: str) -> str:
    return gid.strip().casefold()


@dataclass(frozen=True)
class KBRecord:
    link_kind: str  # intra | inter | unlinked-property | unlinked-composition
    pii: str
    material_id: str
    composition: CompositionEntity | None
    properties: tuple[ExtractedTuple, ...]
    tables: tuple[int, ...]

    def to_obj(self) -> dict:
        return {
            "link_kind": self.link_kind,
            "pii": self.pii,
            "material_id": self.material_id,
            "composition": composition_to_obj(self.composition) if self.composition else None,
            "composition_entity": _entity_obj(self.composition.entity) if self.composition else None,
            "properties": [tuple_to_obj(t) for t in self.properties],
            "tables": list(self.tables),
        }


def _entity_obj(e: EntityId) -> dict:
    return {
        "pii": e.pii,
        "table_index": e.table_index,
        "row": e.row,
        "col": e.col,
        "material_id": e.material_id,
        "kind": e.kind,
    }


def _entity_from_obj(obj: dict) -> EntityId:
    return make_entity_id(
        obj["pii"], obj["table_index"], obj["row"], obj["col"], obj["material_id"], obj["kind"]
    )


def _comp_orientation(entity: EntityId) -> str:
    # composition anchors sit at (k, 0) in column-oriented tables and
    # (0, k) in row-oriented ones; k >= 1 keeps this unambiguous
    return "col" if entity.col == 0 else "row"


def _cross_index(entity: EntityId) -> int:
    return entity.row if _comp_orientation(entity) == "col" else entity.col


def link_article(
    comps: list[CompositionEntity], props: list[ExtractedTuple]
) -> list[KBRecord]:
    """Link one article's entities; all inputs share a pii."""
    records: list[KBRecord] = []
    used_pairs: set[tuple[str, str]] = set()
    linked_props: set[str] = set()

    intra_map: dict[int, list[ExtractedTuple]] = {}
    inter_map: dict[int, list[ExtractedTuple]] = {}
    for ci, comp in enumerate(comps):
        c_table = comp.entity.table_index
        c_idx = _cross_index(comp.entity)
        orient = _comp_orientation(comp.entity)
        c_id = comp.entity.serialize()
        for prop in props:
            if prop.entity.table_index != c_table:
                continue
            p_idx = prop.entity.row if orient == "col" else prop.entity.col
            if p_idx == c_idx:
                intra_map.setdefault(ci, []).append(prop)
                used_pairs.add((c_id, prop.entity.serialize()))
                linked_props.add(prop.entity.serialize())
    for ci, comp in enumerate(comps):
        gid = normalize_gid(comp.material_id)
        if not gid:
            continue
        c_table = comp.entity.table_index
        c_id = comp.entity.serialize()
        for prop in props:
            if prop.entity.table_index == c_table:
                continue
            if normalize_gid(prop.entity.material_id) != gid:
                continue
            if (c_id, prop.entity.serialize()) in used_pairs:
                continue  # intra takes precedence
            inter_map.setdefault(ci, []).append(prop)
            linked_props.add(prop.entity.serialize())

    for ci, comp in enumerate(comps):
        intra = intra_map.get(ci, [])
        inter = inter_map.get(ci, [])
        if intra:
            tables = sorted({comp.entity.table_index} | {p.entity.table_index for p in intra})
            records.append(
                KBRecord(
                    link_kind="intra",
                    pii=comp.entity.pii,
                    material_id=comp.material_id,
                    composition=comp,
                    properties=tuple(intra),
                    tables=tuple(tables),
                )
            )
        if inter:
            tables = sorted({comp.entity.table_index} | {p.entity.table_index for p in inter})
            records.append(
                KBRecord(
                    link_kind="inter",
                    pii=comp.entity.pii,
                    material_id=comp.material_id,
                    composition=comp,
                    properties=tuple(inter),
                    tables=tuple(tables),
                )
            )
        if not intra and not inter:
            records.append(
                KBRecord(
                    link_kind="unlinked-composition",
                    pii=comp.entity.pii,
                    material_id=comp.material_id,
                    composition=comp,
                    properties=(),
                    tables=(comp.entity.table_index,),
                )
            )

    leftovers: dict[tuple[int, str], list[ExtractedTuple]] = {}
    for prop in props:
        if prop.entity.serialize() in linked_props:
            continue
        key = (prop.entity.table_index, normalize_gid(prop.entity.material_id))
        leftovers.setdefault(key, []).append(prop)
    for (t_idx, _gid), group in leftovers.items():
        records.append(
            KBRecord(
                link_kind="unlinked-property",
                pii=group[0].entity.pii,
                material_id=group[0].entity.material_id,
                composition=None,
                properties=tuple(group),
                tables=(t_idx,),
            )
        )
    return records


def link(
    comps: list[CompositionEntity], props: list[ExtractedTuple]
) -> list[KBRecord]:
    """Group by article and link; output order follows input order."""
    piis: list[str] = []
    for e in comps:
        if e.entity.pii not in piis:
            piis.append(e.entity.pii)
    for p in props:
        if p.entity.pii not in piis:
            piis.append(p.entity.pii)
    records: list[KBRecord] = []
    for pii in piis:
        records.extend(
            link_article(
                [c for c in comps if c.entity.pii == pii],
                [p for p in props if p.entity.pii == pii],
            )
        )
    return records


def _record_to_line(record: KBRecord) -> str:
    return json.dumps(record.to_obj(), separators=(",", ":"), ensure_ascii=False, sort_keys=True)


def write_kb(records: list[KBRecord], path: str | Path, index_path: str | Path | None = None) -> None:
    path = Path(path)
    header = json.dumps({"schema": KB_SCHEMA, "count": len(records)}, separators=(",", ":"), sort_keys=True)
    lines = [header]
    offsets: dict[str, list[int]] = {}
    pos = len(header.encode("utf-8")) + 1
    for r in records:
        line = _record_to_line(r)
        gid = normalize_gid(r.material_id)
        if gid:
            offsets.setdefault(gid, []).append(pos)
        pos += len(line.encode("utf-8")) + 1
        lines.append(line)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    idx = Path(index_path) if index_path is not None else Path(str(path) + ".idx.json")
    idx.write_text(
        json.dumps(offsets, separators=(",", ":"), sort_keys=True) + "\n", encoding="utf-8"
    )


def tuple_to_obj(t: ExtractedTuple) -> dict:
    return {**t.to_obj(), "entity_fields": _entity_obj(t.entity)}


def tuple_from_obj(obj: dict) -> ExtractedTuple:
    entity = _entity_from_obj(obj["entity_fields"])
    return ExtractedTuple(
        entity=entity,
        code=code_for_name(obj["property"]),
        value=float(obj["value"]),
        unit=obj["unit"],
        value_kind=obj.get("value_kind", "single"),
    )


def composition_to_obj(comp: CompositionEntity) -> dict:
    return {**comp.to_obj(), "entity_fields": _entity_obj(comp.entity)}


def composition_from_obj(obj: dict) -> CompositionEntity:
    return CompositionEntity(
        entity=_entity_from_obj(obj["entity_fields"]),
        constituents=tuple(
            (c["constituent"], float(c["value"]), c["unit"]) for c in obj["constituents"]
        ),
        material_id=obj["material_id"],
        complete=bool(obj["complete"]),
    )


def read_kb(path: str | Path) -> list[KBRecord]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise DataError(f"{path}: empty knowledge base file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: bad header: {exc}") from exc
    if header.get("schema") != KB_SCHEMA:
        raise DataError(f"{path}: unsupported schema {header.get('schema')!r}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            comp = None
            if obj["composition"] is not None:
                comp = composition_from_obj(obj["composition"])
            props = tuple(tuple_from_obj(p) for p in obj["properties"])
            records.append(
                KBRecord(
                    link_kind=obj["link_kind"],
                    pii=obj["pii"],
                    material_id=obj["material_id"],
                    composition=comp,
                    properties=props,
                    tables=tuple(obj["tables"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad record: {exc}") from exc
    return records


_OPS = {
    ">=": operator.ge,
    "<=": operator.le,
    ">": operator.gt,
    "<": operator.lt,
    "==": operator.eq,
    "=": operator.eq,
    "!=": operator.ne,
}


@dataclass(frozen=True)
class Predicate:
    code: int
    op: str
    threshold: float
    unit: str | None = None


def parse_predicate(text: str) -> Predicate:
    """Parse 'property>=value@unit' (unit optional)."""
    for op in (">=", "<=", "==", "!=", ">", "<", "="):
        if op in text:
            name, _, rest = text.partition(op)
            rest = rest.strip()
            unit: str | None = None
            if "@" in rest:
                rest, _, unit = rest.partition("@")
                unit = unit.strip() or None
            try:
                code = code_for_name(name.strip())
            except KeyError as exc:
                raise QueryError(f"unknown property in predicate: {name.strip()!r}") from exc
            try:
                threshold = float(rest.strip())
            except ValueError as exc:
                raise QueryError(f"bad threshold in predicate: {rest.strip()!r}") from exc
            return Predicate(code=code, op=op, threshold=threshold, unit=unit)
    raise QueryError(f"no comparator in predicate: {text!r}")


def screen(records: list[KBRecord], predicates: list[Predicate]) -> list[KBRecord]:
    """Conjunctive filter; each predicate needs one satisfying tuple in
    its unit."""
    out = []
    for record in records:
        ok = True
        for pred in predicates:
            fn = _OPS[pred.op]
            hit = False
            for t in record.properties:
                if t.code != pred.code:
                    continue
                if (t.unit or "") != (pred.unit or ""):
                    continue
                if fn(t.value, pred.threshold):
                    hit = True
                    break
            if not hit:
                ok = False
                break
        if ok:
            out.append(record)
    return out


def screen_table_text(records: list[KBRecord]) -> str:
    """Delimited tabular rendering of screen results."""
    lines = ["pii\tmaterial_id\tlink_kind\tproperty\tvalue\tunit"]
    for r in records:
        if not r.properties:
            lines.append(f"{r.pii}\t{r.material_id}\t{r.link_kind}\t-\t-\t-")
        for t in r.properties:
            key = BY_CODE[t.code].key
            unit = t.unit if t.unit else "-"
            lines.append(f"{r.pii}\t{r.material_id}\t{r.link_kind}\t{key}\t{t.value:g}\t{unit}")
    return "\n".join(lines) + "\n"
