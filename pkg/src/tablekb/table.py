"""Table data model: immutable grids, numeric cell parsing, entity ids.

Tables travel the pipeline as frozen dataclasses; stages that change labels
or shape return new instances. The document format is line-delimited JSON,
one table per line.
"""
from __future__ import annotations

import json
import math
import re
import unicodedata
from dataclasses import dataclass, replace
from typing import Iterable, Iterator

from .errors import BoundsError, TableFormatError
from .props import NUM_CLASSES

__all__ = [
    "Table",
    "NumericParse",
    "EntityId",
    "find_num",
    "clean_numeric_text",
    "make_entity_id",
    "sanitize_material_id",
    "parse_table_document",
    "iter_table_document",
    "serialize_table",
    "write_table_document",
]


@dataclass(frozen=True)
class Table:
    pii: str
    table_index: int
    caption: str
    cells: tuple[tuple[str, ...], ...]
    row_labels: tuple[int, ...]
    col_labels: tuple[int, ...]
    sum_less_100: int | None = None
    comp_table: bool = False
    augmented: bool = False
    old_row_labels: tuple[int, ...] | None = None
    old_col_labels: tuple[int, ...] | None = None

    @property
    def num_rows(self) -> int:
        return len(self.cells)

    @property
    def num_cols(self) -> int:
        return len(self.cells[0]) if self.cells else 0

    @property
    def num_cells(self) -> int:
        return self.num_rows * self.num_cols

    @staticmethod
    def build(
        pii: str,
        table_index: int,
        caption: str,
        cells: Iterable[Iterable[object]],
        row_labels: Iterable[int] | None = None,
        col_labels: Iterable[int] | None = None,
        sum_less_100: int | None = None,
        comp_table: bool = False,
        augmented: bool = False,
    ) -> "Table":
        grid = tuple(tuple(str(c) for c in row) for row in cells)
        if not grid or not grid[0]:
            raise TableFormatError(f"{pii}[{table_index}]: empty grid")
        width = len(grid[0])
        for i, row in enumerate(grid):
            if len(row) != width:
                raise TableFormatError(
                    f"{pii}[{table_index}]: ragged grid, row {i} has "
                    f"{len(row)} cells, expected {width}"
                )
        rl = tuple(row_labels) if row_labels is not None else (0,) * len(grid)
        cl = tuple(col_labels) if col_labels is not None else (0,) * width
        if len(rl) != len(grid):
            raise TableFormatError(
                f"{pii}[{table_index}]: row_labels length {len(rl)} != {len(grid)} rows"
            )
        if len(cl) != width:
            raise TableFormatError(
                f"{pii}[{table_index}]: col_labels length {len(cl)} != {width} cols"
            )
        for code in (*rl, *cl):
            if not isinstance(code, int) or isinstance(code, bool) or not 0 <= code < NUM_CLASSES:
                raise TableFormatError(f"{pii}[{table_index}]: bad label code {code!r}")
        return Table(
            pii=str(pii),
            table_index=int(table_index),
            caption=str(caption),
            cells=grid,
            row_labels=rl,
            col_labels=cl,
            sum_less_100=sum_less_100,
            comp_table=bool(comp_table),
            augmented=bool(augmented),
        )

    def with_labels(
        self, row_labels: Iterable[int] | None = None, col_labels: Iterable[int] | None = None
    ) -> "Table":
        rl = tuple(row_labels) if row_labels is not None else self.row_labels
        cl = tuple(col_labels) if col_labels is not None else self.col_labels
        if len(rl) != self.num_rows or len(cl) != self.num_cols:
            raise TableFormatError(
                f"{self.pii}[{self.table_index}]: label vector length mismatch"
            )
        return replace(self, row_labels=rl, col_labels=cl)

    def row(self, i: int) -> tuple[str, ...]:
        if not 0 <= i < self.num_rows:
            raise BoundsError(f"{self.pii}[{self.table_index}]: row {i} out of bounds")
        return self.cells[i]

    def col(self, j: int) -> tuple[str, ...]:
        if not 0 <= j < self.num_cols:
            raise BoundsError(f"{self.pii}[{self.table_index}]: col {j} out of bounds")
        return tuple(row[j] for row in self.cells)


@dataclass(frozen=True)
class NumericParse:
    value: float
    raw: str
    had_uncertainty: bool = False
    had_exponent: bool = False
    from_range: bool = False


_SUPERSCRIPTS = str.maketrans("⁰¹²³⁴⁵⁶⁷⁸⁹⁺⁻", "0123456789+-")
_RE_SUP_POW = re.compile(r"10\s*([⁺⁻]?[⁰¹²³⁴⁵⁶⁷⁸⁹]+)")
_PLAIN = r"\d+\.?\d*|\.\d+"
_RE_CITATION = re.compile(r"\[\s*\d+(?:\s*[,;]\s*\d+)*\s*\]")
_RE_PAREN_UNC = re.compile(r"(?<=\d)\(\d+\)")
_RE_THOUSANDS = re.compile(r"(?<=\d),(?=\d{3}(?:\D|$))")
_RE_SCI = re.compile(
    rf"([+-]?(?:{_PLAIN}))\s*[xX*]\s*10\s*\^?\s*([+-]?\d+)"
)
_RE_POW10 = re.compile(r"(?<![\w.])10\s*\^\s*([+-]?\d+)(?![\w.])")
_RE_ENOT = re.compile(rf"(?<![\w.])([+-]?(?:{_PLAIN})[eE][+-]?\d+)(?![\w.])")
_RE_RANGE = re.compile(
    rf"(?<![\w.+-])([+-]?(?:{_PLAIN}))\s*-\s*((?:{_PLAIN}))(?![\w.])"
)
_RE_FIRST = re.compile(rf"(?<![\w.])([+-]?(?:{_PLAIN}))(?![\w])")


def clean_numeric_text(text: str) -> str:
    """Normalize typography ahead of numeric parsing (shared with the
    header exponent repair)."""
    return _preclean(text)


def _preclean(text: str) -> str:
    # a superscripted power of ten must keep its caret, otherwise the
    # translated digits read as a dash range
    s = _RE_SUP_POW.sub(lambda m: "10^" + m.group(1).translate(_SUPERSCRIPTS), text)
    s = s.translate(_SUPERSCRIPTS)
    s = unicodedata.normalize("NFKC", s)
    s = s.replace("−", "-").replace("–", "-").replace("—", "-")
    s = s.replace("×", "x").replace("⋅", "x").replace("·", "x")
    s = s.replace("+/-", "±")
    s = _RE_CITATION.sub(" ", s)
    s = _RE_PAREN_UNC.sub("", s)
    s = _RE_THOUSANDS.sub("", s)
    s = re.sub(r"(?<![\w.])[~<>≤≥≈]\s*(?=[\d+-.])", "", s)
    return s


def _first_value(s: str) -> tuple[float, bool, bool] | None:
    """Extract the leading numeric value of an already-cleaned fragment.

    Returns (value, had_uncertainty, had_exponent) or None. Pattern priority:
    mantissa-x-10^e, e-notation, bare power of ten, dash range (midpoint),
    plain number.
    """
    candidates: list[tuple[int, float, bool, bool]] = []
    m = _RE_SCI.search(s)
    if m:
        candidates.append((m.start(), float(m.group(1)) * 10.0 ** int(m.group(2)), False, True))
    m = _RE_ENOT.search(s)
    if m:
        candidates.append((m.start(), float(m.group(1)), False, True))
    m = _RE_POW10.search(s)
    if m:
        candidates.append((m.start(), 10.0 ** int(m.group(1)), False, True))
    m = _RE_RANGE.search(s)
    if m:
        lo, hi = float(m.group(1)), float(m.group(2))
        candidates.append((m.start(), (lo + hi) / 2.0, True, False))
    m = _RE_FIRST.search(s)
    if m:
        candidates.append((m.start(), float(m.group(1)), False, False))
    if not candidates:
        return None
    # earliest match wins; ties broken by pattern priority (insertion order)
    best = min(candidates, key=lambda c: c[0])
    _, value, unc, exp = best
    return value, unc, exp


def find_num(text: str | None) -> NumericParse | None:
    """Parse the central numeric value out of a table cell.

    Handles uncertainty (value kept, range collapsed to its midpoint),
    scientific notation in its typographic variants, embedded units or
    words, citation brackets, and thousands separators. Returns None when
    the cell carries no number.
    """
    if text is None:
        return None
    raw = str(text)
    if not raw.strip():
        return None
    s = _preclean(raw)
    had_unc = False
    if "±" in s:
        s = s.split("±", 1)[0]
        had_unc = True
    got = _first_value(s)
    if got is None:
        return None
    value, range_unc, had_exp = got
    if not math.isfinite(value):
        return None
    return NumericParse(
        value=value,
        raw=raw,
        had_uncertainty=had_unc or range_unc,
        had_exponent=had_exp,
        from_range=range_unc,
    )


@dataclass(frozen=True)
class EntityId:
    pii: str
    table_index: int
    row: int
    col: int
    material_id: str
    kind: str  # "property" | "composition"

    def serialize(self) -> str:
        mid = sanitize_material_id(self.material_id)
        if self.kind == "composition":
            return f"{self.pii}_{self.table_index}_{self.row}_{self.col}_0_{mid}"
        return f"{self.pii}_{self.table_index}_{self.row}_{self.col}_{mid}"


def sanitize_material_id(material_id: str) -> str:
    return material_id.strip().replace("_", "-")


def make_entity_id(
    pii: str, table_index: int, row: int, col: int, material_id: str, kind: str
) -> EntityId:
    if kind not in ("property", "composition"):
        raise ValueError(f"unknown entity kind: {kind!r}")
    if table_index < 0 or row < 0 or col < 0:
        raise BoundsError(
            f"{pii}: negative index in entity id (t={table_index}, r={row}, c={col})"
        )
    return EntityId(
        pii=str(pii),
        table_index=table_index,
        row=row,
        col=col,
        material_id=material_id,
        kind=kind,
    )


_FIELDS_REQUIRED = ("pii", "table_index", "cells")


def _table_from_obj(obj: dict, where: str) -> Table:
    if not isinstance(obj, dict):
        raise TableFormatError(f"{where}: table record must be an object")
    for key in _FIELDS_REQUIRED:
        if key not in obj:
            raise TableFormatError(f"{where}: missing field {key!r}")
    cells = obj["cells"]
    if not isinstance(cells, list) or not cells or not all(isinstance(r, list) for r in cells):
        raise TableFormatError(f"{where}: cells must be a non-empty array of arrays")
    return Table.build(
        pii=obj["pii"],
        table_index=obj["table_index"],
        caption=obj.get("caption", ""),
        cells=cells,
        row_labels=obj.get("row_labels"),
        col_labels=obj.get("col_labels"),
        sum_less_100=obj.get("sum_less_100"),
        comp_table=bool(obj.get("comp_table", False)),
        augmented=bool(obj.get("augmented", False)),
    )


def iter_table_document(data: bytes) -> Iterator[Table]:
    """Stream tables out of a line-delimited JSON document.

    Raises TableFormatError with the byte offset of the offending line on
    malformed JSON, and with the row index on ragged grids.
    """
    offset = 0
    lineno = 0
    for rawline in data.split(b"\n"):
        lineno += 1
        stripped = rawline.strip()
        if stripped:
            try:
                obj = json.loads(stripped.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise TableFormatError(
                    f"byte offset {offset} (line {lineno}): malformed table record: {exc}"
                ) from exc
            yield _table_from_obj(obj, f"line {lineno}")
        offset += len(rawline) + 1


def parse_table_document(data: bytes | str) -> list[Table]:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return list(iter_table_document(data))


def serialize_table(table: Table) -> str:
    obj: dict[str, object] = {
        "pii": table.pii,
        "table_index": table.table_index,
        "caption": table.caption,
        "cells": [list(row) for row in table.cells],
        "row_labels": list(table.row_labels),
        "col_labels": list(table.col_labels),
    }
    if table.sum_less_100 is not None:
        obj["sum_less_100"] = table.sum_less_100
    if table.comp_table:
        obj["comp_table"] = True
    if table.augmented:
        obj["augmented"] = True
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_table_document(tables: Iterable[Table]) -> bytes:
    return ("\n".join(serialize_table(t) for t in tables) + "\n").encode("utf-8")
