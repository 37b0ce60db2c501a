"""Rule-based property annotation of table lines.

Two-priority scheme per unlabeled line: a canonical phrase contained in
the heading wins outright; otherwise a symbol alias must survive a
multi-signal validation (name, symbol, unit, value range, caption) with
a per-property score threshold. When both axes end up carrying property
labels the orientation with weaker numeric evidence is suppressed.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .config import PipelineConfig
from .props import OTHER, is_property_code
from .table import Table, find_num
from .units import norm_unit, normalize_text

__all__ = [
    "ValidationSignals",
    "AnnotationReport",
    "direct_phrase_match",
    "split_heading",
    "validate_property",
    "annotate_table",
    "annotate_dataset",
]


@dataclass(frozen=True)
class ValidationSignals:
    name: bool
    symbol: bool
    unit: bool
    value_range: bool
    caption: bool

    @property
    def score(self) -> int:
        return sum((self.name, self.symbol, self.unit, self.value_range, self.caption))


@dataclass
class AnnotationReport:
    direct: int = 0
    validated: int = 0
    suppressed_rows: int = 0
    suppressed_cols: int = 0
    per_property: dict[int, int] = field(default_factory=dict)

    def count(self, code: int) -> None:
        self.per_property[code] = self.per_property.get(code, 0) + 1


def direct_phrase_match(heading: str, cfg: PipelineConfig) -> int:
    """First canonical phrase contained in the lowercased heading wins;
    properties scanned in code order."""
    text = normalize_text(heading, greek=False)
    for rule in cfg.properties:
        for phrase in rule.canonical_phrases:
            if phrase in text:
                return rule.code
    return OTHER


_PAREN_UNIT = re.compile(r"[(\[][^()\[\]]{0,40}[)\]]")


def split_heading(heading: str) -> tuple[str, str]:
    """Split a heading into its content part and its parenthesized or
    comma-trailed unit slot."""
    unit = ""
    m = None
    for m in _PAREN_UNIT.finditer(heading):
        pass
    if m is not None:
        unit = m.group(0).strip("()[] ")
        content = (heading[: m.start()] + heading[m.end() :]).strip()
    else:
        content = heading
    if not unit and "," in content:
        content, _, tail = content.rpartition(",")
        unit = tail.strip()
        content = content.strip()
    return content.strip(), unit


_ALNUM = re.compile(r"[^a-z0-9]+")


def symbol_key(text: str) -> str:
    return _ALNUM.sub("", normalize_text(text))


def _content_keys(content: str) -> set[str]:
    keys = {symbol_key(content)}
    tokens = content.split()
    if tokens:
        keys.add(symbol_key(tokens[0]))
    keys.discard("")
    return keys


def validate_property(
    code: int,
    heading: str,
    values: list[float],
    caption: str,
    cfg: PipelineConfig,
) -> tuple[bool, ValidationSignals]:
    """Fuse the five weak signals for one candidate property label and
    compare against the property's score threshold."""
    rule = cfg.rule(code)
    content, unit_slot = split_heading(heading)
    text = normalize_text(heading, greek=False)
    keys = _content_keys(content)

    s_name = any(phrase in text for phrase in rule.canonical_phrases)
    s_symbol = bool(keys & {symbol_key(s) for s in rule.symbols})
    s_unit = bool(norm_unit(unit_slot, code, cfg)) if unit_slot else False
    lo, hi = rule.plausible_range
    s_range = any(lo <= v <= hi for v in values)
    cap = normalize_text(caption, greek=False)
    s_caption = any(kw in cap for kw in rule.caption_keywords)

    sig = ValidationSignals(s_name, s_symbol, s_unit, s_range, s_caption)
    return sig.score >= rule.score_threshold, sig


def _line_values(cells: tuple[str, ...]) -> list[float]:
    out = []
    for cell in cells[1:]:
        parsed = find_num(cell)
        if parsed is not None:
            out.append(parsed.value)
    return out


def _classify_line(
    heading: str, values: list[float], caption: str, cfg: PipelineConfig, report: AnnotationReport
) -> int:
    code = direct_phrase_match(heading, cfg)
    if code != OTHER:
        report.direct += 1
        report.count(code)
        return code
    content, _ = split_heading(heading)
    keys = _content_keys(content)
    if keys:
        for rule in cfg.properties:
            if keys & {symbol_key(s) for s in rule.symbols}:
                ok, _sig = validate_property(rule.code, heading, values, caption, cfg)
                if ok:
                    report.validated += 1
                    report.count(rule.code)
                    return rule.code
    return OTHER


def _numeric_count(cells: list[str]) -> int:
    return sum(1 for c in cells if find_num(c) is not None)


def annotate_table(table: Table, cfg: PipelineConfig, report: AnnotationReport | None = None) -> Table:
    """Annotate unlabeled lines of one table; provided labels are kept."""
    if report is None:
        report = AnnotationReport()
    row_labels = list(table.row_labels)
    col_labels = list(table.col_labels)
    for j in range(table.num_cols):
        if col_labels[j] != OTHER:
            continue
        heading = table.cells[0][j]
        values = _line_values(tuple(table.cells[i][j] for i in range(table.num_rows)))
        col_labels[j] = _classify_line(heading, values, table.caption, cfg, report)
    for i in range(table.num_rows):
        if row_labels[i] != OTHER:
            continue
        heading = table.cells[i][0]
        values = _line_values(table.cells[i])
        row_labels[i] = _classify_line(heading, values, table.caption, cfg, report)

    row_props = sum(1 for l in row_labels if is_property_code(l))
    col_props = sum(1 for l in col_labels if is_property_code(l))
    if row_props and col_props:
        check_row = _numeric_count(list(table.cells[0][1:])) >= 3
        check_col = _numeric_count([table.cells[i][0] for i in range(1, table.num_rows)]) >= 3
        if check_row and not check_col:
            drop_axis = "col"
        elif check_col and not check_row:
            drop_axis = "row"
        elif col_props < row_props:
            drop_axis = "col"
        elif row_props < col_props:
            drop_axis = "row"
        else:
            drop_axis = "col"  # tie keeps rows
        if drop_axis == "col":
            col_labels = [OTHER if is_property_code(l) else l for l in col_labels]
            report.suppressed_cols += col_props
        else:
            row_labels = [OTHER if is_property_code(l) else l for l in row_labels]
            report.suppressed_rows += row_props
    return table.with_labels(row_labels=row_labels, col_labels=col_labels)


def annotate_dataset(
    tables: list[Table], cfg: PipelineConfig
) -> tuple[list[Table], AnnotationReport]:
    report = AnnotationReport()
    return [annotate_table(t, cfg, report) for t in tables], report
