"""Postprocessing of labeled tables into property tuples.

Chooses a processing orientation, vetoes implausible headings, rescues
missed direct matches, applies heading-pattern and context overrides,
resolves units, repairs scaled and reciprocal reporting, and filters
tuples through per-unit validity ranges and an invalid-pair list. Every
correction can be written to an audit trail.
"""
from __future__ import annotations

import ast
import re
import statistics
from dataclasses import dataclass

from .annotate import direct_phrase_match, split_heading
from .config import PipelineConfig
from .props import COMPOSITION, MATERIAL_ID, OTHER, is_property_code
from .table import EntityId, Table, find_num, make_entity_id
from .units import normalize_text, set_units

__all__ = [
    "ExtractedTuple",
    "eval_cell_expression",
    "check_heading",
    "post_process_table",
    "filter_tuples",
]


@dataclass(frozen=True)
class ExtractedTuple:
    entity: EntityId
    code: int
    value: float
    unit: str | None
    value_kind: str  # "single" | "mean-of-range"

    def to_obj(self) -> dict:
        from .props import BY_CODE

        return {
            "entity": self.entity.serialize(),
            "property": BY_CODE[self.code].key,
            "value": self.value,
            "unit": self.unit,
            "value_kind": self.value_kind,
        }


_EXPR_CHARS = re.compile(r"^[0-9+*/^(). ]+$")
# minus is excluded on purpose: dash ranges dominate minus expressions in tables
_EXPR_OP = re.compile(r"[+*/^]")

_ALLOWED_BINOPS = (ast.Add, ast.Mult, ast.Div, ast.Pow)


def _eval_node(node: ast.AST) -> float:
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
        left, right = _eval_node(node.left), _eval_node(node.right)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            return left / right
        return left**right
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        v = _eval_node(node.operand)
        return v if isinstance(node.op, ast.UAdd) else -v
    raise ValueError(f"disallowed expression node: {type(node).__name__}")


def eval_cell_expression(text: str) -> float | None:
    """Evaluate a pure arithmetic cell like '3/4' on an ast whitelist.
    None unless the whole cell is digits and operators with at least one
    operator."""
    s = text.strip()
    if not s or not _EXPR_CHARS.match(s) or not _EXPR_OP.search(s) or not any(c.isdigit() for c in s):
        return None
    try:
        tree = ast.parse(s.replace("^", "**"), mode="eval")
        value = _eval_node(tree)
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError):
        return None
    return float(value)


_COMP_UNIT_TOKENS = ("mol%", "mol %", "wt%", "wt %", "at%", "at %", "mol.%", "wt.%", "at.%")


def check_heading(heading: str, caption: str, label: int, cfg: PipelineConfig) -> bool:
    """False when the heading is implausible for the label: composition
    units under a non-content label, disqualifying tokens, or an
    ambiguous heading whose caption lacks the resolving context."""
    if label == OTHER:
        return True
    h = normalize_text(heading, greek=False)
    cap = normalize_text(caption, greek=False)
    if label >= COMPOSITION and any(tok in h for tok in _COMP_UNIT_TOKENS):
        return False
    if not is_property_code(label):
        return True
    rule = cfg.rule(label)
    for tok in rule.disqualify_tokens:
        if tok in h or tok in cap:
            return False
    for tok in cfg.global_bad_tokens:
        if tok in h:
            return False
    content, _unit = split_heading(heading)
    content_key = normalize_text(content, greek=False).strip()
    for amb, required in rule.ambiguous_headings:
        if content_key == amb and not any(kw in cap for kw in required):
            return False
    return True


_VALUE_FIX = re.compile(r"(?:[x*]\s*10\s*\^?\s*\(?(-\d+)\)?|10\s*\^\s*\(?(-\d+)\)?|\(\s*10\s*(-\d+))")


def _value_fix_exponent(heading: str) -> int | None:
    from .table import clean_numeric_text

    m = _VALUE_FIX.search(clean_numeric_text(heading))
    if not m:
        return None
    for g in m.groups():
        if g is not None:
            return int(g)
    return None


def _line_cells(table: Table, axis: str, idx: int) -> list[str]:
    if axis == "row":
        return list(table.cells[idx])
    return [table.cells[i][idx] for i in range(table.num_rows)]


def _audit(trail, table: Table, stage: str, axis: str, idx: int, detail: str) -> None:
    if trail is not None:
        trail.append(
            {
                "pii": table.pii,
                "table_index": table.table_index,
                "stage": stage,
                "axis": axis,
                "index": idx,
                "detail": detail,
            }
        )


def _context_matches(rule, heading: str, caption: str, unit_slot: str) -> bool:
    if rule.heading_pattern is not None:
        content, _ = split_heading(heading)
        if not re.search(rule.heading_pattern, normalize_text(content, greek=False).strip()):
            return False
    if rule.caption_pattern is not None:
        if not re.search(rule.caption_pattern, normalize_text(caption, greek=False)):
            return False
    if rule.units is not None:
        if normalize_text(unit_slot, greek=False).strip() not in rule.units:
            return False
    return True


def choose_orientation(table: Table) -> str:
    """'col' when the per-line fraction of content labels (composition,
    id, properties) among columns is at least the row fraction."""
    r = sum(1 for l in table.row_labels if l >= COMPOSITION) / table.num_rows
    c = sum(1 for l in table.col_labels if l >= COMPOSITION) / table.num_cols
    return "col" if r <= c else "row"


def post_process_table(
    table: Table, cfg: PipelineConfig, audit: list | None = None
) -> tuple[Table, list[ExtractedTuple]]:
    """Run the heading checks, overrides, unit pipeline, and value
    repairs over the chosen orientation; emit filtered property tuples."""
    orientation = choose_orientation(table)
    labels = list(table.col_labels if orientation == "col" else table.row_labels)
    n_lines = len(labels)

    for idx in range(n_lines):
        label = labels[idx]
        cells = _line_cells(table, orientation, idx)
        heading = cells[0]
        if label in (COMPOSITION, MATERIAL_ID):
            continue
        if is_property_code(label) and not check_heading(heading, table.caption, label, cfg):
            _audit(audit, table, "heading-veto", orientation, idx, f"label {label} vetoed")
            labels[idx] = OTHER
            label = OTHER
        if label == OTHER:
            rescue = direct_phrase_match(heading, cfg)
            if rescue != OTHER and check_heading(heading, table.caption, rescue, cfg):
                _audit(audit, table, "direct-rescue", orientation, idx, f"label {rescue}")
                labels[idx] = rescue
                label = rescue
        h_norm = normalize_text(heading, greek=False)
        for pattern, code in cfg.pattern_map:
            if (label == OTHER or is_property_code(label)) and re.search(pattern, h_norm):
                if label != code:
                    _audit(audit, table, "pattern-override", orientation, idx, f"{label} -> {code}")
                    labels[idx] = code
                    label = code
                break
        _content, unit_slot = split_heading(heading)
        for ctx in cfg.context_map:
            if (label == OTHER or is_property_code(label)) and _context_matches(
                ctx, heading, table.caption, unit_slot
            ):
                if label != ctx.code:
                    _audit(audit, table, "context-override", orientation, idx, f"{label} -> {ctx.code}")
                    labels[idx] = ctx.code
                    label = ctx.code
                break

    # material ids come from the first id line on the same axis
    gid_idx = next((k for k, l in enumerate(labels) if l == MATERIAL_ID), None)

    def material_for(offset: int) -> str:
        if gid_idx is None:
            return ""
        if orientation == "col":
            return table.cells[offset][gid_idx]
        return table.cells[gid_idx][offset]

    tuples: list[ExtractedTuple] = []
    for idx in range(n_lines):
        code = labels[idx]
        if not is_property_code(code):
            continue
        cells = _line_cells(table, orientation, idx)
        heading = cells[0]
        unit = set_units(cells, code, table.caption, cfg)

        values: list[tuple[int, float, str]] = []  # (offset, value, kind)
        for offset in range(1, len(cells)):
            expr = eval_cell_expression(cells[offset])
            if expr is not None:
                values.append((offset, expr, "single"))
                continue
            parsed = find_num(cells[offset])
            if parsed is not None:
                kind = "mean-of-range" if parsed.from_range else "single"
                values.append((offset, parsed.value, kind))
        if not values:
            continue

        if code in cfg.value_fix_codes:
            exp = _value_fix_exponent(heading)
            if exp is not None:
                med = statistics.median(v for _o, v, _k in values)
                if med > 0.1:
                    values = [(o, v * 10.0**exp, k) for o, v, k in values]
                    _audit(audit, table, "value-fix", orientation, idx, f"x10^{exp}")

        if code == 21 and unit == "ohm·cm":
            repaired = []
            for o, v, k in values:
                if v == 0.0:
                    _audit(audit, table, "reciprocal-drop", orientation, idx, f"zero at {o}")
                    continue
                repaired.append((o, 1.0 / v, k))
            values = repaired
            unit = "S/cm"
            _audit(audit, table, "reciprocal-repair", orientation, idx, "ohm·cm -> S/cm")
            if not values:
                continue

        vetoed = False
        for mcode, lo, hi in cfg.median_windows:
            if mcode == code:
                med = statistics.median(v for _o, v, _k in values)
                if not lo <= med <= hi:
                    _audit(audit, table, "median-veto", orientation, idx, f"median {med:g}")
                    labels[idx] = OTHER
                    vetoed = True
                break
        if vetoed:
            continue

        for offset, value, kind in values:
            if orientation == "col":
                r, c = offset, idx
            else:
                r, c = idx, offset
            entity = make_entity_id(
                table.pii, table.table_index, r, c, material_for(offset), "property"
            )
            tuples.append(ExtractedTuple(entity=entity, code=code, value=value, unit=unit, value_kind=kind))

    if orientation == "col":
        table2 = table.with_labels(col_labels=labels)
    else:
        table2 = table.with_labels(row_labels=labels)
    return table2, filter_tuples(tuples, cfg, audit, table)


def _range_for(code: int, unit: str | None, cfg: PipelineConfig) -> tuple[float, float] | None:
    if unit:
        for c, u, lo, hi in cfg.range_by_unit:
            if c == code and u == unit:
                return lo, hi
    for c, lo, hi in cfg.range_default:
        if c == code:
            return lo, hi
    return None


def filter_tuples(
    tuples: list[ExtractedTuple],
    cfg: PipelineConfig,
    audit: list | None = None,
    table: Table | None = None,
) -> list[ExtractedTuple]:
    """Drop tuples with invalid property-unit pairs or out-of-range
    values; order preserved."""
    invalid = set(cfg.invalid_units)
    out = []
    for t in tuples:
        unit_key = t.unit or ""
        if (t.code, unit_key) in invalid:
            if table is not None:
                _audit(audit, table, "invalid-unit", "-", -1, f"({t.code}, {unit_key})")
            continue
        rng = _range_for(t.code, t.unit, cfg)
        if rng is not None and not rng[0] <= t.value <= rng[1]:
            if table is not None:
                _audit(audit, table, "range-filter", "-", -1, f"{t.value:g} outside {rng}")
            continue
        out.append(t)
    return out
