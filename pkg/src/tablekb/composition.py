"""Composition-table relabeling, completeness checks, and edge lists.

Headers carrying both a composition unit token and a chemical token mark
their lines as composition lines when the line's numeric median clears a
floor. Cross-axis lines with defined non-zero medians are promoted to
constituent lines. Completeness is judged by the median of per-sample
sums against windows around 1 and around 100.
"""
from __future__ import annotations

import re
import statistics
from dataclasses import dataclass, field

from .config import CompositionConfig, PipelineConfig
from .errors import RelabelingError
from .props import COMPOSITION, CONSTITUENT, MATERIAL_ID, OTHER
from .table import EntityId, Table, find_num, make_entity_id
from .units import normalize_text

__all__ = [
    "ELEMENTS",
    "parse_formula",
    "find_elem_comp_var",
    "detect_constituents",
    "CompositionEdgeList",
    "RelabelReport",
    "relabel_composition_table",
    "relabel_composition_tables",
    "CompositionEntity",
    "extract_compositions",
]

ELEMENTS = frozenset(
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn "
    "Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La "
    "Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po "
    "At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg "
    "Cn Nh Fl Mc Lv Ts Og".split()
)

_COUNT = re.compile(r"\d+(?:\.\d+)?")


def parse_formula(token: str) -> bool:
    """Element-symbol grammar: capital + optional lowercase + optional
    numeric subscript, with parenthesized groups."""
    s = token.strip()
    if not s:
        return False
    i, n = 0, len(s)
    depth = 0
    seen = False
    while i < n:
        ch = s[i]
        if ch == "(":
            depth += 1
            i += 1
            continue
        if ch == ")":
            depth -= 1
            if depth < 0:
                return False
            i += 1
            m = _COUNT.match(s, i)
            if m:
                i = m.end()
            continue
        if ch.isupper():
            sym2 = s[i : i + 2]
            if len(sym2) == 2 and sym2[1].islower():
                if sym2 in ELEMENTS:
                    i += 2
                else:
                    return False
            elif ch in ELEMENTS:
                i += 1
            else:
                return False
            seen = True
            m = _COUNT.match(s, i)
            if m:
                i = m.end()
            continue
        return False
    return depth == 0 and seen


_LEADING_COEFF = re.compile(
    r"^(?:\(\s*(?:100|1)\s*-\s*[xyz]\s*\)|\(\s*[xyz]\s*\)|[xyz]|\d+(?:\.\d+)?)\s*(?=[A-Z(])"
)
# one digit at most: further digits are subscripts, as in PO43-
_TRAILING_CHARGE = re.compile(r"\d?[+\-]$")
_PART_SEP = re.compile(r"[·⋅∙]|-(?=\d*[A-Z(])")


def _valid_compound(token: str) -> bool:
    parts = [p for p in _PART_SEP.split(token) if p]
    if not parts:
        return False
    for part in parts:
        part = _LEADING_COEFF.sub("", part)
        part = _TRAILING_CHARGE.sub("", part)
        if not parse_formula(part):
            return False
    return True


_UNIT_PARENS = re.compile(r"[(\[][^()\[\]]*%[^()\[\]]*[)\]]")
_TOKEN_SPLIT = re.compile(r"[\s,;:]+")


def find_elem_comp_var(text: str, cfg: CompositionConfig) -> str:
    """Extract the constituent expression from a header: compound
    lexicon first, then the formula grammar with variable-coefficient
    prefixes stripped."""
    low = text.lower()
    for name, formula in cfg.lexicon:
        if name in low:
            return formula
    stripped = _UNIT_PARENS.sub(" ", text)
    stripped = stripped.translate({0x2212: "-", 0x2013: "-", 0x2014: "-"})
    for token in _TOKEN_SPLIT.split(stripped):
        # decoration stripping can destroy a parenthesized coefficient or
        # group, so the raw token gets a second chance
        for cand in (token.strip("()[]{}.,;:"), token):
            if not cand or not any(c.isupper() for c in cand):
                continue
            bare = _LEADING_COEFF.sub("", cand)
            bare = _TRAILING_CHARGE.sub("", bare)
            if _valid_compound(bare):
                return bare
    return ""


def _unit_token(low: str, cfg: CompositionConfig) -> str:
    for tokens, canon in (
        (cfg.mol_tokens, "mol%"),
        (cfg.wt_tokens, "wt%"),
        (cfg.at_tokens, "at%"),
    ):
        for t in sorted(tokens, key=len, reverse=True):
            if t in low:
                return canon
    if cfg.generic_percent and "%" in low:
        return "%"
    return ""


def detect_constituents(header: str, cfg: CompositionConfig) -> tuple[str, str]:
    """(unit token, constituent expression), each '' when absent.
    Exclusion tokens veto the whole header."""
    low = normalize_text(header, greek=False)
    if any(tok in low for tok in cfg.exclusion_tokens):
        return "", ""
    unit = _unit_token(low, cfg)
    constituent = find_elem_comp_var(header, cfg)
    return unit, constituent


@dataclass(frozen=True)
class CompositionEdgeList:
    orientation: str
    edges: tuple[tuple[tuple[int, int], tuple[int, int]], ...]
    # each: ((constituent header row, col), (composition value row, col))


@dataclass
class RelabelReport:
    archived: dict[tuple[str, int], int] = field(default_factory=dict)
    relabeled: int = 0
    promoted: int = 0


def _line_numbers(table: Table, axis: str, idx: int) -> list[float]:
    if axis == "col":
        cells = [table.cells[i][idx] for i in range(1, table.num_rows)]
    else:
        cells = list(table.cells[idx][1:])
    return [p.value for p in (find_num(c) for c in cells) if p is not None]


def relabel_composition_table(
    table: Table, cfg: PipelineConfig, report: RelabelReport | None = None
) -> tuple[Table, CompositionEdgeList | None]:
    """Refine one table's labels for composition content. Monotone: only
    zeros are filled; conflicting secondary-axis marks are archived."""
    if report is None:
        report = RelabelReport()
    ccfg = cfg.composition
    row_labels = list(table.row_labels)
    col_labels = list(table.col_labels)

    comp_units: dict[tuple[str, int], str] = {}
    for j in range(table.num_cols):
        unit, constituent = detect_constituents(table.cells[0][j], ccfg)
        if unit and constituent:
            nums = _line_numbers(table, "col", j)
            if nums and statistics.median(nums) > ccfg.value_floor:
                if col_labels[j] == OTHER:
                    col_labels[j] = COMPOSITION
                    report.relabeled += 1
                if col_labels[j] == COMPOSITION:
                    comp_units[("col", j)] = unit
    for i in range(table.num_rows):
        unit, constituent = detect_constituents(table.cells[i][0], ccfg)
        if unit and constituent:
            nums = _line_numbers(table, "row", i)
            if nums and statistics.median(nums) > ccfg.value_floor:
                if row_labels[i] == OTHER:
                    row_labels[i] = COMPOSITION
                    report.relabeled += 1
                if row_labels[i] == COMPOSITION:
                    comp_units[("row", i)] = unit

    has_col = COMPOSITION in col_labels
    has_row = COMPOSITION in row_labels
    if not has_col and not has_row:
        return table.with_labels(row_labels=row_labels, col_labels=col_labels), None
    orientation = "col" if has_col else "row"
    if has_col and has_row:
        # column orientation dominates; secondary-axis marks are archived
        for i, l in enumerate(row_labels):
            if l == COMPOSITION:
                report.archived[("row", i)] = l
                row_labels[i] = OTHER

    if orientation == "col" and table.num_rows < 2:
        raise RelabelingError(
            f"{table.pii}[{table.table_index}]: composition columns but no data rows"
        )
    if orientation == "row" and table.num_cols < 2:
        raise RelabelingError(
            f"{table.pii}[{table.table_index}]: composition rows but no data columns"
        )

    comp_lines = [
        k for k, l in enumerate(col_labels if orientation == "col" else row_labels) if l == COMPOSITION
    ]

    # cross-axis promotion: defined non-zero median -> constituent line
    sums: list[float] = []
    cross_range = range(1, table.num_rows if orientation == "col" else table.num_cols)
    cross_labels = row_labels if orientation == "col" else col_labels
    for k in cross_range:
        vals = []
        for c in comp_lines:
            cell = table.cells[k][c] if orientation == "col" else table.cells[c][k]
            p = find_num(cell)
            if p is not None:
                vals.append(p.value)
        if vals:
            sums.append(sum(vals))
        nonzero = [v for v in vals if v != 0.0]
        if nonzero and statistics.median(nonzero) >= 0 and cross_labels[k] == OTHER:
            cross_labels[k] = CONSTITUENT
            report.promoted += 1
    promoted = [k for k in cross_range if cross_labels[k] == CONSTITUENT]

    if sums:
        m = statistics.median(sums)
        complete = any(lo <= m <= hi for lo, hi in ccfg.sum_windows)
        sum_less_100 = 0 if complete else 1
    else:
        sum_less_100 = 1

    edges = []
    for c in comp_lines:
        header_pos = (0, c) if orientation == "col" else (c, 0)
        for k in promoted:
            value_pos = (k, c) if orientation == "col" else (c, k)
            edges.append((header_pos, value_pos))
    edge_list = CompositionEdgeList(orientation=orientation, edges=tuple(edges))

    new_table = Table.build(
        pii=table.pii,
        table_index=table.table_index,
        caption=table.caption,
        cells=table.cells,
        row_labels=row_labels,
        col_labels=col_labels,
        sum_less_100=sum_less_100,
        comp_table=True,
        augmented=table.augmented,
    )
    return new_table, edge_list


def relabel_composition_tables(
    tables: list[Table], cfg: PipelineConfig
) -> tuple[list[Table], list[CompositionEdgeList | None], RelabelReport]:
    report = RelabelReport()
    out_tables, out_edges = [], []
    for t in tables:
        nt, edges = relabel_composition_table(t, cfg, report)
        out_tables.append(nt)
        out_edges.append(edges)
    return out_tables, out_edges, report


@dataclass(frozen=True)
class CompositionEntity:
    entity: EntityId
    constituents: tuple[tuple[str, float, str], ...]  # (expression, value, unit)
    material_id: str
    complete: bool

    def to_obj(self) -> dict:
        return {
            "entity": self.entity.serialize(),
            "constituents": [
                {"constituent": e, "value": v, "unit": u} for e, v, u in self.constituents
            ],
            "material_id": self.material_id,
            "complete": self.complete,
        }


def extract_compositions(table: Table, cfg: PipelineConfig) -> list[CompositionEntity]:
    """Composition entity per sample line of a relabeled composition
    table; constituent expressions come from the composition headers."""
    if not table.comp_table:
        return []
    ccfg = cfg.composition
    orientation = "col" if COMPOSITION in table.col_labels else "row"
    labels = table.col_labels if orientation == "col" else table.row_labels
    comp_lines = [k for k, l in enumerate(labels) if l == COMPOSITION]
    if not comp_lines:
        return []

    headers = {}
    for c in comp_lines:
        header = table.cells[0][c] if orientation == "col" else table.cells[c][0]
        unit, constituent = detect_constituents(header, ccfg)
        headers[c] = (constituent or header.strip(), unit)

    cross_labels = table.row_labels if orientation == "col" else table.col_labels
    # the id line runs along the same axis as the composition lines
    gid_idx = next((k for k, l in enumerate(labels) if l == MATERIAL_ID), None)
    complete = table.sum_less_100 == 0
    out: list[CompositionEntity] = []
    cross_range = range(1, table.num_rows if orientation == "col" else table.num_cols)
    for k in cross_range:
        if cross_labels[k] != CONSTITUENT:
            continue
        parts = []
        for c in comp_lines:
            cell = table.cells[k][c] if orientation == "col" else table.cells[c][k]
            p = find_num(cell)
            if p is not None:
                expr, unit = headers[c]
                parts.append((expr, p.value, unit))
        if not parts:
            continue
        if gid_idx is None:
            material = ""
        elif orientation == "col":
            material = table.cells[k][gid_idx]
        else:
            material = table.cells[gid_idx][k]
        if orientation == "col":
            entity = make_entity_id(table.pii, table.table_index, k, 0, material, "composition")
        else:
            entity = make_entity_id(table.pii, table.table_index, 0, k, material, "composition")
        out.append(
            CompositionEntity(
                entity=entity,
                constituents=tuple(parts),
                material_id=material.strip(),
                complete=complete,
            )
        )
    return out
