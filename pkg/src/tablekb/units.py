"""Unit extraction and canonicalization for property table lines.

Stages, in order: inline header-segment extraction, caption regex,
median-based default, containment fallback over the whole heading, then
scale inference and repair for the awkward cases. Output invariant: a
canonical unit, an accepted domain alias, or empty. Never a raw surface
form.
"""
from __future__ import annotations

import re
import statistics
import unicodedata

from .config import PipelineConfig, PropertyRule
from .table import find_num

__all__ = [
    "normalize_text",
    "compact_unit_key",
    "norm_unit",
    "check_noncontrov_unit",
    "header_segment",
    "find_unit_further",
    "post_process_unit_extras",
    "set_units",
]

_SUP_DIGITS = str.maketrans("⁰¹²³⁴⁵⁶⁷⁸⁹⁻⁺", "0123456789-+")
_GREEK = {
    "α": "alpha",
    "β": "beta",
    "γ": "gamma",
    "δ": "delta",
    "ε": "epsilon",
    "η": "eta",
    "θ": "theta",
    "κ": "kappa",
    "λ": "lambda",
    "μ": "mu",
    "ν": "nu",
    "ξ": "xi",
    "π": "pi",
    "ρ": "rho",
    "σ": "sigma",
    "τ": "tau",
    "φ": "phi",
    "χ": "chi",
    "ψ": "psi",
    "ω": "ohm",
    "Ω": "ohm",
}
_DASHES = str.maketrans({"−": "-", "‒": "-", "–": "-", "—": "-"})


def normalize_text(text: str, *, greek: bool = True) -> str:
    """Lowercased comparison form: NFKC, superscripts to digits, greek
    letters spelled out, unicode dashes collapsed."""
    s = unicodedata.normalize("NFKC", text)
    s = s.translate(_SUP_DIGITS).translate(_DASHES)
    if greek:
        s = "".join(_GREEK.get(ch, ch) for ch in s)
    return s.lower()


_SEP_DOT = re.compile(r"(?<!\d)\.|\.(?!\d)")


def compact_unit_key(surface: str) -> str:
    s = normalize_text(surface)
    s = _SEP_DOT.sub("·", s)
    for ch in ("⋅", "∙"):
        s = s.replace(ch, "·")
    for ch in (" ", "\t", "^", "{", "}", "$", "\\"):
        s = s.replace(ch, "")
    return s


class _Lexicon:
    """Per-property surface-form lookup plus caption/heading regexes."""

    def __init__(self, cfg: PipelineConfig):
        self.by_code: dict[int, dict[str, str]] = {}
        self.scan_re: dict[int, re.Pattern | None] = {}
        for rule in cfg.properties:
            table: dict[str, str] = {}
            for canon in rule.allowed_units + rule.accepted_aliases:
                self._register(table, canon, canon)
            for surface, canon in rule.unit_surface:
                self._register(table, surface, canon)
            self.by_code[rule.code] = table
            self.scan_re[rule.code] = self._build_scan(rule)

    @staticmethod
    def _register(table: dict[str, str], surface: str, canon: str) -> None:
        key = compact_unit_key(surface)
        table.setdefault(key, canon)
        table.setdefault(key.replace("·", ""), canon)

    @staticmethod
    def _build_scan(rule: PropertyRule) -> re.Pattern | None:
        forms = [s for s, _ in rule.unit_surface if len(s) >= 2]
        forms += [u for u in rule.allowed_units + rule.accepted_aliases if len(u) >= 2]
        forms += list(rule.fallback_patterns)
        if not forms:
            return None
        alts = sorted(set(forms), key=len, reverse=True)
        parts = []
        for alt in alts:
            if alt in rule.fallback_patterns:
                parts.append(alt)
            else:
                parts.append(re.escape(alt.lower()).replace(r"\ ", r"\s*"))
        body = "|".join(f"(?:{p})" for p in parts)
        return re.compile(rf"(?<![a-z0-9])(?:{body})(?![a-z0-9])")


# keyed by id with a strong ref retained, so ids cannot be recycled
_LEX_CACHE: dict[int, tuple[PipelineConfig, _Lexicon]] = {}


def _lexicon(cfg: PipelineConfig) -> _Lexicon:
    entry = _LEX_CACHE.get(id(cfg))
    if entry is None or entry[0] is not cfg:
        entry = (cfg, _Lexicon(cfg))
        _LEX_CACHE[id(cfg)] = entry
    return entry[1]


def norm_unit(surface: str | None, code: int, cfg: PipelineConfig) -> str:
    """Map a raw unit string to its canonical form, or ''. None and ''
    are equivalent inputs. Idempotent over its own outputs."""
    if not surface:
        return ""
    rule = cfg.rule(code)
    if rule.unitless:
        return ""
    return _lexicon(cfg).by_code[code].get(compact_unit_key(surface), "")


def check_noncontrov_unit(unit: str | None, code: int, cfg: PipelineConfig) -> bool:
    """True when the unit is uncontroversial for the property: canonical
    or accepted for unit-bearing properties, absent for unitless ones.
    Absence is acceptable except where a bare number is meaningless
    without its scale (hardness)."""
    rule = cfg.rule(code)
    if not unit:
        return True if rule.unitless else rule.absence_ok
    if rule.unitless:
        return False
    return unit in rule.allowed_units or unit in rule.accepted_aliases


def header_segment(cells: tuple[str, ...] | list[str]) -> list[str]:
    """Leading non-numeric stretch of a table line; falls back to the
    first min(len//2, 3) cells when the split is degenerate."""
    idx = None
    for i, cell in enumerate(cells):
        if find_num(cell) is not None:
            idx = i
            break
    if idx is None or idx == 0:
        idx = min(max(len(cells) // 2, 1), 3)
    return list(cells[:idx])


_PAREN_GROUP = re.compile(r"[(\[]([^()\[\]]{1,40})[)\]]")
_IN_TAIL = re.compile(r"\bin\s+([^\s,()\[\]]{1,20})\s*$", re.IGNORECASE)
# power-of-ten scale factor glued to a unit ("10-6/K", "10^7 K-1"); the
# factor belongs to the values, not the unit
_SCALE_PREFIX = re.compile(r"^[x×*]?\s*10\s*\^?\s*[+-]?\d+\s*")


def _cell_candidates(cell: str) -> list[tuple[str, bool]]:
    # (candidate, usable-as-raw) pairs in priority order
    out: list[tuple[str, bool]] = []
    for m in _PAREN_GROUP.finditer(cell):
        group = m.group(1).strip()
        if group.lower().startswith("in "):
            group = group[3:].strip()
        out.append((group, True))
        descaled = _SCALE_PREFIX.sub("", normalize_text(group)).strip()
        if descaled and descaled != group:
            out.append((descaled, True))
    if "," in cell:
        tail = cell.rsplit(",", 1)[1].strip()
        if tail:
            out.append((tail, True))
    m = _IN_TAIL.search(cell)
    if m:
        out.append((m.group(1), True))
    tokens = cell.replace("(", " ").replace(")", " ").replace("[", " ").replace("]", " ").split()
    if tokens:
        out.append((tokens[-1], False))
        if len(tokens) >= 2:
            out.append((" ".join(tokens[-2:]), False))
    return out


def _looks_like_unit(text: str) -> bool:
    if not text or len(text) > 24:
        return False
    if not any(ch.isalpha() or ch in "Ωω°" for ch in text):
        return False
    # reject pure annotations like "a", "see text"
    return len(text.split()) <= 3


def _infer_inline(segment: list[str], code: int, cfg: PipelineConfig) -> tuple[str, str]:
    raw = ""
    for cell in segment:
        for cand, raw_ok in _cell_candidates(cell):
            canon = norm_unit(cand, code, cfg)
            if canon:
                return canon, cand
            if raw_ok and not raw and _looks_like_unit(cand) and find_num(cand) is None:
                raw = cand
    return "", raw


def _scan_last(text: str, code: int, cfg: PipelineConfig) -> str:
    pat = _lexicon(cfg).scan_re.get(code)
    if pat is None:
        return ""
    cleaned = normalize_text(text)
    last = ""
    for m in pat.finditer(cleaned):
        last = m.group(0)
    return last


def find_unit_further(heading: str, code: int, cfg: PipelineConfig) -> str:
    """Containment scan over the whole heading text; last match wins."""
    return _scan_last(heading, code, cfg)


def _median(values: list[float]) -> float | None:
    return statistics.median(values) if values else None


_WORDISH = re.compile(r"[a-z0-9]")


def post_process_unit_extras(
    unit: str,
    code: int,
    heading: str,
    caption: str,
    values: list[float],
    cfg: PipelineConfig,
) -> str:
    """Last-resort repair. For hardness, infer the scale from heading or
    caption keywords, then from the value range. Elsewhere retry
    canonicalization on a scrubbed form; otherwise hand back the input."""
    rule = cfg.rule(code)
    if rule.code == 15:
        text = normalize_text(heading + " " + caption)
        for kw, scale in cfg.hardness_scale_keywords:
            if re.search(rf"(?<![a-z0-9]){re.escape(kw)}(?![a-z0-9])", text):
                return scale
        med = _median(values)
        if med is not None:
            for scale, lo, hi in cfg.hardness_scale_ranges:
                if lo <= med <= hi:
                    return scale
        return unit
    retry = norm_unit(unit.strip(" .;:"), code, cfg)
    return retry if retry else unit


def set_units(
    line_cells: tuple[str, ...] | list[str],
    code: int,
    caption: str,
    cfg: PipelineConfig,
) -> str | None:
    """Resolve the unit for a property-labeled table line.

    Returns None for unitless properties, else a canonical unit, an
    accepted alias, or ''."""
    rule = cfg.rule(code)
    if rule.unitless:
        return None
    segment = header_segment(line_cells)
    heading_text = " ".join(segment)
    values = [p.value for p in (find_num(c) for c in line_cells) if p is not None]

    unit, raw = _infer_inline(segment, code, cfg)
    if not unit:
        cap_hit = _scan_last(caption, code, cfg)
        if cap_hit:
            unit = norm_unit(cap_hit, code, cfg)
            raw = raw or cap_hit
    if not unit:
        further = find_unit_further(heading_text, code, cfg)
        if further:
            unit = norm_unit(further, code, cfg)
    if not unit and raw:
        unit = raw
    if not unit and not raw:
        med = _median(values)
        if med is not None:
            for dcode, lo, hi, default in cfg.median_unit_defaults:
                if dcode == code and lo <= med <= hi:
                    unit = default
                    break

    if check_noncontrov_unit(unit, code, cfg):
        return unit
    repaired = post_process_unit_extras(unit, code, heading_text, caption, values, cfg)
    if check_noncontrov_unit(repaired, code, cfg):
        return repaired
    renormed = norm_unit(repaired, code, cfg)
    if renormed and check_noncontrov_unit(renormed, code, cfg):
        return renormed
    return ""
