"""Dataset augmentation: graft under-represented property lines.

For each property the target line count follows a concave schedule in
the original count. New lines are copied from existing ones labeled with
that property and inserted into tables that lack it but report at least
one co-occurring friend property, resizing by truncation or by sampling
around the source line's own statistics.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig
from .errors import AugmentationError
from .props import BY_CODE, is_property_code
from .table import Table, find_num

__all__ = ["PlanEntry", "AugmentationPlan", "AugmentationReport", "plan", "resize_line", "augment"]

log = logging.getLogger(__name__)

AUGMENT_FAILED = -50.0  # sentinel logged when a source line has no numeric cells


@dataclass(frozen=True)
class PlanEntry:
    code: int
    n_original: int
    n_target: int

    @property
    def demand(self) -> int:
        return max(self.n_target - self.n_original, 0)


@dataclass(frozen=True)
class AugmentationPlan:
    entries: tuple[PlanEntry, ...]

    def entry(self, code: int) -> PlanEntry | None:
        for e in self.entries:
            if e.code == code:
                return e
        return None


@dataclass
class AugmentationReport:
    inserted: dict[int, int] = field(default_factory=dict)
    failures: dict[int, int] = field(default_factory=dict)
    skipped_no_destination: dict[int, int] = field(default_factory=dict)


def _property_lines(table: Table) -> list[tuple[str, int, int]]:
    out = []
    for i, l in enumerate(table.row_labels):
        if is_property_code(l):
            out.append(("row", i, l))
    for j, l in enumerate(table.col_labels):
        if is_property_code(l):
            out.append(("col", j, l))
    return out


def plan(tables: list[Table], cfg: PipelineConfig) -> AugmentationPlan:
    """Target counts: ceil(rate * n ** exponent) per property with n > 0."""
    counts: dict[int, int] = {}
    for t in tables:
        for _axis, _idx, code in _property_lines(t):
            counts[code] = counts.get(code, 0) + 1
    entries = []
    for code in sorted(BY_CODE):
        n = counts.get(code, 0)
        if n == 0:
            continue
        target = math.ceil(cfg.augmentation.rate * n**cfg.augmentation.exponent)
        entries.append(PlanEntry(code=code, n_original=n, n_target=target))
    return AugmentationPlan(entries=tuple(entries))


def _extract_line(table: Table, axis: str, idx: int) -> list[str]:
    if axis == "row":
        return list(table.cells[idx])
    return [table.cells[i][idx] for i in range(table.num_rows)]


def _format_value(x: float) -> str:
    return f"{x:.6g}"


def resize_line(
    line: list[str], target_len: int, rng: np.random.Generator, cfg: PipelineConfig
) -> list[str] | None:
    """Fit a source line to a destination length. Shorter targets
    truncate; longer ones append samples from N(mu, sigma) of the
    source's numeric cells, clipped to mu +/- 3 sigma with bounded
    resampling. None when the source has nothing numeric to sample."""
    if target_len <= len(line):
        return line[:target_len]
    nums = [p.value for p in (find_num(c) for c in line) if p is not None]
    if not nums:
        return None
    mu = float(np.mean(nums))
    sigma = float(np.std(nums))
    if sigma == 0.0:
        sigma = cfg.augmentation.zero_sigma
    lo = mu - cfg.augmentation.clip_sigmas * sigma
    hi = mu + cfg.augmentation.clip_sigmas * sigma
    out = list(line)
    for _ in range(target_len - len(line)):
        x = float(rng.normal(mu, sigma))
        tries = 0
        while not (lo <= x <= hi) and tries < cfg.augmentation.resample_tries:
            x = float(rng.normal(mu, sigma))
            tries += 1
        x = min(max(x, lo), hi)
        out.append(_format_value(x))
    return out


def _insert_line(table: Table, line: list[str], code: int) -> Table:
    col_oriented = any(is_property_code(l) for l in table.col_labels)
    if col_oriented:
        if len(line) != table.num_rows:
            raise AugmentationError(
                f"column insert length {len(line)} != {table.num_rows} rows"
            )
        cells = [list(r) + [line[i]] for i, r in enumerate(table.cells)]
        col_labels = list(table.col_labels) + [code]
        row_labels = list(table.row_labels)
    else:
        if len(line) != table.num_cols:
            raise AugmentationError(f"row insert length {len(line)} != {table.num_cols} cols")
        cells = [list(r) for r in table.cells] + [line]
        row_labels = list(table.row_labels) + [code]
        col_labels = list(table.col_labels)
    new = Table.build(
        pii=table.pii,
        table_index=table.table_index,
        caption=table.caption,
        cells=cells,
        row_labels=row_labels,
        col_labels=col_labels,
        sum_less_100=table.sum_less_100,
        comp_table=table.comp_table,
        augmented=True,
    )
    if new.num_rows * new.num_cols != sum(len(r) for r in new.cells):
        raise AugmentationError("cell count identity violated after insert")
    return new


def augment(
    tables: list[Table], cfg: PipelineConfig, seed: int = 0
) -> tuple[list[Table], AugmentationReport]:
    """Apply the plan: per property, copy source lines into destination
    tables that lack the property but contain a friend of it."""
    working = list(tables)
    report = AugmentationReport()
    the_plan = plan(working, cfg)

    # source lists and destination pools refer to the original state
    sources: dict[int, list[tuple[int, str, int]]] = {e.code: [] for e in the_plan.entries}
    codes_by_table: list[set[int]] = []
    for ti, t in enumerate(tables):
        lines = _property_lines(t)
        codes_by_table.append({c for _a, _i, c in lines})
        for axis, idx, code in lines:
            if code in sources:
                sources[code].append((ti, axis, idx))

    for entry in the_plan.entries:
        demand = entry.demand
        if demand == 0:
            continue
        code = entry.code
        friends = set(cfg.rule(code).friends)
        dests = [
            ti
            for ti, codes in enumerate(codes_by_table)
            if codes and code not in codes and codes & friends
        ]
        if not dests:
            report.skipped_no_destination[code] = demand
            log.warning("no destination tables for property %d; skipping %d inserts", code, demand)
            continue
        rng = np.random.default_rng([seed, code])
        picks = rng.integers(0, len(dests), size=demand)
        src_list = sources[code]
        for s in range(demand):
            ti = dests[int(picks[s])]
            src_ti, axis, idx = src_list[s % len(src_list)]
            line = _extract_line(tables[src_ti], axis, idx)
            dest = working[ti]
            col_oriented = any(is_property_code(l) for l in dest.col_labels)
            target_len = dest.num_rows if col_oriented else dest.num_cols
            resized = resize_line(line, target_len, rng, cfg)
            if resized is None:
                report.failures[code] = report.failures.get(code, 0) + 1
                log.warning(
                    "augmentation source with no numeric cells (table %d, %s %d); sentinel %.0f",
                    src_ti,
                    axis,
                    idx,
                    AUGMENT_FAILED,
                )
                continue
            working[ti] = _insert_line(dest, resized, code)
            report.inserted[code] = report.inserted.get(code, 0) + 1
    return working, report
