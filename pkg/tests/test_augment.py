"""Concave augmentation schedule and Gaussian line grafting."""

import logging
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp

from helpers import make_table
from tablekb.augment import AUGMENT_FAILED, augment, plan, resize_line
from tablekb.table import Table, find_num


def oracle_target(n: int, rate="10", exponent="0.65") -> int:
    """High-precision reference for the line-count schedule."""
    with mp.workdps(60):
        return int(mp.ceil(mp.mpf(rate) * mp.power(mp.mpf(n), mp.mpf(exponent))))


def tables_with_count(n: int) -> list[Table]:
    """One table carrying exactly n lines labeled with property code 13."""
    cells = [["h", "v"]] + [["g", "1"] for _ in range(n)]
    return [
        Table.build(
            pii="S0000000000000000",
            table_index=0,
            caption="",
            cells=cells,
            row_labels=[0] + [13] * n,
            col_labels=[0, 0],
        )
    ]


class TestPlanSchedule:
    def test_matches_high_precision_oracle_full_range(self, cfg):
        for n in range(0, 1001):
            got = plan(tables_with_count(n), cfg).entry(13)
            if n == 0:
                assert got is None
            else:
                assert got.n_target == oracle_target(n), n

    def test_worked_points(self, cfg):
        assert plan(tables_with_count(1), cfg).entry(13).n_target == 10
        assert plan(tables_with_count(100), cfg).entry(13).n_target == 200

    def test_monotone_nondecreasing(self):
        targets = [oracle_target(n) for n in range(0, 1001)]
        assert all(a <= b for a, b in zip(targets, targets[1:]))

    def test_demand_nonnegative_and_vanishes_at_scale(self, cfg):
        e = plan(tables_with_count(720), cfg).entry(13)
        assert e.n_target == 720 and e.demand == 0
        e = plan(tables_with_count(5), cfg).entry(13)
        assert e.demand == e.n_target - 5 > 0

    def test_counts_aggregate_rows_and_columns_across_tables(self, cfg):
        t1 = make_table(
            [["h", "d", "Tg"], ["g1", "2.5", "820"], ["g2", "2.6", "830"]],
            col_labels=[0, 13, 7],
        )
        t2 = make_table(
            [["h", "a", "b"], ["d", "2.5", "2.6"], ["Tg", "820", "830"]],
            row_labels=[0, 13, 7],
        )
        p = plan([t1, t2], cfg)
        assert p.entry(13).n_original == 2
        assert p.entry(7).n_original == 2
        assert p.entry(18) is None
        assert {e.code for e in p.entries} == {7, 13}

    def test_unlabeled_tables_yield_empty_plan(self, cfg):
        t = make_table([["a", "b"], ["c", "1"]])
        assert plan([t], cfg).entries == ()


class TestResizeLine:
    def test_truncates_to_prefix(self, cfg):
        rng = np.random.default_rng(0)
        line = ["d", "2.5", "2.6", "2.7"]
        assert resize_line(line, 2, rng, cfg) == ["d", "2.5"]
        assert resize_line(line, 4, rng, cfg) == line

    def test_extension_samples_within_three_sigma(self, cfg):
        rng = np.random.default_rng(1)
        line = ["d", "2.0", "3.0", "4.0"]
        nums = [2.0, 3.0, 4.0]
        mu, sigma = float(np.mean(nums)), float(np.std(nums))
        out = resize_line(line, len(line) + 10_000, rng, cfg)
        assert len(out) == len(line) + 10_000
        assert out[: len(line)] == line
        values = [find_num(c).value for c in out[len(line) :]]
        lo, hi = mu - 3 * sigma, mu + 3 * sigma
        assert all(lo <= v <= hi for v in values)
        # values printed to 6 significant digits stay within the window
        assert min(values) < mu < max(values)

    def test_zero_spread_injects_small_sigma(self, cfg):
        rng = np.random.default_rng(2)
        line = ["d", "2.5", "2.5", "2.5"]
        out = resize_line(line, len(line) + 5000, rng, cfg)
        values = np.array([find_num(c).value for c in out[len(line) :]])
        assert np.all(np.abs(values - 2.5) <= 3 * 0.05 + 1e-9)
        assert values.std() == pytest.approx(0.05, rel=0.25)
        assert not np.allclose(values, 2.5)

    def test_no_numeric_cells_returns_none(self, cfg):
        rng = np.random.default_rng(3)
        assert resize_line(["label", "high", "low"], 5, rng, cfg) is None

    def test_no_numeric_truncation_still_works(self, cfg):
        rng = np.random.default_rng(3)
        assert resize_line(["label", "high", "low"], 2, rng, cfg) == ["label", "high"]

    def test_clamped_when_resampling_disabled(self, cfg):
        acfg = replace(cfg.augmentation, resample_tries=0)
        tight = replace(cfg, augmentation=acfg)
        rng = np.random.default_rng(4)
        line = ["d", "1.0", "1.2"]
        mu, sigma = 1.1, float(np.std([1.0, 1.2]))
        out = resize_line(line, len(line) + 2000, rng, tight)
        values = [find_num(c).value for c in out[len(line) :]]
        assert all(mu - 3 * sigma - 1e-9 <= v <= mu + 3 * sigma + 1e-9 for v in values)

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(0, 10**6),
        extra=st.integers(0, 12),
        base=st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=6),
    )
    def test_length_contract_and_determinism(self, cfg, seed, extra, base):
        line = ["head"] + [f"{v:.4g}" for v in base]
        target = len(line) + extra
        a = resize_line(list(line), target, np.random.default_rng(seed), cfg)
        b = resize_line(list(line), target, np.random.default_rng(seed), cfg)
        assert a == b
        assert len(a) == target


def _source_table(code: int) -> Table:
    return make_table(
        [["h", "p"], ["g1", "2.0"], ["g2", "2.2"], ["g3", "2.4"]],
        col_labels=[0, code],
        pii="S0000000000000001",
    )


def _friend_table(friend: int, rows: int = 3, pii="S0000000000000002") -> Table:
    cells = [["h", "f"]] + [[f"g{i}", f"{700 + i}"] for i in range(rows)]
    return make_table(cells, col_labels=[0, friend], pii=pii)


class TestAugment:
    def test_inserts_meet_demand(self, cfg):
        code = 13
        friend = cfg.rule(code).friends[0]
        tables = [_source_table(code), _friend_table(friend)]
        out, report = augment(tables, cfg, seed=0)
        demand = plan(tables, cfg).entry(code).demand
        assert demand == 9
        assert report.inserted[code] == demand
        assert report.failures == {}
        assert sum(l == code for l in out[1].col_labels) == demand
        assert out[1].augmented

    def test_inserted_lines_fit_destination(self, cfg):
        code = 13
        friend = cfg.rule(code).friends[0]
        tables = [_source_table(code), _friend_table(friend, rows=6)]
        out, _ = augment(tables, cfg, seed=1)
        dest = out[1]
        assert all(len(r) == dest.num_cols for r in dest.cells)
        assert len(dest.col_labels) == dest.num_cols
        # grafted values come from the source statistics window
        mu, sigma = np.mean([2.0, 2.2, 2.4]), np.std([2.0, 2.2, 2.4])
        for j, l in enumerate(dest.col_labels):
            if l != code:
                continue
            for i in range(1, dest.num_rows):
                v = find_num(dest.cells[i][j])
                if v is not None:
                    assert mu - 3 * sigma - 1e-9 <= v.value <= mu + 3 * sigma + 1e-9

    def test_row_oriented_destination_gets_rows(self, cfg):
        code = 13
        friend = cfg.rule(code).friends[0]
        dest = make_table(
            [["h", "a", "b", "c"], ["f", "700", "710", "720"]],
            row_labels=[0, friend],
            pii="S0000000000000003",
        )
        tables = [_source_table(code), dest]
        out, report = augment(tables, cfg, seed=2)
        assert report.inserted[code] == 9
        grown = out[1]
        assert grown.num_cols == dest.num_cols
        assert sum(l == code for l in grown.row_labels) == 9
        assert all(len(r) == grown.num_cols for r in grown.cells)

    def test_no_destination_skips(self, cfg):
        code = 13
        tables = [_source_table(code)]
        out, report = augment(tables, cfg, seed=0)
        assert report.inserted == {}
        assert report.skipped_no_destination[code] == 9
        assert out[0] == tables[0]

    def test_tables_without_friend_are_not_targeted(self, cfg):
        code = 13
        friend = cfg.rule(code).friends[0]
        excluded = set(cfg.rule(code).friends) | set(cfg.rule(friend).friends)
        stranger_code = next(
            c for c in range(4, 22) if c not in excluded and c not in (code, friend)
        )
        stranger = _friend_table(stranger_code, pii="S0000000000000004")
        tables = [_source_table(code), _friend_table(friend), stranger]
        out, _ = augment(tables, cfg, seed=3)
        assert out[2] == stranger

    def test_failure_sentinel_logged(self, cfg, caplog):
        code = 13
        friend = cfg.rule(code).friends[0]
        textual = make_table(
            [["h", "p"], ["g1", "high"]], col_labels=[0, code], pii="S0000000000000005"
        )
        tables = [textual, _friend_table(friend, rows=4)]
        with caplog.at_level(logging.WARNING, logger="tablekb.augment"):
            _out, report = augment(tables, cfg, seed=0)
        demand = plan(tables, cfg).entry(code).demand
        assert report.failures[code] == demand
        assert report.inserted.get(code, 0) == 0
        assert any(f"{AUGMENT_FAILED:.0f}" in r.getMessage() for r in caplog.records)

    def test_deterministic_under_seed(self, cfg):
        code = 13
        friend = cfg.rule(code).friends[0]
        # destination longer than the source line so the Gaussian path runs
        tables = [_source_table(code), _friend_table(friend, rows=6)]
        a, _ = augment(tables, cfg, seed=5)
        b, _ = augment(tables, cfg, seed=5)
        assert a == b
        c, _ = augment(tables, cfg, seed=6)
        assert any(x != y for x, y in zip(a, c))

    def test_inputs_not_mutated(self, cfg):
        code = 13
        friend = cfg.rule(code).friends[0]
        tables = [_source_table(code), _friend_table(friend)]
        before = list(tables)
        augment(tables, cfg, seed=0)
        assert tables == before
