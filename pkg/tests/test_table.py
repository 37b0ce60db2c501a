"""Table model: numeric parsing against hand oracles, document round trips."""
from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, strategies as st

from tablekb.errors import BoundsError, TableFormatError
from tablekb.table import (
    Table,
    find_num,
    make_entity_id,
    parse_table_document,
    sanitize_material_id,
    serialize_table,
    write_table_document,
)

from helpers import make_table


class TestFindNum:
    # each case: raw cell text, exact expected value (hand-derived)
    CASES = [
        ("12", 12.0),
        ("12.5", 12.5),
        ("-3.2", -3.2),
        (".5", 0.5),
        ("1,200", 1200.0),
        ("1,200,300", 1200300.0),
        ("500-600", 550.0),
        ("0.3-0.5", 0.4),
        ("72 ± 3", 72.0),
        ("72±3", 72.0),
        ("72 +/- 3", 72.0),
        ("5.4(2)", 5.4),
        ("1.2 x 10^3", 1200.0),
        ("1.2x10^3", 1200.0),
        ("1.2 X 10 ^ 3", 1200.0),
        ("1.2 × 10⁻³", 0.0012),
        ("3×10−5", 3e-5),
        ("1.5e-4", 1.5e-4),
        ("1.5E4", 15000.0),
        ("10^4", 10000.0),
        ("10⁻⁶", 1e-6),
        ("~7.3", 7.3),
        ("<0.5", 0.5),
        (">100", 100.0),
        ("≈2.1", 2.1),
        ("≤3", 3.0),
        ("2.5 GPa", 2.5),
        ("ρ = 2.5", 2.5),
        ("abc 17 def", 17.0),
        ("550 [12]", 550.0),
        ("550[3,4]", 550.0),
        ("−273", -273.0),
        ("–5", -5.0),
        ("6.5–7.5", 7.0),
    ]

    @pytest.mark.parametrize("raw,expected", CASES)
    def test_values(self, raw, expected):
        got = find_num(raw)
        assert got is not None, raw
        assert got.value == pytest.approx(expected, rel=1e-12), raw

    @pytest.mark.parametrize("raw", ["", "  ", "n/a", "-", "glass", "x", None, "±"])
    def test_non_numeric(self, raw):
        assert find_num(raw) is None

    def test_range_flags(self):
        p = find_num("500-600")
        assert p.from_range and p.had_uncertainty and not p.had_exponent

    def test_uncertainty_flags(self):
        p = find_num("72 ± 3")
        assert p.had_uncertainty and not p.from_range

    def test_exponent_flag(self):
        assert find_num("1.2e5").had_exponent
        assert not find_num("12").had_exponent

    def test_raw_preserved(self):
        assert find_num(" 72 ± 3 ").raw == " 72 ± 3 "

    @given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False))
    def test_round_trip_floats(self, x):
        got = find_num(repr(x))
        assert got is not None
        assert math.isclose(got.value, x, rel_tol=1e-12, abs_tol=1e-12)

    @given(st.integers(min_value=0, max_value=10**9))
    def test_integers(self, n):
        assert find_num(str(n)).value == float(n)

    @given(
        st.floats(min_value=0.001, max_value=999.0, allow_nan=False),
        st.integers(min_value=-8, max_value=8),
    )
    def test_scientific(self, mant, exp):
        got = find_num(f"{mant!r} x 10^{exp}")
        assert got is not None
        assert math.isclose(got.value, mant * 10.0**exp, rel_tol=1e-12)


class TestTableModel:
    def test_ragged_rejected(self):
        with pytest.raises(TableFormatError):
            make_table([["a", "b"], ["c"]])

    def test_empty_rejected(self):
        with pytest.raises(TableFormatError):
            make_table([])

    def test_bad_label_rejected(self):
        with pytest.raises(TableFormatError):
            make_table([["a", "b"]], row_labels=[99], col_labels=[0, 0])

    def test_bool_label_rejected(self):
        with pytest.raises(TableFormatError):
            make_table([["a", "b"]], row_labels=[True], col_labels=[0, 0])

    def test_label_length_mismatch(self):
        with pytest.raises(TableFormatError):
            make_table([["a", "b"]], row_labels=[0, 0], col_labels=[0, 0])

    def test_row_col_access(self):
        t = make_table([["a", "b"], ["c", "d"]])
        assert t.row(1) == ("c", "d")
        assert t.col(1) == ("b", "d")
        with pytest.raises(BoundsError):
            t.row(2)
        with pytest.raises(BoundsError):
            t.col(-1)

    def test_with_labels_immutable(self):
        t = make_table([["a", "b"], ["c", "d"]])
        t2 = t.with_labels(row_labels=[0, 3])
        assert t.row_labels == (0, 0)
        assert t2.row_labels == (0, 3)


class TestDocument:
    def test_round_trip(self):
        t = make_table(
            [["Sample", "SiO2 mol%"], ["G1", "70"]],
            row_labels=[0, 2],
            col_labels=[3, 0],
            caption="Glass compositions",
            sum_less_100=0,
            comp_table=True,
        )
        data = write_table_document([t])
        back = parse_table_document(data)
        assert back == [t]

    def test_round_trip_many(self):
        tables = [
            make_table([[str(i), "x"], ["1", "2"]], table_index=i) for i in range(5)
        ]
        assert parse_table_document(write_table_document(tables)) == tables

    def test_malformed_json_reports_position(self):
        with pytest.raises(TableFormatError) as ei:
            parse_table_document(b'{"pii": "a", "table_index": 0, "cells": [["x"]]}\n{bad\n')
        assert "line 2" in str(ei.value)

    def test_missing_field(self):
        with pytest.raises(TableFormatError):
            parse_table_document(b'{"pii": "a", "cells": [["x"]]}')

    def test_blank_lines_skipped(self):
        data = b'\n{"pii":"a","table_index":0,"cells":[["x"]]}\n\n'
        assert len(parse_table_document(data)) == 1

    def test_serialized_is_single_json_line(self):
        t = make_table([["a\nb", "c"], ["d", "e"]])
        line = serialize_table(t)
        assert "\n" not in line
        json.loads(line)


class TestEntityId:
    def test_property_shape(self):
        e = make_entity_id("S123", 1, 2, 3, "BG-7", "property")
        assert e.serialize() == "S123_1_2_3_BG-7"

    def test_composition_shape_has_zero_slot(self):
        e = make_entity_id("S123", 1, 2, 0, "BG 7", "composition")
        assert e.serialize() == "S123_1_2_0_0_BG 7"

    def test_material_id_sanitized(self):
        assert sanitize_material_id(" a_b ") == "a-b"
        e = make_entity_id("S1", 0, 1, 1, "x_y", "property")
        assert e.serialize().endswith("_x-y")

    def test_negative_index_rejected(self):
        with pytest.raises(BoundsError):
            make_entity_id("S1", 0, -1, 0, "m", "property")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            make_entity_id("S1", 0, 0, 0, "m", "thing")
