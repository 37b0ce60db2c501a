"""Labeled tables to filtered property tuples: vetoes, repairs, ranges."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_table
from tablekb.postprocess import (
    ExtractedTuple,
    check_heading,
    choose_orientation,
    eval_cell_expression,
    filter_tuples,
    post_process_table,
)
from tablekb.props import OTHER
from tablekb.table import make_entity_id


class TestCellExpression:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("3/4", 0.75),
            ("2^3", 8.0),
            ("2**3", 8.0),
            ("(1+2)*3", 9.0),
            (" 3 / 4 ", 0.75),
            ("((2+3)/2)", 2.5),
            ("1/3", 1.0 / 3.0),
            ("10+2", 12.0),
        ],
    )
    def test_evaluates(self, text, expected):
        assert eval_cell_expression(text) == pytest.approx(expected)

    @pytest.mark.parametrize(
        "text",
        [
            "10",          # no operator
            "3-4",         # minus reads as a dash range elsewhere
            "abc",
            "3/0",
            "",
            "   ",
            "()",
            "1/x",
            "2 + sin(3)",
            "9^9^9^9",     # overflow
            "__import__('os')",
        ],
    )
    def test_rejects(self, text):
        assert eval_cell_expression(text) is None

    @settings(max_examples=80, deadline=None)
    @given(
        a=st.integers(0, 999),
        b=st.integers(1, 999),
        op=st.sampled_from(["+", "*", "/"]),
    )
    def test_against_python_arithmetic(self, a, b, op):
        got = eval_cell_expression(f"{a}{op}{b}")
        assert got == pytest.approx({"+": a + b, "*": a * b, "/": a / b}[op])


class TestCheckHeading:
    def test_other_label_always_plausible(self, cfg):
        assert check_heading("anything at all (mol%)", "", OTHER, cfg)

    def test_composition_units_invalid_for_property(self, cfg):
        assert not check_heading("density (mol%)", "", 13, cfg)
        assert not check_heading("SiO2 (wt %)", "", 2, cfg)
        assert check_heading("density (g/cm3)", "", 13, cfg)

    def test_disqualify_token_in_heading_or_caption(self, cfg):
        assert not check_heading("Tm of transition metal", "", 9, cfg)
        assert not check_heading("Tm (K)", "properties of transition metal oxides", 9, cfg)
        assert check_heading("melting point (K)", "thermal data", 9, cfg)

    def test_global_bad_tokens_heading_only(self, cfg):
        assert not check_heading("error (%)", "", 13, cfg)
        assert not check_heading("reference", "", 7, cfg)
        assert check_heading("density (g/cm3)", "standard error shown in text", 13, cfg)

    def test_ambiguous_symbol_needs_caption_support(self, cfg):
        assert not check_heading("Tm (K)", "thermal properties", 9, cfg)
        assert check_heading("Tm (K)", "melting behavior of glasses", 9, cfg)
        assert check_heading("Tmelt (K)", "thermal properties", 9, cfg)

    def test_curie_disqualifies_crystallization(self, cfg):
        assert not check_heading("Tc (K)", "curie transition study", 6, cfg)


class TestOrientation:
    def test_columns_win_majority(self):
        t = make_table([["h", "d"], ["g1", "2.5"]], col_labels=[0, 13])
        assert choose_orientation(t) == "col"

    def test_rows_win_majority(self):
        t = make_table([["h", "a"], ["d", "2.5"]], row_labels=[0, 13])
        assert choose_orientation(t) == "row"

    def test_tie_prefers_columns(self):
        t = make_table([["h", "d"], ["x", "2.5"]], col_labels=[0, 13], row_labels=[0, 3])
        assert choose_orientation(t) == "col"

    def test_unlabeled_prefers_columns(self):
        t = make_table([["a", "b"], ["c", "1"]])
        assert choose_orientation(t) == "col"


def tuples_by_code(tuples, code):
    return [t for t in tuples if t.code == code]


class TestPostProcessTable:
    def test_column_extraction_with_material_ids(self, cfg):
        t = make_table(
            [
                ["Sample", "Density (g/cm3)"],
                ["G1", "2.5"],
                ["G2", "2.7"],
            ],
            col_labels=[3, 13],
            pii="S1110000000000000",
        )
        _t2, tuples = post_process_table(t, cfg)
        assert [x.value for x in tuples] == [2.5, 2.7]
        assert all(x.unit == "g/cm3" for x in tuples)
        assert tuples[0].entity == make_entity_id("S1110000000000000", 0, 1, 1, "G1", "property")
        assert tuples[1].entity == make_entity_id("S1110000000000000", 0, 2, 1, "G2", "property")

    def test_row_extraction_addresses_transposed(self, cfg):
        t = make_table(
            [
                ["Sample", "G1", "G2"],
                ["Density (g/cm3)", "2.5", "2.7"],
            ],
            row_labels=[3, 13],
            pii="S1110000000000001",
        )
        _t2, tuples = post_process_table(t, cfg)
        assert [x.value for x in tuples] == [2.5, 2.7]
        assert tuples[0].entity == make_entity_id("S1110000000000001", 0, 1, 1, "G1", "property")
        assert tuples[1].entity == make_entity_id("S1110000000000001", 0, 1, 2, "G2", "property")

    def test_heading_veto_relabels_to_other(self, cfg):
        audit = []
        t = make_table(
            [["Sample", "Tm (K)"], ["G1", "1100"]],
            col_labels=[0, 9],
            caption="properties of transition metal oxides",
        )
        t2, tuples = post_process_table(t, cfg, audit)
        assert tuples == []
        assert t2.col_labels[1] == OTHER
        assert any(a["stage"] == "heading-veto" for a in audit)

    def test_ambiguous_tm_kept_with_melting_caption(self, cfg):
        t = make_table(
            [["Sample", "Tm (K)"], ["G1", "1100"]],
            col_labels=[0, 9],
            caption="melting data for the series",
        )
        _t2, tuples = post_process_table(t, cfg)
        assert [x.value for x in tuples] == [1100.0]
        assert tuples[0].unit == "K"

    def test_direct_rescue_of_unlabeled_heading(self, cfg):
        audit = []
        t = make_table([["Sample", "Density (g/cm3)"], ["G1", "2.5"]], col_labels=[0, 0])
        t2, tuples = post_process_table(t, cfg, audit)
        assert t2.col_labels[1] == 13
        assert [x.value for x in tuples] == [2.5]
        assert any(a["stage"] == "direct-rescue" for a in audit)

    def test_disqualified_density_heading_vetoed(self, cfg):
        audit = []
        t = make_table([["Sample", "current density (A/cm2)"], ["G1", "0.2"]], col_labels=[0, 13])
        t2, tuples = post_process_table(t, cfg, audit)
        assert t2.col_labels[1] == OTHER
        assert tuples == []
        assert any(a["stage"] == "heading-veto" for a in audit)

    def test_pattern_override_kills_false_density(self, cfg):
        # "number density" passes the per-rule veto but matches a pattern
        audit = []
        t = make_table([["Sample", "number density (cm-3)"], ["G1", "1e19"]], col_labels=[0, 13])
        t2, tuples = post_process_table(t, cfg, audit)
        assert t2.col_labels[1] == OTHER
        assert tuples == []
        assert any(a["stage"] == "pattern-override" for a in audit)

    def test_curie_tc_vetoed_for_crystallization(self, cfg):
        audit = []
        t = make_table(
            [["Sample", "Tc (K)"], ["G1", "350"]],
            col_labels=[0, 6],
            caption="curie temperatures of the ferrites",
        )
        t2, tuples = post_process_table(t, cfg, audit)
        assert t2.col_labels[1] == OTHER
        assert tuples == []
        assert any(a["stage"] == "heading-veto" for a in audit)

    def test_context_override_curie_tc(self, cfg):
        # mislabeled as Tg, which has no curie veto of its own; the context
        # rule still retires the line
        audit = []
        t = make_table(
            [["Sample", "Tc (K)"], ["G1", "350"]],
            col_labels=[0, 7],
            caption="curie temperatures of the ferrites",
        )
        t2, tuples = post_process_table(t, cfg, audit)
        assert t2.col_labels[1] == OTHER
        assert tuples == []
        assert any(a["stage"] == "context-override" for a in audit)

    def test_context_override_diameter_unit(self, cfg):
        t = make_table([["Sample", "d (mm)"], ["G1", "3.2"]], col_labels=[0, 13])
        t2, tuples = post_process_table(t, cfg)
        assert t2.col_labels[1] == OTHER
        assert tuples == []

    def test_value_fix_scales_small_exponent_headings(self, cfg):
        audit = []
        t = make_table(
            [["Sample", "CTE (10-6/K)"], ["G1", "8.2"], ["G2", "9.4"]],
            col_labels=[0, 11],
        )
        _t2, tuples = post_process_table(t, cfg, audit)
        assert [x.value for x in tuples] == pytest.approx([8.2e-6, 9.4e-6])
        assert all(x.unit == "1/K" for x in tuples)
        assert any(a["stage"] == "value-fix" for a in audit)

    def test_value_fix_skipped_when_already_scaled(self, cfg):
        t = make_table(
            [["Sample", "CTE (10-6/K)"], ["G1", "8.2e-6"], ["G2", "9.4e-6"]],
            col_labels=[0, 11],
        )
        _t2, tuples = post_process_table(t, cfg)
        assert [x.value for x in tuples] == pytest.approx([8.2e-6, 9.4e-6])

    def test_reciprocal_resistivity_repair(self, cfg):
        audit = []
        t = make_table(
            [["Sample", "resistivity (ohm cm)"], ["G1", "1e6"], ["G2", "0"], ["G3", "2e5"]],
            col_labels=[0, 21],
        )
        _t2, tuples = post_process_table(t, cfg, audit)
        assert [x.value for x in tuples] == pytest.approx([1e-6, 5e-6])
        assert all(x.unit == "S/cm" for x in tuples)
        stages = {a["stage"] for a in audit}
        assert "reciprocal-repair" in stages and "reciprocal-drop" in stages

    def test_median_veto_on_implausible_density(self, cfg):
        audit = []
        t = make_table(
            [["Sample", "density"], ["G1", "5.5e4"], ["G2", "6e4"]],
            col_labels=[0, 13],
        )
        t2, tuples = post_process_table(t, cfg, audit)
        assert tuples == []
        assert t2.col_labels[1] == OTHER
        assert any(a["stage"] == "median-veto" for a in audit)

    def test_range_cells_marked_mean_of_range(self, cfg):
        t = make_table(
            [["Sample", "Density (g/cm3)"], ["G1", "2.4-2.6"], ["G2", "2.7"]],
            col_labels=[0, 13],
        )
        _t2, tuples = post_process_table(t, cfg)
        assert [(x.value, x.value_kind) for x in tuples] == [
            (pytest.approx(2.5), "mean-of-range"),
            (2.7, "single"),
        ]

    def test_expression_cells_evaluated(self, cfg):
        t = make_table(
            [["Sample", "Poisson ratio"], ["G1", "1/4"]],
            col_labels=[0, 16],
        )
        _t2, tuples = post_process_table(t, cfg)
        assert [x.value for x in tuples] == [0.25]
        assert tuples[0].unit is None

    def test_composition_and_id_lines_untouched(self, cfg):
        t = make_table(
            [["Sample", "SiO2 (mol%)", "Density (g/cm3)"], ["G1", "70", "2.5"]],
            col_labels=[3, 2, 13],
        )
        t2, tuples = post_process_table(t, cfg)
        assert t2.col_labels == (3, 2, 13)
        assert [x.code for x in tuples] == [13]

    def test_nonnumeric_property_line_emits_nothing(self, cfg):
        t = make_table(
            [["Sample", "Density (g/cm3)"], ["G1", "high"]],
            col_labels=[0, 13],
        )
        _t2, tuples = post_process_table(t, cfg)
        assert tuples == []


class TestFilterTuples:
    def fixture_tuples(self):
        e = lambda i: make_entity_id("S1200000000000000", 0, i, 1, f"G{i}", "property")
        return [
            ExtractedTuple(e(1), 13, 2.5, "g/cm3", "single"),
            ExtractedTuple(e(2), 13, -1.2, "g/cm3", "single"),
            ExtractedTuple(e(3), 16, 0.28, None, "single"),
            ExtractedTuple(e(4), 16, 0.7, None, "single"),
            ExtractedTuple(e(5), 19, 45.0, "GPa", "single"),
            ExtractedTuple(e(6), 19, 45.0, None, "single"),
            ExtractedTuple(e(7), 9, 1100.0, "K", "single"),
        ]

    def test_invalid_survivors_zero_false_removals_zero(self, cfg):
        tuples = self.fixture_tuples()
        kept = filter_tuples(tuples, cfg)
        assert [(t.code, t.value) for t in kept] == [
            (13, 2.5),
            (16, 0.28),
            (19, 45.0),
            (9, 1100.0),
        ]
        # the abbe survivor is the unitless one
        assert [t.unit for t in kept if t.code == 19] == [None]

    def test_unit_specific_range_beats_default(self, cfg):
        e = make_entity_id("S1200000000000001", 0, 1, 1, "G1", "property")
        # 40 g/cm3 exceeds the unit window but sits inside the default one
        t = ExtractedTuple(e, 13, 40.0, "g/cm3", "single")
        assert filter_tuples([t], cfg) == []
        t2 = ExtractedTuple(e, 13, 40.0, None, "single")
        assert filter_tuples([t2], cfg) == [t2]

    def test_negative_temperature_in_kelvin_dropped(self, cfg):
        e = make_entity_id("S1200000000000002", 0, 1, 1, "G1", "property")
        t = ExtractedTuple(e, 7, 100.0, "K", "single")
        assert filter_tuples([t], cfg) == []

    def test_order_preserved(self, cfg):
        tuples = self.fixture_tuples()
        kept = filter_tuples(tuples, cfg)
        idx = [tuples.index(t) for t in kept]
        assert idx == sorted(idx)

    def test_audit_records_drops(self, cfg):
        audit = []
        table = make_table([["a", "b"], ["c", "1"]])
        filter_tuples(self.fixture_tuples(), cfg, audit, table)
        stages = [a["stage"] for a in audit]
        assert stages.count("range-filter") == 2
        assert stages.count("invalid-unit") == 1


class TestTupleSerialization:
    def test_to_obj_shape(self):
        e = make_entity_id("S1300000000000000", 2, 1, 4, "BG 7", "property")
        t = ExtractedTuple(e, 13, 2.5, "g/cm3", "single")
        obj = t.to_obj()
        assert obj == {
            "entity": "S1300000000000000_2_1_4_BG 7",
            "property": "density",
            "value": 2.5,
            "unit": "g/cm3",
            "value_kind": "single",
        }
