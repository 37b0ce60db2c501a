"""Build the bundled gold corpus: 20 tables over 4 articles.

Writes three line-delimited files under tests/data/gold/:

  tables.jsonl  input tables; only structural id lines are pre-labeled
  gold.jsonl    expected property tuples and compositions, hand-derived
                from the table contents below (not captured from a
                pipeline run)
  train.jsonl   value-jittered copies of each table carrying silver
                labels from the rule annotator, for distillation runs

The corpus covers both orientations, intra- and inter-table linking,
partial compositions, and the repair/filter edge cases: a vetoed
ambiguous heading, out-of-range and negative values, a scaled heading
exponent, reciprocal resistivity units, and a bare heading resolved by
value medians.
"""

from __future__ import annotations

import argparse
import random
from pathlib import Path

from tablekb.annotate import AnnotationReport, annotate_table
from tablekb.cli import write_extraction_file
from tablekb.composition import CompositionEntity, relabel_composition_table
from tablekb.config import default_config
from tablekb.kb import composition_to_obj, tuple_to_obj
from tablekb.postprocess import ExtractedTuple
from tablekb.table import Table, make_entity_id, write_table_document

A = "SA00000000000001"
B = "SB00000000000002"
C = "SC00000000000003"
D = "SD00000000000004"


def pt(pii, ti, row, col, gid, code, value, unit, kind="single"):
    entity = make_entity_id(pii, ti, row, col, gid, "property")
    return ExtractedTuple(entity=entity, code=code, value=value, unit=unit, value_kind=kind)


def comp(pii, ti, idx, gid, parts, complete, orientation="col"):
    r, c = (idx, 0) if orientation == "col" else (0, idx)
    entity = make_entity_id(pii, ti, r, c, gid, "composition")
    return CompositionEntity(
        entity=entity, constituents=tuple(parts), material_id=gid, complete=complete
    )


def col_props(pii, ti, col, code, unit, values, ids):
    return [pt(pii, ti, r + 1, col, g, code, v, unit) for r, (g, v) in enumerate(zip(ids, values))]


def build_corpus():
    """Returns (tables, gold_records) in article order."""
    entries = []

    def add(table, tuples, comps=()):
        entries.append((table, list(tuples), list(comps)))

    bg = ["BG-1", "BG-2", "BG-3"]
    add(
        Table.build(A, 0, "Nominal compositions of the borosilicate glasses (mol%).",
                    [["Glass", "SiO2 (mol%)", "B2O3 (mol%)", "Na2O (mol%)"],
                     ["BG-1", "70", "20", "10"],
                     ["BG-2", "65", "25", "10"],
                     ["BG-3", "60", "30", "10"]],
                    col_labels=[3, 0, 0, 0]),
        [],
        [comp(A, 0, k + 1, g, [("SiO2", si, "mol%"), ("B2O3", b, "mol%"), ("Na2O", na, "mol%")], True)
         for k, (g, si, b, na) in enumerate([("BG-1", 70.0, 20.0, 10.0),
                                             ("BG-2", 65.0, 25.0, 10.0),
                                             ("BG-3", 60.0, 30.0, 10.0)])],
    )
    add(
        Table.build(A, 1, "Thermal and elastic properties of the glasses.",
                    [["Glass", "Tg (K)", "Density (g/cm3)", "Young's modulus (GPa)"],
                     ["BG-1", "810", "2.45", "71.2"],
                     ["BG-2", "822", "2.50", "72.9"],
                     ["BG-3", "835.5", "2.56", "74.1"]],
                    col_labels=[3, 0, 0, 0]),
        col_props(A, 1, 1, 7, "K", [810.0, 822.0, 835.5], bg)
        + col_props(A, 1, 2, 13, "g/cm3", [2.45, 2.5, 2.56], bg)
        + col_props(A, 1, 3, 18, "GPa", [71.2, 72.9, 74.1], bg),
    )
    # bare heading; the caption supplies the Vickers scale
    add(
        Table.build(A, 2, "Vickers hardness of the glasses at 100 g load.",
                    [["Glass", "Hardness"],
                     ["BG-1", "534"], ["BG-2", "548"], ["BG-3", "561"]],
                    col_labels=[3, 0]),
        col_props(A, 2, 1, 15, "HV", [534.0, 548.0, 561.0], bg),
    )
    # heading exponent: plain cell values are scaled by 10^-6
    add(
        Table.build(A, 3, "Thermal expansion coefficients from dilatometry.",
                    [["Glass", "CTE (10-6/K)"],
                     ["BG-1", "8.2"], ["BG-2", "8.9"], ["BG-3", "9.4"]],
                    col_labels=[3, 0]),
        col_props(A, 3, 1, 11, "1/K", [8.2e-06, 8.9e-06, 9.4e-06], bg),
    )
    # resistivity column: values invert to conductivity in S/cm
    add(
        Table.build(A, 4, "Electrical resistivity of the glasses from impedance spectroscopy.",
                    [["Glass", "σ (Ω cm)"],
                     ["BG-1", "200000"], ["BG-2", "500000"], ["BG-3", "1000000"]],
                    col_labels=[3, 0]),
        col_props(A, 4, 1, 21, "S/cm", [5e-06, 2e-06, 1e-06], bg),
    )
    # ambiguous Tm symbol validated by the melting caption
    add(
        Table.build(A, 5, "Melting temperatures Tm of the glasses by DTA.",
                    [["Glass", "Tm (K)"],
                     ["BG-1", "1420.5"], ["BG-2", "1444"], ["BG-3", "1465"]],
                    col_labels=[3, 0]),
        col_props(A, 5, 1, 9, "K", [1420.5, 1444.0, 1465.0], bg),
    )

    # mixed table: composition and properties share one grid (intra links)
    cs = ["CS-1", "CS-2"]
    add(
        Table.build(B, 0, "Compositions (wt%) and basic properties of the CS glasses.",
                    [["Sample", "SiO2 (wt%)", "Al2O3 (wt%)", "CaO (wt%)", "Density (g/cm3)", "Tg (°C)"],
                     ["CS-1", "50", "20", "30", "2.71", "745"],
                     ["CS-2", "48", "22", "30", "2.74", "752"]],
                    col_labels=[3, 0, 0, 0, 0, 0]),
        col_props(B, 0, 4, 13, "g/cm3", [2.71, 2.74], cs)
        + col_props(B, 0, 5, 7, "degC", [745.0, 752.0], cs),
        [comp(B, 0, 1, "CS-1", [("SiO2", 50.0, "wt%"), ("Al2O3", 20.0, "wt%"), ("CaO", 30.0, "wt%")], True),
         comp(B, 0, 2, "CS-2", [("SiO2", 48.0, "wt%"), ("Al2O3", 22.0, "wt%"), ("CaO", 30.0, "wt%")], True)],
    )
    # row sums near 72: reported but flagged incomplete
    add(
        Table.build(B, 1, "Nominal phosphate contents (mol%); remainder not analyzed.",
                    [["Sample", "SiO2 (mol%)", "Na2O (mol%)"],
                     ["P-1", "48", "24"],
                     ["P-2", "50", "22"]],
                    col_labels=[3, 0, 0]),
        [],
        [comp(B, 1, 1, "P-1", [("SiO2", 48.0, "mol%"), ("Na2O", 24.0, "mol%")], False),
         comp(B, 1, 2, "P-2", [("SiO2", 50.0, "mol%"), ("Na2O", 22.0, "mol%")], False)],
    )
    add(
        Table.build(B, 2, "Elastic moduli and Poisson ratio.",
                    [["Sample", "Shear modulus (GPa)", "Poisson ratio"],
                     ["CS-1", "29.8", "0.22"],
                     ["CS-2", "30.4", "0.23"],
                     ["P-1", "27.1", "0.21"]],
                    col_labels=[3, 0, 0]),
        col_props(B, 2, 1, 17, "GPa", [29.8, 30.4, 27.1], cs + ["P-1"])
        + col_props(B, 2, 2, 16, None, [0.22, 0.23, 0.21], cs + ["P-1"]),
    )

    nn = ["N-1", "N-2", "N-3"]
    add(
        Table.build(C, 0, "Optical constants of the fluoride glasses.",
                    [["Sample", "Refractive index", "Abbe number"],
                     ["N-1", "1.512", "58.6"],
                     ["N-2", "1.525", "55.2"],
                     ["N-3", "1.544", "52.0"]],
                    col_labels=[3, 0, 0]),
        col_props(C, 0, 1, 20, None, [1.512, 1.525, 1.544], nn)
        + col_props(C, 0, 2, 19, None, [58.6, 55.2, 52.0], nn),
    )
    # Abbe values far out of range are dropped; the density column survives
    add(
        Table.build(C, 1, "Dispersion estimates and densities.",
                    [["Sample", "Abbe number", "Density (g/cm3)"],
                     ["N-1", "164", "2.49"],
                     ["N-2", "171", "2.52"]],
                    col_labels=[3, 0, 0]),
        col_props(C, 1, 2, 13, "g/cm3", [2.49, 2.52], nn[:2]),
    )
    # sign typo in one density cell
    add(
        Table.build(C, 2, "Measured densities of the series.",
                    [["Sample", "Density (g/cm3)"],
                     ["D-1", "2.50"], ["D-2", "-2.58"], ["D-3", "2.61"]],
                    col_labels=[3, 0]),
        [pt(C, 2, 1, 1, "D-1", 13, 2.5, "g/cm3"),
         pt(C, 2, 3, 1, "D-3", 13, 2.61, "g/cm3")],
    )
    kk = ["K-1", "K-2", "K-3"]
    add(
        Table.build(C, 3, "Mechanical response of the oxynitride glasses.",
                    [["Sample", "Bulk modulus (GPa)", "Fracture toughness (MPa m1/2)"],
                     ["K-1", "44.1", "0.82"],
                     ["K-2", "45.6", "0.88"],
                     ["K-3", "47.0", "0.95"]],
                    col_labels=[3, 0, 0]),
        col_props(C, 3, 1, 12, "GPa", [44.1, 45.6, 47.0], kk)
        + col_props(C, 3, 2, 14, "MPa·m^0.5", [0.82, 0.88, 0.95], kk),
    )
    # row-oriented: properties run along rows, ids along the header row
    add(
        Table.build(C, 4, "Characteristic temperatures of the fiber glasses.",
                    [["Property", "F-1", "F-2"],
                     ["Softening point (°C)", "625", "641"],
                     ["Annealing point (°C)", "548", "560"]],
                    row_labels=[3, 0, 0]),
        [pt(C, 4, 1, 1, "F-1", 10, 625.0, "degC"),
         pt(C, 4, 1, 2, "F-2", 10, 641.0, "degC"),
         pt(C, 4, 2, 1, "F-1", 5, 548.0, "degC"),
         pt(C, 4, 2, 2, "F-2", 5, 560.0, "degC")],
    )
    ll = ["L-1", "L-2"]
    add(
        Table.build(C, 5, "Liquidus and crystallization data from DTA.",
                    [["Sample", "Liquidus temperature (K)", "Crystallization temperature (K)"],
                     ["L-1", "1391", "1120"],
                     ["L-2", "1405", "1131"]],
                    col_labels=[3, 0, 0]),
        col_props(C, 5, 1, 8, "K", [1391.0, 1405.0], ll)
        + col_props(C, 5, 2, 6, "K", [1120.0, 1131.0], ll),
    )

    # the Tm column is vetoed by the caption; bare density resolves to
    # kg/m3 from the value median
    tm = ["TM-1", "TM-2"]
    add(
        Table.build(D, 0, "Melting points Tm of the transition metal tellurite glasses.",
                    [["Sample", "Tm (K)", "Density"],
                     ["TM-1", "1005", "2495"],
                     ["TM-2", "1013", "2512"]],
                    col_labels=[3, 0, 0]),
        col_props(D, 0, 2, 13, "kg/m3", [2495.0, 2512.0], tm),
    )
    add(
        Table.build(D, 1, "Arrhenius activation energies for dc conduction.",
                    [["Sample", "Activation energy (kJ/mol)"],
                     ["TM-1", "182.4"], ["TM-2", "176.0"]],
                    col_labels=[3, 0]),
        col_props(D, 1, 1, 4, "kJ/mol", [182.4, 176.0], tm),
    )
    add(
        Table.build(D, 2, "Indentation hardness.",
                    [["Sample", "Hv (GPa)"],
                     ["TM-1", "5.4"], ["TM-2", "5.6"]],
                    col_labels=[3, 0]),
        col_props(D, 2, 1, 15, "GPa", [5.4, 5.6], tm),
    )
    add(
        Table.build(D, 3, "Refractive indices at 589 nm.",
                    [["Sample", "nd"],
                     ["TM-1", "2.084"], ["TM-2", "2.091"]],
                    col_labels=[3, 0]),
        col_props(D, 3, 1, 20, None, [2.084, 2.091], tm),
    )
    add(
        Table.build(D, 4, "Batch compositions of the tellurite glasses (mol%).",
                    [["Sample", "TeO2 (mol%)", "WO3 (mol%)"],
                     ["TM-1", "70", "30"],
                     ["TM-2", "75", "25"]],
                    col_labels=[3, 0, 0]),
        [],
        [comp(D, 4, 1, "TM-1", [("TeO2", 70.0, "mol%"), ("WO3", 30.0, "mol%")], True),
         comp(D, 4, 2, "TM-2", [("TeO2", 75.0, "mol%"), ("WO3", 25.0, "mol%")], True)],
    )

    tables = [t for t, _, _ in entries]
    gold = [
        {
            "pii": t.pii,
            "table_index": t.table_index,
            "tuples": [tuple_to_obj(x) for x in tups],
            "compositions": [composition_to_obj(c) for c in comps],
        }
        for t, tups, comps in entries
    ]
    return tables, gold


def jitter_table(table: Table, rng: random.Random, spread: float = 0.02) -> Table:
    """Copy with every interior numeric cell scaled by 1 +- spread.

    Headings, captions, and id cells are untouched, so line labels are
    preserved while the value distributions shift.
    """
    cells = [list(row) for row in table.cells]
    for i in range(1, len(cells)):
        for j in range(1, len(cells[i])):
            try:
                v = float(cells[i][j])
            except ValueError:
                continue
            cells[i][j] = f"{v * (1.0 + rng.uniform(-spread, spread)):.6g}"
    return Table.build(
        pii=table.pii,
        table_index=table.table_index,
        caption=table.caption,
        cells=cells,
        row_labels=table.row_labels,
        col_labels=table.col_labels,
    )


def build_training_tables(tables, cfg, variants: int, seed: int):
    """Silver-labeled jittered copies: the rule annotator plus the
    composition relabeler supply the targets."""
    rng = random.Random(seed)
    out = []
    report = AnnotationReport()
    for v in range(variants):
        for t in tables:
            jt = jitter_table(t, rng)
            labeled = annotate_table(jt, cfg, report)
            relabeled, _ = relabel_composition_table(labeled, cfg)
            out.append(relabeled)
    return out


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="tests/data/gold")
    ap.add_argument("--variants", type=int, default=3,
                    help="jittered training copies per table")
    ap.add_argument("--seed", type=int, default=20240811)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables, gold = build_corpus()
    (out / "tables.jsonl").write_bytes(write_table_document(tables))
    write_extraction_file(out / "gold.jsonl", gold)

    cfg = default_config()
    train = build_training_tables(tables, cfg, args.variants, args.seed)
    (out / "train.jsonl").write_bytes(write_table_document(train))

    n_tup = sum(len(r["tuples"]) for r in gold)
    n_comp = sum(len(r["compositions"]) for r in gold)
    print(f"{len(tables)} tables, {n_tup} gold tuples, {n_comp} gold compositions -> {out}")
    print(f"{len(train)} training tables -> {out / 'train.jsonl'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
