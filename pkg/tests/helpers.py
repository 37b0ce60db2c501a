"""Table builders shared across test modules."""
from __future__ import annotations

import numpy as np

from tablekb.table import Table


def make_table(
    cells,
    row_labels=None,
    col_labels=None,
    pii="S0000000000000000",
    table_index=0,
    caption="",
    **kw,
):
    return Table.build(
        pii=pii,
        table_index=table_index,
        caption=caption,
        cells=cells,
        row_labels=row_labels,
        col_labels=col_labels,
        **kw,
    )


def random_table(rng: np.random.Generator, max_rows=4, max_cols=4) -> Table:
    r = int(rng.integers(2, max_rows + 1))
    c = int(rng.integers(2, max_cols + 1))
    cells = [[f"h{j}" if i == 0 else f"{rng.integers(0, 100)}" for j in range(c)] for i in range(r)]
    cells[1][0] = "G1"
    return make_table(
        cells, pii=f"S{rng.integers(10**15, 10**16)}", table_index=int(rng.integers(0, 5))
    )


# Reference values for the alignment fixtures. Pool spacings are chosen so
# that no value of one pool lands within relative tolerance of another pool
# under any candidate transform (spacing never divides 273; ranges under
# x1000 / div1000 stay disjoint), keeping transform selection unambiguous.
def ref_tg_k(k: int) -> float:
    return 500.0 + 6.0 * k


def ref_tl_c(k: int) -> float:
    return 1000.0 + 5.0 * k


def ref_density_g(k: int) -> float:
    return 2.0 + 0.01 * k


def ref_e_gpa(k: int) -> float:
    return 150.0 + 2.0 * k


def ref_sio2(k: int) -> float:
    return 40.0 + 0.8 * k


def build_reference_db(n: int = 60):
    from tablekb.supervision import RefRecord, ReferenceDatabase

    records = []
    for k in range(n):
        records.append(
            RefRecord(
                record_id=f"R{k:03d}",
                composition=tuple(
                    sorted((("SiO2", ref_sio2(k)), ("Na2O", 100.0 - ref_sio2(k))))
                ),
                properties=tuple(
                    sorted(
                        [
                            ("glass_transition_temperature", ref_tg_k(k), "K"),
                            ("liquidus_temperature", ref_tl_c(k), "degC"),
                            ("density", ref_density_g(k), "g/cm3"),
                            ("youngs_modulus", ref_e_gpa(k), "GPa"),
                        ]
                    )
                ),
            )
        )
    return ReferenceDatabase(records=tuple(records))


def build_supervision_fixture(seed: int = 0, n_tables: int = 50):
    """Synthetic alignment corpus with planted unit distortions.

    Each table carries four property columns whose reported values are the
    database values pushed through a known distortion (+-273 between K and
    degC, x1000 between g/cm3 and kg/m3), one below-threshold column with a
    single accidental match (density 1/4 < 0.30), one column matching
    nothing at all, and a non-numeric sample column. Data-row lines skip the
    stub column, leaving 7 numeric cells per row of which at most 2 can
    match one pool, so rows stay below threshold for every code. Returns
    (db, tables, expected) where expected lists per-table column labels and
    the transform the aligner must select per code.
    """
    db = build_reference_db(60)
    rng = np.random.default_rng(seed)
    tables, expected = [], []
    for t in range(n_tables):
        recs = [int(x) for x in rng.choice(60, size=4, replace=False)]
        shifted_temps = t % 2 == 0
        kg_density = t % 3 == 0
        rows = [["Sample", "Tg", "Tl", "rho", "E", "x", "y", "z"]]
        near = [f"{ref_e_gpa(57):g}", "5.1", "5.2", "5.3"]
        zero = ["9.1", "9.2", "9.3", "9.4"]
        tiny = ["0.11", "0.12", "0.13", "0.14"]
        for slot, k in enumerate(recs):
            tg = ref_tg_k(k) - 273.0 if shifted_temps else ref_tg_k(k)
            tl = ref_tl_c(k) + 273.0 if shifted_temps else ref_tl_c(k)
            d = ref_density_g(k) * 1000.0 if kg_density else ref_density_g(k)
            rows.append(
                [
                    f"G{slot+1}",
                    f"{tg:g}",
                    f"{tl:g}",
                    f"{d:g}",
                    f"{ref_e_gpa(k):g}",
                    near[slot],
                    zero[slot],
                    tiny[slot],
                ]
            )
        tables.append(
            make_table(rows, pii=f"S{2000+t:016d}", table_index=0, caption="synthetic")
        )
        expected.append(
            {
                "col_labels": (0, 7, 8, 13, 18, 0, 0, 0),
                "transforms": {
                    7: "plus273" if shifted_temps else "identity",
                    8: "minus273" if shifted_temps else "identity",
                    13: "div1000" if kg_density else "identity",
                    18: "identity",
                },
            }
        )
    return db, tables, expected
