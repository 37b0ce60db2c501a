"""Batch pipeline CLI over line-delimited table files.

Subcommands mirror the pipeline stages; every stage is re-runnable from
its input files. Each output gets a run manifest (config hash, seed,
input digests; no timestamps) so identical runs are byte-identical.
Exit codes: 0 success, 1 usage, 2 data, 3 internal invariant failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .annotate import annotate_table, AnnotationReport
from .augment import augment, plan
from .composition import extract_compositions, relabel_composition_table, RelabelReport
from .config import PipelineConfig, default_config
from .errors import DataError, PipelineError, UsageError
from .gat import predict_labels
from .graph import POSITIONAL_DIM, HashEmbedder, build_graph
from .kb import (
    composition_from_obj,
    composition_to_obj,
    link,
    parse_predicate,
    read_kb,
    screen,
    screen_table_text,
    tuple_from_obj,
    tuple_to_obj,
    write_kb,
)
from .metrics import evaluate, render_report
from .postprocess import post_process_table
from .supervision import ReferenceDatabase, align_dataset
from .table import Table, parse_table_document, write_table_document
from .train import load_checkpoint, save_checkpoint, train

__all__ = ["main", "read_tables", "write_tables", "read_extraction_file", "write_extraction_file"]

MANIFEST_SCHEMA = "tablekb-manifest/1"
EXTRACTION_SCHEMA = "tablekb-extraction/1"

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha256_path(path: str | Path) -> str:
    return _sha256_bytes(Path(path).read_bytes())


def _load_config(path: str | None) -> tuple[PipelineConfig, str]:
    if path is None:
        cfg = default_config()
    else:
        try:
            cfg = PipelineConfig.from_json(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError, TypeError, KeyError) as exc:
            raise DataError(f"config {path}: {exc}") from exc
    return cfg, cfg.to_json()


def _write_manifest(out_path: str | Path, command: str, seed: int, cfg_json: str, inputs: list[str]) -> None:
    obj = {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "config_sha256": _sha256_bytes(cfg_json.encode("utf-8")),
        "inputs": {str(p): _sha256_path(p) for p in inputs},
        "seed": seed,
        "version": __version__,
    }
    Path(str(out_path) + ".manifest.json").write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_tables(path: str | Path) -> list[Table]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return parse_table_document(data)


def write_tables(path: str | Path, tables: list[Table]) -> None:
    Path(path).write_bytes(write_table_document(tables))


def write_extraction_file(path: str | Path, records: list[dict]) -> None:
    lines = [json.dumps({"schema": EXTRACTION_SCHEMA}, separators=(",", ":"), sort_keys=True)]
    for r in records:
        lines.append(json.dumps(r, separators=(",", ":"), ensure_ascii=False, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_extraction_file(path: str | Path):
    """Returns (tuples, compositions). Accepts extraction files and flat
    tuple files."""
    tuples, comps = [], []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: bad JSON: {exc}") from exc
        try:
            if obj.get("schema"):
                continue
            if "tuples" in obj:
                tuples.extend(tuple_from_obj(t) for t in obj["tuples"])
                comps.extend(composition_from_obj(c) for c in obj.get("compositions", []))
            else:
                tuples.append(tuple_from_obj(obj))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad record: {exc}") from exc
    return tuples, comps


def _map_tables(fn, tables: list[Table], workers: int):
    if workers <= 1:
        return [fn(t) for t in tables]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tables))


def _write_audit(path: str | None, entries: list[dict]) -> None:
    if path is None:
        return
    text = "\n".join(json.dumps(e, separators=(",", ":"), ensure_ascii=False, sort_keys=True) for e in entries)
    Path(path).write_text(text + ("\n" if text else ""), encoding="utf-8")


def _cmd_ingest(args) -> int:
    cfg, cfg_json = _load_config(args.config)
    tables = read_tables(args.input)
    write_tables(args.output, tables)
    _write_manifest(args.output, "ingest", args.seed, cfg_json, [args.input])
    print(f"ingested {len(tables)} tables -> {args.output}")
    return 0


def _cmd_supervise(args) -> int:
    cfg, cfg_json = _load_config(args.config)
    tables = read_tables(args.input)
    db = ReferenceDatabase.load(args.refdb)
    labeled, results = align_dataset(tables, db, cfg)
    write_tables(args.output, labeled)
    _write_manifest(args.output, "supervise", args.seed, cfg_json, [args.input, args.refdb])
    if args.report:
        report = [
            {
                "pii": t.pii,
                "table_index": t.table_index,
                "transforms": {str(k): v for k, v in r.transforms.items()},
                "labeled": [[a, i, c] for a, i, c in r.labeled],
                "orientation": r.orientation,
            }
            for t, r in zip(labeled, results)
        ]
        Path(args.report).write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    n = sum(len(r.labeled) for r in results)
    print(f"supervision labeled {n} lines across {len(tables)} tables -> {args.output}")
    return 0


def _cmd_annotate(args) -> int:
    cfg, cfg_json = _load_config(args.config)
    tables = read_tables(args.input)
    report = AnnotationReport()
    out = _map_tables(lambda t: annotate_table(t, cfg, report), tables, args.workers)
    write_tables(args.output, out)
    _write_manifest(args.output, "annotate", args.seed, cfg_json, [args.input])
    if args.report:
        obj = {
            "direct": report.direct,
            "validated": report.validated,
            "suppressed_rows": report.suppressed_rows,
            "suppressed_cols": report.suppressed_cols,
            "per_property": {str(k): v for k, v in sorted(report.per_property.items())},
        }
        Path(args.report).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"annotated {report.direct + report.validated} lines -> {args.output}")
    return 0


def _cmd_augment(args) -> int:
    cfg, cfg_json = _load_config(args.config)
    tables = read_tables(args.input)
    the_plan = plan(tables, cfg)
    out, report = augment(tables, cfg, seed=args.seed)
    write_tables(args.output, out)
    _write_manifest(args.output, "augment", args.seed, cfg_json, [args.input])
    if args.plan_out:
        obj = {
            "plan": [
                {"code": e.code, "n_original": e.n_original, "n_target": e.n_target}
                for e in the_plan.entries
            ],
            "inserted": {str(k): v for k, v in sorted(report.inserted.items())},
            "failures": {str(k): v for k, v in sorted(report.failures.items())},
            "skipped_no_destination": {
                str(k): v for k, v in sorted(report.skipped_no_destination.items())
            },
        }
        Path(args.plan_out).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    total = sum(report.inserted.values())
    print(f"augmented {total} lines -> {args.output}")
    return 0


def _cmd_train(args) -> int:
    cfg, cfg_json = _load_config(args.config)
    tcfg = cfg.train
    if args.seed != 0:
        tcfg = replace(tcfg, seed=args.seed)
    if args.epochs is not None:
        tcfg = replace(tcfg, epochs=args.epochs)
    tables = read_tables(args.input)
    embedder = HashEmbedder(tcfg.embed_dim)
    graphs = [build_graph(t, embedder) for t in tables]
    model, stats = train(graphs, tcfg)
    save_checkpoint(model, args.output)
    _write_manifest(args.output, "train", tcfg.seed, cfg_json, [args.input])
    if args.trace_out:
        lines = [
            json.dumps(
                {"epoch": s.epoch, "total": s.total, "ce": s.ce, "constraint": s.constraint},
                sort_keys=True,
            )
            for s in stats
        ]
        Path(args.trace_out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"trained {len(stats)} epochs on {len(graphs)} tables -> {args.output}")
    return 0


def _extract_tables(
    tables: list[Table], cfg: PipelineConfig, args
) -> tuple[list[dict], list[dict]]:
    if args.checkpoint:
        model = load_checkpoint(args.checkpoint)
        embed_dim = model.d_in - POSITIONAL_DIM
        if embed_dim <= 0:
            raise DataError(f"{args.checkpoint}: input dim {model.d_in} too small")
        embedder = HashEmbedder(embed_dim)

        def label_stage(table: Table) -> Table:
            graph = build_graph(table, embedder)
            pred_rows, pred_cols = predict_labels(model, graph, cfg.train.alpha_threshold)
            rows = [
                old if old != 0 else new for old, new in zip(table.row_labels, pred_rows)
            ]
            cols = [
                old if old != 0 else new for old, new in zip(table.col_labels, pred_cols)
            ]
            return table.with_labels(row_labels=rows, col_labels=cols)

    else:
        ann_report = AnnotationReport()

        def label_stage(table: Table) -> Table:
            return annotate_table(table, cfg, ann_report)

    audit_entries: list[dict] = []
    relabel_report = RelabelReport()

    def process(table: Table) -> dict:
        labeled = label_stage(table)
        relabeled, _edges = relabel_composition_table(labeled, cfg, relabel_report)
        local_audit: list[dict] = []
        final, tuples = post_process_table(relabeled, cfg, local_audit)
        comps = extract_compositions(final, cfg)
        audit_entries.extend(local_audit)
        return {
            "pii": table.pii,
            "table_index": table.table_index,
            "tuples": [tuple_to_obj(t) for t in tuples],
            "compositions": [composition_to_obj(c) for c in comps],
            "row_labels": list(final.row_labels),
            "col_labels": list(final.col_labels),
        }

    records = _map_tables(process, tables, args.workers)
    return records, audit_entries


def _cmd_extract(args) -> int:
    cfg, cfg_json = _load_config(args.config)
    tables = read_tables(args.input)
    records, audit_entries = _extract_tables(tables, cfg, args)
    write_extraction_file(args.output, records)
    inputs = [args.input] + ([args.checkpoint] if args.checkpoint else [])
    _write_manifest(args.output, "extract", args.seed, cfg_json, inputs)
    _write_audit(args.audit, audit_entries)
    n_tuples = sum(len(r["tuples"]) for r in records)
    n_comps = sum(len(r["compositions"]) for r in records)
    print(f"extracted {n_tuples} property tuples, {n_comps} compositions -> {args.output}")
    return 0


def _cmd_link(args) -> int:
    cfg, cfg_json = _load_config(args.config)
    tuples, comps = read_extraction_file(args.input)
    records = link(comps, tuples)
    write_kb(records, args.output, args.index_out)
    _write_manifest(args.output, "link", args.seed, cfg_json, [args.input])
    kinds: dict[str, int] = {}
    for r in records:
        kinds[r.link_kind] = kinds.get(r.link_kind, 0) + 1
    summary = ", ".join(f"{k}={v}" for k, v in sorted(kinds.items()))
    print(f"linked {len(records)} records ({summary}) -> {args.output}")
    return 0


def _cmd_eval(args) -> int:
    cfg, cfg_json = _load_config(args.config)
    pred, _ = read_extraction_file(args.pred)
    gold, _ = read_extraction_file(args.gold)
    report = evaluate(pred, gold)
    sys.stdout.write(render_report(report))
    if args.report_out:
        Path(args.report_out).write_text(
            json.dumps(report.to_obj(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        _write_manifest(args.report_out, "eval", args.seed, cfg_json, [args.pred, args.gold])
    return 0


def _cmd_screen(args) -> int:
    _cfg, _cfg_json = _load_config(args.config)
    records = read_kb(args.kb)
    predicates = [parse_predicate(w) for w in args.where]
    hits = screen(records, predicates)
    text = screen_table_text(hits)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        _write_manifest(args.out, "screen", args.seed, _cfg_json, [args.kb])
    else:
        sys.stdout.write(text)
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", default=None, help="pipeline config JSON (defaults built in)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--audit", default=None, help="write audit trail JSONL here")
    sub.add_argument("--workers", type=int, default=1)


def build_parser() -> _Parser:
    parser = _Parser(prog="tablekb", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tablekb {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="command")

    p = subs.add_parser("ingest", help="validate and canonicalize a table file")
    p.add_argument("input")
    p.add_argument("output")
    _add_common(p)
    p.set_defaults(fn=_cmd_ingest)

    p = subs.add_parser("supervise", help="distant-supervision labeling from a reference database")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--refdb", required=True)
    p.add_argument("--report", default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_supervise)

    p = subs.add_parser("annotate", help="rule-based property annotation")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--report", default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_annotate)

    p = subs.add_parser("augment", help="rebalance under-represented properties")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--plan-out", default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_augment)

    p = subs.add_parser("train", help="train the header classifier")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--trace-out", default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_train)

    p = subs.add_parser("extract", help="classify, post-process, and emit tuples")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--checkpoint", default=None, help="trained model; omit for the rules path")
    _add_common(p)
    p.set_defaults(fn=_cmd_extract)

    p = subs.add_parser("link", help="build the knowledge base from an extraction file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--index-out", default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_link)

    p = subs.add_parser("eval", help="strict-match scoring of predictions against gold")
    p.add_argument("pred")
    p.add_argument("gold")
    p.add_argument("--report-out", default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_eval)

    p = subs.add_parser("screen", help="filter the knowledge base by property predicates")
    p.add_argument("kb")
    p.add_argument("--where", action="append", default=[], help="property>=value@unit (repeatable)")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_screen)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required (see --help)")
        return args.fn(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # invariant breakage surfaces as exit 3
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
