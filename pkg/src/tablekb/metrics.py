"""Strict-match extraction scoring and conditional unit accuracy.

A prediction counts only when entity id, property, value to six
significant digits, and unit all match a distinct gold tuple. Matching
is one-to-one over multisets, so duplicated identical predictions credit
at most the gold multiplicity. Unit accuracy conditions on value-matched
entities.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .postprocess import ExtractedTuple
from .props import BY_CODE

__all__ = ["sig6", "PRF", "EvalReport", "strict_prf", "unit_accuracy", "evaluate", "render_report"]


def sig6(value: float) -> str:
    """Six-significant-digit key used for value equality."""
    return f"{float(value):.5e}"


def _full_key(t: ExtractedTuple) -> tuple[str, int, str, str]:
    return (t.entity.serialize(), t.code, sig6(t.value), t.unit or "")


def _value_key(t: ExtractedTuple) -> tuple[str, int, str]:
    return (t.entity.serialize(), t.code, sig6(t.value))


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    correct: int
    predicted: int
    gold: int
    degenerate: bool  # a zero denominator was coerced to 0


def _prf(correct: int, predicted: int, gold: int) -> PRF:
    degenerate = predicted == 0 or gold == 0
    p = correct / predicted if predicted else 0.0
    r = correct / gold if gold else 0.0
    f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
    return PRF(p, r, f1, correct, predicted, gold, degenerate)


def _overlap(pred: list[ExtractedTuple], gold: list[ExtractedTuple], key) -> int:
    pc = Counter(key(t) for t in pred)
    gc = Counter(key(t) for t in gold)
    return sum(min(n, gc[k]) for k, n in pc.items())


def strict_prf(pred: list[ExtractedTuple], gold: list[ExtractedTuple]) -> PRF:
    correct = _overlap(pred, gold, _full_key)
    return _prf(correct, len(pred), len(gold))


def unit_accuracy(pred: list[ExtractedTuple], gold: list[ExtractedTuple]) -> float | None:
    """Correct units over value-matched extractions; None when no
    extraction value-matched the gold."""
    value_matched = _overlap(pred, gold, _value_key)
    if value_matched == 0:
        return None
    fully_matched = _overlap(pred, gold, _full_key)
    return fully_matched / value_matched


@dataclass
class EvalReport:
    overall: PRF
    unit_accuracy: float | None
    per_property: dict[int, PRF] = field(default_factory=dict)
    per_property_unit_accuracy: dict[int, float | None] = field(default_factory=dict)

    def to_obj(self) -> dict:
        def prf_obj(m: PRF) -> dict:
            return {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "correct": m.correct,
                "predicted": m.predicted,
                "gold": m.gold,
                "degenerate": m.degenerate,
            }

        return {
            "overall": prf_obj(self.overall),
            "unit_accuracy": self.unit_accuracy,
            "per_property": {
                BY_CODE[c].key: prf_obj(m) for c, m in sorted(self.per_property.items())
            },
            "per_property_unit_accuracy": {
                BY_CODE[c].key: v for c, v in sorted(self.per_property_unit_accuracy.items())
            },
        }


def evaluate(pred: list[ExtractedTuple], gold: list[ExtractedTuple]) -> EvalReport:
    report = EvalReport(
        overall=strict_prf(pred, gold),
        unit_accuracy=unit_accuracy(pred, gold),
    )
    codes = sorted({t.code for t in pred} | {t.code for t in gold})
    for code in codes:
        p = [t for t in pred if t.code == code]
        g = [t for t in gold if t.code == code]
        report.per_property[code] = strict_prf(p, g)
        report.per_property_unit_accuracy[code] = unit_accuracy(p, g)
    return report


def render_report(report: EvalReport) -> str:
    """Per-property table plus overall line."""
    header = f"{'property':<32}{'P':>8}{'R':>8}{'F1':>8}{'unit acc':>10}{'support':>9}"
    lines = [header, "-" * len(header)]
    for code, m in sorted(report.per_property.items()):
        ua = report.per_property_unit_accuracy.get(code)
        ua_text = f"{ua:.4f}" if ua is not None else "-"
        lines.append(
            f"{BY_CODE[code].key:<32}{m.precision:>8.4f}{m.recall:>8.4f}{m.f1:>8.4f}"
            f"{ua_text:>10}{m.gold:>9}"
        )
    m = report.overall
    ua = report.unit_accuracy
    ua_text = f"{ua:.4f}" if ua is not None else "-"
    lines.append("-" * len(header))
    lines.append(
        f"{'overall':<32}{m.precision:>8.4f}{m.recall:>8.4f}{m.f1:>8.4f}{ua_text:>10}{m.gold:>9}"
    )
    return "\n".join(lines) + "\n"
