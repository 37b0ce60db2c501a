"""Label-code registry: structural roles 0-3 plus the 18 tracked properties.

Codes are stable across the whole pipeline: label vectors, classifier output
classes, tuple records, and the knowledge base all use the same integers.
"""
from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "OTHER",
    "CONSTITUENT",
    "COMPOSITION",
    "MATERIAL_ID",
    "NUM_CLASSES",
    "PROPERTY_CODES",
    "PropertySpec",
    "PROPERTIES",
    "BY_CODE",
    "BY_KEY",
    "code_for_name",
    "is_property_code",
    "validate_label",
]

OTHER = 0
CONSTITUENT = 1
COMPOSITION = 2
MATERIAL_ID = 3
NUM_CLASSES = 22


@dataclass(frozen=True)
class PropertySpec:
    code: int
    key: str
    display: str
    unitless: bool = False


# Order fixes the classifier output classes 4..21; do not reorder.
PROPERTIES: tuple[PropertySpec, ...] = (
    PropertySpec(4, "activation_energy", "Activation energy"),
    PropertySpec(5, "annealing_point", "Annealing point"),
    PropertySpec(6, "crystallization_temperature", "Crystallization temperature"),
    PropertySpec(7, "glass_transition_temperature", "Glass transition temperature"),
    PropertySpec(8, "liquidus_temperature", "Liquidus temperature"),
    PropertySpec(9, "melting_temperature", "Melting temperature"),
    PropertySpec(10, "softening_point", "Softening point"),
    PropertySpec(11, "thermal_expansion_coefficient", "Thermal expansion coefficient"),
    PropertySpec(12, "bulk_modulus", "Bulk modulus"),
    PropertySpec(13, "density", "Density"),
    PropertySpec(14, "fracture_toughness", "Fracture toughness"),
    PropertySpec(15, "hardness", "Hardness"),
    PropertySpec(16, "poisson_ratio", "Poisson ratio", unitless=True),
    PropertySpec(17, "shear_modulus", "Shear modulus"),
    PropertySpec(18, "youngs_modulus", "Young's modulus"),
    PropertySpec(19, "abbe_value", "Abbe value", unitless=True),
    PropertySpec(20, "refractive_index", "Refractive index", unitless=True),
    PropertySpec(21, "electrical_conductivity", "Electrical conductivity"),
)

PROPERTY_CODES: tuple[int, ...] = tuple(p.code for p in PROPERTIES)
BY_CODE: dict[int, PropertySpec] = {p.code: p for p in PROPERTIES}
BY_KEY: dict[str, PropertySpec] = {p.key: p for p in PROPERTIES}

_NAME_TO_CODE: dict[str, int] = {}
for _p in PROPERTIES:
    _NAME_TO_CODE[_p.key] = _p.code
    _NAME_TO_CODE[_p.display.lower()] = _p.code
    _NAME_TO_CODE[_p.key.replace("_", " ")] = _p.code
# common shorthands accepted on the query surface
_NAME_TO_CODE.update(
    {
        "tg": BY_KEY["glass_transition_temperature"].code,
        "cte": BY_KEY["thermal_expansion_coefficient"].code,
        "youngs modulus": BY_KEY["youngs_modulus"].code,
        "young's modulus": BY_KEY["youngs_modulus"].code,
        "abbe number": BY_KEY["abbe_value"].code,
        "conductivity": BY_KEY["electrical_conductivity"].code,
    }
)


def code_for_name(name: str) -> int:
    """Resolve a property name to its label code.

    Raises KeyError for unknown names; callers on the query surface wrap
    this into a QueryError.
    """
    return _NAME_TO_CODE[name.strip().lower()]


def is_property_code(code: int) -> bool:
    return 4 <= code <= 21


def validate_label(code: int) -> int:
    if not isinstance(code, int) or isinstance(code, bool) or not 0 <= code < NUM_CLASSES:
        raise ValueError(f"label code out of range: {code!r}")
    return code
