"""Pipeline configuration: one document governing every dictionary.

The shipped default covers all 18 properties: canonical phrases, symbol
aliases, unit surface forms, plausible ranges, caption keywords,
disqualifying tokens, per-unit validity ranges, invalid property-unit
pairs, median windows, heading override maps, supervision tolerances and
transforms, augmentation constants, and composition grammar inputs.
JSON round-trip supported so a run can pin or override the whole thing.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

from .props import BY_KEY
from .train import TrainConfig

__all__ = [
    "PropertyRule",
    "SupervisionConfig",
    "AugmentConfig",
    "CompositionConfig",
    "ContextRule",
    "PipelineConfig",
    "default_config",
]


@dataclass(frozen=True)
class PropertyRule:
    code: int
    canonical_phrases: tuple[str, ...]
    symbols: tuple[str, ...] = ()
    unit_surface: tuple[tuple[str, str], ...] = ()  # (surface, canonical)
    allowed_units: tuple[str, ...] = ()
    accepted_aliases: tuple[str, ...] = ()
    plausible_range: tuple[float, float] = (0.0, 0.0)
    caption_keywords: tuple[str, ...] = ()
    disqualify_tokens: tuple[str, ...] = ()
    ambiguous_headings: tuple[tuple[str, tuple[str, ...]], ...] = ()
    score_threshold: int = 2
    friends: tuple[int, ...] = ()
    unitless: bool = False
    absence_ok: bool = True
    fallback_patterns: tuple[str, ...] = ()


@dataclass(frozen=True)
class SupervisionConfig:
    rel_tol: float = 1e-3
    rel_tol_overrides: tuple[tuple[int, float], ...] = ()
    match_density_min: float = 0.30
    composition_abs_tol: float = 0.5
    temperature_codes: tuple[int, ...] = (5, 6, 7, 8, 9, 10)
    scale_transform_codes: tuple[int, ...] = (13,)


@dataclass(frozen=True)
class AugmentConfig:
    rate: float = 10.0
    exponent: float = 0.65
    clip_sigmas: float = 3.0
    resample_tries: int = 8
    zero_sigma: float = 0.05


@dataclass(frozen=True)
class CompositionConfig:
    exclusion_tokens: tuple[str, ...] = (
        "error",
        "ratio",
        "deviation",
        "uncertainty",
        "tolerance",
        "std",
        "batch loss",
    )
    mol_tokens: tuple[str, ...] = ("mol%", "mol %", "mol.%", "mole%", "mole %", "mol. %", "mol-%")
    wt_tokens: tuple[str, ...] = (
        "wt%",
        "wt %",
        "wt.%",
        "wt. %",
        "weight%",
        "weight %",
        "mass%",
        "mass %",
    )
    at_tokens: tuple[str, ...] = ("at%", "at %", "at.%", "at. %", "atom%", "atomic%", "atomic %")
    generic_percent: bool = True
    lexicon: tuple[tuple[str, str], ...] = (
        ("silica", "SiO2"),
        ("alumina", "Al2O3"),
        ("boric oxide", "B2O3"),
        ("soda", "Na2O"),
        ("lime", "CaO"),
        ("magnesia", "MgO"),
        ("titania", "TiO2"),
        ("zirconia", "ZrO2"),
    )
    sum_windows: tuple[tuple[float, float], ...] = ((0.95, 1.05), (95.0, 105.0))
    value_floor: float = 0.1


@dataclass(frozen=True)
class ContextRule:
    code: int
    heading_pattern: str | None = None
    caption_pattern: str | None = None
    units: tuple[str, ...] | None = None


@dataclass(frozen=True)
class PipelineConfig:
    properties: tuple[PropertyRule, ...]
    range_by_unit: tuple[tuple[int, str, float, float], ...]
    range_default: tuple[tuple[int, float, float], ...]
    invalid_units: tuple[tuple[int, str], ...]
    median_windows: tuple[tuple[int, float, float], ...]
    pattern_map: tuple[tuple[str, int], ...]
    context_map: tuple[ContextRule, ...]
    value_fix_codes: tuple[int, ...]
    global_bad_tokens: tuple[str, ...]
    hardness_scale_keywords: tuple[tuple[str, str], ...]
    hardness_scale_ranges: tuple[tuple[str, float, float], ...]
    median_unit_defaults: tuple[tuple[int, float, float, str], ...]
    supervision: SupervisionConfig = field(default_factory=SupervisionConfig)
    augmentation: AugmentConfig = field(default_factory=AugmentConfig)
    composition: CompositionConfig = field(default_factory=CompositionConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def rule(self, code: int) -> PropertyRule:
        return _rules_by_code(self)[code]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "PipelineConfig":
        obj = json.loads(text)
        base = asdict(default_config())
        for key, value in obj.items():
            if key not in base:
                raise ValueError(f"unknown config section: {key}")
            base[key] = value
        return _config_from_obj(base)


# keyed by id with a strong ref retained, so ids cannot be recycled
_RULE_CACHE: dict[int, tuple["PipelineConfig", dict[int, PropertyRule]]] = {}


def _rules_by_code(cfg: PipelineConfig) -> dict[int, PropertyRule]:
    entry = _RULE_CACHE.get(id(cfg))
    if entry is None or entry[0] is not cfg:
        entry = (cfg, {r.code: r for r in cfg.properties})
        _RULE_CACHE[id(cfg)] = entry
    return entry[1]


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def _config_from_obj(obj: dict) -> PipelineConfig:
    props = tuple(
        PropertyRule(**{k: _tuplify(v) for k, v in p.items()}) for p in obj["properties"]
    )
    ctx = tuple(ContextRule(**{k: _tuplify(v) for k, v in c.items()}) for c in obj["context_map"])
    sup = SupervisionConfig(**{k: _tuplify(v) for k, v in obj["supervision"].items()})
    aug = AugmentConfig(**obj["augmentation"])
    comp = CompositionConfig(**{k: _tuplify(v) for k, v in obj["composition"].items()})
    trn = TrainConfig(**obj["train"])
    return PipelineConfig(
        properties=props,
        range_by_unit=_tuplify(obj["range_by_unit"]),
        range_default=_tuplify(obj["range_default"]),
        invalid_units=_tuplify(obj["invalid_units"]),
        median_windows=_tuplify(obj["median_windows"]),
        pattern_map=_tuplify(obj["pattern_map"]),
        context_map=ctx,
        value_fix_codes=_tuplify(obj["value_fix_codes"]),
        global_bad_tokens=_tuplify(obj["global_bad_tokens"]),
        hardness_scale_keywords=_tuplify(obj["hardness_scale_keywords"]),
        hardness_scale_ranges=_tuplify(obj["hardness_scale_ranges"]),
        median_unit_defaults=_tuplify(obj["median_unit_defaults"]),
        supervision=sup,
        augmentation=aug,
        composition=comp,
        train=trn,
    )


_TEMP_SURFACE = (
    ("k", "K"),
    ("kelvin", "K"),
    ("°c", "degC"),
    ("° c", "degC"),
    ("deg c", "degC"),
    ("degc", "degC"),
    ("deg. c", "degC"),
    ("celsius", "degC"),
    ("oc", "degC"),
    ("c", "degC"),
)
_TEMP_UNITS = ("K", "degC")
_MODULUS_SURFACE = (
    ("gpa", "GPa"),
    ("gn/m2", "GPa"),
    ("gn m-2", "GPa"),
    ("mpa", "MPa"),
    ("mn/m2", "MPa"),
    ("kbar", "kbar"),
)
_MODULUS_UNITS = ("GPa", "MPa", "kbar")


def _temp_rule(code: int, phrases, symbols, caption, disqualify=(), ambiguous=(), rng=(150.0, 2500.0)):
    return PropertyRule(
        code=code,
        canonical_phrases=phrases,
        symbols=symbols,
        unit_surface=_TEMP_SURFACE,
        allowed_units=_TEMP_UNITS,
        plausible_range=rng,
        caption_keywords=caption,
        disqualify_tokens=disqualify,
        ambiguous_headings=ambiguous,
        friends=(7, 13),
    )


def default_config() -> PipelineConfig:
    k = {p.key: p.code for p in BY_KEY.values()}
    properties = (
        PropertyRule(
            code=k["activation_energy"],
            canonical_phrases=("activation energy",),
            symbols=("ea", "eact", "ed"),
            unit_surface=(
                ("ev", "eV"),
                ("electron volt", "eV"),
                ("kj/mol", "kJ/mol"),
                ("kj mol-1", "kJ/mol"),
                ("kj·mol-1", "kJ/mol"),
                ("kcal/mol", "kcal/mol"),
                ("kcal mol-1", "kcal/mol"),
            ),
            allowed_units=("eV", "kJ/mol", "kcal/mol"),
            plausible_range=(0.05, 1000.0),
            caption_keywords=("activation energy", "arrhenius", "conduction"),
            friends=(21, 7, 13),
        ),
        _temp_rule(
            k["annealing_point"],
            ("annealing point", "annealing temperature"),
            ("ta", "tann"),
            ("annealing", "anneal"),
        ),
        _temp_rule(
            k["crystallization_temperature"],
            ("crystallization temperature", "crystallisation temperature", "crystallization peak"),
            ("tc", "tx", "tcr", "tp"),
            ("crystallization", "crystallisation", "dsc", "dta"),
            disqualify=("curie",),
        ),
        _temp_rule(
            k["glass_transition_temperature"],
            ("glass transition temperature", "glass transition"),
            ("tg",),
            ("glass transition", "tg", "dsc", "dilatometric", "calorimetric"),
        ),
        _temp_rule(
            k["liquidus_temperature"],
            ("liquidus temperature", "liquidus"),
            ("tl", "tliq"),
            ("liquidus",),
            rng=(500.0, 2500.0),
        ),
        _temp_rule(
            k["melting_temperature"],
            ("melting temperature", "melting point", "fusion temperature"),
            ("tm", "tmelt"),
            ("melt", "fusion"),
            disqualify=("transition metal",),
            ambiguous=(("tm", ("melt", "fusion")),),
            rng=(300.0, 3500.0),
        ),
        _temp_rule(
            k["softening_point"],
            ("softening point", "softening temperature", "littleton point"),
            ("ts", "td", "tsoft"),
            ("softening", "dilatometric"),
        ),
        PropertyRule(
            code=k["thermal_expansion_coefficient"],
            canonical_phrases=(
                "thermal expansion coefficient",
                "coefficient of thermal expansion",
                "expansion coefficient",
                "thermal expansion",
            ),
            symbols=("cte", "tec", "alpha"),
            unit_surface=(
                ("1/k", "1/K"),
                ("k-1", "1/K"),
                ("/k", "1/K"),
                ("1/°c", "1/K"),
                ("°c-1", "1/K"),
                ("/°c", "1/K"),
                ("c-1", "1/K"),
            ),
            allowed_units=("1/K",),
            plausible_range=(1e-7, 50.0),
            caption_keywords=("thermal expansion", "expansion coefficient", "cte", "dilatometric"),
            friends=(7, 13, 10),
        ),
        PropertyRule(
            code=k["bulk_modulus"],
            canonical_phrases=("bulk modulus",),
            symbols=("k0", "b"),
            unit_surface=_MODULUS_SURFACE,
            allowed_units=_MODULUS_UNITS,
            plausible_range=(0.5, 1000.0),
            caption_keywords=("bulk modulus", "elastic"),
            friends=(18, 17, 16, 13),
        ),
        PropertyRule(
            code=k["density"],
            canonical_phrases=("density",),
            symbols=("rho",),
            unit_surface=(
                ("g/cm3", "g/cm3"),
                ("g/cm^3", "g/cm3"),
                ("g cm-3", "g/cm3"),
                ("g·cm-3", "g/cm3"),
                ("g.cm-3", "g/cm3"),
                ("g/cc", "g/cm3"),
                ("g·cc-1", "g/cm3"),
                ("g cc-1", "g/cm3"),
                ("gm/cm3", "g/cm3"),
                ("gm/cc", "g/cm3"),
                ("gram per cubic centimeter", "g/cm3"),
                ("grams per cubic centimeter", "g/cm3"),
                ("mg/m3", "g/cm3"),
                ("kg/m3", "kg/m3"),
                ("kg m-3", "kg/m3"),
                ("kg·m-3", "kg/m3"),
                ("kg/m^3", "kg/m3"),
            ),
            allowed_units=("g/cm3", "kg/m3"),
            plausible_range=(0.5, 25.0),
            caption_keywords=("density", "densities", "archimedes"),
            disqualify_tokens=("current density", "optical density", "packing density", "resistivity"),
            friends=(7, 11, 15, 18, 20, 21),
        ),
        PropertyRule(
            code=k["fracture_toughness"],
            canonical_phrases=("fracture toughness",),
            symbols=("kic", "k1c", "kc"),
            unit_surface=(
                ("mpa·m1/2", "MPa·m^0.5"),
                ("mpa m1/2", "MPa·m^0.5"),
                ("mpa·m^1/2", "MPa·m^0.5"),
                ("mpa·m^0.5", "MPa·m^0.5"),
                ("mpa m^0.5", "MPa·m^0.5"),
                ("mpa m0.5", "MPa·m^0.5"),
                ("mpa/sqrt(m)", "MPa·m^0.5"),
                ("mpa(m)1/2", "MPa·m^0.5"),
                ("mpa√m", "MPa·m^0.5"),
                ("mpa·√m", "MPa·m^0.5"),
                ("mn/m3/2", "MPa·m^0.5"),
            ),
            allowed_units=("MPa·m^0.5",),
            plausible_range=(0.05, 20.0),
            caption_keywords=("fracture toughness", "toughness", "indentation"),
            friends=(15, 18, 13),
        ),
        PropertyRule(
            code=k["hardness"],
            canonical_phrases=(
                "hardness",
                "microhardness",
                "micro-hardness",
                "vickers hardness",
                "knoop hardness",
            ),
            symbols=("hv", "hk", "hb", "h"),
            unit_surface=(
                ("hv", "HV"),
                ("vhn", "HV"),
                ("vickers", "HV"),
                ("kg/mm2", "HV"),
                ("kgf/mm2", "HV"),
                ("kg mm-2", "HV"),
                ("hk", "HK"),
                ("khn", "HK"),
                ("knoop", "HK"),
                ("hb", "HB"),
                ("bhn", "HB"),
                ("brinell", "HB"),
                ("hrb", "HRB"),
                ("hrc", "HRC"),
                ("hr", "HR"),
                ("mohs", "Mohs"),
                ("moh", "Mohs"),
                ("shore a", "ShA"),
                ("sha", "ShA"),
                ("shore d", "ShD"),
                ("shd", "ShD"),
                ("gpa", "GPa"),
                ("mpa", "MPa"),
            ),
            allowed_units=("HV", "HK", "HB", "HR", "HRB", "HRC", "Mohs", "ShA", "ShD", "GPa", "MPa"),
            plausible_range=(0.3, 10000.0),
            caption_keywords=("hardness", "indentation"),
            friends=(18, 14, 13),
            absence_ok=False,
        ),
        PropertyRule(
            code=k["poisson_ratio"],
            canonical_phrases=("poisson ratio", "poisson's ratio", "poissons ratio"),
            symbols=("nu", "v", "n", "mu"),
            plausible_range=(-1.0, 0.5),
            caption_keywords=("poisson",),
            friends=(18, 17, 12, 13),
            unitless=True,
        ),
        PropertyRule(
            code=k["shear_modulus"],
            canonical_phrases=("shear modulus", "rigidity modulus", "modulus of rigidity"),
            symbols=("g", "g0"),
            unit_surface=_MODULUS_SURFACE,
            allowed_units=_MODULUS_UNITS,
            plausible_range=(0.5, 1000.0),
            caption_keywords=("shear", "elastic", "modulus"),
            friends=(18, 12, 16, 13),
        ),
        PropertyRule(
            code=k["youngs_modulus"],
            canonical_phrases=(
                "young's modulus",
                "youngs modulus",
                "young modulus",
                "elastic modulus",
                "modulus of elasticity",
            ),
            symbols=("e", "e0", "y"),
            unit_surface=_MODULUS_SURFACE,
            allowed_units=_MODULUS_UNITS,
            plausible_range=(1.0, 1200.0),
            caption_keywords=("young", "elastic", "modulus", "stiffness"),
            friends=(15, 17, 16, 12, 14, 13),
        ),
        PropertyRule(
            code=k["abbe_value"],
            canonical_phrases=("abbe value", "abbe number"),
            symbols=("vd", "nud"),
            plausible_range=(10.0, 120.0),
            caption_keywords=("abbe", "dispersion", "optical"),
            friends=(20, 13),
            unitless=True,
        ),
        PropertyRule(
            code=k["refractive_index"],
            canonical_phrases=("refractive index", "index of refraction", "refraction index"),
            symbols=("n", "nd", "ne", "n0"),
            plausible_range=(1.0, 10.0),
            caption_keywords=("refractive", "refraction", "optical", "nm"),
            friends=(19, 13),
            unitless=True,
        ),
        PropertyRule(
            code=k["electrical_conductivity"],
            canonical_phrases=(
                "electrical conductivity",
                "ionic conductivity",
                "dc conductivity",
                "conductivity",
            ),
            symbols=("sigma", "sigmadc", "kappa"),
            unit_surface=(
                ("s/cm", "S/cm"),
                ("s cm-1", "S/cm"),
                ("s·cm-1", "S/cm"),
                ("scm-1", "S/cm"),
                ("mho/cm", "S/cm"),
                ("ohm-1 cm-1", "S/cm"),
                ("ohm-1cm-1", "S/cm"),
                ("ohm-1·cm-1", "S/cm"),
                ("(ohm cm)-1", "S/cm"),
                ("(ohm·cm)-1", "S/cm"),
                ("(ohm-cm)-1", "S/cm"),
                ("(o-cm)-1", "S/cm"),
                ("s/m", "S/m"),
                ("s m-1", "S/m"),
                ("ohm·cm", "ohm·cm"),
                ("ohm cm", "ohm·cm"),
                ("ohm-cm", "ohm·cm"),
            ),
            allowed_units=("S/cm", "S/m"),
            accepted_aliases=("ohm·cm",),
            plausible_range=(1e-20, 1e6),
            caption_keywords=("conductivity", "conduction", "impedance", "resistivity"),
            friends=(4, 13),
        ),
    )

    range_by_unit = (
        (4, "eV", 0.0, 20.0),
        (4, "kJ/mol", 0.0, 2000.0),
        (4, "kcal/mol", 0.0, 500.0),
        (5, "K", 250.0, 2500.0),
        (5, "degC", -50.0, 2000.0),
        (6, "K", 250.0, 2500.0),
        (6, "degC", -50.0, 2000.0),
        (7, "K", 250.0, 2500.0),
        (7, "degC", -50.0, 2000.0),
        (8, "K", 300.0, 3000.0),
        (8, "degC", 0.0, 2700.0),
        (9, "K", 200.0, 4000.0),
        (9, "degC", -100.0, 3700.0),
        (10, "K", 250.0, 2500.0),
        (10, "degC", -50.0, 2200.0),
        (11, "1/K", -1e-4, 1e-2),
        (12, "GPa", 0.0, 1500.0),
        (12, "MPa", 0.0, 1.5e6),
        (13, "g/cm3", 0.0, 30.0),
        (13, "kg/m3", 0.0, 30000.0),
        (14, "MPa·m^0.5", 0.0, 100.0),
        (15, "HV", 0.0, 10000.0),
        (15, "HK", 0.0, 10000.0),
        (15, "HB", 0.0, 10000.0),
        (15, "HR", 0.0, 150.0),
        (15, "HRB", 0.0, 150.0),
        (15, "HRC", 0.0, 100.0),
        (15, "Mohs", 0.0, 10.0),
        (15, "ShA", 0.0, 100.0),
        (15, "ShD", 0.0, 100.0),
        (15, "GPa", 0.0, 200.0),
        (15, "MPa", 0.0, 50000.0),
        (17, "GPa", 0.0, 1000.0),
        (17, "MPa", 0.0, 1e6),
        (18, "GPa", 0.0, 1500.0),
        (18, "MPa", 0.0, 1.5e6),
        (21, "S/cm", 0.0, 1e7),
        (21, "S/m", 0.0, 1e9),
    )
    range_default = (
        (4, 0.0, 2000.0),
        (5, -50.0, 2500.0),
        (6, -50.0, 2500.0),
        (7, -50.0, 2500.0),
        (8, 0.0, 3000.0),
        (9, -100.0, 4000.0),
        (10, -50.0, 2500.0),
        (11, -1e-4, 1e-2),
        (12, 0.0, 1.5e6),
        (13, 0.0, 25000.0),
        (14, 0.0, 100.0),
        (15, 0.0, 50000.0),
        (16, -1.0, 0.5),
        (17, 0.0, 1e6),
        (18, 0.0, 1.5e6),
        (19, 5.0, 150.0),
        (20, 1.0, 10.0),
        (21, 0.0, 1e9),
    )
    invalid_units = (
        (16, "GPa"),
        (16, "MPa"),
        (16, "K"),
        (16, "degC"),
        (16, "g/cm3"),
        (19, "GPa"),
        (19, "MPa"),
        (19, "K"),
        (19, "degC"),
        (19, "g/cm3"),
        (20, "GPa"),
        (20, "MPa"),
        (20, "K"),
        (20, "degC"),
        (20, "g/cm3"),
        (13, "K"),
        (13, "degC"),
        (18, "K"),
        (18, "degC"),
        (18, "eV"),
        (17, "K"),
        (17, "degC"),
    )
    median_windows = ((13, 0.0, 25000.0),)
    pattern_map = (
        (r"molar\s+volume", 0),
        (r"current\s+density", 0),
        (r"optical\s+density", 0),
        (r"packing\s+density", 0),
        (r"number\s+density", 0),
    )
    context_map = (
        ContextRule(code=0, heading_pattern=r"^tc$", caption_pattern="curie"),
        ContextRule(code=0, heading_pattern=r"^d$", units=("mm", "cm", "um", "nm")),
    )
    hardness_scale_keywords = (
        ("rockwell b", "HRB"),
        ("rockwell type b", "HRB"),
        ("hrb", "HRB"),
        ("rockwell c", "HRC"),
        ("rockwell type c", "HRC"),
        ("hrc", "HRC"),
        ("rockwell", "HR"),
        ("vicker", "HV"),
        ("vhn", "HV"),
        ("microhardness", "HV"),
        ("micro-hardness", "HV"),
        ("hv", "HV"),
        ("knoop", "HK"),
        ("khn", "HK"),
        ("brinell", "HB"),
        ("bhn", "HB"),
        ("mohs", "Mohs"),
        ("moh", "Mohs"),
        ("shore a", "ShA"),
        ("shore-a", "ShA"),
        ("shore d", "ShD"),
        ("shore-d", "ShD"),
    )
    # walked in order; first window containing the line median wins, so the
    # broad Vickers window precedes the nanoindentation one and both precede
    # the keyword-only scales
    hardness_scale_ranges = (
        ("HV", 5.0, 10000.0),
        ("GPa", 0.1, 5.0),
        ("MPa", 10000.0, 50000.0),
        ("HK", 5.0, 10000.0),
        ("HB", 5.0, 10000.0),
        ("HRB", 0.0, 150.0),
        ("HRC", 0.0, 100.0),
        ("HR", 0.0, 150.0),
        ("Mohs", 0.5, 10.0),
        ("ShA", 0.0, 100.0),
        ("ShD", 0.0, 100.0),
    )
    median_unit_defaults = (
        (13, 0.5, 30.0, "g/cm3"),
        (13, 500.0, 30000.0, "kg/m3"),
        (7, 290.0, 2500.0, "K"),
    )
    return PipelineConfig(
        properties=properties,
        range_by_unit=range_by_unit,
        range_default=range_default,
        invalid_units=invalid_units,
        median_windows=median_windows,
        pattern_map=pattern_map,
        context_map=context_map,
        value_fix_codes=(11, 21),
        global_bad_tokens=("error", "deviation", "reference", "ref."),
        hardness_scale_keywords=hardness_scale_keywords,
        hardness_scale_ranges=hardness_scale_ranges,
        median_unit_defaults=median_unit_defaults,
    )
