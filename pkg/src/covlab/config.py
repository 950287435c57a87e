"""INI-style run configuration: measures, IFSs and radius sequences.

Sections are named ``[measure]``, ``[measure.nu]``, ``[ifs]``, ``[radii]``
and ``[run]``. Numbers accept fractions such as ``1/3``. The grammar is in
``docs/config.md``. Every error names the offending ``section.key``.
"""

from __future__ import annotations

import configparser
import math
from fractions import Fraction

from .cantor_bounds import BernoulliSpec, bernoulli_measure
from .conformal import SelfSimilarIFS, natural_measure
from .errors import CovlabError
from .measures import (
    AtomicMeasure,
    ExplicitRadii,
    PolynomialRadii,
    SelfSimilarMeasure,
    StepDensityMeasure,
)


class ConfigError(CovlabError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def parse_number(text: str, field: str) -> float:
    try:
        value = float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(field, f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(field, f"not finite: {text!r}")
    return value


def parse_numbers(text: str, field: str) -> list[float]:
    items = [t for t in text.replace(";", ",").split(",") if t.strip()]
    if not items:
        raise ConfigError(field, "empty list")
    return [parse_number(t, field) for t in items]


def parse_int(text: str, field: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(field, f"not an integer: {text!r}") from None


def parse_bool(text: str, field: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(field, f"not a boolean: {text!r}")


class Section:
    """Typed, field-named access to one section's string values."""

    def __init__(self, name: str, values: dict[str, str] | None = None):
        self.name = name
        self.values = dict(values or {})
        self._used: set[str] = set()

    def field(self, key: str) -> str:
        return f"{self.name}.{key}"

    def __contains__(self, key):
        return key in self.values

    def raw(self, key: str, default=None, required=False) -> str | None:
        if key not in self.values:
            if required:
                raise ConfigError(self.field(key), "missing required field")
            return default
        self._used.add(key)
        return self.values[key]

    def number(self, key, default=None, required=False):
        v = self.raw(key, required=required)
        return default if v is None else parse_number(v, self.field(key))

    def numbers(self, key, default=None, required=False):
        v = self.raw(key, required=required)
        return default if v is None else parse_numbers(v, self.field(key))

    def integer(self, key, default=None, required=False):
        v = self.raw(key, required=required)
        return default if v is None else parse_int(v, self.field(key))

    def boolean(self, key, default=False):
        v = self.raw(key)
        return default if v is None else parse_bool(v, self.field(key))

    def check_unused(self):
        extra = sorted(set(self.values) - self._used)
        if extra:
            raise ConfigError(self.field(extra[0]), "unknown field")


def load_config(path: str) -> dict[str, Section]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path!r}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError("--config", f"malformed file: {exc}") from None
    return {name: Section(name, dict(parser[name])) for name in parser.sections()}


def build_ifs(sec: Section) -> SelfSimilarIFS:
    if sec.raw("preset") is not None:
        preset = sec.values["preset"].strip()
        if preset != "cantor":
            raise ConfigError(sec.field("preset"), f"unknown preset {preset!r}")
        ifs = SelfSimilarIFS.cantor()
    else:
        ratios = sec.numbers("ratios", required=True)
        offsets = sec.numbers("offsets", required=True)
        if len(ratios) != len(offsets):
            raise ConfigError(sec.field("offsets"), "needs one offset per ratio")
        try:
            ifs = SelfSimilarIFS(ratios, offsets)
        except ValueError as exc:
            raise ConfigError(sec.field("ratios"), str(exc)) from None
    steps = sec.integer("steps", 1)
    if steps < 1:
        raise ConfigError(sec.field("steps"), "must be at least 1")
    return ifs.iterate(steps) if steps > 1 else ifs


KINDS = ("atomic", "lebesgue", "step", "natural", "bernoulli", "cantor")


def build_measure(sec: Section, sections: dict[str, Section] | None = None):
    kind = (sec.raw("kind", required=True) or "").strip()
    try:
        if kind == "atomic":
            pts = sec.numbers("points", required=True)
            w = sec.numbers("weights")
            return AtomicMeasure(pts, w)
        if kind == "lebesgue":
            return StepDensityMeasure.lebesgue(torus=sec.boolean("torus"))
        if kind == "step":
            return StepDensityMeasure(sec.numbers("breakpoints", required=True),
                                      sec.numbers("densities", required=True),
                                      torus=sec.boolean("torus"))
        if kind == "cantor":
            return natural_measure(SelfSimilarIFS.cantor())
        if kind in ("natural", "bernoulli"):
            ifs_name = sec.raw("ifs", "ifs")
            if sections is None or ifs_name not in sections:
                raise ConfigError(sec.field("ifs"), f"no section [{ifs_name}]")
            ifs = build_ifs(sections[ifs_name])
            if kind == "natural":
                return natural_measure(ifs)
            return SelfSimilarMeasure(ifs, sec.numbers("weights", required=True))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(sec.name, str(exc)) from None
    raise ConfigError(sec.field("kind"), f"expected one of {', '.join(KINDS)}, got {kind!r}")


def build_bernoulli(sec: Section) -> SelfSimilarMeasure:
    """Cantor n-step Bernoulli measure from ``preset = published`` or explicit ``weights``."""
    preset = sec.raw("preset")
    if preset is not None:
        if preset.strip() != "published":
            raise ConfigError(sec.field("preset"), f"unknown preset {preset!r}")
        return bernoulli_measure(BernoulliSpec.published())
    w = sec.numbers("weights", required=True)
    n = int(round(math.log2(len(w))))
    if 2 ** n != len(w):
        raise ConfigError(sec.field("weights"), "need 2**n block weights")
    try:
        return bernoulli_measure(BernoulliSpec(n, tuple(w)))
    except ValueError as exc:
        raise ConfigError(sec.field("weights"), str(exc)) from None


def build_radii(sec: Section):
    kind = (sec.raw("kind", "polynomial") or "").strip()
    try:
        if kind == "polynomial":
            return PolynomialRadii(sec.number("c", required=True), sec.number("t", required=True))
        if kind == "explicit":
            return ExplicitRadii(sec.numbers("values", required=True))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(sec.name, str(exc)) from None
    raise ConfigError(sec.field("kind"), f"expected polynomial or explicit, got {kind!r}")
