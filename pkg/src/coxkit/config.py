"""Experiment configuration files.

INI syntax read by :mod:`configparser`. Lists are comma separated. Sections:

``[run]``         seed (64-bit unsigned), replicates
``[prior]``       type = fixed | random-level | compound-poisson, horizon, and
                  fixed:            breakpoints, levels
                  random-level:     law + law fields
                  compound-poisson: x0, jump_rate, jump_law + jump_-prefixed law fields
                  laws: fixed (value), discrete (values, probs), exponential (mean),
                  uniform (low, high), gamma (shape, scale)
``[multiplier]``  type = constant (value) | inverse (scale) | table (breakpoints, levels)
``[simulate]``    sampler = timechange | sequential
``[densities]``   n, r, observed_count, grid
``[watanabe]``    r, t, events, stop_at, phi, phi_grid
``[girsanov]``    times, intervals (r:t pairs), induction (n:j pairs), induction_t, inner,
                  induction_replicates
``[filter]``      f, times, arrivals | observed_csv + observed_row, jump_times, alpha,
                  method = ks | laplace, oracle = true | false
``[battery]``     include (criterion names)

Every error names the offending section and key.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CoxkitError, ConfigError
from .girsanov import ConstantMultiplier, InverseMultiplier, TableMultiplier
from .intensity import (
    CompoundPoissonPrior,
    DiscreteLaw,
    ExponentialLaw,
    FixedPrior,
    GammaLaw,
    IntensityPath,
    PointMass,
    RandomLevelPrior,
    UniformLaw,
)

DEFAULT_REPLICATES = 100_000
_MISSING = object()


@dataclass
class ExperimentConfig:
    parser: configparser.ConfigParser
    source: str = "<string>"

    # -- raw accessors -----------------------------------------------------

    def has(self, section: str, key: str | None = None) -> bool:
        if key is None:
            return self.parser.has_section(section)
        return self.parser.has_option(section, key)

    def _raw(self, section: str, key: str, default=_MISSING) -> str:
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        if default is _MISSING:
            raise ConfigError(f"[{section}] {key}: missing")
        return default

    def text(self, section: str, key: str, default=_MISSING) -> str:
        return self._raw(section, key, default)

    def number(self, section: str, key: str, default=_MISSING) -> float:
        raw = self._raw(section, key, default)
        if not isinstance(raw, str):
            return raw
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None
        if not np.isfinite(value):
            raise ConfigError(f"[{section}] {key}: must be finite")
        return value

    def integer(self, section: str, key: str, default=_MISSING, minimum: int | None = None) -> int:
        raw = self._raw(section, key, default)
        if not isinstance(raw, str):
            return raw
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None
        if minimum is not None and value < minimum:
            raise ConfigError(f"[{section}] {key}: must be at least {minimum}")
        return value

    def numbers(self, section: str, key: str, default=_MISSING) -> list[float]:
        raw = self._raw(section, key, default)
        if not isinstance(raw, str):
            return list(raw)
        out = []
        for item in _split(raw):
            try:
                out.append(float(item))
            except ValueError:
                raise ConfigError(f"[{section}] {key}: {item!r} is not a number") from None
        return out

    def words(self, section: str, key: str, default=_MISSING) -> list[str]:
        raw = self._raw(section, key, default)
        return _split(raw) if isinstance(raw, str) else list(raw)

    def pairs(self, section: str, key: str, default=_MISSING, kind=float) -> list[tuple]:
        out = []
        for item in self.words(section, key, default):
            left, sep, right = item.partition(":")
            try:
                if not sep:
                    raise ValueError
                out.append((kind(left), kind(right)))
            except ValueError:
                raise ConfigError(f"[{section}] {key}: {item!r} is not an a:b pair") from None
        return out

    def flag(self, section: str, key: str, default: bool = False) -> bool:
        if not self.parser.has_option(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected true or false") from None

    # -- typed records -----------------------------------------------------

    def seed(self) -> int | None:
        if not self.has("run", "seed"):
            return None
        value = self.integer("run", "seed", minimum=0)
        if value >= 2**64:
            raise ConfigError("[run] seed: must fit in 64 bits")
        return value

    def replicates(self) -> int:
        return self.integer("run", "replicates", DEFAULT_REPLICATES, minimum=1)

    def prior(self):
        if not self.has("prior"):
            raise ConfigError("[prior]: section missing")
        kind = self.text("prior", "type")
        horizon = self.number("prior", "horizon")
        try:
            if kind == "fixed":
                levels = self.numbers("prior", "levels")
                breaks = self.numbers("prior", "breakpoints", [0.0] if len(levels) == 1 else _MISSING)
                return FixedPrior(IntensityPath(np.array(breaks), np.array(levels), horizon))
            if kind == "random-level":
                return RandomLevelPrior(self.law("prior", ""), horizon)
            if kind == "compound-poisson":
                return CompoundPoissonPrior(
                    self.number("prior", "x0"),
                    self.number("prior", "jump_rate"),
                    self.law("prior", "jump_"),
                    horizon,
                )
        except ConfigError as exc:
            if str(exc).startswith("["):
                raise
            raise ConfigError(f"[prior] {exc}") from None
        except CoxkitError as exc:
            raise ConfigError(f"[prior] {exc}") from None
        raise ConfigError(f"[prior] type: unknown prior type {kind!r}")

    def law(self, section: str, prefix: str):
        key = f"{prefix}law"
        name = self.text(section, key)
        if name == "fixed":
            return PointMass(self.number(section, f"{prefix}value"))
        if name == "discrete":
            values = self.numbers(section, f"{prefix}values")
            probs = self.numbers(section, f"{prefix}probs")
            if len(values) != len(probs):
                raise ConfigError(f"[{section}] {prefix}probs: needs one probability per value")
            return DiscreteLaw(tuple(values), tuple(probs))
        if name == "exponential":
            return ExponentialLaw(self.number(section, f"{prefix}mean"))
        if name == "uniform":
            return UniformLaw(self.number(section, f"{prefix}low"), self.number(section, f"{prefix}high"))
        if name == "gamma":
            return GammaLaw(self.number(section, f"{prefix}shape"), self.number(section, f"{prefix}scale"))
        raise ConfigError(f"[{section}] {key}: unknown law {name!r}")

    def multiplier(self):
        if not self.has("multiplier"):
            raise ConfigError("[multiplier]: section missing")
        kind = self.text("multiplier", "type")
        try:
            if kind == "constant":
                return ConstantMultiplier(self.number("multiplier", "value"))
            if kind == "inverse":
                return InverseMultiplier(self.number("multiplier", "scale", 1.0))
            if kind == "table":
                levels = self.numbers("multiplier", "levels")
                breaks = self.numbers("multiplier", "breakpoints", [0.0] if len(levels) == 1 else _MISSING)
                horizon = self.number("multiplier", "horizon", None)
                if horizon is None:
                    horizon = self.number("prior", "horizon")
                return TableMultiplier(IntensityPath(np.array(breaks), np.array(levels), horizon))
        except ConfigError as exc:
            if str(exc).startswith("["):
                raise
            raise ConfigError(f"[multiplier] {exc}") from None
        except CoxkitError as exc:
            raise ConfigError(f"[multiplier] {exc}") from None
        raise ConfigError(f"[multiplier] type: unknown multiplier {kind!r}")


def _split(raw: str) -> list[str]:
    return [item.strip() for item in raw.replace("\n", ",").split(",") if item.strip()]


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return ExperimentConfig(parser, source)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
