"""Plain-text ``key=value`` configs and the registry of named objects.

Grammar: one ``key = value`` per line, ``#`` starts a comment, keys are
case-sensitive, repeated keys are an error. Lists are comma separated.

Names resolved here:

``family``  arctanMS | linear | rational32 | power:P | root:P | constructed
            (constructed reads ``phi``, ``psi``, ``scale``, ``inner_grid``)
``phi``     power:P[:COEF] | tabulated:K:V,K:V,...
``psi``     power:Q[:COEF] | constant:C | linear:S | tabulated:K:V,...
``kernel``  indicator:R0 | exponential | gaussian  (with ``kernel_weight``, ``n``)
``signal``  heaviside:H | ramp:A | csv:PATH | sbv:PATH
``field``   disk:H | halfplane:H | affine:A | zero | pgm:PATH | csv:PATH
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy1d import Signal1D
from .energynd import Field2D
from .errors import DomainError, UnsupportedError
from .families import PhiEpsFamily, PhiSpec, PsiSpec
from .kernels import Kernel
from .limit import (PiecewiseField2D, Sbv1D, affine_field, disk_field, halfplane_field,
                    zero_field)


class ConfigError(ValueError):
    """Malformed config or unresolved name; the message names the key."""


FAMILIES = ("arctanMS", "constructed", "linear", "power", "rational32", "root")
KERNELS = ("exponential", "gaussian", "indicator")
SIGNALS = ("csv", "heaviside", "ramp", "sbv")
FIELDS = ("affine", "csv", "disk", "halfplane", "pgm", "zero")
EXPERIMENTS = ("compactness", "constants", "denoise", "envelope", "probe", "sweep1d",
               "sweepnd", "theta")


def parse_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        if key in out:
            raise ConfigError(f"line {n}: key '{key}' repeated")
        out[key] = val
    return out


def load(path: str) -> "Config":
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return Config(parse_text(text))


@dataclass
class Config:
    """Key/value store with typed accessors that name the offending key."""

    values: dict[str, str]
    effective: dict = field(default_factory=dict)

    def raw(self, key: str, default: str | None = None) -> str:
        if key in self.values:
            val = self.values[key]
        elif default is None:
            raise ConfigError(f"missing required key '{key}'")
        else:
            val = default
        self.effective[key] = val
        return val

    def has(self, key: str) -> bool:
        return key in self.values

    def str(self, key: str, default: str | None = None) -> str:
        return self.raw(key, default)

    def float(self, key: str, default: float | None = None) -> float:
        v = self.raw(key, None if default is None else repr(default))
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"key '{key}': {v!r} is not a number") from None

    def int(self, key: str, default: int | None = None) -> int:
        v = self.raw(key, None if default is None else str(default))
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"key '{key}': {v!r} is not an integer") from None

    def floats(self, key: str, default: str | None = None) -> list[float]:
        v = self.raw(key, default)
        try:
            return [float(x) for x in v.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"key '{key}': {v!r} is not a list of numbers") from None

    def eps_list(self, key: str = "eps", default: str | None = None) -> list[float]:
        eps = self.floats(key, default)
        if not eps or any(e <= 0 for e in eps):
            raise ConfigError(f"key '{key}': values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError(f"key '{key}': values must be strictly decreasing")
        return eps

    def resolved(self) -> dict[str, str]:
        """Given keys plus every default that was consulted."""
        return dict(sorted({**self.values, **self.effective}.items()))


def _split(spec: str) -> tuple[str, list[str]]:
    head, *rest = spec.split(":", 1)
    return head.strip(), rest[0].split(":") if rest else []


def _num(key: str, s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"key '{key}': {s!r} is not a number") from None


def _table(key: str, body: str) -> tuple[list[float], list[float]]:
    ks, vs = [], []
    for pair in body.split(","):
        try:
            a, b = pair.split(":")
        except ValueError:
            raise ConfigError(f"key '{key}': table entries must be knot:value") from None
        ks.append(_num(key, a))
        vs.append(_num(key, b))
    return ks, vs


def parse_phi(spec: str, key: str = "phi") -> PhiSpec:
    name, args = _split(spec)
    try:
        if name == "power" and 1 <= len(args) <= 2:
            return PhiSpec.power(*(_num(key, a) for a in args))
        if name == "tabulated":
            return PhiSpec.tabulated(*_table(key, spec.split(":", 1)[1]))
    except (DomainError, UnsupportedError) as exc:
        raise ConfigError(f"key '{key}': {exc}") from None
    raise ConfigError(f"key '{key}': unknown bulk integrand {spec!r}")


def parse_psi(spec: str, key: str = "psi") -> PsiSpec:
    name, args = _split(spec)
    try:
        if name == "power" and 1 <= len(args) <= 2:
            return PsiSpec.power(*(_num(key, a) for a in args))
        if name in ("constant", "linear") and len(args) == 1:
            return getattr(PsiSpec, name)(_num(key, args[0]))
        if name == "tabulated":
            return PsiSpec.tabulated(*_table(key, spec.split(":", 1)[1]))
    except (DomainError, UnsupportedError) as exc:
        raise ConfigError(f"key '{key}': {exc}") from None
    raise ConfigError(f"key '{key}': unknown jump integrand {spec!r}")


def family_from(cfg: Config) -> PhiEpsFamily:
    spec = cfg.str("family")
    name, args = _split(spec)
    try:
        if name in ("arctanMS", "linear", "rational32") and not args:
            return PhiEpsFamily(name)
        if name in ("power", "root") and len(args) == 1:
            return PhiEpsFamily(name, p=_num("family", args[0]))
        if name == "constructed" and not args:
            return PhiEpsFamily.constructed(parse_phi(cfg.str("phi")), parse_psi(cfg.str("psi")),
                                            cfg.float("scale", 1.0), cfg.int("inner_grid", 4096))
    except (DomainError, UnsupportedError) as exc:
        raise ConfigError(f"key 'family': {exc}") from None
    raise ConfigError(f"key 'family': unknown family {spec!r} (known: {', '.join(FAMILIES)})")


def kernel_from(cfg: Config, n: int) -> Kernel:
    spec = cfg.str("kernel", "indicator:1.0")
    name, args = _split(spec)
    w = cfg.float("kernel_weight", 0.0)
    try:
        if name == "indicator" and len(args) <= 1:
            return Kernel.indicator(_num("kernel", args[0]) if args else 1.0, w, n)
        if name in ("exponential", "gaussian") and not args:
            return getattr(Kernel, name)(w, n)
    except (DomainError, UnsupportedError) as exc:
        raise ConfigError(f"key 'kernel': {exc}") from None
    raise ConfigError(f"key 'kernel': unknown kernel {spec!r} (known: {', '.join(KERNELS)})")


def signal_from(cfg: Config):
    spec = cfg.str("signal")
    name, args = _split(spec)
    try:
        if name == "heaviside" and len(args) <= 1:
            h = _num("signal", args[0]) if args else 1.0
            return Sbv1D.build((-1.0, 1.0), (0.0,), {0.0: h})
        if name == "ramp" and len(args) <= 1:
            a = _num("signal", args[0]) if args else 1.0
            return Sbv1D.build((0.0, 1.0), (a,))
        if name == "csv" and args:
            return Signal1D.load_csv(spec.split(":", 1)[1])
        if name == "sbv" and args:
            with open(spec.split(":", 1)[1]) as fh:
                return Sbv1D.from_text(fh.read())
    except (DomainError, UnsupportedError, OSError) as exc:
        raise ConfigError(f"key 'signal': {exc}") from None
    raise ConfigError(f"key 'signal': unknown signal {spec!r} (known: {', '.join(SIGNALS)})")


def field_from(cfg: Config):
    """Returns ``(Field2D, descriptor or None)``; analytic fields are sampled on ``grid`` nodes."""
    spec = cfg.str("field")
    name, args = _split(spec)
    grid = cfg.int("grid", 256)
    try:
        desc: PiecewiseField2D | None = None
        if name == "disk" and len(args) <= 1:
            desc = disk_field(height=_num("field", args[0]) if args else 1.0)
        elif name == "halfplane" and len(args) <= 1:
            desc = halfplane_field(_num("field", args[0]) if args else 1.0)
        elif name == "affine" and len(args) <= 1:
            desc = affine_field(_num("field", args[0]) if args else 1.0)
        elif name == "zero" and not args:
            desc = zero_field()
        elif name == "pgm" and args:
            return Field2D.load_pgm(spec.split(":", 1)[1]), None
        elif name == "csv" and args:
            return Field2D.load_csv(spec.split(":", 1)[1]), None
        else:
            raise ConfigError(f"key 'field': unknown field {spec!r} (known: {', '.join(FIELDS)})")
        return Field2D.from_function(desc.value, desc.rect, (grid, grid)), desc
    except (DomainError, UnsupportedError, OSError) as exc:
        raise ConfigError(f"key 'field': {exc}") from None


def registry_listing() -> str:
    sections = {
        "experiments": EXPERIMENTS,
        "families": FAMILIES,
        "fields": FIELDS,
        "kernels": KERNELS,
        "signals": SIGNALS,
    }
    lines = []
    for name in sorted(sections):
        lines.append(f"{name}:")
        lines += [f"  {item}" for item in sorted(sections[name])]
    return "\n".join(lines) + "\n"
