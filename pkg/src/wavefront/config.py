"""Flat ``key = value`` run configuration with dotted section names.

A file may use ``[section]`` headers, in which case the keys below a header
are prefixed with ``section.``; ``#`` starts a comment. Inline overrides
(``--set key=value``) take precedence over the file, which takes precedence
over the defaults below.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigParseError, ConfigValidationError
from .frontsolve import SolverConfig
from .model import G_FAMILIES, KERNEL_FAMILIES, KernelSpec, ModelSpec, NonlinearitySpec, RescaleMap, normalize

_NONE = "none"


def _float(s: str) -> float:
    return float(s)


def _int(s: str) -> int:
    v = float(s)
    if v != int(v):
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def _opt_float(s: str):
    return None if s.strip().lower() == _NONE else float(s)


def _choice(options):
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"{s!r} is not one of {', '.join(options)}")
        return s
    return parse


# key -> (parser, default, description)
SCHEMA = {
    "kernel.family": (_choice(KERNEL_FAMILIES), "dirac", "interaction kernel"),
    "kernel.sigma": (_float, 1.0, "gaussian standard deviation"),
    "kernel.mean": (_float, 0.0, "gaussian mean"),
    "kernel.a": (_float, 1.0, "uniform half-width"),
    "g.family": (_choice(G_FAMILIES), "nicholson", "birth function"),
    "g.p": (_float, 6.0, "birth rate"),
    "g.delta": (_float, 1.0, "linear decay rate (nicholson)"),
    "g.q": (_float, 8.0, "exponent (mackey_glass)"),
    "h": (_float, 0.2, "delay"),
    "c": (_float, 5.0, "wave speed"),
    "numerics.L": (_float, 40.0, "half-width of the profile grid"),
    "numerics.dt": (_float, 0.01, "grid spacing"),
    "numerics.tol_iter": (_float, 1e-10, "iteration stopping tolerance"),
    "numerics.max_iter": (_int, 5000, "iteration cap"),
    "numerics.eps_lower": (_opt_float, None, "lower barrier exponent (none: mu0/10)"),
    "map.h_min": (_float, 0.0, "domain map: first h"),
    "map.h_max": (_float, 1.0, "domain map: last h"),
    "map.h_step": (_float, 0.25, "domain map: h step"),
    "map.c_min": (_float, 3.0, "domain map: first c"),
    "map.c_max": (_float, 7.0, "domain map: last c"),
    "map.c_step": (_float, 0.5, "domain map: c step"),
    "fundsol.xi": (_opt_float, None, "gain of v (none: the reduction's xi)"),
    "fundsol.L": (_opt_float, None, "half-width of the v grid (none: automatic)"),
    "fundsol.method": (_choice(("auto", "closed_form_xi0", "local_steps", "fourier_subtraction")), "auto",
                       "construction method"),
}


def _fmt_value(v) -> str:
    if v is None:
        return _NONE
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    values: dict
    sources: dict = field(default_factory=dict)  # key -> "default" | "file" | "inline"
    out: Path = Path(".")

    def __getitem__(self, key: str):
        return self.values[key]

    def canonical(self) -> str:
        """Every resolved key, sorted; the text the hash is taken over."""
        return "".join(f"{k} = {_fmt_value(self.values[k])}\n" for k in sorted(self.values))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def raw_parts(self) -> tuple[KernelSpec, NonlinearitySpec]:
        v = self.values
        kernel = KernelSpec(v["kernel.family"], v["kernel.sigma"], v["kernel.mean"], v["kernel.a"])
        g = NonlinearitySpec(v["g.family"], v["g.p"], v["g.delta"], v["g.q"])
        return kernel, g

    def model(self) -> tuple[ModelSpec, RescaleMap]:
        kernel, g = self.raw_parts()
        return normalize(kernel, g, self.values["h"], self.values["c"])

    def solver(self) -> SolverConfig:
        v = self.values
        return SolverConfig(L=v["numerics.L"], dt=v["numerics.dt"], tol_iter=v["numerics.tol_iter"],
                            max_iter=v["numerics.max_iter"], eps_lower=v["numerics.eps_lower"])


def parse_text(text: str, origin: str = "<config>") -> list[tuple[int, str, str]]:
    """(line number, key, raw value) triples of a config file."""
    out = []
    section = ""
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigParseError(f"{origin}:{n}: empty section header", line=n)
            continue
        if "=" not in line:
            raise ConfigParseError(f"{origin}:{n}: expected key = value", line=n)
        key, value = (s.strip() for s in line.split("=", 1))
        if section:
            key = f"{section}.{key}"
        out.append((n, key, value))
    return out


def _split_override(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigParseError(f"--set expects KEY=VALUE, got {item!r}", key=item)
    k, v = item.split("=", 1)
    return k.strip(), v.strip()


def parse_config(path: str | Path | None = None, overrides=(), out: str | Path = ".") -> RunConfig:
    """Resolve defaults, then the file, then inline overrides.

    Unknown keys raise ConfigParseError naming the key; all invalid values
    are collected into a single ConfigValidationError.
    """
    entries = []
    if path is not None:
        text = Path(path).read_text()
        entries += [(f"{path}:{n}", k, v, "file") for n, k, v in parse_text(text, str(path))]
    for item in overrides:
        k, v = _split_override(item)
        entries.append(("--set", k, v, "inline"))
    values = {k: d for k, (_, d, _) in SCHEMA.items()}
    sources = {k: "default" for k in SCHEMA}
    problems = []
    for where, key, raw, src in entries:
        if key not in SCHEMA:
            line = int(where.rsplit(":", 1)[1]) if src == "file" else None
            raise ConfigParseError(f"{where}: unknown key {key!r}", line=line, key=key)
        try:
            values[key] = SCHEMA[key][0](raw)
            sources[key] = src
        except ValueError as e:
            problems.append(f"{where}: {key}: {e}")
    problems += _validate(values)
    if problems:
        raise ConfigValidationError(problems)
    return RunConfig(values=values, sources=sources, out=Path(out))


def _validate(v: dict) -> list[str]:
    bad = []

    def need(cond, msg):
        if not cond:
            bad.append(msg)

    def finite(key):
        x = v[key]
        return x is None or (isinstance(x, (int, float)) and math.isfinite(x))

    for key in SCHEMA:
        if not isinstance(v[key], str):
            need(finite(key), f"{key}: must be finite")
    need(v["kernel.sigma"] > 0, "kernel.sigma: must be positive")
    need(v["kernel.a"] > 0, "kernel.a: must be positive")
    need(v["g.p"] > 0, "g.p: must be positive")
    need(v["g.delta"] > 0, "g.delta: must be positive")
    need(v["g.q"] > 0, "g.q: must be positive")
    need(v["h"] >= 0, "h: must be nonnegative")
    need(v["numerics.L"] > 0, "numerics.L: must be positive")
    need(v["numerics.dt"] > 0, "numerics.dt: must be positive")
    need(0 < v["numerics.tol_iter"] < 1e-4, "numerics.tol_iter: must lie in (0, 1e-4)")
    need(v["numerics.max_iter"] > 0, "numerics.max_iter: must be positive")
    need(v["numerics.eps_lower"] is None or v["numerics.eps_lower"] > 0, "numerics.eps_lower: must be positive")
    need(v["map.h_step"] > 0, "map.h_step: must be positive")
    need(v["map.c_step"] > 0, "map.c_step: must be positive")
    need(v["map.h_min"] >= 0, "map.h_min: must be nonnegative")
    need(v["fundsol.xi"] is None or v["fundsol.xi"] >= 0, "fundsol.xi: must be nonnegative")
    need(v["fundsol.L"] is None or v["fundsol.L"] > 0, "fundsol.L: must be positive")
    return bad


def describe_defaults() -> str:
    return "".join(f"{k} = {_fmt_value(d)}    # {doc}\n" for k, (_, d, doc) in SCHEMA.items())
