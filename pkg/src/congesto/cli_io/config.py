"""Flat key=value run configuration, manifests, and worker-count policy.

The config format is one ``key = value`` per line with ``#`` comments.  The
parameter space is small and flat, so line-precise errors are worth more than
nesting: unknown keys, duplicates, and constraint violations are all reported
with line numbers or the violated constraint's name.

A manifest is the JSON image of a fully resolved config plus the package
version; rerunning from a manifest reproduces the original run bit-for-bit on
the same platform.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields as dataclass_fields

import numpy as np

from .. import __version__
from ..constitutive import ConstitutiveParams
from ..diagnostics import FlowParams
from ..errors import CongestoError, ConfigError
from ..fields import PeriodicGrid2D, ScalarField
from ..solver import SCENARIO_NAMES, Scenario, build_scenario

MANIFEST_FORMAT = "congesto-manifest"
MANIFEST_VERSION = 1

__all__ = [
    "RunConfig",
    "config_from_dict",
    "config_to_dict",
    "load_manifest",
    "load_run_input",
    "parse_config",
    "scenario_from_config",
    "scenario_kwargs",
    "serialize_config",
    "worker_count",
    "write_manifest",
]


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved description of one simulation run."""

    scenario: str
    eps: float
    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0
    delta: float = 0.0
    a: float = 2.0
    gamma: float = 1.0
    phi_star: float = 0.64
    kappa: float = 0.5
    theta: float = 0.0
    r: float = 1.0
    t_end: float | None = None
    snapshots: int = 10
    out_dir: str = "."
    seed: int | None = None
    velocity_scale: float | None = None
    peak_fraction: float | None = None
    plateau_sharpness: float | None = None
    solenoidal_start: bool = False
    pi0: float | None = None

    def cons(self) -> ConstitutiveParams:
        return ConstitutiveParams(
            eps=self.eps,
            a=self.a,
            gamma=self.gamma,
            phi_star=self.phi_star,
            delta=self.delta,
        )

    def flow(self) -> FlowParams:
        return FlowParams(cons=self.cons(), r=self.r, theta=self.theta, kappa=self.kappa)

    def grid(self) -> PeriodicGrid2D:
        return PeriodicGrid2D(self.nx, self.ny, self.lx, self.ly)


_STR_KEYS = {"scenario", "out_dir"}
_INT_KEYS = {"nx", "ny", "snapshots", "seed"}
_BOOL_KEYS = {"solenoidal_start"}
_FLOAT_KEYS = {
    "lx", "ly", "eps", "delta", "a", "gamma", "phi_star", "kappa", "theta",
    "r", "t_end", "velocity_scale", "peak_fraction", "plateau_sharpness", "pi0",
}
_ALL_KEYS = _STR_KEYS | _INT_KEYS | _BOOL_KEYS | _FLOAT_KEYS
_MANDATORY_KEYS = ("scenario", "eps")
# serialize_config emits keys in declaration order so round trips are stable
_KEY_ORDER = tuple(f.name for f in dataclass_fields(RunConfig))


def _convert(key: str, raw: str, lineno: int):
    try:
        if key in _STR_KEYS:
            return raw
        if key in _INT_KEYS:
            return int(raw)
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(raw)
            return low == "true"
        return float(raw)
    except ValueError:
        kind = "integer" if key in _INT_KEYS else (
            "true/false" if key in _BOOL_KEYS else "number"
        )
        raise ConfigError(
            f"line {lineno}: value {raw!r} for key {key!r} is not a valid {kind}"
        ) from None


def _validate(cfg: RunConfig) -> RunConfig:
    """Run every cross-field invariant, naming the violated constraint."""
    if cfg.scenario not in SCENARIO_NAMES:
        raise ConfigError(
            f"unknown scenario {cfg.scenario!r}; valid names: {', '.join(SCENARIO_NAMES)}"
        )
    try:
        cfg.flow()   # validates ConstitutiveParams (eps, a, gamma, phi_star, delta) too
        cfg.grid()
    except CongestoError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.t_end is not None and cfg.t_end <= 0.0:
        raise ConfigError(f"constraint t_end > 0 violated: t_end = {cfg.t_end}")
    if cfg.snapshots < 2:
        raise ConfigError(f"constraint snapshots >= 2 violated: snapshots = {cfg.snapshots}")
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key = value`` text into a validated RunConfig."""
    values: dict[str, object] = {}
    first_line: dict[str, int] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if not sep or not key or not raw_value:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in first_line:
            raise ConfigError(
                f"duplicate key {key!r} on lines {first_line[key]} and {lineno}"
            )
        first_line[key] = lineno
        values[key] = _convert(key, raw_value, lineno)
    for key in _MANDATORY_KEYS:
        if key not in values:
            raise ConfigError(f"missing mandatory key {key!r}")
    return _validate(RunConfig(**values))


def serialize_config(cfg: RunConfig) -> str:
    """Emit the config as key = value text; parse(serialize(cfg)) == cfg."""
    lines = []
    for key in _KEY_ORDER:
        value = getattr(cfg, key)
        if value is None:
            continue
        if key in _BOOL_KEYS:
            text = "true" if value else "false"
        elif key in _FLOAT_KEYS:
            text = "%.17g" % value
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def config_to_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)


def config_from_dict(data: dict) -> RunConfig:
    unknown = set(data) - _ALL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    coerced: dict[str, object] = {}
    for key, value in data.items():
        if value is None:
            continue
        if key in _FLOAT_KEYS:
            value = float(value)
        elif key in _INT_KEYS:
            value = int(value)
        elif key in _BOOL_KEYS and not isinstance(value, bool):
            raise ConfigError(f"key {key!r} must be a boolean, got {value!r}")
        coerced[key] = value
    for key in _MANDATORY_KEYS:
        if key not in coerced:
            raise ConfigError(f"missing mandatory key {key!r}")
    return _validate(RunConfig(**coerced))


def scenario_kwargs(cfg: RunConfig, grid: PeriodicGrid2D) -> dict:
    """Keyword arguments the config contributes to scenario assembly."""
    pi0_field = None
    if cfg.pi0 is not None:
        pi0_field = ScalarField(grid, np.full((grid.nx, grid.ny), cfg.pi0))
    return dict(
        t_end=cfg.t_end,
        seed=cfg.seed,
        snapshots=cfg.snapshots,
        velocity_scale=cfg.velocity_scale,
        peak_fraction=cfg.peak_fraction,
        plateau_sharpness=cfg.plateau_sharpness,
        solenoidal_start=cfg.solenoidal_start,
        pi0=pi0_field,
    )


def scenario_from_config(cfg: RunConfig) -> Scenario:
    """Assemble the scenario a config describes (knob checks live downstream)."""
    grid = cfg.grid()
    return build_scenario(cfg.scenario, grid, cfg.flow(), **scenario_kwargs(cfg, grid))


def write_manifest(path, cfg: RunConfig, *, command: str, extra: dict | None = None) -> None:
    """Record the exact resolved config and code version next to run outputs."""
    manifest = {
        "format": MANIFEST_FORMAT,
        "manifest_version": MANIFEST_VERSION,
        "package_version": __version__,
        "command": command,
        "config": config_to_dict(cfg),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> tuple[RunConfig, dict]:
    with open(path, encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid manifest JSON: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("format") != MANIFEST_FORMAT:
        raise ConfigError(f"{path}: not a {MANIFEST_FORMAT} file")
    if manifest.get("manifest_version", 0) > MANIFEST_VERSION:
        raise ConfigError(
            f"{path}: manifest version {manifest.get('manifest_version')} "
            f"is newer than supported version {MANIFEST_VERSION}"
        )
    return config_from_dict(manifest.get("config", {})), manifest


def load_run_input(path) -> RunConfig:
    """Load either a key=value config or a manifest.json (sniffed by leading '{')."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        cfg, _ = load_manifest(path)
        return cfg
    return parse_config(text)


def worker_count() -> int:
    """Worker cap for sweeps: CONGESTO_THREADS if set, else the CPU count."""
    raw = os.environ.get("CONGESTO_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(
            f"CONGESTO_THREADS must be a positive integer, got {raw!r}"
        ) from None
    if n < 1:
        raise ConfigError(f"CONGESTO_THREADS must be a positive integer, got {raw!r}")
    return n
