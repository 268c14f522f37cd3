"""Experiment configuration files (INI) and their validation."""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigurationError
from ..fields.profile import VarianceProfile
from ..lattice import GridSpec

__all__ = ["KINDS", "DEFAULTS", "ExperimentConfig", "load_config", "parse_profile", "profile_text"]

# kind -> default kind-specific parameters; every key a run may read is listed here
DEFAULTS: dict = {
    "covariance-check": {"probe_side": 4, "tolerance_se": 5.0},
    "tail": {"window": (0.0, 2.0), "mode": "survival"},
    "separation": {"radii": (2, 8), "c": 1.0},
    "localization": {"M": 8, "gamma": 0.4, "t": 2.0},
    "cluster": {"r": 6, "mode": "pinned-limit", "budget": 1_000_000},
    "invariance": {"t": 1.0, "r": 2, "drift": 0.5, "slack": 0.05, "nodes": 128},
    "three-field": {"K": 2, "L": 2, "Kp": 4, "Lp": 4},
    "coupling": {"K": 4, "L": 4, "Kp": 2, "Lp": 2, "gamma": 0.4, "beta_star": 0.3, "exponent": "single"},
    "slepian-sweep": {"max_dim": 3, "budget": 1 << 16},
}
KINDS = tuple(DEFAULTS)


def parse_profile(text: str, override: bool = False) -> VarianceProfile:
    """``homogeneous``, ``two-scale`` or ``two-scale:low,high,split``."""
    text = text.strip()
    if text == "homogeneous":
        return VarianceProfile.homogeneous()
    if text.startswith("two-scale"):
        _, _, rest = text.partition(":")
        vals = [float(v) for v in rest.split(",")] if rest else []
        if len(vals) not in (0, 2, 3):
            raise ConfigurationError(f"two-scale takes low,high[,split], got {rest!r}")
        return VarianceProfile.two_scale(*vals, override=override)
    raise ConfigurationError(f"unknown profile {text!r}")


def profile_text(profile: VarianceProfile) -> str:
    return json.dumps({"breakpoints": profile.breakpoints, "sigma2": profile.sigma2, "override": profile.override})


def _coerce(default, raw: str):
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"not a boolean: {raw!r}")
    if isinstance(default, tuple):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        kind = type(default[0]) if default else float
        return tuple(kind(s) for s in items)
    try:
        return type(default)(raw)
    except ValueError:
        raise ConfigurationError(f"cannot read {raw!r} as {type(default).__name__}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    spec: GridSpec
    profile: VarianceProfile
    replicas: int
    seed: int
    params: dict = field(default_factory=dict)
    output: Path = Path("out")
    block: int = 500
    workers: int = 1

    def __post_init__(self):
        if self.kind not in DEFAULTS:
            raise ConfigurationError(f"unknown experiment kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.replicas < 1:
            raise ConfigurationError(f"replicas must be >= 1, got {self.replicas}")
        if self.block < 1 or self.workers < 1:
            raise ConfigurationError("block and workers must be >= 1")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise ConfigurationError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged = dict(DEFAULTS[self.kind])
        merged.update(self.params)
        object.__setattr__(self, "params", merged)

    def canonical(self) -> dict:
        """Everything that affects results (the output directory and worker count do not)."""
        return {
            "kind": self.kind,
            "N": self.spec.N,
            "profile": json.loads(profile_text(self.profile)),
            "replicas": self.replicas,
            "seed": self.seed,
            "block": self.block,
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.params.items())},
        }

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read an INI experiment file.

    Sections: ``[experiment]`` (kind, replicas, seed, output, block,
    workers), ``[grid]`` (N), ``[profile]`` (shape, override) and one
    section named after the kind for its parameters.  ``overrides`` maps
    ``experiment`` keys to values that win over the file.
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str  # parameter names such as M and Kp are case-sensitive
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    exp.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    if "kind" not in exp:
        raise ConfigurationError("config lacks experiment.kind")
    kind = exp["kind"]
    if "seed" not in exp:
        raise ConfigurationError("no seed: set experiment.seed, pass --seed or set SIGFF_SEED")
    try:
        N = cp.getint("grid", "N", fallback=32)
        replicas = int(exp.get("replicas", 1))
        seed = int(exp["seed"])
        block = int(exp.get("block", 500))
        workers = int(exp.get("workers", 1))
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    override = cp.getboolean("profile", "override", fallback=False)
    profile = parse_profile(cp.get("profile", "shape", fallback="two-scale"), override)
    defaults = DEFAULTS.get(kind)
    if defaults is None:
        raise ConfigurationError(f"unknown experiment kind {kind!r}; choose from {', '.join(KINDS)}")
    params = {}
    if cp.has_section(kind):
        for key, raw in cp[kind].items():
            if key not in defaults:
                raise ConfigurationError(f"unknown parameter {key!r} for {kind}")
            params[key] = _coerce(defaults[key], raw)
    return ExperimentConfig(
        kind, GridSpec(N), profile, replicas, seed, params, Path(exp.get("output", "out")), block, workers
    )
