"""Flat ``key = value`` run configuration.

One assignment per line, ``#`` starts a comment.  Unknown or repeated keys
are rejected.  ``extent`` accepts one value or a comma-separated list.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .grid import build_grid
from .potential import InfluenceSpec, PotentialSpec
from .study import StudyConfig

FIXTURE_PACKAGE = "peridyn_fd.fixtures"


@dataclass
class RunConfig:
    dim: int = 2
    extent: tuple = (1.0,)
    h: float = 0.025
    eps: float = 0.1
    gamma: float = 1.0
    pot_c: float = 1.0
    pot_beta: float = 1.0
    influence: str = "constant"
    theta: float = 0.0
    dt: float = 0.001
    T: float = 0.01
    tol_fp: float = 1e-10
    max_fp_iters: int = 100
    profile: str = "sine"
    amp_omega: float = 0.0
    levels: int = 4
    axis: str = "space"
    ref_factor: int = 4
    snapshot_every: int = 1

    def __post_init__(self):
        if isinstance(self.extent, (int, float)):
            self.extent = (float(self.extent),)
        self.extent = tuple(float(v) for v in self.extent)
        if len(self.extent) not in (1, self.dim):
            raise ConfigError(f"extent needs 1 or {self.dim} values")
        # construct the specs once so bad values fail before any output
        self.potential
        InfluenceSpec(self.influence)

    @property
    def extents(self) -> tuple:
        return self.extent * self.dim if len(self.extent) == 1 else self.extent

    @property
    def potential(self) -> PotentialSpec:
        return PotentialSpec(self.pot_c, self.pot_beta)

    @property
    def influence_spec(self) -> InfluenceSpec:
        return InfluenceSpec(self.influence)

    def grid(self):
        return build_grid(self.dim, self.extents, self.h, self.eps)

    def study(self, seed: int = 0, workers: int = 1) -> StudyConfig:
        if len(set(self.extents)) != 1:
            raise ConfigError("refinement studies run on cubes (equal extents)")
        return StudyConfig(
            d=self.dim, extent=self.extents[0], h=self.h, eps=self.eps, gamma=self.gamma,
            pot_c=self.pot_c, pot_beta=self.pot_beta, influence=self.influence, theta=self.theta,
            dt=self.dt, T=self.T, tol_fp=self.tol_fp, max_fp_iters=self.max_fp_iters,
            profile=self.profile, amp_omega=self.amp_omega, levels=self.levels, axis=self.axis,
            ref_factor=self.ref_factor, seed=seed, workers=workers)


KEYS = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {"dim", "max_fp_iters", "levels", "ref_factor", "snapshot_every"}
_STR_KEYS = {"influence", "profile", "axis"}


def _convert(key: str, raw: str, lineno: int):
    try:
        if key in _INT_KEYS:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        if key in _STR_KEYS:
            return raw.strip().strip("\"'")
        if key == "extent":
            return tuple(float(v) for v in raw.split(","))
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}") from None


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: key {key!r} given twice")
        values[key] = _convert(key, raw, lineno)
    return RunConfig(**values)


def fixture_names() -> list[str]:
    root = resources.files(FIXTURE_PACKAGE)
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_config(path_or_name: str) -> RunConfig:
    """Read a config file; a bare name falls back to the bundled fixtures."""
    p = Path(path_or_name)
    if p.is_file():
        return parse_config(p.read_text())
    res = resources.files(FIXTURE_PACKAGE) / f"{path_or_name}.cfg"
    if res.is_file():
        return parse_config(res.read_text())
    raise ConfigError(f"config {path_or_name!r} is neither a file nor a bundled fixture "
                      f"({', '.join(fixture_names())})")
