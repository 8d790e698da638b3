"""JSON problem configurations shared by the CLI and the experiment harness."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property

from .errors import InvalidSpecError
from .geometry import DensityProfile, GeometricBundle, ManifoldProfile
from .solver import SolverConfig

_SOLVER_KEYS = {f.name for f in fields(SolverConfig)} - {"p", "m"}


@dataclass
class ProblemSpec:
    """Manifold, density, equation exponents and run options.

    ``solver`` overrides SolverConfig fields, ``experiment`` holds run options
    (R0, mass, t_end, masses, ...) and ``inequalities`` the test-family options.
    """

    N: int = 3
    p: float = 2.0
    m: float = 2.0
    beta: float = 1.0
    nu: float = 0.0
    A: float = math.e
    alpha: float = 0.0
    mu: float = 0.0
    B: float = math.e
    alpha1: float | None = None
    alpha2: float | None = None
    r_max: float = 1e6
    nodes: int = 2048
    solver: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)
    inequalities: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.alpha1 is None) != (self.alpha2 is None):
            raise InvalidSpecError("alpha1 and alpha2 must be given together")
        bad = set(self.solver) - _SOLVER_KEYS
        if bad:
            raise InvalidSpecError(f"unknown solver keys: {sorted(bad)}")

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidSpecError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ProblemSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def replace(self, **kw) -> "ProblemSpec":
        d = self.to_dict()
        for key in ("solver", "experiment", "inequalities"):
            if key in kw:
                d[key] = {**d[key], **kw.pop(key)}
        d.update(kw)
        return ProblemSpec.from_dict(d)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    @property
    def window(self):
        if self.alpha1 is None:
            return None
        return (float(self.alpha1), float(self.alpha2))

    def manifold(self) -> ManifoldProfile:
        return ManifoldProfile.power_log(self.N, self.beta, self.nu, self.A)

    def density(self) -> DensityProfile:
        return DensityProfile.power_log(self.alpha, self.mu, self.B, window=self.window)

    @cached_property
    def bundle(self) -> GeometricBundle:
        return GeometricBundle(self.manifold(), self.density(), r_max=self.r_max,
                               nodes=self.nodes)

    def solver_config(self, **over) -> SolverConfig:
        opts = {**self.solver, **over}
        return SolverConfig(p=self.p, m=self.m, **opts)

    def option(self, key, default):
        return self.experiment.get(key, default)


def load(path_or_dict) -> ProblemSpec:
    if isinstance(path_or_dict, ProblemSpec):
        return path_or_dict
    if isinstance(path_or_dict, dict):
        return ProblemSpec.from_dict(path_or_dict)
    return ProblemSpec.from_json(path_or_dict)
