"""Line-based ``section.key = value`` configuration files.

Blank lines and ``#`` comments are ignored.  Every problem found in a file
is collected and reported together in one :class:`ConfigError`.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .catalog import FORCING_CATALOG, INITIAL_CATALOG
from .stepper import INTEGRATORS


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class GeometryConfig:
    container_radius: float = 1.0
    solids: tuple = ((0.0, 0.0, 0.4),)
    h: float = 0.15


@dataclass(frozen=True)
class MaterialConfig:
    nu: float = 0.01
    lam: float = 1.0
    mu: float = 1.0


@dataclass(frozen=True)
class NumericsConfig:
    dt: float = 0.005
    T: float = 0.05
    eps: float = 1e-4
    n: int | None = None
    tol: float = 1e-10
    max_iterations: int = 30
    integrator: str = "backward-euler"
    constitutive: str = "grad"
    deterministic: bool = True
    compat_tol_factor: float = 1e-6
    M: float | None = None
    max_halvings: int = 6


@dataclass(frozen=True)
class CatalogEntry:
    name: str = "zero"
    amplitude: float = 1.0


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "lagfsi-out"
    snapshots: bool = True
    iterates: str | None = None


@dataclass(frozen=True)
class SimulationConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    material: MaterialConfig = field(default_factory=MaterialConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    forcing: CatalogEntry = field(default_factory=CatalogEntry)
    initial: CatalogEntry = field(default_factory=CatalogEntry)
    output: OutputConfig = field(default_factory=OutputConfig)

    def canonical(self) -> str:
        """Stable text form of the physics-relevant settings (output paths excluded)."""
        d = asdict(self)
        d.pop("output")
        lines = []
        for sec in sorted(d):
            for k in sorted(d[sec]):
                lines.append(f"{sec}.{k}={d[sec][k]!r}")
        return "\n".join(lines)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


# key -> (section attribute, field, parser, required)
def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _opt_int(s):
    return None if s.lower() in ("none", "off", "") else int(s)


def _opt_float(s):
    return None if s.lower() in ("auto", "none", "") else float(s)


def _bool(s):
    v = s.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_str(s):
    return None if s.lower() in ("none", "") else s


def _solids(s):
    out = []
    for chunk in s.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [float(p) for p in chunk.replace(",", " ").split()]
        if len(parts) != 3:
            raise ValueError("each solid is 'x y r'")
        out.append(tuple(parts))
    return tuple(out)


KEYS = {
    "geometry.container_radius": ("geometry", "container_radius", _float, True),
    "geometry.solids": ("geometry", "solids", _solids, True),
    "geometry.h": ("geometry", "h", _float, False),
    "material.nu": ("material", "nu", _float, False),
    "material.lambda": ("material", "lam", _float, False),
    "material.mu": ("material", "mu", _float, False),
    "numerics.dt": ("numerics", "dt", _float, True),
    "numerics.T": ("numerics", "T", _float, True),
    "numerics.eps": ("numerics", "eps", _float, False),
    "numerics.n": ("numerics", "n", _opt_int, False),
    "numerics.tol": ("numerics", "tol", _float, False),
    "numerics.max_iterations": ("numerics", "max_iterations", _int, False),
    "numerics.integrator": ("numerics", "integrator", str, False),
    "numerics.constitutive": ("numerics", "constitutive", str, False),
    "numerics.deterministic": ("numerics", "deterministic", _bool, False),
    "numerics.compat_tol_factor": ("numerics", "compat_tol_factor", _float, False),
    "numerics.M": ("numerics", "M", _opt_float, False),
    "numerics.max_halvings": ("numerics", "max_halvings", _int, False),
    "forcing.name": ("forcing", "name", str, False),
    "forcing.amplitude": ("forcing", "amplitude", _float, False),
    "initial.name": ("initial", "name", str, False),
    "initial.amplitude": ("initial", "amplitude", _float, False),
    "output.dir": ("output", "dir", str, False),
    "output.snapshots": ("output", "snapshots", _bool, False),
    "output.iterates": ("output", "iterates", _opt_str, False),
}

_POSITIVE = (
    "geometry.container_radius",
    "geometry.h",
    "material.nu",
    "material.lambda",
    "material.mu",
    "numerics.dt",
    "numerics.T",
    "numerics.eps",
    "numerics.tol",
    "numerics.max_iterations",
    "numerics.compat_tol_factor",
)


def parse_config_text(text: str) -> SimulationConfig:
    problems = []
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'section.key = value'")
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            problems.append(f"unknown key {key}")
            continue
        if key in values:
            problems.append(f"duplicate key {key}")
            continue
        try:
            values[key] = KEYS[key][2](val)
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
    for key, (_, _, _, required) in KEYS.items():
        if required and key not in values and not any(p.startswith(key) for p in problems):
            problems.append(f"missing required key {key}")
    for key in _POSITIVE:
        if key in values and not values[key] > 0:
            problems.append(f"{key} must be positive (got {values[key]})")
    if "numerics.n" in values and values["numerics.n"] is not None and values["numerics.n"] < 1:
        problems.append("numerics.n must be a positive integer or none")
    if "numerics.M" in values and values["numerics.M"] is not None and not values["numerics.M"] > 0:
        problems.append("numerics.M must be positive or auto")
    dt = values.get("numerics.dt")
    T = values.get("numerics.T")
    if isinstance(dt, float) and isinstance(T, float) and dt > 0 and T > 0 and not dt < T:
        problems.append(f"numerics.dt must be smaller than numerics.T (dt={dt}, T={T})")
    if values.get("numerics.integrator", INTEGRATORS[0]) not in INTEGRATORS:
        problems.append(f"numerics.integrator must be one of {INTEGRATORS}")
    if values.get("numerics.constitutive", "grad") not in ("grad", "def"):
        problems.append("numerics.constitutive must be 'grad' or 'def'")
    if values.get("forcing.name", "zero") not in FORCING_CATALOG:
        problems.append(f"forcing.name must be one of {sorted(FORCING_CATALOG)}")
    if values.get("initial.name", "zero") not in INITIAL_CATALOG:
        problems.append(f"initial.name must be one of {sorted(INITIAL_CATALOG)}")
    for s in values.get("geometry.solids", ()):
        if not s[2] > 0:
            problems.append("geometry.solids radii must be positive")
    if problems:
        raise ConfigError(problems)

    sections = {"geometry": {}, "material": {}, "numerics": {}, "forcing": {}, "initial": {}, "output": {}}
    for key, val in values.items():
        sec, name = KEYS[key][:2]
        sections[sec][name] = val
    return SimulationConfig(
        geometry=GeometryConfig(**sections["geometry"]),
        material=MaterialConfig(**sections["material"]),
        numerics=NumericsConfig(**sections["numerics"]),
        forcing=CatalogEntry(**sections["forcing"]),
        initial=CatalogEntry(**sections["initial"]),
        output=OutputConfig(**sections["output"]),
    )


def parse_config(path) -> SimulationConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"config file not found: {p}"])
    return parse_config_text(p.read_text())


def format_config(cfg: SimulationConfig) -> str:
    """Inverse of :func:`parse_config_text` (round-trips every field)."""
    g, m, n = cfg.geometry, cfg.material, cfg.numerics
    solids = "; ".join(f"{x!r} {y!r} {r!r}" for x, y, r in g.solids)
    lines = [
        f"geometry.container_radius = {g.container_radius!r}",
        f"geometry.solids = {solids}",
        f"geometry.h = {g.h!r}",
        f"material.nu = {m.nu!r}",
        f"material.lambda = {m.lam!r}",
        f"material.mu = {m.mu!r}",
        f"numerics.dt = {n.dt!r}",
        f"numerics.T = {n.T!r}",
        f"numerics.eps = {n.eps!r}",
        f"numerics.n = {'none' if n.n is None else n.n}",
        f"numerics.tol = {n.tol!r}",
        f"numerics.max_iterations = {n.max_iterations}",
        f"numerics.integrator = {n.integrator}",
        f"numerics.constitutive = {n.constitutive}",
        f"numerics.deterministic = {str(n.deterministic).lower()}",
        f"numerics.compat_tol_factor = {n.compat_tol_factor!r}",
        f"numerics.M = {'auto' if n.M is None else repr(n.M)}",
        f"numerics.max_halvings = {n.max_halvings}",
        f"forcing.name = {cfg.forcing.name}",
        f"forcing.amplitude = {cfg.forcing.amplitude!r}",
        f"initial.name = {cfg.initial.name}",
        f"initial.amplitude = {cfg.initial.amplitude!r}",
        f"output.dir = {cfg.output.dir}",
        f"output.snapshots = {str(cfg.output.snapshots).lower()}",
        f"output.iterates = {cfg.output.iterates or 'none'}",
    ]
    return "\n".join(lines) + "\n"


def reference_config_path() -> Path:
    return Path(__file__).with_name("data") / "reference.cfg"


def load_reference() -> SimulationConfig:
    return parse_config(reference_config_path())
