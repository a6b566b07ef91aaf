"""INI experiment configuration with strict key checking.

Every section and key must be known; a typo is a hard error that names the
line it came from.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..grid import Boundary, GridError, StaggeredGrid3, make_grid
from ..msrk import TABLEAUS, StageSolveConfig
from ..pml import PmlConfig, PmlError


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(key)
        super().__init__(f"{': '.join([', '.join(where), message]) if where else message}")
        self.line = line
        self.key = key


@dataclass
class GridSection:
    nx: int = 8
    ny: int = 8
    nz: int = 8
    dx: float = 1.0
    dy: float = 1.0
    dz: float = 1.0
    cfl: float = 0.9
    boundary: str = "periodic"
    pec_axes: str = "z"


@dataclass
class SolverSection:
    scheme: str = "yee"            # yee | split | msrk
    tableau: str = "midpoint"
    tolerance: float = 1e-13
    max_iterations: int = 200


@dataclass
class PmlSection:
    sigma: float = 0.0
    sigma_star: float = -1.0       # negative: same as sigma
    axes: str = "z"
    thickness: int = 0             # 0: sigma applies on the whole grid


@dataclass
class IcSection:
    kind: str = "random"           # random | plane_wave | gaussian_pulse | zero
    amplitude: float = 1.0
    center: float = -1.0           # pulse centre along z; negative: domain middle
    width: float = 4.0


@dataclass
class OutputSection:
    trace: bool = True
    snapshot_every: int = 0        # 0: final snapshot only


@dataclass
class RunSection:
    steps: int = 50
    seed: int = 0


@dataclass
class VerifySection:
    sigmas: str = "0, 0.5, 2"
    steps: int = 50
    msrk_steps: int = 20
    msrk_cfl: float = 0.5


@dataclass
class ConvergenceSection:
    sizes: str = "8, 16, 32"
    final_time: float = 1.0


@dataclass
class AbsorptionSection:
    thicknesses: str = "2, 4, 8, 16"
    interior: int = 128
    sigma: float = 0.2
    width: float = 4.0


SECTIONS = {
    "grid": GridSection,
    "solver": SolverSection,
    "pml": PmlSection,
    "ic": IcSection,
    "output": OutputSection,
    "run": RunSection,
    "verify": VerifySection,
    "convergence": ConvergenceSection,
    "absorption": AbsorptionSection,
}


@dataclass
class ExperimentConfig:
    grid: GridSection = field(default_factory=GridSection)
    solver: SolverSection = field(default_factory=SolverSection)
    pml: PmlSection = field(default_factory=PmlSection)
    ic: IcSection = field(default_factory=IcSection)
    output: OutputSection = field(default_factory=OutputSection)
    run: RunSection = field(default_factory=RunSection)
    verify: VerifySection = field(default_factory=VerifySection)
    convergence: ConvergenceSection = field(default_factory=ConvergenceSection)
    absorption: AbsorptionSection = field(default_factory=AbsorptionSection)

    # --- derived objects -------------------------------------------------

    def make_grid(self, cfl: float | None = None) -> StaggeredGrid3:
        g = self.grid
        try:
            return make_grid(g.nx, g.ny, g.nz, g.dx, g.dy, g.dz,
                             self.grid.cfl if cfl is None else cfl,
                             boundary=Boundary(g.boundary), pec_axes=parse_axes(g.pec_axes))
        except (GridError, ValueError) as exc:
            raise ConfigError(str(exc), key="grid") from exc

    def pml_config(self) -> PmlConfig:
        p = self.pml
        try:
            return PmlConfig(sigma=p.sigma, sigma_star=None if p.sigma_star < 0 else p.sigma_star,
                             axes=parse_axes(p.axes), thickness=p.thickness or None)
        except PmlError as exc:
            raise ConfigError(str(exc), key="pml") from exc

    def stage_config(self) -> StageSolveConfig:
        return StageSolveConfig(self.solver.tolerance, self.solver.max_iterations)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_axes(text: str) -> tuple[str, ...]:
    axes = tuple(a for a in text.replace(",", " ").split() if a)
    bad = [a for a in axes if a not in ("x", "y", "z")]
    if bad:
        raise ConfigError(f"unknown axes {bad}")
    return axes


def parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def parse_ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            out[(section, "")] = i
        elif section is not None:
            for sep in ("=", ":"):
                if sep in line:
                    out[(section, line.split(sep, 1)[0].strip().lower())] = i
                    break
    return out


def _convert(kind, raw: str):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return kind(raw.strip())


def _validate(cfg: ExperimentConfig) -> None:
    g = cfg.grid
    for name in ("nx", "ny", "nz"):
        if getattr(g, name) < 2:
            raise ConfigError(f"{name} must be >= 2", key=f"grid.{name}")
    for name in ("dx", "dy", "dz"):
        v = getattr(g, name)
        if not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"{name} must be positive", key=f"grid.{name}")
    if not 0.0 < g.cfl <= 1.0:
        raise ConfigError("cfl_fraction out of range (0, 1]", key="grid.cfl")
    try:
        Boundary(g.boundary)
    except ValueError:
        raise ConfigError(f"unknown boundary {g.boundary!r}", key="grid.boundary") from None
    if cfg.solver.scheme not in ("yee", "split", "msrk"):
        raise ConfigError(f"unknown scheme {cfg.solver.scheme!r}", key="solver.scheme")
    if cfg.solver.tableau not in TABLEAUS:
        raise ConfigError(f"unknown tableau {cfg.solver.tableau!r}", key="solver.tableau")
    if cfg.ic.kind not in ("random", "plane_wave", "gaussian_pulse", "zero"):
        raise ConfigError(f"unknown initial condition {cfg.ic.kind!r}", key="ic.kind")
    if cfg.run.steps < 0:
        raise ConfigError("steps must be >= 0", key="run.steps")
    cfg.pml_config()


def load_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse INI text into an :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "), line=getattr(exc, "lineno", None)) from exc
    lines = _line_numbers(text)
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", line=lines.get((section, "")))
        target = getattr(cfg, section)
        types = {f.name: f.type for f in dataclasses.fields(target)}
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            if key not in types:
                raise ConfigError("unknown key", line=line, key=f"{section}.{key}")
            kind = {"int": int, "float": float, "str": str, "bool": bool}[types[key]]
            try:
                setattr(target, key, _convert(kind, raw))
            except ValueError as exc:
                raise ConfigError(f"bad value {raw!r}: {exc}", line=line, key=f"{section}.{key}") from None
    try:
        _validate(cfg)
    except ConfigError as exc:
        if exc.line is None and exc.key and "." in exc.key:
            section, key = exc.key.split(".", 1)
            line = lines.get((section, key))
            if line is not None:
                raise ConfigError(str(exc).split(": ", 1)[1], line=line, key=exc.key) from None
        raise
    return cfg


def read_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from exc
    return load_config(text, source=str(p))
