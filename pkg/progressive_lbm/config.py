"""Scenario configuration.

Scenarios are TOML files with the tables [scenario], [devices],
[[components]] (each with a nested [components.eos]), [coupling] and
[[seeds]]. Unknown keys are rejected. A few settings can be overridden
from the environment (optionally through a .env file):

    LBM_OUTPUT_DIR  output directory
    LBM_WORKERS     worker threads
"""

from __future__ import annotations

import logging
import math
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from progressive_lbm.errors import ConfigValidationError
from progressive_lbm.formats.geometry import GeometryMask, load_geometry
from progressive_lbm.lattice import CS2, Stencil, StencilKind, make_stencil
from progressive_lbm.mesh import MIN_EXTENT, RunMode
from progressive_lbm.physics import ComponentParams, CouplingMatrix, EOSParams
from progressive_lbm.sched import AssignmentPolicy, DeviceTopology

logger = logging.getLogger(__name__)

SNAPSHOT_FIELDS = ("rho", "u_magnitude", "psi")
BOUNDARY_KINDS = ("ambient", "periodic")
SEED_SHAPES = ("box", "sphere")
EOS_KINDS = ("peng_robinson", "ideal")


@dataclass
class EOSConfig:
    """Equation of state of a component.

    Peng-Robinson needs T and either (a, b) or (T_c, p_c).
    """

    kind: str = "peng_robinson"
    a: Optional[float] = None
    b: Optional[float] = None
    R: float = 1.0
    T: Optional[float] = None
    T_c: Optional[float] = None
    p_c: Optional[float] = None
    omega: float = 0.344

    def validate(self, where: str) -> list[str]:
        if self.kind not in EOS_KINDS:
            return [f"{where}.kind must be one of {EOS_KINDS} (got '{self.kind}')"]
        if self.kind == "ideal":
            return []
        errors = []
        if self.T is None or self.T <= 0:
            errors.append(f"{where}.T must be > 0")
        direct = self.a is not None or self.b is not None
        critical = self.T_c is not None or self.p_c is not None
        if direct and critical:
            errors.append(f"{where}: give either (a, b) or (T_c, p_c), not both")
        elif direct:
            if self.a is None or self.b is None:
                errors.append(f"{where}: a and b must be given together")
            elif self.a < 0 or self.b <= 0:
                errors.append(f"{where}: a must be >= 0 and b > 0")
        elif critical:
            if self.T_c is None or self.p_c is None or self.T_c <= 0 or self.p_c <= 0:
                errors.append(f"{where}: T_c and p_c must both be > 0")
        else:
            errors.append(f"{where}: Peng-Robinson needs (a, b) or (T_c, p_c)")
        if self.R <= 0:
            errors.append(f"{where}.R must be > 0")
        return errors

    def to_params(self, cs2: float = CS2) -> EOSParams:
        if self.kind == "ideal":
            return EOSParams.ideal_gas(cs2)
        assert self.T is not None
        if self.a is not None and self.b is not None:
            return EOSParams.from_coefficients(
                self.a, self.b, self.T, omega=self.omega, R=self.R, T_c=self.T_c
            )
        assert self.T_c is not None and self.p_c is not None
        return EOSParams.from_critical(self.T_c, self.p_c, self.T, omega=self.omega, R=self.R)


@dataclass
class ComponentConfig:
    """Per-component relaxation, coupling and ambient settings."""

    tau: float
    rho_ambient: float
    name: str = "component"
    g_self: float = -1.0
    beta: float = 1.16
    gravity: Optional[list[float]] = None
    eos: EOSConfig = field(default_factory=EOSConfig)

    def to_params(self, d: int, cs2: float = CS2) -> ComponentParams:
        gravity = tuple(self.gravity) if self.gravity is not None else (0.0,) * d
        return ComponentParams(
            tau=self.tau,
            eos=self.eos.to_params(cs2),
            rho_ambient=self.rho_ambient,
            g_self=self.g_self,
            beta=self.beta,
            gravity=gravity,
            name=self.name,
        )


@dataclass
class SeedRegion:
    """Initial disturbance: a box [lo, hi) or a sphere, in cell coordinates."""

    density: list[float]
    shape: str = "box"
    lo: Optional[list[int]] = None
    hi: Optional[list[int]] = None
    center: Optional[list[float]] = None
    radius: Optional[float] = None
    velocity: Optional[list[float]] = None

    def validate(self, where: str, d: int, n_components: int) -> list[str]:
        errors = []
        if self.shape not in SEED_SHAPES:
            return [f"{where}.shape must be one of {SEED_SHAPES} (got '{self.shape}')"]
        if self.shape == "box":
            if self.lo is None or self.hi is None or len(self.lo) != d or len(self.hi) != d:
                errors.append(f"{where}: box seeds need lo and hi with {d} entries")
            elif any(h <= lo for lo, h in zip(self.lo, self.hi)):
                errors.append(f"{where}: hi must exceed lo on every axis")
        else:
            if self.center is None or len(self.center) != d:
                errors.append(f"{where}: sphere seeds need a center with {d} entries")
            if self.radius is None or self.radius <= 0:
                errors.append(f"{where}: sphere seeds need a radius > 0")
        if len(self.density) != n_components:
            errors.append(f"{where}.density needs {n_components} entries")
        elif any(rho < 0 for rho in self.density):
            errors.append(f"{where}.density must be >= 0")
        if self.velocity is not None:
            if len(self.velocity) != d:
                errors.append(f"{where}.velocity needs {d} entries")
            elif math.sqrt(sum(v * v for v in self.velocity)) >= 1.0:
                errors.append(f"{where}.velocity magnitude must be < 1")
        return errors

    def mask(self, origin: Sequence[int], extent: int, d: int) -> np.ndarray:
        """Cells of the block at origin covered by this seed."""
        grids = np.meshgrid(
            *[np.arange(o, o + extent) for o in origin[:d]], indexing="ij", sparse=True
        )
        if self.shape == "box":
            assert self.lo is not None and self.hi is not None
            inside = np.ones((extent,) * d, dtype=bool)
            for axis, g in enumerate(grids):
                inside &= (g >= self.lo[axis]) & (g < self.hi[axis])
            return inside
        assert self.center is not None and self.radius is not None
        dist2 = sum((g - c) ** 2 for g, c in zip(grids, self.center))
        result: np.ndarray = np.broadcast_to(dist2 <= self.radius**2, (extent,) * d)
        return result

    def velocity_vector(self, d: int) -> np.ndarray:
        return np.array(self.velocity if self.velocity is not None else [0.0] * d)


@dataclass
class DeviceConfig:
    """Simulated devices and the assignment policy."""

    count: int = 1
    topology: Optional[Path] = None
    policy: AssignmentPolicy = AssignmentPolicy.OPTIMIZED
    weight_p2p: float = 0.5
    weight_staged: float = 1.0
    enable_p2p: bool = True
    max_tiles_per_device: Optional[int] = None
    workers: Optional[int] = None

    @property
    def n_workers(self) -> int:
        return self.workers if self.workers is not None else self.count

    def build_topology(self) -> DeviceTopology:
        """Load or build the device topology.

        Without a topology file every device pair is P2P-reachable.
        With enable_p2p false every cross-device transfer is staged.
        """
        weights = {"weight_p2p": self.weight_p2p, "weight_staged": self.weight_staged}
        if not self.enable_p2p:
            return DeviceTopology.without_p2p(self.count, **weights)
        if self.topology is not None:
            topology = DeviceTopology.from_file(self.topology, **weights)
            if topology.n_devices != self.count:
                raise ConfigValidationError(
                    [f"topology has {topology.n_devices} devices, devices.count is {self.count}"]
                )
            return topology
        return DeviceTopology.fully_connected(self.count, **weights)


@dataclass
class ScenarioConfig:
    """A complete scenario: lattice, mesh, physics, devices and outputs."""

    domain: tuple[int, ...]
    """Bounding box size in cells."""

    components: list[ComponentConfig]
    name: str = "scenario"
    stencil: StencilKind = StencilKind.D2Q9
    tile_extent: int = 32
    mode: RunMode = RunMode.PROGRESSIVE
    iterations: int = 0
    report_interval: int = 10
    snapshot_interval: int = 0
    snapshot_fields: list[str] = field(default_factory=lambda: list(SNAPSHOT_FIELDS))
    write_pgm: bool = False
    threshold: float = 0.0
    frontier_guard: bool = True
    """Also grow the mesh where populations near a tile edge leave the ambient state."""

    boundaries: tuple[str, ...] = ()
    geometry: Optional[Path] = None
    initial_tiles: list[tuple[int, ...]] = field(default_factory=list)
    g_cross: Optional[list[list[float]]] = None
    seeds: list[SeedRegion] = field(default_factory=list)
    devices: DeviceConfig = field(default_factory=DeviceConfig)
    output_dir: Path = Path("runs")
    source: Optional[Path] = None

    def __post_init__(self) -> None:
        self.domain = tuple(int(n) for n in self.domain)
        if not self.boundaries:
            self.boundaries = ("ambient",) * len(self.domain)

    @property
    def d(self) -> int:
        return len(self.domain)

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def bounds(self) -> tuple[int, ...]:
        return tuple(n // self.tile_extent for n in self.domain)

    @property
    def periodic(self) -> tuple[bool, ...]:
        return tuple(b == "periodic" for b in self.boundaries)

    @property
    def domain_cells(self) -> int:
        return int(np.prod(self.domain))

    def make_stencil(self) -> Stencil:
        return make_stencil(self.stencil)

    def component_params(self) -> list[ComponentParams]:
        return [c.to_params(self.d) for c in self.components]

    def coupling(self) -> CouplingMatrix:
        if self.g_cross is None:
            return CouplingMatrix.zeros(self.n_components)
        return CouplingMatrix.from_rows(self.g_cross)

    def geometry_mask(self) -> GeometryMask:
        if self.geometry is None:
            return GeometryMask.empty(self.domain)
        return load_geometry(self.geometry, expected=self.domain)

    def with_overrides(self, **changes: Any) -> ScenarioConfig:
        """Copy with top-level or devices.* fields replaced (None values are skipped)."""
        device_fields = {f for f in DeviceConfig.__dataclass_fields__}
        devices = {k: v for k, v in changes.items() if k in device_fields and v is not None}
        top = {k: v for k, v in changes.items() if k not in device_fields and v is not None}
        updated = replace(self, **top)
        if devices:
            updated = replace(updated, devices=replace(self.devices, **devices))
        return updated

    def validate(self) -> list[str]:
        """Validate every field.

        Returns:
            List of error messages (empty if valid).
        """
        errors: list[str] = []
        d = self.d
        expected_d = 2 if self.stencil is StencilKind.D2Q9 else 3
        if d != expected_d:
            errors.append(f"scenario.domain needs {expected_d} entries for {self.stencil.value}")
        if self.tile_extent < MIN_EXTENT:
            errors.append(f"scenario.tile_extent must be >= {MIN_EXTENT}")
        elif any(n <= 0 or n % self.tile_extent for n in self.domain):
            errors.append(
                f"scenario.domain {list(self.domain)} must be divisible by "
                f"tile_extent {self.tile_extent} on every axis"
            )
        if self.iterations < 0:
            errors.append("scenario.iterations must be >= 0")
        if self.report_interval < 1:
            errors.append("scenario.report_interval must be >= 1")
        if self.snapshot_interval < 0:
            errors.append("scenario.snapshot_interval must be >= 0")
        if self.threshold < 0:
            errors.append("scenario.threshold must be >= 0")
        for name in self.snapshot_fields:
            if name not in SNAPSHOT_FIELDS:
                errors.append(f"scenario.snapshot_fields: unknown field '{name}'")
        if len(self.boundaries) != d or any(b not in BOUNDARY_KINDS for b in self.boundaries):
            errors.append(f"scenario.boundaries needs {d} entries from {BOUNDARY_KINDS}")
        if self.geometry is not None and not self.geometry.exists():
            errors.append(f"scenario.geometry file not found: {self.geometry}")

        if not self.components:
            errors.append("at least one [[components]] table is required")
        for i, comp in enumerate(self.components):
            errors.extend(comp.eos.validate(f"components[{i}].eos"))
            if comp.gravity is not None and len(comp.gravity) != d:
                errors.append(f"components[{i}].gravity needs {d} entries")
            if not comp.eos.validate(f"components[{i}].eos"):
                errors.extend(f"components[{i}] {e}" for e in comp.to_params(d).validate())

        if self.g_cross is not None:
            try:
                coupling = self.coupling()
            except ValueError as e:
                errors.append(f"coupling.g_cross is not a numeric matrix: {e}")
            else:
                if coupling.g.shape != (self.n_components, self.n_components):
                    errors.append(
                        f"coupling.g_cross must be {self.n_components}x{self.n_components}"
                    )
                else:
                    errors.extend(f"coupling.{e}" for e in coupling.validate())

        for i, seed in enumerate(self.seeds):
            errors.extend(seed.validate(f"seeds[{i}]", d, self.n_components))

        bounds = self.bounds if self.tile_extent > 0 else ()
        for coords in self.initial_tiles:
            if len(coords) != d or not all(0 <= c < b for c, b in zip(coords, bounds)):
                errors.append(f"scenario.initial_tiles entry {list(coords)} is out of bounds")
        if self.mode is RunMode.PROGRESSIVE and not self.seeds and not self.initial_tiles:
            errors.append("progressive mode needs [[seeds]] or scenario.initial_tiles")

        dev = self.devices
        if dev.count < 1:
            errors.append("devices.count must be >= 1")
        if not 0 < dev.weight_p2p <= dev.weight_staged:
            errors.append("devices weights must satisfy 0 < weight_p2p <= weight_staged")
        if dev.max_tiles_per_device is not None and dev.max_tiles_per_device < 1:
            errors.append("devices.max_tiles_per_device must be >= 1")
        if dev.workers is not None and dev.workers < 1:
            errors.append("devices.workers must be >= 1")
        if dev.topology is not None and not dev.topology.exists():
            errors.append(f"devices.topology file not found: {dev.topology}")
        return errors

    def warnings(self) -> list[str]:
        """Advisory messages for valid but questionable settings."""
        warnings = []
        for comp in self.components:
            if 0.5 < comp.tau < 0.55:
                warnings.append(f"{comp.name}: tau {comp.tau} is close to the stability limit")
            eos = comp.eos
            if eos.kind == "peng_robinson" and eos.T is not None and eos.T_c is not None:
                if eos.T >= eos.T_c:
                    warnings.append(f"{comp.name}: T >= T_c, no liquid/vapor coexistence")
        if self.devices.n_workers > self.devices.count:
            warnings.append("more workers than devices; extra workers stay idle")
        if self.mode is RunMode.STATIC and self.initial_tiles:
            warnings.append("scenario.initial_tiles is ignored in static mode")
        if not self.seeds:
            warnings.append("no seeds: the run stays at the ambient state")
        return warnings

    # Parsing

    @classmethod
    def from_dict(
        cls,
        data: dict[str, Any],
        base_dir: Optional[Path] = None,
        source: Optional[Path] = None,
    ) -> ScenarioConfig:
        """Build a config from parsed TOML tables.

        Args:
            data: Parsed document.
            base_dir: Directory relative paths are resolved against.
            source: File the data came from, for error messages.

        Returns:
            Unvalidated ScenarioConfig.

        Raises:
            ConfigValidationError: On unknown keys or wrong value types.
        """
        parser = _Parser(base_dir or Path.cwd())
        config = parser.scenario(data, source)
        if parser.errors:
            raise ConfigValidationError(parser.errors, source)
        return config


class _Parser:
    """Collects unknown-key and type errors while converting tables."""

    def __init__(self, base_dir: Path) -> None:
        self.base_dir = base_dir
        self.errors: list[str] = []

    def table(self, data: Any, where: str, allowed: set[str]) -> dict[str, Any]:
        if not isinstance(data, dict):
            self.errors.append(f"{where} must be a table")
            return {}
        unknown = sorted(set(data) - allowed)
        for key in unknown:
            self.errors.append(f"{where}: unknown key '{key}'")
        return {k: v for k, v in data.items() if k in allowed}

    def convert(self, value: Any, kind: type, where: str) -> Any:
        if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if kind is int and isinstance(value, int) and not isinstance(value, bool):
            return value
        if kind in (str, bool) and isinstance(value, kind):
            return value
        if kind is list and isinstance(value, list):
            return value
        self.errors.append(f"{where} must be of type {kind.__name__} (got {value!r})")
        return None

    def fields(
        self, data: dict[str, Any], where: str, spec: dict[str, type]
    ) -> dict[str, Any]:
        out = {}
        for key, kind in spec.items():
            if key in data:
                value = self.convert(data[key], kind, f"{where}.{key}")
                if value is not None:
                    out[key] = value
        return out

    def items(self, values: list[Any], kind: type, where: str) -> Optional[list[Any]]:
        """Convert every element of a list, reporting bad ones by index."""
        before = len(self.errors)
        out = [self.convert(v, kind, f"{where}[{i}]") for i, v in enumerate(values)]
        return out if len(self.errors) == before else None

    def rows(self, values: list[Any], kind: type, where: str) -> Optional[list[Any]]:
        before = len(self.errors)
        out = []
        for i, row in enumerate(values):
            if self.convert(row, list, f"{where}[{i}]") is not None:
                out.append(self.items(row, kind, f"{where}[{i}]"))
        return out if len(self.errors) == before else None

    def elements(
        self, values: dict[str, Any], where: str, spec: dict[str, type], nested: bool = False
    ) -> None:
        """Check the element types of the list fields in values, dropping bad lists."""
        convert = self.rows if nested else self.items
        for key, kind in spec.items():
            if key in values:
                converted = convert(values[key], kind, f"{where}.{key}")
                if converted is None:
                    del values[key]
                else:
                    values[key] = converted

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def enum(self, enum_type: Any, value: Any, where: str) -> Any:
        try:
            return enum_type(value)
        except ValueError:
            choices = [e.value for e in enum_type]
            self.errors.append(f"{where} must be one of {choices} (got {value!r})")
            return None

    def scenario(self, data: dict[str, Any], source: Optional[Path]) -> ScenarioConfig:
        root = self.table(
            data, "<root>", {"scenario", "devices", "components", "coupling", "seeds"}
        )
        scen = self.table(
            root.get("scenario", {}),
            "scenario",
            {
                "name", "stencil", "domain", "tile_extent", "mode", "iterations",
                "report_interval", "snapshot_interval", "snapshot_fields", "write_pgm",
                "threshold", "frontier_guard", "boundaries", "geometry", "initial_tiles",
                "output_dir",
            },
        )
        values = self.fields(
            scen,
            "scenario",
            {
                "name": str, "domain": list, "tile_extent": int, "iterations": int,
                "report_interval": int, "snapshot_interval": int, "snapshot_fields": list,
                "write_pgm": bool, "threshold": float, "boundaries": list, "geometry": str,
                "initial_tiles": list, "output_dir": str, "frontier_guard": bool,
            },
        )
        self.elements(
            values, "scenario", {"domain": int, "boundaries": str, "snapshot_fields": str}
        )
        self.elements(values, "scenario", {"initial_tiles": int}, nested=True)
        domain = tuple(values.pop("domain", ()))
        if "domain" not in scen:
            self.errors.append("scenario.domain is required")
        if "stencil" in scen:
            stencil = self.enum(StencilKind, scen["stencil"], "scenario.stencil")
            if stencil is not None:
                values["stencil"] = stencil
        elif domain:
            values["stencil"] = StencilKind.D2Q9 if len(domain) == 2 else StencilKind.D3Q19
        if "mode" in scen:
            mode = self.enum(RunMode, scen["mode"], "scenario.mode")
            if mode is not None:
                values["mode"] = mode
        if "boundaries" in values:
            values["boundaries"] = tuple(values["boundaries"])
        if "geometry" in values:
            values["geometry"] = self.path(values["geometry"])
        if "output_dir" in values:
            values["output_dir"] = self.path(values["output_dir"])
        if "initial_tiles" in values:
            values["initial_tiles"] = [tuple(t) for t in values["initial_tiles"]]

        components = [
            self.component(c, f"components[{i}]")
            for i, c in enumerate(root.get("components", []))
        ]
        coupling = self.table(root.get("coupling", {}), "coupling", {"g_cross"})
        if "g_cross" in coupling:
            g_cross = self.convert(coupling["g_cross"], list, "coupling.g_cross")
            if g_cross is not None:
                values["g_cross"] = g_cross
                self.elements(values, "coupling", {"g_cross": float}, nested=True)
        seeds = [self.seed(s, f"seeds[{i}]") for i, s in enumerate(root.get("seeds", []))]
        devices = self.devices(root.get("devices", {}))

        return ScenarioConfig(
            domain=domain,
            components=[c for c in components if c is not None],
            seeds=[s for s in seeds if s is not None],
            devices=devices,
            source=source,
            **values,
        )

    def component(self, data: Any, where: str) -> Optional[ComponentConfig]:
        table = self.table(
            data, where, {"name", "tau", "rho_ambient", "g_self", "beta", "gravity", "eos"}
        )
        values = self.fields(
            table,
            where,
            {
                "name": str, "tau": float, "rho_ambient": float, "g_self": float,
                "beta": float, "gravity": list,
            },
        )
        eos_table = self.table(
            table.get("eos", {}),
            f"{where}.eos",
            {"kind", "a", "b", "R", "T", "T_c", "p_c", "omega"},
        )
        eos = EOSConfig(
            **self.fields(
                eos_table,
                f"{where}.eos",
                {
                    "kind": str, "a": float, "b": float, "R": float, "T": float,
                    "T_c": float, "p_c": float, "omega": float,
                },
            )
        )
        for required in ("tau", "rho_ambient"):
            if required not in values:
                self.errors.append(f"{where}.{required} is required")
        if "tau" not in values or "rho_ambient" not in values:
            return None
        self.elements(values, where, {"gravity": float})
        return ComponentConfig(eos=eos, **values)

    def seed(self, data: Any, where: str) -> Optional[SeedRegion]:
        table = self.table(
            data, where, {"shape", "lo", "hi", "center", "radius", "density", "velocity"}
        )
        values = self.fields(
            table,
            where,
            {
                "shape": str, "lo": list, "hi": list, "center": list, "radius": float,
                "density": list, "velocity": list,
            },
        )
        self.elements(
            values,
            where,
            {"lo": int, "hi": int, "center": float, "density": float, "velocity": float},
        )
        if "density" not in table:
            self.errors.append(f"{where}.density is required")
        if "density" not in values:
            return None
        return SeedRegion(**values)

    def devices(self, data: Any) -> DeviceConfig:
        table = self.table(
            data,
            "devices",
            {
                "count", "topology", "policy", "weight_p2p", "weight_staged", "enable_p2p",
                "max_tiles_per_device", "workers",
            },
        )
        values = self.fields(
            table,
            "devices",
            {
                "count": int, "topology": str, "weight_p2p": float, "weight_staged": float,
                "enable_p2p": bool, "max_tiles_per_device": int, "workers": int,
            },
        )
        if "topology" in values:
            values["topology"] = self.path(values["topology"])
        if "policy" in table:
            policy = self.enum(AssignmentPolicy, table["policy"], "devices.policy")
            if policy is not None:
                values["policy"] = policy
        return DeviceConfig(**values)


def apply_env_overrides(config: ScenarioConfig) -> ScenarioConfig:
    """Apply LBM_OUTPUT_DIR and LBM_WORKERS from the environment."""
    output = os.getenv("LBM_OUTPUT_DIR")
    workers = os.getenv("LBM_WORKERS")
    changes: dict[str, Any] = {}
    if output:
        changes["output_dir"] = Path(output)
    if workers:
        try:
            changes["workers"] = int(workers)
        except ValueError:
            raise ConfigValidationError([f"LBM_WORKERS must be an integer (got '{workers}')"])
    return config.with_overrides(**changes) if changes else config


def load_config(
    path: Path | str,
    dotenv_path: Optional[str] = None,
    use_env: bool = True,
) -> ScenarioConfig:
    """Load, override from the environment and validate a scenario file.

    Args:
        path: TOML scenario file.
        dotenv_path: Optional .env file. If None, searches default locations.
        use_env: Apply environment overrides.

    Returns:
        Validated ScenarioConfig.

    Raises:
        ConfigValidationError: With every per-field message.
    """
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as e:
        raise ConfigValidationError([f"cannot read config: {e}"], path) from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigValidationError([f"invalid TOML: {e}"], path) from e

    config = ScenarioConfig.from_dict(data, base_dir=path.parent, source=path)
    if use_env:
        load_dotenv(dotenv_path)
        config = apply_env_overrides(config)
    check(config)
    return config


def check(config: ScenarioConfig) -> list[str]:
    """Validate a config, log its warnings and return them.

    Raises:
        ConfigValidationError: If validation fails.
    """
    errors = config.validate()
    if errors:
        raise ConfigValidationError(errors, config.source)
    warnings = config.warnings()
    for warning in warnings:
        logger.warning(warning)
    return warnings


__all__ = [
    "ComponentConfig",
    "DeviceConfig",
    "EOSConfig",
    "ScenarioConfig",
    "SeedRegion",
    "apply_env_overrides",
    "check",
    "load_config",
]
