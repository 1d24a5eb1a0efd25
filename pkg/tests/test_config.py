"""Tests for scenario parsing, validation and environment overrides."""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from progressive_lbm.config import (
    ComponentConfig,
    DeviceConfig,
    EOSConfig,
    ScenarioConfig,
    SeedRegion,
    apply_env_overrides,
    check,
    load_config,
)
from progressive_lbm.errors import ConfigValidationError
from progressive_lbm.lattice import StencilKind
from progressive_lbm.mesh import RunMode
from progressive_lbm.sched import AssignmentPolicy, ExchangeClass

from tests.conftest import PR_A, PR_B

ConfigFactory = Callable[..., ScenarioConfig]


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "scenario.toml"
    path.write_text(text)
    return path


def _has(errors: list[str], fragment: str) -> bool:
    return any(fragment in e for e in errors)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch: pytest.MonkeyPatch) -> None:
    # setenv first so teardown also removes values a .env file loads
    for name in ("LBM_OUTPUT_DIR", "LBM_WORKERS"):
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)


@pytest.mark.unit
class TestLoadConfig:
    def test_minimal_file(self, scenario_toml: Path) -> None:
        config = load_config(scenario_toml, use_env=False)
        assert config.name == "minimal"
        assert config.domain == (64, 64)
        assert config.stencil is StencilKind.D2Q9
        assert config.tile_extent == 32
        assert config.mode is RunMode.PROGRESSIVE
        assert config.boundaries == ("ambient", "ambient")
        assert config.components[0].eos.kind == "ideal"
        assert config.seeds[0].density == [1.1]
        assert config.threshold == 0.0
        assert config.devices.weight_p2p == 0.5
        assert config.devices.policy is AssignmentPolicy.OPTIMIZED
        assert config.source == scenario_toml

    def test_unknown_keys_are_reported_together(self, tmp_path: Path) -> None:
        path = _write(
            tmp_path,
            """
[scenario]
domain = [64, 64]
colour = "blue"

[devices]
gpus = 2

[[components]]
tau = 0.8
rho_ambient = 1.0
""",
        )
        with pytest.raises(ConfigValidationError) as exc:
            load_config(path, use_env=False)
        assert "scenario: unknown key 'colour'" in exc.value.errors
        assert "devices: unknown key 'gpus'" in exc.value.errors
        assert exc.value.path == path

    def test_wrong_type(self, tmp_path: Path) -> None:
        path = _write(tmp_path, '[scenario]\ndomain = [64, 64]\ntile_extent = "big"\n')
        with pytest.raises(ConfigValidationError) as exc:
            load_config(path, use_env=False)
        assert _has(exc.value.errors, "scenario.tile_extent must be of type int")

    def test_list_elements_are_typed(self, tmp_path: Path) -> None:
        path = _write(
            tmp_path,
            """
[scenario]
domain = [64, "wide"]
initial_tiles = [[0, 1], [1, "x"], 3]
boundaries = ["ambient", 0]

[[components]]
tau = 0.8
rho_ambient = 1.0
gravity = [0.0, "down"]

[coupling]
g_cross = [[0.0, "strong"]]

[[seeds]]
shape = "box"
lo = [1.5, 2]
hi = [4, 4]
density = ["dense"]
""",
        )
        with pytest.raises(ConfigValidationError) as exc:
            load_config(path, use_env=False)
        errors = exc.value.errors
        assert _has(errors, "scenario.domain[1] must be of type int (got 'wide')")
        assert _has(errors, "scenario.initial_tiles[1][1] must be of type int")
        assert _has(errors, "scenario.initial_tiles[2] must be of type list")
        assert _has(errors, "scenario.boundaries[1] must be of type str")
        assert _has(errors, "components[0].gravity[1] must be of type float")
        assert _has(errors, "coupling.g_cross[0][1] must be of type float")
        assert _has(errors, "seeds[0].lo[0] must be of type int")
        assert _has(errors, "seeds[0].density[0] must be of type float")
        assert not _has(errors, "scenario.domain is required")
        assert not _has(errors, "seeds[0].density is required")

    def test_frontier_guard_key(self, scenario_toml: Path, tmp_path: Path) -> None:
        assert load_config(scenario_toml, use_env=False).frontier_guard is True
        text = scenario_toml.read_text().replace(
            "[scenario]\n", "[scenario]\nfrontier_guard = false\n", 1
        )
        assert load_config(_write(tmp_path, text), use_env=False).frontier_guard is False

    def test_invalid_toml(self, tmp_path: Path) -> None:
        path = _write(tmp_path, "[scenario\ndomain = ")
        with pytest.raises(ConfigValidationError, match="invalid TOML"):
            load_config(path, use_env=False)

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigValidationError, match="cannot read config"):
            load_config(tmp_path / "absent.toml", use_env=False)

    def test_unknown_enum_value(self, tmp_path: Path) -> None:
        path = _write(
            tmp_path,
            """
[scenario]
domain = [64, 64]
mode = "adaptive"

[[components]]
tau = 0.8
rho_ambient = 1.0
""",
        )
        with pytest.raises(ConfigValidationError) as exc:
            load_config(path, use_env=False)
        assert _has(exc.value.errors, "scenario.mode must be one of")

    def test_stencil_follows_domain_dimension(self) -> None:
        data = {
            "scenario": {"domain": [32, 32, 32]},
            "components": [{"tau": 0.8, "rho_ambient": 1.0}],
        }
        assert ScenarioConfig.from_dict(data).stencil is StencilKind.D3Q19

    def test_relative_paths_resolve_against_file(self, tmp_path: Path) -> None:
        data = {
            "scenario": {"domain": [32, 32], "geometry": "box.geo", "output_dir": "out"},
            "devices": {"topology": "/abs/topo.txt"},
        }
        config = ScenarioConfig.from_dict(data, base_dir=tmp_path)
        assert config.geometry == tmp_path / "box.geo"
        assert config.output_dir == tmp_path / "out"
        assert config.devices.topology == Path("/abs/topo.txt")

    def test_peng_robinson_component(self, tmp_path: Path) -> None:
        path = _write(
            tmp_path,
            f"""
[scenario]
domain = [64, 64]
mode = "static"

[[components]]
tau = 1.0
rho_ambient = 1.0
gravity = [0, -1e-5]

[components.eos]
a = {PR_A!r}
b = {PR_B!r}
T = 0.06
""",
        )
        config = load_config(path, use_env=False)
        params = config.component_params()[0]
        assert params.eos.b == PR_B
        assert params.gravity == (0.0, -1e-5)


@pytest.mark.unit
class TestValidation:
    def test_defaults_are_valid(self, make_config: ConfigFactory) -> None:
        assert make_config().validate() == []

    def test_domain_must_divide_by_tile_extent(self, make_config: ConfigFactory) -> None:
        errors = make_config(domain=(30, 32)).validate()
        assert _has(errors, "must be divisible by tile_extent 8")

    def test_tile_extent_minimum(self, make_config: ConfigFactory) -> None:
        assert _has(make_config(tile_extent=2, domain=(8, 8)).validate(), "tile_extent must be >=")

    def test_domain_dimension_matches_stencil(self, make_config: ConfigFactory) -> None:
        errors = make_config(stencil=StencilKind.D3Q19).validate()
        assert _has(errors, "scenario.domain needs 3 entries for D3Q19")

    def test_unstable_tau(self, make_config: ConfigFactory) -> None:
        comp = ComponentConfig(tau=0.5, rho_ambient=1.0, eos=EOSConfig(kind="ideal"))
        errors = make_config(components=[comp]).validate()
        assert _has(errors, "tau must be > 0.5")

    @pytest.mark.parametrize(
        ("eos", "fragment"),
        [
            (EOSConfig(T=0.06), "needs (a, b) or (T_c, p_c)"),
            (EOSConfig(a=PR_A, T=0.06), "a and b must be given together"),
            (EOSConfig(a=PR_A, b=PR_B, T_c=0.07, p_c=0.01, T=0.06), "not both"),
            (EOSConfig(a=PR_A, b=PR_B), ".T must be > 0"),
            (EOSConfig(kind="van_der_waals"), "kind must be one of"),
        ],
    )
    def test_invalid_eos(
        self, make_config: ConfigFactory, eos: EOSConfig, fragment: str
    ) -> None:
        comp = ComponentConfig(tau=1.0, rho_ambient=1.0, eos=eos)
        assert _has(make_config(components=[comp]).validate(), fragment)

    def test_ambient_beyond_pole(self, make_config: ConfigFactory) -> None:
        eos = EOSConfig(a=PR_A, b=PR_B, T=0.06)
        comp = ComponentConfig(tau=1.0, rho_ambient=11.0, eos=eos)
        assert _has(make_config(components=[comp]).validate(), "beyond the EOS pole")

    def test_coupling_matrix(self, two_component_config: ScenarioConfig) -> None:
        asymmetric = two_component_config.with_overrides(g_cross=[[0.0, 0.5], [0.4, 0.0]])
        wrong_shape = two_component_config.with_overrides(g_cross=[[0.0]])
        assert _has(asymmetric.validate(), "coupling.g_cross must be symmetric")
        assert _has(wrong_shape.validate(), "coupling.g_cross must be 2x2")

    def test_seed_validation(self, make_config: ConfigFactory) -> None:
        seeds = [
            SeedRegion(density=[1.1], lo=[4, 4], hi=[4, 8]),
            SeedRegion(density=[1.1, 0.1], shape="sphere", center=[4.0, 4.0], radius=2.0),
            SeedRegion(density=[1.1], lo=[0, 0], hi=[2, 2], velocity=[0.9, 0.9]),
        ]
        errors = make_config(seeds=seeds).validate()
        assert _has(errors, "seeds[0]: hi must exceed lo")
        assert _has(errors, "seeds[1].density needs 1 entries")
        assert _has(errors, "seeds[2].velocity magnitude must be < 1")

    def test_progressive_needs_a_start(self, make_config: ConfigFactory) -> None:
        errors = make_config(seeds=[]).validate()
        assert _has(errors, "progressive mode needs [[seeds]] or scenario.initial_tiles")
        assert make_config(seeds=[], mode=RunMode.STATIC).validate() == []

    def test_initial_tile_bounds(self, make_config: ConfigFactory) -> None:
        errors = make_config(initial_tiles=[(4, 0)]).validate()
        assert _has(errors, "initial_tiles entry [4, 0] is out of bounds")

    def test_boundaries(self, make_config: ConfigFactory) -> None:
        errors = make_config(boundaries=("periodic", "mirror")).validate()
        assert _has(errors, "scenario.boundaries needs 2 entries")

    def test_device_settings(self, make_config: ConfigFactory) -> None:
        devices = DeviceConfig(count=0, weight_p2p=2.0, max_tiles_per_device=0, workers=0)
        errors = make_config(devices=devices).validate()
        assert _has(errors, "devices.count must be >= 1")
        assert _has(errors, "weight_p2p <= weight_staged")
        assert _has(errors, "max_tiles_per_device must be >= 1")
        assert _has(errors, "devices.workers must be >= 1")

    def test_check_raises_with_every_error(self, make_config: ConfigFactory) -> None:
        with pytest.raises(ConfigValidationError) as exc:
            check(make_config(domain=(30, 32), iterations=-1))
        assert len(exc.value.errors) >= 2

    def test_warnings(self, make_config: ConfigFactory) -> None:
        comp = ComponentConfig(tau=0.52, rho_ambient=1.0, eos=EOSConfig(kind="ideal"))
        config = make_config(mode=RunMode.STATIC, seeds=[], components=[comp])
        warnings = check(config)
        assert _has(warnings, "close to the stability limit")
        assert _has(warnings, "no seeds")


@pytest.mark.unit
class TestOverrides:
    def test_with_overrides_routes_device_fields(self, make_config: ConfigFactory) -> None:
        config = make_config().with_overrides(count=4, iterations=3, policy=None)
        assert config.devices.count == 4
        assert config.iterations == 3
        assert config.devices.policy is AssignmentPolicy.OPTIMIZED

    def test_env_overrides(
        self, make_config: ConfigFactory, monkeypatch: pytest.MonkeyPatch, tmp_path: Path
    ) -> None:
        monkeypatch.setenv("LBM_WORKERS", "3")
        monkeypatch.setenv("LBM_OUTPUT_DIR", str(tmp_path / "out"))
        config = apply_env_overrides(make_config())
        assert config.devices.workers == 3
        assert config.devices.n_workers == 3
        assert config.output_dir == tmp_path / "out"

    def test_env_workers_must_be_integer(
        self, make_config: ConfigFactory, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        monkeypatch.setenv("LBM_WORKERS", "many")
        with pytest.raises(ConfigValidationError, match="LBM_WORKERS must be an integer"):
            apply_env_overrides(make_config())

    def test_dotenv_file(
        self, scenario_toml: Path, tmp_path: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        env_file = tmp_path / "bench.env"
        env_file.write_text("LBM_WORKERS=2\n")
        config = load_config(scenario_toml, dotenv_path=str(env_file))
        assert config.devices.workers == 2

    def test_no_env_without_flag(
        self, scenario_toml: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        monkeypatch.setenv("LBM_WORKERS", "5")
        assert load_config(scenario_toml, use_env=False).devices.workers is None


@pytest.mark.unit
class TestDevicesAndSeeds:
    def test_topology_defaults_to_fully_connected(self) -> None:
        topology = DeviceConfig(count=3).build_topology()
        assert topology.exchange_class(0, 2) is ExchangeClass.P2P

    def test_disabled_p2p_stages_everything(self) -> None:
        topology = DeviceConfig(count=3, enable_p2p=False).build_topology()
        assert topology.exchange_class(0, 1) is ExchangeClass.STAGED
        assert topology.exchange_class(1, 1) is ExchangeClass.INTRA

    def test_topology_file_device_count(self, topology_file: Path) -> None:
        assert DeviceConfig(count=4, topology=topology_file).build_topology().n_devices == 4
        with pytest.raises(ConfigValidationError, match="topology has 4 devices"):
            DeviceConfig(count=2, topology=topology_file).build_topology()

    def test_box_seed_mask(self) -> None:
        seed = SeedRegion(density=[1.0], lo=[6, 2], hi=[10, 3])
        mask = seed.mask((8, 0), 4, 2)
        expected = np.zeros((4, 4), dtype=bool)
        expected[0:2, 2] = True
        np.testing.assert_array_equal(mask, expected)

    def test_sphere_seed_mask(self) -> None:
        seed = SeedRegion(density=[1.0], shape="sphere", center=[2.0, 2.0], radius=1.0)
        mask = seed.mask((0, 0), 5, 2)
        assert int(mask.sum()) == 5
        assert mask[2, 2] and mask[1, 2] and not mask[1, 1]
