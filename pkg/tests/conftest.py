"""Shared pytest fixtures for progressive LBM tests."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable

import numpy as np
import pytest

from progressive_lbm.config import (
    ComponentConfig,
    DeviceConfig,
    EOSConfig,
    ScenarioConfig,
    SeedRegion,
)
from progressive_lbm.lattice import Stencil, StencilKind, make_stencil
from progressive_lbm.mesh import RunMode
from progressive_lbm.physics import ComponentParams, EOSParams
from progressive_lbm.sched import DeviceTopology

PR_A = 2.0 / 49.0
PR_B = 2.0 / 21.0


# Lattice fixtures


@pytest.fixture
def d2q9() -> Stencil:
    return make_stencil(StencilKind.D2Q9)


@pytest.fixture
def d3q19() -> Stencil:
    return make_stencil(StencilKind.D3Q19)


@pytest.fixture(params=[StencilKind.D2Q9, StencilKind.D3Q19], ids=["D2Q9", "D3Q19"])
def stencil(request: pytest.FixtureRequest) -> Stencil:
    """Both supported stencils."""
    return make_stencil(request.param)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


# Physics fixtures


@pytest.fixture
def pr_eos() -> EOSParams:
    """Peng-Robinson component at 0.85 of its critical temperature."""
    t_c = EOSParams.from_coefficients(PR_A, PR_B, T=1.0).T_c
    return EOSParams.from_coefficients(PR_A, PR_B, T=0.85 * t_c)


@pytest.fixture
def ideal_params() -> ComponentParams:
    return ComponentParams(tau=0.8, eos=EOSParams.ideal_gas(), rho_ambient=1.0, name="fluid")


# Configuration fixtures


@pytest.fixture
def make_config() -> Callable[..., ScenarioConfig]:
    """Factory for small in-memory scenarios.

    Defaults to a 2-D progressive ideal-gas run on a 32x32 box of 8x8
    tiles with a moving box seed in tile (1, 1).
    """

    def factory(**overrides: Any) -> ScenarioConfig:
        values: dict[str, Any] = {
            "name": "test",
            "domain": (32, 32),
            "stencil": StencilKind.D2Q9,
            "tile_extent": 8,
            "mode": RunMode.PROGRESSIVE,
            "iterations": 10,
            "report_interval": 5,
            "components": [
                ComponentConfig(
                    tau=0.8, rho_ambient=1.0, name="fluid", eos=EOSConfig(kind="ideal")
                )
            ],
            "seeds": [
                SeedRegion(density=[1.05], lo=[10, 10], hi=[14, 14], velocity=[0.02, 0.01])
            ],
            "devices": DeviceConfig(count=1),
        }
        values.update(overrides)
        return ScenarioConfig(**values)

    return factory


@pytest.fixture
def two_component_config(make_config: Callable[..., ScenarioConfig]) -> ScenarioConfig:
    """Supercritical two-component pulse, small enough for exact comparisons."""
    eos = EOSConfig(a=PR_A, b=PR_B, T=0.11)
    return make_config(
        name="two_component",
        components=[
            ComponentConfig(tau=0.9, rho_ambient=1.0, name="heavy", eos=eos),
            ComponentConfig(tau=0.9, rho_ambient=0.1, name="light", eos=eos),
        ],
        g_cross=[[0.0, 0.5], [0.5, 0.0]],
        seeds=[
            SeedRegion(
                density=[1.2, 0.12], shape="sphere", center=[12.0, 12.0], radius=2.5,
                velocity=[0.04, 0.0],
            )
        ],
    )


@pytest.fixture
def scenario_toml(tmp_path: Path) -> Path:
    """Minimal valid scenario file."""
    path = tmp_path / "scenario.toml"
    path.write_text(
        """
[scenario]
name = "minimal"
domain = [64, 64]

[[components]]
tau = 0.8
rho_ambient = 1.0

[components.eos]
kind = "ideal"

[[seeds]]
lo = [30, 30]
hi = [34, 34]
density = [1.1]
"""
    )
    return path


# Topology fixtures


@pytest.fixture
def two_hub_topology() -> DeviceTopology:
    """Eight devices, P2P inside {0..3} and {4..7}."""
    return DeviceTopology.from_hubs([[0, 1, 2, 3], [4, 5, 6, 7]])


@pytest.fixture
def topology_file(tmp_path: Path) -> Path:
    path = tmp_path / "topology.txt"
    path.write_text("# two hubs\n4\n1100\n1100\n0011\n0011\n")
    return path
