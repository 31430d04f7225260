# File: adaptive_lq/presets.py
"""
Built-in scenarios.

sec4_1 is a second-order plant whose Hamiltonian eigenvalues are close together,
so P can be read at a long horizon (tau_inf = 7). sec4_2 is a third-order plant
with a widely spread spectrum; vartheta = 100 narrows it enough for tau_inf = 1.

k1 and rho are large. det(phibar_f) of the (n+m+1) x (n+m+1) mixing Gram
matrix is tiny over the excitation window, and k1 scales it so that phi lands
near 0.5..0.99 there. Delta is a high power of determinants of
phi^(2p) exp(D tau_inf) blocks, so Omega reaches 1e35 only once the excitation
has propagated through the whole chain.
"""
import logging
from typing import Dict

from .exceptions import ParameterError
from .schemas.enums import ReferenceKind
from .schemas.scenario import (
    AdaptGains,
    PipelineParams,
    PlantSpec,
    ReferenceSpec,
    Scenario,
    WeightsSpec,
)

logger = logging.getLogger(__name__)


def _identity(n: int) -> list:
    return [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]


def _sec4_1() -> Scenario:
    return Scenario(
        name="sec4_1",
        plant=PlantSpec(
            a_p=[[0.0, 1.0], [-1.0, -1.0]],
            b_p=[[0.0], [1.0]],
            c_p=[[1.0], [0.0]],
        ),
        vartheta=1.0,
        weights=WeightsSpec(q=_identity(3), r=[[1.0]]),
        pipeline=PipelineParams(l=2.5, k0=10.0, k1=1.8e35, sigma=5.0 / 7.0, p=35, tau_inf=7.0),
        gains=AdaptGains(gamma0=1.0, gamma1=10.0, rho=1e35),
        theta_hat0=[[0.1], [0.1], [0.1], [0.1]],
        x0=[-1.0, 1.0, 0.0],
        reference=ReferenceSpec(kind=ReferenceKind.EXPONENTIAL, value=[1.0], rate=7.0),
        duration=10.0,
        dt=1e-4,
    )


def _sec4_2() -> Scenario:
    return Scenario(
        name="sec4_2",
        plant=PlantSpec(
            a_p=[[0.0, 1.0, 0.0], [0.0, 0.0, 4.438], [0.0, -12.0, -24.0]],
            b_p=[[0.0], [0.0], [20.0]],
            c_p=[[1.0], [0.0], [0.0]],
        ),
        vartheta=100.0,
        weights=WeightsSpec(q=_identity(4), r=[[1.0]]),
        pipeline=PipelineParams(l=10.0, k0=10.0, k1=1.8e35, sigma=5.0 / 7.0, p=85, tau_inf=1.0),
        gains=AdaptGains(gamma0=1.0, gamma1=1.0, rho=1e35),
        theta_hat0=[[0.0], [0.0], [0.0], [0.0], [10.0]],
        x0=[0.0, 0.0, 0.0, 0.0],
        reference=ReferenceSpec(kind=ReferenceKind.CONSTANT, value=[1.0]),
        duration=10.0,
        dt=1e-4,
    )


def preset_scenarios() -> Dict[str, Scenario]:
    """Named built-in scenarios."""
    return {
        "sec4_1": _sec4_1(),
        "sec4_2": _sec4_2(),
    }


def get_preset(name: str) -> Scenario:
    presets = preset_scenarios()
    if name not in presets:
        raise ParameterError(f"Unknown preset '{name}', choose one of: {', '.join(sorted(presets))}")
    return presets[name]
