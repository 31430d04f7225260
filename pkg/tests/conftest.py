import numpy as np
import pytest

from adaptive_lq.core.lq_design import AugmentedSystem, PlantModel, augment, make_weights
from adaptive_lq.exceptions import ControllabilityError
from adaptive_lq.presets import get_preset
from adaptive_lq.simulation import build_system


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def sec4_1():
    return get_preset("sec4_1")


@pytest.fixture
def sec4_2():
    return get_preset("sec4_2")


@pytest.fixture
def sec4_1_system(sec4_1):
    return build_system(sec4_1)


@pytest.fixture
def sec4_2_system(sec4_2):
    return build_system(sec4_2)


def random_augmented_system(rng: np.random.Generator, n_p: int, vartheta: float = 1.0) -> AugmentedSystem:
    """Random single-input plant whose integral augmentation is controllable."""
    while True:
        plant = PlantModel(
            a_p=0.5 * rng.standard_normal((n_p, n_p)),
            b_p=rng.standard_normal((n_p, 1)),
            c_p=rng.standard_normal((n_p, 1)),
        )
        try:
            return augment(plant, vartheta)
        except ControllabilityError:
            continue


def unit_weights(n: int, m: int = 1):
    return make_weights(np.eye(n), np.eye(m))


def multisine(t: float, freqs, amplitude: float = 1.0) -> float:
    return amplitude * sum(np.sin(f * t + 0.3 * i) for i, f in enumerate(freqs))
