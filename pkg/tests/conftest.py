import math

import pytest

from eitcomb.model import MediumSpec, ModulationSpec, ProbeShape, ProbeSpec, Scenario


@pytest.fixture
def op_medium():
    """14 kHz transparency window at desk scale (1 MHz homogeneous width)."""
    return MediumSpec(gamma_hom=1e6, gamma_doppler=0.0, gamma_12=1e3,
                      rabi_coupling=math.sqrt(6e3 * 1e6))


@pytest.fixture
def op_modulation():
    return ModulationSpec(20.0, 5e3)


@pytest.fixture
def op_probe(op_medium):
    return ProbeSpec(shape=ProbeShape.SQUARE_PULSE, amplitude=1.0, turn_on=2e-4,
                     duration=1.3e-3, rabi_probe=op_medium.rabi_coupling / 20)


@pytest.fixture
def op_scenario(op_modulation, op_medium, op_probe):
    return Scenario(op_modulation, op_medium, op_probe)
