import numpy as np
import pytest

from gatedepth.estimators import build_section_table
from gatedepth.gating import SPEED_OF_LIGHT_M_PER_NS, standard_slices


@pytest.fixture(scope="session")
def slices():
    return standard_slices()


@pytest.fixture(scope="session")
def section_table(slices):
    return build_section_table(slices)


def rect_overlap_oracle(pulse_ns, gate_ns, delay_ns, r_m):
    """Independent interval-intersection oracle for rectangular shapes."""
    tau = 2.0 * r_m / SPEED_OF_LIGHT_M_PER_NS
    gate_open = pulse_ns + delay_ns
    lo = max(tau, gate_open)
    hi = min(tau + pulse_ns, gate_open + gate_ns)
    return max(0.0, hi - lo)
