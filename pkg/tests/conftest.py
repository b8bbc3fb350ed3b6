import pytest

from ringdec.constants import CODATA2018
from ringdec.model import RingParams
from ringdec.spectrum import assemble_thin_spectrum, linearize


@pytest.fixture(scope="session")
def ring80():
    """The N=80 configuration used throughout the decoherence figures."""
    return RingParams(N=80, m=40 * CODATA2018.m_p, kappa=1e-13, R=0.5e-6,
                      T=1.21e-7)


@pytest.fixture(scope="session")
def spec80(ring80):
    """Assembled thin spectrum for ring80 (temperature-independent)."""
    return assemble_thin_spectrum(ring80, n_max=40, alpha_max=1)


@pytest.fixture(scope="session")
def coeffs80(spec80):
    return linearize(spec80)
