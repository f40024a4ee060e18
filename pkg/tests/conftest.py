import pytest

from freqsplit.circuit import CircuitConfig
from freqsplit.converter import ConverterParams


@pytest.fixture
def params():
    return ConverterParams()


@pytest.fixture
def config():
    return CircuitConfig()


@pytest.fixture
def quiet_params():
    """Calibrated converter with every noise source switched off."""
    return ConverterParams(kappa_tel=0.0, kappa_vis2=0.0, kappa_vis1=0.0,
                           leak0=0.0, leak1=0.0)
