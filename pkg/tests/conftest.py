import numpy as np
import pytest

from propshare import _backend


@pytest.fixture(params=_backend.available())
def backend(request):
    """Run the test once per available kernel backend."""
    previous = _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


from hypothesis import settings as _settings

_settings.register_profile("default", deadline=None)
_settings.load_profile("default")
