import numpy as np
import pytest
from hypothesis import settings

# fixed example database off and derandomized so runs repeat exactly
settings.register_profile("repo", derandomize=True, deadline=None, max_examples=40, database=None)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
