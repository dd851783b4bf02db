import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import safeik


@pytest.fixture(scope="session")
def arm():
    return safeik.load_bundled_robot()


def random_configs(model, rng, count, margin=0.25):
    """Uniformly sampled configurations strictly inside the joint limits."""
    lo = model.limits_lower + margin
    hi = model.limits_upper - margin
    return rng.uniform(lo, hi, size=(count, model.n))
