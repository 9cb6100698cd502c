import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from equilibra.equilibria import REProblem
from equilibra.forcelaw import ForceLaw
from equilibra.geometry import SpaceForm, planar_generator, validate_generator
from equilibra import seeds

settings.register_profile(
    "equilibra", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("equilibra")

FLAT2 = SpaceForm("flat", 2)
S2 = SpaceForm("sphere", 2)
H2 = SpaceForm("hyperboloid", 2)


def seed_problem(name, law=None, **kw):
    space, m, G, P = seeds.named_seed(name, **kw)
    gen = validate_generator(G, space)
    if not space.curved and law is None:
        law = ForceLaw.newtonian()
    return REProblem(space, m, gen, None if space.curved else law), P


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def flat_gen():
    return validate_generator(planar_generator(1.0), FLAT2)
