import numpy as np
import pytest

from ctcea.data import Covariate, CovariateSchema, Encounter, EventType, Trajectory, Cohort
from ctcea.model import DgpConfig, dgp_schema
from ctcea.simgen import simulate_cohort


@pytest.fixture(scope="session")
def schema():
    return dgp_schema()


@pytest.fixture(scope="session")
def small_cohort(schema):
    return simulate_cohort(DgpConfig(n=40), seed=7)


@pytest.fixture(scope="session")
def tiny_cohort(schema):
    return simulate_cohort(DgpConfig(n=10), seed=11)


def make_encounter(j, w, delta, cov, z=0, a=0, y=1.0):
    return Encounter(j=j, w=w, delta=EventType(delta), covariates=np.asarray(cov, float),
                     z=z, a=a, y=y)


@pytest.fixture(scope="session")
def toy_schema():
    return CovariateSchema(covariates=(
        Covariate("X1", "continuous", False),
        Covariate("B1", "continuous", True),
    ))


@pytest.fixture(scope="session")
def toy_cohort(toy_schema):
    """Two patients: a death after two visits and a censored singleton."""
    t1 = Trajectory(
        patient_id="p1",
        l0=np.array([0.5]),
        encounters=(
            make_encounter(1, 0.4, 1, [1.0, 0.5], z=0, a=0, y=2.0),
            make_encounter(2, 0.7, 1, [-0.3, 0.5], z=1, a=1, y=1.5),
            make_encounter(3, 0.2, 2, [0.1, 0.5], z=1, a=1, y=4.0),
        ),
    )
    t2 = Trajectory(
        patient_id="p2",
        l0=np.array([-1.0]),
        encounters=(make_encounter(1, 1.1, 0, [0.2, -1.0], z=0, a=0, y=0.7),),
    )
    return Cohort(trajectories=(t1, t2), schema=toy_schema)
