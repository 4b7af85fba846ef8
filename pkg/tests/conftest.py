import numpy as np
import pytest

from gafi import (
    Dataset,
    FilterPolicy,
    GenerationQuota,
    SplitSpec,
    TrainingBudget,
    fit_classifier,
    fit_gmm_generator,
    make_rings,
    split,
)

# Small-scale rings problem shared by the model/filter/pipeline unit tests.
# The acceptance suite builds the full benchmark separately.


@pytest.fixture(scope="session")
def small_rings():
    return make_rings(2, 400, [1.0, 2.0], 0.15, seed=11)


@pytest.fixture(scope="session")
def small_split(small_rings):
    return split(small_rings, SplitSpec(0.75, seed=7))


@pytest.fixture(scope="session")
def small_budget():
    return TrainingBudget(epochs=20, batch_size=64, learning_rate=0.1,
                          decay_epochs=(12, 16), decay_factor=0.1, momentum=0.9)


@pytest.fixture(scope="session")
def small_checkpoints(small_split):
    train, _ = small_split
    return fit_gmm_generator(train, components_per_class=1, em_iterations=6, seed=5)


@pytest.fixture(scope="session")
def small_oracle(small_split, small_budget):
    train, _ = small_split
    return fit_classifier("mlp", train, small_budget, seed=13)


@pytest.fixture(scope="session")
def small_quota(small_split):
    train, _ = small_split
    return GenerationQuota.from_dataset(train)


class PassThroughOracle:
    """Assigns probability 1 to a fixed target class; samples conditioned on
    that class therefore always pass the filter."""

    def __init__(self, num_classes: int, target: int):
        self.num_classes = num_classes
        self.target = target

    def predict_proba(self, X):
        X = np.asarray(X)
        out = np.zeros((X.shape[0], self.num_classes))
        out[:, self.target] = 1.0
        return out

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class RadialOracle:
    """Geometry-aware oracle for the two-ring benchmark: class by radius with
    a tunable soft margin; predict = argmax of predict_proba."""

    def __init__(self, boundary: float = 1.5, sharpness: float = 8.0):
        self.boundary = boundary
        self.sharpness = sharpness

    def predict_proba(self, X):
        r = np.linalg.norm(np.asarray(X, dtype=float), axis=1)
        p1 = 1.0 / (1.0 + np.exp(-self.sharpness * (r - self.boundary)))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


@pytest.fixture
def pass_oracle():
    return PassThroughOracle


@pytest.fixture
def radial_oracle():
    return RadialOracle()
