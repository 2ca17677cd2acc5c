import numpy as np
import pytest

from blipsim.fields import ArrayField, BernoulliField, GeometricField, ModelParams, RngSpec


# Marks of the 8 x 8 example field where L(7, 8) = 5
CHAIN_MARKS = [
    (1, 2), (1, 4), (1, 5), (1, 7),
    (2, 1), (2, 3), (2, 5),
    (3, 4), (3, 6),
    (4, 2),
    (5, 1), (5, 3), (5, 5), (5, 7),
    (6, 1),
    (7, 2), (7, 5), (7, 8),
    (8, 2), (8, 5),
]

# Marked squares of the 10 x 10 R-process example, by row t = 0..9
R_MARKS = {
    0: [5, 6, 8, 9],
    1: [2, 8, 9],
    2: [1, 4, 9],
    3: [2, 4, 6, 8],
    4: [1, 5, 7, 9, 10],
    5: [3, 8, 10],
    6: [1, 2, 3, 5],
    7: [3, 9],
    8: [2, 4, 9],
    9: [7, 9],
}

# Occupied sites 1..10 of the same example at each time
R_SITES = {
    0: list(range(1, 11)),
    1: [1, 2, 3, 4, 6, 7, 8, 9, 10],
    2: [1, 3, 4, 5, 6, 7, 9, 10],
    3: [2, 3, 5, 6, 7, 8, 10],
    4: [3, 4, 5, 7, 8, 9, 10],
    5: [3, 4, 6, 8, 9, 10],
    6: [4, 5, 6, 9, 10],
    7: [4, 6, 7, 9, 10],
    8: [4, 6, 7, 10],
    9: [5, 6, 7, 10],
}


@pytest.fixture
def chain_field():
    return ArrayField.from_sites(CHAIN_MARKS, 8, 8)


@pytest.fixture
def r_marks():
    # Columns past 10 are not drawn and left unmarked
    values = np.zeros((10, 40), dtype=np.uint8)
    for t, sites in R_MARKS.items():
        values[t, np.asarray(sites) - 1] = 1
    return values


@pytest.fixture
def r_field(r_marks):
    return ArrayField(r_marks, min_row=0)


@pytest.fixture
def bernoulli():
    def make(p, seed, stream=0):
        return BernoulliField(ModelParams(p), RngSpec(seed, stream))
    return make


@pytest.fixture
def geometric():
    def make(p, seed, stream=0, convention="shifted"):
        return GeometricField(ModelParams(p), RngSpec(seed, stream), convention)
    return make


@pytest.fixture
def mostly():
    """At least two of three independent p-values above level."""

    def check(pvalues, level=0.01):
        return sum(pv > level for pv in pvalues) >= 2
    return check
