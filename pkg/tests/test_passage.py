import io
import itertools
import math

import numpy as np
import pytest

from blipsim.fields import ArrayField, ModelParams
from blipsim.montecarlo import compare_samples
from blipsim.passage import (PassageDomainError, ShapeQuery, blip_length, blip_row, blip_table, corner_growth,
                             corner_growth_from, corner_growth_table, patient_strategy, phi, psi, soft_edge_constant,
                             write_table_csv)


def longest_chain(marks):
    """Longest chain of sites strictly increasing in both coordinates."""

    marks = sorted(marks)
    best = []
    for a, (i, j) in enumerate(marks):
        best.append(1 + max([best[b] for b in range(a) if marks[b][0] < i and marks[b][1] < j], default=0))
    return max(best, default=0)


def best_path(weights):
    """Heaviest up-right path, by enumerating every path."""

    n, m = weights.shape
    best = 0
    for ups in itertools.combinations(range(m + n - 2), n - 1):
        i = j = 0
        total = weights[0, 0]
        for step in range(m + n - 2):
            if step in ups:
                j += 1
            else:
                i += 1
            total += weights[j, i]
        best = max(best, total)
    return best


def test_no_marks():
    field = ArrayField(np.zeros((9, 7), dtype=np.uint8))
    assert blip_length(field, 7, 9) == 0
    assert not blip_row(field, 7, 9).any()


@pytest.mark.parametrize("m, n", [(1, 1), (5, 9), (9, 5), (8, 8)])
def test_all_marked(m, n):
    field = ArrayField(np.ones((n, m), dtype=np.uint8))
    assert blip_length(field, m, n) == min(m, n)


def test_hand_drawn_field(chain_field):
    assert blip_length(chain_field, 7, 8) == 5


def test_random_fields_against_chains(bernoulli):
    for stream in range(50):
        field = bernoulli(0.5, 17, stream)
        values = field.block(1, 7, 1, 7)
        marks = [(i + 1, j + 1) for j, i in zip(*np.nonzero(values))]
        assert blip_length(field, 6, 6) == longest_chain(marks)


@pytest.mark.slow
def test_every_4x4_field():
    for code in range(1 << 16):
        bits = np.array([(code >> b) & 1 for b in range(16)], dtype=np.uint8).reshape(4, 4)
        marks = [(i + 1, j + 1) for j, i in zip(*np.nonzero(bits))]
        assert blip_length(ArrayField(bits), 4, 4) == longest_chain(marks)


def test_blip_row_matches_lengths(bernoulli):
    field = bernoulli(0.4, 2)
    row = blip_row(field, 30, 30)
    rng = np.random.default_rng(1)
    for i, n in zip(rng.integers(1, 31, 20), rng.integers(1, 31, 20)):
        assert blip_row(field, 30, int(n))[i - 1] == blip_length(field, int(i), int(n))
    assert np.all(np.diff(row) >= 0)


def test_table_invariants(bernoulli):
    table = blip_table(bernoulli(0.5, 6), 25, 20)
    assert np.all(np.diff(table, axis=0) >= 0)
    assert np.all(np.diff(table, axis=1) >= 0)
    i, j = np.meshgrid(np.arange(26), np.arange(21), indexing="ij")
    assert np.all(table <= np.minimum(i, j))


def test_superadditive_under_translation(bernoulli):
    for stream in range(10):
        field = bernoulli(0.5, 4, stream)
        lower = blip_length(field, 8, 6)
        upper = blip_length(field.translated(8, 6), 7, 9)
        assert lower + upper <= blip_length(field, 15, 15)


def test_size_errors(bernoulli):
    with pytest.raises(PassageDomainError):
        blip_length(bernoulli(0.5, 1), 0, 5)
    with pytest.raises(PassageDomainError):
        corner_growth(bernoulli(0.5, 1), 5, 0)


def test_single_site():
    field = ArrayField(np.array([[7]], dtype=np.int64))
    assert corner_growth(field, 1, 1) == 7


@pytest.mark.parametrize("m, n", [(1, 1), (4, 9), (12, 3)])
def test_unit_weights(m, n):
    field = ArrayField(np.ones((n, m), dtype=np.int64))
    assert corner_growth(field, m, n) == m + n - 1


def test_corner_growth_against_paths(geometric):
    for stream in range(20):
        field = geometric(0.5, 8, stream)
        assert corner_growth(field, 5, 5) == best_path(field.block(1, 6, 1, 6))


def test_corner_growth_lower_bound(geometric):
    table = corner_growth_table(geometric(0.3, 2), 15, 12)
    i, j = np.meshgrid(np.arange(16), np.arange(13), indexing="ij")
    assert np.all(table[1:, 1:] >= (i + j - 1)[1:, 1:])


def test_corner_growth_from(geometric):
    field = geometric(0.5, 3)
    assert corner_growth_from(field, (6, 4), (6, 4)) == field.weight_at((6, 4))
    assert corner_growth_from(field, (1, 1), (9, 7)) == corner_growth(field, 9, 7)

    whole = corner_growth(field, 12, 10)
    for k, l in [(3, 4), (6, 2), (12, 10), (1, 10)]:
        split = corner_growth(field, k, l) + corner_growth_from(field, (k, l), (12, 10)) - field.weight_at((k, l))
        assert whole >= split

    with pytest.raises(PassageDomainError):
        corner_growth_from(field, (5, 5), (4, 6))


def test_transposed_rectangles_share_a_law(geometric):
    wide = [corner_growth(geometric(0.5, 30, s), 12, 3) for s in range(200)]
    tall = [corner_growth(geometric(0.5, 31, s), 3, 12) for s in range(200)]
    comparison = compare_samples(wide, tall)
    assert abs(comparison.mean_diff) <= 3 * comparison.se


def test_patient_strategy_degenerate():
    full = ArrayField(np.ones((6, 10), dtype=np.uint8))
    path, weight = patient_strategy(full, 6, 10)
    assert path == [(k, k) for k in range(1, 7)]
    assert weight == 6

    empty = ArrayField(np.zeros((6, 10), dtype=np.uint8))
    assert patient_strategy(empty, 6, 10) == ([], 0)


def test_patient_strategy_is_a_path(bernoulli):
    for stream in range(20):
        field = bernoulli(0.5, 12, stream)
        path, weight = patient_strategy(field, 20, 30)
        assert weight <= blip_length(field, 30, 20)
        assert all(field.mark_at(v) == 1 for v in path)
        assert all(a[0] < b[0] and a[1] < b[1] for a, b in zip(path, path[1:]))


def test_patient_strategy_bounds(bernoulli):
    with pytest.raises(PassageDomainError):
        patient_strategy(bernoulli(0.5, 1), 0, 5)


@pytest.mark.slow
def test_patient_strategy_serves_most_rows(bernoulli):
    n = 1000
    cap = math.floor(n / 0.5 + 4 * math.sqrt(n))
    weights = [patient_strategy(bernoulli(0.5, 40, s), n, cap)[1] for s in range(100)]
    assert sum(w == n for w in weights) > 50
    assert min(weights) > 0.9 * n


@pytest.mark.parametrize("x, y, p, expected", [
    (2.0, 1.0, 0.5, 1.0),
    (4.0, 1.0, 0.5, 1.0),
    (1.0, 1.0, 0.25, 2.0 / 3.0),
    (1.0, 1.0, 0.5, 2 * (math.sqrt(0.5) - 0.5) / 0.5),
    (0.2, 1.0, 0.5, 0.2),
])
def test_psi(x, y, p, expected):
    assert psi(ShapeQuery(x, y, ModelParams(p))) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_psi_branches_meet(p):
    params = ModelParams(p)
    y = 1.7
    x = p * y
    middle = (2 * math.sqrt(p * x * y) - p * (x + y)) / (1 - p)
    assert middle == pytest.approx(x, abs=1e-12)
    assert psi(ShapeQuery(x, y, params)) == pytest.approx(psi(ShapeQuery(y, x, params)), abs=1e-12)


def test_psi_degenerate_p():
    assert psi(ShapeQuery(1.0, 1.0, ModelParams(1.0))) == 1.0
    assert psi(ShapeQuery(3.0, 1.0, ModelParams(1.0))) == 1.0


def test_shape_query_rejects_negative():
    with pytest.raises(PassageDomainError):
        ShapeQuery(-1.0, 1.0, ModelParams(0.5))


def test_phi():
    assert phi(1, 0, 2.5, 3.0) == 2.5
    assert phi(1, 1, 1, 1) == 4
    assert phi(0.3, 2.2, 1.5, 0.7) == pytest.approx(phi(2.2, 0.3, 1.5, 0.7))
    with pytest.raises(PassageDomainError):
        phi(1, 1, 1, -1)


@pytest.mark.parametrize("p, x, expected", [(0.5, 0.0, 0.0), (0.5, 1.0, 0.125), (0.5, 2.0, 0.5)])
def test_soft_edge_constant(p, x, expected):
    assert soft_edge_constant(ModelParams(p), x) == pytest.approx(expected)


def test_write_table_csv(chain_field):
    f = io.StringIO()
    write_table_csv(blip_table(chain_field, 2, 2), f)
    lines = f.getvalue().splitlines()
    assert lines[0] == "i,j,value"
    assert lines[1:] == ["1,1,0", "1,2,1", "2,1,1", "2,2,1"]
