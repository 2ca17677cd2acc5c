import math

import numpy as np
import pytest

from blipsim.fields import (ArrayField, FieldDomainError, GeometricField, ModelParams, RngSpec, jump_draws, mark_at,
                            parse_seed, shift_to_corner_indexing, weight_at)
from blipsim.montecarlo import chi_square_gof, geometric_law
from blipsim.passage import blip_table


@pytest.mark.parametrize("value, expected", [
    (7, 7),
    ("42", 42),
    ("0x2a", 42),
    (" 0X10 ", 16),
    (2 ** 64 - 1, 2 ** 64 - 1),
])
def test_parse_seed(value, expected):
    assert parse_seed(value) == expected


@pytest.mark.parametrize("value", ["abc", "-1", -1, 2 ** 64, True, 1.5])
def test_parse_seed_rejects(value):
    with pytest.raises(FieldDomainError):
        parse_seed(value)


@pytest.mark.parametrize("p", [-0.1, 1.1, float("nan")])
def test_model_params_range(p):
    with pytest.raises(FieldDomainError):
        ModelParams(p)


def test_model_params_open_interval():
    assert ModelParams(0.3).q == pytest.approx(0.7)
    assert ModelParams(0.3).check_open().p == 0.3
    for p in (0.0, 1.0):
        with pytest.raises(FieldDomainError):
            ModelParams(p).check_open()


@pytest.mark.parametrize("p, expected", [(1.0, 1), (0.0, 0)])
def test_degenerate_marks(bernoulli, p, expected):
    field = bernoulli(p, 3)
    assert np.all(field.block(1, 30, 1, 30) == expected)
    assert mark_at(field, (3, 5)) == expected


def test_site_values_do_not_depend_on_query_order(bernoulli):
    field = bernoulli(0.5, 11, 4)
    first = mark_at(field, (3, 5))

    # Generate a disjoint region, then replay the site
    field.block(100, 200, 100, 200)
    assert mark_at(field, (3, 5)) == first

    whole = field.block(1, 21, 1, 21)
    order = np.random.default_rng(0).permutation(400)
    for s in order:
        i, j = 1 + s % 20, 1 + s // 20
        assert field.mark_at((i, j)) == whole[j - 1, i - 1]


def test_block_tiles_agree(geometric):
    field = geometric(0.6, 5)
    whole = field.block(1, 41, 1, 31)
    assert np.array_equal(whole[10:20, 5:25], field.block(6, 26, 11, 21))


def test_streams_and_seeds_are_independent(bernoulli):
    a = bernoulli(0.5, 1, 0).block(1, 65, 1, 65)
    b = bernoulli(0.5, 1, 1).block(1, 65, 1, 65)
    c = bernoulli(0.5, 2, 0).block(1, 65, 1, 65)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_shifted_is_unshifted_plus_one(geometric):
    shifted = geometric(0.7, 9).block(1, 50, 1, 50)
    unshifted = geometric(0.7, 9, convention="unshifted").block(1, 50, 1, 50)
    assert np.array_equal(shifted, unshifted + 1)
    assert shifted.min() >= 1


def test_unshifted_weights_vanish_at_p_zero(geometric):
    field = geometric(0.0, 9, convention="unshifted")
    assert np.all(field.block(1, 40, 1, 40) == 0)
    assert weight_at(field, (2, 2)) == 0


def test_geometric_rejects_p_one():
    with pytest.raises(FieldDomainError):
        GeometricField(ModelParams(1.0), RngSpec(1))
    with pytest.raises(FieldDomainError):
        GeometricField(ModelParams(0.5), RngSpec(1), "sideways")


def test_shifted_weight_mean(geometric):
    values = geometric(0.5, 21).block(1, 317, 1, 317)
    se = math.sqrt(2.0 / values.size)
    assert abs(values.mean() - 2.0) <= 3 * se


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_mark_distribution(bernoulli, mostly, p):
    pvalues = []
    for seed in (1, 2, 3):
        marks = bernoulli(p, seed).block(1, 317, 1, 317)
        ones = int(marks.sum())
        _, pvalue = chi_square_gof([marks.size - ones, ones], [1 - p, p])
        pvalues.append(pvalue)
    assert mostly(pvalues)


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_geometric_distribution(geometric, mostly, p):
    pvalues = []
    for seed in (1, 2, 3):
        values = geometric(p, seed, convention="unshifted").block(1, 317, 1, 317)
        counts = np.bincount(np.minimum(values.ravel(), 11), minlength=12)
        _, pvalue = chi_square_gof(counts, geometric_law(ModelParams(p), 12))
        pvalues.append(pvalue)
    assert mostly(pvalues)


@pytest.mark.parametrize("block", [(0, 3, 1, 3), (1, 3, 0, 3), (1, 3, -2, 0)])
def test_domain_errors(bernoulli, block):
    with pytest.raises(FieldDomainError):
        bernoulli(0.5, 1).block(*block)


def test_inverted_block(bernoulli):
    with pytest.raises(FieldDomainError):
        bernoulli(0.5, 1).block(5, 3, 1, 2)


def test_array_field_extent():
    field = ArrayField.from_sites([(2, 3)], 4, 5)
    assert field.value_at((2, 3)) == 1
    assert field.value_at((3, 2)) == 0
    with pytest.raises(FieldDomainError):
        field.block(1, 6, 1, 2)
    with pytest.raises(FieldDomainError):
        field.check_width(5)


def test_corner_indexing_moves_rows_down(chain_field):
    shifted = shift_to_corner_indexing(chain_field)
    assert shifted.min_row == 0
    assert shifted.value_at((4, 1)) == chain_field.value_at((4, 2))
    assert shifted.value_at((5, 0)) == chain_field.value_at((5, 1)) == 1
    with pytest.raises(FieldDomainError):
        shifted.value_at((1, -1))


def test_corner_indexed_lengths(bernoulli):
    field = bernoulli(0.4, 8)
    shifted = field.shifted()
    assert np.array_equal(blip_table(shifted, 8, 7), blip_table(field, 8, 8)[:, 1:])


def test_empty_field_stays_empty():
    field = ArrayField(np.zeros((6, 6), dtype=np.uint8))
    assert not field.shifted().block(1, 7, 0, 5).any()


def test_jump_draws_read_unmarked_sites(bernoulli):
    field = bernoulli(0.3, 5)
    draws = jump_draws(field, 7, 9)
    assert draws.shape == (7, 9)
    assert draws[2, 4] == (field.mark_at((3, 5)) == 0)
