"""Longest increasing paths on marked sites and last-passage times.

Both quantities are computed by a rolling-row sweep over the field, one block of
rows at a time, so memory stays proportional to the rectangle width.
"""

from dataclasses import dataclass
from blipsim.fields import ModelParams

import csv
import math

import numba as nb
import numpy as np


# Cells materialized per block of rows
_BLOCK_CELLS = 1 << 20


class PassageError(Exception):
    pass


class PassageDomainError(PassageError, ValueError):
    pass


@dataclass(frozen=True)
class ShapeQuery:
    x: float
    y: float
    params: ModelParams

    def __post_init__(self):
        if not (self.x >= 0 and self.y >= 0):
            raise PassageDomainError(f"Shape coordinates must be non-negative, got ({self.x}, {self.y}).")


@nb.njit(cache=True, nogil=True)
def _blip_sweep(block, row):
    m = row.shape[0] - 1
    for r in range(block.shape[0]):
        # diag holds L(i - 1, j - 1) while row[i - 1] already holds L(i - 1, j)
        diag = 0
        for i in range(1, m + 1):
            up = row[i]
            best = max(row[i - 1], up)
            cand = diag + block[r, i - 1]
            if cand > best:
                best = cand
            diag = up
            row[i] = best


@nb.njit(cache=True, nogil=True)
def _lpp_sweep(block, row):
    m = row.shape[0] - 1
    for r in range(block.shape[0]):
        for i in range(1, m + 1):
            row[i] = max(row[i - 1], row[i]) + block[r, i - 1]


def _check_size(field, m, n):
    if m < 1 or n < field.min_row:
        raise PassageDomainError(f"Invalid rectangle size ({m}, {n}).")


def _row_blocks(field, m, n, rows_per_block=None):
    """Iterate over blocks of rows min_row..n covering columns 1..m.

    :returns: Generator of (first row index, block)
    """

    step = rows_per_block or max(1, _BLOCK_CELLS // m)
    for j0 in range(field.min_row, n + 1, step):
        yield j0, field.block(1, m + 1, j0, min(j0 + step, n + 1))


def _sweep(kernel, field, m, n):
    _check_size(field, m, n)
    row = np.zeros(m + 1, dtype=np.int64)
    for _, block in _row_blocks(field, m, n):
        kernel(block, row)
    return row


def _sweep_table(kernel, field, m, n):
    _check_size(field, m, n)
    row = np.zeros(m + 1, dtype=np.int64)
    table = np.zeros((m + 1, n + 1), dtype=np.int64)
    for j0, block in _row_blocks(field, m, n):
        for r in range(block.shape[0]):
            kernel(block[r:r + 1], row)
            table[:, j0 + r] = row
    return table


def blip_length(field, m, n):
    """Maximum number of marked sites on a strictly increasing path in [m] x [n].

    On a corner-indexed field (rows from 0) this is L'(m, n) = L(m, n + 1).

    :returns: Integer between 0 and min(m, n)
    :raises: PassageDomainError on a non-positive size
    """

    return int(_sweep(_blip_sweep, field, m, n)[m])


def blip_row(field, m, n):
    """L(i, n) for i = 1..m.

    :returns: numpy int64 vector of length m
    """

    return _sweep(_blip_sweep, field, m, n)[1:].copy()


def blip_table(field, m, n):
    """Whole BLIP table; table[i, j] is the value at (i, j).

    Column 0 and row 0 hold the zero boundary, except on corner-indexed fields
    where column 0 is the genuine row t = 0.
    """

    return _sweep_table(_blip_sweep, field, m, n)


def corner_growth(field, m, n):
    """Last-passage time G(m, n) over up-right paths from (1, 1).

    :returns: Integer path weight
    :raises: PassageDomainError on a non-positive size
    """

    return int(_sweep(_lpp_sweep, field, m, n)[m])


def corner_growth_table(field, m, n):
    return _sweep_table(_lpp_sweep, field, m, n)


def corner_growth_from(field, start, end):
    """Last-passage time G((k, l), (m, n)) over the sub-rectangle [k, m] x [l, n].

    :raises: PassageDomainError unless (1, 1) <= start <= end
    """

    k, l = start
    m, n = end
    if not (1 <= k <= m and 1 <= l <= n):
        raise PassageDomainError(f"Start {start} is not below end {end}.")

    return corner_growth(field.translated(k - 1, l - 1), m - k + 1, n - l + 1)


def patient_strategy(field, n, width_cap):
    """Greedy strictly increasing path, one mark per row.

    Row j is scanned rightward from just after the previous pick up to the
    width cap; the walk stops at the first row with nothing left to pick.

    :returns: Tuple (list of picked sites, number of rows served)
    """

    if n < 1 or width_cap < 1:
        raise PassageDomainError(f"Invalid patient strategy bounds n={n}, width_cap={width_cap}.")

    path = []
    last = 0
    for j in range(1, n + 1):
        if last >= width_cap:
            break
        hits = np.flatnonzero(field.block(last + 1, width_cap + 1, j, j + 1)[0])
        if hits.size == 0:
            break
        last += 1 + int(hits[0])
        path.append((last, j))

    return path, len(path)


def psi(query):
    """Shape function of the BLIP model at (x, y)."""

    x, y, p = query.x, query.y, query.params.p
    q = 1.0 - p

    if x < p * y:
        return float(x)
    if y < p * x:
        return float(y)

    # With p = 1 the middle branch reduces to the diagonal x = y
    if q == 0.0:
        return float(min(x, y))
    return (2.0 * math.sqrt(p * x * y) - p * (x + y)) / q


def phi(x, y, mean, variance):
    """Shape function of last-passage percolation with i.i.d. weights."""

    if variance < 0:
        raise PassageDomainError(f"Negative variance {variance}.")
    if x < 0 or y < 0:
        raise PassageDomainError(f"Shape coordinates must be non-negative, got ({x}, {y}).")

    return (x + y) * mean + 2.0 * math.sqrt(variance * x * y)


def soft_edge_constant(params, x):
    """Limit of (n - L) / n^(2a - 1) in the supercritical soft-edge window."""

    if params.q == 0.0:
        return 0.0 if x == 0 else math.inf
    return (params.p * x) ** 2 / (4.0 * params.q)


def geometric_moments(params):
    """Mean and variance of the shifted geometric weight Y.

    :returns: Tuple (mean, variance)
    """

    return 1.0 / params.q, params.p / params.q ** 2


def write_table_csv(table, f, min_row=1):
    """Dump a table as "i,j,value" rows, skipping the zero boundary.

    :table: Table as returned by blip_table or corner_growth_table
    :f: Text file object
    :min_row: First genuine row of the field the table was computed on
    """

    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(["i", "j", "value"])
    for i in range(1, table.shape[0]):
        for j in range(min_row, table.shape[1]):
            writer.writerow([i, j, int(table[i, j])])
