"""Random environments addressed by lattice coordinates.

Every site value is a keyed hash of (master seed, stream id, coordinates), so a
field is never materialized as a whole: consumers ask for rectangular blocks and
get the same values whatever order they ask in.
"""

from dataclasses import dataclass

import math

import numba as nb
import numpy as np


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_ROW = np.uint64(0xD1B54A32D192ED03)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_UNIT = 1.0 / 9007199254740992.0
_TINY = np.finfo(np.float64).tiny

_MASK64 = 0xFFFFFFFFFFFFFFFF

# Family salts keep Bernoulli marks and geometric weights of one RngSpec apart
_BERNOULLI_SALT = 0x42_4C_49_50
_GEOMETRIC_SALT = 0x47_45_4F_4D

CONVENTIONS = ("shifted", "unshifted")


class FieldError(Exception):
    pass


class FieldDomainError(FieldError, ValueError):
    pass


@nb.njit(cache=True, nogil=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@nb.njit(cache=True, nogil=True)
def _derive_key(seed, stream, salt):
    return _mix64(_mix64(seed ^ salt) ^ (stream * _GOLDEN))


@nb.njit(cache=True, nogil=True)
def _site_uniform(key, i, j):
    z = _mix64(key ^ (np.uint64(i) * _GOLDEN))
    z = _mix64(z ^ (np.uint64(j) * _ROW))
    return (z >> _S11) * _UNIT


@nb.njit(cache=True, nogil=True)
def _bernoulli_block(key, p, i0, i1, j0, j1):
    out = np.empty((j1 - j0, i1 - i0), dtype=np.uint8)
    for r in range(j1 - j0):
        for c in range(i1 - i0):
            out[r, c] = 1 if _site_uniform(key, i0 + c, j0 + r) < p else 0
    return out


@nb.njit(cache=True, nogil=True)
def _geometric_block(key, log_p, offset, i0, i1, j0, j1):
    out = np.empty((j1 - j0, i1 - i0), dtype=np.int64)
    for r in range(j1 - j0):
        for c in range(i1 - i0):
            u = max(_site_uniform(key, i0 + c, j0 + r), _TINY)
            out[r, c] = np.int64(np.floor(np.log(u) / log_p)) + offset
    return out


def parse_seed(value):
    """Parse a seed or stream id given as an int, a decimal or a 0x-prefixed string.

    :value: Value to parse
    :returns: Non-negative integer below 2**64
    :raises: FieldDomainError if the value cannot be parsed
    """

    if isinstance(value, bool):
        raise FieldDomainError(f'Invalid seed "{value}".')

    if isinstance(value, str):
        try:
            value = int(value.strip(), 0)
        except ValueError:
            raise FieldDomainError(f'Invalid seed "{value}".')

    if not isinstance(value, (int, np.integer)) or value < 0 or value > _MASK64:
        raise FieldDomainError(f'Seed "{value}" is not a 64-bit unsigned integer.')

    return int(value)


@dataclass(frozen=True)
class ModelParams:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0 or math.isnan(self.p):
            raise FieldDomainError(f"Mark probability p={self.p} is outside [0, 1].")

    @property
    def q(self):
        return 1.0 - self.p

    def check_open(self):
        """Reject the degenerate values p=0 and p=1.

        :returns: self
        :raises: FieldDomainError if p is not in (0, 1)
        """

        if not 0.0 < self.p < 1.0:
            raise FieldDomainError(f"Mark probability p={self.p} must lie in (0, 1).")
        return self


@dataclass(frozen=True)
class RngSpec:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "master_seed", parse_seed(self.master_seed))
        object.__setattr__(self, "stream_id", parse_seed(self.stream_id))

    def key(self, salt):
        return np.uint64(_derive_key(np.uint64(self.master_seed), np.uint64(self.stream_id), np.uint64(salt)))


class BaseField(object):
    """A lattice of integer site values.

    Blocks are half-open rectangles [i0, i1) x [j0, j1) returned as arrays
    indexed [j - j0, i - i0], one row of the lattice per array row.
    """

    min_row = 1
    extent = None

    def _block(self, i0, i1, j0, j1):
        raise NotImplementedError

    def block(self, i0, i1, j0, j1):
        """Materialize a rectangle of site values.

        :returns: 2-D numpy array of shape (j1 - j0, i1 - i0)
        :raises: FieldDomainError if the rectangle leaves the field's domain
        """

        if i1 < i0 or j1 < j0:
            raise FieldDomainError(f"Empty or inverted block [{i0}, {i1}) x [{j0}, {j1}).")
        if i1 > i0 and j1 > j0:
            if i0 < 1 or j0 < self.min_row:
                raise FieldDomainError(
                    f"Block [{i0}, {i1}) x [{j0}, {j1}) leaves the domain (i >= 1, j >= {self.min_row})."
                )
            if self.extent is not None and (i1 - 1 > self.extent[0] or j1 - 1 > self.extent[1]):
                raise FieldDomainError(
                    f"Block [{i0}, {i1}) x [{j0}, {j1}) exceeds the field extent {self.extent}."
                )
        return self._block(int(i0), int(i1), int(j0), int(j1))

    def value_at(self, v):
        i, j = v
        return int(self.block(i, i + 1, j, j + 1)[0, 0])

    def shifted(self):
        return CornerIndexedField(self)

    def translated(self, di, dj):
        return TranslatedField(self, di, dj)

    def check_width(self, width):
        """Make sure columns 1..width can be read.

        :raises: FieldDomainError if the field is narrower
        """

        if self.extent is not None and self.extent[0] < width:
            raise FieldDomainError(f"Field width {self.extent[0]} is below the required width {width}.")

    def describe(self):
        return {"seed": None, "stream": None, "p": None}


class BernoulliField(BaseField):

    def __init__(self, params, rng):
        self.params = params
        self.rng = rng
        self._key = rng.key(_BERNOULLI_SALT)

    def _block(self, i0, i1, j0, j1):
        return _bernoulli_block(self._key, self.params.p, i0, i1, j0, j1)

    def mark_at(self, v):
        return self.value_at(v)

    def describe(self):
        return {"seed": self.rng.master_seed, "stream": self.rng.stream_id, "p": self.params.p}


class GeometricField(BaseField):
    """Geometric weights by inverse CDF, floor(log U / log p).

    The unshifted convention lives on {0, 1, ...} with P(s) = q p^s, the shifted
    one on {1, 2, ...}; both read the same uniform at a site.
    """

    def __init__(self, params, rng, convention="shifted"):
        if convention not in CONVENTIONS:
            raise FieldDomainError(f'Unknown weight convention "{convention}".')
        if params.p >= 1.0:
            raise FieldDomainError("Geometric weights need p < 1.")

        self.params = params
        self.rng = rng
        self.convention = convention
        self._key = rng.key(_GEOMETRIC_SALT)
        self._log_p = -math.inf if params.p == 0.0 else math.log(params.p)
        self._offset = 1 if convention == "shifted" else 0

    def _block(self, i0, i1, j0, j1):
        return _geometric_block(self._key, self._log_p, self._offset, i0, i1, j0, j1)

    def weight_at(self, v):
        return self.value_at(v)

    def with_convention(self, convention):
        return GeometricField(self.params, self.rng, convention)

    def describe(self):
        return {"seed": self.rng.master_seed, "stream": self.rng.stream_id, "p": self.params.p}


class ArrayField(BaseField):
    """Explicit finite field; values[j - min_row, i - 1] is the value at (i, j)."""

    def __init__(self, values, min_row=1):
        self.values = np.ascontiguousarray(values)
        if self.values.ndim != 2:
            raise FieldDomainError("An array field needs a 2-D array.")
        self.min_row = min_row
        self.extent = (self.values.shape[1], min_row + self.values.shape[0] - 1)

    @classmethod
    def from_sites(cls, sites, width, height, value=1):
        """Build a 0/1 field of the given size marked at the listed sites.

        :sites: Iterable of (i, j) pairs with 1 <= i <= width, 1 <= j <= height
        :returns: ArrayField
        """

        values = np.zeros((height, width), dtype=np.uint8 if value == 1 else np.int64)
        for i, j in sites:
            values[j - 1, i - 1] = value
        return cls(values)

    def _block(self, i0, i1, j0, j1):
        return self.values[j0 - self.min_row:j1 - self.min_row, i0 - 1:i1 - 1]


class CornerIndexedField(BaseField):
    """The field seen with squares indexed by their lower-right corner.

    The value at (i, j) is the base value at (i, j + 1), so rows start at 0.
    """

    def __init__(self, base):
        self.base = base
        self.min_row = base.min_row - 1
        if base.extent is not None:
            self.extent = (base.extent[0], base.extent[1] - 1)

    def _block(self, i0, i1, j0, j1):
        return self.base.block(i0, i1, j0 + 1, j1 + 1)

    def describe(self):
        return self.base.describe()


class TranslatedField(BaseField):

    def __init__(self, base, di, dj):
        self.base = base
        self.di = di
        self.dj = dj
        self.min_row = base.min_row
        if base.extent is not None:
            self.extent = (base.extent[0] - di, base.extent[1] - dj)

    def _block(self, i0, i1, j0, j1):
        return self.base.block(i0 + self.di, i1 + self.di, j0 + self.dj, j1 + self.dj)

    def describe(self):
        return self.base.describe()


def mark_at(field, v):
    """Mark (0 or 1) at site v.

    :raises: FieldDomainError for coordinates outside the field's domain
    """

    return field.mark_at(v) if isinstance(field, BernoulliField) else field.value_at(v)


def weight_at(field, v):
    return field.weight_at(v) if isinstance(field, GeometricField) else field.value_at(v)


def shift_to_corner_indexing(field):
    return field.shifted()


def jump_draws(field, K, T):
    """Per-(particle, time) DTASEP jump attempts read off a Bernoulli field.

    Particle k attempts a jump at step t when site (k, t) is unmarked, which
    happens with probability q.

    :returns: Boolean array draws[k - 1, t - 1] of shape (K, T)
    """

    return np.ascontiguousarray(field.block(1, K + 1, 1, T + 1).T == 0)
