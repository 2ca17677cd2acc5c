"""Exact pathwise checks tying BLIP lengths to the particle processes.

Every check walks its whole index range in lexicographic order and keeps the
first violation it meets, so a report can be replayed from (seed, coordinates).
"""

from dataclasses import dataclass, field as dc_field
from typing import Optional
from blipsim.fields import GeometricField
from blipsim.particles import (HorizonError, evolve_blocking_right, evolve_marked_left, evolve_r, extract_tau,
                               tau_recursion)
from blipsim.passage import blip_table, corner_growth_table

import logging
import math

import numpy as np


class IdentityError(Exception):
    pass


class IdentityConfigError(IdentityError):
    pass


class IdentityDomainError(IdentityError, ValueError):
    pass


@dataclass
class IdentityReport:
    identity: str
    dims: tuple
    points_checked: int = 0
    counterexample: Optional[tuple] = None
    source: dict = dc_field(default_factory=dict)

    @property
    def passed(self):
        return self.counterexample is None

    def record(self, point, holds):
        self.points_checked += 1
        if not holds:
            self.fail(point)

    def fail(self, point):
        if self.counterexample is None:
            self.counterexample = tuple(int(c) for c in point)
            logging.warning(f'Identity "{self.identity}" fails at {self.counterexample} on field {self.source}.')

    def to_dict(self):
        return {
            "identity": self.identity,
            "seed": self.source.get("seed"),
            "stream": self.source.get("stream"),
            "p": self.source.get("p"),
            "dims": list(self.dims),
            "points_checked": self.points_checked,
            "counterexample": None if self.counterexample is None else list(self.counterexample),
        }


def _tau_from_r(shifted, k_max, i_max, horizon):
    """R trajectory on a corner-indexed field and its tau table.

    :returns: Tuple (trajectory, TauTable)
    """

    traj = evolve_r(shifted, k_max + i_max, horizon)
    return traj, extract_tau(traj, min(i_max, horizon), k_max)


def _tau_at_most(tau, i, k, n):
    """tau(i, k) <= n, including rows cut off by the horizon.

    :raises: IdentityConfigError when the comparison is undecidable
    """

    try:
        if i < tau.values.shape[0]:
            return tau.at_most(i, k, n)

        # The i-th jump takes at least i steps
        if i > n:
            return False
        raise HorizonError(f"tau({i}, {k}) lies beyond horizon {tau.horizon}.")

    except HorizonError as e:
        raise IdentityConfigError(str(e))


def _k_star(tau, s, t):
    """max{k: s >= k >= (s - t - 1) v 1, tau(t + 1 - s + k, k) <= t + 1}, or 0."""

    for k in range(s, max(s - t - 1, 1) - 1, -1):
        if _tau_at_most(tau, t + 1 - s + k, k, t + 1):
            return k
    return 0


def check_relation(field, S, T, horizon=None):
    """L'(s, t) = s - k*(s, t) for 1 <= s <= S, 0 <= t <= T.

    The left side is the BLIP length on the corner-indexed field, the right side
    comes from the jump times of the R-process on that same field.

    :horizon: Last simulated time of the R-process, T + 2 by default
    :returns: IdentityReport
    :raises: IdentityConfigError if the horizon leaves a comparison undecidable
    """

    horizon = T + 2 if horizon is None else horizon
    shifted = field.shifted()
    report = IdentityReport("relation", (S, T), source=field.describe())

    lengths = blip_table(shifted, S, T)
    _, tau = _tau_from_r(shifted, S, T + 2, horizon)

    for s in range(1, S + 1):
        for t in range(0, T + 1):
            report.record((s, t), lengths[s, t] == s - _k_star(tau, s, t))

    return report


def check_jump_lemma(field, S, T, horizon=None):
    """L'(s, t) >= y iff particle s - y + 1 jumps right at least y times by time t + 1.

    Checked for all 1 <= y <= s <= S and 0 <= t <= T.
    """

    horizon = T + 2 if horizon is None else horizon
    if horizon < T + 1:
        raise IdentityConfigError(f"Horizon {horizon} does not reach time {T + 1}.")

    shifted = field.shifted()
    report = IdentityReport("jump-lemma", (S, T), source=field.describe())

    lengths = blip_table(shifted, S, T)
    traj = evolve_r(shifted, S + T + 2, horizon)
    right = traj.positions - np.arange(1, traj.K + 1)[:, None]

    for s in range(1, S + 1):
        for t in range(0, T + 1):
            for y in range(1, s + 1):
                k = s - y + 1
                report.record((s, t, y), (lengths[s, t] >= y) == (right[k - 1, t + 1] >= y))

    return report


def _lm_right_side(tau, m, n):
    for k in range(m, max(m - n, 1) - 1, -1):
        if _tau_at_most(tau, n - m + k, k, n):
            return m - k
    return m


def check_lm_formula(field, M, N, horizon=None):
    """L(m, n) = m - (max{k: (m - n) v 1 <= k <= m, tau(n - m + k, k) <= n} v 0)."""

    horizon = N + 2 if horizon is None else horizon
    report = IdentityReport("lm-formula", (M, N), source=field.describe())

    lengths = blip_table(field, M, N)
    _, tau = _tau_from_r(field.shifted(), M, N + 2, horizon)

    for m in range(1, M + 1):
        for n in range(1, N + 1):
            report.record((m, n), lengths[m, n] == _lm_right_side(tau, m, n))

    return report


def check_event_b(field, m, n, j):
    """Both sides of {L(m, n) <= m - j} = {tau(n - m + j, j) <= n}.

    A non-integer j stands for its floor.

    :returns: Tuple of booleans (lhs, rhs)
    :raises: IdentityDomainError unless (m - n) v 1 <= j <= m
    """

    if not max(m - n, 1) <= j <= m:
        raise IdentityDomainError(f"j={j} is outside [{max(m - n, 1)}, {m}].")

    j = int(math.floor(j))
    length = blip_table(field, m, n)[m, n]
    _, tau = _tau_from_r(field.shifted(), m, n + 2, n + 2)

    return bool(length <= m - j), _tau_at_most(tau, n - m + j, j, n)


def check_tau_equals_g(field, I, J, g_field=None):
    """tau(i, j) = G(i, j) - j + 1 on one seed, tau from unshifted and G from shifted weights.

    :field: GeometricField feeding the tau recursion (either convention)
    :g_field: Shifted GeometricField for G, derived from field by default
    :raises: IdentityConfigError when the two fields do not share seed and parameters
    """

    if not isinstance(field, GeometricField):
        raise IdentityConfigError("The tau/G identity needs a geometric field.")
    if g_field is None:
        g_field = field.with_convention("shifted")
    elif not isinstance(g_field, GeometricField) or g_field.convention != "shifted":
        raise IdentityConfigError("G must be computed from shifted geometric weights.")
    elif g_field.rng != field.rng or g_field.params != field.params:
        raise IdentityConfigError("tau and G fields are not paired on one seed.")

    report = IdentityReport("tau-g", (I, J), source=field.describe())

    tau = tau_recursion(field.with_convention("unshifted"), I, J).values
    g = corner_growth_table(g_field, I, J)
    rhs = g - np.arange(J + 1)[None, :] + 1

    mismatch = np.argwhere(tau[1:, 1:] != rhs[1:, 1:])
    report.points_checked = I * J
    if mismatch.size:
        report.fail(mismatch[0] + 1)

    return report


def check_coupling(field, K, T, spacing=2):
    """Marked-left and blocking-right processes agree, w_{k-t}(t) = z_k(t).

    Both start from z_k(0) = spacing * k for k = 1..K + T, so every w-particle
    l <= K has its z counterpart up to time T.
    """

    initial = spacing * np.arange(1, K + T + 1, dtype=np.int64)
    z = evolve_marked_left(field, initial, T)
    w = evolve_blocking_right(field, initial, T)

    report = IdentityReport("coupling", (K, T), source=field.describe())
    for t in range(T + 1):
        occupied_w = set(int(x) for x in w.positions[:K, t])
        occupied_z = set(int(x) for x in z.positions[t:t + K, t])
        for l in range(1, K + 1):
            report.record((t, l), w.positions[l - 1, t] == z.positions[l + t - 1, t])
        # Label 0 stands for the occupation set at time t
        report.record((t, 0), occupied_w == occupied_z)

    return report


identities = {
    "relation": check_relation,
    "jump-lemma": check_jump_lemma,
    "lm-formula": check_lm_formula,
    "tau-g": check_tau_equals_g,
    "coupling": check_coupling,
}
