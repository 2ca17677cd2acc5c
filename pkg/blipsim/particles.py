"""Particle processes living on the marked lattice.

Labels are 1-based everywhere: positions[k - 1, t] is the position of particle k
at time t.
"""

from dataclasses import dataclass
from typing import Optional
from blipsim.fields import FieldDomainError, GeometricField

import csv

import numba as nb
import numpy as np


KINDS = ("R", "DTASEP", "Z", "W")

# Value of tau(i, k) when the i-th jump is not completed by the horizon
AFTER_HORIZON = np.iinfo(np.int64).max


class ParticleError(Exception):
    pass


class ParticleDomainError(ParticleError, ValueError):
    pass


class HorizonError(ParticleError):
    pass


@dataclass
class ParticleTrajectory:
    kind: str
    positions: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParticleDomainError(f'Unknown trajectory kind "{self.kind}".')

    @property
    def K(self):
        return self.positions.shape[0]

    @property
    def T(self):
        return self.positions.shape[1] - 1

    def position(self, k, t):
        return int(self.positions[k - 1, t])

    def order_violation(self):
        """First (k, t) with pos[k - 1][t] >= pos[k][t], or None."""

        bad = np.argwhere(np.diff(self.positions, axis=0) <= 0)
        if bad.size == 0:
            return None
        k, t = min((int(k), int(t)) for k, t in bad)
        return k + 2, t


@dataclass(frozen=True)
class PlatoonState:
    """Platoons by the position of their leftmost particle and their size.

    Platoon j is bounded by holes at starts[j] - 1 and starts[j] + sizes[j].
    """

    starts: tuple
    sizes: tuple

    def __post_init__(self):
        if len(self.starts) != len(self.sizes):
            raise ParticleDomainError("Platoon starts and sizes differ in length.")
        for j, size in enumerate(self.sizes):
            if size < 1:
                raise ParticleDomainError(f"Platoon {j + 1} has size {size}.")
            if j > 0 and self.starts[j] < self.starts[j - 1] + self.sizes[j - 1] + 1:
                raise ParticleDomainError(f"Platoons {j} and {j + 1} are not separated by a hole.")

    @classmethod
    def from_positions(cls, positions):
        positions = np.asarray(positions)
        if positions.size == 0:
            return cls((), ())
        cuts = np.flatnonzero(np.diff(positions) > 1) + 1
        bounds = np.concatenate(([0], cuts, [positions.size]))
        starts = tuple(int(positions[b]) for b in bounds[:-1])
        sizes = tuple(int(e - b) for b, e in zip(bounds[:-1], bounds[1:]))
        return cls(starts, sizes)

    def positions(self):
        if not self.sizes:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([np.arange(s, s + n, dtype=np.int64) for s, n in zip(self.starts, self.sizes)])

    @property
    def holes(self):
        return tuple((s - 1, s + n) for s, n in zip(self.starts, self.sizes))


@dataclass(frozen=True)
class BreakEvent:
    t: int
    platoon_index: int
    size: int
    piece: int


@dataclass
class TauTable:
    """Jump times tau[i, k]; row i = 0 and column k = 0 are the zero boundary.

    horizon is the last simulated time, or None when every entry is exact.
    """

    values: np.ndarray
    horizon: Optional[int] = None

    def __getitem__(self, ik):
        return int(self.values[ik])

    def decided(self, i, k):
        return self.values[i, k] != AFTER_HORIZON

    def at_most(self, i, k, n):
        """Decide tau(i, k) <= n.

        :raises: HorizonError when the jump lies beyond the horizon and n > horizon
        """

        value = self.values[i, k]
        if value != AFTER_HORIZON:
            return bool(value <= n)
        if n <= self.horizon:
            return False
        raise HorizonError(f"tau({i}, {k}) <= {n} is undecidable with horizon {self.horizon}.")

    def check_monotone(self):
        """Check tau is strictly increasing in i (k >= 1) and non-decreasing in k.

        :raises: ParticleError naming the first offending entry
        """

        values = self.values
        down = np.diff(values[:, 1:], axis=0)
        both_open = (values[:-1, 1:] == AFTER_HORIZON) & (values[1:, 1:] == AFTER_HORIZON)
        bad = np.argwhere((down <= 0) & ~both_open)
        if bad.size:
            i, k = bad[0]
            raise ParticleError(f"tau is not strictly increasing in i at ({i + 1}, {k + 1}).")

        bad = np.argwhere(np.diff(values, axis=1) < 0)
        if bad.size:
            i, k = bad[0]
            raise ParticleError(f"tau is decreasing in k at ({i}, {k + 1}).")


@nb.njit(cache=True, nogil=True)
def _r_sweep(marks, pos):
    K = pos.shape[0]
    for t in range(pos.shape[1] - 1):
        pushing = False
        for k in range(K):
            x = pos[k, t]
            if k == 0 or pos[k - 1, t] < x - 1:
                pushing = False
            if not pushing and marks[t, x - 1] != 0:
                pushing = True
            pos[k, t + 1] = x + 1 if pushing else x


@nb.njit(cache=True, nogil=True)
def _dtasep_sweep(draws, pos):
    K = pos.shape[0]
    for t in range(pos.shape[1] - 1):
        for k in range(K):
            x = pos[k, t]
            # Rules (i) and (ii) both say the target site is free once the left neighbour has moved
            if draws[k, t] and (k == 0 or x - 1 > pos[k - 1, t + 1]):
                pos[k, t + 1] = x - 1
            else:
                pos[k, t + 1] = x


@nb.njit(cache=True, nogil=True)
def _z_sweep(marks, pos):
    K = pos.shape[0]
    for t in range(pos.shape[1] - 1):
        left = 0
        for k in range(K):
            x = pos[k, t]
            new = x
            for s in range(left + 1, x + 1):
                if marks[t, s - 1] != 0:
                    new = s
                    break
            pos[k, t + 1] = new
            left = x


@nb.njit(cache=True, nogil=True)
def _w_sweep(marks, pos, max_jump):
    K = pos.shape[0]
    for t in range(pos.shape[1] - 1):
        for k in range(K):
            x = pos[k, t]
            bound = pos[k + 1, t] if k + 1 < K else x + max_jump
            new = bound
            for s in range(x + 1, bound):
                if marks[t, s - 1] != 0:
                    new = s
                    break
            pos[k, t + 1] = new


@nb.njit(cache=True, nogil=True)
def _tau_fill(weights, tau):
    for j in range(1, tau.shape[1]):
        for i in range(1, tau.shape[0]):
            tau[i, j] = max(tau[i - 1, j] + 1, tau[i, j - 1]) + weights[j - 1, i - 1]


def _initial_positions(initial):
    initial = np.asarray(initial, dtype=np.int64)
    if initial.ndim != 1 or initial.size == 0:
        raise ParticleDomainError("The initial configuration must be a non-empty vector.")
    if np.any(np.diff(initial) <= 0):
        raise ParticleDomainError("The initial configuration is not strictly increasing.")
    return initial


def _new_positions(initial, T):
    if T < 1:
        raise ParticleDomainError(f"Invalid number of steps T={T}.")
    pos = np.empty((initial.size, T + 1), dtype=np.int64)
    pos[:, 0] = initial
    return pos


def _marks(field, width, t0, t1):
    try:
        field.check_width(width)
        return field.block(1, width + 1, t0, t1)
    except FieldDomainError as e:
        raise ParticleDomainError(str(e))


def evolve_r(field, K, T):
    """Evolve the R-process on a corner-indexed field.

    At each step the leftmost particle of a platoon sitting on a marked square
    jumps right and pushes the rest of its platoon along.

    :field: Corner-indexed Bernoulli field (rows from 0)
    :returns: ParticleTrajectory of kind R with r_k(0) = k
    :raises: ParticleDomainError if the field is not corner-indexed or too narrow
    """

    if K < 1:
        raise ParticleDomainError(f"Invalid number of particles K={K}.")
    if field.min_row != 0:
        raise ParticleDomainError("The R-process needs a corner-indexed field (rows from 0).")

    pos = _new_positions(np.arange(1, K + 1, dtype=np.int64), T)
    _r_sweep(_marks(field, K + T, 0, T), pos)

    return ParticleTrajectory("R", pos)


def r_to_dtasep(traj):
    """Shear an R trajectory into DTASEP, r~_k(t) = r_k(t) - t."""

    if traj.kind != "R":
        raise ParticleDomainError(f"Expected an R trajectory, got {traj.kind}.")
    return ParticleTrajectory("DTASEP", traj.positions - np.arange(traj.T + 1, dtype=np.int64))


def evolve_dtasep(draws, initial, T):
    """DTASEP with backward (left-to-right) update.

    :draws: Boolean array draws[k - 1, t - 1], True when particle k attempts a jump at step t
    :initial: Strictly increasing initial positions
    :returns: ParticleTrajectory of kind DTASEP
    :raises: ParticleDomainError on a non-increasing configuration or short draws
    """

    initial = _initial_positions(initial)
    draws = np.asarray(draws, dtype=np.bool_)
    if draws.ndim != 2 or draws.shape[0] < initial.size or draws.shape[1] < T:
        raise ParticleDomainError(f"Draws of shape {draws.shape} do not cover {initial.size} particles x {T} steps.")

    pos = _new_positions(initial, T)
    _dtasep_sweep(draws, pos)

    return ParticleTrajectory("DTASEP", pos)


def fragmentation_law(params, n):
    """Law of the piece M detached from a platoon of size n.

    :returns: numpy vector P(M = k) for k = 0..n
    """

    k = np.arange(n + 1)
    law = params.p * params.q ** k
    law[n] = params.q ** n
    return law


def platoon_breaks(traj):
    """Fragmentation events read off a DTASEP trajectory.

    A platoon at time t - 1 loses to the left the prefix of its particles that
    moved at step t.

    :returns: List of BreakEvent, platoons indexed from 1 left to right
    """

    events = []
    for t in range(1, traj.T + 1):
        before = traj.positions[:, t - 1]
        moved = traj.positions[:, t] < before
        cuts = np.flatnonzero(np.diff(before) > 1) + 1
        bounds = np.concatenate(([0], cuts, [before.size]))
        for index, (b, e) in enumerate(zip(bounds[:-1], bounds[1:]), start=1):
            events.append(BreakEvent(t, index, int(e - b), int(moved[b:e].sum())))
    return events


def evolve_fragmentation(draws, state, T):
    """Fragmentation process driven by the same draws as DTASEP.

    :returns: Tuple (list of PlatoonState for t = 0..T, list of BreakEvent)
    """

    traj = evolve_dtasep(draws, state.positions(), T)
    states = [PlatoonState.from_positions(traj.positions[:, t]) for t in range(T + 1)]
    return states, platoon_breaks(traj)


def extract_tau(traj, i_max, k_max):
    """Jump times tau(i, k) = inf{t: r_k(t) = k - i + t} from an R trajectory.

    :returns: TauTable with horizon traj.T; unfinished jumps hold AFTER_HORIZON
    :raises: ParticleDomainError if k_max exceeds the number of particles
    """

    if traj.kind != "R":
        raise ParticleDomainError(f"Expected an R trajectory, got {traj.kind}.")
    if k_max > traj.K or i_max < 0 or k_max < 0:
        raise ParticleDomainError(f"Cannot extract tau up to ({i_max}, {k_max}) from {traj.K} particles.")

    values = np.zeros((i_max + 1, k_max + 1), dtype=np.int64)
    times = np.arange(traj.T + 1, dtype=np.int64)
    wanted = np.arange(1, i_max + 1)
    for k in range(1, k_max + 1):
        left_jumps = times - (traj.positions[k - 1] - k)
        first = np.searchsorted(left_jumps, wanted, side="left")
        values[1:, k] = np.where(first <= traj.T, first, AFTER_HORIZON)

    table = TauTable(values, traj.T)
    table.check_monotone()

    return table


def tau_recursion(field, I, J):
    """tau(i, j) = (tau(i - 1, j) + 1) v tau(i, j - 1) + Y~_ij with zero boundary.

    :field: Field of unshifted geometric weights, Y~ at site (i, j)
    :returns: Exact TauTable of shape (I + 1, J + 1)
    """

    if I < 1 or J < 1:
        raise ParticleDomainError(f"Invalid table size ({I}, {J}).")
    if isinstance(field, GeometricField) and field.convention != "unshifted":
        raise ParticleDomainError("The tau recursion reads unshifted geometric weights.")

    tau = np.zeros((I + 1, J + 1), dtype=np.int64)
    _tau_fill(field.block(1, I + 1, 1, J + 1), tau)

    return TauTable(tau)


def evolve_marked_left(field, initial, T):
    """Particles jumping left onto the leftmost mark of their gap.

    Particle k lands on the leftmost marked site of row t in
    (z_{k-1}(t-1), z_k(t-1)] and stays put when there is none. A wall at 0
    bounds particle 1.

    :returns: ParticleTrajectory of kind Z
    """

    initial = _initial_positions(initial)
    if initial[0] < 1:
        raise ParticleDomainError("Positions must be positive.")

    pos = _new_positions(initial, T)
    _z_sweep(_marks(field, int(initial[-1]), 1, T + 1), pos)

    return ParticleTrajectory("Z", pos)


def evolve_blocking_right(field, initial, T, max_jump=64):
    """Geometric right jumps blocked by the right neighbour's previous position.

    The jump of particle k at step t reaches the first marked site of row t to
    its right; the rightmost particle has no blocker and its jump is truncated
    at max_jump.

    :returns: ParticleTrajectory of kind W
    """

    initial = _initial_positions(initial)
    if initial[0] < 1 or max_jump < 1:
        raise ParticleDomainError("Positions and max_jump must be positive.")

    pos = _new_positions(initial, T)
    _w_sweep(_marks(field, int(initial[-1]) + T * max_jump, 1, T + 1), pos, max_jump)

    return ParticleTrajectory("W", pos)


def jump_counts(r_traj, d_traj):
    """Right jumps in R and left jumps in DTASEP by time t.

    :returns: Tuple of int arrays (right, left), both indexed [k - 1, t]
    """

    labels = np.arange(1, r_traj.K + 1, dtype=np.int64)[:, None]
    right = r_traj.positions - labels
    left = labels - d_traj.positions
    return right, left


def check_dtasep_rules(traj):
    """First (k, t) where step t breaks exclusion or the backward-update rules.

    :returns: Tuple (k, t) or None
    """

    pos = traj.positions
    for t in range(1, traj.T + 1):
        for k in range(1, traj.K + 1):
            before, after = pos[k - 1, t - 1], pos[k - 1, t]
            if before - after not in (0, 1):
                return k, t
            if k == 1:
                continue
            if pos[k - 2, t] >= after:
                return k, t
            if before - after == 1:
                gap_open = before > pos[k - 2, t - 1] + 1
                followed = before == pos[k - 2, t - 1] + 1 and pos[k - 2, t] == pos[k - 2, t - 1] - 1
                if not (gap_open or followed):
                    return k, t
    return None


def leader_jumps(r_traj):
    """Left jumps of platoon leaders in the sheared R trajectory.

    :returns: Tuple (number of jumps, number of leader steps)
    """

    pos = r_traj.positions
    leaders = np.ones(pos[:, :-1].shape, dtype=bool)
    leaders[1:] = pos[:-1, :-1] < pos[1:, :-1] - 1
    stayed = pos[:, 1:] == pos[:, :-1]
    return int((leaders & stayed).sum()), int(leaders.sum())


def write_trajectory_csv(traj, f):
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(["k", "t", "pos"])
    for k in range(1, traj.K + 1):
        for t in range(traj.T + 1):
            writer.writerow([k, t, int(traj.positions[k - 1, t])])


def write_breaks_csv(events, f):
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(["t", "platoon_index", "n_j", "M_j"])
    for e in events:
        writer.writerow([e.t, e.platoon_index, e.size, e.piece])
