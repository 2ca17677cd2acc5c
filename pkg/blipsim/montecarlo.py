"""Monte Carlo experiments on BLIP lengths and last-passage times.

Replica r of an experiment at size n draws its fields from a stream id derived
from (experiment, n, r), so every replica can be replayed on its own and the
summaries do not depend on how replicas are scheduled. Coupled ladders drop n
from the stream id so replica r reads one field at every size.
"""

from dataclasses import dataclass, field as dc_field
from typing import Optional
from blipsim.fields import BernoulliField, FieldDomainError, GeometricField, ModelParams, RngSpec
from blipsim.passage import ShapeQuery, blip_length, corner_growth, geometric_moments, phi, psi, soft_edge_constant
from blipsim.pool import ReplicaPool
from blipsim.scalings import ScalingError, make_scaling

import hashlib
import logging
import math
import time

import numba as nb
import numpy as np
import scipy.stats


_STRIP_BLOCK_CELLS = 1 << 20
_DEFAULT_CELL_BUDGET = 1 << 34
_DEFAULT_STRIP_BUDGET = 1 << 31
_MIN_EXPECTED = 5.0

METHODS = ("auto", "fast", "direct")
REGIMES = ("probability", "almost-sure")


class ExperimentError(Exception):
    pass


class ExperimentConfigError(ExperimentError):
    pass


class ExperimentDomainError(ExperimentError, ValueError):
    pass


class BudgetError(ExperimentError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    ns: tuple
    replicas: int
    seed: int = 0
    a: float = 0.75
    x: float = 1.0
    y: float = 1.0
    dn: dict = dc_field(default_factory=lambda: {"rule": "power", "gamma": 0.25})
    epsilon: float = 1.0
    regime: str = "probability"
    c: float = 1.0
    c1: float = 1.0
    beta: float = 0.5
    method: str = "auto"
    direct_threshold: int = 2000
    cell_budget: int = _DEFAULT_CELL_BUDGET
    strip_budget: int = _DEFAULT_STRIP_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "ns", tuple(int(n) for n in self.ns))

        if len(self.ns) == 0 or self.ns[0] < 1:
            raise ExperimentConfigError(f"Invalid size ladder {self.ns}.")
        if any(b <= a for a, b in zip(self.ns, self.ns[1:])):
            raise ExperimentConfigError(f"The size ladder {self.ns} is not strictly increasing.")
        if self.replicas < 2:
            raise ExperimentConfigError(f"At least two replicas are needed, got {self.replicas}.")
        if not 0.0 < self.a <= 1.0:
            raise ExperimentConfigError(f"Exponent a={self.a} is outside (0, 1].")
        if self.x < 0 or self.y < 0:
            raise ExperimentConfigError(f"Amplitudes x={self.x}, y={self.y} must be non-negative.")
        if self.epsilon <= 0 or self.c <= 0 or self.c1 <= 0:
            raise ExperimentConfigError("epsilon, c and c1 must be positive.")
        if self.method not in METHODS:
            raise ExperimentConfigError(f'Unknown sampling method "{self.method}".')
        if self.regime not in REGIMES:
            raise ExperimentConfigError(f'Unknown convergence regime "{self.regime}".')

        try:
            self.params.check_open()
        except FieldDomainError as e:
            raise ExperimentConfigError(str(e))

    def scaling(self):
        """d_n rule of the subcritical soft-edge experiment.

        The almost-sure regime only accepts rules with d_n / log n -> infinity.

        :raises: ExperimentConfigError for a family that is not known to satisfy d_n -> inf, d_n = o(n)
        """

        try:
            scaling = make_scaling(self.dn)
        except ScalingError as e:
            raise ExperimentConfigError(str(e))

        if self.regime == "almost-sure" and not scaling.outgrows_log():
            raise ExperimentConfigError(f"The d_n rule {scaling.describe()} does not outgrow log n, "
                                        f"as almost-sure convergence needs.")
        return scaling


@dataclass
class SampleSummary:
    n: int
    replicas: int
    mean: float
    variance: float
    se: float
    median: float
    exceedance: Optional[float] = None
    ref_value: Optional[float] = None
    wall_time: float = 0.0
    method: Optional[str] = None
    tail_exceedance: Optional[float] = None

    @property
    def exceedance_se(self):
        if self.exceedance is None:
            return None
        return math.sqrt(self.exceedance * (1.0 - self.exceedance) / self.replicas)

    def to_dict(self):
        return {
            "n": self.n,
            "replicas": self.replicas,
            "mean": self.mean,
            "variance": self.variance,
            "se": self.se,
            "median": self.median,
            "exceedance": self.exceedance,
            "ref_value": self.ref_value,
            "wall_time": self.wall_time,
            "method": self.method,
            "tail_exceedance": self.tail_exceedance,
        }


@dataclass(frozen=True)
class SampleComparison:
    mean_diff: float
    se: float
    rank_pvalue: float

    def agree(self, k=3.0, level=0.01):
        return abs(self.mean_diff) <= k * self.se and self.rank_pvalue > level


@dataclass(frozen=True)
class CrosscheckResult:
    m: int
    n: int
    j: int
    replicas: int
    p_blip: float
    p_lpp: float

    @property
    def diff(self):
        return self.p_blip - self.p_lpp

    @property
    def se(self):
        r = self.replicas
        return math.sqrt(self.p_blip * (1.0 - self.p_blip) / r + self.p_lpp * (1.0 - self.p_lpp) / r)

    @property
    def agree(self):
        return abs(self.diff) <= 3.0 * self.se

    def to_dict(self):
        return {
            "m": self.m, "n": self.n, "j": self.j, "replicas": self.replicas,
            "p_blip": self.p_blip, "p_lpp": self.p_lpp, "se": self.se, "agree": self.agree,
        }


def replica_stream(experiment, n, r):
    """Stream id of replica r of an experiment at size n."""

    digest = hashlib.sha256(f"{experiment}:{n}:{r}".encode("utf-8")).hexdigest()
    return int(digest[:16], 16)


def replica_rng(seed, experiment, n, r):
    return RngSpec(seed, replica_stream(experiment, n, r))


def summarize(samples, epsilon=None, n=None, ref_value=None, wall_time=0.0, method=None):
    """Summary statistics of one batch of replicas.

    :samples: Sequence of at least two numbers
    :epsilon: Threshold of the exceedance fraction, none when omitted
    :returns: SampleSummary
    :raises: ExperimentDomainError on fewer than two samples
    """

    values = np.asarray(samples, dtype=np.float64)
    if values.size < 2:
        raise ExperimentDomainError(f"At least two samples are needed, got {values.size}.")

    variance = float(np.var(values, ddof=1))
    exceedance = None if epsilon is None else float(np.mean(values > epsilon))

    return SampleSummary(
        n=n,
        replicas=int(values.size),
        mean=float(np.mean(values)),
        variance=variance,
        se=math.sqrt(variance / values.size),
        median=float(np.median(values)),
        exceedance=exceedance,
        ref_value=ref_value,
        wall_time=wall_time,
        method=method,
    )


def _merge_cells(observed, expected):
    merged_obs, merged_exp = [], []
    acc_obs = acc_exp = 0.0
    for o, e in zip(observed, expected):
        acc_obs += o
        acc_exp += e
        if acc_exp >= _MIN_EXPECTED:
            merged_obs.append(acc_obs)
            merged_exp.append(acc_exp)
            acc_obs = acc_exp = 0.0

    # A short tail joins the last full cell
    if acc_exp > 0 or acc_obs > 0:
        if merged_exp:
            merged_obs[-1] += acc_obs
            merged_exp[-1] += acc_exp
        else:
            merged_obs.append(acc_obs)
            merged_exp.append(acc_exp)

    return np.asarray(merged_obs), np.asarray(merged_exp)


def chi_square_gof(observed, law):
    """Pearson goodness-of-fit of counts against a law.

    Adjacent cells are merged from the left until each expects at least five
    counts; a short tail joins the last cell.

    :observed: Counts per cell
    :law: Cell probabilities, summing to one
    :returns: Tuple (statistic, p-value)
    :raises: ExperimentDomainError on empty input, a law that does not sum to one or a single merged cell
    """

    observed = np.asarray(observed, dtype=np.float64)
    law = np.asarray(law, dtype=np.float64)
    if observed.size == 0 or observed.shape != law.shape:
        raise ExperimentDomainError("Observed counts and law must be non-empty and of equal length.")
    if np.any(law < 0) or not math.isclose(float(law.sum()), 1.0, abs_tol=1e-9):
        raise ExperimentDomainError(f"The law sums to {law.sum()}, not 1.")

    total = observed.sum()
    if total <= 0:
        raise ExperimentDomainError("No observations.")

    obs, exp = _merge_cells(observed, law * total)
    if obs.size < 2:
        raise ExperimentDomainError("Fewer than two cells left after merging.")

    result = scipy.stats.chisquare(obs, exp)
    return float(result.statistic), float(result.pvalue)


def geometric_law(params, cells):
    """Law of a geometric weight over cells, the last one holding the tail.

    Cell s holds the unshifted value s, or the shifted value s + 1.

    :cells: Number of cells, at least 2
    :returns: numpy vector of probabilities summing to one
    """

    if cells < 2:
        raise ExperimentDomainError(f"Invalid number of cells {cells}.")

    s = np.arange(cells - 1)
    law = np.empty(cells)
    law[:-1] = params.q * params.p ** s
    law[-1] = params.p ** (cells - 1)
    return law


def compare_samples(a, b):
    """Mean difference, its standard error and a two-sided rank test.

    :returns: SampleComparison
    """

    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ExperimentDomainError("Both samples need at least two values.")

    se = math.sqrt(np.var(a, ddof=1) / a.size + np.var(b, ddof=1) / b.size)

    # All-tied samples carry no rank information
    if np.all(a == a[0]) and np.all(b == a[0]):
        pvalue = 1.0
    else:
        pvalue = float(scipy.stats.mannwhitneyu(a, b, alternative="two-sided").pvalue)

    return SampleComparison(float(a.mean() - b.mean()), se, pvalue)


def trend_violation(values, errors):
    """First index k where values[k] exceeds values[k - 1] by more than their joint error.

    :returns: Index or None
    """

    for k in range(1, len(values)):
        slack = math.sqrt(errors[k - 1] ** 2 + errors[k] ** 2)
        if values[k] > values[k - 1] + slack:
            return k
    return None


def _guard_cells(config, rows, cols):
    if rows * cols > config.cell_budget:
        raise BudgetError(f"A {rows} x {cols} rectangle exceeds the cell budget {config.cell_budget}.")


def _replicas(experiment, config, n, value, pool, stream_n=None):
    stream_n = n if stream_n is None else stream_n
    args = [(n, replica_rng(config.seed, experiment, stream_n, r)) for r in range(config.replicas)]
    return (pool or ReplicaPool(1)).map(value, args)


def tail_exceedances(rungs, epsilon):
    """Fraction of replicas exceeding epsilon at rung k or at any later rung.

    :rungs: Per-rung replica values, replica r of every rung read from one field
    :returns: List of floats, one per rung
    """

    exceeds = np.asarray(rungs, dtype=np.float64) > epsilon
    later = np.logical_or.accumulate(exceeds[::-1], axis=0)[::-1]
    return [float(f) for f in later.mean(axis=1)]


def _ladder(experiment, config, value, ref, pool=None, sink=None, epsilon=None, method=None, coupled=False):
    """Run value(n, rng) on every replica of every size.

    :value: Function (n, RngSpec) -> float
    :ref: Function n -> reference value
    :method: Function n -> method label, or None
    :sink: Callable receiving one record per replica, in replica order
    :coupled: Replica r reads the same field at every size, and the summaries carry tail exceedances
    :returns: List of SampleSummary, one per n
    """

    summaries = []
    rungs = []
    for n in config.ns:
        start = time.perf_counter()
        values = _replicas(experiment, config, n, value, pool, 0 if coupled else None)
        elapsed = time.perf_counter() - start
        rungs.append(values)

        if sink is not None:
            for r, v in enumerate(values):
                sink({
                    "experiment": experiment,
                    "n": n,
                    "replica": r,
                    "value": v,
                    "seed": config.seed,
                    "stream": replica_stream(experiment, 0 if coupled else n, r),
                })

        summary = summarize(values, epsilon, n, ref(n), elapsed, None if method is None else method(n))
        logging.info(f'Experiment "{experiment}" at n={n}: median {summary.median:.6g}, '
                     f'mean {summary.mean:.6g} +/- {summary.se:.2g} (reference {summary.ref_value}).')
        summaries.append(summary)

    if coupled and epsilon is not None:
        for summary, tail in zip(summaries, tail_exceedances(rungs, epsilon)):
            summary.tail_exceedance = tail

    return summaries


def simulate_lengths(config, m=None, model="blip", pool=None, sink=None):
    """Replicas of L(m, n) or G(m, n) for each n of the ladder.

    :m: Width of the rectangle, n when omitted
    :model: "blip" for Bernoulli marks, "lpp" for shifted geometric weights
    :returns: List of SampleSummary with reference n Psi(m/n, 1) or n Phi(m/n, 1)
    """

    if model not in ("blip", "lpp"):
        raise ExperimentConfigError(f'Unknown model "{model}".')

    def width(n):
        return n if m is None else m

    for n in config.ns:
        _guard_cells(config, width(n), n)

    def value(n, rng):
        return float(replica_length(config.params, rng, width(n), n, model))

    def ref(n):
        if model == "blip":
            return n * psi(ShapeQuery(width(n) / n, 1.0, config.params))
        mean, variance = geometric_moments(config.params)
        return n * phi(width(n) / n, 1.0, mean, variance)

    return _ladder(f"simulate-{model}", config, value, ref, pool, sink)


def replica_field(params, rng, model="blip"):
    if model == "blip":
        return BernoulliField(params, rng)
    return GeometricField(params, rng, "shifted")


def replica_length(params, rng, m, n, model="blip"):
    field = replica_field(params, rng, model)
    return blip_length(field, m, n) if model == "blip" else corner_growth(field, m, n)


def estimate_shape(config, x, y, pool=None, sink=None):
    """n^-1 L(floor(nx), floor(ny)) across the ladder against Psi(x, y).

    :raises: ExperimentDomainError unless x, y > 0, BudgetError on oversized rectangles
    """

    if not (x > 0 and y > 0):
        raise ExperimentDomainError(f"Shape point ({x}, {y}) must be positive.")

    for n in config.ns:
        _guard_cells(config, math.floor(n * x), math.floor(n * y))

    reference = psi(ShapeQuery(x, y, config.params))

    def value(n, rng):
        m, k = math.floor(n * x), math.floor(n * y)
        if m < 1 or k < 1:
            return 0.0
        return blip_length(BernoulliField(config.params, rng), m, k) / n

    return _ladder("shape", config, value, lambda n: reference, pool, sink)


def soft_edge_width(params, x, a, n):
    """m = floor(n / p - x n^a).

    :raises: ExperimentDomainError when m < 1
    """

    if params.p <= 0.0:
        raise ExperimentDomainError("The soft edge needs p > 0.")

    m = math.floor(n / params.p - x * n ** a)
    if m < 1:
        raise ExperimentDomainError(f"Soft-edge width m={m} is not positive at n={n}.")
    return m


def initial_strip_width(params, x, a, n):
    """Four times the predicted n - L, plus a margin of 16 rows."""

    predicted = (params.p * x) ** 2 * n ** (2 * a - 1) / (4.0 * params.q)
    return math.ceil(4.0 * predicted) + 16


@nb.njit(cache=True, nogil=True)
def _strip_sweep(block, row, i0, lag, m):
    for r in range(block.shape[0]):
        for c in range(1, row.shape[0]):
            row[c] = max(row[c - 1], row[c]) + block[r, c - 1]
        i = i0 + r
        if row[lag + i] >= m + i:
            return i
    return -1


def _strip_search(field, lag, w, m):
    """First i <= w with G(i, lag + i) >= m + i, or -1."""

    H = lag + w
    row = np.zeros(H + 1, dtype=np.int64)
    step = max(1, _STRIP_BLOCK_CELLS // H)
    for i0 in range(1, w + 1, step):
        hit = _strip_sweep(field.block(1, H + 1, i0, min(i0 + step, w + 1)), row, i0, lag, m)
        if hit > 0:
            return hit
    return -1


def fast_soft_edge_sample(field, m, n, width=16, strip_budget=_DEFAULT_STRIP_BUDGET):
    """One sample of L(m, n) from a thin strip of last-passage values.

    With i* the first i >= 1 such that G(i, m - n + i) >= m + i (n + 1 if
    there is none), L(m, n) has the law of n - i* + 1. The strip holds rows
    1..width and is doubled until i* is found or the whole height n is
    covered; a sample is never cut at the strip boundary.

    :field: Fresh field of shifted geometric weights, read transposed
    :width: Initial strip height
    :returns: Integer sample of L(m, n)
    :raises: ExperimentDomainError unless m > n, BudgetError when the strip outgrows strip_budget
    """

    if not m > n >= 1:
        raise ExperimentDomainError(f"The thin-strip sampler needs m > n >= 1, got m={m}, n={n}.")

    lag = m - n
    w = max(1, min(width, n))
    while True:
        cells = w * (lag + w)
        if cells > strip_budget:
            raise BudgetError(f"A strip of {w} rows x {lag + w} columns exceeds the strip budget {strip_budget}.")

        hit = _strip_search(field, lag, w, m)
        if hit > 0:
            return n - hit + 1
        if w >= n:
            return 0

        w = min(2 * w, n)
        logging.debug(f"Widening the strip to {w} rows at m={m}, n={n}.")


def _soft_edge_method(config, n, m):
    if config.method == "direct" or m <= n:
        return "direct"
    if config.method == "fast" or n > config.direct_threshold:
        return "fast"
    return "direct"


def soft_edge_length(config, n, rng, method):
    """One replica of L(floor(n/p - x n^a), n) by the chosen method."""

    m = soft_edge_width(config.params, config.x, config.a, n)
    if method == "fast":
        width = initial_strip_width(config.params, config.x, config.a, n)
        return fast_soft_edge_sample(GeometricField(config.params, rng, "shifted"), m, n, width, config.strip_budget)

    _guard_cells(config, m, n)
    return blip_length(BernoulliField(config.params, rng), m, n)


def _soft_edge_methods(config):
    methods = {}
    for n in config.ns:
        m = soft_edge_width(config.params, config.x, config.a, n)
        methods[n] = _soft_edge_method(config, n, m)
        if methods[n] == "direct":
            _guard_cells(config, m, n)
    return methods


def soft_edge_subcritical(config, pool=None, sink=None):
    """(n - L(m, n)) / d_n with the exceedance fraction at epsilon, for a <= 1/2.

    In the almost-sure regime replica r reads one field at every size of the
    ladder, d_n must outgrow log n, and each summary also carries the fraction
    of replicas that still exceed epsilon at that size or a later one.
    """

    if not 0.0 < config.a <= 0.5:
        raise ExperimentConfigError(f"The subcritical soft edge needs 0 < a <= 1/2, got a={config.a}.")

    dn = config.scaling()
    methods = _soft_edge_methods(config)
    coupled = config.regime == "almost-sure"
    if coupled and len(set(methods.values())) > 1:
        # Every size must read the same kind of field
        if any(soft_edge_width(config.params, config.x, config.a, n) <= n for n in config.ns):
            raise ExperimentDomainError("The thin-strip sampler cannot cover every size of the coupled ladder.")
        methods = {n: "fast" for n in config.ns}

    def value(n, rng):
        return (n - soft_edge_length(config, n, rng, methods[n])) / dn.value(n)

    experiment = "soft-edge-sub-as" if coupled else "soft-edge-sub"
    return _ladder(experiment, config, value, lambda n: 0.0, pool, sink, config.epsilon, methods.get, coupled)


def soft_edge_supercritical(config, pool=None, sink=None):
    """(n - L(m, n)) / n^(2a - 1) against (px)^2 / 4q, for 1/2 < a < 1."""

    if not 0.5 < config.a < 1.0:
        raise ExperimentConfigError(f"The supercritical soft edge needs 1/2 < a < 1, got a={config.a}.")

    reference = soft_edge_constant(config.params, config.x)
    methods = _soft_edge_methods(config)

    def value(n, rng):
        return (n - soft_edge_length(config, n, rng, methods[n])) / n ** (2 * config.a - 1)

    return _ladder("soft-edge-super", config, value, lambda n: reference, pool, sink, None, methods.get)


def soft_edge_samples(config, n, method, pool=None):
    """Raw replicas of n - L at one size by one method, for estimator comparisons."""

    def value(n, rng):
        return n - soft_edge_length(config, n, rng, method)

    return _replicas(f"soft-edge-{method}", config, n, value, pool)


def strip_event_probability(config, pool=None, sink=None):
    """Frequency of n - L >= floor((cn)^(2a - 1)) against its 0/1 limit.

    The limit is 0 when c^(2a - 1) exceeds (px)^2 / 4q and 1 when it is below.
    """

    if not 0.5 < config.a < 1.0:
        raise ExperimentConfigError(f"The strip event needs 1/2 < a < 1, got a={config.a}.")

    beta = 2 * config.a - 1
    reference = 0.0 if config.c ** beta > soft_edge_constant(config.params, config.x) else 1.0
    methods = _soft_edge_methods(config)

    def value(n, rng):
        threshold = math.floor((config.c * n) ** beta)
        return float(n - soft_edge_length(config, n, rng, methods[n]) >= threshold)

    return _ladder("strip-event", config, value, lambda n: reference, pool, sink, None, methods.get)


def hard_edge_check(config, pool=None, sink=None):
    """(G(floor(c1 n), floor(y n^beta)) - mu j) / n^((1 + beta) / 2) against 2 sigma sqrt(c1 y)."""

    if not 0.0 < config.beta < 1.0:
        raise ExperimentConfigError(f"The hard edge needs 0 < beta < 1, got beta={config.beta}.")
    if not config.y > 0:
        raise ExperimentConfigError(f"The hard edge needs y > 0, got y={config.y}.")

    mu, variance = geometric_moments(config.params)
    reference = 2.0 * math.sqrt(variance * config.c1 * config.y)

    def dims(n):
        j, k = math.floor(config.c1 * n), math.floor(config.y * n ** config.beta)
        if j < 1 or k < 1:
            raise ExperimentDomainError(f"Empty hard-edge rectangle {j} x {k} at n={n}.")
        return j, k

    for n in config.ns:
        _guard_cells(config, *dims(n))

    def value(n, rng):
        j, k = dims(n)
        g = corner_growth(GeometricField(config.params, rng, "shifted"), j, k)
        return (g - mu * j) / n ** ((1 + config.beta) / 2)

    return _ladder("hard-edge", config, value, lambda n: reference, pool, sink)


def exceedance_crosscheck(config, m, n, j, pool=None):
    """Estimate P{L(m, n) <= m - j} and P{G(n - m + j, j) <= n + j - 1} on independent fields.

    :returns: CrosscheckResult
    :raises: ExperimentDomainError unless (m - n) v 1 <= j <= m
    """

    if not max(m - n, 1) <= j <= m:
        raise ExperimentDomainError(f"j={j} is outside [{max(m - n, 1)}, {m}].")

    i = n - m + j
    _guard_cells(config, m, n)

    def blip_event(n_, rng):
        return blip_length(BernoulliField(config.params, rng), m, n) <= m - j

    def lpp_event(n_, rng):
        if i == 0:
            return True
        return corner_growth(GeometricField(config.params, rng, "shifted"), i, j) <= n + j - 1

    p_blip = float(np.mean(_replicas("crosscheck-blip", config, n, blip_event, pool)))
    p_lpp = float(np.mean(_replicas("crosscheck-lpp", config, n, lpp_event, pool)))

    result = CrosscheckResult(m, n, j, config.replicas, p_blip, p_lpp)
    logging.info(f"Crosscheck at m={m}, n={n}, j={j}: {p_blip:.4f} vs {p_lpp:.4f} (se {result.se:.4f}).")
    return result
