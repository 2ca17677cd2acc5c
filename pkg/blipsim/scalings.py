import math


class ScalingError(ValueError):
    pass


class _BaseScaling(object):
    """A normalizing sequence d_n with d_n -> infinity and d_n = o(n)."""

    def __init__(self, params):
        self._params = dict(params)
        self._validate()

    def _validate(self):
        raise NotImplementedError

    def _require(self, name, low, high=math.inf):
        if name not in self._params:
            raise ScalingError(f'The d_n rule "{self.name}" needs the parameter "{name}".')
        value = self._params[name]
        if not isinstance(value, (int, float)) or not low < value < high:
            raise ScalingError(f'Parameter "{name}" of the d_n rule "{self.name}" must lie in ({low}, {high}).')
        return float(value)

    def value(self, n):
        """Get d_n.

        :returns: float
        """

        raise NotImplementedError

    def outgrows_log(self):
        """Whether d_n / log n -> infinity."""

        return True

    def describe(self):
        return {"rule": self.name, **self._params}


class PowerScaling(_BaseScaling):
    name = "power"

    def _validate(self):
        self._gamma = self._require("gamma", 0.0, 1.0)

    def value(self, n):
        return float(n) ** self._gamma


class LogScaling(_BaseScaling):
    name = "log"

    def _validate(self):
        self._kappa = self._require("kappa", 0.0)

    def outgrows_log(self):
        return self._kappa > 1.0

    def value(self, n):
        if n < 2:
            raise ScalingError(f"log^kappa n is not positive at n={n}.")
        return math.log(n) ** self._kappa


class PowerLogScaling(_BaseScaling):
    name = "power_log"

    def _validate(self):
        self._gamma = self._require("gamma", 0.0, 1.0)

    def value(self, n):
        if n < 2:
            raise ScalingError(f"n^gamma log n is not positive at n={n}.")
        return float(n) ** self._gamma * math.log(n)


scalings = {
    "power": PowerScaling,
    "log": LogScaling,
    "power_log": PowerLogScaling
}


def make_scaling(rule):
    """Build a d_n rule from its description.

    :rule: Dict with the family under "rule" and its parameters
    :returns: _BaseScaling
    :raises: ScalingError for an unknown family or out-of-range parameters
    """

    rule = dict(rule)
    family = rule.pop("rule", None)
    if family not in scalings:
        raise ScalingError(f'Unknown d_n rule "{family}", expected one of {", ".join(scalings)}.')
    return scalings[family](rule)
