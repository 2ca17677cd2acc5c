from cerberus import Validator
from blipsim.fields import FieldDomainError, parse_seed
from blipsim.identities import identities
from blipsim.montecarlo import METHODS, REGIMES
from blipsim.scalings import scalings

import os
import yaml


WORKERS_ENV = "BLIPSIM_WORKERS"

SUBCOMMANDS = ("simulate", "shape", "soft-edge", "hard-edge", "identities", "processes", "crosscheck")

PROCESS_KINDS = ("r", "dtasep", "z", "w", "fragmentation")


def _seed(value):
    try:
        return parse_seed(value)
    except FieldDomainError as e:
        raise ValueError(str(e))


def _int_list(value):
    if isinstance(value, str):
        return [int(v) for v in value.split(",") if v.strip()]
    if isinstance(value, int):
        return [value]
    return value


def _open_unit(field, value, error):
    if not 0.0 < value < 1.0:
        error(field, "must lie in the open interval (0, 1)")


def _positive(field, value, error):
    if not value > 0:
        error(field, "must be positive")


def _increasing(field, value, error):
    if any(b <= a for a, b in zip(value, value[1:])):
        error(field, "must be strictly increasing")


CORE_SCHEMA = {
    "log_level": {
        "type": "string",
        "required": False,
        "allowed": ["CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG", "NOTSET"],
        "default": "INFO"
    },
    "log_format": {
        "type": "string",
        "required": False,
        "default": "%(asctime)s :: %(levelname)s :: %(threadName)s :: %(message)s"
    },
    "log_file_name": {
        "type": "string",
        "required": False,
        "default": "run.log"
    },
    "log_file_max_bytes": {
        "type": "integer",
        "required": False,
        "min": 0,
        "default": 5000000
    },
    "log_file_max_backups": {
        "type": "integer",
        "required": False,
        "min": 0,
        "default": 5
    },
    "output": {
        "type": "string",
        "required": False,
        "default": "blipsim-run"
    },
    "workers": {
        "type": "integer",
        "required": False,
        "min": 1,
        "default": 1
    }
}

_P = {"type": "float", "coerce": float, "check_with": _open_unit, "default": 0.5}
_SEED = {"type": "integer", "coerce": _seed, "default": 0}
_CHECK = {"type": "boolean", "default": False}
_CELL_BUDGET = {"type": "integer", "min": 1, "default": 1 << 34}


def _ladder(default):
    return {
        "type": "list",
        "coerce": _int_list,
        "minlength": 1,
        "check_with": _increasing,
        "schema": {"type": "integer", "min": 1},
        "default": default
    }


def _reps(default):
    return {"type": "integer", "min": 2, "default": default}


def _positive_float(default):
    return {"type": "float", "coerce": float, "check_with": _positive, "default": default}


SCHEMAS = {
    "simulate": {
        "p": _P,
        "seed": _SEED,
        "reps": _reps(100),
        "n": _ladder([200]),
        "m": {"type": "integer", "min": 1, "nullable": True, "default": None},
        "model": {"type": "string", "allowed": ["blip", "lpp"], "default": "blip"},
        "table": {"type": "boolean", "default": False},
        "cell_budget": _CELL_BUDGET
    },
    "shape": {
        "p": _P,
        "seed": _SEED,
        "reps": _reps(100),
        "n": _ladder([2000]),
        "x": _positive_float(1.0),
        "y": _positive_float(1.0),
        "cell_budget": _CELL_BUDGET,
        "check": _CHECK,
        "tolerance": _positive_float(0.02)
    },
    "soft-edge": {
        "p": _P,
        "seed": _SEED,
        "reps": _reps(200),
        "n": _ladder([4000, 16000, 64000]),
        "x": {"type": "float", "coerce": float, "min": 0.0, "default": 1.0},
        "a": {"type": "float", "coerce": float, "check_with": _open_unit, "default": 0.75},
        "dn_rule": {"type": "string", "allowed": list(scalings.keys()), "default": "power"},
        "dn_gamma": _positive_float(0.25),
        "dn_kappa": _positive_float(2.0),
        "epsilon": _positive_float(1.0),
        "regime": {"type": "string", "allowed": list(REGIMES), "default": "probability"},
        "event": {"type": "boolean", "default": False},
        "c": _positive_float(1.0),
        "method": {"type": "string", "allowed": list(METHODS), "default": "auto"},
        "direct_threshold": {"type": "integer", "min": 0, "default": 2000},
        "strip_budget": {"type": "integer", "min": 1, "default": 1 << 31},
        "cell_budget": _CELL_BUDGET,
        "check": _CHECK,
        "tolerance": _positive_float(0.03)
    },
    "hard-edge": {
        "p": _P,
        "seed": _SEED,
        "reps": _reps(200),
        "n": _ladder([1000, 4000, 16000]),
        "c1": _positive_float(1.0),
        "y": _positive_float(1.0),
        "beta": {"type": "float", "coerce": float, "check_with": _open_unit, "default": 0.5},
        "cell_budget": _CELL_BUDGET,
        "check": _CHECK,
        "tolerance": _positive_float(0.15)
    },
    "identities": {
        "p": _P,
        "seed": _SEED,
        "size": {"type": "integer", "min": 1, "default": 40},
        "fields": {"type": "integer", "min": 1, "default": 200},
        "checks": {
            "type": "list",
            "coerce": lambda v: [c.strip() for c in v.split(",")] if isinstance(v, str) else v,
            "schema": {"type": "string", "allowed": list(identities.keys())},
            "default": ["relation", "jump-lemma", "lm-formula"]
        },
        "horizon": {"type": "integer", "min": 1, "nullable": True, "default": None}
    },
    "processes": {
        "p": _P,
        "seed": _SEED,
        "stream": {"type": "integer", "coerce": _seed, "default": 0},
        "kind": {"type": "string", "allowed": list(PROCESS_KINDS), "default": "r"},
        "particles": {"type": "integer", "min": 1, "default": 20},
        "steps": {"type": "integer", "min": 1, "default": 20},
        "spacing": {"type": "integer", "min": 1, "default": 2},
        "max_jump": {"type": "integer", "min": 1, "default": 64}
    },
    "crosscheck": {
        "p": _P,
        "seed": _SEED,
        "reps": _reps(2000),
        "m": {"type": "integer", "min": 1, "required": True},
        "n": {"type": "integer", "min": 1, "required": True},
        "j": {"type": "integer", "min": 1, "required": True},
        "cell_budget": _CELL_BUDGET
    }
}


class ConfigError(Exception):
    pass


class ConfigLoader(object):

    def __init__(self, config_file=None):
        self._config_file = config_file
        self._document = None

    def _validate_or_raise(self, schema, document, errdesc):
        """Validate a configuration or raise an error.

        :schema: Schema to use for validation
        :document: Document to validate against the schema
        :errdesc: Base error description
        :returns: Validated and normalized document
        :raises: ConfigError naming every offending field
        """

        validator = Validator(schema, purge_unknown=True)
        if not validator.validate(document):
            errors = ", ".join(
                [f"{k}: {v}" for k, v in validator.errors.items()]
            )
            raise ConfigError(f"{errdesc}: {errors}.")

        return validator.document

    def _load_document(self):
        """Load the YAML configuration file once.

        :returns: Dict with one section per subcommand plus "core"
        :raises: ConfigError in case of problem
        """

        if self._document is not None:
            return self._document

        if self._config_file is None:
            self._document = {}
            return self._document

        try:
            with open(self._config_file, "r") as f:
                document = yaml.safe_load(f) or {}
        except FileNotFoundError:
            raise ConfigError(f"The configuration file \"{self._config_file}\" doesn't exist.")
        except yaml.YAMLError as e:
            raise ConfigError(f"The configuration file \"{self._config_file}\" is not valid YAML: {e}")

        if not isinstance(document, dict):
            raise ConfigError(f"The configuration file \"{self._config_file}\" must hold a mapping.")

        self._document = document
        return document

    def _section(self, name):
        section = self._load_document().get(name) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"The \"{name}\" section of the configuration file must be a mapping.")
        return section

    def load_core_config(self, overrides=None):
        """Resolve the core configuration.

        The worker count is taken from the command line, then the
        BLIPSIM_WORKERS environment variable, then the file.

        :overrides: Dict of command line values, None meaning unset
        :returns: Dict with the configuration
        :raises: ConfigError in case of problem
        """

        document = dict(self._section("core"))

        env_workers = os.environ.get(WORKERS_ENV)
        if env_workers is not None:
            try:
                document["workers"] = int(env_workers)
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV}: must be an integer, got \"{env_workers}\".")

        document.update({k: v for k, v in (overrides or {}).items() if v is not None and k in CORE_SCHEMA})

        return self._validate_or_raise(CORE_SCHEMA, document, "Invalid core configuration")

    def load_subcommand_config(self, subcommand, overrides=None):
        """Resolve the configuration of a subcommand.

        :subcommand: Name of the subcommand
        :overrides: Dict of command line values, None meaning unset
        :returns: Dict with the configuration
        :raises: ConfigError in case of problem
        """

        if subcommand not in SCHEMAS:
            raise ConfigError(f"Unknown subcommand \"{subcommand}\".")

        schema = SCHEMAS[subcommand]
        document = dict(self._section(subcommand))
        document.update({k: v for k, v in (overrides or {}).items() if v is not None and k in schema})

        return self._validate_or_raise(schema, document, f"Invalid configuration for \"{subcommand}\"")


def schema_default(subcommand, field):
    schema = CORE_SCHEMA if subcommand == "core" else SCHEMAS[subcommand]
    return schema[field].get("default")
