from logging.handlers import RotatingFileHandler
from blipsim import __version__
from blipsim.config import ConfigError, ConfigLoader
from blipsim.fields import BernoulliField, FieldDomainError, GeometricField, ModelParams, RngSpec, jump_draws
from blipsim.identities import IdentityConfigError, IdentityDomainError, identities
from blipsim.montecarlo import (BudgetError, ExperimentConfig, ExperimentConfigError, ExperimentDomainError,
                                estimate_shape, exceedance_crosscheck, hard_edge_check, replica_field, replica_rng,
                                simulate_lengths, soft_edge_subcritical, soft_edge_supercritical,
                                strip_event_probability, trend_violation)
from blipsim.particles import (ParticleDomainError, PlatoonState, check_dtasep_rules, evolve_blocking_right,
                               evolve_dtasep, evolve_fragmentation, evolve_marked_left, evolve_r, write_breaks_csv,
                               write_trajectory_csv)
from blipsim.passage import PassageDomainError, blip_table, corner_growth_table, write_table_csv
from blipsim.pool import PoolStopped, ReplicaPool
from blipsim.scalings import ScalingError
from blipsim.store import RunStore

import logging

import numpy as np

# Errors caused by the resolved configuration rather than by the run itself
CONFIG_ERRORS = (
    ConfigError, ExperimentConfigError, ExperimentDomainError, BudgetError, IdentityConfigError,
    IdentityDomainError, FieldDomainError, PassageDomainError, ParticleDomainError, ScalingError,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


class Runner(object):

    def __init__(self, subcommand, overrides=None, config_path=None):

        self._subcommand = subcommand
        self._overrides = overrides or {}
        self._configloader = ConfigLoader(config_path)
        self._core = None
        self._config = None
        self._store = None
        self._pool = None
        self._handler = None

    def _setup_logging(self):
        """Setup logging for the run, into a rotating file of the run directory.

        :returns: Nothing
        """

        formatter = logging.Formatter(self._core["log_format"])
        self._handler = RotatingFileHandler(
            self._store.path(self._core["log_file_name"]),
            maxBytes=self._core["log_file_max_bytes"],
            backupCount=self._core["log_file_max_backups"]
        )
        self._handler.setFormatter(formatter)

        root_logger = logging.getLogger()
        root_logger.setLevel(self._core["log_level"])
        root_logger.addHandler(self._handler)

    def _teardown_logging(self):
        if self._handler is not None:
            logging.getLogger().removeHandler(self._handler)
            self._handler.close()
            self._handler = None

    def initialise(self):
        """Resolve the configuration and open the run directory.

        :returns: Nothing
        :raises: ConfigError on an invalid configuration, StoreError if the run directory can't be written
        """

        self._core = self._configloader.load_core_config(self._overrides)
        self._config = self._configloader.load_subcommand_config(self._subcommand, self._overrides)

        self._pool = ReplicaPool(self._core["workers"])
        self._store = RunStore(self._core["output"])
        self._store.open(self._subcommand, {"core": self._core, self._subcommand: self._config}, __version__)

        self._setup_logging()

        logging.info(f'Running "{self._subcommand}" with {self._core["workers"]} worker(s).')

    def _experiment_config(self, **kwargs):
        cfg = self._config
        return ExperimentConfig(
            params=ModelParams(cfg["p"]),
            ns=cfg["n"],
            replicas=cfg["reps"],
            seed=cfg["seed"],
            cell_budget=cfg["cell_budget"],
            **kwargs
        )

    def _write_ladder(self, summaries):
        self._store.flush_records()
        self._store.write_summary(summaries)

    def _run_simulate(self):
        cfg = self._config
        config = self._experiment_config()
        summaries = simulate_lengths(config, cfg["m"], cfg["model"], self._pool, self._store.add_record)
        self._write_ladder(summaries)

        # Whole table of the first replica at the first size
        if cfg["table"]:
            n = config.ns[0]
            m = n if cfg["m"] is None else cfg["m"]
            field = replica_field(config.params, replica_rng(config.seed, f"simulate-{cfg['model']}", n, 0), cfg["model"])
            table = blip_table(field, m, n) if cfg["model"] == "blip" else corner_growth_table(field, m, n)
            self._store.write_text("table.csv", lambda f: write_table_csv(table, f))

        return EXIT_OK

    def _check(self, name, holds):
        if holds:
            logging.info(f"Check {name} passed.")
            return EXIT_OK
        logging.warning(f"Check {name} failed.")
        return EXIT_FAILURE

    def _run_shape(self):
        cfg = self._config
        summaries = estimate_shape(self._experiment_config(), cfg["x"], cfg["y"], self._pool, self._store.add_record)
        self._write_ladder(summaries)

        if not cfg["check"]:
            return EXIT_OK
        last = summaries[-1]
        return self._check("shape", abs(last.mean - last.ref_value) <= cfg["tolerance"])

    def _run_soft_edge(self):
        cfg = self._config
        dn = {"rule": cfg["dn_rule"]}
        dn.update({"kappa": cfg["dn_kappa"]} if cfg["dn_rule"] == "log" else {"gamma": cfg["dn_gamma"]})
        config = self._experiment_config(
            a=cfg["a"], x=cfg["x"], dn=dn, epsilon=cfg["epsilon"], regime=cfg["regime"], c=cfg["c"],
            method=cfg["method"], direct_threshold=cfg["direct_threshold"], strip_budget=cfg["strip_budget"],
        )

        if cfg["event"]:
            summaries = strip_event_probability(config, self._pool, self._store.add_record)
        elif config.a <= 0.5:
            summaries = soft_edge_subcritical(config, self._pool, self._store.add_record)
        else:
            summaries = soft_edge_supercritical(config, self._pool, self._store.add_record)
        self._write_ladder(summaries)

        if summaries[0].tail_exceedance is not None:
            rows = "".join(f"{s.n},{s.tail_exceedance!r}\n" for s in summaries)
            self._store.write_text("tail.csv", lambda f: f.write("n,tail_exceedance\n" + rows))

        if not cfg["check"]:
            return EXIT_OK

        last = summaries[-1]
        if cfg["event"]:
            return self._check("strip-event", abs(last.mean - last.ref_value) <= cfg["tolerance"])

        if config.a <= 0.5:
            trend = trend_violation([s.exceedance for s in summaries], [s.exceedance_se for s in summaries])
            return self._check("soft-edge", trend is None and last.exceedance <= cfg["tolerance"])

        distances = [abs(s.median - s.ref_value) for s in summaries]
        trend = trend_violation(distances, [s.se for s in summaries])
        return self._check("soft-edge", trend is None and distances[-1] <= cfg["tolerance"])

    def _run_hard_edge(self):
        cfg = self._config
        config = self._experiment_config(y=cfg["y"], c1=cfg["c1"], beta=cfg["beta"])
        summaries = hard_edge_check(config, self._pool, self._store.add_record)
        self._write_ladder(summaries)

        if not cfg["check"]:
            return EXIT_OK
        last = summaries[-1]
        return self._check("hard-edge", abs(last.median - last.ref_value) <= cfg["tolerance"] * last.ref_value)

    def _identity_reports(self, index):
        cfg = self._config
        size = cfg["size"]
        rng = replica_rng(cfg["seed"], "identities", size, index)
        field = BernoulliField(ModelParams(cfg["p"]), rng)

        reports = []
        for name in cfg["checks"]:
            if name == "tau-g":
                report = identities[name](GeometricField(field.params, rng, "unshifted"), size, size)
            elif name == "coupling":
                report = identities[name](field, size, size)
            else:
                report = identities[name](field, size, size, cfg["horizon"])
            reports.append(report)
        return reports

    def _run_identities(self):
        cfg = self._config
        results = self._pool.map(self._identity_reports, [(f,) for f in range(cfg["fields"])])

        failures = 0
        for index, reports in enumerate(results):
            for report in reports:
                self._store.add_record(dict(report.to_dict(), field=index))
                failures += 0 if report.passed else 1
        self._store.flush_records()

        logging.info(f"{cfg['fields']} field(s) checked against {', '.join(cfg['checks'])}: {failures} failure(s).")
        return EXIT_OK if failures == 0 else EXIT_FAILURE

    def _run_processes(self):
        cfg = self._config
        K, T = cfg["particles"], cfg["steps"]
        field = BernoulliField(ModelParams(cfg["p"]), RngSpec(cfg["seed"], cfg["stream"]))
        spaced = cfg["spacing"] * np.arange(1, K + 1, dtype=np.int64)

        if cfg["kind"] == "fragmentation":
            state = PlatoonState.from_positions(np.arange(1, K + 1))
            _, events = evolve_fragmentation(jump_draws(field, K, T), state, T)
            self._store.write_text("breaks.csv", lambda f: write_breaks_csv(events, f))
            logging.info(f"{len(events)} platoon step(s) recorded.")
            return EXIT_OK

        if cfg["kind"] == "r":
            traj = evolve_r(field.shifted(), K, T)
        elif cfg["kind"] == "dtasep":
            traj = evolve_dtasep(jump_draws(field, K, T), np.arange(1, K + 1), T)
        elif cfg["kind"] == "z":
            traj = evolve_marked_left(field, spaced, T)
        else:
            traj = evolve_blocking_right(field, spaced, T, cfg["max_jump"])

        self._store.write_text("trajectory.csv", lambda f: write_trajectory_csv(traj, f))

        violation = traj.order_violation()
        if violation is None and traj.kind == "DTASEP":
            violation = check_dtasep_rules(traj)
        if violation is not None:
            logging.warning(f"The {traj.kind} trajectory breaks its rules at (k, t) = {violation}.")
            return EXIT_FAILURE
        return EXIT_OK

    def _run_crosscheck(self):
        cfg = self._config
        config = ExperimentConfig(
            params=ModelParams(cfg["p"]), ns=(cfg["n"],), replicas=cfg["reps"], seed=cfg["seed"],
            cell_budget=cfg["cell_budget"],
        )
        result = exceedance_crosscheck(config, cfg["m"], cfg["n"], cfg["j"], self._pool)
        self._store.add_record(result.to_dict())
        self._store.flush_records()
        return EXIT_OK if result.agree else EXIT_FAILURE

    def run(self):
        """Run the subcommand and close the run directory.

        :returns: Exit code, 0 on success and 1 on a failed check or an interruption
        :raises: The CONFIG_ERRORS raised by the experiment; the manifest is closed as failed first
        """

        handlers = {
            "simulate": self._run_simulate,
            "shape": self._run_shape,
            "soft-edge": self._run_soft_edge,
            "hard-edge": self._run_hard_edge,
            "identities": self._run_identities,
            "processes": self._run_processes,
            "crosscheck": self._run_crosscheck,
        }

        status = "failed"
        try:
            code = handlers[self._subcommand]()
            status = "ok" if code == EXIT_OK else "failed"
            return code

        except PoolStopped:
            logging.warning(f'Run "{self._subcommand}" interrupted.')
            status = "interrupted"
            return EXIT_FAILURE

        finally:
            self._store.close(status)
            logging.info(f'Run "{self._subcommand}" finished with status "{status}".')
            self._teardown_logging()

    def stop(self):
        """Stop the worker pool after the running tasks.

        :returns: Nothing
        """

        if self._pool is not None:
            self._pool.stop()
