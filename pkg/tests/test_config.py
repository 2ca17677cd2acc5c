import pytest

from blipsim.config import WORKERS_ENV, ConfigError, ConfigLoader, schema_default


@pytest.fixture(autouse=True)
def no_env_workers(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)


@pytest.fixture
def config_file(tmp_path):
    def write(text):
        path = tmp_path / "config.yml"
        path.write_text(text)
        return str(path)
    return write


def test_core_defaults():
    core = ConfigLoader().load_core_config()
    assert core["workers"] == 1
    assert core["output"] == "blipsim-run"
    assert core["log_level"] == "INFO"
    assert core["log_file_name"] == "run.log"


def test_subcommand_defaults():
    shape = ConfigLoader().load_subcommand_config("shape")
    assert shape == {
        "p": 0.5,
        "seed": 0,
        "reps": 100,
        "n": [2000],
        "x": 1.0,
        "y": 1.0,
        "cell_budget": 1 << 34,
        "check": False,
        "tolerance": 0.02,
    }
    soft = ConfigLoader().load_subcommand_config("soft-edge")
    assert soft["n"] == [4000, 16000, 64000]
    assert soft["a"] == 0.75
    assert soft["method"] == "auto"
    assert soft["regime"] == "probability"
    assert ConfigLoader().load_subcommand_config("identities")["checks"] == ["relation", "jump-lemma", "lm-formula"]


def test_file_then_command_line(config_file):
    loader = ConfigLoader(config_file("core:\n  workers: 2\nshape:\n  p: 0.3\n  reps: 7\n"))
    shape = loader.load_subcommand_config("shape", {"p": 0.4, "x": None})
    assert shape["p"] == 0.4
    assert shape["reps"] == 7
    assert shape["x"] == 1.0
    assert loader.load_core_config()["workers"] == 2


def test_workers_precedence(config_file, monkeypatch):
    loader = ConfigLoader(config_file("core:\n  workers: 2\n"))
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert loader.load_core_config()["workers"] == 3
    assert loader.load_core_config({"workers": 5})["workers"] == 5


@pytest.mark.parametrize("value", ["x", "0"])
def test_invalid_env_workers(monkeypatch, value):
    monkeypatch.setenv(WORKERS_ENV, value)
    with pytest.raises(ConfigError):
        ConfigLoader().load_core_config()


def test_core_overrides_ignore_other_keys():
    core = ConfigLoader().load_core_config({"output": "elsewhere", "p": 0.3})
    assert core["output"] == "elsewhere"
    assert "p" not in core


@pytest.mark.parametrize("p", [0.0, 1.0, 1.5, -0.2])
def test_invalid_p(p):
    with pytest.raises(ConfigError):
        ConfigLoader().load_subcommand_config("simulate", {"p": p})


@pytest.mark.parametrize("seed, expected", [("0x2a", 42), ("42", 42), (7, 7)])
def test_seeds(seed, expected):
    assert ConfigLoader().load_subcommand_config("simulate", {"seed": seed})["seed"] == expected


@pytest.mark.parametrize("seed", ["abc", "-3"])
def test_invalid_seed(seed):
    with pytest.raises(ConfigError):
        ConfigLoader().load_subcommand_config("simulate", {"seed": seed})


def test_ladder_coercion():
    assert ConfigLoader().load_subcommand_config("simulate", {"n": "100,200, 400"})["n"] == [100, 200, 400]
    assert ConfigLoader().load_subcommand_config("simulate", {"n": 50})["n"] == [50]


@pytest.mark.parametrize("n", ["200,100", "100,100", "0,10", "abc"])
def test_invalid_ladders(n):
    with pytest.raises(ConfigError):
        ConfigLoader().load_subcommand_config("soft-edge", {"n": n})


def test_identity_checks():
    cfg = ConfigLoader().load_subcommand_config("identities", {"checks": "relation, tau-g"})
    assert cfg["checks"] == ["relation", "tau-g"]
    with pytest.raises(ConfigError):
        ConfigLoader().load_subcommand_config("identities", {"checks": "relation,magic"})


def test_crosscheck_needs_its_coordinates():
    with pytest.raises(ConfigError):
        ConfigLoader().load_subcommand_config("crosscheck", {"m": 10, "n": 10})
    cfg = ConfigLoader().load_subcommand_config("crosscheck", {"m": 10, "n": 10, "j": 3})
    assert cfg["reps"] == 2000


@pytest.mark.parametrize("overrides", [
    {"a": 1.0},
    {"reps": 1},
    {"method": "magic"},
    {"dn_rule": "linear"},
    {"regime": "surely"},
    {"x": -1.0},
])
def test_invalid_soft_edge_values(overrides):
    with pytest.raises(ConfigError):
        ConfigLoader().load_subcommand_config("soft-edge", overrides)


def test_unknown_keys_are_dropped(config_file):
    cfg = ConfigLoader(config_file("shape:\n  bogus: 1\n  seed: 0x10\n")).load_subcommand_config("shape")
    assert "bogus" not in cfg
    assert cfg["seed"] == 16


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        ConfigLoader(str(tmp_path / "missing.yml")).load_core_config()


@pytest.mark.parametrize("text", ["core: [unclosed\n", "- a\n- b\n", "shape: 3\n"])
def test_malformed_files(config_file, text):
    with pytest.raises(ConfigError):
        ConfigLoader(config_file(text)).load_subcommand_config("shape")


def test_unknown_subcommand():
    with pytest.raises(ConfigError):
        ConfigLoader().load_subcommand_config("fit")


def test_schema_default():
    assert schema_default("core", "workers") == 1
    assert schema_default("hard-edge", "beta") == 0.5
    assert schema_default("simulate", "m") is None
