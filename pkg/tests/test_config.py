"""Flat key=value configuration parsing and overrides."""

import pytest

from spectralpurify.config import (
    ConfigError,
    SCHEMA,
    apply_overrides,
    default_config,
    dump_config,
    load_config,
)


class TestDefaults:
    def test_every_key_has_schema_entry(self):
        cfg = default_config()
        assert set(cfg) == set(SCHEMA)
        assert cfg["purify.d_a"] == 3.0
        assert cfg["purify.d_p"] == 2.0
        assert cfg["purify.delta"] == 0.2
        assert cfg["attack.epsilon"] == pytest.approx(8 / 255)
        assert cfg["attack.step_size"] == 0.007


class TestLoadConfig:
    def test_parses_values_and_comments(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# comment line\n"
            "seed = 5\n"
            "purify.t_star = 12   # inline comment\n"
            "purify.ase = false\n"
            "attack.norm = l2\n"
            "theory.k_grid = 0.2,0.4\n"
            "\n"
        )
        cfg = load_config(path)
        assert cfg["seed"] == 5
        assert cfg["purify.t_star"] == 12
        assert cfg["purify.ase"] is False
        assert cfg["attack.norm"] == "l2"
        assert cfg["theory.k_grid"] == (0.2, 0.4)
        # untouched keys keep defaults
        assert cfg["purify.d_a"] == 3.0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("purify.tstar = 12\n")
        with pytest.raises(ConfigError, match="unknown config key"):
            load_config(path)

    def test_bad_value_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("seed = banana\n")
        with pytest.raises(ConfigError, match="bad value"):
            load_config(path)

    def test_missing_equals_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("seed 5\n")
        with pytest.raises(ConfigError, match="key = value"):
            load_config(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.cfg")


class TestOverrides:
    def test_cli_values_win(self):
        cfg = apply_overrides(default_config(), {"seed": 9, "purify.t_star": "7"})
        assert cfg["seed"] == 9
        assert cfg["purify.t_star"] == 7

    def test_none_values_ignored(self):
        cfg = apply_overrides(default_config(), {"seed": None})
        assert cfg["seed"] == default_config()["seed"]

    def test_unknown_override_rejected(self):
        with pytest.raises(ConfigError):
            apply_overrides(default_config(), {"seeed": 1})


class TestDump:
    def test_round_trips_through_parser(self, tmp_path):
        cfg = apply_overrides(default_config(), {"seed": 3, "purify.ase": False})
        text = dump_config(cfg)
        path = tmp_path / "dumped.cfg"
        path.write_text(text)
        assert load_config(path) == cfg
