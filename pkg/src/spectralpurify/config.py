"""Flat key=value run configuration.

A config file holds one ``key = value`` pair per line ('#' starts a comment);
CLI flags override file values. Unknown keys are rejected so typos fail
loudly. ``dump_config`` prints the fully resolved configuration for
reproducibility.
"""

from __future__ import annotations

from pathlib import Path

__all__ = ["ConfigError", "SCHEMA", "default_config", "load_config", "apply_overrides", "dump_config"]


class ConfigError(ValueError):
    """Bad key, bad value, or unreadable config file (CLI exit code 2)."""


def _parse_bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float_list(s) -> tuple[float, ...]:
    if isinstance(s, (tuple, list)):
        return tuple(float(x) for x in s)
    return tuple(float(x) for x in str(s).split(",") if x.strip())


# key -> (parser, default, help)
SCHEMA: dict[str, tuple] = {
    "seed": (int, 0, "base seed; every stage derives its own stream from it"),
    "out": (str, "runs/default", "output directory"),
    "no_attack": (_parse_bool, False, "skip the attack stage; robust columns omitted"),
    # dataset
    "data.n_train": (int, 2048, "training images"),
    "data.n_eval": (int, 512, "evaluation images"),
    "data.height": (int, 32, "image height"),
    "data.width": (int, 32, "image width"),
    "data.sigma": (float, 0.05, "per-pixel mixture noise stddev"),
    "data.n_backgrounds": (int, 8, "scenes per class"),
    "data.background_rms": (float, 0.18, "scene field rms"),
    "data.background_alpha": (float, 1.3, "scene spectral falloff exponent"),
    "data.texture_rms": (float, 0.013, "class texture cue rms"),
    "data.task_seed": (int, 7, "seed fixing the mixture means"),
    # classifier
    "classifier.kind": (str, "softmax-linear", "softmax-linear or mlp-1hidden"),
    "classifier.weight_decay": (float, 1e-3, "L2 decay during training"),
    # schedule
    "schedule.T": (int, 50, "diffusion steps for the experiment"),
    # attack
    "attack.norm": (str, "linf", "linf or l2"),
    "attack.epsilon": (float, 8.0 / 255.0, "attack budget"),
    "attack.step_size": (float, 0.007, "PGD step size"),
    "attack.iterations": (int, 40, "PGD iterations"),
    "attack.random_start": (_parse_bool, True, "PGD random start inside the ball"),
    # purifier
    "purify.t_star": (int, 24, "diffusion depth before the reverse walk"),
    "purify.d_a": (float, 3.0, "amplitude exchange low-pass radius"),
    "purify.d_p": (float, 2.0, "phase projection low-pass radius"),
    "purify.delta": (float, 0.2, "phase clamp half-width, radians"),
    "purify.ase": (_parse_bool, True, "enable amplitude spectrum exchange"),
    "purify.psp": (_parse_bool, True, "enable phase spectrum projection"),
    "purify.init": (str, "diffuse-adv", "diffuse-adv or pure-noise"),
    # theory report
    "theory.a0_grid": (_parse_float_list, (3.0, 10.0, 20.0), "clean amplitudes for variance checks"),
    "theory.k_grid": (_parse_float_list, (0.1, 0.3, 0.5, 0.7, 0.9), "K=1/SNR values for phase checks"),
    "theory.amp_mc_n": (int, 200000, "MC draws per amplitude grid point"),
    "theory.phase_mc_n": (int, 1000000, "MC draws per phase grid point"),
}


def default_config() -> dict:
    return {k: spec[1] for k, spec in SCHEMA.items()}


def _convert(key: str, raw) -> object:
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    parser = SCHEMA[key][0]
    try:
        return parser(raw) if not isinstance(raw, str) else parser(raw.strip())
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def load_config(path) -> dict:
    """Parse a key=value file on top of the defaults."""
    cfg = default_config()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        cfg[key.strip()] = _convert(key.strip(), raw)
    return cfg


def apply_overrides(cfg: dict, overrides: dict) -> dict:
    """Apply CLI-style overrides (already-typed or string values)."""
    out = dict(cfg)
    for key, raw in overrides.items():
        if raw is None:
            continue
        out[key] = _convert(key, raw if isinstance(raw, str) else raw)
    return out


def dump_config(cfg: dict) -> str:
    lines = [f"{k} = {_fmt(cfg[k])}" for k in sorted(cfg)]
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    return str(v)
