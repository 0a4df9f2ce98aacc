"""Experiment configuration: a small INI dialect parsed into a dataclass.

Sections and keys are fixed; unknown names raise with their field path so
typos fail loudly.  See README for the full grammar.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from . import models

_SCHEMA = {
    "experiment": {"model", "n_sites"},
    "lambda": {"start", "stop", "steps"},
    "sector": {"enabled"},
    "template": {"enabled", "name"},
    "optimizer": {"grad_tol", "max_iter", "init"},
    "random_model": {"seed", "t", "n_instances"},
    "ode": {"enabled", "h_p", "h_lambda", "reproject_every"},
    "output": {"dir", "formats"},
}

KNOWN_FORMATS = ("csv", "json", "dat", "png")


class ConfigError(ValueError):
    """Configuration parse or validation failure, carrying the field path."""


@dataclass
class ExperimentConfig:
    model: str = "aklt"
    n_sites: int = 6
    lambda_start: float = 0.0
    lambda_stop: float = 1.0
    lambda_steps: int = 11
    sector_enabled: bool = True
    template_enabled: bool = True
    template_name: str = ""
    grad_tol: float = 1e-7
    max_iter: int = 500
    optimizer_init: str = "warm"
    seed: int = 0
    t: float = 0.0
    n_instances: int = 1
    ode_enabled: bool = False
    ode_h_p: float = 1e-4
    ode_h_lambda: float = 1e-4
    ode_reproject_every: int = 0
    output_dir: str = "out"
    output_formats: tuple[str, ...] = ("csv", "json", "dat", "png")

    def validate(self) -> None:
        if self.model not in models.MODEL_NAMES:
            raise ConfigError(f"experiment.model: unknown model {self.model!r}")
        if self.n_sites < 2:
            raise ConfigError("experiment.n_sites: must be >= 2")
        if self.lambda_steps < 2:
            raise ConfigError("lambda.steps: must be >= 2")
        lo, hi = models.LAMBDA_RANGES[self.model]
        if not (lo <= self.lambda_start < self.lambda_stop <= hi):
            raise ConfigError(
                f"lambda: range [{self.lambda_start}, {self.lambda_stop}] must be increasing "
                f"and lie within [{lo}, {hi}] for model {self.model!r}"
            )
        if self.grad_tol <= 0:
            raise ConfigError("optimizer.grad_tol: must be > 0")
        if self.max_iter < 1:
            raise ConfigError("optimizer.max_iter: must be >= 1")
        if self.optimizer_init not in ("warm", "canonical"):
            raise ConfigError("optimizer.init: must be 'warm' or 'canonical'")
        if self.n_instances < 1:
            raise ConfigError("random_model.n_instances: must be >= 1")
        if self.model != "random" and self.n_instances != 1:
            raise ConfigError("random_model.n_instances: only the random model uses instances")
        if self.model == "random" and self.sector_enabled:
            raise ConfigError("sector.enabled: the random model has no symmetry sectors")
        if self.model == "random" and self.template_enabled:
            raise ConfigError("template.enabled: the random model uses an unconstrained S")
        if self.template_name and self.template_name not in ("aklt", "ghz", "ghz_diag"):
            raise ConfigError(f"template.name: unknown template {self.template_name!r}")
        if self.ode_enabled and self.template_name == "" and not self.template_enabled:
            raise ConfigError("ode.enabled: the path ODE needs an active template")
        for fmt in self.output_formats:
            if fmt not in KNOWN_FORMATS:
                raise ConfigError(f"output.formats: unknown format {fmt!r}")

    def resolved_template_name(self) -> str:
        if self.template_name:
            return self.template_name
        return self.model


def _parse_bool(section: str, key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{section}.{key}: expected a boolean, got {raw!r}")


def _parse_number(section: str, key: str, raw: str, kind):
    try:
        return kind(raw)
    except ValueError as err:
        raise ConfigError(f"{section}.{key}: expected {kind.__name__}, got {raw!r}") from err


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file."""
    parser = configparser.ConfigParser()
    text = Path(path).read_text()
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as err:
        raise ConfigError(f"config parse failure: {err}") from err
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{section}: unknown section")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")

    cfg = ExperimentConfig()

    def get(section, key, default=None):
        if parser.has_option(section, key):
            return parser.get(section, key)
        return default

    if (raw := get("experiment", "model")) is not None:
        cfg.model = raw.strip()
    if (raw := get("experiment", "n_sites")) is not None:
        cfg.n_sites = _parse_number("experiment", "n_sites", raw, int)
    if (raw := get("lambda", "start")) is not None:
        cfg.lambda_start = _parse_number("lambda", "start", raw, float)
    if (raw := get("lambda", "stop")) is not None:
        cfg.lambda_stop = _parse_number("lambda", "stop", raw, float)
    if (raw := get("lambda", "steps")) is not None:
        cfg.lambda_steps = _parse_number("lambda", "steps", raw, int)
    if (raw := get("sector", "enabled")) is not None:
        cfg.sector_enabled = _parse_bool("sector", "enabled", raw)
    if (raw := get("template", "enabled")) is not None:
        cfg.template_enabled = _parse_bool("template", "enabled", raw)
    if (raw := get("template", "name")) is not None:
        cfg.template_name = raw.strip()
    if (raw := get("optimizer", "grad_tol")) is not None:
        cfg.grad_tol = _parse_number("optimizer", "grad_tol", raw, float)
    if (raw := get("optimizer", "max_iter")) is not None:
        cfg.max_iter = _parse_number("optimizer", "max_iter", raw, int)
    if (raw := get("optimizer", "init")) is not None:
        cfg.optimizer_init = raw.strip()
    if (raw := get("random_model", "seed")) is not None:
        cfg.seed = _parse_number("random_model", "seed", raw, int)
    if (raw := get("random_model", "t")) is not None:
        cfg.t = _parse_number("random_model", "t", raw, float)
    if (raw := get("random_model", "n_instances")) is not None:
        cfg.n_instances = _parse_number("random_model", "n_instances", raw, int)
    if (raw := get("ode", "enabled")) is not None:
        cfg.ode_enabled = _parse_bool("ode", "enabled", raw)
    if (raw := get("ode", "h_p")) is not None:
        cfg.ode_h_p = _parse_number("ode", "h_p", raw, float)
    if (raw := get("ode", "h_lambda")) is not None:
        cfg.ode_h_lambda = _parse_number("ode", "h_lambda", raw, float)
    if (raw := get("ode", "reproject_every")) is not None:
        cfg.ode_reproject_every = _parse_number("ode", "reproject_every", raw, int)
    if (raw := get("output", "dir")) is not None:
        cfg.output_dir = raw.strip()
    if (raw := get("output", "formats")) is not None:
        cfg.output_formats = tuple(f.strip() for f in raw.split(",") if f.strip())
    cfg.validate()
    return cfg


def config_as_dict(cfg: ExperimentConfig) -> dict:
    return {
        "experiment": {"model": cfg.model, "n_sites": cfg.n_sites},
        "lambda": {"start": cfg.lambda_start, "stop": cfg.lambda_stop, "steps": cfg.lambda_steps},
        "sector": {"enabled": cfg.sector_enabled},
        "template": {"enabled": cfg.template_enabled, "name": cfg.template_name},
        "optimizer": {
            "grad_tol": cfg.grad_tol, "max_iter": cfg.max_iter, "init": cfg.optimizer_init,
        },
        "random_model": {"seed": cfg.seed, "t": cfg.t, "n_instances": cfg.n_instances},
        "ode": {
            "enabled": cfg.ode_enabled, "h_p": cfg.ode_h_p, "h_lambda": cfg.ode_h_lambda,
            "reproject_every": cfg.ode_reproject_every,
        },
        "output": {"dir": cfg.output_dir, "formats": list(cfg.output_formats)},
    }
