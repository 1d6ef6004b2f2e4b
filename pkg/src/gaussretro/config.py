"""Run configuration: JSON file plus command-line overrides."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, InvalidArgumentError
from .gaussian import (
    DEFAULT_EPS,
    GaussianOperator,
    Kind,
    QuadratureDirection,
    make_epr_effect,
    make_homodyne_effect,
    make_two_mode_squeezed,
)
from .joint import Scenario
from .retrodiction import PqsPair

COMMANDS = (
    "butterfly", "single-retro", "two-mode-retro", "heterodyne",
    "joint-predict", "joint-retro", "optimal-combo", "verify",
)

# default pair: rho squeezed along p, effect along x
DEFAULT_PAIR = {
    "rho": {"n_modes": 1, "kind": "State", "mean": [0.0, 0.0], "cov": [[2.5, 0.0], [0.0, 0.1]]},
    "effect": {"n_modes": 1, "kind": "Effect", "mean": [0.0, 0.0], "cov": [[0.1, 0.0], [0.0, 2.5]]},
}
DEFAULT_TWO_MODE = {"s": 2.0, "s_prime": -2.0, "rho_means": [0.0] * 4, "effect_means": [0.0] * 4}
DEFAULT_SCENARIO = {"m": 3, "z": 1.0, "s": 0.0, "s_prime": 0.0}

_TOP_KEYS = {
    "command", "pair", "two_mode", "scenario", "sweep", "k", "phi_points", "phi_period",
    "seed", "trials", "eps", "out", "workers", "quick",
}


@dataclass
class RunConfig:
    command: str
    pair: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_PAIR)))
    two_mode: dict = field(default_factory=lambda: dict(DEFAULT_TWO_MODE))
    scenario: dict = field(default_factory=lambda: dict(DEFAULT_SCENARIO))
    sweep: dict | None = None
    k: int = 0
    phi_points: int = 64
    phi_period: float = 2 * math.pi
    seed: int = 0
    trials: int = 1_000_000
    eps: float = DEFAULT_EPS
    out: str = "out"
    workers: int = 1
    quick: bool = False

    def resolved(self) -> dict:
        """Plain-data view of every setting, for provenance records."""
        return {
            "command": self.command, "pair": self.pair, "two_mode": self.two_mode,
            "scenario": self.scenario, "sweep": self.sweep, "k": self.k,
            "phi_points": self.phi_points, "phi_period": self.phi_period, "seed": self.seed,
            "trials": self.trials, "eps": self.eps, "workers": self.workers, "quick": self.quick,
        }

    # -- typed accessors ------------------------------------------------------

    def build_pair(self) -> PqsPair:
        try:
            rho = GaussianOperator.from_dict(self.pair["rho"])
            eff = self.pair["effect"]
            if "homodyne" in eff:
                h = eff["homodyne"]
                effect = make_homodyne_effect(
                    QuadratureDirection(0, float(h.get("phi", 0.0))),
                    float(h.get("outcome", 0.0)), self.eps)
            else:
                effect = GaussianOperator.from_dict({"kind": "Effect", **eff})
            if effect.kind is not Kind.EFFECT:
                raise InvalidArgumentError("pair.effect must have kind Effect")
            return PqsPair(rho, effect)
        except KeyError as exc:
            raise ConfigError(f"missing key {exc.args[0]!r}", field="pair") from None
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc), field="pair") from None

    def build_two_mode(self) -> tuple[GaussianOperator, GaussianOperator]:
        tm = self.two_mode
        try:
            return (make_two_mode_squeezed(float(tm["s"]), tm.get("rho_means")),
                    make_epr_effect(float(tm["s_prime"]), tm.get("effect_means")))
        except KeyError as exc:
            raise ConfigError(f"missing key {exc.args[0]!r}", field="two_mode") from None
        except (InvalidArgumentError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field="two_mode") from None

    def build_scenario(self, **overrides) -> Scenario:
        d = {**self.scenario, **overrides}
        try:
            return Scenario.from_dict(d)
        except (InvalidArgumentError, TypeError) as exc:
            raise ConfigError(str(exc), field="scenario") from None

    def sweep_grid(self) -> list[dict]:
        """Cartesian product of the sweep lists, in nested ``m, z, s, s_prime`` order."""
        if not self.sweep:
            return []
        base = self.scenario
        axes = []
        for key in ("m", "z", "s", "s_prime"):
            values = self.sweep.get(key, [base.get(key, DEFAULT_SCENARIO.get(key))])
            if not isinstance(values, list) or not values:
                raise ConfigError("sweep axes must be non-empty lists", field=f"sweep.{key}")
            axes.append((key, values))
        unknown = set(self.sweep) - {k for k, _ in axes}
        if unknown:
            raise ConfigError(f"unknown sweep axes {sorted(unknown)}", field="sweep")
        grid = [{}]
        for key, values in axes:
            grid = [{**g, key: v} for g in grid for v in values]
        return grid


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def load_config(path: str | Path | None, command: str | None,
                overrides: dict | None = None) -> RunConfig:
    """Parse a JSON config file; ``command`` and ``overrides`` from the command line win."""
    data: dict = {}
    text = ""
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} does not exist")
        text = p.read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, line=exc.lineno) from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", line=1)
    unknown = set(data) - _TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key (allowed: {sorted(_TOP_KEYS)})", field=key,
                          line=_line_of(text, key))
    cmd = command or data.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {list(COMMANDS)}, got {cmd!r}",
                          field="command", line=_line_of(text, "command"))
    data = {k: v for k, v in data.items() if k != "command"}
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = RunConfig(command=cmd, **data)
    _check(cfg, text)
    return cfg


def _check(cfg: RunConfig, text: str):
    def fail(key, msg):
        raise ConfigError(msg, field=key, line=_line_of(text, key.split(".")[0]))

    for key in ("k", "phi_points", "seed", "trials", "workers"):
        v = getattr(cfg, key)
        if isinstance(v, bool) or not isinstance(v, int):
            fail(key, f"must be an integer, got {v!r}")
    if cfg.phi_points < 1:
        fail("phi_points", "grid must be non-empty")
    if cfg.seed < 0 or cfg.seed >= 2 ** 64:
        fail("seed", "must fit in an unsigned 64-bit integer")
    if cfg.trials < 1000:
        fail("trials", "must be at least 1000")
    if cfg.workers < 1:
        fail("workers", "must be at least 1")
    if not (isinstance(cfg.eps, (int, float)) and cfg.eps > 0):
        fail("eps", "must be positive")
    if not (isinstance(cfg.phi_period, (int, float)) and cfg.phi_period > 0):
        fail("phi_period", "must be positive")
    for key in ("pair", "two_mode", "scenario"):
        if not isinstance(getattr(cfg, key), dict):
            fail(key, "must be a JSON object")
    if cfg.sweep is not None and not isinstance(cfg.sweep, dict):
        fail("sweep", "must be a JSON object")
