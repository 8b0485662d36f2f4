"""Run configuration: TOML loading, validation and serialization.

Config layout (TOML, sections system / omega / run):

    [system]
    state_dim = 2
    input_dim = 1
    f0 = ["x1 + 0.01*x2", "..."]        # one expression per state
    g = [["0", "0.5*cos(x1)"]]          # one inner list per input column
    u_lo = [-0.1]
    u_hi = [0.1]

    [[omega]]
    lo = [-0.05, -0.01]
    hi = [0.05, 0.01]

    [run]
    epsilon = 0.001
    algorithm = "fixpoint"              # fixpoint | accelerated | baseline
    seed = 0
    # n_u = 10          (required for the baseline)
    # margin_r = 0.0    (extra robustness margin)
    # output_path = "out.json"
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import SystemModel

ALGORITHMS = ("fixpoint", "accelerated", "baseline")


class ConfigError(ValueError):
    """Validation failure; the message carries the offending field path."""


@dataclass
class RunConfig:
    state_dim: int
    input_dim: int
    f0: list[str]
    g: list[list[str]]
    u_lo: list[float]
    u_hi: list[float]
    omega: list[tuple[list[float], list[float]]]
    epsilon: float
    algorithm: str = "fixpoint"
    n_u: int | None = None
    margin_r: float = 0.0
    seed: int = 0
    output_path: str | None = None

    def model(self) -> SystemModel:
        return SystemModel.from_strings(self.f0, self.g, self.u_lo, self.u_hi, self.omega)

    def to_dict(self) -> dict:
        d = {
            "system": {
                "state_dim": self.state_dim,
                "input_dim": self.input_dim,
                "f0": self.f0,
                "g": self.g,
                "u_lo": self.u_lo,
                "u_hi": self.u_hi,
            },
            "omega": [{"lo": lo, "hi": hi} for lo, hi in self.omega],
            "run": {
                "epsilon": self.epsilon,
                "algorithm": self.algorithm,
                "margin_r": self.margin_r,
                "seed": self.seed,
            },
        }
        if self.n_u is not None:
            d["run"]["n_u"] = self.n_u
        if self.output_path is not None:
            d["run"]["output_path"] = self.output_path
        return d


def _need(table: dict, section: str, key: str, kinds, path=None):
    path = path or f"{section}.{key}"
    if key not in table:
        raise ConfigError(f"{path}: required")
    v = table[key]
    if not isinstance(v, kinds):
        raise ConfigError(f"{path}: expected {kinds}, got {type(v).__name__}")
    return v


def config_from_dict(raw: dict) -> RunConfig:
    if "system" not in raw:
        raise ConfigError("system: required")
    if "run" not in raw:
        raise ConfigError("run: required")
    sy, run = raw["system"], raw["run"]
    n = _need(sy, "system", "state_dim", int)
    m = _need(sy, "system", "input_dim", int)
    f0 = _need(sy, "system", "f0", list)
    g = _need(sy, "system", "g", list)
    u_lo = _need(sy, "system", "u_lo", list)
    u_hi = _need(sy, "system", "u_hi", list)
    if len(f0) != n:
        raise ConfigError(f"system.f0: expected {n} expressions, got {len(f0)}")
    if len(g) != m:
        raise ConfigError(f"system.g: expected {m} columns, got {len(g)}")
    for i, col in enumerate(g):
        if not isinstance(col, list) or len(col) != n:
            raise ConfigError(f"system.g[{i}]: expected a list of {n} expressions")
    if len(u_lo) != m or len(u_hi) != m:
        raise ConfigError("system.u_lo/u_hi: length must equal input_dim")

    omega_raw = raw.get("omega")
    if not omega_raw:
        raise ConfigError("omega: required (at least one box)")
    omega = []
    for i, ob in enumerate(omega_raw):
        lo = _need(ob, f"omega[{i}]", "lo", list, path=f"omega[{i}].lo")
        hi = _need(ob, f"omega[{i}]", "hi", list, path=f"omega[{i}].hi")
        if len(lo) != n or len(hi) != n:
            raise ConfigError(f"omega[{i}]: lo/hi must have length {n}")
        if any(a > b for a, b in zip(lo, hi)):
            raise ConfigError(f"omega[{i}]: lo exceeds hi")
        omega.append(([float(x) for x in lo], [float(x) for x in hi]))

    eps = _need(run, "run", "epsilon", (int, float))
    if eps <= 0:
        raise ConfigError("run.epsilon: must be positive")
    algorithm = run.get("algorithm", "fixpoint")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"run.algorithm: must be one of {ALGORITHMS}")
    n_u = run.get("n_u")
    if algorithm == "baseline":
        if n_u is None:
            raise ConfigError("run.n_u: required when algorithm is 'baseline'")
        if not isinstance(n_u, int) or n_u < 1:
            raise ConfigError("run.n_u: must be a positive integer")
    margin_r = float(run.get("margin_r", 0.0))
    if margin_r < 0:
        raise ConfigError("run.margin_r: must be nonnegative")
    seed = run.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("run.seed: must be an integer")

    cfg = RunConfig(
        state_dim=n,
        input_dim=m,
        f0=[str(s) for s in f0],
        g=[[str(s) for s in col] for col in g],
        u_lo=[float(x) for x in u_lo],
        u_hi=[float(x) for x in u_hi],
        omega=omega,
        epsilon=float(eps),
        algorithm=algorithm,
        n_u=n_u,
        margin_r=margin_r,
        seed=seed,
        output_path=run.get("output_path"),
    )
    cfg.model()  # surfaces expression syntax errors and dimension mismatches
    return cfg


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return config_from_dict(raw)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def dumps_config(cfg: RunConfig) -> str:
    """Emit the flat TOML schema above; load_config round-trips it."""
    d = cfg.to_dict()
    lines = ["[system]"]
    for k, v in d["system"].items():
        lines.append(f"{k} = {_toml_value(v)}")
    for ob in d["omega"]:
        lines.append("")
        lines.append("[[omega]]")
        lines.append(f"lo = {_toml_value(ob['lo'])}")
        lines.append(f"hi = {_toml_value(ob['hi'])}")
    lines.append("")
    lines.append("[run]")
    for k, v in d["run"].items():
        lines.append(f"{k} = {_toml_value(v)}")
    lines.append("")
    return "\n".join(lines)
