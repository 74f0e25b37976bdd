"""Run configuration: INI file parsing, flag overrides, stage seeds.

Every pipeline stage derives its own seed from the single master seed, so
any stage can be rerun in isolation and still line up with a full run. The
derivation is the SplitMix64 sequence seeded with the master seed: stage i
(in STAGE_ORDER) uses the (i+1)-th output.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

from .errors import ConfigError

STAGE_ORDER = ("data", "prepare", "classifier", "flow", "generate", "evaluate")

_MASK64 = (1 << 64) - 1


def _splitmix64_next(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def stage_seed(master: int, stage: str) -> int:
    """Deterministic per-stage seed: output number index(stage)+1 of the
    SplitMix64 stream whose state starts at the master seed."""
    if stage not in STAGE_ORDER:
        raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGE_ORDER}")
    state = master & _MASK64
    out = 0
    for _ in range(STAGE_ORDER.index(stage) + 1):
        state, out = _splitmix64_next(state)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand needs, from file plus flag overrides."""

    data_path: str | None = None
    schema_path: str | None = None
    out_dir: str = "out"
    seed: int | None = None
    test_frac: float = 0.2
    clf_hidden_sizes: tuple = (64, 32)
    clf_dim_z: int = 8
    clf_epochs: int = 100
    clf_batch_size: int = 64
    clf_lr: float = 1e-3
    clf_weight_decay: float = 0.03
    flow_n_layers: int = 8
    flow_hidden_width: int = 64
    flow_alpha: float = 2.0
    flow_epochs: int = 200
    flow_batch_size: int = 128
    flow_lr: float = 2e-3
    flow_lr_final: float | None = None
    gen_mode: str = "match-train"
    gen_counts: tuple | None = None
    bench_n: int = 5000
    bench_d: int = 16
    bench_priors: tuple = (0.65, 0.175, 0.175)
    bench_sigma: float = 1.0
    bench_mean_distance: float = 2.0
    bench_data_seed: int = 42

    def master_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("no master seed: set [run] seed in the config file "
                              "or pass --seed")
        return self.seed

    def classifier_params(self) -> dict:
        return {"hidden_sizes": self.clf_hidden_sizes, "dim_z": self.clf_dim_z,
                "epochs": self.clf_epochs, "batch_size": self.clf_batch_size,
                "lr": self.clf_lr, "weight_decay": self.clf_weight_decay}

    def flow_params(self) -> dict:
        return {"n_layers": self.flow_n_layers,
                "hidden_sizes": (self.flow_hidden_width, self.flow_hidden_width),
                "alpha": self.flow_alpha, "epochs": self.flow_epochs,
                "batch_size": self.flow_batch_size, "lr": self.flow_lr,
                "lr_final": self.flow_lr_final}


_GEN_MODES = ("match-train", "rebalance", "explicit")

# section -> key -> (RunConfig field, parser)
_KEYS = {
    "paths": {"data": ("data_path", str), "schema": ("schema_path", str),
              "out": ("out_dir", str)},
    "run": {"seed": ("seed", int), "test_frac": ("test_frac", float)},
    "classifier": {"hidden_sizes": ("clf_hidden_sizes", "int_tuple"),
                   "dim_z": ("clf_dim_z", int), "epochs": ("clf_epochs", int),
                   "batch_size": ("clf_batch_size", int), "lr": ("clf_lr", float),
                   "weight_decay": ("clf_weight_decay", float)},
    "flow": {"n_layers": ("flow_n_layers", int),
             "hidden_width": ("flow_hidden_width", int),
             "alpha": ("flow_alpha", float), "epochs": ("flow_epochs", int),
             "batch_size": ("flow_batch_size", int), "lr": ("flow_lr", float),
             "lr_final": ("flow_lr_final", "opt_float")},
    "generate": {"mode": ("gen_mode", str), "counts": ("gen_counts", "int_tuple")},
    "benchmark": {"n": ("bench_n", int), "d": ("bench_d", int),
                  "priors": ("bench_priors", "float_tuple"),
                  "sigma": ("bench_sigma", float),
                  "mean_distance": ("bench_mean_distance", float),
                  "data_seed": ("bench_data_seed", int)},
}


def _convert(kind, raw: str, where: str):
    try:
        if kind == "int_tuple":
            return tuple(int(tok.strip()) for tok in raw.split(","))
        if kind == "float_tuple":
            return tuple(float(tok.strip()) for tok in raw.split(","))
        if kind == "opt_float":
            return None if raw.strip().lower() == "none" else float(raw)
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse value {raw!r}: {exc}") from exc


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    ini = configparser.ConfigParser(interpolation=None)
    ini.optionxform = str
    try:
        ini.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    values = {}
    for section in ini.sections():
        if section not in _KEYS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in ini[section].items():
            if key not in _KEYS[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            field_name, kind = _KEYS[section][key]
            values[field_name] = _convert(kind, raw, f"{source} [{section}] {key}")
    cfg = RunConfig(**values)
    _validate(cfg, source)
    return cfg


def _validate(cfg: RunConfig, source: str) -> None:
    if cfg.gen_mode not in _GEN_MODES:
        raise ConfigError(f"{source}: generation mode must be one of {_GEN_MODES}, "
                          f"got {cfg.gen_mode!r}")
    if cfg.gen_mode == "explicit" and cfg.gen_counts is None:
        raise ConfigError(f"{source}: mode 'explicit' needs [generate] counts")
    if not 0.0 < cfg.test_frac < 0.5:
        raise ConfigError(f"{source}: test_frac must lie in (0, 0.5), "
                          f"got {cfg.test_frac}")
    for name in ("clf_epochs", "clf_batch_size", "flow_epochs", "flow_batch_size",
                 "flow_n_layers", "clf_dim_z", "flow_hidden_width"):
        if getattr(cfg, name) < 0:
            raise ConfigError(f"{source}: {name} must be non-negative")
    if cfg.flow_lr_final is not None and cfg.flow_lr_final <= 0:
        raise ConfigError(f"{source}: [flow] lr_final must be positive or 'none', "
                          f"got {cfg.flow_lr_final}")


def load_config(path: str | None, seed: int | None = None,
                out: str | None = None) -> RunConfig:
    """Read the config file (defaults when None) and apply flag overrides."""
    if path is None:
        cfg = RunConfig()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = parse_config(fh.read(), source=str(path))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if out is not None:
        cfg = replace(cfg, out_dir=out)
    return cfg
