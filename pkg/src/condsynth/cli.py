"""Command-line pipeline: prepare, train, generate, evaluate, benchmark.

Each subcommand is a pure function of (config file, referenced inputs,
master seed); outputs carry no timestamps or absolute paths, so reruns with
the same seed produce byte-identical files.

Exit codes: 0 success, 1 runtime failure, 2 usage or input-validation error.
"""

from __future__ import annotations

import argparse
import configparser
import io
import sys
from dataclasses import replace
from pathlib import Path

from .benchmark import BenchmarkSpec, benchmark_schema, make_benchmark
from .checkpoint import (file_sha256, load_classifier_checkpoint,
                         load_flow_checkpoint, save_classifier_checkpoint,
                         save_flow_checkpoint)
from .classifier import PreferenceClassifier
from .config import RunConfig, load_config, stage_seed
from .dataset import (TabularEncoder, class_histogram, load_csv, split_digest,
                      split_stratified, write_csv)
from .errors import CondsynthError, ConfigError, DataError
from .evaluation import format_report, machine_lines, run_tstr
from .flow import ConditionalFlow
from .schema import read_schema, write_schema
from .synthesis import generate, rebalance_counts, train_flow

STATS_FILE = "stats.ini"
TRAIN_FILE = "train.csv"
TEST_FILE = "test.csv"
CLASSIFIER_FILE = "classifier.ckpt"
FLOW_FILE = "flow.ckpt"
SYNTH_FILE = "synthetic.csv"
REPORT_TEXT = "report.txt"
REPORT_MACHINE = "report.tsv"


# -- shared plumbing -----------------------------------------------------------

def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_input(cfg: RunConfig, field: str) -> Path:
    value = getattr(cfg, field)
    if value is None:
        key = {"data_path": "[paths] data", "schema_path": "[paths] schema"}[field]
        raise ConfigError(f"missing {key}: set it in the config file")
    path = Path(value)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    return path


def _write_stats_ini(path: Path, schema, stats: dict, digest: str,
                     split_seed: int, test_frac: float, n_rows: int) -> None:
    ini = configparser.ConfigParser(interpolation=None)
    ini.optionxform = str
    ini["provenance"] = {
        "schema_digest": schema.digest(),
        "split_digest": digest,
        "split_seed": str(split_seed),
        "test_frac": repr(test_frac),
        "n_source_rows": str(n_rows),
    }
    ini["stats"] = {name: f"{mean!r} {std!r}" for name, (mean, std) in stats.items()}
    buf = io.StringIO()
    ini.write(buf)
    path.write_text(buf.getvalue())


def _read_stats_ini(path: Path):
    if not path.exists():
        raise ConfigError(f"{path} not found; run the prepare stage first")
    ini = configparser.ConfigParser(interpolation=None)
    ini.optionxform = str
    ini.read(path)
    prov = ini["provenance"]
    stats = {}
    for name, value in ini["stats"].items():
        mean, std = value.split()
        stats[name] = (float(mean), float(std))
    return prov, stats


def _load_split(cfg: RunConfig, schema):
    """Encoded train/test datasets with split provenance tags restored."""
    out = _out(cfg)
    prov, stats = _read_stats_ini(out / STATS_FILE)
    if prov["schema_digest"] != schema.digest():
        raise DataError(f"schema digest {schema.digest()} does not match the "
                        f"prepared split ({prov['schema_digest']})")
    encoder = TabularEncoder.from_stats(schema, stats)
    digest = prov["split_digest"]
    train = encoder.transform(load_csv(out / TRAIN_FILE, schema),
                              provenance=f"split:{digest}:train")
    test = encoder.transform(load_csv(out / TEST_FILE, schema),
                             provenance=f"split:{digest}:test")
    return train, test, encoder


def _pipeline_schema(cfg: RunConfig):
    return read_schema(_require_input(cfg, "schema_path"))


# -- stages ------------------------------------------------------------------

def do_prepare(cfg: RunConfig) -> None:
    schema = _pipeline_schema(cfg)
    table = load_csv(_require_input(cfg, "data_path"), schema)
    seed = stage_seed(cfg.master_seed(), "prepare")
    train_t, test_t = split_stratified(table, cfg.test_frac, seed)
    encoder = TabularEncoder(schema).fit(train_t)
    out = _out(cfg)
    write_csv(out / TRAIN_FILE, train_t)
    write_csv(out / TEST_FILE, test_t)
    digest = split_digest(seed, cfg.test_frac, table.n_rows, schema)
    _write_stats_ini(out / STATS_FILE, schema, encoder.stats_, digest, seed,
                     cfg.test_frac, table.n_rows)
    print(f"split {table.n_rows} rows into {train_t.n_rows} train / "
          f"{test_t.n_rows} test (digest {digest})")
    print(f"train class counts: {class_histogram(train_t).tolist()}")
    print(f"test class counts:  {class_histogram(test_t).tolist()}")


def do_train_classifier(cfg: RunConfig) -> None:
    schema = _pipeline_schema(cfg)
    train, test, encoder = _load_split(cfg, schema)
    seed = stage_seed(cfg.master_seed(), "classifier")
    clf = PreferenceClassifier(**cfg.classifier_params(),
                               n_classes=schema.n_classes, random_state=seed)
    clf.fit(train.X, train.y, validation=(test.X, test.y))
    clf.freeze()
    out = _out(cfg)
    save_classifier_checkpoint(out / CLASSIFIER_FILE, clf, schema,
                               encoder.stats_, seed)
    val_loss = clf.history_["val_loss"][-1] if clf.history_["val_loss"] else float("nan")
    val_acc = clf.history_["val_accuracy"][-1] if clf.history_["val_accuracy"] else float("nan")
    print(f"classifier trained for {cfg.clf_epochs} epochs; "
          f"final validation loss {val_loss:.4f}, accuracy {val_acc:.4f}")
    print(f"saved {out / CLASSIFIER_FILE}")


def do_train_flow(cfg: RunConfig) -> None:
    schema = _pipeline_schema(cfg)
    train, _, encoder = _load_split(cfg, schema)
    out = _out(cfg)
    clf, _ = load_classifier_checkpoint(out / CLASSIFIER_FILE, schema=schema)
    seed = stage_seed(cfg.master_seed(), "flow")
    flow = ConditionalFlow(**cfg.flow_params(), random_state=seed)
    train_flow(flow, train, clf)
    save_flow_checkpoint(out / FLOW_FILE, flow, schema, encoder.stats_, seed,
                         file_sha256(out / CLASSIFIER_FILE))
    nll = flow.history_["nll"]
    first = f"{nll[0]:.4f}" if nll else "n/a"
    last = f"{nll[-1]:.4f}" if nll else "n/a"
    print(f"flow trained for {cfg.flow_epochs} epochs; "
          f"mean NLL {first} (first epoch) -> {last} (last epoch)")
    print(f"saved {out / FLOW_FILE}")


def _requested_counts(cfg: RunConfig, train):
    hist = class_histogram(train)
    if cfg.gen_mode == "match-train":
        return hist
    if cfg.gen_mode == "rebalance":
        return rebalance_counts(hist)
    counts = cfg.gen_counts
    if len(counts) != train.schema.n_classes:
        raise ConfigError(f"[generate] counts has {len(counts)} entries; schema "
                          f"defines {train.schema.n_classes} classes")
    return counts


def do_generate(cfg: RunConfig) -> None:
    schema = _pipeline_schema(cfg)
    train, _, encoder = _load_split(cfg, schema)
    out = _out(cfg)
    clf, _ = load_classifier_checkpoint(out / CLASSIFIER_FILE, schema=schema)
    flow, _ = load_flow_checkpoint(out / FLOW_FILE, schema=schema,
                                   classifier_sha256=file_sha256(out / CLASSIFIER_FILE))
    counts = _requested_counts(cfg, train)
    seed = stage_seed(cfg.master_seed(), "generate")
    synth = generate(flow, clf, train, counts, random_state=seed)
    write_csv(out / SYNTH_FILE, encoder.inverse_transform(synth))
    print(f"generated {synth.n} rows ({cfg.gen_mode}); "
          f"class counts: {class_histogram(synth).tolist()}")
    print(f"saved {out / SYNTH_FILE}")


def do_evaluate(cfg: RunConfig) -> None:
    schema = _pipeline_schema(cfg)
    train, test, encoder = _load_split(cfg, schema)
    out = _out(cfg)
    synth = encoder.transform(load_csv(out / SYNTH_FILE, schema),
                              provenance="synthetic")
    seed = stage_seed(cfg.master_seed(), "evaluate")
    report = run_tstr(train, synth, test, cfg.classifier_params(), seed=seed)
    (out / REPORT_TEXT).write_text(format_report(report))
    (out / REPORT_MACHINE).write_text(machine_lines(report))
    print(format_report(report), end="")
    print(f"saved {out / REPORT_TEXT} and {out / REPORT_MACHINE}")


BENCH_DATA_FILE = "bench.csv"
BENCH_SCHEMA_FILE = "bench_schema.ini"


def do_benchmark(cfg: RunConfig) -> None:
    spec = BenchmarkSpec(n=cfg.bench_n, d=cfg.bench_d, priors=cfg.bench_priors,
                         sigma=cfg.bench_sigma, mean_distance=cfg.bench_mean_distance,
                         seed=cfg.bench_data_seed)
    out = _out(cfg)
    schema = benchmark_schema(spec)
    write_csv(out / BENCH_DATA_FILE, make_benchmark(spec))
    write_schema(out / BENCH_SCHEMA_FILE, schema)
    print(f"benchmark data: {spec.n} rows, {spec.d} features, "
          f"class counts {spec.class_counts().tolist()}")
    cfg = replace(cfg, data_path=str(out / BENCH_DATA_FILE),
                  schema_path=str(out / BENCH_SCHEMA_FILE))
    stages = (("prepare", do_prepare), ("train-classifier", do_train_classifier),
              ("train-flow", do_train_flow), ("generate", do_generate),
              ("evaluate", do_evaluate))
    for name, fn in stages:
        print(f"--- {name} ---")
        try:
            fn(cfg)
        except CondsynthError as exc:
            raise type(exc)(f"benchmark stage {name!r} failed: {exc}") from exc


# -- entry point -----------------------------------------------------------------

_COMMANDS = (
    ("prepare", do_prepare, "split a CSV into train/test and fit normalization stats"),
    ("train-classifier", do_train_classifier, "train and freeze the classifier"),
    ("train-flow", do_train_flow, "train the conditional flow on classifier features"),
    ("generate", do_generate, "synthesize samples and write them as CSV"),
    ("evaluate", do_evaluate, "paired real-vs-synthetic comparison on the hold-out"),
    ("benchmark", do_benchmark, "run the full pipeline on generated benchmark data"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condsynth",
        description="Class-conditional synthetic tabular data: train, generate, "
                    "evaluate.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, fn, help_text in _COMMANDS:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", default=None, metavar="PATH",
                        help="INI config file")
        sp.add_argument("--seed", type=int, default=None, metavar="U64",
                        help="master seed (overrides the config file)")
        sp.add_argument("--out", default=None, metavar="DIR",
                        help="output directory (overrides the config file)")
        sp.set_defaults(run=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "run"):
        parser.print_help()
        return 2
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        args.run(cfg)
        return 0
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CondsynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
