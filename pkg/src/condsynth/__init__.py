"""Class-conditional synthetic tabular data.

Train a bottlenecked classifier, condition a coupling-layer normalizing
flow on its frozen features, invert the flow to synthesize samples per
class, and judge the result by training a second classifier on the
synthetic rows and testing it on real hold-out data.
"""

from .benchmark import BenchmarkSpec, benchmark_schema, make_benchmark
from .checkpoint import (file_sha256, load_classifier_checkpoint,
                         load_flow_checkpoint, read_container,
                         save_classifier_checkpoint, save_flow_checkpoint,
                         write_container)
from .classifier import PreferenceClassifier, cross_entropy
from .config import RunConfig, load_config, parse_config, stage_seed
from .dataset import (Dataset, RawTable, TabularEncoder, class_histogram,
                      dequantize_onehot, discretize_onehot, load_csv,
                      split_stratified, write_csv)
from .errors import (CheckpointError, CondsynthError, ConfigError, ContractError,
                     DataError, DomainError, ShapeError, UndefinedMetricError)
from .evaluation import EvalReport, format_report, machine_lines, run_tstr
from .flow import ConditionalFlow, CouplingLayer
from .metrics import accuracy, auc_binary, auc_macro_ovr, cohens_kappa, confusion
from .schema import Feature, Schema, parse_schema, read_schema, write_schema
from .synthesis import generate, rebalance_counts, train_flow

__version__ = "0.1.0"

__all__ = [
    "BenchmarkSpec", "benchmark_schema", "make_benchmark",
    "file_sha256", "load_classifier_checkpoint", "load_flow_checkpoint",
    "read_container", "save_classifier_checkpoint", "save_flow_checkpoint",
    "write_container",
    "PreferenceClassifier", "cross_entropy",
    "RunConfig", "load_config", "parse_config", "stage_seed",
    "Dataset", "RawTable", "TabularEncoder", "class_histogram",
    "dequantize_onehot", "discretize_onehot", "load_csv", "split_stratified",
    "write_csv",
    "CheckpointError", "CondsynthError", "ConfigError", "ContractError",
    "DataError", "DomainError", "ShapeError", "UndefinedMetricError",
    "EvalReport", "format_report", "machine_lines", "run_tstr",
    "ConditionalFlow", "CouplingLayer",
    "accuracy", "auc_binary", "auc_macro_ovr", "cohens_kappa", "confusion",
    "Feature", "Schema", "parse_schema", "read_schema", "write_schema",
    "generate", "rebalance_counts", "train_flow",
    "__version__",
]
