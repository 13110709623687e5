"""Command-line pipeline: label, impute-bench, augment, train, tune-dnn, predict.

Every command reads an optional TOML run config, applies command-line
overrides and writes its outputs into ``--out``.  Data files start with a
schema-version comment line; wall-clock times go only into
``metadata.json``.  Exit codes: 0 success, 1 invalid config or arguments,
2 failure while running.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bench import MaskingProtocol, TuningGrid, derive_seed, run_dnn_tuning, run_imputation_benchmark, run_model_comparison
from .bench import synthetic
from .datamodel import DEFAULT_MISSING_TOKENS, DataError, LabeledDataset, SplitSpec, load_csv, load_labeled_csv, write_labeled_csv
from .impute import ImputerSpec, impute, impute_standardized
from .indices import LabellingConfig, label_matrix, load_profile
from .models import REGISTRY, ClassifierSpec, default_suite, load_model, predict, save_model
from .preprocess import SmoteSpec, apply_scaler, smote

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1

# one child seed per stochastic component, all fanned out from the global seed
SEED_KEYS = {"impute": 1, "masking": 2, "split": 3, "smote": 4, "models": 5, "tuning": 6, "generator": 7}

GENERATORS = {
    "low_rank": synthetic.low_rank,
    "linear": synthetic.linear_correlated,
    "nonlinear": synthetic.nonlinear_correlated,
    "clustered": synthetic.clustered,
    "sediment": synthetic.synthetic_sediment,
}

DEFAULT_BENCH_METHODS = (
    {"method": "Mean"},
    {"method": "SVD"},
    {"method": "KNN", "k": 1},
    {"method": "KNN", "k": 3},
    {"method": "KNN", "k": 5},
    {"method": "KNN", "k": 7},
    {"method": "KNN", "k": 9},
    {"method": "Iterative", "estimator": "BayesianRidge"},
    {"method": "Iterative", "estimator": "DecisionTree"},
    {"method": "Iterative", "estimator": "ExtraTrees", "n_trees": 10},
)


class ConfigError(Exception):
    """Invalid or incomplete run configuration (exit code 1)."""


def header(kind: str) -> str:
    return f"# sedml-schema: {kind}/{SCHEMA_VERSION}"


# ------------------------------------------------------------------ config

SECTIONS = {
    "paths": {"input", "complete", "profile", "out", "id_column", "label_column", "missing_tokens"},
    "pipeline": {"label_source", "standardize_imputation"},
    "labelling": {"aggregation", "thresholds", "labels", "ef_on_missing_reference"},
    "impute": {"method", "k", "rank", "estimator", "n_trees", "max_rounds", "tolerance", "energy"},
    "benchmark": {"generator", "generator_args", "methods", "standardize"},
    "masking": {"rates", "repeats"},
    "smote": {"enabled", "k_neighbors", "target", "per_coordinate"},
    "split": {"test_fraction", "stratified"},
    "train": {"models", "custom", "repeats", "epochs", "derive_seeds"},
    "tuning": {
        "layer_counts", "neuron_configs", "dropout_rates", "batch_norm", "epochs",
        "learning_rate", "batch_size", "stages",
    },
}
TOP_LEVEL = {"seed"} | set(SECTIONS)


@dataclass
class RunConfig:
    seed: int = 0
    base_dir: Path = field(default_factory=Path.cwd)
    sections: dict = field(default_factory=dict)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        value = self.get(section, key)
        if value in (None, ""):
            raise ConfigError(f"missing required config field '{section}.{key}'")
        return value

    def path(self, section: str, key: str, required: bool = False, must_exist: bool = True) -> Path | None:
        raw = self.require(section, key) if required else self.get(section, key)
        if raw in (None, ""):
            return None
        p = Path(raw)
        p = p if p.is_absolute() else self.base_dir / p
        if must_exist and not p.exists():
            raise ConfigError(f"config field '{section}.{key}' points to a missing file: {p}")
        return p

    def child_seed(self, component: str) -> int:
        return derive_seed(self.seed, SEED_KEYS[component])

    def resolved(self) -> dict:
        return {"seed": self.seed, **self.sections}


def _check_keys(doc: dict) -> None:
    unknown = set(doc) - TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for name, body in doc.items():
        if name == "seed":
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"config section '{name}' must be a table")
        bad = set(body) - SECTIONS[name]
        if bad:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    _check_keys(doc)
    seed = doc.pop("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("config field 'seed' must be an integer")
    return RunConfig(seed=seed, base_dir=p.resolve().parent, sections=doc)


def _section(cfg: RunConfig, name: str) -> dict:
    return cfg.sections.setdefault(name, {})


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Fold command-line flags into the config; flags win.  Paths given on
    the command line are relative to the working directory."""
    if args.seed is not None:
        cfg.seed = args.seed
    for attr, key in (("input", "input"), ("out", "out"), ("profile", "profile")):
        value = getattr(args, attr, None)
        if value is not None:
            _section(cfg, "paths")[key] = str(Path(value).resolve())
    mapping = [
        ("id_column", "paths", "id_column"),
        ("method", "impute", "method"),
        ("k", "impute", "k"),
        ("rank", "impute", "rank"),
        ("estimator", "impute", "estimator"),
        ("n_trees", "impute", "n_trees"),
        ("max_rounds", "impute", "max_rounds"),
        ("generator", "benchmark", "generator"),
        ("repeats", "masking", "repeats"),
        ("smote_k", "smote", "k_neighbors"),
        ("target", "smote", "target"),
        ("train_repeats", "train", "repeats"),
        ("epochs", "train", "epochs"),
        ("tuning_epochs", "tuning", "epochs"),
    ]
    for attr, section, key in mapping:
        value = getattr(args, attr, None)
        if value is not None:
            _section(cfg, section)[key] = value
    if getattr(args, "model", None):
        _section(cfg, "train")["models"] = list(args.model)
        _section(cfg, "train").pop("custom", None)
    return cfg


def imputer_spec(cfg: RunConfig) -> ImputerSpec:
    body = dict(cfg.sections.get("impute", {}))
    body.setdefault("method", "Iterative")
    body.setdefault("estimator", "ExtraTrees")
    return ImputerSpec(seed=cfg.child_seed("impute"), **body)


def labelling(cfg: RunConfig):
    profile, lab = load_profile(cfg.path("paths", "profile"))
    over = cfg.sections.get("labelling", {})
    if over:
        d = dataclasses.asdict(lab)
        d.update({k: tuple(v) if isinstance(v, list) else v for k, v in over.items()})
        lab = LabellingConfig(**d)
    return profile, lab


def smote_spec(cfg: RunConfig) -> SmoteSpec | None:
    body = dict(cfg.sections.get("smote", {}))
    if not body.pop("enabled", True):
        return None
    return SmoteSpec(seed=cfg.child_seed("smote"), **body)


def split_spec(cfg: RunConfig) -> SplitSpec:
    return SplitSpec(seed=cfg.child_seed("split"), **cfg.sections.get("split", {}))


def classifier_specs(cfg: RunConfig) -> list[ClassifierSpec]:
    epochs = cfg.get("train", "epochs", 60)
    if not isinstance(epochs, int) or epochs < 1:
        raise ConfigError("config field 'train.epochs' must be a positive integer")
    seed = cfg.child_seed("models")
    suite = {s.label: s for s in default_suite(seed=seed, epochs=epochs)}
    specs = []
    for name in cfg.get("train", "models", list(suite)):
        if name in suite:
            specs.append(suite[name])
        elif name in REGISTRY:
            hp = {"epochs": epochs} if name == "MLP" else {}
            specs.append(ClassifierSpec(name, hp, seed=seed))
        else:
            raise ConfigError(f"unknown model {name!r}; choose from {sorted(suite)} or kinds {sorted(REGISTRY)}")
    for entry in cfg.get("train", "custom", []):
        if "kind" not in entry:
            raise ConfigError("missing required config field 'train.custom.kind'")
        specs.append(ClassifierSpec(entry["kind"], dict(entry.get("hyperparameters", {})), seed=seed, name=entry.get("name")))
    if not specs:
        raise ConfigError("config field 'train.models' selects no models")
    names = [s.label for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate model names {names}; give custom models a 'name'")
    return specs


def tuning_grid(cfg: RunConfig) -> TuningGrid:
    body = dict(cfg.sections.get("tuning", {}))
    for key in ("layer_counts", "dropout_rates", "batch_norm", "stages"):
        if key in body:
            body[key] = tuple(body[key])
    if "neuron_configs" in body:
        body["neuron_configs"] = tuple(tuple(c) for c in body["neuron_configs"])
    return TuningGrid(**body)


# ------------------------------------------------------------------ data

def _csv_header(path: Path) -> list[str]:
    with path.open(newline="", encoding="utf-8-sig") as fh:
        for row in csv.reader(fh):
            if row and not row[0].startswith("#"):
                return [c.strip() for c in row]
    raise DataError(f"{path} has no header row")


def load_table(cfg: RunConfig, path: Path):
    tokens = cfg.get("paths", "missing_tokens", list(DEFAULT_MISSING_TOKENS))
    head = _csv_header(path)
    id_col = cfg.get("paths", "id_column", "sample_id")
    id_col = id_col if id_col in head else None
    label_col = cfg.get("paths", "label_column", "label")
    if label_col in head:
        return load_labeled_csv(path, label_col, id_col, tokens)
    return load_csv(path, tokens, id_column=id_col)


def fill(cfg: RunConfig, data):
    spec = imputer_spec(cfg)
    if cfg.get("pipeline", "standardize_imputation", True):
        return impute_standardized(data, spec)
    return impute(data, spec)


def build_dataset(cfg: RunConfig) -> tuple[LabeledDataset, object | None]:
    """Labelled, fully observed dataset plus the index report when labels
    were computed here."""
    table = load_table(cfg, cfg.path("paths", "input", required=True))
    if isinstance(table, LabeledDataset):
        return table, None
    source = cfg.get("pipeline", "label_source", "imputed")
    if source not in ("imputed", "observed"):
        raise ConfigError("config field 'pipeline.label_source' must be 'imputed' or 'observed'")
    profile, lab = labelling(cfg)
    filled = table if table.is_complete else fill(cfg, table)
    report = label_matrix(filled if source == "imputed" else table, profile, lab)
    return LabeledDataset(filled, report.labels), report


# ------------------------------------------------------------------ commands

def _write_distribution(path: Path, counts: dict, kind: str = "label-distribution") -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(header(kind) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "count", "fraction"])
        total = sum(counts.values())
        for lab, n in counts.items():
            w.writerow([lab, n, repr(n / total) if total else "nan"])
    return path


def cmd_label(cfg: RunConfig, out: Path) -> list[Path]:
    table = load_table(cfg, cfg.path("paths", "input", required=True))
    if isinstance(table, LabeledDataset):
        table = table.features
    source = cfg.get("pipeline", "label_source", "imputed")
    if source not in ("imputed", "observed"):
        raise ConfigError("config field 'pipeline.label_source' must be 'imputed' or 'observed'")
    profile, lab = labelling(cfg)
    basis = fill(cfg, table) if source == "imputed" and not table.is_complete else table
    report = label_matrix(basis, profile, lab)
    path = out / "index_report.csv"
    report.write_csv(path, header("index-report"))
    dist = _write_distribution(out / "label_distribution.csv", report.label_distribution(lab.labels))
    return [path, dist]


def _benchmark_truth(cfg: RunConfig):
    path = cfg.path("paths", "complete")
    if path is not None:
        table = load_table(cfg, path)
        data = table.features if isinstance(table, LabeledDataset) else table
        if not data.is_complete:
            keep = np.flatnonzero(data.mask.all(axis=1))
            if keep.size < 5:
                raise DataError(f"{path} has {keep.size} fully observed rows; the benchmark needs ground truth")
            data = data.take_rows(keep)
        return data
    gen = cfg.get("benchmark", "generator")
    if not gen:
        raise ConfigError("missing required config field 'paths.complete' (or 'benchmark.generator')")
    if gen not in GENERATORS:
        raise ConfigError(f"unknown generator {gen!r}; choose from {sorted(GENERATORS)}")
    kwargs = dict(cfg.get("benchmark", "generator_args", {}))
    return GENERATORS[gen](seed=cfg.child_seed("generator"), **kwargs)


def cmd_impute_bench(cfg: RunConfig, out: Path) -> list[Path]:
    methods = cfg.get("benchmark", "methods", [dict(m) for m in DEFAULT_BENCH_METHODS])
    seed = cfg.child_seed("impute")
    specs = [ImputerSpec.from_dict({**m, "seed": seed}) for m in methods]
    masking = cfg.sections.get("masking", {})
    protocol = MaskingProtocol(
        rates=tuple(masking.get("rates", MaskingProtocol().rates)),
        repeats=masking.get("repeats", 10),
        seed=cfg.child_seed("masking"),
    )
    truth = _benchmark_truth(cfg)
    report = run_imputation_benchmark(truth, specs, protocol, standardize=cfg.get("benchmark", "standardize", False))
    return report.write(out, header("imputation-benchmark"))


def cmd_augment(cfg: RunConfig, out: Path) -> list[Path]:
    data, _ = build_dataset(cfg)
    spec = smote_spec(cfg) or SmoteSpec(seed=cfg.child_seed("smote"))
    grown = smote(data, spec)
    path = out / "augmented.csv"
    write_labeled_csv(grown, path, header("labelled-dataset"))
    before, after = data.class_counts(), grown.class_counts()
    counts = out / "class_counts.csv"
    with counts.open("w", newline="", encoding="utf-8") as fh:
        fh.write(header("class-counts") + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "before", "after"])
        for lab in sorted(after):
            w.writerow([lab, before.get(lab, 0), after[lab]])
    return [path, counts]


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def cmd_train(cfg: RunConfig, out: Path) -> list[Path]:
    specs = classifier_specs(cfg)
    data, report = build_dataset(cfg)
    repeats = cfg.get("train", "repeats", 5)
    result = run_model_comparison(
        data,
        specs,
        split_spec(cfg),
        repeats=repeats,
        smote_spec=smote_spec(cfg),
        derive_seeds=cfg.get("train", "derive_seeds", True),
        keep_models=True,
    )
    paths = result.write(out, header("model-comparison"))
    text = out / "model_comparison.txt"
    text.write_text(result.to_text() + "\n", encoding="utf-8")
    paths.append(text)
    ds_path = out / "dataset.csv"
    write_labeled_csv(data, ds_path, header("labelled-dataset"))
    paths.append(ds_path)
    if report is not None:
        paths.append(out / "index_report.csv")
        report.write_csv(paths[-1], header("index-report"))
    for row in result.rows:
        if row.model is not None:
            paths.append(out / "models" / f"{_slug(row.name)}.json")
            save_model(row.model, paths[-1])
    failed = [r.name for r in result.rows if r.error]
    if len(failed) == len(result.rows):
        raise RuntimeError("every model failed: " + "; ".join(f"{r.name}: {r.error}" for r in result.rows))
    return paths


def cmd_tune_dnn(cfg: RunConfig, out: Path) -> list[Path]:
    grid = tuning_grid(cfg)
    data, _ = build_dataset(cfg)
    result = run_dnn_tuning(data, grid, split_spec(cfg), smote_spec(cfg), seed=cfg.child_seed("tuning"))
    return result.write(out, header("dnn-tuning"))


def cmd_predict(cfg: RunConfig, out: Path, model_file: str) -> list[Path]:
    model = load_model(model_file)
    table = load_table(cfg, cfg.path("paths", "input", required=True))
    features = table.features if isinstance(table, LabeledDataset) else table
    missing = [c for c in model.feature_names if c not in features.col_names]
    if missing:
        raise DataError(f"input lacks model features {missing}")
    features = features.select_columns(model.feature_names)
    if not features.is_complete:
        raise DataError("prediction input has missing cells; impute it first")
    if model.scaler is not None:
        features = apply_scaler(features, model.scaler)
    labels = predict(model, features)
    path = out / "predictions.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(header("predictions") + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "label"])
        w.writerows(zip(features.row_ids, labels))
    return [path]


COMMANDS = {
    "label": cmd_label,
    "impute-bench": cmd_impute_bench,
    "augment": cmd_augment,
    "train": cmd_train,
    "tune-dnn": cmd_tune_dnn,
    "predict": cmd_predict,
}


# ------------------------------------------------------------------ argparse

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run config (see configs/pipeline.toml)")
    common.add_argument("--seed", type=int, help="global seed; every stochastic step derives from it")
    common.add_argument("--out", help="output directory (default: sedml-out)")
    common.add_argument("--input", help="input CSV, overrides paths.input")
    common.add_argument("--profile", help="background profile TOML, overrides paths.profile")
    common.add_argument("--id-column", dest="id_column", help="row-id column name (default: sample_id)")

    def imputer_flags(with_k: bool) -> argparse.ArgumentParser:
        imp = argparse.ArgumentParser(add_help=False)
        imp.add_argument("--method", choices=["Mean", "KNN", "SVD", "Iterative"], help="imputation method")
        if with_k:
            imp.add_argument("--k", type=int, help="neighbours for kNN imputation")
        imp.add_argument("--rank", type=int, help="rank for SVD imputation")
        imp.add_argument("--estimator", choices=["BayesianRidge", "DecisionTree", "ExtraTrees"])
        imp.add_argument("--n-trees", dest="n_trees", type=int, help="trees for the ExtraTrees estimator")
        imp.add_argument("--max-rounds", dest="max_rounds", type=int)
        return imp

    imp = imputer_flags(with_k=True)

    sm = argparse.ArgumentParser(add_help=False)
    sm.add_argument("--smote-k", dest="smote_k", type=int, help="SMOTE neighbours")
    sm.add_argument("--target", help="SMOTE target: 'balance'")

    p = argparse.ArgumentParser(prog="sedml", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"sedml {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("label", parents=[common, imp], help="compute indices and pollution labels")
    b = sub.add_parser("impute-bench", parents=[common], help="SMAPE benchmark over a masking grid")
    b.add_argument("--generator", choices=sorted(GENERATORS), help="synthetic ground truth instead of paths.complete")
    b.add_argument("--repeats", type=int, help="masks per missing rate")
    a = sub.add_parser("augment", parents=[common, imputer_flags(with_k=False), sm], help="SMOTE-balance a labelled dataset")
    a.add_argument("--k", dest="smote_k", type=int, help="SMOTE neighbours (same as --smote-k)")
    t = sub.add_parser("train", parents=[common, imp, sm], help="train and compare the classifier suite")
    t.add_argument("--model", action="append", help="suite name or kind; repeatable")
    t.add_argument("--repeats", dest="train_repeats", type=int, help="repeats with derived seeds")
    t.add_argument("--epochs", type=int, help="epochs for MLP and DNN")
    d = sub.add_parser("tune-dnn", parents=[common, imp, sm], help="staged DNN tuning curves")
    d.add_argument("--epochs", dest="tuning_epochs", type=int)
    pr = sub.add_parser("predict", parents=[common], help="label new rows with a saved model")
    pr.add_argument("--model-file", dest="model_file", required=True)
    return p


def _write_metadata(out: Path, command: str, cfg: RunConfig, outputs: list[Path], started: float) -> None:
    meta = {
        "command": command,
        "sedml_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "elapsed_seconds": round(time.time() - started, 3),
        "seed": cfg.seed,
        "config": cfg.resolved(),
        "outputs": sorted(str(p.relative_to(out)) for p in outputs),
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    started = time.time()
    try:
        cfg = apply_overrides(load_config(args.config), args)
        out = Path(cfg.get("paths", "out") or "sedml-out")
        out = out if out.is_absolute() else cfg.base_dir / out
        # specs are built here so range errors count as configuration errors
        if args.command in ("label", "augment", "train", "tune-dnn"):
            cfg.path("paths", "input", required=True)
            imputer_spec(cfg)
            labelling(cfg)
        if args.command in ("augment", "train", "tune-dnn"):
            smote_spec(cfg)
            split_spec(cfg)
        if args.command == "train":
            classifier_specs(cfg)
        if args.command == "tune-dnn":
            tuning_grid(cfg)
        if args.command == "predict":
            cfg.path("paths", "input", required=True)
            if not Path(args.model_file).exists():
                raise ConfigError(f"model file not found: {args.model_file}")
    except (ConfigError, ValueError, TypeError, FileNotFoundError) as exc:
        print(f"sedml: config error: {exc}", file=sys.stderr)
        return 1
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "predict":
            outputs = cmd_predict(cfg, out, args.model_file)
        else:
            outputs = COMMANDS[args.command](cfg, out)
        _write_metadata(out, args.command, cfg, outputs, started)
    except ConfigError as exc:
        print(f"sedml: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        print(f"sedml: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for p in outputs:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
