"""Command-line interface.

Subcommands: synth (generate datasets), split, preprocess, kernel (Gram
dumps), train, evaluate, roc, run (full pipeline). Exit codes: 0 success,
1 configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .ansatz import AnsatzConfig, random_params
from .data import (
    SYNTH_GENERATORS,
    DatasetSpec,
    SplitIndices,
    load_csv,
    preprocess,
    preprocessor_summary,
    stratified_split,
)
from .errors import ConfigError, DataError, NumericalError, QkmlError
from .metrics import (
    classification_report,
    render_report,
    report_to_dict,
    roc_curve,
    roc_to_csv,
    select_threshold,
)
from .pipeline import PipelineConfig, StageFailure, run_experiment
from .plotting import save_roc_plot
from .qkernel import cross_gram, dump_gram, dump_gram_csv, gram_matrix, gram_matrix_shots
from .seeding import derive_seed
from .svm import decision_values, load_model, model_summary, save_model, train_smo

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def _angles_and_split(args):
    spec = DatasetSpec.from_yaml(args.spec)
    raw = load_csv(args.data, spec)
    if getattr(args, "splits", None):
        split = SplitIndices.from_json(args.splits)
    else:
        split = SplitIndices(train=np.arange(raw.n_rows), validation=np.array([], dtype=int),
                             test=np.array([], dtype=int), seed=0)
        print("note: no --splits given; fitting on all rows", file=sys.stderr)
    angles, preprocessor = preprocess(raw, spec, split.train)
    return raw, split, angles, preprocessor


def _split_rows(split: SplitIndices, name: str) -> np.ndarray:
    if name == "all":
        return np.sort(np.concatenate([split.train, split.validation, split.test]))
    return {"train": split.train, "validation": split.validation, "test": split.test}[name]


def _ansatz_from_args(args, n_features: int) -> AnsatzConfig:
    n_qubits = args.n_qubits if args.n_qubits else n_features
    return AnsatzConfig(
        n_qubits=n_qubits,
        layers=args.layers,
        entangle_pattern=args.entangle,
        hadamard_init=not args.no_hadamard,
        feature_folding=n_qubits < n_features,
    )


def cmd_synth(args) -> int:
    generator = SYNTH_GENERATORS[args.kind]
    kwargs = {}
    if args.kind != "xor":
        kwargs["positive_fraction"] = args.positive_fraction
    dataset = generator(args.rows, seed=args.seed, **kwargs)
    dataset.write(args.out, args.spec_out)
    print(f"wrote {args.rows} rows to {args.out}"
          + (f" and spec to {args.spec_out}" if args.spec_out else ""))
    return EXIT_OK


def cmd_split(args) -> int:
    spec = DatasetSpec.from_yaml(args.spec)
    raw = load_csv(args.data, spec)
    split = stratified_split(raw.labels, (args.train, args.validation, args.test),
                             seed=args.seed)
    split.to_json(args.out)
    print(f"split {raw.n_rows} rows into {split.train.size}/{split.validation.size}/"
          f"{split.test.size}; wrote {args.out}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    raw, split, angles, preprocessor = _angles_and_split(args)
    header = ",".join(preprocessor.feature_names)
    np.savetxt(args.out, angles, delimiter=",", header=header, comments="", fmt="%.17g")
    if args.transformer_out:
        Path(args.transformer_out).write_text(
            json.dumps(preprocessor_summary(preprocessor), sort_keys=True, indent=2) + "\n")
    print(f"encoded {angles.shape[0]} rows x {angles.shape[1]} angles to {args.out}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    raw, split, angles, preprocessor = _angles_and_split(args)
    config = _ansatz_from_args(args, angles.shape[1])
    params = random_params(config, seed=derive_seed(args.seed, "theta"))
    rows = _split_rows(split, args.rows_split)
    if args.cross_split:
        cols = _split_rows(split, "train")
        block = cross_gram(angles[rows], angles[cols], params, config)
        np.savetxt(args.out, block, delimiter=",", fmt="%.17g")
        print(f"wrote {block.shape[0]}x{block.shape[1]} cross kernel to {args.out}")
        return EXIT_OK
    if args.mode == "shots":
        gram = gram_matrix_shots(angles[rows], params, config, args.shots,
                                 derive_seed(args.seed, "kernel-shots"))
    else:
        gram = gram_matrix(angles[rows], params, config)
    dump_gram(gram, args.out)
    if args.csv_out:
        dump_gram_csv(gram, args.csv_out)
    print(f"wrote {gram.shape[0]}x{gram.shape[0]} gram to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .qkernel import load_gram

    gram = load_gram(args.gram)
    spec = DatasetSpec.from_yaml(args.spec)
    raw = load_csv(args.data, spec)
    rows = _split_rows(SplitIndices.from_json(args.splits), args.rows_split) \
        if args.splits else np.arange(raw.n_rows)
    labels = raw.labels[rows]
    if labels.shape[0] != gram.shape[0]:
        raise DataError(
            f"gram size {gram.shape[0]} does not match {labels.shape[0]} labels "
            f"in split {args.rows_split!r}")
    model = train_smo(gram, labels, C=args.C, tol=args.tol, max_iter=args.max_iter)
    save_model(model, args.out)
    if args.text_out:
        Path(args.text_out).write_text(model_summary(model))
    print(f"trained on {gram.shape[0]} points, {model.support_indices.size} support "
          f"vectors; wrote {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    kernel_rows = np.loadtxt(args.kernel, delimiter=",", ndmin=2)
    spec = DatasetSpec.from_yaml(args.spec)
    raw = load_csv(args.data, spec)
    rows = _split_rows(SplitIndices.from_json(args.splits), args.eval_split) \
        if args.splits else np.arange(raw.n_rows)
    labels = raw.labels[rows]
    scores = decision_values(model, kernel_rows)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(out_dir / "scores.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["score", "label"])
        for s, l in zip(scores, labels):
            writer.writerow([f"{s:.17g}", int(l)])

    report = classification_report(scores, labels, args.threshold)
    (out_dir / "report.txt").write_text(render_report(report))
    curve = roc_curve(scores, labels)
    roc_to_csv(curve, str(out_dir / "roc.csv"))
    save_roc_plot(curve, str(out_dir / "roc.png"), title="evaluation ROC")
    metrics = {"threshold": args.threshold, "auc": curve.auc,
               "report": report_to_dict(report)}
    (out_dir / "metrics.json").write_text(
        json.dumps(metrics, sort_keys=True, indent=2) + "\n")
    print(f"accuracy {report.accuracy:.4f}, AUC {curve.auc:.4f}; artifacts in {out_dir}")
    return EXIT_OK


def cmd_roc(args) -> int:
    table = np.loadtxt(args.scores, delimiter=",", skiprows=1, ndmin=2)
    scores, labels = table[:, 0], table[:, 1]
    curve = roc_curve(scores, labels)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    roc_to_csv(curve, str(out_dir / "roc.csv"))
    save_roc_plot(curve, str(out_dir / "roc.png"))
    print(f"AUC {curve.auc:.6f}")
    if args.policy:
        threshold = select_threshold(curve, scores, labels, args.policy, floor=args.floor)
        print(f"{args.policy} threshold: {threshold:.6g}")
    return EXIT_OK


def cmd_run(args) -> int:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key.path=value, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key] = yaml.safe_load(value)
    config = PipelineConfig.from_yaml(args.config, overrides)
    result = run_experiment(config, args.out)
    for name, doc in result.model_metrics.items():
        print(f"{name}: accuracy {doc['default']['accuracy']:.4f}, "
              f"AUC {doc['test_auc']:.4f}")
    print(f"artifacts in {result.out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkml",
        description="Quantum-kernel SVM toolkit: simulate, train, evaluate.")
    parser.add_argument("--version", action="version", version=f"qkml {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--kind", choices=sorted(SYNTH_GENERATORS), required=True)
    p.add_argument("--rows", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--positive-fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--spec-out")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("split", help="stratified train/validation/test split")
    p.add_argument("--data", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", type=float, default=0.70)
    p.add_argument("--validation", type=float, default=0.15)
    p.add_argument("--test", type=float, default=0.15)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("preprocess", help="encode features to angles in [0, pi]")
    p.add_argument("--data", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--splits", help="splits.json; fit statistics use its train rows")
    p.add_argument("--out", required=True)
    p.add_argument("--transformer-out")
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("kernel", help="dump a quantum Gram matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--splits")
    p.add_argument("--rows-split", default="train",
                   choices=["all", "train", "validation", "test"])
    p.add_argument("--cross-split", action="store_true",
                   help="emit the rows-split x train cross block as CSV")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--entangle", default="chain", choices=["chain", "ring"])
    p.add_argument("--no-hadamard", action="store_true")
    p.add_argument("--n-qubits", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", default="exact", choices=["exact", "shots"])
    p.add_argument("--shots", type=int, default=1024)
    p.add_argument("--out", required=True)
    p.add_argument("--csv-out")
    p.set_defaults(fn=cmd_kernel)

    p = sub.add_parser("train", help="train the SVM on a Gram dump")
    p.add_argument("--gram", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--splits")
    p.add_argument("--rows-split", default="train",
                   choices=["all", "train", "validation", "test"])
    p.add_argument("-C", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--out", required=True)
    p.add_argument("--text-out")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="score a model on a cross-kernel block")
    p.add_argument("--model", required=True)
    p.add_argument("--kernel", required=True,
                   help="CSV cross block: eval rows x training points")
    p.add_argument("--data", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--splits")
    p.add_argument("--eval-split", default="test",
                   choices=["all", "train", "validation", "test"])
    p.add_argument("--threshold", type=float, default=0.0,
                   help="decision threshold on raw scores")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("roc", help="ROC curve and AUC from a scores CSV")
    p.add_argument("--scores", required=True, help="CSV with header: score,label")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--policy", choices=["youden", "recall_first", "precision_first"])
    p.add_argument("--floor", type=float)
    p.set_defaults(fn=cmd_roc)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", metavar="KEY.PATH=VALUE",
                   help="override a config key, e.g. --set svm.C=10")
    p.set_defaults(fn=cmd_run)
    return parser


def _exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StageFailure):
        return _exit_code_for(exc.original)
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, (NumericalError, np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (OSError, ValueError)):
        return EXIT_DATA
    return EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (QkmlError, np.linalg.LinAlgError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
