"""Dataset handling: CSV ingestion against a declared column spec,
train-fitted preprocessing to encoded angles, stratified splitting, and the
synthetic dataset generators that stand in for proprietary data.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np
import yaml

from .ansatz import FeatureRanges, encode_features
from .errors import ConfigError, ConstantFeatureWarning, DataError, UnseenCategoryWarning
from .seeding import derive_seed

FEATURE_KINDS = ("numeric", "categorical")
DEFAULT_PROPORTIONS = (0.70, 0.15, 0.15)
MIN_ROWS_PER_CLASS = 10


@dataclass(frozen=True)
class DatasetSpec:
    """Declared columns: feature names and kinds, label column and mapping."""

    label_column: str
    positive_value: str
    negative_value: str
    feature_columns: tuple[tuple[str, str], ...]

    def __post_init__(self):
        for name, kind in self.feature_columns:
            if kind not in FEATURE_KINDS:
                raise ConfigError(f"feature {name!r} has unknown kind {kind!r}")
        if self.positive_value == self.negative_value:
            raise ConfigError("positive and negative label values must differ")

    @classmethod
    def from_yaml(cls, path: str) -> "DatasetSpec":
        with open(path) as fh:
            doc = yaml.safe_load(fh)
        try:
            label = doc["label"]
            features = tuple((f["column"], f["kind"]) for f in doc["features"])
            return cls(
                label_column=str(label["column"]),
                positive_value=str(label["positive"]),
                negative_value=str(label["negative"]),
                feature_columns=features,
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed dataset spec {path}: {exc}") from exc

    def to_yaml(self, path: str) -> None:
        doc = {
            "label": {
                "column": self.label_column,
                "positive": self.positive_value,
                "negative": self.negative_value,
            },
            "features": [{"column": c, "kind": k} for c, k in self.feature_columns],
        }
        with open(path, "w") as fh:
            yaml.safe_dump(doc, fh, sort_keys=False)


@dataclass
class RawDataset:
    """Parsed columns: numerics as float arrays, categoricals as string lists,
    labels mapped to -1/+1."""

    spec: DatasetSpec
    numeric: dict[str, np.ndarray]
    categorical: dict[str, list[str]]
    labels: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.labels.shape[0]


def rows_to_raw(spec: DatasetSpec, header: list[str], rows: list[list[str]]) -> RawDataset:
    """Convert CSV-shaped rows into a RawDataset, with cell-level diagnostics."""
    required = [spec.label_column] + [name for name, _ in spec.feature_columns]
    missing = [c for c in required if c not in header]
    if missing:
        raise DataError(f"header is missing declared column(s): {missing}")
    col_idx = {name: header.index(name) for name in required}

    width = len(header)
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"row {r}: expected {width} cells, got {len(row)}")

    # label mapping; reject non-binary label sets naming the stray values
    label_values = [row[col_idx[spec.label_column]].strip() for row in rows]
    allowed = {spec.positive_value, spec.negative_value}
    stray = sorted(set(label_values) - allowed)
    if stray:
        raise DataError(
            f"label column {spec.label_column!r} contains value(s) {stray} outside "
            f"the declared mapping {sorted(allowed)}"
        )
    labels = np.array([1.0 if v == spec.positive_value else -1.0 for v in label_values])

    numeric: dict[str, np.ndarray] = {}
    categorical: dict[str, list[str]] = {}
    for name, kind in spec.feature_columns:
        c = col_idx[name]
        cells = [row[c].strip() for row in rows]
        for r, cell in enumerate(cells):
            if cell == "":
                raise DataError(f"missing value at row {r}, column {name!r} (index {c})")
        if kind == "numeric":
            values = np.empty(len(cells))
            for r, cell in enumerate(cells):
                try:
                    values[r] = float(cell)
                except ValueError as exc:
                    raise DataError(
                        f"row {r}, column {name!r}: cannot parse {cell!r} as numeric"
                    ) from exc
            numeric[name] = values
        else:
            categorical[name] = cells
    return RawDataset(spec=spec, numeric=numeric, categorical=categorical, labels=labels)


def load_csv(path: str, spec: DatasetSpec) -> RawDataset:
    """Read and validate a CSV file with a header row against the spec."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no data rows")
    return rows_to_raw(spec, [h.strip() for h in header], rows)


# ---------------------------------------------------------------------------
# Preprocessing: standardize numerics, one-hot categoricals, encode to angles.


@dataclass(frozen=True)
class FittedPreprocessor:
    """Train-fitted transform from raw columns to angle vectors in [0, pi].

    Numerics are standardized with train mean/std (population std; zero-std
    columns pass through centered), categoricals are one-hot encoded against
    the sorted train vocabulary (unseen values map to all zeros with a
    warning), and the combined vector is min-max scaled to [0, pi] with
    train-split ranges.
    """

    spec: DatasetSpec
    numeric_means: dict[str, float]
    numeric_stds: dict[str, float]
    vocabularies: dict[str, tuple[str, ...]]
    ranges: FeatureRanges
    feature_names: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def combined_matrix(self, raw: RawDataset, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=int)
        blocks = []
        for name, kind in self.spec.feature_columns:
            if kind == "numeric":
                std = self.numeric_stds[name]
                values = raw.numeric[name][indices]
                blocks.append(((values - self.numeric_means[name]) / std)[:, None])
            else:
                vocab = self.vocabularies[name]
                pos = {v: k for k, v in enumerate(vocab)}
                block = np.zeros((indices.size, len(vocab)))
                unseen = set()
                for r, i in enumerate(indices):
                    value = raw.categorical[name][i]
                    if value in pos:
                        block[r, pos[value]] = 1.0
                    else:
                        unseen.add(value)
                if unseen:
                    warnings.warn(
                        f"column {name!r}: unseen categor{'y' if len(unseen) == 1 else 'ies'} "
                        f"{sorted(unseen)} encoded as all-zeros",
                        UnseenCategoryWarning,
                        stacklevel=3,
                    )
                blocks.append(block)
        return np.hstack(blocks)

    def transform(self, raw: RawDataset, indices: np.ndarray) -> np.ndarray:
        combined = self.combined_matrix(raw, indices)
        with warnings.catch_warnings():
            # constant-feature warnings were already emitted at fit time
            warnings.simplefilter("ignore")
            return np.vstack([encode_features(row, self.ranges) for row in combined])


def preprocess(
    raw: RawDataset, spec: DatasetSpec, fit_on: np.ndarray
) -> tuple[np.ndarray, FittedPreprocessor]:
    """Fit on the given train indices; return angles for ALL rows plus the
    fitted transformer."""
    fit_on = np.asarray(fit_on, dtype=int)
    if fit_on.size == 0:
        raise DataError("preprocess needs a non-empty fit split")

    means: dict[str, float] = {}
    stds: dict[str, float] = {}
    vocabs: dict[str, tuple[str, ...]] = {}
    names: list[str] = []
    for name, kind in spec.feature_columns:
        if kind == "numeric":
            train_values = raw.numeric[name][fit_on]
            means[name] = float(train_values.mean())
            std = float(train_values.std())
            stds[name] = std if std > 0 else 1.0
            names.append(name)
        else:
            vocab = tuple(sorted(set(raw.categorical[name][i] for i in fit_on)))
            vocabs[name] = vocab
            names.extend(f"{name}={v}" for v in vocab)

    partial = FittedPreprocessor(
        spec=spec, numeric_means=means, numeric_stds=stds, vocabularies=vocabs,
        ranges=FeatureRanges(np.zeros(len(names)), np.ones(len(names))),
        feature_names=tuple(names),
    )
    train_combined = partial.combined_matrix(raw, fit_on)
    ranges = FeatureRanges.fit(train_combined)
    if ranges.constant_mask.any():
        constant = [names[k] for k in np.where(ranges.constant_mask)[0]]
        warnings.warn(
            f"constant feature(s) {constant} on the fit split encode to angle 0",
            ConstantFeatureWarning,
            stacklevel=2,
        )
    fitted = FittedPreprocessor(
        spec=spec, numeric_means=means, numeric_stds=stds, vocabularies=vocabs,
        ranges=ranges, feature_names=tuple(names),
    )
    angles = fitted.transform(raw, np.arange(raw.n_rows))
    return angles, fitted


def preprocessor_summary(pre: FittedPreprocessor) -> dict:
    """JSON-friendly dump of every fitted statistic (for run artifacts)."""
    return {
        "feature_names": list(pre.feature_names),
        "numeric_means": {k: float(v) for k, v in pre.numeric_means.items()},
        "numeric_stds": {k: float(v) for k, v in pre.numeric_stds.items()},
        "vocabularies": {k: list(v) for k, v in pre.vocabularies.items()},
        "range_mins": pre.ranges.mins.tolist(),
        "range_maxs": pre.ranges.maxs.tolist(),
    }


# ---------------------------------------------------------------------------
# Stratified splitting.


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int

    def to_json(self, path: str) -> None:
        doc = {
            "seed": self.seed,
            "train": self.train.tolist(),
            "validation": self.validation.tolist(),
            "test": self.test.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=0, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "SplitIndices":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(
            train=np.asarray(doc["train"], dtype=int),
            validation=np.asarray(doc["validation"], dtype=int),
            test=np.asarray(doc["test"], dtype=int),
            seed=int(doc["seed"]),
        )


def _largest_remainder(total: int, proportions) -> list[int]:
    exact = [total * p for p in proportions]
    floors = [int(np.floor(e)) for e in exact]
    leftover = total - sum(floors)
    remainders = sorted(
        range(len(proportions)), key=lambda k: (-(exact[k] - floors[k]), k)
    )
    for k in remainders[:leftover]:
        floors[k] += 1
    return floors


def stratified_split(
    labels: np.ndarray,
    proportions=DEFAULT_PROPORTIONS,
    seed: int = 0,
    min_per_class: int = MIN_ROWS_PER_CLASS,
) -> SplitIndices:
    """Per-class shuffle and proportional allocation into train/val/test.

    Class allocations use largest-remainder rounding, then single rows are
    reassigned (from the most overrepresented class) until the global split
    sizes hit their own largest-remainder targets, keeping both the global
    sizes within one row of exact and the per-class mix as close as integer
    counts allow.
    """
    labels = np.asarray(labels)
    if abs(sum(proportions) - 1.0) > 1e-9 or len(proportions) != 3:
        raise ConfigError(f"split proportions must be three values summing to 1, got {proportions}")
    if min(proportions) <= 0:
        raise ConfigError("split proportions must be positive")
    classes = sorted(np.unique(labels).tolist())
    if len(classes) != 2:
        raise DataError(f"expected two classes, found {classes}")
    per_class_indices = {}
    for c in classes:
        idx = np.where(labels == c)[0]
        if idx.size < min_per_class:
            raise DataError(
                f"class {c} has {idx.size} rows; need at least {min_per_class} to split"
            )
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "split", repr(c))))
        rng.shuffle(idx)
        per_class_indices[c] = idx

    total = labels.shape[0]
    global_target = _largest_remainder(total, proportions)
    alloc = {c: _largest_remainder(per_class_indices[c].size, proportions) for c in classes}

    # reconcile column sums with the global targets one row at a time
    def column_sums():
        return [sum(alloc[c][k] for c in classes) for k in range(3)]

    sums = column_sums()
    while sums != global_target:
        over = next(k for k in range(3) if sums[k] > global_target[k])
        under = next(k for k in range(3) if sums[k] < global_target[k])
        mover = max(
            (c for c in classes if alloc[c][over] > 0),
            key=lambda c: alloc[c][over] / per_class_indices[c].size - proportions[over],
        )
        alloc[mover][over] -= 1
        alloc[mover][under] += 1
        sums = column_sums()

    parts: list[list[int]] = [[], [], []]
    for c in classes:
        idx = per_class_indices[c]
        n_train, n_val, _ = alloc[c]
        parts[0].extend(idx[:n_train])
        parts[1].extend(idx[n_train:n_train + n_val])
        parts[2].extend(idx[n_train + n_val:])
    return SplitIndices(
        train=np.sort(np.asarray(parts[0], dtype=int)),
        validation=np.sort(np.asarray(parts[1], dtype=int)),
        test=np.sort(np.asarray(parts[2], dtype=int)),
        seed=seed,
    )


def validate_split(split: SplitIndices, labels: np.ndarray,
                   proportions=DEFAULT_PROPORTIONS, strat_tol: float = 0.02) -> None:
    """Raise ValueError if disjointness, coverage, sizes, or stratification fail."""
    labels = np.asarray(labels)
    total = labels.shape[0]
    all_idx = np.concatenate([split.train, split.validation, split.test])
    if len(np.unique(all_idx)) != total or all_idx.size != total:
        raise ValueError("splits must be disjoint and cover every row")
    for name, part, p in (
        ("train", split.train, proportions[0]),
        ("validation", split.validation, proportions[1]),
        ("test", split.test, proportions[2]),
    ):
        if abs(part.size - total * p) > 1.0 + 1e-9:
            raise ValueError(f"{name} size {part.size} deviates from {total * p:.1f} by more than 1")
        frac_global = float(np.mean(labels > 0))
        frac_part = float(np.mean(labels[part] > 0))
        if abs(frac_part - frac_global) > strat_tol + 1e-12:
            raise ValueError(
                f"{name} positive fraction {frac_part:.3f} deviates from global "
                f"{frac_global:.3f} by more than {strat_tol}"
            )


# ---------------------------------------------------------------------------
# Synthetic dataset generators (the stand-in for proprietary data).


@dataclass(frozen=True)
class SyntheticDataset:
    spec: DatasetSpec
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def to_raw(self) -> RawDataset:
        return rows_to_raw(self.spec, list(self.header), [list(r) for r in self.rows])

    def write(self, csv_path: str, spec_path: str | None = None) -> None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.header)
            writer.writerows(self.rows)
        if spec_path:
            self.spec.to_yaml(spec_path)


def _format_rows(columns: dict[str, list[str]], header: list[str]) -> tuple:
    n = len(next(iter(columns.values())))
    return tuple(tuple(columns[h][i] for h in header) for i in range(n))


def make_two_gaussians(n: int, seed: int = 0, separation: float = 2.0,
                       positive_fraction: float = 0.5) -> SyntheticDataset:
    """Two isotropic Gaussian blobs in 2-d, optionally imbalanced."""
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "two-gaussians")))
    n_pos = int(round(n * positive_fraction))
    labels = np.array([1] * n_pos + [-1] * (n - n_pos))
    centers = np.where(labels[:, None] > 0, separation / 2.0, -separation / 2.0)
    points = rng.normal(size=(n, 2)) + centers
    order = rng.permutation(n)
    points, labels = points[order], labels[order]
    columns = {
        "x0": [f"{v:.10f}" for v in points[:, 0]],
        "x1": [f"{v:.10f}" for v in points[:, 1]],
        "label": ["pos" if v > 0 else "neg" for v in labels],
    }
    spec = DatasetSpec("label", "pos", "neg", (("x0", "numeric"), ("x1", "numeric")))
    header = ["x0", "x1", "label"]
    return SyntheticDataset(spec, tuple(header), _format_rows(columns, header))


def make_xor_checkerboard(n: int, seed: int = 0, margin: float = 0.04) -> SyntheticDataset:
    """Uniform points on [0,1]^2, label +1 iff exactly one coordinate > 0.5.

    Points inside `margin` of either decision line are resampled, keeping the
    classes cleanly separated for directional separability checks.
    """
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "xor")))
    points = np.empty((n, 2))
    count = 0
    while count < n:
        candidate = rng.uniform(size=2)
        if np.all(np.abs(candidate - 0.5) > margin):
            points[count] = candidate
            count += 1
    labels = np.logical_xor(points[:, 0] > 0.5, points[:, 1] > 0.5)
    columns = {
        "x0": [f"{v:.10f}" for v in points[:, 0]],
        "x1": [f"{v:.10f}" for v in points[:, 1]],
        "label": ["pos" if v else "neg" for v in labels],
    }
    spec = DatasetSpec("label", "pos", "neg", (("x0", "numeric"), ("x1", "numeric")))
    header = ["x0", "x1", "label"]
    return SyntheticDataset(spec, tuple(header), _format_rows(columns, header))


def make_mixed(n: int, seed: int = 0, positive_fraction: float = 0.5) -> SyntheticDataset:
    """Mixed numeric + categorical dataset with label-correlated structure."""
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "mixed")))
    n_pos = int(round(n * positive_fraction))
    labels = np.array([1] * n_pos + [-1] * (n - n_pos))
    rng.shuffle(labels)
    shift = np.where(labels > 0, 0.9, -0.9)
    num0 = rng.normal(size=n) + shift
    num1 = rng.normal(size=n) - 0.5 * shift
    num2 = rng.normal(size=n)  # pure noise column
    tiers = ["bronze", "silver", "gold"]
    tier_probs_pos = [0.2, 0.3, 0.5]
    tier_probs_neg = [0.5, 0.3, 0.2]
    tier = [
        tiers[rng.choice(3, p=tier_probs_pos if lab > 0 else tier_probs_neg)]
        for lab in labels
    ]
    columns = {
        "spend": [f"{v:.10f}" for v in num0],
        "tenure": [f"{v:.10f}" for v in num1],
        "noise": [f"{v:.10f}" for v in num2],
        "tier": tier,
        "label": ["pos" if v > 0 else "neg" for v in labels],
    }
    spec = DatasetSpec(
        "label", "pos", "neg",
        (("spend", "numeric"), ("tenure", "numeric"), ("noise", "numeric"),
         ("tier", "categorical")),
    )
    header = ["spend", "tenure", "noise", "tier", "label"]
    return SyntheticDataset(spec, tuple(header), _format_rows(columns, header))


SYNTH_GENERATORS = {
    "two-gaussians": make_two_gaussians,
    "xor": make_xor_checkerboard,
    "mixed": make_mixed,
}
