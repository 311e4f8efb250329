"""Gaussian simulation designs with exact posteriors, plus CSV and IDX loaders."""

from __future__ import annotations

import csv
import enum
import gzip
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .wsvm_train import Dataset

N_INFORMATIVE = 5
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
MIN_SD = 1e-12


class ExampleId(enum.Enum):
    EX1 = "Ex1"  # independent features, means +-0.5
    EX2 = "Ex2"  # compound-symmetric block, means +-1
    EX3 = "Ex3"  # AR(1)-style block, means +-1, 60/40 classes


_DEFAULT_FRACTION = {ExampleId.EX1: 0.5, ExampleId.EX2: 0.5, ExampleId.EX3: 0.6}


def example_id(value) -> ExampleId:
    """Accepts ``ExampleId``, ``"Ex2"`` or ``2``."""
    if isinstance(value, ExampleId):
        return value
    if isinstance(value, (int, np.integer)) or str(value).isdigit():
        return ExampleId(f"Ex{int(value)}")
    return ExampleId(value)


@dataclass(frozen=True)
class SimSpec:
    example_id: ExampleId
    n: int
    p: int
    rho: float = 0.8
    positive_fraction: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "example_id", example_id(self.example_id))
        if self.positive_fraction is None:
            object.__setattr__(self, "positive_fraction", _DEFAULT_FRACTION[self.example_id])
        if self.p < N_INFORMATIVE:
            raise ValueError(f"p must be at least {N_INFORMATIVE}, got {self.p}")
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if not -1 < self.rho < 1:
            raise ValueError("rho must lie in (-1, 1)")
        if not 0 < self.positive_fraction < 1:
            raise ValueError("positive_fraction must lie in (0, 1)")

    def with_seed(self, seed: int, n: int | None = None) -> "SimSpec":
        return SimSpec(
            self.example_id, self.n if n is None else n, self.p, self.rho,
            self.positive_fraction, seed,
        )


@dataclass(frozen=True, eq=False)
class LabeledMatrix:
    dataset: Dataset
    true_probabilities: np.ndarray | None = None

    def __post_init__(self):
        tp = self.true_probabilities
        if tp is not None:
            tp = np.asarray(tp, dtype=float).ravel()
            if tp.size != self.dataset.n:
                raise ValueError("one true probability per sample required")
            if np.any(tp <= 0) or np.any(tp >= 1):
                raise ValueError("true probabilities must lie strictly inside (0, 1)")
            object.__setattr__(self, "true_probabilities", tp)


def informative_block(spec: SimSpec) -> np.ndarray:
    """Covariance of the first five coordinates."""
    k = N_INFORMATIVE
    if spec.example_id is ExampleId.EX1:
        return np.eye(k)
    if spec.example_id is ExampleId.EX2:
        return np.full((k, k), spec.rho) + (1 - spec.rho) * np.eye(k)
    lag = np.abs(np.subtract.outer(np.arange(k), np.arange(k)))
    return spec.rho**lag


def class_means(spec: SimSpec) -> tuple[np.ndarray, np.ndarray]:
    """``(mu_pos, mu_neg)`` restricted to the informative block."""
    level = 0.5 if spec.example_id is ExampleId.EX1 else 1.0
    mu = np.full(N_INFORMATIVE, level)
    return mu, -mu


def class_sizes(spec: SimSpec) -> tuple[int, int]:
    if spec.example_id is ExampleId.EX3:
        n_pos = math.floor(spec.positive_fraction * spec.n)
    else:
        n_pos = int(round(spec.positive_fraction * spec.n))
    return n_pos, spec.n - n_pos


def full_covariance(spec: SimSpec) -> np.ndarray:
    S = np.eye(spec.p)
    S[:N_INFORMATIVE, :N_INFORMATIVE] = informative_block(spec)
    return S


def _block_factor(spec: SimSpec) -> np.ndarray:
    try:
        return np.linalg.cholesky(informative_block(spec))
    except np.linalg.LinAlgError as exc:
        raise ValueError("informative covariance block is not positive definite") from exc


def posterior_coefficients(spec: SimSpec) -> tuple[np.ndarray, float]:
    """``(w, b)`` with ``P(y=+1 | x) = logistic(w'x + b)``; ``w`` is zero off the block."""
    mu_pos, mu_neg = class_means(spec)
    S = informative_block(spec)
    w5 = np.linalg.solve(S, mu_pos - mu_neg)
    b = -0.5 * (mu_pos + mu_neg) @ w5
    pf = spec.positive_fraction
    b += math.log(pf / (1 - pf))
    w = np.zeros(spec.p)
    w[:N_INFORMATIVE] = w5
    return w, float(b)


def bayes_posterior(spec: SimSpec, x) -> np.ndarray | float:
    """Exact ``P(y=+1 | x)`` for one point or a matrix of points."""
    w, b = posterior_coefficients(spec)
    x = np.asarray(x, dtype=float)
    out = expit(x @ w + b)
    return float(out) if out.ndim == 0 else out


def gen_gaussian_example(spec: SimSpec) -> LabeledMatrix:
    """Fixed class counts; positives first, then negatives."""
    rng = np.random.default_rng(spec.seed)
    n_pos, n_neg = class_sizes(spec)
    L = _block_factor(spec)
    mu_pos, mu_neg = class_means(spec)
    Z = rng.standard_normal((spec.n, spec.p))
    X = Z.copy()
    X[:, :N_INFORMATIVE] = Z[:, :N_INFORMATIVE] @ L.T
    X[:n_pos, :N_INFORMATIVE] += mu_pos
    X[n_pos:, :N_INFORMATIVE] += mu_neg
    y = np.concatenate([np.ones(n_pos), -np.ones(n_neg)])
    data = Dataset(X, y)
    return LabeledMatrix(data, bayes_posterior(spec, X))


def bayes_error_mc(spec: SimSpec) -> float:
    """Empirical error of the Bayes rule on a sample drawn from ``spec``."""
    sample = gen_gaussian_example(spec)
    pred = np.where(sample.true_probabilities >= 0.5, 1.0, -1.0)
    return float(np.mean(pred != sample.dataset.labels))


def replicate_seed(root_seed: int, index: int, stream: int = 0) -> int:
    """Independent seed for replicate ``index`` (and sub-stream) of a root seed."""
    ss = np.random.SeedSequence(entropy=root_seed, spawn_key=(index, stream))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


# ---------------------------------------------------------------- CSV


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_label_matrix_csv(path, label_column, positive_token: str) -> Dataset:
    """Numeric CSV with one label column.

    ``label_column`` is a header name or a 0-based column index. The first row
    is a header when any of its feature cells is non-numeric.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: file is empty")
    width = len(rows[0])
    header = None
    if isinstance(label_column, str) and not label_column.isdigit():
        header = [c.strip() for c in rows[0]]
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r}")
        col = header.index(label_column)
        rows = rows[1:]
    else:
        col = int(label_column)
        if not 0 <= col < width:
            raise ValueError(f"{path}: label column {col} out of range (width {width})")
        first = [c for j, c in enumerate(rows[0]) if j != col]
        if not all(_is_number(c) for c in first):
            header = rows[0]
            rows = rows[1:]
    offset = 2 if header is not None else 1
    X = np.empty((len(rows), width - 1))
    y = np.empty(len(rows))
    for i, row in enumerate(rows):
        line = i + offset
        if len(row) != width:
            raise ValueError(f"{path}: line {line} has {len(row)} cells, expected {width}")
        y[i] = 1.0 if row[col].strip() == str(positive_token) else -1.0
        k = 0
        for j, cell in enumerate(row):
            if j == col:
                continue
            try:
                X[i, k] = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric cell {cell!r} at line {line}, column {j + 1}"
                ) from None
            k += 1
    return Dataset(X, y)


# ---------------------------------------------------------------- IDX


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    head = 4 + 4 * ndim
    if len(raw) < 4:
        raise ValueError(f"{path}: truncated header")
    found = struct.unpack(">I", raw[:4])[0]
    if found != magic:
        raise ValueError(f"{path}: magic {found:#010x}, expected {magic:#010x}")
    if len(raw) < head:
        raise ValueError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:head])
    size = int(np.prod(dims))
    if len(raw) - head < size:
        raise ValueError(f"{path}: truncated, {len(raw) - head} of {size} bytes present")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=head).reshape(dims)


def read_idx_images(path) -> np.ndarray:
    return _read_idx(path, IDX_IMAGES_MAGIC, 3)


def read_idx_labels(path) -> np.ndarray:
    return _read_idx(path, IDX_LABELS_MAGIC, 1)


def write_idx_images(path, images: np.ndarray):
    images = np.asarray(images, dtype=np.uint8)
    header = struct.pack(">4I", IDX_IMAGES_MAGIC, *images.shape)
    Path(path).write_bytes(header + images.tobytes())


def write_idx_labels(path, labels: np.ndarray):
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">2I", IDX_LABELS_MAGIC, labels.size) + labels.tobytes())


def load_idx_images(images_path, labels_path, digit_pos: int, digit_neg: int) -> Dataset:
    """Two-digit subset of an IDX image/label pair, pixels scaled to [0, 1]."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise ValueError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    keep = (labels == digit_pos) | (labels == digit_neg)
    X = images[keep].reshape(int(keep.sum()), -1).astype(float) / 255.0
    y = np.where(labels[keep] == digit_pos, 1.0, -1.0)
    return Dataset(X, y)


# ---------------------------------------------------------------- scaling


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Training-set centring and scaling, with zero-variance columns dropped."""

    mean: np.ndarray
    scale: np.ndarray
    kept: np.ndarray
    dropped: np.ndarray
    p: int = field(default=0)

    @classmethod
    def fit(cls, train: Dataset, center: bool = True) -> "Standardizer":
        X = train.features
        sd = X.std(axis=0)
        kept = np.flatnonzero(sd >= MIN_SD)
        dropped = np.flatnonzero(sd < MIN_SD)
        if center:
            mean, scale = X.mean(axis=0)[kept], sd[kept]
        else:
            mean, scale = np.zeros(kept.size), np.ones(kept.size)
        return cls(mean, scale, kept, dropped, X.shape[1])

    def transform_features(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.p:
            raise ValueError(f"features have {X.shape[1]} columns, expected {self.p}")
        return (X[:, self.kept] - self.mean) / self.scale

    def transform(self, data: Dataset) -> Dataset:
        return Dataset(self.transform_features(data.features), data.labels)

    def expand(self, values, fill=0.0) -> np.ndarray:
        """Map a per-kept-column vector back to all original columns."""
        out = np.full(self.p, fill, dtype=np.asarray(values).dtype)
        out[self.kept] = values
        return out


def standardize_features(train: Dataset, others=()) -> tuple[list[Dataset], np.ndarray]:
    """Standardise with training statistics; returns ``([train, *others], dropped)``."""
    st = Standardizer.fit(train)
    return [st.transform(train)] + [st.transform(d) for d in others], st.dropped
