"""Synthetic two-dimensional datasets, CSV round trips and IDX (MNIST) ingestion."""

import csv
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError, FormatError

DATASETS = ("donut1d", "donut2d", "squares", "spiral")
DEFAULT_COUNTS = {"donut1d": 500, "donut2d": 1000, "squares": 1000, "spiral": 1000}

# generator geometry
DONUT1D_RADII = (0.8, 1.0)
DONUT2D_INNER = 0.5
DONUT2D_OUTER = (0.7, 1.0)
SPIRAL_TURNS = 3 * np.pi
SPIRAL_NOISE = 0.03

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    X: np.ndarray
    c: np.ndarray
    name: str = ""
    seed: int = 0

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.c = np.asarray(self.c).astype(int)
        if self.X.shape[0] < 1:
            raise DataError("dataset is empty")
        if self.c.shape != (self.X.shape[0],):
            raise DataError(f"{self.X.shape[0]} samples but {self.c.size} labels")
        if not np.all((self.c == 0) | (self.c == 1)):
            raise DataError("labels must be 0 or 1")
        if not np.all(np.isfinite(self.X)):
            raise DataError("features must be finite")

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def n(self):
        return self.X.shape[1]


def _uniform_annulus(rng, m, r0, r1):
    r = np.sqrt(rng.uniform(r0**2, r1**2, m))
    theta = rng.uniform(0.0, 2 * np.pi, m)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1), theta


def donut1d_label(theta):
    """Angular sector rule on the ring: class 1 on the two sectors around the vertical axis."""
    return (np.abs(np.sin(theta)) > np.sqrt(0.5)).astype(int)


def _donut1d(rng, m):
    X, theta = _uniform_annulus(rng, m, *DONUT1D_RADII)
    return X, donut1d_label(theta)


def _donut2d(rng, m):
    m0 = m // 2
    inner, _ = _uniform_annulus(rng, m0, 0.0, DONUT2D_INNER)
    outer, _ = _uniform_annulus(rng, m - m0, *DONUT2D_OUTER)
    X = np.concatenate([inner, outer])
    c = np.concatenate([np.zeros(m0, int), np.ones(m - m0, int)])
    order = rng.permutation(m)
    return X[order], c[order]


def _squares(rng, m):
    X = rng.uniform(-1.0, 1.0, (m, 2))
    return X, (X[:, 0] * X[:, 1] > 0).astype(int)


def spiral_radius(theta):
    return 0.1 + 0.35 * theta / np.pi


def _spiral(rng, m):
    c = np.arange(m) % 2
    theta = rng.uniform(0.0, SPIRAL_TURNS, m)
    r = spiral_radius(theta)
    phase = theta + np.pi * c
    X = np.stack([r * np.cos(phase), r * np.sin(phase)], axis=1)
    X += rng.normal(0.0, SPIRAL_NOISE, X.shape)
    order = rng.permutation(m)
    return X[order], c[order]


_GENERATORS = {"donut1d": _donut1d, "donut2d": _donut2d, "squares": _squares, "spiral": _spiral}


def generate(name, m=None, seed=1):
    """Draw ``m`` labelled points from one of the synthetic distributions."""
    try:
        gen = _GENERATORS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown dataset {name!r}; expected one of {', '.join(DATASETS)}"
        ) from None
    m = DEFAULT_COUNTS[name] if m is None else int(m)
    if m < 2:
        raise DataError("need at least two samples")
    X, c = gen(np.random.default_rng(seed), m)
    return LabeledDataset(X, c, name, seed)


def generate_split(name, m=None, seed=1):
    """Training set and an independent test draw of the same size."""
    train = generate(name, m, seed)
    test = generate(name, train.m, np.random.SeedSequence([seed, 1]).generate_state(1)[0])
    return train, test


def save_csv(ds, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{k + 1}" for k in range(ds.n)] + ["label"])
        for x, c in zip(ds.X, ds.c):
            w.writerow([repr(float(v)) for v in x] + [int(c)])
    return path


def load_csv(path, name=None):
    path = Path(path)
    X, c = [], []
    with path.open(newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        width = len(header) - 1
        if width < 1 or header[-1] != "label":
            raise FormatError(f"{path}:1: expected header 'x1,...,xn,label'")
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise FormatError(f"{path}:{lineno}: expected {width + 1} fields, got {len(row)}")
            try:
                feats = [float(v) for v in row[:-1]]
                label = int(row[-1])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if label not in (0, 1):
                raise DataError(f"{path}:{lineno}: label {label} is not 0 or 1")
            X.append(feats)
            c.append(label)
    if not X:
        raise DataError(f"{path}: no samples")
    return LabeledDataset(np.array(X), np.array(c), name or path.stem, 0)


def _read_idx(path, magic, ndim):
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    header = 4 * (1 + ndim)
    if len(raw) < header:
        raise FormatError(f"{path}: truncated IDX header")
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise FormatError(f"{path}: bad IDX magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header != size:
        raise FormatError(f"{path}: payload has {len(raw) - header} bytes, header promises {size}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images ``(count, rows, cols)`` and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.size))
        fh.write(labels.tobytes())


def load_idx(images_path, labels_path, digits=(0, 8), train_count=100, test_count=500, seed=1):
    """Two-digit binary task from IDX files: first digit -> 0, second -> 1.

    Gzip-compressed files are accepted as well.
    Pixels are scaled to ``[0, 1]``; train and test are disjoint draws from a
    seeded shuffle of the matching images.
    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    first, second = digits
    keep = np.nonzero((labels == first) | (labels == second))[0]
    need = train_count + test_count
    if keep.size < need:
        raise DataError(f"only {keep.size} images of digits {digits}, need {need}")
    keep = keep[np.random.default_rng(seed).permutation(keep.size)[:need]]
    X = images[keep].reshape(need, -1).astype(float) / 255.0
    c = (labels[keep] == second).astype(int)
    name = f"mnist{first}{second}"
    train = LabeledDataset(X[:train_count], c[:train_count], name, seed)
    test = LabeledDataset(X[train_count:], c[train_count:], name, seed)
    return train, test
