"""Dataset generation and ingestion: ensemble clusterings, blob images, PGM files."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataError
from ..matching import Pattern
from ..prototype import Instance

KMEANS_MAX_ITER = 50
KMEANS_REL_TOL = 1e-6
DEFAULT_TOTAL_WEIGHT = 1000
IMAGE_SIZE = 28


def _sq_dists(x, centers):
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def kmeans_pp_seed(x, k, rng, weights=None):
    n = x.shape[0]
    rng = np.random.default_rng(rng)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.choice(n, p=w / w.sum())]
    closest = ((x - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        score = w * closest
        total = score.sum()
        idx = rng.choice(n, p=score / total) if total > 0 else rng.choice(n, p=w / w.sum())
        centers[c] = x[idx]
        closest = np.minimum(closest, ((x - centers[c]) ** 2).sum(axis=1))
    return centers


def lloyd_kmeans(x, k, rng, weights=None, max_iter=KMEANS_MAX_ITER, rel_tol=KMEANS_REL_TOL):
    """Weighted Lloyd iterations from k-means++ seeds.

    Returns ``(centers, labels)``.  A cluster that loses all its members keeps
    its last center and stays empty.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(rng)
    if not 1 <= k <= x.shape[0]:
        raise ConfigError(f"k={k} must lie in [1, {x.shape[0]}]")
    w = np.ones(x.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    centers = kmeans_pp_seed(x, k, rng, w)
    prev = np.inf
    for _ in range(max_iter):
        dist = _sq_dists(x, centers)
        labels = dist.argmin(axis=1)
        inertia = float(w @ dist[np.arange(x.shape[0]), labels])
        for c in range(k):
            mask = labels == c
            mass = w[mask].sum()
            if mass > 0:
                centers[c] = w[mask] @ x[mask] / mass
        if np.isfinite(prev) and prev - inertia <= rel_tol * prev:
            break
        prev = inertia
    labels = _sq_dists(x, centers).argmin(axis=1)
    return centers, labels


def clustering_to_pattern(labels, k) -> np.ndarray:
    """k binary membership vectors in R^items; clusters beyond the used labels stay all-zero."""
    labels = np.asarray(labels)
    return (labels[None, :] == np.arange(k)[:, None]).astype(np.float64)


def gaussian_items(items, k, dims, rng, separation=3.0):
    """``items`` points from k unit Gaussians whose centers have std ``separation``."""
    if not 1 <= k <= items:
        raise ConfigError(f"need 1 <= k <= items, got k={k}, items={items}")
    centers = rng.normal(scale=separation, size=(k, dims))
    truth = rng.permutation(np.arange(items) % k)
    return centers[truth] + rng.normal(size=(items, dims)), truth


def gen_ensemble_instance(items, k, dims, solutions, rng, separation=3.0):
    """Clusterings of one Gaussian dataset, each encoded as k binary vectors in R^items.

    Returns ``(instance, truth_labels)``.
    """
    rng = np.random.default_rng(rng)
    x, truth = gaussian_items(items, k, dims, rng, separation)
    patterns = np.empty((solutions, k, items))
    for s in range(solutions):
        _, labels = lloyd_kmeans(x, k, rng)
        patterns[s] = clustering_to_pattern(labels, k)
    return Instance(patterns), truth


def gen_gaussian_instance(n, k, d, rng, spread=3.0):
    """Noisy copies of one random k-point template (unit noise, template std ``spread``)."""
    rng = np.random.default_rng(rng)
    template = rng.normal(scale=spread, size=(k, d))
    return Instance(template[None] + rng.normal(size=(n, k, d)))


def _stroke_points(shape, rng, count=40):
    s = np.linspace(0.0, 1.0, count)
    if shape == 0:  # ring
        theta = 2 * np.pi * s
        pts = np.stack([0.5 + 0.32 * np.sin(theta), 0.5 + 0.22 * np.cos(theta)], axis=1)
    elif shape == 1:  # bar with a flag
        bar = np.stack([0.15 + 0.7 * s, np.full(count, 0.55)], axis=1)
        flag = np.stack([0.15 + 0.15 * s[: count // 4], 0.55 - 0.15 * s[: count // 4]], axis=1)
        pts = np.concatenate([bar, flag])
    else:  # seven
        top = np.stack([np.full(count // 2, 0.2), np.linspace(0.25, 0.75, count // 2)], axis=1)
        diag = np.stack([np.linspace(0.2, 0.85, count // 2), np.linspace(0.75, 0.4, count // 2)], axis=1)
        pts = np.concatenate([top, diag])
    # random similarity transform around the image center
    angle = rng.normal(scale=0.12)
    scale = 1.0 + rng.normal(scale=0.06)
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    shift = rng.normal(scale=0.04, size=2)
    return (pts - 0.5) @ rot.T * scale + 0.5 + shift


def blob_image(shape, rng, size=IMAGE_SIZE, width=1.1):
    """Grayscale stroke image in [0, 255] built from Gaussian blobs along a digit-like curve."""
    pts = _stroke_points(shape, rng) * (size - 1)
    pts += rng.normal(scale=0.4, size=pts.shape)
    rows, cols = np.mgrid[0:size, 0:size]
    grid = np.stack([rows.ravel(), cols.ravel()], axis=1).astype(np.float64)
    img = np.exp(-_sq_dists(grid, pts) / (2 * width**2)).sum(axis=1).reshape(size, size)
    img = 255.0 * img / img.max()
    return np.round(img)


def blob_images(n, rng, shape=0, noise_fraction=0.1, size=IMAGE_SIZE):
    """``n`` images of one stroke class, with ``noise_fraction`` of them drawn from the other classes."""
    rng = np.random.default_rng(rng)
    others = [s for s in range(3) if s != shape]
    out = []
    for _ in range(n):
        cls = int(rng.choice(others)) if rng.uniform() < noise_fraction else shape
        out.append(blob_image(cls, rng, size))
    return out


def largest_remainder(raw, total) -> np.ndarray:
    """Round non-negative reals summing to ``total`` into integers with the same sum."""
    raw = np.asarray(raw, dtype=np.float64)
    base = np.floor(raw).astype(np.int64)
    short = int(total - base.sum())
    if short > 0:
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return base


def image_to_weighted_pattern(image, k, rng, total_weight=DEFAULT_TOTAL_WEIGHT) -> Pattern:
    """Compress a grayscale image into k weighted 2D points (pixel row, column).

    Intensity-weighted k-means on the pixel grid; each center carries its
    cluster's intensity mass, rescaled to ``total_weight`` and rounded with
    largest-remainder so the integer weights sum exactly to it.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DataError("image must be a 2D grid")
    if np.any(img < 0) or not np.all(np.isfinite(img)):
        raise DataError("pixel intensities must be finite and non-negative")
    if k < 1:
        raise ConfigError("k must be >= 1")
    rows, cols = np.nonzero(img > 0)
    if rows.size == 0:
        raise DataError("image has no positive pixel")
    coords = np.stack([rows, cols], axis=1).astype(np.float64)
    mass = img[rows, cols]
    rng = np.random.default_rng(rng)
    if coords.shape[0] <= k:
        centers = np.concatenate([coords, np.repeat(coords[:1], k - coords.shape[0], axis=0)])
        cluster_mass = np.concatenate([mass, np.zeros(k - coords.shape[0])])
    else:
        centers, labels = lloyd_kmeans(coords, k, rng, weights=mass)
        cluster_mass = np.bincount(labels, weights=mass, minlength=k)
    weights = largest_remainder(cluster_mass / cluster_mass.sum() * total_weight, total_weight)
    return Pattern(centers, weights)


def images_to_instance(images, k, rng, total_weight=DEFAULT_TOTAL_WEIGHT) -> Instance:
    rng = np.random.default_rng(rng)
    return Instance.from_patterns([image_to_weighted_pattern(img, k, rng, total_weight) for img in images])


def read_pgm(path) -> np.ndarray:
    """Plain (P2) or binary (P5) PGM as a float array."""
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    # header: magic, width, height, maxval; '#' comments allowed between tokens
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DataError(f"{path}: malformed PGM header") from None
    if magic == b"P2":
        values = np.array(raw[pos:].split(), dtype=np.float64)
    elif magic == b"P5":
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        values = np.frombuffer(raw[pos + 1 :], dtype=dtype).astype(np.float64)
    else:
        raise DataError(f"{path}: not a PGM file (magic {magic!r})")
    if values.size < width * height:
        raise DataError(f"{path}: expected {width * height} pixels, found {values.size}")
    return values[: width * height].reshape(height, width)


def write_pgm(path, image, binary=True) -> None:
    img = np.clip(np.round(np.asarray(image)), 0, 255).astype(np.uint8)
    h, w = img.shape
    if binary:
        Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + img.tobytes())
    else:
        body = "\n".join(" ".join(str(v) for v in row) for row in img)
        Path(path).write_text(f"P2\n{w} {h}\n255\n{body}\n")


def load_image_dir(path) -> list[np.ndarray]:
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() == ".pgm")
    if not files:
        raise DataError(f"no .pgm files in {path}")
    return [read_pgm(p) for p in files]
