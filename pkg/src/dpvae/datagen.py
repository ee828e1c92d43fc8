"""Seeded 2-D toy datasets."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Dataset2D:
    points: np.ndarray
    name: str
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"expected an (n, 2) array, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("dataset contains non-finite points")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2"])
            for x1, x2 in self.points:
                w.writerow([repr(float(x1)), repr(float(x2))])
        return path

    @classmethod
    def from_csv(cls, path, name: str | None = None) -> "Dataset2D":
        path = Path(path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["x1", "x2"]:
            raise ValueError(f"{path}: expected header x1,x2")
        pts = np.array([[float(a), float(b)] for a, b in rows[1:]]).reshape(-1, 2)
        return cls(pts, name or path.stem, seed=-1)


def two_moons(n: int, noise: float = 0.05, seed: int = 0) -> Dataset2D:
    """Interleaved half circles.

    The first ``n // 2`` points lie on the upper unit semicircle around the
    origin, the rest on the lower one around (1, 0.5); angles are uniform
    and isotropic Gaussian noise of scale ``noise`` is added.
    """
    if n < 2:
        raise ValueError("two_moons needs n >= 2")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    n_upper = n // 2
    theta = rng.uniform(0.0, np.pi, size=n)
    upper = np.stack([np.cos(theta[:n_upper]), np.sin(theta[:n_upper])], axis=1)
    t = theta[n_upper:]
    lower = np.stack([1.0 - np.cos(t), 0.5 - np.sin(t)], axis=1)
    pts = np.concatenate([upper, lower]) + noise * rng.standard_normal((n, 2))
    return Dataset2D(pts, "two_moons", seed, {"n": n, "noise": noise})


def moon_arc_distance(points) -> np.ndarray:
    """Distance from each point to the nearer of the two noiseless arcs."""
    p = np.asarray(points, dtype=np.float64)

    def arc(center, upper):
        d = p - center
        r = np.hypot(d[:, 0], d[:, 1])
        on_side = d[:, 1] >= 0 if upper else d[:, 1] <= 0
        radial = np.abs(r - 1.0)
        ends = np.stack([center + [1.0, 0.0], center - [1.0, 0.0]])
        end_dist = np.min(np.linalg.norm(p[:, None, :] - ends[None], axis=-1), axis=1)
        return np.where(on_side, radial, end_dist)

    return np.minimum(arc(np.array([0.0, 0.0]), True), arc(np.array([1.0, 0.5]), False))


def gaussian_grid(n: int, k: int = 3, spacing: float = 2.0, noise: float = 0.1, seed: int = 0) -> Dataset2D:
    """k x k isotropic blobs centered on a grid around the origin.

    Point i belongs to blob ``i % k**2`` so blob sizes differ by at most one.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = np.random.default_rng(seed)
    centers = grid_centers(k, spacing)
    which = np.arange(n) % len(centers)
    pts = centers[which] + noise * rng.standard_normal((n, 2))
    return Dataset2D(pts, "gaussian_grid", seed, {"n": n, "k": k, "spacing": spacing, "noise": noise})


def grid_centers(k: int, spacing: float) -> np.ndarray:
    offs = spacing * (np.arange(k) - (k - 1) / 2.0)
    gx, gy = np.meshgrid(offs, offs, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


GENERATORS = {"two_moons": two_moons, "gaussian_grid": gaussian_grid}


def train_heldout(name: str, n_train: int, n_heldout: int, seed: int, **kwargs) -> tuple[Dataset2D, Dataset2D]:
    """Draw ``n_train + n_heldout`` points once and split them by a seeded shuffle."""
    full = GENERATORS[name](n_train + n_heldout, seed=seed, **kwargs)
    order = np.random.default_rng([seed, 1]).permutation(len(full))
    train = Dataset2D(full.points[order[:n_train]], name, seed, {**full.params, "split": "train"})
    held = Dataset2D(full.points[order[n_train:]], name, seed, {**full.params, "split": "heldout"})
    return train, held
