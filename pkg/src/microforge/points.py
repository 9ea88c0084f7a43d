"""Germ point processes driving tessellations and Boolean models.

All samplers are pure functions of (parameters, RandomStream); points always
lie in the closed sampling window.  Cluster and Boolean samplers use
plus-sampling (a dilated window) so statistics are stationary inside the
target window.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GenerationError
from .rng import RandomStream


@dataclass(frozen=True)
class Box:
    """Axis-aligned closed box; the sampling window of every point process."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if any(h <= l for l, h in zip(lo, hi)):
            raise ConfigError(f"degenerate window: lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, side: float) -> "Box":
        return cls((0.0, 0.0, 0.0), (side, side, side))

    @classmethod
    def from_dims(cls, dims) -> "Box":
        return cls((0.0, 0.0, 0.0), tuple(float(d) for d in dims))

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2.0

    def dilate(self, r: float) -> "Box":
        if r < 0:
            raise ConfigError("dilation radius must be >= 0")
        return Box(tuple(l - r for l in self.lo), tuple(h + r for h in self.hi))

    def contains(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(points)
        lo = np.asarray(self.lo) - slack
        hi = np.asarray(self.hi) + slack
        return np.all((p >= lo) & (p <= hi), axis=1)

    def sample_uniform(self, gen: np.random.Generator, n: int) -> np.ndarray:
        u = gen.random((n, 3))
        return np.asarray(self.lo) + u * self.extent


@dataclass(frozen=True)
class PointPattern:
    window: Box
    points: np.ndarray  # (n, 3) float64

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if pts.size and not self.window.contains(pts, slack=1e-12).all():
            raise ConfigError("points outside the window")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class SizeDist:
    """Size distribution for sphere radii, cube edges, packing radii, ...

    kinds: constant(value) | uniform(lo, hi) | lognormal(median, sigma_log, cap).
    Lognormal draws are clipped at ``cap`` so every distribution has a known
    upper bound (required for plus-sampling).
    """

    kind: str
    a: float
    b: float = 0.0
    cap: float | None = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.a <= 0:
                raise ConfigError("constant size must be > 0")
        elif self.kind == "uniform":
            if not (0 < self.a <= self.b):
                raise ConfigError("uniform size needs 0 < lo <= hi")
        elif self.kind == "lognormal":
            if self.a <= 0 or self.b < 0:
                raise ConfigError("lognormal needs median > 0 and sigma_log >= 0")
            if self.cap is None:
                raise ConfigError("lognormal size distribution requires an explicit cap "
                                  "(unbounded sizes break plus-sampling)")
        else:
            raise ConfigError(f"unknown size distribution {self.kind!r}")

    @classmethod
    def constant(cls, value: float) -> "SizeDist":
        return cls("constant", float(value))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "SizeDist":
        return cls("uniform", float(lo), float(hi))

    @classmethod
    def lognormal(cls, median: float, sigma_log: float, cap: float) -> "SizeDist":
        return cls("lognormal", float(median), float(sigma_log), float(cap))

    @property
    def upper_bound(self) -> float:
        if self.kind == "constant":
            return self.a
        if self.kind == "uniform":
            return self.b
        return float(self.cap)

    @property
    def mean(self) -> float:
        if self.kind == "constant":
            return self.a
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        # clipped lognormal mean has no neat closed form; report the unclipped one
        return self.a * float(np.exp(0.5 * self.b**2))

    def moment(self, k: int) -> float:
        """E[size^k], exact for all kinds (lognormal: capped moment)."""
        if self.kind == "constant":
            return self.a**k
        if self.kind == "uniform":
            if self.a == self.b:
                return self.a**k
            return (self.b ** (k + 1) - self.a ** (k + 1)) / ((k + 1) * (self.b - self.a))
        m, sig, c = self.a, self.b, float(self.cap)
        if sig == 0.0:
            return min(m, c) ** k
        # E[min(X,c)^k] for X = m exp(sig Z):
        #   m^k e^(k^2 sig^2 / 2) Phi(z_c - k sig) + c^k (1 - Phi(z_c))
        from math import erf, exp, log, sqrt

        def phi(x):
            return 0.5 * (1.0 + erf(x / sqrt(2.0)))

        z_c = log(c / m) / sig
        return (m**k * exp(0.5 * (k * sig) ** 2) * phi(z_c - k * sig)
                + c**k * (1.0 - phi(z_c)))

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, self.a)
        if self.kind == "uniform":
            return gen.uniform(self.a, self.b, size=n)
        vals = self.a * np.exp(gen.standard_normal(n) * self.b)
        return np.minimum(vals, self.cap)


def sample_poisson(intensity: float, window: Box, rng: RandomStream) -> PointPattern:
    """Homogeneous Poisson process: Poisson count, i.i.d. uniform locations."""
    if intensity < 0:
        raise ConfigError(f"intensity must be >= 0, got {intensity}")
    gen = rng.generator()
    n = int(gen.poisson(intensity * window.volume))
    return PointPattern(window, window.sample_uniform(gen, n))


def sample_matern_cluster(parent_intensity: float, mean_points_per_cluster: float,
                          cluster_radius: float, window: Box,
                          rng: RandomStream) -> PointPattern:
    """Matérn cluster process: Poisson parents, Poisson-many offspring per
    parent uniform in a ball.

    Parents are simulated in the window dilated by the cluster radius
    (plus-sampling); offspring falling outside the window are discarded.
    """
    for name, v in [("parent_intensity", parent_intensity),
                    ("mean_points_per_cluster", mean_points_per_cluster),
                    ("cluster_radius", cluster_radius)]:
        if v < 0:
            raise ConfigError(f"{name} must be >= 0, got {v}")
    gen = rng.generator()
    dilated = window.dilate(cluster_radius) if cluster_radius > 0 else window
    n_parents = int(gen.poisson(parent_intensity * dilated.volume))
    parents = dilated.sample_uniform(gen, n_parents)
    offspring = []
    for i in range(n_parents):
        k = int(gen.poisson(mean_points_per_cluster))
        if k == 0:
            continue
        # uniform in the ball: isotropic direction, radius ~ r * U^(1/3)
        vec = gen.standard_normal((k, 3))
        vec /= np.maximum(np.linalg.norm(vec, axis=1, keepdims=True), 1e-300)
        r = cluster_radius * gen.random(k) ** (1.0 / 3.0)
        offspring.append(parents[i] + vec * r[:, None])
    pts = np.concatenate(offspring, axis=0) if offspring else np.empty((0, 3))
    pts = pts[window.contains(pts)]
    return PointPattern(window, pts)


def sample_force_biased_packing(target_count: int, radius_distribution: SizeDist,
                                window: Box, rng: RandomStream,
                                max_iters: int = 2000,
                                overlap_tol: float = 1e-3) -> PointPattern:
    """Non-overlapping sphere centers by iterative pairwise repulsion.

    Radii start inflated and shrink toward their targets while overlapping
    pairs push each other apart; converged when no pair overlaps by more
    than ``overlap_tol`` of the smaller radius.  Refuses packing fractions
    above 0.6 and raises on non-convergence (no partial result).
    """
    if target_count < 0:
        raise ConfigError("target_count must be >= 0")
    gen = rng.generator()
    if target_count == 0:
        return PointPattern(window, np.empty((0, 3)))
    radii = radius_distribution.sample(gen, target_count)
    fraction = (4.0 / 3.0) * np.pi * float(np.sum(radii**3)) / window.volume
    if fraction > 0.6:
        raise ConfigError(f"packing fraction {fraction:.3f} > 0.6 is not achievable safely")
    centers = window.sample_uniform(gen, target_count)
    if target_count == 1:
        return PointPattern(window, centers)

    lo = np.asarray(window.lo)
    hi = np.asarray(window.hi)
    # shrinking schedule: start inflated (denser virtual packing spreads
    # points evenly), shrink to the target radii over the first 60% of iters
    inflate0 = min(1.4, (0.55 / max(fraction, 1e-9)) ** (1.0 / 3.0))
    inflate0 = max(inflate0, 1.0)
    ramp_iters = max(1, int(0.6 * max_iters))
    for it in range(max_iters):
        s = inflate0 + (1.0 - inflate0) * min(1.0, it / ramp_iters)
        work_r = radii * s
        delta = centers[:, None, :] - centers[None, :, :]
        dist = np.linalg.norm(delta, axis=2)
        np.fill_diagonal(dist, np.inf)
        sum_r = work_r[:, None] + work_r[None, :]
        overlap = sum_r - dist
        # convergence is judged at the TARGET radii
        true_overlap = (radii[:, None] + radii[None, :]) - dist
        tol_matrix = overlap_tol * np.minimum(radii[:, None], radii[None, :])
        if s <= 1.0 and bool((true_overlap <= tol_matrix).all()):
            return PointPattern(window, np.clip(centers, lo, hi))
        pairs = np.argwhere(np.triu(overlap > 0, k=1))
        if pairs.size == 0:
            continue
        shift = np.zeros_like(centers)
        for i, j in pairs:
            d = dist[i, j]
            direction = delta[i, j] / d if d > 1e-12 else gen.standard_normal(3)
            direction = direction / max(np.linalg.norm(direction), 1e-300)
            push = 0.55 * overlap[i, j]
            shift[i] += push * direction
            shift[j] -= push * direction
        centers = np.clip(centers + shift, lo, hi)
    raise GenerationError(
        f"force-biased packing did not converge in {max_iters} iterations "
        f"(n={target_count}, fraction={fraction:.3f})"
    )


def stretch_points(pattern: PointPattern, scale) -> PointPattern:
    """Multiply coordinates per axis; the window scales accordingly."""
    s = np.asarray(scale, dtype=np.float64)
    if s.shape != (3,) or np.any(s <= 0):
        raise ConfigError(f"scale must be 3 positive factors, got {scale}")
    win = Box(tuple(np.asarray(pattern.window.lo) * s),
              tuple(np.asarray(pattern.window.hi) * s))
    return PointPattern(win, pattern.points * s)


def write_pattern_csv(pattern: PointPattern, path: str) -> None:
    """x,y,z rows with the window recorded in a comment header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# window_lo={list(pattern.window.lo)} window_hi={list(pattern.window.hi)}\n")
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z"])
        for p in pattern.points:
            writer.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(p[2]))])
