"""Per-voxel feature extraction and histogram-mixture thresholding.

The feature bank is a Gaussian scale space: the raw volume, smoothings at
a ladder of scales, and difference-of-Gaussian (DoG) band-pass channels
between consecutive scales. Smoothing is a separable 3-pass convolution
with a sampled Gaussian kernel truncated at radius ceil(3*sigma) and
renormalized to sum 1; filter math runs in float64 and results are stored
as float32.

``iroga_threshold`` segments a grayscale volume by fitting a 1-D Gaussian
mixture to its 256-bin intensity histogram with EM and cutting at the
intersections of adjacent weighted component densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .errors import BadSigmaOrder, DegenerateHistogram, NoConvergence, SigmaTooLarge
from .rng import SplitMix64
from .volume import Volume

_BOUNDARY_TO_SCIPY = {"mirror": "reflect", "clamp": "nearest"}


def _format_sigma(sigma: float) -> str:
    if float(sigma).is_integer():
        return str(int(sigma))
    return repr(float(sigma))


@dataclass(frozen=True)
class FeatureBankConfig:
    """Scales and switches defining the per-voxel feature vector.

    Features are ordered [raw?, G(s1)..G(sk), DoG(s1,s2)..DoG(s{k-1},sk)],
    so the count is (1 if include_raw) + k + (k - 1).
    """

    sigmas_vox: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)
    include_raw: bool = True
    boundary_mode: str = "mirror"

    def __post_init__(self):
        sigmas = tuple(float(s) for s in self.sigmas_vox)
        if not sigmas:
            raise ValueError("sigmas_vox must not be empty")
        if any(s <= 0 for s in sigmas):
            raise ValueError(f"sigmas must be positive, got {sigmas}")
        if any(b >= a for a, b in zip(sigmas[1:], sigmas)):
            raise ValueError(f"sigmas must be strictly ascending, got {sigmas}")
        if self.boundary_mode not in _BOUNDARY_TO_SCIPY:
            raise ValueError(f"boundary_mode must be one of {tuple(_BOUNDARY_TO_SCIPY)}")
        object.__setattr__(self, "sigmas_vox", sigmas)

    @property
    def feature_count(self) -> int:
        k = len(self.sigmas_vox)
        return (1 if self.include_raw else 0) + k + (k - 1)

    def feature_names(self) -> list[str]:
        names = ["raw"] if self.include_raw else []
        names += [f"gauss_{_format_sigma(s)}" for s in self.sigmas_vox]
        names += [
            f"dog_{_format_sigma(a)}_{_format_sigma(b)}"
            for a, b in zip(self.sigmas_vox, self.sigmas_vox[1:])
        ]
        return names

    def to_json_dict(self) -> dict:
        return {
            "sigmas_vox": list(self.sigmas_vox),
            "include_raw": self.include_raw,
            "boundary_mode": self.boundary_mode,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FeatureBankConfig":
        return cls(
            sigmas_vox=tuple(d["sigmas_vox"]),
            include_raw=bool(d["include_raw"]),
            boundary_mode=d["boundary_mode"],
        )


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Sampled Gaussian truncated at radius ceil(3*sigma), normalized to sum 1."""
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _smooth_array(data: np.ndarray, sigma: float, boundary_mode: str) -> np.ndarray:
    kernel = gaussian_kernel_1d(sigma)
    mode = _BOUNDARY_TO_SCIPY[boundary_mode]
    out = np.asarray(data, dtype=np.float64)
    for axis in range(3):
        out = correlate1d(out, kernel, axis=axis, mode=mode)
    return out


def gaussian_smooth(volume: Volume, sigma_vox: float, boundary_mode: str = "mirror") -> Volume:
    """Separable Gaussian smoothing; output dims equal input dims."""
    if sigma_vox <= 0:
        raise SigmaTooLarge(f"sigma must be positive, got {sigma_vox}")
    if sigma_vox > min(volume.dims) / 2:
        raise SigmaTooLarge(
            f"sigma {sigma_vox} exceeds min(dims)/2 = {min(volume.dims) / 2}")
    if boundary_mode not in _BOUNDARY_TO_SCIPY:
        raise ValueError(f"boundary_mode must be one of {tuple(_BOUNDARY_TO_SCIPY)}")
    smoothed = _smooth_array(volume.data, sigma_vox, boundary_mode)
    return volume.with_data(smoothed.astype(np.float32), value_kind="grayscale",
                            element_encoding="f32")


def difference_of_gaussian(volume: Volume, sigma_lo: float, sigma_hi: float,
                           boundary_mode: str = "mirror") -> Volume:
    """Band-pass channel: smooth(sigma_lo) minus smooth(sigma_hi), voxelwise."""
    if not sigma_lo < sigma_hi:
        raise BadSigmaOrder(f"need sigma_lo < sigma_hi, got {sigma_lo} >= {sigma_hi}")
    lo = gaussian_smooth(volume, sigma_lo, boundary_mode)
    hi = gaussian_smooth(volume, sigma_hi, boundary_mode)
    return volume.with_data(lo.data - hi.data, value_kind="grayscale",
                            element_encoding="f32")


@dataclass
class FeatureStack:
    """Per-voxel feature vectors for one volume; data shaped (nz, ny, nx, F)."""

    dims: tuple[int, int, int]
    names: list[str]
    data: np.ndarray = field(repr=False)

    @property
    def feature_count(self) -> int:
        return self.data.shape[-1]

    def feature(self, name: str) -> np.ndarray:
        return self.data[..., self.names.index(name)]

    def sample_at(self, coords_xyz: np.ndarray) -> np.ndarray:
        """Feature matrix (N, F) at integer voxel coordinates (N, 3) as x,y,z."""
        coords = np.asarray(coords_xyz, dtype=np.int64)
        return self.data[coords[:, 2], coords[:, 1], coords[:, 0], :]

    def as_matrix(self) -> np.ndarray:
        """All voxels as an (n_voxels, F) matrix in flat (x-fastest) order."""
        return self.data.reshape(-1, self.data.shape[-1])


def build_feature_stack(volume: Volume, cfg: FeatureBankConfig) -> FeatureStack:
    """Raw, Gaussian, and consecutive-pair DoG channels in declared order."""
    channels: list[np.ndarray] = []
    if cfg.include_raw:
        channels.append(np.asarray(volume.data, dtype=np.float32))
    smoothed = [gaussian_smooth(volume, s, cfg.boundary_mode) for s in cfg.sigmas_vox]
    channels += [s.data for s in smoothed]
    channels += [lo.data - hi.data for lo, hi in zip(smoothed, smoothed[1:])]
    data = np.stack(channels, axis=-1)
    return FeatureStack(dims=volume.dims, names=cfg.feature_names(), data=data)


def _kmeanspp_init(centers: np.ndarray, weights: np.ndarray, k: int,
                   rng: SplitMix64) -> np.ndarray:
    """k-means++ seeding over weighted histogram bin centers."""
    prob = weights / weights.sum()
    means = [_weighted_choice(centers, prob, rng)]
    for _ in range(k - 1):
        d2 = np.min([(centers - m) ** 2 for m in means], axis=0)
        score = prob * d2
        total = score.sum()
        if total <= 0:
            # all remaining mass sits on already-chosen centers
            remaining = np.setdiff1d(centers[weights > 0], np.array(means))
            means.append(remaining[0] if remaining.size else means[-1])
            continue
        means.append(_weighted_choice(centers, score / total, rng))
    return np.sort(np.asarray(means, dtype=np.float64))


def _weighted_choice(values: np.ndarray, prob: np.ndarray, rng: SplitMix64) -> float:
    u = rng.uniform()
    idx = int(np.searchsorted(np.cumsum(prob), u, side="right"))
    return float(values[min(idx, len(values) - 1)])


def fit_histogram_gmm(values: np.ndarray, n_components: int, *, n_bins: int = 256,
                      seed: int = 0, max_iter: int = 200, tol: float = 1e-8):
    """EM fit of a 1-D Gaussian mixture to a value histogram.

    Returns (weights, means, stds) sorted by ascending mean. Raises
    DegenerateHistogram when there are fewer distinct values than
    components and NoConvergence when EM does not reach the mean
    log-likelihood tolerance within max_iter iterations.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    distinct = np.unique(values)
    if distinct.size < n_components:
        raise DegenerateHistogram(
            f"{distinct.size} distinct values cannot support {n_components} components")

    lo, hi = float(distinct[0]), float(distinct[-1])
    counts, edges = np.histogram(values, bins=n_bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    weights_b = counts.astype(np.float64)
    bin_width = edges[1] - edges[0]
    var_floor = max(bin_width * bin_width / 12.0, 1e-12)

    rng = SplitMix64(seed)
    means = _kmeanspp_init(centers, weights_b, n_components, rng)
    # hard-assignment start for weights and variances
    assign = np.argmin(np.abs(centers[:, None] - means[None, :]), axis=1)
    n_total = weights_b.sum()
    pis = np.empty(n_components)
    variances = np.empty(n_components)
    for j in range(n_components):
        w = weights_b[assign == j]
        c = centers[assign == j]
        mass = w.sum()
        pis[j] = max(mass / n_total, 1e-12)
        if mass > 0:
            mu = (w * c).sum() / mass
            variances[j] = max(((c - mu) ** 2 * w).sum() / mass, var_floor)
            means[j] = mu
        else:
            variances[j] = var_floor
    pis = pis / pis.sum()

    prev_ll = -np.inf
    converged = False
    for _ in range(max_iter):
        # E step on binned data
        diff = centers[:, None] - means[None, :]
        log_pdf = (-0.5 * diff * diff / variances[None, :]
                   - 0.5 * np.log(2.0 * np.pi * variances[None, :])
                   + np.log(pis[None, :]))
        log_max = log_pdf.max(axis=1, keepdims=True)
        dens = np.exp(log_pdf - log_max)
        norm = dens.sum(axis=1, keepdims=True)
        resp = dens / norm
        ll = float((weights_b * (np.log(norm[:, 0]) + log_max[:, 0])).sum() / n_total)

        # M step
        mass = (weights_b[:, None] * resp).sum(axis=0)
        mass = np.maximum(mass, 1e-12)
        means = ((weights_b[:, None] * resp * centers[:, None]).sum(axis=0)) / mass
        variances = ((weights_b[:, None] * resp * (centers[:, None] - means[None, :]) ** 2)
                     .sum(axis=0)) / mass
        variances = np.maximum(variances, var_floor)
        pis = mass / mass.sum()

        if abs(ll - prev_ll) < tol:
            converged = True
            break
        prev_ll = ll
    if not converged:
        raise NoConvergence(f"EM did not converge within {max_iter} iterations")

    order = np.argsort(means)
    return pis[order], means[order], np.sqrt(variances[order])


def _gaussian_intersection(pi1, mu1, s1, pi2, mu2, s2) -> float:
    """Abscissa where two weighted Gaussian densities cross, between the means."""
    if mu1 > mu2:
        pi1, mu1, s1, pi2, mu2, s2 = pi2, mu2, s2, pi1, mu1, s1
    if mu1 == mu2:
        return float(mu1)
    a = 1.0 / (2.0 * s2 * s2) - 1.0 / (2.0 * s1 * s1)
    b = mu1 / (s1 * s1) - mu2 / (s2 * s2)
    c = (mu2 * mu2 / (2.0 * s2 * s2) - mu1 * mu1 / (2.0 * s1 * s1)
         + math.log((pi1 * s2) / (pi2 * s1)))
    midpoint = 0.5 * (mu1 + mu2)
    if abs(a) < 1e-300:
        if b == 0:
            return midpoint
        root = -c / b
        return root if mu1 < root < mu2 else midpoint
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return midpoint
    sq = math.sqrt(disc)
    for root in ((-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a)):
        if mu1 < root < mu2:
            return float(root)
    return midpoint


def iroga_threshold(volume: Volume, n_components: int = 2, *,
                    seed: int = 0) -> tuple[Volume, list[float]]:
    """Histogram Gaussian-mixture thresholding of a grayscale volume.

    Fits an ``n_components`` mixture to the 256-bin intensity histogram and
    thresholds at intersections of adjacent weighted component densities.
    Returns a label volume (classes ordered by ascending mean intensity)
    and the threshold list.
    """
    if n_components not in (2, 3):
        raise ValueError(f"n_components must be 2 or 3, got {n_components}")
    pis, means, stds = fit_histogram_gmm(volume.flat, n_components, seed=seed)
    thresholds = [
        _gaussian_intersection(pis[j], means[j], stds[j],
                               pis[j + 1], means[j + 1], stds[j + 1])
        for j in range(n_components - 1)
    ]
    labels = np.digitize(np.asarray(volume.data, dtype=np.float64), thresholds)
    label_volume = volume.with_data(labels.astype(np.uint8), value_kind="label",
                                    element_encoding="u8")
    return label_volume, [float(t) for t in thresholds]
