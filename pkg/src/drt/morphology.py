"""Pore-space morphology: components, distance fields, throat sizes.

Connectivity analysis takes a label volume plus the set of class ids
regarded as foreground; the distance and thickness transforms take a
binary mask volume (nonzero = foreground). Component ids are assigned in
order of each component's first voxel in flat x-fastest order, with 0
reserved for background. Distances are Euclidean and exact; local
thickness at a voxel is the diameter of the largest inscribed ball
covering it, in physical units.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.signal import find_peaks

from .errors import BadParams, IoFailure, NoPoreVoxels, TooFewPoints
from .volume import Volume

_STRUCTS = {
    6: ndimage.generate_binary_structure(3, 1),
    26: ndimage.generate_binary_structure(3, 3),
}


def _as_class_set(foreground) -> frozenset[int]:
    classes = {int(foreground)} if isinstance(foreground, (int, np.integer)) \
        else {int(c) for c in foreground}
    if not classes:
        raise BadParams("foreground class set must not be empty")
    if any(c < 0 for c in classes):
        raise BadParams(f"class ids must be >= 0, got {sorted(classes)}")
    return frozenset(classes)


def binary_mask(labels: Volume, foreground) -> Volume:
    """0/1 mask volume marking voxels whose label is in the foreground set."""
    classes = _as_class_set(foreground)
    mask = np.isin(labels.data, sorted(classes))
    return labels.with_data(mask.astype(np.uint8), value_kind="label",
                            element_encoding="u8")


@dataclass
class ComponentMap:
    """Connected-component labeling of a foreground mask.

    ``volume`` holds int32 component ids (0 = background, ids dense in
    1..n_components); ``sizes[i]`` is the voxel count of component i+1;
    ``face_touch`` row i holds, for component i+1, whether it reaches the
    low and high face along x, y, z as columns (x_lo, x_hi, y_lo, y_hi,
    z_lo, z_hi).
    """

    volume: Volume
    n_components: int
    sizes: np.ndarray
    face_touch: np.ndarray = field(repr=False)

    def percolates(self, axis: str) -> np.ndarray:
        """Per-component flag: touches both opposite faces along axis x|y|z."""
        col = {"x": 0, "y": 2, "z": 4}[axis]
        return self.face_touch[:, col] & self.face_touch[:, col + 1]

    def percolates_any_axis(self) -> np.ndarray:
        out = np.zeros(self.n_components, dtype=bool)
        for axis in ("x", "y", "z"):
            out |= self.percolates(axis)
        return out

    def largest_component(self) -> int:
        """Id of the most voxel-rich component (lowest id wins ties); 0 if none."""
        if self.n_components == 0:
            return 0
        return int(np.argmax(self.sizes)) + 1


def connected_components(labels: Volume, foreground=frozenset({0}),
                         connectivity: int = 26) -> ComponentMap:
    """Label foreground components under 6- or 26-connectivity.

    ``foreground`` is a class id or set of class ids. An empty foreground
    is not an error: the result has zero components.
    """
    if connectivity not in _STRUCTS:
        raise BadParams(f"connectivity must be 6 or 26, got {connectivity}")
    classes = _as_class_set(foreground)
    mask = np.isin(labels.data, sorted(classes))
    raw, n_raw = ndimage.label(mask, structure=_STRUCTS[connectivity])
    comp = np.asarray(raw, dtype=np.int32)
    if n_raw:
        # renumber so ids follow each component's first flat-order voxel
        flat = comp.ravel()
        first = np.full(n_raw + 1, flat.size, dtype=np.int64)
        nz = np.nonzero(flat)[0]
        np.minimum.at(first, flat[nz], nz)
        order = np.argsort(first[1:], kind="stable")
        remap = np.zeros(n_raw + 1, dtype=np.int32)
        remap[order + 1] = np.arange(1, n_raw + 1, dtype=np.int32)
        comp = remap[comp]
    sizes = np.bincount(comp.ravel(), minlength=n_raw + 1)[1:].astype(np.int64)
    face_touch = np.zeros((n_raw, 6), dtype=bool)
    if n_raw:
        faces = [comp[:, :, 0], comp[:, :, -1],   # x low, x high
                 comp[:, 0, :], comp[:, -1, :],   # y low, y high
                 comp[0, :, :], comp[-1, :, :]]   # z low, z high
        for col, face in enumerate(faces):
            ids = np.unique(face)
            ids = ids[ids > 0]
            face_touch[ids - 1, col] = True
    volume = labels.with_data(comp, value_kind="label", element_encoding="u16")
    return ComponentMap(volume=volume, n_components=int(n_raw), sizes=sizes,
                        face_touch=face_touch)


def euclidean_distance_transform(mask: Volume) -> Volume:
    """Exact Euclidean distance (voxel units) to the nearest background voxel.

    Foreground is any nonzero value. Background voxels map to 0; when no
    background voxel exists every distance is the +inf sentinel.
    """
    fg = mask.data != 0
    out = np.zeros(fg.shape, dtype=np.float64)
    if fg.all():
        out[:] = np.inf
    elif fg.any():
        out = ndimage.distance_transform_edt(fg).astype(np.float64)
    return mask.with_data(out, value_kind="distance", element_encoding="f32")


def local_thickness(mask: Volume, voxel_size_um: float | None = None) -> Volume:
    """Largest-inscribed-ball diameter covering each pore voxel, in microns.

    thickness(v) = 2 * voxel_size * max{ EDT(c) : |c - v| <= EDT(c) } over
    foreground voxels c, and 0 on background. Computed by painting balls
    in descending radius order with squared-integer coverage tests;
    centers whose ball is contained in a 26-neighbor's ball are skipped.
    The voxel size defaults to the mask header's.
    """
    fg = mask.data != 0
    vs = mask.header.voxel_size_um if voxel_size_um is None else float(voxel_size_um)
    if vs <= 0:
        raise BadParams(f"voxel size must be positive, got {vs}")
    out = np.zeros(fg.shape, dtype=np.float64)
    if not fg.any():
        return mask.with_data(out, value_kind="throat_size", element_encoding="f32")
    if fg.all():
        out[:] = np.inf
        return mask.with_data(out, value_kind="throat_size", element_encoding="f32")

    edt = ndimage.distance_transform_edt(fg)
    r2 = np.rint(edt * edt).astype(np.int64)  # exact on an integer grid
    nz, ny, nx = fg.shape
    flat_r2 = r2.ravel()
    centers = np.nonzero(flat_r2 > 0)[0]
    centers = centers[np.argsort(-flat_r2[centers], kind="stable")]

    neighbor_offsets = [
        (dz, dy, dx, math.sqrt(dx * dx + dy * dy + dz * dz))
        for dz in (-1, 0, 1) for dy in (-1, 0, 1) for dx in (-1, 0, 1)
        if (dz, dy, dx) != (0, 0, 0)
    ]
    th2 = np.zeros(fg.shape, dtype=np.int64)  # squared covering radius
    ball_cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for flat in centers:
        z, rem = divmod(int(flat), ny * nx)
        y, x = divmod(rem, nx)
        r2c = int(r2[z, y, x])
        rc = math.sqrt(r2c)
        dominated = False
        for dz, dy, dx, dist in neighbor_offsets:
            zn, yn, xn = z + dz, y + dy, x + dx
            if 0 <= zn < nz and 0 <= yn < ny and 0 <= xn < nx:
                rn2 = r2[zn, yn, xn]
                if rn2 > r2c and math.sqrt(rn2) >= rc + dist:
                    dominated = True
                    break
        if dominated:
            continue
        r = math.isqrt(r2c)
        if r2c not in ball_cache:
            span = np.arange(-r, r + 1, dtype=np.int64)
            bz, by, bx = np.meshgrid(span, span, span, indexing="ij")
            inside = bz * bz + by * by + bx * bx <= r2c
            ball_cache[r2c] = (bz[inside], by[inside], bx[inside])
        bz, by, bx = ball_cache[r2c]
        pz, py, px = bz + z, by + y, bx + x
        keep = ((pz >= 0) & (pz < nz) & (py >= 0) & (py < ny)
                & (px >= 0) & (px < nx))
        pz, py, px = pz[keep], py[keep], px[keep]
        write = fg[pz, py, px] & (th2[pz, py, px] == 0)
        th2[pz[write], py[write], px[write]] = r2c

    out = 2.0 * vs * np.sqrt(th2.astype(np.float64))
    return mask.with_data(out, value_kind="throat_size", element_encoding="f32")


@dataclass
class PoreThroatDistribution:
    """Log-binned histogram of pore-throat sizes with band fractions.

    Band fractions come from the raw values: f_micro is the fraction below
    t_micro_um, f_macro the fraction above t_macro_um, f_meso the rest.
    Peaks are histogram modes with prominence at least 5% of total count,
    reported at the geometric center of their bin.
    """

    bin_edges_um: np.ndarray
    counts: np.ndarray
    n_values: int
    f_micro: float
    f_meso: float
    f_macro: float
    t_micro_um: float
    t_macro_um: float
    peaks_um: list[float]

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.f_micro, self.f_meso, self.f_macro)

    def to_json_dict(self) -> dict:
        return {
            "bin_edges_um": [float(e) for e in self.bin_edges_um],
            "counts": [int(c) for c in self.counts],
            "n_values": self.n_values,
            "f_micro": self.f_micro,
            "f_meso": self.f_meso,
            "f_macro": self.f_macro,
            "cutoffs_um": [self.t_micro_um, self.t_macro_um],
            "peaks_um": self.peaks_um,
        }

    def save_json(self, path) -> None:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(json.dumps(self.to_json_dict(), sort_keys=True, indent=2))
                fh.write("\n")
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc

    def save_csv(self, path) -> None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["bin_lo_um", "bin_hi_um", "count"])
                for lo, hi, c in zip(self.bin_edges_um, self.bin_edges_um[1:],
                                     self.counts):
                    writer.writerow([f"{lo:.6g}", f"{hi:.6g}", int(c)])
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc


def throat_distribution(thickness: Volume,
                        cutoffs: tuple[float, float] = (10.0, 100.0),
                        n_bins: int = 32) -> PoreThroatDistribution:
    """Histogram positive local-thickness values into log-spaced bins."""
    t_micro_um, t_macro_um = (float(c) for c in cutoffs)
    if n_bins < 1:
        raise BadParams(f"n_bins must be >= 1, got {n_bins}")
    if not 0 < t_micro_um < t_macro_um:
        raise BadParams(
            f"need 0 < t_micro < t_macro, got {t_micro_um}, {t_macro_um}")
    values = np.asarray(thickness.data, dtype=np.float64).ravel()
    values = values[np.isfinite(values) & (values > 0)]
    if values.size == 0:
        raise NoPoreVoxels("no positive finite thickness values to bin")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo / 1.01, hi * 1.01
    edges = np.geomspace(lo, hi, n_bins + 1)
    edges[0], edges[-1] = lo, hi
    counts, _ = np.histogram(values, bins=edges)

    f_micro = float(np.mean(values < t_micro_um))
    f_macro = float(np.mean(values > t_macro_um))
    f_meso = 1.0 - f_micro - f_macro

    padded = np.concatenate(([0.0], counts.astype(np.float64), [0.0]))
    peak_idx, _ = find_peaks(padded, prominence=0.05 * values.size)
    centers = np.sqrt(edges[:-1] * edges[1:])
    peaks = [float(centers[i - 1]) for i in peak_idx]
    return PoreThroatDistribution(
        bin_edges_um=edges, counts=counts, n_values=int(values.size),
        f_micro=f_micro, f_meso=f_meso, f_macro=f_macro,
        t_micro_um=t_micro_um, t_macro_um=t_macro_um, peaks_um=peaks)


def _pava_nondecreasing(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted least-squares fit of a non-decreasing sequence to y."""
    blocks: list[list[float]] = []  # [weighted sum, weight, run length]
    for yi, wi in zip(y, w):
        blocks.append([yi * wi, wi, 1])
        while (len(blocks) > 1
               and blocks[-2][0] * blocks[-1][1] > blocks[-1][0] * blocks[-2][1]):
            swy, sw, cnt = blocks.pop()
            blocks[-1][0] += swy
            blocks[-1][1] += sw
            blocks[-1][2] += cnt
    out = np.empty(len(y), dtype=np.float64)
    pos = 0
    for swy, sw, cnt in blocks:
        out[pos:pos + cnt] = swy / sw
        pos += cnt
    return out


@dataclass(frozen=True)
class IntensityThroatCalibration:
    """Monotone piecewise-linear map from image intensity to throat size."""

    knots_intensity: tuple[float, ...]
    knots_throat_um: tuple[float, ...]

    def __call__(self, intensity) -> np.ndarray:
        x = np.asarray(intensity, dtype=np.float64)
        # np.interp clamps to the first/last knot outside the fitted range
        return np.interp(x, self.knots_intensity, self.knots_throat_um)

    def to_json_dict(self) -> dict:
        return {
            "knots_intensity": list(self.knots_intensity),
            "knots_throat_um": list(self.knots_throat_um),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "IntensityThroatCalibration":
        return cls(knots_intensity=tuple(float(v) for v in d["knots_intensity"]),
                   knots_throat_um=tuple(float(v) for v in d["knots_throat_um"]))


def fit_intensity_calibration(pairs) -> IntensityThroatCalibration:
    """Fit the monotone intensity-to-throat map by isotonic regression.

    ``pairs`` is a sequence of (intensity, throat_um) control points.
    Repeated intensities are merged to their mean throat before the
    pool-adjacent-violators fit. Needs at least two distinct intensities.
    """
    pts = np.asarray(list(pairs), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise BadParams(f"pairs must be (intensity, throat_um) tuples, "
                        f"got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise BadParams("calibration points must be finite")
    x, y = pts[:, 0], pts[:, 1]
    xs, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    if xs.size < 2:
        raise TooFewPoints(
            f"need at least 2 distinct intensities, got {xs.size}")
    sums = np.zeros(xs.size, dtype=np.float64)
    np.add.at(sums, inverse, y)
    means = sums / counts
    fitted = _pava_nondecreasing(means, counts.astype(np.float64))
    return IntensityThroatCalibration(
        knots_intensity=tuple(float(v) for v in xs),
        knots_throat_um=tuple(float(v) for v in fitted))


def apply_calibration(cal: IntensityThroatCalibration, volume: Volume) -> Volume:
    """Voxelwise intensity-to-throat-size mapping of a grayscale volume."""
    mapped = cal(np.asarray(volume.data, dtype=np.float64))
    return volume.with_data(mapped, value_kind="throat_size",
                            element_encoding="f32")
