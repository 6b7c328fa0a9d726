"""Per-pixel least-squares Stokes estimation and quality metrics.

Each spectral channel contributes an m x 4 system whose row i is the
analyzer (intensity) row of configuration i.  The per-pixel estimate is
the least-squares minimizer of ``sum_i (I_i - a_i . s)^2``, solved with
an orthogonal (QR) factorization computed once per channel and reused
across all pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.ndimage

from .camera import CaptureConfig, RawCapture, analyzer_row, demosaic, mosaic_split
from .errors import ConfigurationError, DimensionError, EmptySelectionError
from .image import StokesImage
from .stokes import DEFAULT_DOP_TOL, is_valid

__all__ = [
    "QualityReport",
    "SystemMatrix",
    "burst_average",
    "median_filter",
    "quality",
    "reconstruct_image",
    "solve_stokes",
    "solve_stokes_per_pixel",
    "system_matrix",
]

#: A frame pixel at or above this fraction of the saturation level is
#: treated as saturated; one at or below ``2 * black_level`` as underexposed.
SATURATION_FRACTION = 0.998
UNDEREXPOSURE_MULTIPLIER = 2.0


@dataclass
class SystemMatrix:
    """An m x 4 measurement system with conditioning metadata.

    ``rank`` and ``condition_number`` come from the singular values; the
    QR factors are cached so thousands of per-pixel solves share one
    factorization.
    """

    matrix: np.ndarray
    rank: int
    condition_number: float
    q: np.ndarray
    r: np.ndarray

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> "SystemMatrix":
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 4:
            raise DimensionError(f"system matrix must be (m, 4), got {rows.shape}")
        if rows.shape[0] < 4:
            raise ConfigurationError("at least 4 measurement configurations required")
        sv = np.linalg.svd(rows, compute_uv=False)
        tol = sv[0] * max(rows.shape) * np.finfo(float).eps
        rank = int(np.count_nonzero(sv > tol))
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        q, r = np.linalg.qr(rows)
        return cls(rows, rank, cond, q, r)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


def system_matrix(config: CaptureConfig, channel: int = 0) -> SystemMatrix:
    """Build and validate the measurement system of one channel.

    Raises
    ------
    ConfigurationError
        If fewer than 4 configurations are given or the system has rank
        below 4 (the diagnosis names the deficient rank).
    """
    configs = config.configs_for(channel)
    if len(configs) < 4:
        raise ConfigurationError("at least 4 measurement configurations required")
    cal = config.calibration_for(channel)
    rows = np.array([analyzer_row(c, cal) for c in configs]) * config.exposure
    system = SystemMatrix.from_rows(rows)
    if system.rank < 4:
        raise ConfigurationError(
            f"degenerate configuration: system rank {system.rank} < 4 "
            "(some Stokes components are unobservable)"
        )
    return system


def solve_stokes(system: SystemMatrix, intensities: np.ndarray):
    """Least-squares Stokes estimate(s) from measured intensities.

    ``intensities`` is (m,) for one pixel or (..., m) batched.  Returns
    ``(stokes, residual_norm)`` with matching leading shape.
    """
    if system.rank < 4:
        raise ConfigurationError("cannot solve a rank-deficient system")
    intensities = np.asarray(intensities, dtype=float)
    if intensities.shape[-1] != system.m:
        raise DimensionError(
            f"expected {system.m} intensities per pixel, got {intensities.shape[-1]}"
        )
    if not np.all(np.isfinite(intensities)):
        raise ValueError("intensities must be finite")
    rhs = intensities @ system.q  # (..., 4)
    lead = rhs.shape[:-1]
    sol = scipy.linalg.solve_triangular(system.r, rhs.reshape(-1, 4).T, lower=False)
    stokes = sol.T.reshape(*lead, 4)
    residual = np.linalg.norm(
        stokes @ system.matrix.T - intensities, axis=-1
    )
    return stokes, residual


def solve_stokes_per_pixel(matrices: np.ndarray, intensities: np.ndarray):
    """Batched solve for spatially varying systems (calibrated real data).

    ``matrices`` is (..., m, 4) and ``intensities`` (..., m); each pixel
    gets its own QR factorization.
    """
    matrices = np.asarray(matrices, dtype=float)
    intensities = np.asarray(intensities, dtype=float)
    if matrices.shape[:-2] != intensities.shape[:-1] or matrices.shape[-1] != 4:
        raise DimensionError("matrices (..., m, 4) and intensities (..., m) must align")
    q, r = np.linalg.qr(matrices)
    rhs = np.einsum("...mi,...m->...i", q, intensities)
    stokes = np.linalg.solve(r, rhs[..., None])[..., 0]
    residual = np.linalg.norm(
        np.einsum("...me,...e->...m", matrices, stokes) - intensities, axis=-1
    )
    return stokes, residual


def _bad_pixel_mask(frames, saturation_level, black_level):
    saturated = frames >= SATURATION_FRACTION * saturation_level
    underexposed = frames <= UNDEREXPOSURE_MULTIPLIER * black_level
    return saturated | underexposed


def reconstruct_image(
    raw: RawCapture,
    config: CaptureConfig | None = None,
    dop_tol: float = DEFAULT_DOP_TOL,
) -> StokesImage:
    """Invert a capture into a Stokes cube with a validity mask.

    A pixel/channel is valid when its estimate passes the degree of
    polarization bound and no contributing intensity sample was
    saturated or underexposed.
    """
    config = config or raw.config
    if raw.layout is not None:
        return _reconstruct_mosaic(raw, config, dop_tol)
    return _reconstruct_sequential(raw, config, dop_tol)


def _reconstruct_sequential(raw, config, dop_tol):
    if raw.tags is None:
        raise DimensionError("sequential capture requires (channel, config) tags")
    channels = sorted({c for c, _ in raw.tags})
    if channels != list(range(len(channels))):
        raise ConfigurationError("frame tags must cover channels 0..C-1")
    by_channel = {c: {} for c in channels}
    for k, (c, i) in enumerate(raw.tags):
        by_channel[c][i] = k

    h, w = raw.height, raw.width
    data = np.empty((h, w, len(channels), 4))
    mask = np.empty((h, w, len(channels)), dtype=bool)
    for c in channels:
        system = system_matrix(config, c)
        indices = [by_channel[c].get(i) for i in range(system.m)]
        if any(i is None for i in indices):
            raise DimensionError(f"channel {c} is missing frames")
        stack = raw.frames[indices]  # (m, H, W)
        stokes, _ = solve_stokes(system, np.moveaxis(stack, 0, -1))
        data[:, :, c, :] = stokes
        bad = _bad_pixel_mask(stack, raw.saturation_level, raw.black_level).any(axis=0)
        mask[:, :, c] = is_valid(stokes, dop_tol) & ~bad
    return StokesImage(data, raw.wavelengths, mask)


def _reconstruct_mosaic(raw, config, dop_tol):
    planes = demosaic(mosaic_split(raw.frames[0]))  # (H, W, 16)
    h, w = raw.height, raw.width
    data = np.empty((h, w, 3, 4))
    mask = np.empty((h, w, 3), dtype=bool)
    for color in range(3):
        system = system_matrix(config, color)
        segs = [k for k, _ in raw.layout.cells_for_color(color)]
        if len(segs) != system.m:
            raise DimensionError("layout and configuration disagree on row count")
        stack = planes[:, :, segs]  # (H, W, m)
        stokes, _ = solve_stokes(system, stack)
        data[:, :, color, :] = stokes
        bad = _bad_pixel_mask(stack, raw.saturation_level, raw.black_level).any(axis=-1)
        mask[:, :, color] = is_valid(stokes, dop_tol) & ~bad
    return StokesImage(data, None, mask)


def burst_average(frames) -> np.ndarray:
    """Pixelwise arithmetic mean of repeated captures."""
    frames = [np.asarray(f) for f in frames]
    if len(frames) == 0:
        raise DimensionError("burst average of an empty frame list")
    shape = frames[0].shape
    if any(f.shape != shape for f in frames):
        raise DimensionError("all frames must share the same dimensions")
    return np.mean(np.stack(frames), axis=0)


def median_filter(frame: np.ndarray, k: int) -> np.ndarray:
    """k x k median with edge replication; k must be odd."""
    if k < 1 or k % 2 == 0:
        raise ValueError("median window size must be odd and >= 1")
    frame = np.asarray(frame)
    if k == 1:
        return frame.copy()
    return scipy.ndimage.median_filter(frame, size=k, mode="nearest")


@dataclass
class QualityReport:
    """Reconstruction error metrics over jointly valid pixels.

    ``psnr = 10 log10(peak^2 / mse)`` with peak the maximum reference s0;
    identical images report ``inf``.
    """

    mse: float
    psnr: float
    element_psnr: np.ndarray
    channel_psnr: np.ndarray
    valid_fraction: float
    peak: float


def _psnr(peak, mse):
    if mse == 0.0:
        return np.inf
    return float(10.0 * np.log10(peak * peak / mse))


def quality(reference: StokesImage, test: StokesImage) -> QualityReport:
    """Compare a reconstruction against its reference."""
    if reference.data.shape != test.data.shape:
        raise DimensionError("reference and test cubes must have the same shape")
    joint = reference.mask & test.mask
    if not joint.any():
        raise EmptySelectionError("no jointly valid pixels to compare")
    diff = test.data - reference.data
    sq = diff * diff
    peak = float(reference.data[joint][:, 0].max())
    mse = float(np.mean(sq[joint]))
    element_mse = np.mean(sq[joint], axis=0)
    element_psnr = np.array([_psnr(peak, m) for m in element_mse])
    channel_psnr = np.empty(reference.channels)
    for c in range(reference.channels):
        sel = joint[:, :, c]
        channel_psnr[c] = _psnr(peak, float(np.mean(sq[:, :, c][sel]))) if sel.any() else np.nan
    return QualityReport(
        mse=mse,
        psnr=_psnr(peak, mse),
        element_psnr=element_psnr,
        channel_psnr=channel_psnr,
        valid_fraction=float(np.count_nonzero(joint)) / joint.size,
        peak=peak,
    )
