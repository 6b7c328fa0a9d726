"""Patch-based principal-component compression of Stokes cubes.

Images are cut into non-overlapping P x P patches; each patch is
flattened over (row, col, channel, Stokes element) into a vector p and
modeled as ``p = c . b + mu`` with an orthonormal basis b, coefficients
c, and the training mean mu.  Keeping K basis vectors trades
reconstruction error against stored bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .image import StokesImage

__all__ = [
    "PcaCodebook",
    "PcaEncoding",
    "bpp",
    "extract_patches",
    "pca_decode",
    "pca_encode",
    "pca_fit",
    "pca_fit_image",
    "pca_rate_curve",
    "truncate_codebook",
    "variance_spectrum",
]


def extract_patches(img: StokesImage, patch_size: int, element: int | None = None) -> np.ndarray:
    """Non-overlapping patches as an (N, D) matrix, row-major grid order.

    D = P*P*C*4 for joint patches, or P*P*C when ``element`` selects a
    single Stokes component.  Remainder rows/columns that do not fill a
    whole patch are dropped.
    """
    p = int(patch_size)
    if p < 1:
        raise DimensionError("patch size must be >= 1")
    if p > min(img.height, img.width):
        raise DimensionError(f"patch size {p} exceeds image dims {img.height}x{img.width}")
    gh, gw = img.height // p, img.width // p
    data = img.data if element is None else img.data[..., element : element + 1]
    comp = data.shape[-1]
    cropped = data[: gh * p, : gw * p]
    patches = (
        cropped.reshape(gh, p, gw, p, img.channels, comp)
        .transpose(0, 2, 1, 3, 4, 5)
        .reshape(gh * gw, p * p * img.channels * comp)
    )
    return np.ascontiguousarray(patches)


@dataclass
class PcaCodebook:
    """Mean + orthonormal basis + per-basis standard deviations.

    ``sigma`` is sorted non-increasing (singular values / sqrt(N - 1));
    ``total_variance`` sums sigma^2 over the full spectrum of the fit, so
    variance proportions are meaningful even for truncated codebooks.
    Geometry fields are set when the codebook was fit from image patches.
    """

    mean: np.ndarray
    basis: np.ndarray  # (D, K), orthonormal columns
    sigma: np.ndarray  # (K,)
    total_variance: float
    patch_size: int | None = None
    channels: int | None = None
    components: int = 4
    element: int | None = None

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    @property
    def n_bases(self) -> int:
        return self.basis.shape[1]


def pca_fit(patches: np.ndarray, k: int, *, patch_size=None, channels=None,
            components=4, element=None) -> PcaCodebook:
    """Fit a K-basis codebook to an (N, D) patch matrix.

    The basis holds the top-K right singular directions of the centered
    matrix; each column's sign is fixed so its largest-magnitude entry is
    positive, making fits reproducible.
    """
    patches = np.asarray(patches, dtype=float)
    if patches.ndim != 2:
        raise DimensionError(f"patch matrix must be 2-D, got {patches.shape}")
    n, d = patches.shape
    if not 1 <= k <= min(n, d):
        raise DimensionError(f"need 1 <= k <= min(N, D) = {min(n, d)}, got {k}")
    mean = patches.mean(axis=0)
    centered = patches - mean
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:k].T.copy()
    for j in range(k):
        lead = np.argmax(np.abs(basis[:, j]))
        if basis[lead, j] < 0:
            basis[:, j] = -basis[:, j]
    denom = max(n - 1, 1)
    sigma = sv[:k] / np.sqrt(denom)
    total = float(np.sum(sv**2) / denom)
    return PcaCodebook(mean, basis, sigma, total, patch_size, channels, components, element)


def pca_fit_image(img: StokesImage, patch_size: int, k: int,
                  element: int | None = None) -> PcaCodebook:
    """Extract patches from an image and fit a codebook carrying geometry."""
    patches = extract_patches(img, patch_size, element)
    return pca_fit(
        patches,
        k,
        patch_size=patch_size,
        channels=img.channels,
        components=4 if element is None else 1,
        element=element,
    )


def truncate_codebook(codebook: PcaCodebook, k: int) -> PcaCodebook:
    """Keep only the first k basis vectors (variance bookkeeping intact)."""
    if not 1 <= k <= codebook.n_bases:
        raise DimensionError(f"need 1 <= k <= {codebook.n_bases}, got {k}")
    return PcaCodebook(
        codebook.mean,
        codebook.basis[:, :k],
        codebook.sigma[:k],
        codebook.total_variance,
        codebook.patch_size,
        codebook.channels,
        codebook.components,
        codebook.element,
    )


@dataclass
class PcaEncoding:
    """Per-patch coefficients plus the geometry to rebuild the image."""

    codebook: PcaCodebook
    coefficients: np.ndarray  # (N, K)
    height: int
    width: int
    channels: int
    patch_size: int
    grid_h: int
    grid_w: int
    element: int | None = None
    wavelengths: np.ndarray | None = None

    def coefficient_bits(self, bits_per_value: int = 32) -> int:
        return int(self.coefficients.size) * bits_per_value

    def codebook_bits(self, bits_per_value: int = 32) -> int:
        cb = self.codebook
        return (cb.basis.size + cb.mean.size) * bits_per_value

    def stored_bits(self, include_codebook: bool = False, bits_per_value: int = 32) -> int:
        bits = self.coefficient_bits(bits_per_value)
        if include_codebook:
            bits += self.codebook_bits(bits_per_value)
        return bits


def _infer_patch_size(codebook, img, element):
    comp = 4 if element is None else 1
    if codebook.patch_size is not None:
        p = codebook.patch_size
    else:
        sq = codebook.dimension / (img.channels * comp)
        p = int(round(np.sqrt(sq)))
    if p * p * img.channels * comp != codebook.dimension:
        raise DimensionError(
            f"codebook dimension {codebook.dimension} does not match a square patch of "
            f"{img.channels} channels x {comp} components"
        )
    return p


def pca_encode(img: StokesImage, codebook: PcaCodebook,
               element: int | None = None) -> PcaEncoding:
    """Project an image's patches onto the codebook: c = (p - mu) . b."""
    if codebook.element is not None and element is None:
        element = codebook.element
    p = _infer_patch_size(codebook, img, element)
    patches = extract_patches(img, p, element)
    coeffs = (patches - codebook.mean) @ codebook.basis
    return PcaEncoding(
        codebook,
        coeffs,
        img.height,
        img.width,
        img.channels,
        p,
        img.height // p,
        img.width // p,
        element,
        None if img.wavelengths is None else img.wavelengths.copy(),
    )


def pca_decode(enc: PcaEncoding):
    """Rebuild the image: p_hat = c . b^T + mu, patches back in grid order.

    Remainder pixels not covered by any patch are flagged invalid.
    Joint codebooks give a StokesImage; single-element codebooks give the
    reconstructed (H, W, C) component plane.
    """
    cb = enc.codebook
    comp = 4 if enc.element is None else 1
    patches = enc.coefficients @ cb.basis.T + cb.mean
    p = enc.patch_size
    block = patches.reshape(enc.grid_h, enc.grid_w, p, p, enc.channels, comp).transpose(
        0, 2, 1, 3, 4, 5
    )
    covered = block.reshape(enc.grid_h * p, enc.grid_w * p, enc.channels, comp)
    if enc.element is not None:
        plane = np.zeros((enc.height, enc.width, enc.channels))
        plane[: enc.grid_h * p, : enc.grid_w * p] = covered[..., 0]
        return plane
    data = np.zeros((enc.height, enc.width, enc.channels, 4))
    data[: enc.grid_h * p, : enc.grid_w * p] = covered
    mask = np.zeros((enc.height, enc.width, enc.channels), dtype=bool)
    mask[: enc.grid_h * p, : enc.grid_w * p] = True
    return StokesImage(data, enc.wavelengths, mask)


def variance_spectrum(codebook: PcaCodebook) -> np.ndarray:
    """Proportion of total variance captured by each retained basis."""
    if codebook.total_variance <= 0:
        return np.zeros_like(codebook.sigma)
    return codebook.sigma**2 / codebook.total_variance


def bpp(stored_bits: int, width: int, height: int) -> float:
    """Bits per spatial pixel."""
    if width * height <= 0:
        raise DimensionError("bpp needs a positive pixel count")
    return stored_bits / (width * height)


def pca_rate_curve(img: StokesImage, codebook: PcaCodebook, ks,
                   bits_per_value: int = 32):
    """Rate-distortion sweep over basis counts.

    Returns a Curve with columns (k, bpp of coefficients alone, bpp
    including basis + mean, decode mse over covered pixels).
    """
    from .io import Curve

    rows = []
    for k in sorted(int(k) for k in ks):
        enc = pca_encode(img, truncate_codebook(codebook, k))
        decoded = pca_decode(enc)
        covered = decoded.mask
        err = decoded.data[covered] - img.data[covered]
        mse = float(np.mean(err * err))
        rows.append(
            (
                k,
                bpp(enc.stored_bits(False, bits_per_value), img.width, img.height),
                bpp(enc.stored_bits(True, bits_per_value), img.width, img.height),
                mse,
            )
        )
    return Curve(columns=["k", "bpp_coefficients", "bpp_with_codebook", "mse"], rows=rows)
