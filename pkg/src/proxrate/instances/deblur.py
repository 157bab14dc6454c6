"""Synthetic image deblurring instances with a matrix-free Gaussian blur."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.signal import convolve2d, correlate2d
from scipy.sparse.linalg import LinearOperator

from ..exceptions import DimensionError, ParameterError
from ..problem import CompositeProblem, L1Norm, LeastSquares
from ..rng import CounterStream
from .lipschitz import lipschitz_estimate

LIPSCHITZ_TOL = 1e-10


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 2-D Gaussian truncated at offsets ``|i| <= 4 sigma``.

    Below ``sigma = 0.25`` the truncation leaves only the center tap and the
    kernel is the identity.
    """
    if not sigma > 0:
        raise ParameterError(f"kernel_sigma must be positive, got {sigma}")
    radius = int(math.floor(4.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (t / sigma) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def _fold_symmetric(padded: np.ndarray, radius: int, axis: int) -> np.ndarray:
    """Adjoint of ``np.pad(..., mode="symmetric")`` along one axis."""
    a = np.moveaxis(padded, axis, 0)
    n = a.shape[0] - 2 * radius
    out = a[radius:radius + n].copy()
    if radius:
        out[:radius] += a[:radius][::-1]
        out[n - radius:] += a[radius + n:][::-1]
    return np.moveaxis(out, 0, axis)


class ConvolutionOperator(LinearOperator):
    """2-D correlation with ``kernel`` under reflexive (half-sample symmetric) boundary.

    Acts on images flattened in row-major order.  With a symmetric kernel the
    operator is self-adjoint; ``rmatvec`` is nevertheless the explicit
    transpose so it stays correct for any kernel.
    """

    def __init__(self, kernel, image_shape):
        kernel = np.array(kernel, dtype=np.float64)
        if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape != kernel.shape[::-1]:
            raise DimensionError(f"kernel must be square with odd side, got {kernel.shape}")
        h, w = (int(v) for v in image_shape)
        self.radius = kernel.shape[0] // 2
        if self.radius > min(h, w):
            raise DimensionError(f"kernel radius {self.radius} exceeds image shape {(h, w)}")
        kernel.setflags(write=False)
        self.kernel = kernel
        self.image_shape = (h, w)
        super().__init__(dtype=np.float64, shape=(h * w, h * w))

    def _matvec(self, x):
        h, w = self.image_shape
        r = self.radius
        p = np.pad(np.reshape(x, (h, w)), r, mode="symmetric")
        return correlate2d(p, self.kernel, mode="valid").reshape(-1)

    def _rmatvec(self, y):
        h, w = self.image_shape
        r = self.radius
        q = convolve2d(np.reshape(y, (h, w)), self.kernel, mode="full")
        return _fold_symmetric(_fold_symmetric(q, r, 0), r, 1).reshape(-1)

    def to_dense(self) -> np.ndarray:
        n = self.shape[1]
        return np.column_stack([self._matvec(e) for e in np.eye(n)])


@dataclass(frozen=True, eq=False)
class DeblurInstance:
    kernel: np.ndarray
    observed: np.ndarray
    lam: float
    image_shape: tuple
    L: float
    clean: Optional[np.ndarray] = None

    @cached_property
    def blur(self) -> ConvolutionOperator:
        return ConvolutionOperator(self.kernel, self.image_shape)

    @cached_property
    def problem(self) -> CompositeProblem:
        return CompositeProblem(LeastSquares(self.blur, self.observed, self.L),
                                L1Norm(self.lam), self.observed.size)


def gen_deblur(clean, kernel_sigma: float, noise_sigma: float, lam: float,
               seed: int) -> DeblurInstance:
    """Blur ``clean`` with a Gaussian kernel and add seeded Gaussian noise."""
    clean = np.array(clean, dtype=np.float64)
    if clean.ndim != 2:
        raise DimensionError(f"clean image must be 2-D, got shape {clean.shape}")
    if clean.size and (clean.min() < 0 or clean.max() > 1):
        raise ParameterError("clean image values must lie in [0, 1]")
    if not noise_sigma >= 0:
        raise ParameterError(f"noise_sigma must be nonnegative, got {noise_sigma}")
    kernel = gaussian_kernel(kernel_sigma)
    op = ConvolutionOperator(kernel, clean.shape)
    observed = op.matvec(clean.reshape(-1)) + noise_sigma * CounterStream(seed).normal(clean.size)
    L = lipschitz_estimate(op, clean.size, tol=LIPSCHITZ_TOL, seed=seed)
    observed.setflags(write=False)
    clean.setflags(write=False)
    return DeblurInstance(kernel=kernel, observed=observed, lam=float(lam),
                          image_shape=clean.shape, L=L, clean=clean)


def synthetic_image(size: int = 64) -> np.ndarray:
    """Piecewise-constant test image in [0, 1]: rectangles, a disk and a bar."""
    n = int(size)
    img = np.full((n, n), 0.1)
    yy, xx = np.mgrid[0:n, 0:n] / n
    img[(yy > 0.15) & (yy < 0.45) & (xx > 0.1) & (xx < 0.5)] = 0.8
    img[(yy - 0.65) ** 2 + (xx - 0.65) ** 2 < 0.2 ** 2] = 0.5
    img[(yy > 0.55) & (yy < 0.9) & (xx > 0.15) & (xx < 0.25)] = 1.0
    img[(yy > 0.2) & (yy < 0.3) & (xx > 0.6) & (xx < 0.9)] = 0.0
    return img
