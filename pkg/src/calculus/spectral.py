from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.linalg import orth


class SpectralBasis:
    """
    Fourier machinery of one (n, N) grid: spectral derivatives, the band projector onto
    Nyquist-free trigonometric polynomials and 3/2-rule dealiased products.
    Instances are shared through spectral_basis() and hold read-only arrays only.
    """

    def __init__(self, n: int, N: int):
        self.n = n
        self.N = N
        self.M = 3 * N // 2
        self.axes = tuple(range(-n, 0))

        wavenumbers = np.fft.fftfreq(N, d=1.0 / N)
        in_band = np.abs(wavenumbers) < N // 2
        grids = np.meshgrid(*([wavenumbers] * n), indexing="ij")
        self.wavevectors = np.stack(grids)
        self.band_mask = np.logical_and.reduce(np.meshgrid(*([in_band] * n), indexing="ij"))

        self.derivative_symbols = np.stack([1j * grids[axis] * self.band_mask for axis in range(n)])
        squared = np.sum(self.wavevectors ** 2, axis=0)
        self.laplacian_symbol = squared * self.band_mask
        with np.errstate(divide="ignore"):
            inverse = np.where(self.band_mask & (squared > 0), 1.0 / np.where(squared > 0, squared, 1), 0.0)
        self.inverse_laplacian_symbol = inverse

        kept = np.arange(-(N // 2 - 1), N // 2)
        self._source_index = np.ix_(*([kept % N] * n))
        self._padded_index = np.ix_(*([kept % self.M] * n))

        for array in (self.wavevectors, self.band_mask, self.derivative_symbols,
                      self.laplacian_symbol, self.inverse_laplacian_symbol):
            array.flags.writeable = False

    def forward(self, values: np.ndarray) -> np.ndarray:
        return sfft.fftn(values, axes=self.axes, norm="forward")

    def backward(self, coefficients: np.ndarray) -> np.ndarray:
        return sfft.ifftn(coefficients, axes=self.axes, norm="forward").real

    def derivative(self, values: np.ndarray, axis: int) -> np.ndarray:
        return self.backward(self.derivative_symbols[axis] * self.forward(values))

    def band_limit(self, values: np.ndarray) -> np.ndarray:
        return self.backward(self.band_mask * self.forward(values))

    def apply_symbol(self, values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        return self.backward(symbol * self.forward(values))

    def _pad(self, values: np.ndarray) -> np.ndarray:
        coefficients = self.forward(values)
        padded = np.zeros(values.shape[:-self.n] + (self.M,) * self.n, dtype=complex)
        padded[(Ellipsis,) + self._padded_index] = coefficients[(Ellipsis,) + self._source_index]
        return sfft.ifftn(padded, axes=self.axes, norm="forward").real

    def product(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Dealiased pointwise product, truncated back to the band."""
        padded = self._pad(a) * self._pad(b)
        coefficients = sfft.fftn(padded, axes=self.axes, norm="forward")
        truncated = np.zeros(padded.shape[:-self.n] + (self.N,) * self.n, dtype=complex)
        truncated[(Ellipsis,) + self._source_index] = coefficients[(Ellipsis,) + self._padded_index]
        return self.backward(truncated)


@lru_cache(maxsize=None)
def spectral_basis(n: int, N: int) -> SpectralBasis:
    return SpectralBasis(n, N)


@lru_cache(maxsize=None)
def band_basis(n: int, N: int) -> np.ndarray:
    """Orthonormal columns spanning the band-limited nodal functions, shape (N^n, (N-1)^n)."""
    basis = spectral_basis(n, N)
    identity = np.eye(N ** n).reshape((N ** n,) + (N,) * n)
    projector = basis.band_limit(identity).reshape(N ** n, N ** n)
    columns = orth(0.5 * (projector + projector.T))
    columns.flags.writeable = False
    return columns
