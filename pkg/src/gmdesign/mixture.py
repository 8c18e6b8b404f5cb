"""Gaussian mixture data model: construction, sampling, densities, moments.

All densities are handled in the log domain.  Mixture log-densities are
combined with the log-sum-exp trick so that component log-densities
hundreds of nats apart (routine at the signal scales this package targets)
never underflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cholesky, solve_triangular

__all__ = [
    "GaussianComponent",
    "GaussianMixture",
    "RandomStream",
    "push_forward",
]

_LOG_2PI = np.log(2.0 * np.pi)

# Construction tolerances.  Weight sums further than _WEIGHT_TOL from one are
# rejected; anything closer is silently renormalized (text configs round).
_WEIGHT_TOL = 1e-9
_SYMMETRY_RTOL = 1e-12


def _as_spd_cholesky(cov: NDArray, what: str) -> NDArray:
    """Validate symmetry and positive-definiteness, return the lower factor."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"{what}: covariance must be a square matrix, got shape {cov.shape}")
    scale = max(1.0, float(np.abs(cov).max()))
    if np.abs(cov - cov.T).max() > _SYMMETRY_RTOL * scale:
        raise ValueError(f"{what}: covariance is not symmetric")
    try:
        return cholesky(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{what}: covariance is not positive definite") from exc


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted multivariate normal component.

    Parameters
    ----------
    weight : float
        Nonnegative mixture weight (normalized at the mixture level).
    mean : (d,) array_like
    covariance : (d, d) array_like
        Symmetric positive definite.  A lower Cholesky factor is computed
        and cached at construction; failure to factor is a ``ValueError``.
    """

    weight: float
    mean: NDArray
    covariance: NDArray
    cholesky: NDArray = field(init=False, repr=False)

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f"component weight must be nonnegative, got {self.weight}")
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if mean.ndim != 1:
            raise ValueError(f"component mean must be a vector, got shape {mean.shape}")
        chol = _as_spd_cholesky(self.covariance, "component")
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape[0] != mean.shape[0]:
            raise ValueError(
                f"mean dimension {mean.shape[0]} != covariance dimension {cov.shape[0]}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "cholesky", chol)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def log_density(self, v: NDArray) -> NDArray:
        """Log N(v; mean, covariance); v may be a vector or (n, d) batch."""
        v = np.asarray(v, dtype=float)
        dev = np.atleast_2d(v) - self.mean
        sol = solve_triangular(self.cholesky, dev.T, lower=True)
        maha = np.sum(sol * sol, axis=0)
        log_det = 2.0 * np.sum(np.log(np.diag(self.cholesky)))
        out = -0.5 * (maha + self.dim * _LOG_2PI + log_det)
        return out[0] if v.ndim == 1 else out


class GaussianMixture:
    """Finite Gaussian mixture with components of equal dimension.

    Weights are renormalized at construction when their sum deviates from
    one by at most 1e-9; larger deviations raise, so genuinely broken
    configurations are not masked.
    """

    def __init__(self, components: list[GaussianComponent]):
        if not components:
            raise ValueError("mixture needs at least one component")
        dim = components[0].dim
        if any(c.dim != dim for c in components):
            raise ValueError("mixture components must share one dimension")
        total = float(sum(c.weight for c in components))
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"mixture weights sum to {total!r}, expected 1")
        if total != 1.0:
            components = [
                GaussianComponent(c.weight / total, c.mean, c.covariance) for c in components
            ]
        self.components = tuple(components)
        self._weights = np.array([c.weight for c in self.components])
        with np.errstate(divide="ignore"):  # zero weights are legal
            self._log_weights = np.log(self._weights)
        self._means = np.stack([c.mean for c in self.components])

    @classmethod
    def from_parameters(cls, weights, means, covariances) -> "GaussianMixture":
        """Build from parallel arrays of weights, means and covariances."""
        if not (len(weights) == len(means) == len(covariances)):
            raise ValueError("weights, means and covariances must have equal length")
        return cls(
            [GaussianComponent(w, m, c) for w, m, c in zip(weights, means, covariances)]
        )

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> NDArray:
        return self._weights

    @property
    def means(self) -> NDArray:
        return self._means

    def sample(self, rng: "RandomStream | np.random.Generator", size: int | None = None):
        """Draw from the mixture, returning values and latent component indices.

        The composite-experiment semantics are explicit: a component index is
        drawn categorically by weight, then that component generates the
        Gaussian draw.  The latent index is returned because downstream
        consumers (genie estimation, gradient sampling) need it.

        Returns
        -------
        (value, index)
            ``value`` has shape (d,) and ``index`` is an int when ``size`` is
            None; otherwise shapes (size, d) and (size,).
        """
        gen = rng.generator() if isinstance(rng, RandomStream) else rng
        n = 1 if size is None else int(size)
        idx = gen.choice(self.n_components, size=n, p=self._weights)
        z = gen.standard_normal((n, self.dim))
        out = np.empty((n, self.dim))
        for k, comp in enumerate(self.components):
            mask = idx == k
            if np.any(mask):
                out[mask] = comp.mean + z[mask] @ comp.cholesky.T
        if size is None:
            return out[0], int(idx[0])
        return out, idx

    def log_density(self, v: NDArray) -> NDArray:
        """log f(v) via log-sum-exp over component log-densities."""
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise ValueError(f"input dimension {v.shape[-1]} != mixture dimension {self.dim}")
        parts = np.stack(
            [lw + c.log_density(np.atleast_2d(v)) for lw, c in zip(self._log_weights, self.components)]
        )
        top = parts.max(axis=0)
        out = top + np.log(np.sum(np.exp(parts - top), axis=0))
        return out[0] if v.ndim == 1 else out

    def moments(self) -> tuple[NDArray, NDArray]:
        """Overall mean and covariance of the mixture.

        mean = sum_j w_j mean_j and
        cov  = sum_j w_j (cov_j + mean_j mean_j^T) - mean mean^T,
        with the result symmetrized against roundoff.
        """
        mean = self._weights @ self._means
        cov = np.zeros((self.dim, self.dim))
        for c in self.components:
            cov += c.weight * (c.covariance + np.outer(c.mean, c.mean))
        cov -= np.outer(mean, mean)
        return mean, 0.5 * (cov + cov.T)

    def mean_square_norm(self) -> float:
        """E||v||^2 = sum_j w_j (tr cov_j + ||mean_j||^2)."""
        return float(
            sum(c.weight * (np.trace(c.covariance) + c.mean @ c.mean) for c in self.components)
        )


@dataclass(frozen=True)
class RandomStream:
    """Seeded random stream with an integer sub-stream id.

    Identical (seed, stream_id) pairs reproduce identical draw sequences.
    Parallel work must use distinct sub-streams, never a shared generator;
    ``substream`` carves a disjoint id space for nested use (grid points,
    evaluation blocks).
    """

    seed: int
    stream_id: int = 0

    _SUBSTREAM_STRIDE = 1 << 20

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be nonnegative")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        )

    def substream(self, k: int) -> "RandomStream":
        if not 0 <= k < self._SUBSTREAM_STRIDE:
            raise ValueError(f"substream index out of range: {k}")
        return RandomStream(self.seed, self.stream_id * self._SUBSTREAM_STRIDE + k + 1)


def push_forward(
    transfer: NDArray, signal: GaussianMixture, noise: GaussianMixture
) -> GaussianMixture:
    """Mixture of y = H x + n for independent mixture inputs x and n.

    Components are ordered signal-major (all noise components of the first
    signal component first), so flat pair indices are reproducible.

    Parameters
    ----------
    transfer : (m, d) array_like
        The matrix H; d must match the signal dimension, m the noise.
    """
    h = np.asarray(transfer, dtype=float)
    if h.ndim != 2:
        raise ValueError(f"transfer matrix must be 2-D, got shape {h.shape}")
    if h.shape[1] != signal.dim:
        raise ValueError(f"transfer columns {h.shape[1]} != signal dimension {signal.dim}")
    if h.shape[0] != noise.dim:
        raise ValueError(f"transfer rows {h.shape[0]} != noise dimension {noise.dim}")
    out = []
    for cx in signal.components:
        hch = h @ cx.covariance @ h.T
        hch = 0.5 * (hch + hch.T)
        for cn in noise.components:
            out.append(
                GaussianComponent(
                    cx.weight * cn.weight,
                    h @ cx.mean + cn.mean,
                    hch + cn.covariance,
                )
            )
    return GaussianMixture(out)
