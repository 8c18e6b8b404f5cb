"""Linear observation model y = H x + n with Gaussian-mixture inputs.

``LinearGMModel`` pre-factors every output-pair covariance
C_yy = H C_x H^T + C_n once, so density evaluation, posterior means and
gradient terms are all solve-based.  Pair indices are flat and
signal-major: pair i corresponds to signal component i // L and noise
component i % L.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .mixture import GaussianMixture

__all__ = ["LinearGMModel", "Responsibilities", "build_model", "responsibilities"]

_LOG_2PI = np.log(2.0 * np.pi)


class LinearGMModel:
    """Transfer matrix plus input mixtures with per-pair output caches.

    Attributes (all stacked over the KL flat pairs)
    ----------
    out_means : (KL, M) output component means H u_x + u_n
    out_chols : (KL, M, M) lower Cholesky factors of the output covariances
    out_inverses : (KL, M, M) explicit inverses (the gradient needs them as
        matrices; they are formed once here from the Cholesky factors)
    out_log_dets : (KL,)
    cross_gains : (KL, D, M) C_x H^T C_yy^{-1}, the component posterior gain
    log_pair_weights : (KL,) log(p_k q_l)
    """

    def __init__(self, transfer: NDArray, signal: GaussianMixture, noise: GaussianMixture):
        h = np.asarray(transfer, dtype=float)
        if h.ndim != 2:
            raise ValueError(f"transfer matrix must be 2-D, got shape {h.shape}")
        if h.shape[1] != signal.dim:
            raise ValueError(
                f"transfer columns {h.shape[1]} != signal dimension {signal.dim}"
            )
        if h.shape[0] != noise.dim:
            raise ValueError(f"transfer rows {h.shape[0]} != noise dimension {noise.dim}")
        self.transfer = h
        self.signal = signal
        self.noise = noise

        kk, ll = signal.n_components, noise.n_components
        m, d = h.shape
        self.n_pairs = kk * ll
        self.x_dim, self.y_dim = d, m

        self.pair_signal_index = np.repeat(np.arange(kk), ll)
        self.pair_noise_index = np.tile(np.arange(ll), kk)

        self.x_means = signal.means[self.pair_signal_index]
        self.x_covs = np.stack(
            [signal.components[k].covariance for k in self.pair_signal_index]
        )
        self.hc = np.stack([h @ c for c in self.x_covs])  # (KL, M, D)

        with np.errstate(divide="ignore"):
            self.log_pair_weights = np.log(
                np.array(
                    [
                        signal.components[k].weight * noise.components[l].weight
                        for k, l in zip(self.pair_signal_index, self.pair_noise_index)
                    ]
                )
            )

        self.out_means = np.empty((self.n_pairs, m))
        self.out_chols = np.empty((self.n_pairs, m, m))
        self.out_inverses = np.empty((self.n_pairs, m, m))
        self.out_log_dets = np.empty(self.n_pairs)
        self.cross_gains = np.empty((self.n_pairs, d, m))
        eye = np.eye(m)
        for i in range(self.n_pairs):
            k, l = self.pair_signal_index[i], self.pair_noise_index[i]
            nc = noise.components[l]
            cyy = self.hc[i] @ h.T + nc.covariance
            cyy = 0.5 * (cyy + cyy.T)
            try:
                chol = cholesky(cyy, lower=True)
            except np.linalg.LinAlgError as exc:
                raise ValueError(
                    f"output covariance for pair (signal {k}, noise {l}) "
                    "is not positive definite"
                ) from exc
            self.out_means[i] = h @ signal.components[k].mean + nc.mean
            self.out_chols[i] = chol
            inv = cho_solve((chol, True), eye)
            self.out_inverses[i] = 0.5 * (inv + inv.T)
            self.out_log_dets[i] = 2.0 * np.sum(np.log(np.diag(chol)))
            # C_x H^T Cyy^{-1} = (Cyy^{-1} H C_x)^T
            self.cross_gains[i] = (self.out_inverses[i] @ self.hc[i]).T

    # ------------------------------------------------------------------
    # densities and responsibilities
    # ------------------------------------------------------------------

    def component_log_densities(self, y: NDArray) -> NDArray:
        """Per-pair Gaussian log-densities, shape (n, KL) for y of shape (n, M)."""
        y2 = np.atleast_2d(np.asarray(y, dtype=float))
        if y2.shape[1] != self.y_dim:
            raise ValueError(f"observation dimension {y2.shape[1]} != {self.y_dim}")
        out = np.empty((y2.shape[0], self.n_pairs))
        for i in range(self.n_pairs):
            dev = y2 - self.out_means[i]
            sol = solve_triangular(self.out_chols[i], dev.T, lower=True)
            out[:, i] = -0.5 * (
                np.sum(sol * sol, axis=0) + self.y_dim * _LOG_2PI + self.out_log_dets[i]
            )
        return out

    def log_responsibilities(self, y: NDArray) -> tuple[NDArray, NDArray]:
        """(log rho, log f(y)) with rho the posterior pair weights."""
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        terms = self.component_log_densities(y) + self.log_pair_weights
        top = terms.max(axis=1, keepdims=True)
        log_f = top[:, 0] + np.log(np.sum(np.exp(terms - top), axis=1))
        log_rho = terms - log_f[:, None]
        if single:
            return log_rho[0], log_f[0]
        return log_rho, log_f

    def responsibilities_array(self, y: NDArray) -> tuple[NDArray, NDArray]:
        """(rho, log f(y)); rho rows are normalized to sum exactly to one."""
        log_rho, log_f = self.log_responsibilities(y)
        rho = np.exp(log_rho)
        rho /= rho.sum(axis=-1, keepdims=True)
        return rho, log_f

    def log_density(self, y: NDArray) -> NDArray:
        return self.log_responsibilities(y)[1]

    # ------------------------------------------------------------------
    # posterior means
    # ------------------------------------------------------------------

    def component_posterior_means(self, y: NDArray) -> NDArray:
        """Per-pair posterior means u_x + C_x H^T Cyy^{-1} (y - u_y), (n, KL, D)."""
        y2 = np.atleast_2d(np.asarray(y, dtype=float))
        dev = y2[:, None, :] - self.out_means[None, :, :]
        post = self.x_means[None] + np.einsum("idm,nim->nid", self.cross_gains, dev)
        return post


@dataclass(frozen=True)
class Responsibilities:
    """Posterior pair weights rho(y) for one observation, signal-major flat order."""

    rho: NDArray
    log_density: float

    def __post_init__(self):
        total = float(self.rho.sum())
        if not np.isfinite(total) or abs(total - 1.0) > 1e-12:
            raise ValueError(f"responsibilities sum to {total!r}")


def build_model(
    transfer: NDArray, signal: GaussianMixture, noise: GaussianMixture
) -> LinearGMModel:
    """Construct the cached observation model for y = H x + n."""
    return LinearGMModel(transfer, signal, noise)


def responsibilities(model: LinearGMModel, y: NDArray) -> Responsibilities:
    """Posterior pair weights for a single observation."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("responsibilities() takes a single observation vector")
    rho, log_f = model.responsibilities_array(y)
    return Responsibilities(rho=rho, log_density=float(log_f))
