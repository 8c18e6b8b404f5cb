"""Estimators for x given y = H x + n, and Monte Carlo NMSE evaluation.

Four estimator kinds are supported:

``mmse``
    The exact posterior mean, a responsibility-weighted combination of
    per-pair Gaussian posterior means.
``lmmse``
    The best affine estimator, built from exact overall mixture moments
    (never from sampled moments, so baselines carry no Monte Carlo noise).
``genie``
    The posterior mean given the latent noise component index; an
    unimplementable bound used for diagnosis.
``prior``
    The prior mean, ignoring y entirely; the worst sensible estimator.

Evaluation draws (x, n) with their latent component indices, forms
y = H x + n, and accumulates squared errors.  All requested kinds are
scored on common random numbers.  Work is split into a fixed number of
contiguous blocks with one random sub-stream each, so results are
bit-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_factor, cho_solve

from .mixture import GaussianComponent, RandomStream
from .model import LinearGMModel

__all__ = [
    "EvaluationReport",
    "ESTIMATOR_KINDS",
    "CSV_COLUMNS",
    "mmse_estimate",
    "lmmse_estimate",
    "genie_estimate",
    "prior_mean_estimate",
    "analytic_gaussian_mmse",
    "evaluate_nmse",
    "evaluate_paired",
    "evaluate_designs",
]

ESTIMATOR_KINDS = ("mmse", "lmmse", "genie", "prior")

CSV_COLUMNS = ("scenario", "estimator", "snr_db", "nmse", "mmse", "stderr", "n_samples", "seed")

# Evaluation is always split into this many contiguous blocks, one random
# sub-stream per block, regardless of how many workers execute them.
EVAL_BLOCKS = 8
_CHUNK = 65536


def mmse_estimate(model: LinearGMModel, y: NDArray) -> NDArray:
    """Posterior mean E{x | y}; accepts a single vector or an (n, M) batch."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    rho, _ = model.responsibilities_array(y)
    post = model.component_posterior_means(y)
    est = np.einsum("ni,nid->nd", np.atleast_2d(rho), post)
    return est[0] if single else est


def lmmse_estimate(model: LinearGMModel, y: NDArray) -> NDArray:
    """Best affine estimate of x from y, using exact overall moments."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    gain, offset = _lmmse_gain_offset(model)
    est = np.atleast_2d(y) @ gain.T + offset
    return est[0] if single else est


def _lmmse_gain_offset(model: LinearGMModel) -> tuple[NDArray, NDArray]:
    x_mean, x_cov = model.signal.moments()
    n_mean, n_cov = model.noise.moments()
    h = model.transfer
    cyy = h @ x_cov @ h.T + n_cov
    try:
        factor = cho_factor(0.5 * (cyy + cyy.T), lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("overall output covariance is singular") from exc
    gain = cho_solve(factor, h @ x_cov).T  # C_x H^T (H C_x H^T + C_n)^{-1}
    offset = x_mean - gain @ (h @ x_mean + n_mean)
    return gain, offset


def genie_estimate(model: LinearGMModel, y: NDArray, noise_index) -> NDArray:
    """Posterior mean given the active noise component.

    ``noise_index`` is an int for a single y, or an (n,) integer array for a
    batch.  Responsibilities then run over signal components only, inside
    the sub-model whose noise mixture is the single indicated component.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y2 = np.atleast_2d(y)
    lidx = np.atleast_1d(np.asarray(noise_index, dtype=int))
    if single and lidx.shape != (1,):
        raise ValueError("single observation needs a single noise index")
    if not single and lidx.shape[0] != y2.shape[0]:
        raise ValueError("noise_index length must match the batch")
    n_l = model.noise.n_components
    if np.any(lidx < 0) or np.any(lidx >= n_l):
        raise IndexError(f"noise component index out of range [0, {n_l})")
    logdens = model.component_log_densities(y2)
    post = model.component_posterior_means(y2)
    est = _genie_from_parts(model, logdens, post, lidx)
    return est[0] if single else est


def _genie_from_parts(
    model: LinearGMModel, logdens: NDArray, post: NDArray, lidx: NDArray
) -> NDArray:
    n_l = model.noise.n_components
    with np.errstate(divide="ignore"):
        log_p = np.log(model.signal.weights)
    est = np.empty((logdens.shape[0], model.x_dim))
    for l in range(n_l):
        mask = lidx == l
        if not np.any(mask):
            continue
        cols = np.arange(model.signal.n_components) * n_l + l
        terms = logdens[np.ix_(mask, cols)] + log_p
        terms -= terms.max(axis=1, keepdims=True)
        rho = np.exp(terms)
        rho /= rho.sum(axis=1, keepdims=True)
        est[mask] = np.einsum("nk,nkd->nd", rho, post[np.ix_(mask, cols)])
    return est


def prior_mean_estimate(model: LinearGMModel, y: NDArray) -> NDArray:
    """The prior mean of x, independent of y."""
    y = np.asarray(y, dtype=float)
    mean = model.signal.moments()[0]
    if y.ndim == 1:
        return mean.copy()
    return np.broadcast_to(mean, (y.shape[0], mean.shape[0])).copy()


def analytic_gaussian_mmse(
    transfer: NDArray, signal: GaussianComponent, noise: GaussianComponent
) -> float:
    """Closed-form MMSE for single-Gaussian inputs.

    tr(C_x - C_x H^T (H C_x H^T + C_n)^{-1} H C_x); a test oracle for the
    Monte Carlo machinery, exact only when both mixtures are singletons.
    """
    h = np.asarray(transfer, dtype=float)
    cx, cn = signal.covariance, noise.covariance
    hc = h @ cx
    cyy = hc @ h.T + cn
    factor = cho_factor(0.5 * (cyy + cyy.T), lower=True)
    return float(np.trace(cx) - np.trace(hc.T @ cho_solve(factor, hc)))


@dataclass(frozen=True)
class EvaluationReport:
    """Monte Carlo estimation-error summary for one estimator kind.

    ``mmse`` is the empirical mean of the squared error, ``nmse`` that mean
    normalized by the analytic E||x||^2, ``stderr`` the sample standard
    deviation of the squared error divided by sqrt(N).  For the ``mmse``
    estimator kind only, ``identity_mmse`` reports the complementary
    estimate E||x||^2 - mean ||xhat||^2, which is valid for the posterior
    mean alone.
    """

    estimator: str
    nmse: float
    mmse: float
    stderr: float
    n_samples: int
    seed: int
    identity_mmse: float | None = None
    identity_stderr: float | None = None

    def csv_row(self, scenario: str, snr_db: float) -> list[str]:
        return [
            scenario,
            self.estimator,
            _fmt(snr_db),
            _fmt(self.nmse),
            _fmt(self.mmse),
            _fmt(self.stderr),
            str(self.n_samples),
            str(self.seed),
        ]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def evaluate_nmse(
    model: LinearGMModel,
    kind: str,
    n_samples: int,
    stream: RandomStream,
    workers: int = 1,
) -> EvaluationReport:
    """Monte Carlo NMSE of one estimator kind; see ``evaluate_paired``."""
    return evaluate_paired(model, [kind], n_samples, stream, workers)[kind]


def evaluate_paired(
    model: LinearGMModel,
    kinds: list[str],
    n_samples: int,
    stream: RandomStream,
    workers: int = 1,
) -> dict[str, EvaluationReport]:
    """Score several estimator kinds of one model on common random samples."""
    reports = evaluate_designs(
        [(kind, model, kind) for kind in kinds], n_samples, stream, workers
    )
    return reports


def evaluate_designs(
    entries: list[tuple[str, LinearGMModel, str]],
    n_samples: int,
    stream: RandomStream,
    workers: int = 1,
) -> dict[str, EvaluationReport]:
    """Score (tag, model, estimator-kind) entries on common input draws.

    All models must share the same input mixtures; one common set of
    (x, latent, n, latent) draws is pushed through every entry's transfer
    matrix, which is what makes design comparisons paired.

    Sampling is partitioned into ``EVAL_BLOCKS`` contiguous blocks, block b
    drawing from ``stream.substream(b)``.  Partial sums are combined in
    block order, so the result does not depend on ``workers``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if not entries:
        raise ValueError("evaluate_designs needs at least one entry")
    base = entries[0][1]
    for tag, model, kind in entries:
        if kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {kind!r} for entry {tag!r}")
        if model.signal is not base.signal or model.noise is not base.noise:
            raise ValueError("all evaluated models must share the same input mixtures")
    prepared = [
        (
            tag,
            model,
            kind,
            _lmmse_gain_offset(model) if kind == "lmmse" else None,
        )
        for tag, model, kind in entries
    ]
    prior_mean = base.signal.moments()[0]
    sizes = _block_sizes(n_samples)

    def run_block(b: int):
        return _evaluate_block(prepared, prior_mean, sizes[b], stream.substream(b))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run_block, range(len(sizes))))
    else:
        partials = [run_block(b) for b in range(len(sizes))]

    e_xx = base.signal.mean_square_norm()
    out = {}
    for pos, (tag, model, kind, _) in enumerate(prepared):
        s1 = sum(p[pos][0] for p in partials)
        s2 = sum(p[pos][1] for p in partials)
        mean = s1 / n_samples
        var = max(s2 / n_samples - mean * mean, 0.0)
        stderr = float(np.sqrt(var / n_samples))
        identity_mmse = identity_stderr = None
        if kind == "mmse":
            g1 = sum(p[pos][2] for p in partials)
            g2 = sum(p[pos][3] for p in partials)
            g_mean = g1 / n_samples
            g_var = max(g2 / n_samples - g_mean * g_mean, 0.0)
            identity_mmse = e_xx - g_mean
            identity_stderr = float(np.sqrt(g_var / n_samples))
        out[tag] = EvaluationReport(
            estimator=tag,
            nmse=mean / e_xx,
            mmse=mean,
            stderr=stderr,
            n_samples=n_samples,
            seed=stream.seed,
            identity_mmse=identity_mmse,
            identity_stderr=identity_stderr,
        )
    return out


def _block_sizes(n: int, blocks: int = EVAL_BLOCKS) -> list[int]:
    base, rem = divmod(n, blocks)
    sizes = [base + (1 if b < rem else 0) for b in range(blocks)]
    return [s for s in sizes if s > 0]


def _evaluate_block(prepared, prior_mean, size, block_stream):
    gen = block_stream.generator()
    signal, noise_mix = prepared[0][1].signal, prepared[0][1].noise
    x, _ = signal.sample(gen, size)
    noise, lidx = noise_mix.sample(gen, size)

    sums = [[0.0, 0.0, 0.0, 0.0] for _ in prepared]
    for lo in range(0, size, _CHUNK):
        sl = slice(lo, min(lo + _CHUNK, size))
        xc, nc, lc = x[sl], noise[sl], lidx[sl]
        cache: dict[int, tuple] = {}
        for pos, (tag, model, kind, lmmse_parts) in enumerate(prepared):
            key = id(model)
            if key not in cache:
                cache[key] = (xc @ model.transfer.T + nc, None, None)
            yc, logdens, post = cache[key]
            if kind in ("mmse", "genie") and logdens is None:
                logdens = model.component_log_densities(yc)
                post = model.component_posterior_means(yc)
                cache[key] = (yc, logdens, post)
            if kind == "mmse":
                terms = logdens + model.log_pair_weights
                terms = terms - terms.max(axis=1, keepdims=True)
                rho = np.exp(terms)
                rho /= rho.sum(axis=1, keepdims=True)
                est = np.einsum("ni,nid->nd", rho, post)
            elif kind == "genie":
                est = _genie_from_parts(model, logdens, post, lc)
            elif kind == "lmmse":
                gain, offset = lmmse_parts
                est = yc @ gain.T + offset
            else:
                est = prior_mean[None, :]
            err = xc - est
            se = np.einsum("nd,nd->n", err, err)
            sums[pos][0] += float(se.sum())
            sums[pos][1] += float((se * se).sum())
            if kind == "mmse":
                g = np.einsum("nd,nd->n", est, est)
                sums[pos][2] += float(g.sum())
                sums[pos][3] += float((g * g).sum())
    return sums
