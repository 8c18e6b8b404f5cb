"""Closed-form stochastic gradient of the squared posterior-mean norm.

For a sample pair (x, n) held fixed, let y = H x + n and define the
objective as ||E{x | y}||^2, a function of H both through the estimator
and through y itself.  Its exact gradient with respect to H is assembled
here from per-pair innovation terms; averaged over input draws it is an
unbiased estimate of the gradient of the expected objective, which is what
the projected stochastic ascent in :mod:`gmdesign.optimizer` climbs.

Numerics: the pairwise weights are products of responsibilities, computed
in the log domain until the final exponentiation.  Density ratios are
never formed from raw densities, which underflow at the signal scales of
interest.

Chain rules map the transfer-space gradient onto structured designs:
``precoder_chain`` for H = B F and ``pilot_chain`` for H = S^T kron I_m.
``finite_difference_gradient`` is the independent oracle used throughout
the tests (and is the Kiefer-Wolfowitz fallback direction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .model import LinearGMModel

__all__ = [
    "GradientWorkspace",
    "StructuredGradient",
    "gradient_workspace",
    "stochastic_gradient",
    "structured_gradient",
    "component_posterior_norms",
    "batch_gradient",
    "sample_gradients",
    "objective_value",
    "precoder_chain",
    "pilot_chain",
    "pilot_chain_commutation",
    "commutation_matrix",
    "finite_difference_gradient",
]

# Cap on n_chunk * KL^2 * M * D elements in the pairwise tensor.
_TENSOR_BUDGET = 1 << 22


def objective_value(model: LinearGMModel, x: NDArray, n: NDArray) -> float:
    """||E{x | y}||^2 at y = H x + n for a single sample pair."""
    from .estimators import mmse_estimate

    y = model.transfer @ np.asarray(x, float) + np.asarray(n, float)
    est = mmse_estimate(model, y)
    return float(est @ est)


@dataclass(frozen=True)
class GradientWorkspace:
    """Per-sample intermediates of the closed-form gradient.

    All arrays are stacked over the KL flat pairs (signal-major).  The
    pairwise tensors keep both pair axes; ``pair_norms[i, j]`` is the inner
    product of the pair posterior means and satisfies
    rho^T pair_norms rho == ||E{x|y}||^2.
    """

    innovations: NDArray        # (KL, M)      y - u_y per pair
    solved_innovations: NDArray  # (KL, M)     Cyy^{-1} innovation
    responsibilities: NDArray   # (KL,)
    posterior_means: NDArray    # (KL, D)
    pair_norms: NDArray         # (KL, KL)     z table
    density_terms: NDArray      # (KL, M, D)   R terms
    cross_terms: NDArray        # (KL, KL, M, D)  D terms
    gradient: NDArray           # (M, D)


def gradient_workspace(model: LinearGMModel, x: NDArray, n: NDArray) -> GradientWorkspace:
    """Assemble all gradient intermediates for one input sample pair."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    rho, w, a, post, r_terms, d_terms, z, grad = _gradient_core(
        model, x[None, :], n[None, :], keep_tensors=True
    )
    return GradientWorkspace(
        innovations=w[0],
        solved_innovations=a[0],
        responsibilities=rho[0],
        posterior_means=post[0],
        pair_norms=z[0],
        density_terms=r_terms[0],
        cross_terms=d_terms[0],
        gradient=grad[0],
    )


def stochastic_gradient(model: LinearGMModel, x: NDArray, n: NDArray) -> NDArray:
    """Exact gradient of ||E{x|y}||^2 w.r.t. H for one sample pair (x, n)."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    return _gradient_core(model, x[None, :], n[None, :])[-1][0]


def sample_gradients(model: LinearGMModel, x: NDArray, n: NDArray) -> NDArray:
    """Per-sample gradients for batches x (N, D) and n (N, M), chunked."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = np.atleast_2d(np.asarray(n, dtype=float))
    if x.shape[0] != n.shape[0]:
        raise ValueError("x and n batches must have equal length")
    kl = model.n_pairs
    chunk = max(1, _TENSOR_BUDGET // (kl * kl * model.y_dim * model.x_dim))
    out = np.empty((x.shape[0], model.y_dim, model.x_dim))
    for lo in range(0, x.shape[0], chunk):
        sl = slice(lo, min(lo + chunk, x.shape[0]))
        out[sl] = _gradient_core(model, x[sl], n[sl])[-1]
    return out


def batch_gradient(model: LinearGMModel, samples) -> NDArray:
    """Mean stochastic gradient over a list of (x, n) sample pairs."""
    if isinstance(samples, tuple) and len(samples) == 2 and np.ndim(samples[0]) == 2:
        x, n = samples
    else:
        samples = list(samples)
        if not samples:
            raise ValueError("batch_gradient needs at least one sample")
        x = np.stack([np.asarray(s[0], float) for s in samples])
        n = np.stack([np.asarray(s[1], float) for s in samples])
    return sample_gradients(model, x, n).mean(axis=0)


def component_posterior_norms(model: LinearGMModel, y: NDArray) -> tuple[NDArray, NDArray]:
    """Pairwise posterior-mean inner products and responsibilities at y.

    Returns (z, rho) with z[i, j] = u_i^T u_j over the per-pair posterior
    means; z is symmetric with nonnegative diagonal, and
    rho^T z rho == ||E{x|y}||^2.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("component_posterior_norms takes a single observation")
    rho, _ = model.responsibilities_array(y)
    post = model.component_posterior_means(y)[0]
    return post @ post.T, rho


def _gradient_core(model, x, n, keep_tensors=False):
    """Vectorized gradient over a sample batch; returns stacked intermediates.

    Implements, per pair i and pair j:
      R_i   = Cinv_i w_i (x - ux_i)^T + Cinv_i (I - w_i w_i^T Cinv_i) H Cx_i
      D_ij  = Cinv_i w_i (Cx_i u_j)^T - (C_ij + C_ij^T) H Cx_i
              + (Cinv_i H Cx_i u_j)(x - ux_i)^T,
      with C_ij = Cinv_i w_i (Cx_i H^T Cinv_i u_j)^T rank-one, and combines
      them with responsibility products:
      grad = sum_ij rho_i rho_j (-(R_i + R_j) z_ij + D_ij + D_ji)
             + 2 ||uhat||^2 sum_i rho_i R_i.
    """
    y = x @ model.transfer.T + n
    rho, _ = model.responsibilities_array(y)        # (n, KL)
    w = y[:, None, :] - model.out_means[None]       # (n, KL, M)
    a = np.einsum("imj,nij->nim", model.out_inverses, w)
    post = model.x_means[None] + np.einsum("idm,nim->nid", model.cross_gains, w)

    hc = model.hc                                   # (KL, M, D)   H Cx
    cinv_hc = model.cross_gains.transpose(0, 2, 1)  # (KL, M, D)   Cinv H Cx
    xu = x[:, None, :] - model.x_means[None]        # (n, KL, D)
    a_hc = np.einsum("nim,imd->nid", a, hc)         # (n, KL, D)   (a^T H Cx)
    r_terms = (
        np.einsum("nim,nid->nimd", a, xu)
        + cinv_hc[None]
        - np.einsum("nim,nid->nimd", a, a_hc)
    )

    z = np.einsum("nid,njd->nij", post, post)
    uhat = np.einsum("ni,nid->nd", rho, post)
    g_val = np.einsum("nd,nd->n", uhat, uhat)
    m_i = np.einsum("nij,nj->ni", z, rho)

    b = np.einsum("imd,njd->nijm", cinv_hc, post)   # (n, KL, KL, M)
    cx_u = np.einsum("ide,nje->nijd", model.x_covs, post)
    b_hc = np.einsum("nijm,imd->nijd", b, hc)
    d_terms = np.einsum("nim,nijd->nijmd", a, cx_u - b_hc) + np.einsum(
        "nijm,nid->nijmd", b, xu - a_hc
    )

    weight_r = 2.0 * rho * (g_val[:, None] - m_i)
    grad = np.einsum("ni,nimd->nmd", weight_r, r_terms)
    grad += 2.0 * np.einsum("ni,nj,nijmd->nmd", rho, rho, d_terms)

    if keep_tensors:
        return rho, w, a, post, r_terms, d_terms, z, grad
    return rho, w, a, post, None, None, z, grad


# ----------------------------------------------------------------------
# chain rules for structured transfer matrices
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class StructuredGradient:
    """A transfer-space gradient together with its structured pullback.

    Exactly one structure applies: plain transfer gradients carry no
    pullback, precoder gradients carry grad_precoder, pilot gradients
    carry grad_pilot.
    """

    structure: str
    grad_transfer: NDArray
    grad_precoder: NDArray | None = None
    grad_pilot: NDArray | None = None

    def __post_init__(self):
        expected = {
            "transfer": (self.grad_precoder is None, self.grad_pilot is None),
            "precoder": (self.grad_precoder is not None, self.grad_pilot is None),
            "pilot": (self.grad_precoder is None, self.grad_pilot is not None),
        }
        if self.structure not in expected:
            raise ValueError(f"unknown structure tag {self.structure!r}")
        if not all(expected[self.structure]):
            raise ValueError(f"fields inconsistent with structure {self.structure!r}")

    @property
    def update_direction(self) -> NDArray:
        if self.structure == "precoder":
            return self.grad_precoder
        if self.structure == "pilot":
            return self.grad_pilot
        return self.grad_transfer


def structured_gradient(
    model: LinearGMModel,
    x: NDArray,
    n: NDArray,
    channel: NDArray | None = None,
    receive_dim: int | None = None,
    s_shape: tuple[int, int] | None = None,
) -> StructuredGradient:
    """Stochastic gradient mapped through the declared structure.

    Pass ``channel`` for H = B F, or ``receive_dim`` plus ``s_shape`` for
    H = S^T kron I_m; with neither, the plain transfer gradient is tagged.
    """
    if channel is not None and (receive_dim is not None or s_shape is not None):
        raise ValueError("declare either a precoder channel or a pilot shape, not both")
    grad_h = stochastic_gradient(model, x, n)
    if channel is not None:
        return StructuredGradient(
            "precoder", grad_h, grad_precoder=precoder_chain(grad_h, channel)
        )
    if receive_dim is not None or s_shape is not None:
        if receive_dim is None or s_shape is None:
            raise ValueError("pilot structure needs both receive_dim and s_shape")
        return StructuredGradient(
            "pilot", grad_h, grad_pilot=pilot_chain(grad_h, receive_dim, s_shape)
        )
    return StructuredGradient("transfer", grad_h)


def precoder_chain(grad_transfer: NDArray, channel: NDArray) -> NDArray:
    """Pull a transfer-space gradient back through H = B F: grad_F = B^T grad_H."""
    grad_transfer = np.asarray(grad_transfer, dtype=float)
    channel = np.asarray(channel, dtype=float)
    if channel.shape[0] != grad_transfer.shape[0]:
        raise ValueError(
            f"channel rows {channel.shape[0]} != gradient rows {grad_transfer.shape[0]}"
        )
    return channel.T @ grad_transfer


def pilot_chain(grad_transfer: NDArray, m: int, s_shape: tuple[int, int]) -> NDArray:
    """Pull a transfer-space gradient back to the pilot matrix S.

    For H = S^T kron I_m with S of shape (n, r), the (i, j) m-by-m block of
    H equals S[j, i] I_m, so each pilot entry collects the trace of its
    block: grad_S[j, i] = tr(block_{i,j}(grad_H)).
    """
    grad_transfer = np.asarray(grad_transfer, dtype=float)
    n, r = s_shape
    if grad_transfer.shape != (r * m, n * m):
        raise ValueError(
            f"gradient shape {grad_transfer.shape} inconsistent with pilot "
            f"shape {s_shape} and receive dimension {m}"
        )
    blocks = grad_transfer.reshape(r, m, n, m)
    return np.einsum("iaja->ji", blocks)


def pilot_chain_commutation(grad_transfer: NDArray, m: int, s_shape: tuple[int, int]) -> NDArray:
    """Same pullback via the explicit commutation-matrix construction.

    Uses vec(dH) = (I_n kron K_{mr} kron I_m)(I_{rn} kron vec(I_m)) dvec(S^T)
    with column-major vec throughout.  Kept as an independent route; it must
    agree with ``pilot_chain`` to machine precision.
    """
    grad_transfer = np.asarray(grad_transfer, dtype=float)
    n, r = s_shape
    if grad_transfer.shape != (r * m, n * m):
        raise ValueError(
            f"gradient shape {grad_transfer.shape} inconsistent with pilot "
            f"shape {s_shape} and receive dimension {m}"
        )
    k_mr = commutation_matrix(m, r)
    mat = np.kron(np.eye(n), np.kron(k_mr, np.eye(m))) @ np.kron(
        np.eye(r * n), np.eye(m).reshape(-1, 1, order="F")
    )
    vec_grad_st = mat.T @ grad_transfer.reshape(-1, order="F")
    return vec_grad_st.reshape(r, n, order="F").T


def commutation_matrix(m: int, r: int) -> NDArray:
    """Permutation K with K vec(A) = vec(A^T) for any m-by-r A (column-major vec)."""
    k = np.zeros((m * r, m * r))
    for i in range(m):
        for j in range(r):
            k[j + i * r, i + j * m] = 1.0
    return k


def finite_difference_gradient(build_model, param: NDArray, x, n, step=None) -> NDArray:
    """Central differences of ||E{x|y}||^2 over the entries of ``param``.

    ``build_model`` maps a parameter matrix (H itself, a precoder F, or a
    pilot S) to a :class:`LinearGMModel`; the model cache and y = H x + n
    are rebuilt for every probe.  The default step is 1e-6 (1 + |entry|),
    balancing truncation against roundoff in double precision.
    """
    param = np.array(param, dtype=float)
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    grad = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    for _ in it:
        ij = it.multi_index
        h = step if step is not None else 1e-6 * (1.0 + abs(param[ij]))
        probe = param.copy()
        probe[ij] = param[ij] + h
        f_plus = objective_value(build_model(probe), x, n)
        probe[ij] = param[ij] - h
        f_minus = objective_value(build_model(probe), x, n)
        grad[ij] = (f_plus - f_minus) / (2.0 * h)
    return grad
