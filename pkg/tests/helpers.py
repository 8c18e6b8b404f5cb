"""Shared test utilities: random instances and independent oracles.

Everything here is deliberately implemented from first principles (plain
matrix algebra, direct density formulas, grid searches) so the tests check
the package against routes that share no code with it.
"""

from __future__ import annotations

import numpy as np

from gmdesign import GaussianComponent, GaussianMixture, build_model

# ----------------------------------------------------------------------
# random instances
# ----------------------------------------------------------------------


def random_spd(rng, dim, cond_bound=1e3):
    """Random SPD matrix with condition number below ``cond_bound``."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    lo = 1.0 / np.sqrt(cond_bound)
    hi = np.sqrt(cond_bound)
    eigs = np.exp(rng.uniform(np.log(lo), np.log(hi), size=dim))
    return (q * eigs) @ q.T


def random_mixture(rng, dim, n_comp, mean_scale=2.0, cond_bound=100.0):
    weights = rng.dirichlet(np.ones(n_comp))
    comps = [
        GaussianComponent(
            weights[j], mean_scale * rng.standard_normal(dim), random_spd(rng, dim, cond_bound)
        )
        for j in range(n_comp)
    ]
    return GaussianMixture(comps)


def random_instance(rng, max_dim=3, max_comp=2, mean_scale=2.0):
    d = int(rng.integers(1, max_dim + 1))
    m = int(rng.integers(1, max_dim + 1))
    xmix = random_mixture(rng, d, int(rng.integers(1, max_comp + 1)), mean_scale)
    nmix = random_mixture(rng, m, int(rng.integers(1, max_comp + 1)), mean_scale)
    transfer = rng.standard_normal((m, d))
    return transfer, xmix, nmix


# ----------------------------------------------------------------------
# the two-cluster scalar-gain model (x ~ N(0, I2), bimodal noise)
# ----------------------------------------------------------------------

CLUSTER_MEAN = 5.0


def cluster_noise_mixture(dim=2):
    mu = CLUSTER_MEAN * np.ones(dim)
    cov = 0.5 * np.eye(dim)
    return GaussianMixture(
        [GaussianComponent(0.5, mu, cov), GaussianComponent(0.5, -mu, cov)]
    )


def cluster_model(gain, dim=2):
    signal = GaussianMixture([GaussianComponent(1.0, np.zeros(dim), np.eye(dim))])
    return build_model(gain * np.eye(dim), signal, cluster_noise_mixture(dim))


def cluster_nmse_exact(gain, dim=2, n_grid=20001, span=14.0):
    """Quadrature value of the scalar-gain NMSE curve.

    The posterior mean for this model depends on the observation only
    through its component along the cluster-mean axis, which reduces the
    normalized error to one-dimensional integrals; those are evaluated on
    a dense trapezoid grid.
    """
    m0 = CLUSTER_MEAN * np.sqrt(dim)
    s2 = gain * gain + 0.5
    sd = np.sqrt(s2)
    g = gain / s2
    u = np.linspace(m0 - span * sd, m0 + span * sd, n_grid)
    pdf = np.exp(-0.5 * ((u - m0) / sd) ** 2) / (sd * np.sqrt(2 * np.pi))
    delta = np.tanh(m0 * u / s2)
    e_du = np.trapezoid(pdf * delta * u, u)
    e_d2 = np.trapezoid(pdf * delta * delta, u)
    e_yy = dim * s2 + m0 * m0
    e_est2 = g * g * (e_yy - 2.0 * m0 * e_du + m0 * m0 * e_d2)
    return (dim - e_est2) / dim


def cluster_genie_nmse_exact(gain):
    """Closed-form genie NMSE for the scalar-gain model (pure Gaussian case)."""
    return 0.5 / (gain * gain + 0.5)


# ----------------------------------------------------------------------
# literal gradient oracle (raw-density form, rebuilt from parameters)
# ----------------------------------------------------------------------


def literal_gradient(transfer, xmix, nmix, x, n):
    """The three-term raw-density gradient, assembled from scratch.

    Everything is recomputed from the mixture parameters with plain numpy
    (explicit inverses, raw Gaussian densities, extended-precision scalar
    weights); only usable at moderate scales where densities do not
    underflow, which is exactly the regime the equivalence check targets.
    """
    h = np.asarray(transfer, float)
    x = np.asarray(x, float)
    n = np.asarray(n, float)
    y = h @ x + n
    m = y.shape[0]

    pairs = []
    for cx in xmix.components:
        for cn in nmix.components:
            cyy = h @ cx.covariance @ h.T + cn.covariance
            cinv = np.linalg.inv(cyy)
            uy = h @ cx.mean + cn.mean
            dev = y - uy
            dens = np.exp(
                np.longdouble(-0.5 * dev @ cinv @ dev)
            ) / np.longdouble(
                (2 * np.pi) ** (m / 2) * np.sqrt(np.linalg.det(cyy))
            )
            pairs.append(
                {
                    "pq": np.longdouble(cx.weight * cn.weight),
                    "f": dens,
                    "w": dev,
                    "cinv": cinv,
                    "cx": cx.covariance,
                    "ux": cx.mean,
                    "hcx": h @ cx.covariance,
                    "post": cx.mean + cx.covariance @ h.T @ cinv @ dev,
                }
            )

    n_pairs = len(pairs)
    r_mats = []
    for p in pairs:
        a = p["cinv"] @ p["w"]
        r = np.outer(a, x - p["ux"]) + p["cinv"] @ p["hcx"] - np.outer(a, a @ p["hcx"])
        r_mats.append(r)

    def d_mat(i, j):
        pi, pj = pairs[i], pairs[j]
        a = pi["cinv"] @ pi["w"]
        c = np.outer(a, pi["cinv"] @ pi["hcx"] @ pj["post"])
        return (
            np.outer(a, pi["cx"] @ pj["post"])
            - (c + c.T) @ pi["hcx"]
            + np.outer(pi["cinv"] @ pi["hcx"] @ pj["post"], x - pi["ux"])
        )

    hw = np.array([p["pq"] * p["f"] for p in pairs], dtype=np.longdouble)
    t = hw.sum()
    h_table = np.outer(hw, hw)
    h_sum = h_table.sum()
    z = np.array(
        [[pairs[i]["post"] @ pairs[j]["post"] for j in range(n_pairs)] for i in range(n_pairs)]
    )

    term1 = np.zeros_like(h, dtype=np.longdouble)
    term2 = np.zeros_like(h, dtype=np.longdouble)
    for i in range(n_pairs):
        for j in range(n_pairs):
            term1 -= h_table[i, j] * z[i, j] * (r_mats[i] + r_mats[j])
            term2 += h_table[i, j] * (d_mat(i, j) + d_mat(j, i))
    weighted_r = sum(hw[i] * r_mats[i] for i in range(n_pairs))
    term3 = 2.0 * (h_table * z).sum() * weighted_r / t
    return np.asarray((term1 + term2 + term3) / h_sum, dtype=float)


# ----------------------------------------------------------------------
# brute-force nearest orthogonal matrix over O(2)
# ----------------------------------------------------------------------


def nearest_orthogonal_bruteforce(w, n_angles):
    """Grid minimizer of ||F - W||_F^2 over rotations and reflections."""
    thetas = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    c, s = np.cos(thetas), np.sin(thetas)
    rot = np.stack([np.stack([c, -s], axis=1), np.stack([s, c], axis=1)], axis=1)
    refl = np.stack([np.stack([c, s], axis=1), np.stack([s, -c], axis=1)], axis=1)
    cands = np.concatenate([rot, refl])
    costs = np.sum((cands - w) ** 2, axis=(1, 2))
    return cands[np.argmin(costs)]
