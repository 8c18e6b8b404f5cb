"""Gaussian mixtures: construction, sampling, densities, moments.

Builds the bimodal noise used throughout the demos, draws from it, and
pushes it through a linear map.
"""

import numpy as np

from gmdesign import GaussianComponent, GaussianMixture, RandomStream, push_forward

# A two-component mixture: clusters at +-(5, 5) with small spread.
mu = 5.0 * np.ones(2)
noise = GaussianMixture(
    [
        GaussianComponent(0.5, mu, 0.5 * np.eye(2)),
        GaussianComponent(0.5, -mu, 0.5 * np.eye(2)),
    ]
)

# Sampling returns the latent component index alongside each draw.
values, labels = noise.sample(RandomStream(seed=0), 5)
for v, k in zip(values, labels):
    print(f"draw from component {k}: ({v[0]:+.2f}, {v[1]:+.2f})")

# Log-densities are safe even far into the tails (no underflow).
print("\nlog f at a cluster center:", noise.log_density(mu))
print("log f forty sigmas out:   ", noise.log_density(60.0 * np.ones(2)))

# Overall moments mix the component spread with the cluster separation.
mean, cov = noise.moments()
print("\noverall mean:", mean)
print("overall covariance:\n", cov)

# Push the mixture pair through y = H x + n: one output component per
# (signal, noise) component pair.
signal = GaussianMixture([GaussianComponent(1.0, np.zeros(2), np.eye(2))])
out = push_forward(2.0 * np.eye(2), signal, noise)
print("\noutput mixture components:", out.n_components)
for comp in out.components:
    print(f"  weight {comp.weight:.2f}, mean ({comp.mean[0]:+.1f}, {comp.mean[1]:+.1f}),"
          f" variance {comp.covariance[0, 0]:.1f}")
