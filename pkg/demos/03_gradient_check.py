"""The closed-form stochastic gradient against finite differences.

The design objective for a single input pair (x, n) is the squared norm
of the posterior-mean estimate at y = H x + n.  Its gradient with respect
to H has a closed form; here it is checked entry by entry against central
differences, and batch averaging is shown to cut the sampling noise.
"""

import numpy as np

from gmdesign import (
    GaussianComponent,
    GaussianMixture,
    RandomStream,
    batch_gradient,
    build_model,
    finite_difference_gradient,
    stochastic_gradient,
)

rng = RandomStream(seed=2).generator()

signal = GaussianMixture(
    [
        GaussianComponent(0.5, [-1.0, 0.5], 0.3 * np.eye(2)),
        GaussianComponent(0.5, [1.0, -0.5], 0.3 * np.eye(2)),
    ]
)
noise = GaussianMixture([GaussianComponent(1.0, np.zeros(2), 0.4 * np.eye(2))])
transfer = rng.standard_normal((2, 2))
model = build_model(transfer, signal, noise)

x, _ = signal.sample(rng)
n, _ = noise.sample(rng)

closed = stochastic_gradient(model, x, n)
fd = finite_difference_gradient(lambda p: build_model(p, signal, noise), transfer, x, n)

print("closed form:\n", closed)
print("central differences:\n", fd)
print("relative deviation:", np.linalg.norm(closed - fd) / np.linalg.norm(fd))

# Averaging gradients over a batch of input pairs reduces the spread of
# the update direction without changing its mean.
for size in (1, 16, 256):
    draws = []
    for _ in range(200):
        xs, _ = signal.sample(rng, size)
        ns, _ = noise.sample(rng, size)
        draws.append(batch_gradient(model, (xs, ns)))
    spread = np.stack(draws).std(axis=0).sum()
    print(f"batch {size:>3}: update-direction spread {spread:.4f}")
