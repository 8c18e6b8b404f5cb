"""Feasible sets for the design parameter, with projections and chain rules.

Each constraint owns three things: the projection onto its feasible set,
a membership residual, and the mapping from the design parameter to the
transfer matrix H (identity for plain constraints, B F for a factored
precoder, S^T kron I_m for a pilot).  The optimizer only ever talks to
this interface.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .gradients import pilot_chain, precoder_chain

__all__ = [
    "Constraint",
    "Unconstrained",
    "Orthogonal",
    "FrobeniusPower",
    "FactoredPrecoder",
    "PilotStructure",
]


class Constraint(ABC):
    """A feasible set over the design parameter matrix."""

    @abstractmethod
    def project(self, candidate: NDArray) -> NDArray:
        """Nearest feasible matrix to ``candidate``."""

    @abstractmethod
    def residual(self, param: NDArray) -> float:
        """How far ``param`` is from membership (zero when feasible)."""

    def to_transfer(self, param: NDArray) -> NDArray:
        """Transfer matrix H realized by this design parameter."""
        return np.asarray(param, dtype=float)

    def gradient_to_param(self, grad_transfer: NDArray, param: NDArray) -> NDArray:
        """Pull a transfer-space gradient back to the parameter space."""
        return np.asarray(grad_transfer, dtype=float)


@dataclass(frozen=True)
class Unconstrained(Constraint):
    def project(self, candidate: NDArray) -> NDArray:
        return np.asarray(candidate, dtype=float).copy()

    def residual(self, param: NDArray) -> float:
        return 0.0


@dataclass(frozen=True)
class Orthogonal(Constraint):
    """Square matrices with orthonormal columns (the full orthogonal group).

    Projection is the nearest-orthogonal polar factor from the SVD,
    W = U D V^T -> U V^T.  Reflections are admitted.  For rank-deficient
    candidates the SVD's factor is accepted as computed; the minimizer is
    not unique there and no canonicalization is attempted.
    """

    def project(self, candidate: NDArray) -> NDArray:
        w = np.asarray(candidate, dtype=float)
        if w.shape[0] != w.shape[1]:
            raise ValueError("orthogonal constraint needs a square matrix")
        u, _, vt = np.linalg.svd(w)
        return u @ vt

    def residual(self, param: NDArray) -> float:
        param = np.asarray(param, dtype=float)
        return float(np.linalg.norm(param.T @ param - np.eye(param.shape[1])))


@dataclass(frozen=True)
class FrobeniusPower(Constraint):
    """Matrices with squared Frobenius norm exactly ``power``.

    Projection rescales radially: every entry grows when the candidate is
    under budget and shrinks when it is over.  The zero matrix has no
    defined direction and is rejected.
    """

    power: float

    def __post_init__(self):
        if self.power <= 0:
            raise ValueError("power must be positive")

    def project(self, candidate: NDArray) -> NDArray:
        w = np.asarray(candidate, dtype=float)
        current = float(np.sum(w * w))
        if current == 0.0:
            raise ValueError("cannot project the zero matrix onto a power sphere")
        return np.sqrt(self.power / current) * w

    def residual(self, param: NDArray) -> float:
        param = np.asarray(param, dtype=float)
        return float(abs(np.sum(param * param) - self.power))


@dataclass(frozen=True)
class FactoredPrecoder(Constraint):
    """Design parameter F of H = B F, with an inner constraint on F."""

    channel: NDArray
    inner: Constraint

    def __post_init__(self):
        object.__setattr__(self, "channel", np.asarray(self.channel, dtype=float))

    def project(self, candidate: NDArray) -> NDArray:
        return self.inner.project(candidate)

    def residual(self, param: NDArray) -> float:
        return self.inner.residual(param)

    def to_transfer(self, param: NDArray) -> NDArray:
        return self.channel @ np.asarray(param, dtype=float)

    def gradient_to_param(self, grad_transfer: NDArray, param: NDArray) -> NDArray:
        return precoder_chain(grad_transfer, self.channel)


@dataclass(frozen=True)
class PilotStructure(Constraint):
    """Pilot matrix S of H = S^T kron I_m under a total-power budget."""

    receive_dim: int
    s_shape: tuple[int, int]
    power: float
    _sphere: FrobeniusPower = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.receive_dim < 1:
            raise ValueError("receive dimension must be positive")
        n, r = self.s_shape
        if n < 1 or r < 1:
            raise ValueError(f"invalid pilot shape {self.s_shape}")
        object.__setattr__(self, "s_shape", (int(n), int(r)))
        object.__setattr__(self, "_sphere", FrobeniusPower(self.power))

    def project(self, candidate: NDArray) -> NDArray:
        candidate = np.asarray(candidate, dtype=float)
        if candidate.shape != self.s_shape:
            raise ValueError(f"pilot shape {candidate.shape} != {self.s_shape}")
        return self._sphere.project(candidate)

    def residual(self, param: NDArray) -> float:
        return self._sphere.residual(param)

    def to_transfer(self, param: NDArray) -> NDArray:
        param = np.asarray(param, dtype=float)
        return np.kron(param.T, np.eye(self.receive_dim))

    def gradient_to_param(self, grad_transfer: NDArray, param: NDArray) -> NDArray:
        return pilot_chain(grad_transfer, self.receive_dim, self.s_shape)
