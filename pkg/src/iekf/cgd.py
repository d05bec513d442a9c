"""Left and right concentrated Gaussian distributions on a matrix Lie group.

A left CGD with reference ``X``, offset ``mu`` and covariance ``Sigma`` is the
law of ``X exp(e)`` with ``e ~ N(mu, Sigma)``; the right CGD is the law of
``exp(e) X``.  Both carry the same information when
``mu_R = Ad_X mu_L`` and ``Sigma_R = Ad_X Sigma_L Ad_X^T``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import eigh

from .errors import ContractError
from .lie import GroupElement, MatrixLieGroup



class Handedness(enum.Enum):
    LEFT = "L"
    RIGHT = "R"

    @property
    def other(self) -> "Handedness":
        return Handedness.RIGHT if self is Handedness.LEFT else Handedness.LEFT


def symmetrize(S: np.ndarray) -> np.ndarray:
    return 0.5 * (S + S.T)


def check_spd(S: np.ndarray, name: str = "covariance", sym_tol: float = 1e-12) -> None:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ContractError(f"{name} must be square, got shape {S.shape}")
    scale = max(np.abs(S).max(), np.finfo(float).tiny)
    if np.abs(S - S.T).max() > sym_tol * scale:
        raise ContractError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise ContractError(f"{name} is not positive definite") from exc


@dataclass(frozen=True, eq=False)
class ConcentratedGaussian:
    """Filter information state ``(mu, ref, sigma)`` with a handedness flag."""

    handedness: Handedness
    mu: np.ndarray
    ref: GroupElement
    sigma: np.ndarray

    def __post_init__(self):
        m = self.ref.group.dim
        mu = np.array(self.mu, dtype=float)
        sigma = np.array(self.sigma, dtype=float)
        if mu.shape != (m,) or sigma.shape != (m, m):
            raise ContractError(
                f"mu/sigma must have shapes ({m},) and ({m},{m}) for {self.ref.group!r}, "
                f"got {mu.shape} and {sigma.shape}"
            )
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def group(self) -> MatrixLieGroup:
        return self.ref.group

    def validate(self) -> None:
        check_spd(self.sigma)

    def error(self, g: GroupElement) -> np.ndarray:
        """Exponential coordinates of ``g`` relative to the reference."""
        G = self.group
        if self.handedness is Handedness.LEFT:
            return G.log(self.ref.inv() @ g)
        return G.log(g @ self.ref.inv())

    def replace(self, **changes) -> "ConcentratedGaussian":
        return replace(self, **changes)


def log_likelihood(d: ConcentratedGaussian, g: GroupElement) -> float:
    """Half squared Mahalanobis distance of ``log(.) - mu``; normaliser omitted."""
    r = d.error(g) - d.mu
    return 0.5 * float(r @ np.linalg.solve(d.sigma, r))


def sample(d: ConcentratedGaussian, rng_seed: int, n: int) -> list[GroupElement]:
    rng = np.random.default_rng(rng_seed)
    G = d.group
    L = np.linalg.cholesky(d.sigma)
    eps = d.mu + rng.standard_normal((n, G.dim)) @ L.T
    if d.handedness is Handedness.LEFT:
        return [d.ref @ G.exp(e) for e in eps]
    return [G.exp(e) @ d.ref for e in eps]


def convert_handedness(d: ConcentratedGaussian) -> ConcentratedGaussian:
    """The same density expressed with the opposite handedness."""
    G = d.group
    if d.handedness is Handedness.LEFT:
        Ad = G.adjoint(d.ref)
    else:
        Ad = G.adjoint(d.ref.inv())
    return ConcentratedGaussian(
        d.handedness.other, Ad @ d.mu, d.ref, symmetrize(Ad @ d.sigma @ Ad.T)
    )


def airm(A: np.ndarray, B: np.ndarray) -> float:
    """Affine-invariant Riemannian distance ``||log(A^-1/2 B A^-1/2)||_F``.

    Uses the generalized eigenvalues of ``(B, A)``, so no absolute
    eigenvalue floor is involved and tiny covariances are handled exactly.
    """
    try:
        lam = eigh(symmetrize(B), symmetrize(A), eigvals_only=True)
    except LinAlgError:
        raise ContractError("AIRM needs symmetric positive definite matrices") from None
    if lam.min() <= 0.0:
        raise ContractError("AIRM needs symmetric positive definite matrices")
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))


def equivalence_gap(
    left: ConcentratedGaussian, right: ConcentratedGaussian
) -> tuple[float, float, float]:
    """``(ref_gap, mu_gap, airm)`` between a left and a right CGD."""
    if left.handedness is not Handedness.LEFT or right.handedness is not Handedness.RIGHT:
        raise ContractError("equivalence_gap expects (left, right) distributions")
    if left.group != right.group:
        raise ContractError("distributions live on different groups")
    check_spd(left.sigma, "left covariance")
    check_spd(right.sigma, "right covariance")
    G = left.group
    ref_gap = float(np.linalg.norm(G.log(left.ref.inv() @ right.ref)))
    mu_gap = float(np.linalg.norm(G.adjoint(left.ref) @ left.mu - right.mu))
    Ad = G.adjoint(right.ref.inv())
    return ref_gap, mu_gap, airm(left.sigma, Ad @ right.sigma @ Ad.T)
