"""Left- and right-invariant EKF steps on a matrix Lie group.

The filter state is a :class:`~iekf.cgd.ConcentratedGaussian` plus a time
stamp.  A full step is predict -> update -> reset.  Predict and update keep
the reference fixed in exponential coordinates; only reset moves it, and it
transports the covariance through the differential of exp.

Linearisations are taken from analytic providers on the model when given,
otherwise from central finite differences with step ``fd_step``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .cgd import ConcentratedGaussian, Handedness, symmetrize
from .errors import ContractError, CutLocusError, NumericError
from .lie import CUT_LOCUS_MARGIN, GroupElement, MatrixLieGroup


def _require_spd(m: np.ndarray, what: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.allclose(m, m.T):
        raise ContractError(f"{what} must be a symmetric square matrix")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise ContractError(f"{what} must be positive definite") from None

FD_STEP = 1e-6


class MeasurementKind(enum.Enum):
    GENERAL = "general"
    LEFT_INVARIANT = "left-invariant"


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Continuous dynamics ``dX = X (lam(X, v) dt + upsilon Q^1/2 dw)``.

    ``dlam(X, v)`` returns ``D_X lam . DL_X`` (the derivative of ``lam`` along
    left-trivialised perturbations).  ``phi(X, v, dt)`` is the discrete flow
    used by :func:`predict_discrete` (default ``exp(lam(X, v) dt)``) and
    ``dphi(X, v, dt)`` its left-trivialised derivative
    ``DL_{phi^-1} . D_X phi . DL_X``.
    """

    group: MatrixLieGroup
    lam: Callable[[GroupElement, np.ndarray], np.ndarray]
    upsilon: np.ndarray
    q: np.ndarray
    dlam: Optional[Callable[[GroupElement, np.ndarray], np.ndarray]] = None
    phi: Optional[Callable[[GroupElement, np.ndarray, float], GroupElement]] = None
    dphi: Optional[Callable[[GroupElement, np.ndarray, float], np.ndarray]] = None
    fd_step: float = FD_STEP

    def __post_init__(self):
        m = self.group.dim
        ups = np.atleast_2d(np.asarray(self.upsilon, dtype=float))
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        if ups.shape[0] != m or q.shape != (ups.shape[1], ups.shape[1]):
            raise ContractError(f"upsilon must be {m}xl and q lxl, got {ups.shape}, {q.shape}")
        _require_spd(q, "process noise q")
        object.__setattr__(self, "upsilon", ups)
        object.__setattr__(self, "q", q)

    @property
    def process_noise(self) -> np.ndarray:
        """``upsilon Q upsilon^T`` in algebra coordinates."""
        return self.upsilon @ self.q @ self.upsilon.T

    def lam_jacobian(self, X: GroupElement, v) -> np.ndarray:
        if self.dlam is not None:
            return np.asarray(self.dlam(X, v), dtype=float)
        return left_fd(lambda Y: self.lam(Y, v), X, self.fd_step)

    def flow(self, X: GroupElement, v, dt: float) -> GroupElement:
        if self.phi is not None:
            return self.phi(X, v, dt)
        return self.group.exp(np.asarray(self.lam(X, v)) * dt)

    def flow_jacobian(self, X: GroupElement, v, dt: float) -> np.ndarray:
        if self.dphi is not None:
            return np.asarray(self.dphi(X, v, dt), dtype=float)
        G = self.group
        if self.phi is None and self.dlam is not None:
            # exp(u + du) = exp(u) exp(J_L(u) du)
            u = np.asarray(self.lam(X, v)) * dt
            return G.jac_left(u) @ (dt * self.lam_jacobian(X, v))
        F0inv = self.flow(X, v, dt).inv()
        return left_fd(lambda Y: G.log(F0inv @ self.flow(Y, v, dt)), X, self.fd_step)


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Output ``y = h(X) + noise``; for left-invariant outputs ``h(X) = rho(X, y_ref)``.

    ``dh(X)`` returns ``D_X h . DL_X``; ``drho(X, z)`` returns ``D_z rho(X, z)``.
    """

    kind: MeasurementKind
    h: Callable[[GroupElement], np.ndarray]
    r: np.ndarray
    rho: Optional[Callable[[GroupElement, np.ndarray], np.ndarray]] = None
    y_ref: Optional[np.ndarray] = None
    dh: Optional[Callable[[GroupElement], np.ndarray]] = None
    drho: Optional[Callable[[GroupElement, np.ndarray], np.ndarray]] = None
    fd_step: float = FD_STEP

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.r, dtype=float))
        _require_spd(r, "measurement noise r")
        object.__setattr__(self, "r", r)
        if self.kind is MeasurementKind.LEFT_INVARIANT:
            if self.rho is None or self.y_ref is None:
                raise ContractError("left-invariant measurements need rho and y_ref")
            object.__setattr__(self, "y_ref", np.asarray(self.y_ref, dtype=float))

    def output_jacobian(self, X: GroupElement) -> np.ndarray:
        if self.dh is not None:
            return np.asarray(self.dh(X), dtype=float)
        return left_fd(self.h, X, self.fd_step)

    def action_jacobian(self, X: GroupElement, z) -> np.ndarray:
        if self.drho is not None:
            return np.asarray(self.drho(X, z), dtype=float)
        z = np.asarray(z, dtype=float)
        n, s = z.size, self.fd_step
        cols = [(self.rho(X, z + s * e) - self.rho(X, z - s * e)) / (2 * s) for e in np.eye(n)]
        return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class FilterState:
    dist: ConcentratedGaussian
    time: float = 0.0

    @property
    def handedness(self) -> Handedness:
        return self.dist.handedness

    @property
    def ref(self) -> GroupElement:
        return self.dist.ref

    @property
    def sigma(self) -> np.ndarray:
        return self.dist.sigma

    @property
    def mu(self) -> np.ndarray:
        return self.dist.mu


@dataclass(frozen=True)
class Hybrid:
    """Continuous-time predict integrated with ``substeps`` equal sub-steps."""

    substeps: int = 1
    scheme: str = "euler"


@dataclass(frozen=True)
class Discrete:
    """Predict with the discrete flow ``phi``."""


# ---------------------------------------------------------------------------
# Finite-difference helpers
# ---------------------------------------------------------------------------


def left_fd(f, X: GroupElement, step: float = FD_STEP) -> np.ndarray:
    """Columns ``d/ds f(X exp(s e_i))`` at ``s = 0`` by central differences."""
    G = X.group
    cols = []
    for e in np.eye(G.dim):
        fp = np.asarray(f(X @ G.exp(step * e)), dtype=float)
        fm = np.asarray(f(X @ G.exp(-step * e)), dtype=float)
        cols.append((fp - fm) / (2 * step))
    return np.column_stack(cols)


def right_fd(f, X: GroupElement, step: float = FD_STEP) -> np.ndarray:
    """Columns ``d/ds f(exp(s e_i) X)`` at ``s = 0`` by central differences."""
    G = X.group
    cols = []
    for e in np.eye(G.dim):
        fp = np.asarray(f(G.exp(step * e) @ X), dtype=float)
        fm = np.asarray(f(G.exp(-step * e) @ X), dtype=float)
        cols.append((fp - fm) / (2 * step))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# Linearisations
# ---------------------------------------------------------------------------


def a_left(model: SystemModel, X: GroupElement, v) -> np.ndarray:
    """``A_L = D_X lam . DL_X - ad_lam``."""
    return model.lam_jacobian(X, v) - model.group.ad(model.lam(X, v))


def a_right(model: SystemModel, X: GroupElement, v) -> np.ndarray:
    """``A_R = Ad_X . D_X lam . DR_X``; ``DR_X`` is ``Ad_{X^-1}`` in left-trivialised coordinates."""
    G = model.group
    return G.adjoint(X) @ model.lam_jacobian(X, v) @ G.adjoint(X.inv())


def b_left(model: SystemModel) -> np.ndarray:
    return model.upsilon


def b_right(model: SystemModel, X: GroupElement) -> np.ndarray:
    return model.group.adjoint(X) @ model.upsilon


def discrete_a_left(model: SystemModel, X: GroupElement, v, dt: float) -> np.ndarray:
    """``DL_{phi^-1} D_X phi DL_X + Ad_{phi^-1}``."""
    G = model.group
    return model.flow_jacobian(X, v, dt) + G.adjoint(model.flow(X, v, dt).inv())


def discrete_a_right(model: SystemModel, X: GroupElement, v, dt: float) -> np.ndarray:
    """``I + Ad_{X phi} (DL_{phi^-1} D_X phi DL_X) Ad_{X^-1}``."""
    G = model.group
    Xm = X @ model.flow(X, v, dt)
    return np.eye(G.dim) + G.adjoint(Xm) @ model.flow_jacobian(X, v, dt) @ G.adjoint(X.inv())


def discrete_b_left(model: SystemModel) -> np.ndarray:
    return np.eye(model.group.dim)


def discrete_b_right(model: SystemModel, X_pred: GroupElement) -> np.ndarray:
    return model.group.adjoint(X_pred)


def c_general(model: MeasurementModel, X: GroupElement, handedness: Handedness) -> np.ndarray:
    """``D h . DL_X`` (left) or ``D h . DR_X`` (right)."""
    C = model.output_jacobian(X)
    if handedness is Handedness.RIGHT:
        C = C @ X.group.adjoint(X.inv())
    return C


def c_left_invariant(model: MeasurementModel, X: GroupElement, handedness: Handedness) -> np.ndarray:
    """``D_X|_I h`` (left) or ``D_X|_I h . Ad_{X^-1}`` (right)."""
    C = model.output_jacobian(X.group.identity())
    if handedness is Handedness.RIGHT:
        C = C @ X.group.adjoint(X.inv())
    return C


def d_left_invariant(model: MeasurementModel, X: GroupElement) -> np.ndarray:
    """``D_z rho(X^-1, z)`` at ``z = h(X)``."""
    return model.action_jacobian(X.inv(), model.h(X))


def reset_jacobian(group: MatrixLieGroup, mu, handedness: Handedness) -> np.ndarray:
    if handedness is Handedness.LEFT:
        return group.jac_left(mu)
    return group.jac_right(mu)


# ---------------------------------------------------------------------------
# Filter steps
# ---------------------------------------------------------------------------


def _require_zero_offset(s: FilterState) -> None:
    if np.any(s.mu != 0.0):
        raise ContractError("predict/update require a zero offset; run reset first")


def _finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite filter quantity")


def _riccati_rhs(model: SystemModel, X: GroupElement, v, S: np.ndarray, hand: Handedness):
    if hand is Handedness.LEFT:
        A, B = a_left(model, X, v), b_left(model)
    else:
        A, B = a_right(model, X, v), b_right(model, X)
    AS = A @ S
    return AS + AS.T + B @ model.q @ B.T


def predict_hybrid(
    s: FilterState,
    model: SystemModel,
    v,
    dt: float,
    substeps: int = 1,
    scheme: str = "euler",
) -> FilterState:
    """Integrate reference and Riccati equation over ``dt`` with held input ``v``.

    Each sub-step moves the reference by ``X exp(lam(X, v) delta)``.  The
    covariance uses explicit Euler (``scheme="euler"``), the explicit midpoint
    rule or classical RK4, with stage references on the geometric Euler path.
    """
    _require_zero_offset(s)
    if substeps < 1:
        raise ContractError("substeps must be >= 1")
    if scheme not in ("euler", "midpoint", "rk4"):
        raise ContractError(f"unknown integration scheme {scheme!r}")
    G = model.group
    hand = s.handedness
    v = np.asarray(v, dtype=float)
    X, S = s.ref, np.array(s.sigma)
    h = dt / substeps
    for _ in range(substeps):
        lam = np.asarray(model.lam(X, v), dtype=float)
        if scheme == "euler":
            S = S + h * _riccati_rhs(model, X, v, S, hand)
        else:
            Xm = X @ G.exp(0.5 * h * lam)
            k1 = _riccati_rhs(model, X, v, S, hand)
            k2 = _riccati_rhs(model, Xm, v, S + 0.5 * h * k1, hand)
            if scheme == "midpoint":
                S = S + h * k2
            else:
                X1 = X @ G.exp(h * lam)
                k3 = _riccati_rhs(model, Xm, v, S + 0.5 * h * k2, hand)
                k4 = _riccati_rhs(model, X1, v, S + h * k3, hand)
                S = S + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        S = symmetrize(S)
        X = X @ G.exp(h * lam)
        _finite(S, X.matrix, X.euclidean)
    return FilterState(s.dist.replace(ref=X, sigma=S), s.time + dt)


def predict_discrete(s: FilterState, model: SystemModel, v, dt: float) -> FilterState:
    """Discrete predict for ``X+ = X phi(X, v) exp(w)``, ``w ~ N(0, dt upsilon Q upsilon^T)``."""
    _require_zero_offset(s)
    X = s.ref
    v = np.asarray(v, dtype=float)
    Xm = X @ model.flow(X, v, dt)
    Qd = dt * model.process_noise
    if s.handedness is Handedness.LEFT:
        A, B = discrete_a_left(model, X, v, dt), discrete_b_left(model)
    else:
        A, B = discrete_a_right(model, X, v, dt), discrete_b_right(model, Xm)
    S = symmetrize(A @ s.sigma @ A.T + B @ Qd @ B.T)
    _finite(S, Xm.matrix, Xm.euclidean)
    return FilterState(s.dist.replace(ref=Xm, sigma=S), s.time + dt)


def _kalman(s: FilterState, C, innovation, noise_cov, joseph: bool) -> FilterState:
    P = s.sigma
    S = C @ P @ C.T + noise_cov
    try:
        K = np.linalg.solve(S, C @ P).T
    except np.linalg.LinAlgError as exc:
        raise NumericError("innovation covariance is singular") from exc
    IKC = np.eye(P.shape[0]) - K @ C
    if joseph:
        P_post = IKC @ P @ IKC.T + K @ noise_cov @ K.T
    else:
        P_post = IKC @ P
    mu = K @ innovation
    P_post = symmetrize(P_post)
    _finite(mu, P_post)
    return FilterState(s.dist.replace(mu=mu, sigma=P_post), s.time)


def update_general(
    s: FilterState, y, model: MeasurementModel, joseph: bool = False
) -> FilterState:
    """Kalman update on ``y = h(X) + noise`` with the handedness-matching ``C``."""
    _require_zero_offset(s)
    C = c_general(model, s.ref, s.handedness)
    innovation = np.asarray(y, dtype=float) - model.h(s.ref)
    return _kalman(s, C, innovation, model.r, joseph)


def update_left_invariant(
    s: FilterState, y, model: MeasurementModel, joseph: bool = False
) -> FilterState:
    """Update with the pseudo-measurement ``d = rho(X^-1, y)`` against ``y_ref``."""
    _require_zero_offset(s)
    if model.kind is not MeasurementKind.LEFT_INVARIANT:
        raise ContractError("update_left_invariant needs a left-invariant measurement model")
    X = s.ref
    d = model.rho(X.inv(), np.asarray(y, dtype=float))
    C = c_left_invariant(model, X, s.handedness)
    D = d_left_invariant(model, X)
    return _kalman(s, C, d - model.y_ref, D @ model.r @ D.T, joseph)


def update(s: FilterState, y, model: MeasurementModel, joseph: bool = False) -> FilterState:
    if model.kind is MeasurementKind.LEFT_INVARIANT:
        return update_left_invariant(s, y, model, joseph)
    return update_general(s, y, model, joseph)


def _check_offset_domain(group: MatrixLieGroup, mu: np.ndarray) -> None:
    if group.factor is not None and np.linalg.norm(mu[:3]) >= np.pi - CUT_LOCUS_MARGIN:
        raise CutLocusError("offset rotation is outside the injectivity radius of exp")


def reset(s: FilterState) -> FilterState:
    """Move the reference onto the offset and transport the covariance with ``J``."""
    G = s.ref.group
    mu = s.mu
    if not np.any(mu):
        return s
    _check_offset_domain(G, mu)
    hand = s.handedness
    X = s.ref @ G.exp(mu) if hand is Handedness.LEFT else G.exp(mu) @ s.ref
    J = reset_jacobian(G, mu, hand)
    S = symmetrize(J @ s.sigma @ J.T)
    return FilterState(s.dist.replace(mu=np.zeros(G.dim), ref=X, sigma=S), s.time)


def move_reference(s: FilterState) -> FilterState:
    """Reference update without covariance transport (the classical no-reset IEKF)."""
    G = s.ref.group
    mu = s.mu
    if not np.any(mu):
        return s
    _check_offset_domain(G, mu)
    X = s.ref @ G.exp(mu) if s.handedness is Handedness.LEFT else G.exp(mu) @ s.ref
    return FilterState(s.dist.replace(mu=np.zeros(G.dim), ref=X), s.time)


def step(
    s: FilterState,
    system: SystemModel,
    inputs: Sequence[tuple[np.ndarray, float]],
    y,
    measurement: MeasurementModel,
    mode: Hybrid | Discrete | None = None,
    reset_enabled: bool = True,
    joseph: bool = False,
) -> FilterState:
    """Predict over every ``(v, dt)`` in ``inputs``, update with ``y`` (if given), then reset."""
    mode = Hybrid() if mode is None else mode
    for v, dt in inputs:
        if isinstance(mode, Discrete):
            s = predict_discrete(s, system, v, dt)
        else:
            s = predict_hybrid(s, system, v, dt, mode.substeps, mode.scheme)
    if y is None:
        return s
    s = update(s, y, measurement, joseph)
    return reset(s) if reset_enabled else move_reference(s)


def initial_state(
    ref: GroupElement, sigma: np.ndarray, handedness: Handedness, time: float = 0.0
) -> FilterState:
    """Zero-offset filter state."""
    dist = ConcentratedGaussian(handedness, np.zeros(ref.group.dim), ref, sigma)
    dist.validate()
    return FilterState(dist, time)
