"""Concrete matrix Lie groups: SO(3), SE_2(3), SE_2(3) x R^6 and R^n.

Every group here is modelled as a product ``M x R^k`` of an optional matrix
factor ``M`` (SO(3) or SE_2(3)) and a Euclidean factor of dimension ``k``.
Algebra coordinates list the matrix-factor coordinates first, followed by
the Euclidean coordinates.

Coordinate conventions
----------------------
SO(3)
    ``u = omega`` with ``wedge(u) = skew(omega)``.
SE_2(3)
    ``u = (omega, nu, rho)``; the 5x5 matrix is ``[[R, v, p], [0, 1, 0], [0, 0, 1]]``
    so ``nu`` drives the velocity column and ``rho`` the position column.
SE_2(3) x R^6
    ``u = (omega, nu, rho, b_omega, b_a)``.

The Jacobians follow trivialisation names: ``jac_left(mu)`` is the
left-trivialised differential of exp, ``log(exp(mu)^-1 exp(mu + e)) ~ J e``,
which the robotics literature usually calls the *right* Jacobian.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, CutLocusError

SMALL_ANGLE = 1e-6
CUT_LOCUS_MARGIN = 1e-9
_NEAR_PI = 1e-2
_SERIES_TOL = 1e-14
_SERIES_MAX_TERMS = 200


# ---------------------------------------------------------------------------
# SO(3) kernels on plain arrays
# ---------------------------------------------------------------------------


def skew(w: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]], dtype=float
    )


def unskew(W: np.ndarray) -> np.ndarray:
    return np.array([W[2, 1], W[0, 2], W[1, 0]], dtype=float)


def _so3_coeffs(theta: float) -> tuple[float, float, float]:
    """Return ``sin(t)/t``, ``(1-cos t)/t^2`` and ``(t - sin t)/t^3``."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    s = math.sin(theta)
    half = math.sin(0.5 * theta)
    return s / theta, 2.0 * half * half / theta**2, (theta - s) / theta**3


def so3_exp(w: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(w))
    a, b, _ = _so3_coeffs(theta)
    W = skew(w)
    return np.eye(3) + a * W + b * (W @ W)


def so3_angle(R: np.ndarray) -> float:
    """Rotation angle of ``R`` in ``[0, pi]`` (atan2 form, accurate at both ends)."""
    s = 0.5 * np.linalg.norm(unskew(R - R.T))
    c = 0.5 * (np.trace(R) - 1.0)
    return math.atan2(s, c)


def so3_log(R: np.ndarray) -> np.ndarray:
    theta = so3_angle(R)
    if theta > math.pi - CUT_LOCUS_MARGIN:
        raise CutLocusError(f"rotation angle {theta!r} is on the cut locus of exp")
    if theta < SMALL_ANGLE:
        return unskew(R - R.T) * (0.5 + theta * theta / 12.0)
    if theta > math.pi - _NEAR_PI:
        # skew part is ill-conditioned here; recover the axis from the symmetric part
        B = 0.5 * (R + R.T) - math.cos(theta) * np.eye(3)
        k = int(np.argmax(np.diag(B)))
        axis = B[:, k] / math.sqrt(B[k, k] * (1.0 - math.cos(theta)))
        if axis @ unskew(R - R.T) < 0.0:
            axis = -axis
        return theta * axis / np.linalg.norm(axis)
    return unskew(R - R.T) * (0.5 * theta / math.sin(theta))


def so3_jac_left_literature(w: np.ndarray) -> np.ndarray:
    """``J_l(w) = sum_k skew(w)^k / (k+1)!`` (right-trivialised differential)."""
    theta = float(np.linalg.norm(w))
    _, b, c = _so3_coeffs(theta)
    W = skew(w)
    return np.eye(3) + b * W + c * (W @ W)


def so3_jac_right_literature(w: np.ndarray) -> np.ndarray:
    """``J_r(w) = J_l(-w)`` (left-trivialised differential)."""
    return so3_jac_left_literature(-np.asarray(w, dtype=float))


def so3_jac_left_literature_inv(w: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(w))
    W = skew(w)
    if theta < SMALL_ANGLE:
        d = 1.0 / 12.0 + theta * theta / 720.0
    else:
        d = 1.0 / theta**2 - (1.0 + math.cos(theta)) / (2.0 * theta * math.sin(theta))
    return np.eye(3) - 0.5 * W + d * (W @ W)


def _exp_series_jacobian(ad: np.ndarray, sign: float) -> np.ndarray:
    """``sum_k sign^k ad^k / (k+1)!`` truncated once a term drops below 1e-14."""
    n = ad.shape[0]
    out = np.eye(n)
    term = np.eye(n)
    for k in range(1, _SERIES_MAX_TERMS):
        term = (sign / (k + 1)) * (term @ ad)
        out += term
        if np.abs(term).max() < _SERIES_TOL:
            break
    return out


# ---------------------------------------------------------------------------
# Groups and elements
# ---------------------------------------------------------------------------


class GroupTag(enum.Enum):
    SO3 = "SO3"
    SE23 = "SE23"
    SE23_R6 = "SE23xR6"
    EUCLIDEAN = "Rn"


class MatrixLieGroup:
    """A group ``M x R^k`` with ``M`` in {trivial, SO(3), SE_2(3)}.

    Instances are stateless; use the module singletons :data:`SO3`,
    :data:`SE23`, :data:`SE23_R6` or :func:`euclidean`.
    """

    def __init__(self, tag: GroupTag, factor: str | None, k: int):
        self.tag = tag
        self.factor = factor
        self.k = k
        self.n = {None: 0, "SO3": 3, "SE23": 5}[factor]
        self.matrix_dim = {None: 0, "SO3": 3, "SE23": 9}[factor]
        self.dim = self.matrix_dim + k

    def __repr__(self) -> str:
        if self.tag is GroupTag.EUCLIDEAN:
            return f"R^{self.k}"
        return self.tag.value

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MatrixLieGroup)
            and self.tag == other.tag
            and self.k == other.k
        )

    def __hash__(self) -> int:
        return hash((self.tag, self.k))

    # -- construction -----------------------------------------------------

    def element(self, matrix=None, euclidean=None, check: bool = True) -> "GroupElement":
        M = np.eye(self.n) if matrix is None else np.array(matrix, dtype=float)
        e = np.zeros(self.k) if euclidean is None else np.array(euclidean, dtype=float)
        g = GroupElement(self, M, e)
        if check:
            self.validate(g)
        return g

    def identity(self) -> "GroupElement":
        return GroupElement(self, np.eye(self.n), np.zeros(self.k))

    def validate(self, g: "GroupElement", tol: float = 1e-12) -> None:
        M, e = g.matrix, g.euclidean
        if M.shape != (self.n, self.n) or e.shape != (self.k,):
            raise ContractError(
                f"{self!r} element needs a {self.n}x{self.n} matrix and length-{self.k} "
                f"vector, got {M.shape} and {e.shape}"
            )
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(e))):
            raise ContractError("group element has non-finite entries")
        if self.factor is None:
            return
        R = M[:3, :3]
        if np.linalg.norm(R.T @ R - np.eye(3)) > tol or abs(np.linalg.det(R) - 1.0) > tol:
            raise ContractError("rotation block is not in SO(3)")
        if self.factor == "SE23" and not np.array_equal(M[3:, :], np.eye(5)[3:, :]):
            raise ContractError("last two rows of an SE_2(3) matrix must be [0 I]")

    def _check(self, g: "GroupElement") -> None:
        if g.group != self:
            raise ContractError(f"expected an element of {self!r}, got {g.group!r}")

    def _coords(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ContractError(f"{self!r} algebra coordinates need length {self.dim}, got {u.shape}")
        return u

    # -- group structure --------------------------------------------------

    def compose(self, a: "GroupElement", b: "GroupElement") -> "GroupElement":
        if a.group != b.group:
            raise ContractError(f"cannot compose {a.group!r} with {b.group!r}")
        self._check(a)
        return GroupElement(self, a.matrix @ b.matrix, a.euclidean + b.euclidean)

    def inverse(self, g: "GroupElement") -> "GroupElement":
        self._check(g)
        M = g.matrix
        if self.factor == "SO3":
            Mi = M.T.copy()
        elif self.factor == "SE23":
            Rt = M[:3, :3].T
            Mi = np.eye(5)
            Mi[:3, :3] = Rt
            Mi[:3, 3] = -Rt @ M[:3, 3]
            Mi[:3, 4] = -Rt @ M[:3, 4]
        else:
            Mi = np.eye(0)
        return GroupElement(self, Mi, -g.euclidean)

    # -- algebra ----------------------------------------------------------

    def wedge(self, u) -> np.ndarray:
        """Algebra element as a matrix in the embedding used by :meth:`GroupElement.as_matrix`."""
        u = self._coords(u)
        W = np.zeros((self.n, self.n))
        if self.factor is not None:
            W[:3, :3] = skew(u[:3])
        if self.factor == "SE23":
            W[:3, 3] = u[3:6]
            W[:3, 4] = u[6:9]
        if self.k == 0:
            return W
        E = np.zeros((self.k + 1, self.k + 1))
        E[: self.k, self.k] = u[self.matrix_dim :]
        return _blockdiag(W, E)

    def vee(self, W: np.ndarray) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        out = np.empty(self.dim)
        if self.factor is not None:
            out[:3] = unskew(W[:3, :3])
        if self.factor == "SE23":
            out[3:6] = W[:3, 3]
            out[6:9] = W[:3, 4]
        if self.k:
            out[self.matrix_dim :] = W[self.n : self.n + self.k, self.n + self.k]
        return out

    def exp(self, u) -> "GroupElement":
        u = self._coords(u)
        if self.factor == "SO3":
            M = so3_exp(u[:3])
        elif self.factor == "SE23":
            V = so3_jac_left_literature(u[:3])
            M = np.eye(5)
            M[:3, :3] = so3_exp(u[:3])
            M[:3, 3] = V @ u[3:6]
            M[:3, 4] = V @ u[6:9]
        else:
            M = np.eye(0)
        return GroupElement(self, M, u[self.matrix_dim :].copy())

    def log(self, g: "GroupElement") -> np.ndarray:
        self._check(g)
        out = np.empty(self.dim)
        M = g.matrix
        if self.factor is not None:
            w = so3_log(M[:3, :3])
            out[:3] = w
            if self.factor == "SE23":
                Vi = so3_jac_left_literature_inv(w)
                out[3:6] = Vi @ M[:3, 3]
                out[6:9] = Vi @ M[:3, 4]
        out[self.matrix_dim :] = g.euclidean
        return out

    def adjoint(self, g: "GroupElement") -> np.ndarray:
        """``Ad_g`` in coordinates: ``Ad_g u = vee(g wedge(u) g^-1)``."""
        self._check(g)
        A = np.eye(self.dim)
        M = g.matrix
        if self.factor is not None:
            R = M[:3, :3]
            A[:3, :3] = R
        if self.factor == "SE23":
            A[3:6, 3:6] = R
            A[6:9, 6:9] = R
            A[3:6, :3] = skew(M[:3, 3]) @ R
            A[6:9, :3] = skew(M[:3, 4]) @ R
        return A

    def ad(self, u) -> np.ndarray:
        """``ad_u`` in coordinates: ``ad_u v = vee([wedge(u), wedge(v)])``."""
        u = self._coords(u)
        A = np.zeros((self.dim, self.dim))
        if self.factor is not None:
            Wx = skew(u[:3])
            A[:3, :3] = Wx
        if self.factor == "SE23":
            A[3:6, 3:6] = Wx
            A[6:9, 6:9] = Wx
            A[3:6, :3] = skew(u[3:6])
            A[6:9, :3] = skew(u[6:9])
        return A

    def jac_left(self, mu) -> np.ndarray:
        """Left-trivialised differential of exp at ``mu``."""
        return self._jacobian(mu, -1.0)

    def jac_right(self, mu) -> np.ndarray:
        """Right-trivialised differential of exp at ``mu``."""
        return self._jacobian(mu, 1.0)

    def _jacobian(self, mu, sign: float) -> np.ndarray:
        mu = self._coords(mu)
        J = np.eye(self.dim)
        if self.factor == "SO3":
            J[:3, :3] = so3_jac_left_literature(sign * mu[:3])
        elif self.factor == "SE23":
            md = self.matrix_dim
            J[:md, :md] = _exp_series_jacobian(self.ad(mu)[:md, :md], sign)
        return J


def _blockdiag(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    out = np.zeros((A.shape[0] + B.shape[0], A.shape[1] + B.shape[1]))
    out[: A.shape[0], : A.shape[1]] = A
    out[A.shape[0] :, A.shape[1] :] = B
    return out


SO3 = MatrixLieGroup(GroupTag.SO3, "SO3", 0)
SE23 = MatrixLieGroup(GroupTag.SE23, "SE23", 0)
SE23_R6 = MatrixLieGroup(GroupTag.SE23_R6, "SE23", 6)


def euclidean(n: int) -> MatrixLieGroup:
    """The additive group R^n."""
    if n < 1:
        raise ContractError("R^n needs n >= 1")
    return MatrixLieGroup(GroupTag.EUCLIDEAN, None, n)


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Immutable group element: matrix factor plus Euclidean factor."""

    group: MatrixLieGroup
    matrix: np.ndarray
    euclidean: np.ndarray

    def __post_init__(self):
        self.matrix.setflags(write=False)
        self.euclidean.setflags(write=False)

    @property
    def group_tag(self) -> GroupTag:
        return self.group.tag

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return self.group.compose(self, other)

    def inv(self) -> "GroupElement":
        return self.group.inverse(self)

    def as_matrix(self) -> np.ndarray:
        """Single matrix embedding; the R^k factor appears as ``[[I, b], [0, 1]]``."""
        if self.group.k == 0:
            return np.array(self.matrix)
        T = np.eye(self.group.k + 1)
        T[: self.group.k, self.group.k] = self.euclidean
        return _blockdiag(self.matrix, T)

    @property
    def R(self) -> np.ndarray:
        return self.matrix[:3, :3]

    def distance_to(self, other: "GroupElement") -> float:
        return float(np.linalg.norm(self.group.log(self.inv() @ other)))


@dataclass(frozen=True, eq=False)
class AlgebraVector:
    group: MatrixLieGroup
    coords: np.ndarray

    def __post_init__(self):
        c = self.group._coords(self.coords).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def group_tag(self) -> GroupTag:
        return self.group.tag


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------


def compose(a: GroupElement, b: GroupElement) -> GroupElement:
    return a.group.compose(a, b)


def inverse(g: GroupElement) -> GroupElement:
    return g.group.inverse(g)


def exp(u: AlgebraVector) -> GroupElement:
    return u.group.exp(u.coords)


def log(g: GroupElement) -> AlgebraVector:
    return AlgebraVector(g.group, g.group.log(g))


def wedge(u: AlgebraVector) -> np.ndarray:
    return u.group.wedge(u.coords)


def vee(group: MatrixLieGroup, W: np.ndarray) -> AlgebraVector:
    return AlgebraVector(group, group.vee(W))


def adjoint_matrix(g: GroupElement) -> np.ndarray:
    return g.group.adjoint(g)


def little_adjoint(u: AlgebraVector) -> np.ndarray:
    return u.group.ad(u.coords)


def exp_jacobian_left(mu: AlgebraVector) -> np.ndarray:
    return mu.group.jac_left(mu.coords)


def exp_jacobian_right(mu: AlgebraVector) -> np.ndarray:
    return mu.group.jac_right(mu.coords)
