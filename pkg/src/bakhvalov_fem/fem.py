"""Bilinear (Q1) finite elements on a tensor mesh: quadrature, assembly, solve."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import TensorMesh2D

logger = logging.getLogger(__name__)

# local node q sits at reference corner LOCAL_NODES[q]; counter-clockwise
LOCAL_NODES = np.array([(0, 0), (1, 0), (1, 1), (0, 1)])
BANDED_LIMIT = 16384
# threshold ILU; scipy has no level-0 ILU and fill_factor=1 breaks down on layer meshes
ILU_DROP_TOL = 1e-4
ILU_FILL = 5.0


class QuadratureOrderError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule on the reference square [0, 1]^2."""

    order: int
    points: np.ndarray  # 1D nodes on [0, 1]
    weights: np.ndarray  # 1D weights, sum to 1

    @classmethod
    def gauss(cls, order: int) -> "QuadratureRule":
        if order < 1:
            raise QuadratureOrderError(f"quadrature order must be >= 1, got {order}")
        t, w = np.polynomial.legendre.leggauss(order)
        return cls(order, 0.5 * (t + 1.0), 0.5 * w)

    def tensor(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        xi, eta = np.meshgrid(self.points, self.points, indexing="ij")
        return xi.ravel(), eta.ravel(), np.outer(self.weights, self.weights).ravel()


def reference_basis(q: int, xi, eta):
    """Value and reference gradient of local shape function ``q`` at (xi, eta)."""
    a, b = LOCAL_NODES[q]
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    px = xi if a else 1.0 - xi
    py = eta if b else 1.0 - eta
    sx = 1.0 if a else -1.0
    sy = 1.0 if b else -1.0
    return px * py, sx * py, sy * px


def _basis_table(xi, eta):
    """Arrays (4, nq) of values, d/dxi, d/deta for all local nodes."""
    vals = np.array([reference_basis(q, xi, eta) for q in range(4)])
    return vals[:, 0], vals[:, 1], vals[:, 2]


def cell_node_ids(N: int) -> np.ndarray:
    """Global node numbers ``i + j*(N+1)`` of each cell's 4 corners, shape (N, N, 4)."""
    i = np.arange(N)[:, None]
    j = np.arange(N)[None, :]
    ids = np.empty((N, N, 4), dtype=np.int64)
    for q, (a, b) in enumerate(LOCAL_NODES):
        ids[:, :, q] = (i + a) + (j + b) * (N + 1)
    return ids


def interior_index(N: int) -> np.ndarray:
    """Global node numbers of interior nodes in lexicographic order k = (i-1) + (j-1)(N-1)."""
    i, j = np.meshgrid(np.arange(1, N), np.arange(1, N), indexing="ij")
    return (i + j * (N + 1)).ravel(order="F")


@dataclass(frozen=True, eq=False)
class FEFunction:
    """Q1 function stored as nodal values ``coeffs[i, j] = v(x_i, y_j)``."""

    mesh: TensorMesh2D
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        N = self.mesh.N
        if c.shape != (N + 1, N + 1):
            raise ValueError(f"coeffs must have shape {(N + 1, N + 1)}, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, mesh: TensorMesh2D) -> "FEFunction":
        return cls(mesh, np.zeros((mesh.N + 1, mesh.N + 1)))

    @classmethod
    def from_interior(cls, mesh: TensorMesh2D, w: np.ndarray) -> "FEFunction":
        N = mesh.N
        c = np.zeros((N + 1, N + 1))
        c[1:N, 1:N] = np.asarray(w).reshape((N - 1, N - 1), order="F")
        return cls(mesh, c)

    def interior(self) -> np.ndarray:
        N = self.mesh.N
        return self.coeffs[1:N, 1:N].ravel(order="F")

    def in_VN(self) -> bool:
        c = self.coeffs
        return bool(np.all(c[0, :] == 0) and np.all(c[-1, :] == 0) and np.all(c[:, 0] == 0) and np.all(c[:, -1] == 0))

    def _same_mesh(self, other: "FEFunction"):
        if other.mesh is not self.mesh:
            raise ValueError("FE functions live on different meshes")

    def __add__(self, other: "FEFunction") -> "FEFunction":
        self._same_mesh(other)
        return FEFunction(self.mesh, self.coeffs + other.coeffs)

    def __sub__(self, other: "FEFunction") -> "FEFunction":
        self._same_mesh(other)
        return FEFunction(self.mesh, self.coeffs - other.coeffs)

    def __mul__(self, alpha: float) -> "FEFunction":
        return FEFunction(self.mesh, alpha * self.coeffs)

    __rmul__ = __mul__

    def locate(self, x, y):
        """Cell indices and local coordinates of the points (x, y)."""
        m = self.mesh
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        i = np.clip(np.searchsorted(m.x, x, side="right") - 1, 0, m.N - 1)
        j = np.clip(np.searchsorted(m.y, y, side="right") - 1, 0, m.N - 1)
        return i, j, (x - m.x[i]) / m.hx[i], (y - m.y[j]) / m.hy[j]

    def evaluate_in_cell(self, i, j, xi, eta):
        """Value and physical gradient inside cell (i, j) at local coordinates."""
        c = self.coeffs
        m = self.mesh
        val = gx = gy = 0.0
        for q, (a, b) in enumerate(LOCAL_NODES):
            v, dxi, deta = reference_basis(q, xi, eta)
            cq = c[i + a, j + b]
            val = val + cq * v
            gx = gx + cq * dxi
            gy = gy + cq * deta
        return val, gx / m.hx[i], gy / m.hy[j]

    def __call__(self, x, y):
        i, j, xi, eta = self.locate(x, y)
        return self.evaluate_in_cell(i, j, xi, eta)[0]

    def gradient(self, x, y):
        i, j, xi, eta = self.locate(x, y)
        _, gx, gy = self.evaluate_in_cell(i, j, xi, eta)
        return gx, gy


def cell_quadrature(mesh: TensorMesh2D, rule: QuadratureRule):
    """Physical quadrature points (N, N, nq) and weights including the Jacobian."""
    xi, eta, w = rule.tensor()
    X = mesh.x[:-1, None, None] + mesh.hx[:, None, None] * xi[None, None, :]
    Y = mesh.y[None, :-1, None] + mesh.hy[None, :, None] * eta[None, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    W = (mesh.hx[:, None] * mesh.hy[None, :])[:, :, None] * w[None, None, :]
    return X, Y, W


def element_matrices(mesh: TensorMesh2D, cs, rule: QuadratureRule, epsilon: float | None = None) -> np.ndarray:
    """Local matrices (N, N, 4, 4), entry [p, q] = a(theta_q, theta_p) on the cell."""
    eps = mesh.epsilon if epsilon is None else epsilon
    xi, eta, _ = rule.tensor()
    phi, dxi, deta = _basis_table(xi, eta)
    X, Y, W = cell_quadrature(mesh, rule)
    hx = mesh.hx[:, None, None]
    hy = mesh.hy[None, :, None]
    bW = cs.b(X, Y) * W
    cW = cs.c(X, Y) * W
    # stiffness: sum_k W * (dxi_p dxi_q / hx^2 + deta_p deta_q / hy^2)
    Kx = np.einsum("ijk,pk,qk->ijpq", W / hx**2, dxi, dxi)
    Ky = np.einsum("ijk,pk,qk->ijpq", W / hy**2, deta, deta)
    conv = np.einsum("ijk,pk,qk->ijpq", bW / hx, phi, dxi)
    mass = np.einsum("ijk,pk,qk->ijpq", cW, phi, phi)
    return eps * (Kx + Ky) - conv + mass


def assemble(mesh: TensorMesh2D, cs, rule: QuadratureRule | None = None, epsilon: float | None = None):
    """Stiffness matrix over interior nodes (CSR) and load vector.

    Homogeneous Dirichlet conditions are imposed by dropping boundary rows
    and columns.
    """
    rule = QuadratureRule.gauss(4) if rule is None else rule
    if rule.order < 2:
        raise QuadratureOrderError(f"assembly needs quadrature order >= 2, got {rule.order}")
    N = mesh.N
    n_all = (N + 1) ** 2
    Ke = element_matrices(mesh, cs, rule, epsilon)
    ids = cell_node_ids(N)
    rows = np.broadcast_to(ids[:, :, :, None], Ke.shape).ravel()
    cols = np.broadcast_to(ids[:, :, None, :], Ke.shape).ravel()
    A = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n_all, n_all))

    xi, eta, _ = rule.tensor()
    phi, _, _ = _basis_table(xi, eta)
    X, Y, W = cell_quadrature(mesh, rule)
    Fe = np.einsum("ijk,pk->ijp", cs.f(X, Y) * W, phi)
    F = np.bincount(ids.ravel(), weights=Fe.ravel(), minlength=n_all)

    inner = interior_index(N)
    A = A[inner][:, inner].tocsr()
    A.sort_indices()
    return A, F[inner]


def _to_banded(A: sp.csr_matrix, bw: int) -> np.ndarray:
    n = A.shape[0]
    ab = np.zeros((2 * bw + 1, n))
    coo = A.tocoo()
    ab[bw + coo.row - coo.col, coo.col] = coo.data
    return ab


def solve_banded(A: sp.spmatrix, F: np.ndarray) -> np.ndarray:
    A = sp.csr_matrix(A)
    coo = A.tocoo()
    bw = int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0
    return scipy.linalg.solve_banded((bw, bw), _to_banded(A, bw), F)


def _krylov(A: sp.csr_matrix, F: np.ndarray, tol: float, maxiter: int):
    """ILU-preconditioned BiCGStab; returns None when the factorisation breaks down."""
    try:
        ilu = spla.spilu(A.tocsc(), drop_tol=ILU_DROP_TOL, fill_factor=ILU_FILL, permc_spec="NATURAL")
    except RuntimeError as exc:
        logger.info("incomplete factorisation failed: %s", exc)
        return None, -1
    M = spla.LinearOperator(A.shape, ilu.solve)
    return spla.bicgstab(A, F, rtol=tol, atol=0.0, M=M, maxiter=maxiter)


def solve(A: sp.spmatrix, F: np.ndarray, tol: float = 1e-12, method: str = "bicgstab", maxiter: int = 500) -> np.ndarray:
    """Solve ``A w = F`` to relative residual ``tol``.

    ``method="bicgstab"`` runs ILU-preconditioned BiCGStab.  When it stalls
    the system is solved directly: banded elimination up to 16384 unknowns,
    sparse LU beyond that.  ``"banded"`` and ``"direct"`` (sparse LU) skip
    the iteration.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = sp.csr_matrix(A)
    F = np.asarray(F, dtype=float)
    n = A.shape[0]
    normF = float(np.linalg.norm(F))
    if normF == 0.0:
        return np.zeros(n)
    target = tol * normF

    def residual(w):
        return float(np.linalg.norm(A @ w - F))

    if method == "direct":
        w = spla.spsolve(A.tocsc(), F)
    elif method == "banded":
        w = solve_banded(A, F)
    elif method == "bicgstab":
        w, info = _krylov(A, F, tol, maxiter)
        if w is None or info != 0 or residual(w) > target:
            r = math.inf if w is None else residual(w) / normF
            logger.info("BiCGStab stalled (relative residual %.2e), solving directly", r)
            w = solve_banded(A, F) if n <= BANDED_LIMIT else spla.spsolve(A.tocsc(), F)
    else:
        raise ValueError(f"unknown solver method {method!r}")
    r = residual(w)
    if not np.isfinite(r) or (r > target and r > 1e3 * np.finfo(float).eps * normF):
        raise SolverError(f"{method} solve missed the tolerance", r / normF)
    return w


def solve_fe(mesh: TensorMesh2D, cs, rule: QuadratureRule | None = None, tol: float = 1e-12, method: str = "bicgstab") -> FEFunction:
    A, F = assemble(mesh, cs, rule)
    return FEFunction.from_interior(mesh, solve(A, F, tol, method))
