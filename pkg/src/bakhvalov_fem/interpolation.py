"""Interpolation operators used in the supercloseness analysis.

``Pi u = Pi S + pi E1 + E2^I + E12^I``: plain Lagrange interpolation for the
parabolic and corner layers, a column-zeroed interpolant for the exponential
layer, and a corrected interpolant for the smooth part whose nodal values on
the column x = x_{N/2-1} come from a small tridiagonal system.  Every
operator is stored as nodal values of a Q1 function, so continuity is
structural.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .fem import FEFunction, QuadratureRule
from .mesh import TensorMesh2D


def lagrange_interpolate(w, mesh: TensorMesh2D) -> FEFunction:
    X, Y = mesh.node_grid()
    return FEFunction(mesh, np.broadcast_to(w(X, Y), X.shape))


def thomas(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a tridiagonal system.

    ``lower[k]`` multiplies x[k] in row k+1 and ``upper[k]`` multiplies x[k+1]
    in row k.  No pivoting; the matrix must be diagonally dominant.
    """
    n = len(diag)
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0] if n > 1 else 0.0
    d[0] = rhs[0] / diag[0]
    for k in range(1, n):
        m = diag[k] - lower[k - 1] * c[k - 1]
        c[k] = upper[k] / m if k < n - 1 else 0.0
        d[k] = (rhs[k] - lower[k - 1] * d[k - 1]) / m
    x = np.empty(n)
    x[-1] = d[-1]
    for k in range(n - 2, -1, -1):
        x[k] = d[k] - c[k] * x[k + 1]
    return x


def correction_matrix(n: int) -> np.ndarray:
    """Dense [1, 4, 1] tridiagonal matrix, for checking only."""
    return 4 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)


@dataclass
class CorrectionSystem:
    """``D @ beta = -tau`` with D = tridiag(1, 4, 1) of size N/2 - 1.

    ``tau`` is the right-hand side that makes the defining integral condition
    hold exactly; on the uniform strip it equals ``-12 * (ell1 + ell2)``.
    ``j`` lists the y-node indices N/4+1 .. 3N/4-1 of the rows.
    """

    j: np.ndarray
    ell1: np.ndarray
    ell2: np.ndarray
    tau: np.ndarray
    beta: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.j)

    @property
    def tau_raw(self) -> np.ndarray:
        """ell1 + ell2, the unscaled consistency terms."""
        return self.ell1 + self.ell2

    def residual(self) -> float:
        b = self.beta
        Db = 4 * b
        Db[1:] += b[:-1]
        Db[:-1] += b[1:]
        return float(np.max(np.abs(Db + self.tau)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "ell1", "ell2", "tau", "beta"])
        beta = self.beta if self.beta is not None else np.full(self.size, np.nan)
        for row in zip(self.j, self.ell1, self.ell2, self.tau, beta):
            w.writerow([int(row[0])] + [f"{v:.6e}" for v in row[1:]])
        return buf.getvalue()


def _hat(y, y0, y1, y2):
    """1D hat with peak at y1 and support [y0, y2]."""
    return np.where(y <= y1, (y - y0) / (y1 - y0), (y2 - y) / (y2 - y1))


def build_tau(S, mesh: TensorMesh2D, rule: QuadratureRule | None = None) -> CorrectionSystem:
    """Assemble the consistency terms of the correction system by quadrature.

    ``S`` must expose ``S(x, y)`` and ``S.d(m, n, x, y)``.  ``ell1`` is the
    H^2/12-weighted line integral of S_xx against the test hat on x = x_{N/2};
    ``ell2`` is the integral of (S - S^I)_x against the same test function
    over the two cells left of that line.  Both are divided by h.
    """
    rule = QuadratureRule.gauss(6) if rule is None else rule
    N = mesh.N
    m2, q = N // 2, N // 4
    j = np.arange(q + 1, 3 * q)
    H, h = mesh.H, mesh.h
    x0, x1 = mesh.x[m2 - 1], mesh.x[m2]
    dx = x1 - x0
    y = mesh.y
    t, wt = rule.points, rule.weights

    # ell1: segments [y_{j-1}, y_j] and [y_j, y_{j+1}]
    ell1 = np.zeros(len(j))
    # ell2: cells K_{N/2-1, j-1} and K_{N/2-1, j}
    ell2 = np.zeros(len(j))
    for lo, hi in ((j - 1, j), (j, j + 1)):
        ya, yb = y[lo][:, None], y[hi][:, None]
        yy = ya + (yb - ya) * t[None, :]
        wy = (yb - ya) * wt[None, :]
        hat = _hat(yy, y[j - 1][:, None], y[j][:, None], y[j + 1][:, None])
        ell1 += np.sum(S.d(2, 0, x1, yy) * hat * wy, axis=1)

        # (S - S^I)_x on the cell; S^I_x is linear in y between the two edge slopes
        xx = x0 + dx * t
        X = xx[None, :, None]
        Y = yy[:, None, :]
        s_lo = (S(x1, ya) - S(x0, ya)) / dx
        s_hi = (S(x1, yb) - S(x0, yb)) / dx
        eta = (yy - ya) / (yb - ya)
        SIx = (s_lo * (1 - eta) + s_hi * eta)[:, None, :]
        test = ((xx - x0) / dx)[None, :, None] * hat[:, None, :]
        W = (dx * wt)[None, :, None] * wy[:, None, :]
        ell2 += np.sum((S.d(1, 0, X, Y) - SIx) * test * W, axis=(1, 2))

    ell1 *= H**2 / 12 / h
    ell2 /= h
    tau = -12.0 * (ell1 + ell2)
    return CorrectionSystem(j, ell1, ell2, tau)


def solve_correction(system: CorrectionSystem) -> CorrectionSystem:
    n = system.size
    ones = np.ones(max(n - 1, 0))
    system.beta = thomas(ones, np.full(n, 4.0), ones, -system.tau)
    return system


def build_PiS(S, mesh: TensorMesh2D, rule: QuadratureRule | None = None, return_system: bool = False):
    """Corrected interpolant of the smooth part.

    Equal to S^I except on the column i = N/2-1, rows N/4+1 .. 3N/4-1, where
    the nodal value is S - beta_j.
    """
    system = solve_correction(build_tau(S, mesh, rule))
    vals = lagrange_interpolate(S, mesh).coeffs.copy()
    vals[mesh.N // 2 - 1, system.j] -= system.beta
    PiS = FEFunction(mesh, vals)
    return (PiS, system) if return_system else PiS


def correction_identity_residual(S, PiS: FEFunction, rule: QuadratureRule | None = None) -> np.ndarray:
    """Residual of the defining condition of the corrected interpolant, per row j.

    Re-evaluates, independently of :func:`build_tau`, the sum of the two cell
    integrals of (S - PiS)_x * theta_{N/2,j} plus the H^2/12 line term, using
    the FE function's own gradient.
    """
    rule = QuadratureRule.gauss(10) if rule is None else rule
    mesh = PiS.mesh
    N = mesh.N
    m2, q = N // 2, N // 4
    x0, x1 = mesh.x[m2 - 1], mesh.x[m2]
    H = mesh.H
    xi, eta, w = rule.tensor()
    t, wt = rule.points, rule.weights
    out = []
    for j in range(q + 1, 3 * q):
        total = 0.0
        for cell in (j - 1, j):
            ya, yb = mesh.y[cell], mesh.y[cell + 1]
            X = x0 + (x1 - x0) * xi
            Y = ya + (yb - ya) * eta
            _, gx, _ = PiS.evaluate_in_cell(m2 - 1, cell, xi, eta)
            theta = xi * _hat(Y, mesh.y[j - 1], mesh.y[j], mesh.y[j + 1])
            total += np.sum((S.d(1, 0, X, Y) - gx) * theta * w) * (x1 - x0) * (yb - ya)
            yy = ya + (yb - ya) * t
            line = np.sum(S.d(2, 0, x1, yy) * _hat(yy, mesh.y[j - 1], mesh.y[j], mesh.y[j + 1]) * wt) * (yb - ya)
            total += H**2 / 12 * line
        out.append(total)
    return np.array(out)


def build_piE1(E1, mesh: TensorMesh2D) -> FEFunction:
    """E1^I with its interior nodal values on the column x_{N/2-1} set to zero."""
    vals = lagrange_interpolate(E1, mesh).coeffs.copy()
    vals[mesh.N // 2 - 1, 1:-1] = 0.0
    return FEFunction(mesh, vals)


def QE1_column(E1, mesh: TensorMesh2D, keep_boundary: bool = False) -> FEFunction:
    """The hat-column sum_j E1(x_{N/2-1}, y_j) theta_{N/2-1, j} (boundary rows optional)."""
    i = mesh.N // 2 - 1
    vals = np.zeros((mesh.N + 1, mesh.N + 1))
    vals[i, :] = E1(mesh.x[i], mesh.y)
    if not keep_boundary:
        vals[i, 0] = vals[i, -1] = 0.0
    return FEFunction(mesh, vals)


@dataclass
class InterpolantBundle:
    uI: FEFunction
    PiS: FEFunction
    piE1: FEFunction
    E2I: FEFunction
    E12I: FEFunction
    Piu: FEFunction
    system: CorrectionSystem


def build_Piu(ms, mesh: TensorMesh2D, rule: QuadratureRule | None = None) -> InterpolantBundle:
    PiS, system = build_PiS(ms.S, mesh, rule, return_system=True)
    piE1 = build_piE1(ms.E1, mesh)
    E2I = lagrange_interpolate(ms.E2, mesh)
    E12I = lagrange_interpolate(ms.E12, mesh)
    vals = PiS.coeffs + piE1.coeffs + E2I.coeffs + E12I.coeffs
    # the parts cancel on the boundary only up to rounding; Pi u must lie in V^N exactly
    vals[[0, -1], :] = 0.0
    vals[:, [0, -1]] = 0.0
    Piu = FEFunction(mesh, vals)
    return InterpolantBundle(lagrange_interpolate(ms.u, mesh), PiS, piE1, E2I, E12I, Piu, system)


# -- integral identities on a single rectangle ------------------------------------


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def center(self):
        return 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)

    @property
    def half(self):
        return 0.5 * (self.x1 - self.x0), 0.5 * (self.y1 - self.y0)


def integral_identities(w, v_corners, cell: Rect, order: int = 10, with_scale: bool = False):
    """Both sides of the two superconvergence identities on ``cell``.

    ``w`` exposes ``w(x, y)`` and ``w.d(m, n, x, y)`` up to third order;
    ``v_corners`` are the bilinear v's values at (x0,y0), (x1,y0), (x1,y1),
    (x0,y1).  Returns ((lhs_a, rhs_a), (lhs_b, rhs_b)) for

        int (w - w^I)_x v_x = int w_xyy F(y) (v_x - 2/3 (y - y_K) v_xy)
        int (w - w^I)_y v_y = int w_xxy E(x) (v_y - 2/3 (x - x_K) v_xy)

    With ``with_scale`` a third pair holds the size of each identity: the
    largest of the integrals of |w_x v_x|, |w^I_x v_x| and the absolute
    right-hand integrand (resp. the y analogues).
    """
    t, wt = np.polynomial.legendre.leggauss(order)
    xc, yc = cell.center
    hx, hy = cell.half
    X = xc + hx * t[:, None]
    Y = yc + hy * t[None, :]
    W = hx * hy * np.outer(wt, wt)
    xi = (X - cell.x0) / (2 * hx)
    eta = (Y - cell.y0) / (2 * hy)

    def bilinear_grad(c):
        c0, c1, c2, c3 = c
        gx = ((c1 - c0) * (1 - eta) + (c2 - c3) * eta) / (2 * hx)
        gy = ((c3 - c0) * (1 - xi) + (c2 - c1) * xi) / (2 * hy)
        gxy = (c0 - c1 + c2 - c3) / (4 * hx * hy)
        return gx, gy, gxy

    # edge differences of w as edge means of its derivative: same value, no cancellation on thin cells
    sx = xc + hx * t
    sy = yc + hy * t
    dx0 = 0.5 * np.sum(wt * w.d(1, 0, sx, cell.y0))
    dx1 = 0.5 * np.sum(wt * w.d(1, 0, sx, cell.y1))
    dy0 = 0.5 * np.sum(wt * w.d(0, 1, cell.x0, sy))
    dy1 = 0.5 * np.sum(wt * w.d(0, 1, cell.x1, sy))
    wIx = dx0 * (1 - eta) + dx1 * eta
    wIy = dy0 * (1 - xi) + dy1 * xi
    vx, vy, vxy = bilinear_grad(v_corners)
    F = ((Y - yc) ** 2 - hy**2) / 2
    E = ((X - xc) ** 2 - hx**2) / 2
    wx, wy = w.d(1, 0, X, Y), w.d(0, 1, X, Y)
    ra = w.d(1, 2, X, Y) * F * (vx - 2 / 3 * (Y - yc) * vxy) * W
    rb = w.d(2, 1, X, Y) * E * (vy - 2 / 3 * (X - xc) * vxy) * W
    out = (float(np.sum((wx - wIx) * vx * W)), float(ra.sum())), (float(np.sum((wy - wIy) * vy * W)), float(rb.sum()))
    if with_scale:
        def size(*terms):
            return float(max(np.sum(np.abs(t) * W) for t in terms))
        scale = (size(wx * vx, wIx * vx, ra / W), size(wy * vy, wIy * vy, rb / W))
        return out + (scale,)
    return out


def verify_integral_identity(w, v: FEFunction, i: int, j: int, order: int = 10) -> tuple[float, float]:
    """Absolute residuals of both identities on cell (i, j) of ``v``'s mesh."""
    m = v.mesh
    cell = Rect(m.x[i], m.x[i + 1], m.y[j], m.y[j + 1])
    c = v.coeffs
    corners = (c[i, j], c[i + 1, j], c[i + 1, j + 1], c[i, j + 1])
    (la, ra), (lb, rb) = integral_identities(w, corners, cell, order)
    return abs(la - ra), abs(lb - rb)
