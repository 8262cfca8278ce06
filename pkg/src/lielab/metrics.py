"""Sub-Finsler distances on the deformed groups, by direct transcription.

A horizontal path is a sequence of constant controls.  On a nilpotent group
the flow of a constant left-invariant field for time t from g is g * (t u),
so a piecewise-constant path ends at an exact finite product and the only
approximation left is the optimizer's.

Controls are always coordinates ``a`` in a fixed basis B of the distribution
Delta.  The contracted structure at eps displaces by M_eps B a, where M_eps
scales layer j of the asymptotic grading by eps**(j-1), and charges ||B a||.
That is the same as moving along delta_eps(Delta) with the norm
eps * ||delta_eps^-1 .||, and at eps = 0 it becomes the first-layer
projection with the projected (limit) norm, with no special casing.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull

from .algebra import StructureTensor, Subspace
from .deformation import DeformedFamily, bch_table
from .gradings import Grading

NORM_KINDS = ("euclidean", "l1", "linf", "quadratic_form", "polytope")


def tensor_array(T: StructureTensor) -> np.ndarray:
    """C[i, j, k] with [e_i, e_j] = sum_k C[i, j, k] e_k."""
    C = np.zeros((T.dim, T.dim, T.dim))
    for (i, j, k), c in T.coeffs.items():
        C[i, j, k] = float(c)
        C[j, i, k] = -float(c)
    return C


class NumericGroup:
    """Float Dynkin product for a nilpotent structure tensor."""

    def __init__(self, C: np.ndarray, step: int):
        self.C = C
        self.n = C.shape[0]
        self.step = max(step, 1)
        table = bch_table(self.step)
        words = sorted({w[i:] for w in table.entries for i in range(len(w))}, key=len)
        index = {w: i for i, w in enumerate(words)}
        self.nodes = [(w[0], index[w[1:]] if len(w) > 1 else None) for w in words]
        self.coeff = np.array([float(table.coefficient(w)) for w in words])
        self.abelian = not C.any()

    def ad(self, v: np.ndarray) -> np.ndarray:
        """ad(v)[k, j] = sum_i v_i C[i, j, k], so ad(v) @ w = [v, w]."""
        return np.einsum("i,ijk->kj", v, self.C)

    def bracket(self, x, y):
        return np.einsum("i,j,ijk->k", x, y, self.C)

    def product(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.abelian:
            return x + y
        adx, ady = self.ad(x), self.ad(y)
        vals = []
        for letter, child in self.nodes:
            if child is None:
                vals.append(x if letter == 1 else y)
            else:
                vals.append((adx if letter == 1 else ady) @ vals[child])
        return self.coeff @ np.array(vals)

    def product_batch(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Row-wise product of (B, n) arrays."""
        if self.abelian:
            return x + y
        adx = np.einsum("bi,ijk->bkj", x, self.C)
        ady = np.einsum("bi,ijk->bkj", y, self.C)
        vals = []
        for letter, child in self.nodes:
            if child is None:
                vals.append(x if letter == 1 else y)
            else:
                vals.append(np.einsum("bkj,bj->bk", adx if letter == 1 else ady, vals[child]))
        return np.einsum("w,wbk->bk", self.coeff, np.array(vals))

    def product_jac(self, x: np.ndarray, y: np.ndarray):
        """(x*y, d/dx, d/dy)."""
        n = self.n
        eye = np.eye(n)
        if self.abelian:
            return x + y, eye, eye
        adx, ady = self.ad(x), self.ad(y)
        zero = np.zeros((n, n))
        vals, jx, jy = [], [], []
        for letter, child in self.nodes:
            if child is None:
                vals.append(x if letter == 1 else y)
                jx.append(eye if letter == 1 else zero)
                jy.append(zero if letter == 1 else eye)
                continue
            ad_head = adx if letter == 1 else ady
            inner = vals[child]
            vals.append(ad_head @ inner)
            # d[h, v] = [dh, v] + [h, dv] = -ad(v) dh + ad(h) dv
            minus_ad_inner = -self.ad(inner)
            jx.append(ad_head @ jx[child] + (minus_ad_inner if letter == 1 else 0))
            jy.append(ad_head @ jy[child] + (minus_ad_inner if letter == 2 else 0))
        c = self.coeff
        return (
            c @ np.array(vals),
            np.tensordot(c, np.array(jx), axes=1),
            np.tensordot(c, np.array(jy), axes=1),
        )

    def chain(self, factors: Sequence[np.ndarray], start=None) -> np.ndarray:
        g = np.zeros(self.n) if start is None else np.asarray(start, float)
        for f in factors:
            g = self.product(g, f)
        return g

    def left_field(self, g: np.ndarray) -> np.ndarray:
        """Matrix of u -> d/dr (g * r u) at r = 0."""
        return self.product_jac(g, np.zeros(self.n))[2]


# ------------------------------------------------------------------- norms


@dataclass(frozen=True)
class NormSpec:
    """A norm on the distribution ``ambient`` (given in g-coordinates).

    ``matrix`` is the Gram matrix on g for quadratic forms; ``vertices`` are
    points of Delta whose symmetric convex hull is the unit ball.
    """

    kind: str
    ambient: Subspace
    matrix: tuple[tuple[float, ...], ...] | None = None
    vertices: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "quadratic_form":
            Q = np.array(self.matrix, float)
            if Q.shape != (self.ambient.ambient_dim,) * 2 or not np.allclose(Q, Q.T):
                raise ValueError("quadratic form must be a symmetric matrix on g")
            B = self.basis
            if np.linalg.eigvalsh(B.T @ Q @ B).min() <= 0:
                raise ValueError("quadratic form is not positive definite on the distribution")
        if self.kind == "polytope":
            if not self.vertices:
                raise ValueError("polytope norm needs vertices")
            B = self.basis
            V = np.array(self.vertices, float)
            coords, *_ = np.linalg.lstsq(B, V.T, rcond=None)
            if not np.allclose(B @ coords, V.T, atol=1e-12):
                raise ValueError("polytope vertices must lie in the distribution")
            if np.linalg.matrix_rank(coords) < B.shape[1]:
                raise ValueError("polytope must span the distribution")

    @property
    def basis(self) -> np.ndarray:
        """Columns: the echelon basis of Delta."""
        return np.array([[float(a) for a in row] for row in self.ambient.basis]).T

    def restricted(self) -> "DeltaNorm":
        return DeltaNorm.build(self)

    def value(self, v: Sequence[float]) -> float:
        v = np.asarray(v, float)
        if self.kind == "euclidean":
            return float(np.linalg.norm(v))
        if self.kind == "l1":
            return float(np.abs(v).sum())
        if self.kind == "linf":
            return float(np.abs(v).max())
        if self.kind == "quadratic_form":
            return float(math.sqrt(max(v @ np.array(self.matrix) @ v, 0.0)))
        B = self.basis
        a, *_ = np.linalg.lstsq(B, v, rcond=None)
        if not np.allclose(B @ a, v, atol=1e-9 * (1 + np.abs(v).max())):
            raise ValueError("polytope norm is only defined on the distribution")
        return self.restricted().value(a)

    def contains(self, v: Sequence[float], tol: float = 1e-9) -> bool:
        return self.value(v) <= 1 + tol


@dataclass
class DeltaNorm:
    """The norm pulled back to control coordinates a -> ||B a||.

    Smooth norms keep a Gram matrix, polyhedral ones a list of dual vectors
    h with ||B a|| = max_h <h, a>.
    """

    gram: np.ndarray | None
    facets: np.ndarray | None

    @classmethod
    def build(cls, norm: NormSpec) -> "DeltaNorm":
        B = norm.basis
        n, r = B.shape
        if norm.kind == "euclidean":
            return cls(B.T @ B, None)
        if norm.kind == "quadratic_form":
            return cls(B.T @ np.array(norm.matrix, float) @ B, None)
        if norm.kind == "linf":
            return cls(None, _prune_dual(np.vstack([B, -B])))
        if norm.kind == "l1":
            if n > 14:
                raise ValueError("l1 norm restricted to a subspace is limited to dimension 14")
            signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
            return cls(None, _prune_dual(signs @ B))
        V = np.array(norm.vertices, float)
        coords, *_ = np.linalg.lstsq(B, V.T, rcond=None)
        pts = np.vstack([coords.T, -coords.T])
        if r == 1:
            return cls(None, np.array([[1.0], [-1.0]]) / np.abs(pts).max())
        hull = ConvexHull(pts)
        normals = hull.equations[:, :-1] / (-hull.equations[:, -1:])
        return cls(None, _dedupe(normals))

    @property
    def smooth(self) -> bool:
        return self.gram is not None

    def value(self, a: np.ndarray) -> float:
        a = np.asarray(a, float)
        if self.smooth:
            return float(math.sqrt(max(a @ self.gram @ a, 0.0)))
        return float(max((self.facets @ a).max(), 0.0))

    def values(self, A: np.ndarray) -> np.ndarray:
        """Row-wise norms of a (m, r) array."""
        if self.smooth:
            return np.sqrt(np.maximum(np.einsum("mi,ij,mj->m", A, self.gram, A), 0.0))
        return np.maximum((A @ self.facets.T).max(axis=1), 0.0)


def _dedupe(rows: np.ndarray) -> np.ndarray:
    return np.unique(np.round(rows, 12), axis=0)


def _prune_dual(points: np.ndarray) -> np.ndarray:
    points = _dedupe(points)
    points = points[np.abs(points).sum(axis=1) > 1e-12]
    if points.shape[1] >= 2 and len(points) > points.shape[1] + 1:
        try:
            return points[ConvexHull(points).vertices]
        except Exception:
            return points
    return points


# ----------------------------------------------------------- control systems


@dataclass
class ControlSystem:
    """Everything the solver needs for one metric: group law, control frame,
    norm on control coordinates, and a grading for the quasi-norm."""

    group: NumericGroup
    frame: np.ndarray  # (n, r): control coordinates -> displacement
    norm: DeltaNorm
    layer_maps: list[np.ndarray]  # projections onto the layers of a grading
    epsilon: float
    side: str

    @property
    def n(self) -> int:
        return self.frame.shape[0]

    @property
    def r(self) -> int:
        return self.frame.shape[1]

    def homogeneous_norm(self, x: np.ndarray) -> float:
        return float(sum(np.linalg.norm(P @ x) ** (1.0 / j) for j, P in enumerate(self.layer_maps, start=1)))

    def inverse(self, x):
        return -np.asarray(x, float)


def _grading_matrices(G: Grading):
    A = np.array([[float(a) for a in row] for row in G.adapted_basis])  # rows b_a
    Ainv = np.linalg.inv(A)
    w = np.array(G.basis_weights)
    # column-vector form: coords c = Ainv^T x, x = A^T c
    projections = [A.T @ np.diag((w == j).astype(float)) @ Ainv.T for j in range(1, G.step + 1)]
    return A, Ainv, w, projections


def _eps_weights(w: np.ndarray, eps: float, shift: int) -> np.ndarray:
    powers = w - shift
    out = np.where(powers == 0, 1.0, float(eps) ** np.maximum(powers, 0))
    return out


def contracted_system(F: DeformedFamily, eps: float, norm: NormSpec) -> ControlSystem:
    """rho_eps: bracket [.,.]^(eps), distribution delta_eps(Delta) with norm
    eps ||delta_eps^-1 .||; at eps = 0 the cone bracket with the limit norm."""
    if F.side != "asymptotic":
        raise ValueError("contracted metrics live on the asymptotic side")
    step = F.product_step
    if step is None:
        raise ValueError("contracted metrics need a nilpotent group")
    A, Ainv, w, projections = _grading_matrices(F.grading)
    M = A.T @ np.diag(_eps_weights(w, eps, 1)) @ Ainv.T
    group = NumericGroup(tensor_array(F.at(_rational(eps))), step)
    return ControlSystem(group, M @ norm.basis, norm.restricted(), projections, float(eps), "asymptotic")


def dilated_system(F: DeformedFamily, eps: float, norm: NormSpec, truncation: int | None = None) -> ControlSystem:
    """d_eps: bracket [[.,.]]^(eps) with the original distribution and norm."""
    if F.side != "tangent":
        raise ValueError("dilated metrics live on the tangent side")
    step = F.product_step
    if step is None:
        if truncation is None:
            raise ValueError("non-nilpotent group: pass a truncation step (local products only)")
        step = truncation
    _, _, _, projections = _grading_matrices(F.grading)
    group = NumericGroup(tensor_array(F.at(_rational(eps))), step)
    return ControlSystem(group, norm.basis, norm.restricted(), projections, float(eps), "tangent")


def _rational(eps):
    from fractions import Fraction

    if isinstance(eps, float):
        return Fraction(eps).limit_denominator(10**12)
    return Fraction(eps)


# ------------------------------------------------------------ control paths


@dataclass
class ControlPath:
    """Piecewise-constant control: segment i runs for durations[i] with
    velocity frame @ coords[i]."""

    durations: np.ndarray
    coords: np.ndarray  # (m, r) coordinates in the distribution basis
    frame: np.ndarray  # (n, r)
    epsilon: float
    side: str

    def __post_init__(self):
        self.durations = np.asarray(self.durations, float)
        self.coords = np.atleast_2d(np.asarray(self.coords, float))
        if (self.durations <= 0).any() or not math.isclose(self.durations.sum(), 1.0, rel_tol=1e-12):
            raise ValueError("durations must be positive and sum to 1")
        if self.coords.shape != (len(self.durations), self.frame.shape[1]):
            raise ValueError("coords must have one row of distribution coordinates per segment")

    @property
    def values(self) -> np.ndarray:
        """Velocities in g-coordinates, shape (m, n)."""
        return self.coords @ self.frame.T

    def displacements(self) -> np.ndarray:
        return self.durations[:, None] * self.values

    def length(self, norm: DeltaNorm) -> float:
        return float(self.durations @ norm.values(self.coords))

    def then(self, other: "ControlPath") -> "ControlPath":
        """Concatenate, both halves rescaled to run in half the time."""
        return ControlPath(
            np.concatenate([self.durations, other.durations]) / 2,
            np.vstack([self.coords, other.coords]) * 2,
            self.frame,
            self.epsilon,
            self.side,
        )


def system_for(F: DeformedFamily, eps: float, norm: NormSpec) -> ControlSystem:
    return contracted_system(F, eps, norm) if F.side == "asymptotic" else dilated_system(F, eps, norm)


def flow(F: DeformedFamily, eps: float, u: ControlPath, x0=None) -> np.ndarray:
    """Endpoint of the horizontal path; an exact finite product."""
    if not math.isclose(u.epsilon, float(eps)) or u.side != F.side:
        raise ValueError("control path belongs to a different structure")
    step = F.product_step
    if step is None:
        raise ValueError("exact flows need a nilpotent group")
    group = NumericGroup(tensor_array(F.at(_rational(eps))), step)
    return group.chain(list(u.displacements()), x0)


def flow_ode(system: ControlSystem, u: ControlPath, x0=None, rtol=1e-12, atol=1e-14) -> np.ndarray:
    """Same endpoint by numerically integrating g' = dL_g(u(t)).  For testing."""
    from scipy.integrate import solve_ivp

    g = np.zeros(system.n) if x0 is None else np.asarray(x0, float)
    for dt, v in zip(u.durations, u.values):
        sol = solve_ivp(
            lambda t, y: system.group.left_field(y) @ v, (0.0, dt), g, method="DOP853", rtol=rtol, atol=atol
        )
        g = sol.y[:, -1]
    return g


# ------------------------------------------------------------------ solver


@dataclass
class SolverConfig:
    segments: int = 32
    starts: int = 8
    seed: int = 0
    endpoint_tol: float = 1e-4  # homogeneous quasi-norm of the residual
    maxiter: int = 500
    ftol: float = 1e-13
    tolerance: float = 2e-3  # declared relative accuracy of reported distances


@dataclass
class DistanceEstimate:
    value: float
    path: ControlPath | None
    oracle_value: float | None = None
    tolerance_report: dict = field(default_factory=dict)

    @property
    def oracle_gap(self) -> float | None:
        if self.oracle_value is None:
            return None
        return abs(self.value - self.oracle_value)


def _endpoint_and_jacobian(system: ControlSystem, U: np.ndarray):
    """Endpoint of equal-duration segments with velocities frame @ U[i] and
    its Jacobian with respect to U (shape (n, m*r))."""
    m = len(U)
    group = system.group
    disp = (U @ system.frame.T) / m
    g = np.zeros(system.n)
    left, right = [], []
    for d in disp:
        g, j1, j2 = group.product_jac(g, d)
        left.append(j1)
        right.append(j2)
    jac = np.empty((system.n, m, system.r))
    acc = np.eye(system.n)
    scaled_frame = system.frame / m
    for i in range(m - 1, -1, -1):
        jac[:, i, :] = acc @ right[i] @ scaled_frame
        acc = acc @ left[i]
    return g, jac.reshape(system.n, -1)


def _endpoint(system: ControlSystem, U: np.ndarray) -> np.ndarray:
    m = len(U)
    return system.group.chain(list((U @ system.frame.T) / m))


def _solve_once(system: ControlSystem, target: np.ndarray, U0: np.ndarray, cfg: SolverConfig):
    m, r = U0.shape
    norm = system.norm
    smooth = norm.smooth
    nu = m * r

    if smooth:
        Q = norm.gram

        def objective(z):
            U = z[:nu].reshape(m, r)
            return float(np.einsum("mi,ij,mj->", U, Q, U)) / m, (2.0 / m) * (U @ Q).ravel()

        z0 = U0.ravel()
        constraints = []
    else:
        H = norm.facets

        def objective(z):
            t = z[nu:]
            grad = np.zeros_like(z)
            grad[nu:] = 2.0 * t / m
            return float(t @ t) / m, grad

        z0 = np.concatenate([U0.ravel(), norm.values(U0) + 1e-9])
        nf = len(H)
        # t_i - <h, U_i> >= 0 for all facets h; this is linear
        rows = np.zeros((m * nf, nu + m))
        for i in range(m):
            rows[i * nf : (i + 1) * nf, i * r : (i + 1) * r] = -H
            rows[i * nf : (i + 1) * nf, nu + i] = 1.0
        constraints = [{"type": "ineq", "fun": lambda z: rows @ z, "jac": lambda z: rows}]

    cache = {}

    def endpoint(z):
        key = z[:nu].tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = _endpoint_and_jacobian(system, z[:nu].reshape(m, r))
        return cache[key]

    def eq(z):
        return endpoint(z)[0] - target

    def eq_jac(z):
        J = endpoint(z)[1]
        if smooth:
            return J
        return np.hstack([J, np.zeros((system.n, m))])

    constraints = constraints + [{"type": "eq", "fun": eq, "jac": eq_jac}]
    res = minimize(
        objective,
        z0,
        jac=True,
        method="SLSQP",
        constraints=constraints,
        options={"maxiter": cfg.maxiter, "ftol": cfg.ftol},
    )
    U = res.x[:nu].reshape(m, r)
    return U, res


def _polish(system: ControlSystem, target: np.ndarray, U: np.ndarray, iterations: int = 20) -> np.ndarray:
    """Minimum-norm Newton steps on the endpoint equation."""
    m, r = U.shape
    best = U
    best_res = np.linalg.norm(_endpoint(system, U) - target)
    for _ in range(iterations):
        g, J = _endpoint_and_jacobian(system, U)
        res = g - target
        if np.linalg.norm(res) <= 1e-15 * (1 + np.linalg.norm(target)):
            break
        step, *_ = np.linalg.lstsq(J, -res, rcond=None)
        U = U + step.reshape(m, r)
        new_res = np.linalg.norm(_endpoint(system, U) - target)
        if new_res < best_res:
            best, best_res = U, new_res
        else:
            break
    return best


def _correction(system: ControlSystem, residual: np.ndarray, rng: np.random.Generator, segments: int):
    """A short path from 0 to ``residual``: Newton from a random path whose
    size matches the homogeneous norm of the residual."""
    h = system.homogeneous_norm(residual)
    best = None
    for _ in range(4):
        U = rng.normal(size=(segments, system.r)) * h
        for _ in range(40):
            g, J = _endpoint_and_jacobian(system, U)
            err = g - residual
            if np.linalg.norm(err) <= 1e-15 * (1 + np.linalg.norm(residual)):
                break
            step, *_ = np.linalg.lstsq(J, -err, rcond=None)
            U = U + step.reshape(U.shape)
        err = np.linalg.norm(_endpoint(system, U) - residual)
        if best is None or err < best[1]:
            best = (U, err)
    return best


def estimate_distance(F: DeformedFamily, eps: float, norm: NormSpec, p, q, cfg: SolverConfig | None = None) -> DistanceEstimate:
    """Upper bound on the deformed distance at eps from p to q, with a witness path."""
    return solve_distance(system_for(F, eps, norm), p, q, cfg)


def solve_distance(system: ControlSystem, p, q, cfg: SolverConfig | None = None) -> DistanceEstimate:
    """Upper bound on the distance from p to q with a witness path."""
    cfg = cfg or SolverConfig()
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    target = system.group.product(system.inverse(p), q)
    m, r = cfg.segments, system.r
    rng = np.random.default_rng(cfg.seed)
    scale = max(system.homogeneous_norm(target), 1e-3)
    straight, *_ = np.linalg.lstsq(system.frame, target, rcond=None)

    report = {"starts": [], "segments": m}
    if np.linalg.norm(target) == 0:
        path = ControlPath(np.full(m, 1.0 / m), np.zeros((m, r)), system.frame, system.epsilon, system.side)
        report.update(mismatch_hom=0.0, correction_length=0.0, feasible=True)
        return DistanceEstimate(0.0, path, tolerance_report=report)

    best = None
    for k in range(cfg.starts):
        U0 = np.tile(straight, (m, 1))
        if k > 0:
            U0 = U0 + rng.normal(size=(m, r)) * scale * (1.0 + 0.5 * k)
        U, res = _solve_once(system, target, U0, cfg)
        U = _polish(system, target, U)
        mismatch = np.linalg.norm(_endpoint(system, U) - target)
        length = float(system.norm.values(U).mean())
        report["starts"].append({"length": length, "mismatch": float(mismatch), "status": res.message})
        if mismatch > 1e-6 * (1 + np.linalg.norm(target)):
            continue
        if best is None or length < best[0]:
            best = (length, U)
    if best is None:
        report["feasible"] = False
        raise SolverFailure("no start reached the endpoint", report)

    length, U = best
    path = ControlPath(np.full(m, 1.0 / m), U, system.frame, system.epsilon, system.side)
    end = _endpoint(system, U)
    residual = system.group.product(system.inverse(end), target)
    mismatch_hom = system.homogeneous_norm(residual)
    report["mismatch_hom"] = mismatch_hom
    if mismatch_hom > cfg.endpoint_tol:
        report["feasible"] = False
        raise SolverFailure(f"endpoint mismatch {mismatch_hom:.2e} above tolerance", report)
    correction_length = 0.0
    if np.linalg.norm(residual) > 1e-13 * (1 + np.linalg.norm(target)):
        found = _correction(system, residual, rng, max(2 * system.n, 4))
        if found is not None:
            Uc, err = found
            fix = ControlPath(np.full(len(Uc), 1.0 / len(Uc)), Uc, system.frame, system.epsilon, system.side)
            correction_length = fix.length(system.norm)
            path = path.then(fix)
            report["correction_residual"] = float(err)
    report["correction_length"] = correction_length
    report["feasible"] = True
    return DistanceEstimate(length + correction_length, path, tolerance_report=report)


class SolverFailure(RuntimeError):
    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


def rho(F: DeformedFamily, eps: float, norm: NormSpec, p, q, cfg: SolverConfig | None = None) -> DistanceEstimate:
    return solve_distance(contracted_system(F, eps, norm), p, q, cfg)


def dee(F: DeformedFamily, eps: float, norm: NormSpec, p, q, cfg: SolverConfig | None = None) -> DistanceEstimate:
    return solve_distance(dilated_system(F, eps, norm), p, q, cfg)


# ------------------------------------------------------------ first layer


def _first_layer_map(F: DeformedFamily) -> np.ndarray:
    return _grading_matrices(F.grading)[3][0]


def _min_norm_preimage(P: np.ndarray, norm: DeltaNorm, v: np.ndarray) -> tuple[np.ndarray, float]:
    """argmin ||a|| subject to P a = v."""
    r = P.shape[1]
    if norm.smooth:
        Qinv = np.linalg.inv(norm.gram)
        S = P @ Qinv @ P.T
        lam = np.linalg.pinv(S) @ v
        a = Qinv @ P.T @ lam
    else:
        H = norm.facets
        c = np.zeros(r + 1)
        c[-1] = 1.0
        A_ub = np.hstack([H, -np.ones((len(H), 1))])
        A_eq = np.hstack([P, np.zeros((P.shape[0], 1))])
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(len(H)), A_eq=A_eq, b_eq=v, bounds=[(None, None)] * (r + 1))
        if res.status != 0:
            raise RuntimeError(f"lift is infeasible: {res.message}")
        a = res.x[:r]
    if not np.allclose(P @ a, v, atol=1e-9 * (1 + np.abs(v).max())):
        raise RuntimeError("lift is infeasible: target not in the first layer image")
    return a, norm.value(a)


def limit_norm(F: DeformedFamily, norm: NormSpec, v) -> float:
    """||v||_inf = min{||u|| : u in Delta, pi_1 u = v} for v in V_1."""
    P = _first_layer_map(F) @ norm.basis
    return _min_norm_preimage(P, norm.restricted(), np.asarray(v, float))[1]


def lift_control(v: ControlPath, F: DeformedFamily, eps: float, norm: NormSpec) -> ControlPath:
    """Per segment the cheapest control in delta_eps(Delta) whose first-layer
    part is the given V_1 velocity."""
    pi1 = _first_layer_map(F)
    P = pi1 @ norm.basis
    dn = norm.restricted()
    coords = np.array([_min_norm_preimage(P, dn, pi1 @ val)[0] for val in v.values])
    if not np.allclose(v.values @ pi1.T, v.values, atol=1e-12):
        raise ValueError("lift_control expects velocities in V_1")
    system = contracted_system(F, eps, norm)
    return ControlPath(v.durations, coords, system.frame, float(eps), "asymptotic")


# --------------------------------------------------------------- probes


def gronwall_probe(F: DeformedFamily, norm: NormSpec, u: ControlPath, eps_grid: Sequence[float]) -> list[tuple[float, float]]:
    """||gamma_eps(1) - gamma_0(1)|| for a fixed control given in distribution
    coordinates.  Asymptotic side compares against the first-layer projected
    control on the cone, tangent side against the same control on the cone."""
    out = []
    if F.side == "asymptotic":
        cone = contracted_system(F, 0.0, norm)
        end0 = cone.group.chain(list(u.durations[:, None] * (u.coords @ cone.frame.T)))
        for eps in eps_grid:
            sys = contracted_system(F, eps, norm)
            end = sys.group.chain(list(u.durations[:, None] * (u.coords @ sys.frame.T)))
            out.append((float(eps), float(np.linalg.norm(end - end0))))
    else:
        cone = dilated_system(F, 0.0, norm)
        end0 = cone.group.chain(list(u.durations[:, None] * (u.coords @ cone.frame.T)))
        for eps in eps_grid:
            sys = dilated_system(F, eps, norm)
            end = sys.group.chain(list(u.durations[:, None] * (u.coords @ sys.frame.T)))
            out.append((float(eps), float(np.linalg.norm(end - end0))))
    return out


def guivarch_constant(samples: Sequence[tuple[float, float, float]]) -> float:
    """Smallest C >= 1 with rho0/C - C eps <= rho_eps <= C rho0 + C eps on
    all samples (eps, rho_eps, rho_0)."""
    C = 1.0
    for eps, r_eps, r0 in samples:
        C = max(C, r_eps / (r0 + eps) if r0 + eps > 0 else C)
        if eps > 0:
            C = max(C, (-r_eps + math.sqrt(r_eps**2 + 4 * eps * r0)) / (2 * eps))
        elif r_eps > 0:
            C = max(C, r0 / r_eps)
    return C


def ball_box_ratio(system: ControlSystem, x, cfg: SolverConfig | None = None) -> float:
    d = solve_distance(system, np.zeros(system.n), x, cfg).value
    return d / system.homogeneous_norm(np.asarray(x, float))


# ------------------------------------------------------------- grid oracle

ORACLE_MAX_POINTS = 400_000


@dataclass
class OracleResult:
    value: float
    displacements: np.ndarray  # (K, r) control coordinates times duration
    evaluated: int


def _closure_one(system: ControlSystem, residual: np.ndarray):
    """Last segment absorbs the residual exactly (full-rank frame)."""
    return np.linalg.solve(system.frame, residual.T).T[:, None, :]


def _closure_two(system: ControlSystem, residual: np.ndarray, samples: int = 61):
    """Two segments c_a, c_b with B c_a * B c_b = residual on a step-2, corank-1
    structure.  Writing c_a = s/2 + w, c_b = s/2 - w gives
    B s - 1/2 det(s, w) z = residual with z = [B e_1, B e_2], so s and the
    component of w across s are fixed and the component along s is searched."""
    B = system.frame
    z = system.group.bracket(B[:, 0], B[:, 1])
    solve = np.linalg.solve(np.column_stack([B, z]), residual.T).T  # (P, 3)
    s = solve[:, :2]
    det_target = -2.0 * solve[:, 2]
    s_len2 = (s**2).sum(axis=1)
    ok = s_len2 > 1e-24
    s_perp = np.column_stack([-s[:, 1], s[:, 0]])
    # det(s, a s + b s_perp) = b |s|^2
    b = np.where(ok, det_target / np.where(ok, s_len2, 1.0), 0.0)
    t = np.linspace(-1.5, 1.5, samples)
    w = (t[None, :, None] * s[:, None, :]) + (b[:, None, None] * s_perp[:, None, :])
    ca = s[:, None, :] / 2 + w
    cb = s[:, None, :] / 2 - w
    cost = system.norm.values(ca.reshape(-1, 2)).reshape(ca.shape[:2]) + system.norm.values(
        cb.reshape(-1, 2)
    ).reshape(ca.shape[:2])
    best = cost.argmin(axis=1)
    rows = np.arange(len(residual))
    out = np.stack([ca[rows, best], cb[rows, best]], axis=1)
    out[~ok] = np.nan
    return out


def grid_oracle(system: ControlSystem, p, q, segments: int = 4, resolution: int = 7, zoom_rounds: int = 40) -> OracleResult:
    """Brute force over few-segment controls: the first K - c segments range
    over a grid (then a shrinking grid around the incumbent), the last c
    segments close the endpoint exactly.  Supports dimension <= 3, step <= 2,
    with a frame of full rank (c = 1) or corank one (c = 2)."""
    n, r = system.n, system.r
    if n > 3 or system.group.step > 2:
        raise ValueError("grid oracle supports dimension <= 3 and step <= 2")
    if np.linalg.matrix_rank(system.frame) != r:
        raise ValueError("grid oracle needs a frame of full column rank")
    if r == n:
        closing, close = 1, _closure_one
    elif r == n - 1 and r == 2:
        closing, close = 2, _closure_two
    else:
        raise ValueError("grid oracle supports full-rank or corank-one frames only")
    free = segments - closing
    if free < 0:
        raise ValueError("too few segments for the closing construction")
    group = system.group
    target = group.product(-np.asarray(p, float), np.asarray(q, float))
    scale = max(system.homogeneous_norm(target), 1e-6)

    def evaluate(free_coords: np.ndarray):
        # free_coords: (P, free, r) displacements in control coordinates
        P = len(free_coords)
        g = np.zeros((P, n))
        for i in range(free):
            g = group.product_batch(g, free_coords[:, i, :] @ system.frame.T)
        residual = group.product_batch(-g, np.tile(target, (P, 1)))
        tail = close(system, residual)
        coords = np.concatenate([free_coords, tail], axis=1)
        cost = system.norm.values(coords.reshape(-1, r)).reshape(P, segments).sum(axis=1)
        cost = np.where(np.isnan(cost), np.inf, cost)
        return cost, coords

    evaluated = 0
    dims = free * r
    if dims == 0:
        cost, coords = evaluate(np.zeros((1, 0, r)))
        return OracleResult(float(cost[0]), coords[0], 1)
    per_dim = max(2, min(resolution, int(ORACLE_MAX_POINTS ** (1.0 / dims))))
    axis = np.linspace(-scale, scale, per_dim)
    best_val, best_coords = np.inf, None
    grid = np.array(np.meshgrid(*([axis] * dims), indexing="ij")).reshape(dims, -1).T
    for chunk in np.array_split(grid, max(1, len(grid) // 50_000)):
        cost, coords = evaluate(chunk.reshape(-1, free, r))
        evaluated += len(chunk)
        k = int(cost.argmin())
        if cost[k] < best_val:
            best_val, best_coords = float(cost[k]), coords[k]
    step = axis[1] - axis[0]
    local = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=dims)))
    for _ in range(zoom_rounds):
        if best_coords is None:
            break
        centre = best_coords[:free].ravel()
        cand = centre + local * step
        cost, coords = evaluate(cand.reshape(-1, free, r))
        evaluated += len(cand)
        k = int(cost.argmin())
        if cost[k] < best_val - 1e-15:
            best_val, best_coords = float(cost[k]), coords[k]
        else:
            step /= 2
    if best_coords is None:
        raise RuntimeError("grid oracle found no closing control")
    return OracleResult(best_val, best_coords, evaluated)
