"""Linear interpolation models for the residual and their quadratic objective models.

The interpolation set holds d+1 points y_0 = x_k, y_1, ..., y_d and the
residual vectors r(y_t). The displacement matrix W has rows (y_t - x_k)^T
and the right-hand side R has rows (r(y_t) - r(x_k))^T, so the model
Jacobian solves W J^T = R. With a sketch S the system W (SJ)^T = R S^T is
solved instead and J itself is never formed.
"""

from dataclasses import dataclass, field
from functools import cached_property
import warnings

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .instrument import maybe_task, record
from .sketch import apply_to_matrix_right, apply_to_vector

KAPPA_SOLVE = 1e14
KAPPA_GEOM = 1e8

# only rows with the largest weight in the degenerate direction are tried
_MAX_GEOMETRY_CANDIDATES = 8


class EvaluationError(RuntimeError):
    """A residual evaluation produced non-finite values."""

    def __init__(self, point, message=None):
        self.point = np.array(point, dtype=float, copy=True)
        if message is None:
            message = f"non-finite residual at x = {np.array2string(self.point, threshold=8)}"
        super().__init__(message)


class GeometryError(np.linalg.LinAlgError):
    """The interpolation displacement matrix is singular or numerically so."""


class InterpolationSet:
    """d+1 interpolation points with cached residuals and objective values.

    ``residuals`` is stored column-major so that ``residuals.T`` is a
    C-contiguous (n, d+1) block, the layout the sketch kernels and the
    multi right-hand-side solves want.
    """

    def __init__(self, points, residuals, base=0):
        points = np.array(points, dtype=float)
        residuals = np.asfortranarray(residuals, dtype=float)
        npt, d = points.shape
        if npt != d + 1:
            raise ValueError(f"need exactly d+1 = {d + 1} points, got {npt}")
        if residuals.shape[0] != npt:
            raise ValueError("one residual vector per point required")
        self.points = points
        self.residuals = residuals
        self.fvals = 0.5 * np.einsum("ij,ij->i", residuals, residuals)
        self.base = int(base)
        self.last_improved = False

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def n(self):
        return self.residuals.shape[1]

    @property
    def others(self):
        return [t for t in range(self.d + 1) if t != self.base]

    @property
    def base_point(self):
        return self.points[self.base]

    @property
    def base_residual(self):
        return self.residuals[self.base]

    @property
    def base_f(self):
        return self.fvals[self.base]

    def displacements(self):
        """W: rows y_t - x_k for the non-base points."""
        return self.points[self.others] - self.points[self.base]

    def replace(self, t, point, residual):
        self.points[t] = point
        self.residuals[t] = residual
        self.fvals[t] = 0.5 * float(residual @ residual)


def _checked_residual(evaluator, x):
    r = np.asarray(evaluator(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise EvaluationError(x)
    return r


def init_set(problem, x0, delta0, evaluator=None):
    """Coordinate interpolation set {x0, x0 + delta0 e_1, ..., x0 + delta0 e_d}.

    Costs d+1 evaluations of ``evaluator`` (``problem.residual`` when not
    given). Raises EvaluationError naming the offending point if any
    residual is non-finite.
    """
    if not delta0 > 0:
        raise ValueError(f"delta0 must be positive, got {delta0}")
    x0 = np.asarray(x0, dtype=float)
    evaluator = problem.residual if evaluator is None else evaluator
    d = x0.shape[0]
    points = np.vstack([x0, x0 + delta0 * np.eye(d)])
    r0 = _checked_residual(evaluator, points[0])
    residuals = np.empty((d + 1, r0.shape[0]), order="F")
    residuals[0] = r0
    for t in range(1, d + 1):
        residuals[t] = _checked_residual(evaluator, points[t])
    return InterpolationSet(points, residuals, base=0)


def _factor(W):
    """LU factors of W and a 1-norm condition estimate (inf when singular)."""
    if not np.all(np.isfinite(W)):
        return None, np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(W, check_finite=False)
    if np.any(np.diag(lu) == 0.0):
        return (lu, piv), np.inf
    anorm = np.abs(W).sum(axis=0).max()
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or rcond <= 0.0:
        return (lu, piv), np.inf
    return (lu, piv), 1.0 / rcond


@dataclass(eq=False)
class InterpolationSystem:
    """W and its factorisation for one interpolation set.

    R is formed on first use only; the sketched solve never needs it.
    """

    iset: InterpolationSet
    W: np.ndarray
    lu: tuple
    cond: float
    _others: list = field(repr=False, default=None)

    @cached_property
    def R(self):
        res_t = self.iset.residuals.T
        return (res_t[:, self._others] - res_t[:, [self.iset.base]]).T


def assemble_system(iset, timers=None, counts=None):
    """Build and factorise W for ``iset``.

    Raises GeometryError when W is singular or its condition estimate
    exceeds KAPPA_SOLVE.
    """
    with maybe_task(timers, "interp_solve"):
        W = iset.displacements()
        lu, cond = _factor(W)
        record(counts, "interp_solve_flops", iset.d**3)
    if not cond <= KAPPA_SOLVE:
        raise GeometryError(f"interpolation matrix is singular to working precision (cond ~ {cond:.3g})")
    return InterpolationSystem(iset, W, lu, cond, iset.others)


def solve_full_jacobian(sys, timers=None, counts=None):
    """Solve W J^T = R for the full (n, d) model Jacobian."""
    with maybe_task(timers, "interp_solve"):
        R = sys.R
        jt = sla.lu_solve(sys.lu, R, check_finite=False)
        record(counts, "interp_solve_flops", 2 * R.shape[1] * R.shape[0] ** 2)
    return jt.T


def solve_sketched_jacobian(sys, S, r_base=None, timers=None, counts=None):
    """Solve W (SJ)^T = R S^T for the sketched Jacobian SJ of shape (m, d).

    R S^T is obtained by sketching every stored residual once and then
    differencing against the base row, so R itself is never formed. The
    base row of that product is S r(x_k); pass ``r_base`` to sketch a
    different vector instead.

    Returns
    -------
    SJ : (m, d) ndarray
    Sr : (m,) ndarray
    """
    iset = sys.iset
    if S.n != iset.n:
        raise ValueError(f"sketch has {S.n} columns but residuals have length {iset.n}")
    with maybe_task(timers, "sketch_apply"):
        sk = apply_to_matrix_right(S, iset.residuals, counts)
        rst = sk[sys._others] - sk[iset.base]
        if r_base is None:
            sr = sk[iset.base].copy()
        else:
            sr = apply_to_vector(S, r_base, counts)
    with maybe_task(timers, "interp_solve"):
        sjt = sla.lu_solve(sys.lu, rst, check_finite=False)
        record(counts, "interp_solve_flops", 2 * S.m * iset.d**2)
    return sjt.T, sr


@dataclass(eq=False)
class QuadraticModel:
    """m(s) = c + g^T s + 0.5 s^T H s with H = jac^T jac.

    ``c`` is only computed on request when no base objective value was
    supplied, since the step and the acceptance ratio never need it.
    """

    g: np.ndarray
    H: np.ndarray
    jac: np.ndarray
    resid: np.ndarray
    f_base: float = None

    @cached_property
    def c(self):
        if self.f_base is not None:
            return float(self.f_base)
        return 0.5 * float(self.resid @ self.resid)


def build_model(jac, resid, f_base=None, timers=None, counts=None):
    jac = np.asarray(jac, dtype=float)
    resid = np.asarray(resid, dtype=float)
    if jac.ndim != 2 or resid.shape != (jac.shape[0],):
        raise ValueError(f"Jacobian {jac.shape} and residual {resid.shape} do not match")
    with maybe_task(timers, "model_build"):
        jt = jac.T
        g = jt @ resid
        H = jt @ jac
        rows, d = jac.shape
        record(counts, "model_build_flops", rows * d + rows * d * d)
    return QuadraticModel(g, H, jac, resid, f_base)


def model_value(model, s):
    s = np.asarray(s, dtype=float)
    if s.shape != model.g.shape:
        raise ValueError(f"step of shape {model.g.shape} expected, got {s.shape}")
    return model.c + float(model.g @ s) + 0.5 * float(s @ (model.H @ s))


def geometry_score(iset, delta):
    """Condition estimate of the scaled displacement matrix W / delta.

    Uses the LAPACK 1-norm estimator on an LU factorisation, so it costs
    O(d^3) flops with a small constant. Returns inf for a singular matrix.
    """
    return _factor(iset.displacements() / delta)[1]


def _score_matrix(W_hat):
    return _factor(W_hat)[1]


def _place(iset, slot, direction, delta, evaluator):
    """Evaluate base +- delta * direction (sign farthest from the rest) into ``slot``."""
    base = iset.base_point
    keep = np.delete(iset.points, slot, axis=0)
    cands = [base + delta * direction, base - delta * direction]
    gaps = [np.min(np.linalg.norm(keep - c, axis=1)) for c in cands]
    if max(gaps) == 0.0:
        return False
    new_point = cands[int(np.argmax(gaps))]
    r = _checked_residual(evaluator, new_point)
    iset.replace(slot, new_point, r)
    return True


def _improve_geometry(iset, delta, evaluator, score):
    """Move one point along the weakest direction of W / delta.

    Rows with the largest weight in the left singular vector of the
    smallest singular value are tried as the point to drop; the one giving
    the lowest score after replacement wins.
    """
    others = iset.others
    W_hat = (iset.points[others] - iset.base_point) / delta
    if not np.all(np.isfinite(W_hat)):
        return False
    u, _, vt = np.linalg.svd(W_hat)
    v = vt[-1]
    order = np.argsort(-np.abs(u[:, -1]), kind="stable")[:_MAX_GEOMETRY_CANDIDATES]
    best_row, best_score = None, score
    for row in order:
        trial = W_hat.copy()
        trial[row] = v
        sc = _score_matrix(trial)
        if sc < best_score:
            best_row, best_score = row, sc
    if best_row is None:
        return False
    return _place(iset, others[best_row], v, delta, evaluator)


def _replace_far_point(iset, delta, lu, far_factor, evaluator):
    """Swap the farthest non-base point, if beyond far_factor * delta, for a nearby one.

    The new direction is orthogonal to every other displacement: column
    ``row`` of (W / delta)^{-1}, obtained from the existing factorisation.
    """
    others = iset.others
    dist = np.linalg.norm(iset.points[others] - iset.base_point, axis=1)
    row = int(np.argmax(dist))
    if dist[row] <= far_factor * delta or lu is None:
        return False
    e = np.zeros(iset.d)
    e[row] = 1.0
    v = sla.lu_solve(lu, e, check_finite=False)
    nv = np.linalg.norm(v)
    if not np.isfinite(nv) or nv == 0.0:
        return False
    return _place(iset, others[row], v / nv, delta, evaluator)


def update_set(iset, new_point, new_residual, accepted, delta, evaluator=None,
               kappa_geom=KAPPA_GEOM, far_factor=None, timers=None):
    """Insert a freshly evaluated point and repair geometry if needed.

    Accepted points become the new base and evict the point farthest from
    them; rejected points evict the non-base point farthest from the
    current base. With an ``evaluator``, at most one extra evaluation is
    then spent:

    * if the condition estimate of W / delta exceeds ``kappa_geom``, one
      point is moved to base + delta * v with v the weakest right-singular
      direction;
    * otherwise, after a rejected step and with ``far_factor`` set, the
      farthest point is moved within delta of the base if it lies beyond
      ``far_factor * delta``.

    ``iset.last_improved`` reports whether the extra evaluation happened.
    The set is modified in place and returned.
    """
    new_point = np.asarray(new_point, dtype=float)
    new_residual = np.asarray(new_residual, dtype=float)
    if np.any(np.all(iset.points == new_point, axis=1)):
        raise ValueError("new point coincides with an existing interpolation point")
    with maybe_task(timers, "geometry"):
        if accepted:
            dist = np.linalg.norm(iset.points - new_point, axis=1)
            slot = int(np.argmax(dist))
            iset.replace(slot, new_point, new_residual)
            iset.base = slot
        else:
            others = iset.others
            dist = np.linalg.norm(iset.points[others] - iset.base_point, axis=1)
            slot = others[int(np.argmax(dist))]
            iset.replace(slot, new_point, new_residual)
        iset.last_improved = False
        if evaluator is not None:
            lu, score = _factor(iset.displacements() / delta)
            if score > kappa_geom:
                iset.last_improved = _improve_geometry(iset, delta, evaluator, score)
            elif far_factor is not None and not accepted:
                iset.last_improved = _replace_far_point(iset, delta, lu, far_factor, evaluator)
    return iset
