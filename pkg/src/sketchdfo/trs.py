"""Trust-region subproblem via Steihaug-Toint truncated conjugate gradients."""

import numpy as np

EPS_H = 1e-15


def _to_boundary(s, p, delta):
    """Largest tau >= 0 with ||s + tau p|| = delta."""
    pp = p @ p
    sp_ = s @ p
    ss = s @ s
    disc = sp_ * sp_ + pp * (delta * delta - ss)
    disc = max(disc, 0.0)
    # numerically stable root of pp tau^2 + 2 sp tau + (ss - delta^2) = 0
    if sp_ >= 0:
        return (delta * delta - ss) / (sp_ + np.sqrt(disc))
    return (np.sqrt(disc) - sp_) / pp


def solve_trs(model, delta, tol=None, maxiter=None):
    """Approximately minimise g^T s + 0.5 s^T H s subject to ||s|| <= delta.

    Parameters
    ----------
    model : QuadraticModel or tuple (g, H)
    delta : float
        Trust-region radius.
    tol : float, optional
        Absolute tolerance on the CG residual ||H s + g||. The default is
        min(0.1, sqrt(||g||)) * ||g||.
    maxiter : int, optional
        Defaults to d.

    Returns
    -------
    s : ndarray
    predicted_decrease : float
        m(0) - m(s), always >= 0.
    """
    if not delta > 0:
        raise ValueError(f"trust-region radius must be positive, got {delta}")
    if isinstance(model, tuple):
        g, H = model
    else:
        g, H = model.g, model.H
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    d = g.shape[0]
    s = np.zeros(d)
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return s, 0.0
    if tol is None:
        tol = min(0.1, np.sqrt(gnorm)) * gnorm
    if maxiter is None:
        maxiter = d

    r = g.copy()
    p = -r
    rr = gnorm * gnorm
    for _ in range(maxiter):
        Hp = H @ p
        curv = float(p @ Hp)
        # Rayleigh-quotient test; on the first pass p = -g so this is eps * ||g||^2
        if curv <= EPS_H * float(p @ p):
            s = s + _to_boundary(s, p, delta) * p
            break
        alpha = rr / curv
        s_next = s + alpha * p
        if s_next @ s_next >= delta * delta:
            s = s + _to_boundary(s, p, delta) * p
            break
        s = s_next
        r = r + alpha * Hp
        rr_next = float(r @ r)
        if np.sqrt(rr_next) <= tol:
            break
        p = -r + (rr_next / rr) * p
        rr = rr_next

    snorm = np.linalg.norm(s)
    if snorm > delta:
        s *= delta / snorm
    pred = -float(g @ s) - 0.5 * float(s @ (H @ s))
    return s, max(pred, 0.0)
