"""Pure-numpy reference kernels for the coverage welfare objective.

Problem data is flattened to three arrays: ``eplayer`` (E,) owning player of
each element, ``eweight`` (E,) element weights, ``emask`` (E, m) 0/1 item
membership. ``x`` is the (n, m) fractional allocation; player i wins item j
with probability ``1 - exp(-x[i, j])``, so element e of player p is covered
with probability ``1 - exp(-sum_{j in e} x[p, j])``.
"""

import numpy as np


def marginals(x):
    return -np.expm1(-np.asarray(x, dtype=float))


def _exposure(x, eplayer, emask):
    # total fractional mass on the items covering each element
    return np.einsum("ej,ej->e", emask.astype(float), x[eplayer])


def welfare(x, eplayer, eweight, emask):
    x = np.asarray(x, dtype=float)
    if x.size == 0 or eweight.size == 0:
        return 0.0
    t = _exposure(x, eplayer, emask)
    return float(np.dot(eweight, -np.expm1(-t)))


def welfare_and_grad(x, eplayer, eweight, emask):
    x = np.asarray(x, dtype=float)
    grad = np.zeros(x.shape)
    if x.size == 0 or eweight.size == 0:
        return 0.0, grad
    t = _exposure(x, eplayer, emask)
    w_val = float(np.dot(eweight, -np.expm1(-t)))
    contrib = (eweight * np.exp(-t))[:, None] * emask
    np.add.at(grad, eplayer, contrib)
    return w_val, grad


def project_columns(x):
    """Euclidean projection of each column onto {y >= 0, sum(y) <= 1}."""
    x = np.array(x, dtype=float, copy=True)
    if x.size == 0:
        return x
    clipped = np.maximum(x, 0.0)
    over = clipped.sum(axis=0) > 1.0
    if np.any(over):
        v = x[:, over].T                               # rows = offending columns
        u = -np.sort(-v, axis=1)
        css = np.cumsum(u, axis=1) - 1.0
        ind = np.arange(1, v.shape[1] + 1)
        rho = np.count_nonzero(u - css / ind > 0, axis=1)
        theta = css[np.arange(len(v)), rho - 1] / rho
        clipped[:, over] = np.maximum(v - theta[:, None], 0.0).T
    return clipped


def ascend(x0, eplayer, eweight, emask, step, tol, max_iter):
    """Projected gradient ascent with step halving on insufficient ascent.

    Returns ``(x, objective, iterations, residual, converged)`` where
    ``residual`` is the norm of the gradient mapping at the returned point.
    """
    x = project_columns(x0)
    w_val, g = welfare_and_grad(x, eplayer, eweight, emask)
    eta = float(step)
    residual = np.inf
    for it in range(int(max_iter)):
        x_new = project_columns(x + eta * g)
        gm = (x_new - x) / eta
        residual = float(np.sqrt(np.sum(gm * gm)))
        if residual <= tol:
            return x, w_val, it, residual, True
        w_new, g_new = welfare_and_grad(x_new, eplayer, eweight, emask)
        slack = 1e-12 * max(1.0, abs(w_val))
        if w_new < w_val + 0.5 * eta * residual * residual - slack and eta > 1e-12:
            eta *= 0.5
            continue
        x, w_val, g = x_new, w_new, g_new
    return x, w_val, int(max_iter), residual, False
