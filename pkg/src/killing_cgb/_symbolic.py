"""Turn sympy component expressions into batched numpy evaluators with exact derivatives."""

from __future__ import annotations

import numpy as np
import sympy as sp


def lambdify_array(exprs, coords):
    arr = sp.Array(exprs)
    shape = arr.shape
    flat = list(sp.flatten(arr.tolist())) if shape else [arr]
    fn = sp.lambdify(coords, flat, modules="numpy", cse=True)
    n = len(coords)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        vals = fn(*(x[..., i] for i in range(n)))
        out = np.empty(x.shape[:-1] + tuple(shape))
        for idx, v in zip(np.ndindex(*shape), vals):
            out[(...,) + idx] = v
        return out

    return evaluate


def metric_functions(g: sp.Matrix, coords):
    """Evaluators for ``g``, ``d_k g_ij`` and ``d_k d_l g_ij``."""
    n = len(coords)
    dg = [[[sp.diff(g[i, j], coords[k]) for j in range(n)] for i in range(n)] for k in range(n)]
    d2g = [
        [[[sp.diff(dg[k][i][j], coords[l]) for j in range(n)] for i in range(n)] for l in range(n)]
        for k in range(n)
    ]
    return lambdify_array(g.tolist(), coords), lambdify_array(dg, coords), lambdify_array(d2g, coords)


def vector_field_functions(X, coords):
    """Evaluators for ``X^a``, ``d_k X^a`` (index ``[k, a]``) and ``d_k d_l X^a``."""
    n = len(coords)
    dX = [[sp.diff(X[a], coords[k]) for a in range(n)] for k in range(n)]
    d2X = [[[sp.diff(dX[k][a], coords[l]) for a in range(n)] for l in range(n)] for k in range(n)]
    return lambdify_array(list(X), coords), lambdify_array(dX, coords), lambdify_array(d2X, coords)
