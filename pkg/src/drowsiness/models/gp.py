"""Exact Gaussian-process regression with an RBF kernel.

The prior has unit signal variance, ``k(x, z) = exp(-|x - z|^2 / (2 l^2))``,
and a constant mean equal to the training-target mean. Fitting factors
``K + (noise + jitter) I`` by Cholesky, starting at jitter 1e-8 and retrying
with ten times more jitter up to 1e-2. Predictions follow the usual
conditioning identities::

    mean = k_*^T alpha + y_mean,   alpha = (K + s I)^-1 (y - y_mean)
    var  = 1 - |L^-1 k_*|^2

Classification regresses one +/-1 indicator per class and predicts the class
with the largest latent mean.
"""

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from ..errors import NumericalError

JITTERS = tuple(10.0 ** e for e in range(-8, -1))


def rbf(A, B, length_scale):
    return np.exp(-cdist(np.atleast_2d(A), np.atleast_2d(B), "sqeuclidean") / (2.0 * length_scale**2))


def fit_gp(X, Y, length_scale: float, noise: float) -> dict:
    """``Y`` is ``[n]`` or ``[n x outputs]``; all outputs share one factorization."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    K = rbf(X, X, length_scale)
    n = X.shape[0]
    for jitter in JITTERS:
        try:
            L = linalg.cholesky(K + (noise + jitter) * np.eye(n), lower=True)
            break
        except linalg.LinAlgError:
            continue
    else:
        raise NumericalError(f"Cholesky failed for length_scale={length_scale}, noise={noise} at jitter 1e-2")
    y_mean = Y.mean(axis=0)
    alpha = linalg.cho_solve((L, True), Y - y_mean)
    return {"X": X, "L": L, "alpha": alpha, "y_mean": y_mean, "jitter": jitter,
            "length_scale": float(length_scale)}


def predict_gp(state, X, return_var: bool = False):
    Ks = rbf(X, state["X"], state["length_scale"])
    mean = Ks @ state["alpha"] + state["y_mean"]
    if not return_var:
        return mean
    v = linalg.solve_triangular(state["L"], Ks.T, lower=True)
    var = np.maximum(1.0 - np.sum(v * v, axis=0), 0.0)
    return mean, var
