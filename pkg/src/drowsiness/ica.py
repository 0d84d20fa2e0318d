"""Symmetric FastICA (log-cosh contrast) and EOG-guided blink removal.

Conventions, with ``X`` the ``[n x c]`` data and ``mu`` its column means::

    Z       = (X - mu) @ whitening.T          PCA whitening, all c components kept
    sources = Z @ rotation.T = (X - mu) @ unmixing.T
    unmixing = rotation @ whitening           mixing = inv(unmixing)
    X       = sources @ mixing.T + mu

``rotation`` is orthogonal, so every source has unit (population) variance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AlignmentError, DegenerateInputError, ParameterError

EIGEN_CUTOFF = 1e-10


@dataclass(frozen=True, eq=False)
class IcaDecomposition:
    unmixing: np.ndarray
    mixing: np.ndarray
    sources: np.ndarray
    whitening: np.ndarray
    means: np.ndarray
    converged: bool
    iterations: int

    @property
    def n_components(self) -> int:
        return self.unmixing.shape[0]


def _sym_decorrelate(w):
    # W <- (W W^T)^(-1/2) W
    s, u = np.linalg.eigh(w @ w.T)
    s = np.clip(s, np.finfo(float).tiny, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def fit_fastica(X, seed: int = 0, max_iter: int = 500, tol: float = 1e-5) -> IcaDecomposition:
    """Parallel FastICA on mean-removed, PCA-whitened data.

    Stops once ``max |(|diag(W_new W_old^T)| - 1)| < tol``; hitting
    ``max_iter`` first is reported through ``converged=False``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ParameterError("X must be a [n_samples x n_channels] matrix")
    n, c = X.shape
    if n < c:
        raise DegenerateInputError(f"need at least {c} samples for {c} channels, got {n}")
    if not np.all(np.isfinite(X)):
        raise ParameterError("X contains non-finite values")

    means = X.mean(axis=0)
    Xc = X - means
    cov = (Xc.T @ Xc) / n
    evals, evecs = np.linalg.eigh(cov)
    if evals[-1] <= 0 or evals[0] < EIGEN_CUTOFF * evals[-1]:
        raise DegenerateInputError(
            f"covariance is rank deficient (eigenvalue ratio {evals[0] / max(evals[-1], 1e-300):.3g})"
        )
    whitening = (evecs / np.sqrt(evals)).T
    Z = Xc @ whitening.T

    rng = np.random.default_rng(int(seed))
    w = _sym_decorrelate(rng.standard_normal((c, c)))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        y = Z @ w.T
        g = np.tanh(y)
        g_prime_mean = (1.0 - g**2).mean(axis=0)
        w_new = (g.T @ Z) / n - g_prime_mean[:, None] * w
        w_new = _sym_decorrelate(w_new)
        change = np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0))
        w = w_new
        if change < tol:
            converged = True
            break

    unmixing = w @ whitening
    mixing = np.linalg.inv(unmixing)
    sources = Xc @ unmixing.T
    return IcaDecomposition(
        unmixing=unmixing,
        mixing=mixing,
        sources=sources,
        whitening=whitening,
        means=means,
        converged=converged,
        iterations=it,
    )


def _abs_corr(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a @ a) * (b @ b))
    return 0.0 if den == 0 else abs(float(a @ b) / den)


def flag_artifact_components(dec: IcaDecomposition, eog, r_threshold: float = 0.6) -> set[int]:
    """Components whose |Pearson r| with the time-aligned EOG exceeds ``r_threshold``."""
    eog = np.asarray(eog, dtype=np.float64)
    if eog.shape[0] != dec.sources.shape[0]:
        raise AlignmentError(f"eog has {eog.shape[0]} samples, sources have {dec.sources.shape[0]}")
    return {j for j in range(dec.n_components) if _abs_corr(dec.sources[:, j], eog) > r_threshold}


def reconstruct_without(dec: IcaDecomposition, removed) -> np.ndarray:
    removed = sorted(set(int(i) for i in removed))
    for i in removed:
        if not 0 <= i < dec.n_components:
            raise ParameterError(f"component index {i} outside [0, {dec.n_components})")
    s = dec.sources.copy()
    s[:, removed] = 0.0
    return s @ dec.mixing.T + dec.means


def write_ica_dump(dec: IcaDecomposition, flagged, path) -> None:
    """Debug dump ``ica.json``: keys ``unmixing``, ``mixing`` (row-major lists),
    ``flagged`` (sorted indices), ``converged`` and ``iterations``."""
    payload = {
        "unmixing": dec.unmixing.tolist(),
        "mixing": dec.mixing.tolist(),
        "flagged": sorted(int(i) for i in flagged),
        "converged": bool(dec.converged),
        "iterations": int(dec.iterations),
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
