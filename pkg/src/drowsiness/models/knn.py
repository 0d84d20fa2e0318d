"""k-nearest neighbours under Euclidean distance.

Neighbours are ranked by squared distance with a stable sort, so equal
distances resolve to the lower training row. Classification takes a majority
vote (ties to the smaller class), regression the neighbour mean.
"""

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import ParameterError

_CHUNK = 2048


def neighbours(X_train, X, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest training rows for each query row."""
    X_train = np.asarray(X_train, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if not 1 <= k <= X_train.shape[0]:
        raise ParameterError(f"k={k} must lie in [1, n_train={X_train.shape[0]}]")
    out = np.empty((X.shape[0], k), dtype=np.int64)
    for start in range(0, X.shape[0], _CHUNK):
        d = cdist(X[start:start + _CHUNK], X_train, "sqeuclidean")
        out[start:start + _CHUNK] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def predict_knn(X_train, y_train, X, k: int, classification: bool, n_classes: int = 3) -> np.ndarray:
    nb = neighbours(X_train, X, k)
    targets = np.asarray(y_train)[nb]
    if not classification:
        return targets.astype(np.float64).mean(axis=1)
    codes = targets.astype(np.int64)
    counts = np.stack([(codes == c).sum(axis=1) for c in range(n_classes)], axis=1)
    return np.argmax(counts, axis=1)
