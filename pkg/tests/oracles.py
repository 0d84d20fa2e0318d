"""Independent reference computations used by the tests.

Each oracle recomputes a quantity from its definition with plain numpy loops
or dense linear algebra, sharing no code path with the package.
"""

import numpy as np
from scipy.optimize import linear_sum_assignment


# --- statistics -------------------------------------------------------------

def percentile_sorted(x, p):
    """Linear interpolation between order statistics at position (N - 1) p."""
    s = sorted(float(v) for v in x)
    pos = (len(s) - 1) * p / 100.0
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(s) - 1)
    frac = pos - lo
    return s[lo] + (s[hi] - s[lo]) * frac


def stats_oracle(x):
    x = [float(v) for v in x]
    n = len(x)
    mean = sum(x) / n
    var = sum((v - mean) ** 2 for v in x) / n
    return np.array([mean, var ** 0.5, var] + [percentile_sorted(x, p) for p in (5, 25, 50, 75, 95)])


# --- spectra ----------------------------------------------------------------

def welch_oracle(x, fs=200.0, nseg=400, step=200):
    """Averaged periodograms of periodic-Hann segments, one-sided density."""
    x = np.asarray(x, dtype=np.float64)
    k = np.arange(nseg)
    w = 0.5 - 0.5 * np.cos(2 * np.pi * k / nseg)
    scale = fs * np.sum(w * w)
    starts = range(0, x.shape[0] - nseg + 1, step)
    acc = 0.0
    count = 0
    for s in starts:
        seg = x[s:s + nseg] * w[:, None]
        X = np.fft.rfft(seg, axis=0)
        P = (X.real ** 2 + X.imag ** 2) / scale
        P[1:-1] *= 2.0  # even nseg: Nyquist bin is not doubled
        acc = acc + P
        count += 1
    freqs = np.arange(nseg // 2 + 1) * fs / nseg
    return freqs, acc / count


def band_powers_oracle(epoch, bands, fs=200.0):
    freqs, P = welch_oracle(epoch, fs)
    out = []
    for b in bands:
        sel = [i for i, f in enumerate(freqs) if b.lo <= f < b.hi]
        out.append(np.mean([P[i].mean() for i in sel]))
    return np.array(out)


def dft_peak_hz(x, fs):
    x = np.asarray(x, dtype=np.float64) - np.mean(x)
    spec = np.abs(np.fft.rfft(x * np.hanning(x.size)))
    return np.argmax(spec) * fs / x.size


# --- filters ----------------------------------------------------------------

def sos_gain(sos, f, fs):
    """|H(e^{jw})| evaluated directly from the section polynomials."""
    z = np.exp(1j * 2 * np.pi * f / fs)
    h = 1.0 + 0j
    for b0, b1, b2, a0, a1, a2 in sos:
        h *= (b0 + b1 / z + b2 / z ** 2) / (a0 + a1 / z + a2 / z ** 2)
    return abs(h)


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


# --- ICA --------------------------------------------------------------------

def match_sources(true, est):
    """Hungarian matching on |corr|; returns matched |corr| per true source."""
    k = true.shape[1]
    c = np.abs(np.corrcoef(true.T, est.T)[:k, k:])
    r, cidx = linear_sum_assignment(-c)
    return c[r, cidx]


def three_source_mixture(seed, n=6000, channels=17, noise=0.05):
    """Uniform, Laplacian and square-wave sources mixed into ``channels`` dims."""
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    S = np.column_stack([
        rng.uniform(-np.sqrt(3), np.sqrt(3), n),
        rng.laplace(0, 1 / np.sqrt(2), n),
        np.sign(np.sin(2 * np.pi * t / (97 + rng.integers(0, 40)))),
    ])
    A = rng.standard_normal((channels, 3))
    X = S @ A.T + noise * rng.standard_normal((n, channels))
    return X, S, A


def blink_mixture(seed, n=6000, channels=17):
    """Spiky blink train mixed mostly into channel 0 plus independent sources.

    Returns ``(X, eog)``; the EOG trace is exactly the blink source.
    """
    rng = np.random.default_rng(seed)
    eog = np.zeros(n)
    pulse = np.sin(np.linspace(0, 2 * np.pi, 60))
    for s in range(100, n - 100, 173 + int(rng.integers(0, 60))):
        eog[s:s + 60] += 5 * pulse
    sources = [eog]
    for _ in range(channels - 1):
        sources.append(rng.laplace(0, 1, n) if rng.random() < 0.5 else rng.uniform(-2, 2, n))
    S = np.column_stack(sources)
    A = rng.standard_normal((channels, channels)) * 0.5 + np.eye(channels) * 2.0
    A[0, 0] = 4.0
    X = S @ A.T
    return X, eog


# --- SVM --------------------------------------------------------------------

def kkt_violation(K, labels, alpha, rho, C):
    """Largest KKT violation of a binary soft-margin SVM solution.

    With ``m_i = y_i f(x_i)``: ``alpha = 0`` needs ``m >= 1``, ``0 < alpha < C``
    needs ``m = 1`` and ``alpha = C`` needs ``m <= 1``; also ``sum y alpha = 0``.
    """
    y = np.asarray(labels, dtype=np.float64)
    f = K @ (y * alpha) - rho
    m = y * f
    worst = abs(float(np.dot(y, alpha)))
    eps = 1e-12 * C
    for ai, mi in zip(alpha, m):
        if ai <= eps:
            worst = max(worst, 1.0 - mi)
        elif ai >= C - eps:
            worst = max(worst, mi - 1.0)
        else:
            worst = max(worst, abs(mi - 1.0))
    return worst


# --- GP ---------------------------------------------------------------------

def gp_dense_mean(X, y, Xs, length_scale, noise_total):
    def k(a, b):
        d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
        return np.exp(-d / (2 * length_scale ** 2))
    ym = y.mean()
    Kxx = k(X, X) + noise_total * np.eye(X.shape[0])
    return k(Xs, X) @ np.linalg.solve(Kxx, y - ym) + ym


# --- kNN --------------------------------------------------------------------

def knn_vote_bruteforce(X, y, q, k, n_classes=3):
    d = [(float(np.sum((X[i] - q) ** 2)), i) for i in range(X.shape[0])]
    d.sort()
    counts = [0] * n_classes
    for _, i in d[:k]:
        counts[int(y[i])] += 1
    best = max(counts)
    return counts.index(best)
