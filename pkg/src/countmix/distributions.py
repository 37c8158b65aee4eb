"""Log-densities and random draws for the count-mixture model.

Everything is evaluated in log space.  The functions accept scalars or
numpy arrays (broadcasting applies) and are the only place the model ever
touches a special function: ``log_gamma`` is self-contained, so the core
library needs nothing beyond numpy.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "log_gamma",
    "negbin_log_pmf",
    "zinb_log_pmf",
    "sample_negbin",
    "sample_dirichlet",
    "sample_categorical",
]

# Lanczos approximation, g = 607/128 with 15 coefficients (Godfrey's set).
# Relative error is at float64 machine precision over (0, 1e6].
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = np.array([
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _log_gamma_raw(x: np.ndarray) -> np.ndarray:
    """Lanczos ln Gamma, no validation.  x must be positive."""
    # Shift arguments below 0.5 up by one and divide by x afterwards:
    # ln G(x) = ln G(x+1) - ln x.  Keeps the series well conditioned near 0.
    small = x < 0.5
    z = np.where(small, x + 1.0, x)
    s = np.full_like(z, _LANCZOS_C[0])
    for k in range(1, len(_LANCZOS_C)):
        s += _LANCZOS_C[k] / (z + (k - 1.0))
    t = z + (_LANCZOS_G - 0.5)
    out = _HALF_LOG_2PI + (z - 0.5) * np.log(t) - t + np.log(s)
    return np.where(small, out - np.log(np.where(small, x, 1.0)), out)


def log_gamma(x):
    """ln Gamma(x) for x > 0.

    Scalar in, scalar out; array in, array out.  Raises ValueError on
    non-positive or non-finite input.
    """
    arr = np.asarray(x, dtype=float)
    if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr <= 0.0)):
        raise ValueError("log_gamma requires finite x > 0")
    out = _log_gamma_raw(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def _validate_nb_params(mu, psi):
    mu = np.asarray(mu, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if mu.size and (not np.all(np.isfinite(mu)) or np.any(mu <= 0.0)):
        raise ValueError("negative binomial mean must be finite and > 0")
    if psi.size and (not np.all(np.isfinite(psi)) or np.any(psi <= 0.0)):
        raise ValueError("negative binomial precision must be finite and > 0")
    return mu, psi


def _validate_counts(y):
    arr = np.asarray(y)
    if arr.size and (np.any(arr < 0) or not np.all(np.floor(arr) == arr)):
        raise ValueError("counts must be non-negative integers")
    return arr.astype(float)


def _nb_logpmf_raw(y: np.ndarray, mu: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Mean/precision NB log pmf, no validation.  Broadcasts."""
    log_psi_mu = np.log(psi + mu)
    return (
        _log_gamma_raw(y + psi)
        - _log_gamma_raw(psi)
        - _log_gamma_raw(y + 1.0)
        + psi * (np.log(psi) - log_psi_mu)
        + y * (np.log(mu) - log_psi_mu)
    )


def negbin_log_pmf(y, mu, psi):
    """Log pmf of the Negative Binomial with mean ``mu`` and precision ``psi``.

    Variance is mu + mu**2/psi; psi -> inf recovers the Poisson.  With
    psi = 1 this is the geometric pmf with success probability 1/(1+mu).
    """
    yf = _validate_counts(y)
    mu, psi = _validate_nb_params(mu, psi)
    out = _nb_logpmf_raw(yf, mu, psi)
    scalar = np.isscalar(y) and np.isscalar(mu) and np.isscalar(psi)
    return float(out) if scalar else out


def zinb_log_pmf(y, pi, mu, psi):
    """Log pmf of the zero-inflated NB: point mass pi at zero plus (1-pi)*NB."""
    pi_arr = np.asarray(pi, dtype=float)
    if pi_arr.size and (not np.all(np.isfinite(pi_arr)) or np.any(pi_arr < 0.0) or np.any(pi_arr > 1.0)):
        raise ValueError("zero-inflation probability must lie in [0, 1]")
    yf = _validate_counts(y)
    mu, psi = _validate_nb_params(mu, psi)
    nb = _nb_logpmf_raw(yf, mu, psi)
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi_arr)
        log_1mpi = np.log1p(-pi_arr)
    deflated = log_1mpi + nb
    out = np.where(yf == 0, np.logaddexp(np.broadcast_to(log_pi, deflated.shape), deflated), deflated)
    scalar = all(np.isscalar(v) for v in (y, pi, mu, psi))
    return float(out) if scalar else out


# Poisson draws overflow for enormous rates; above this we switch to the
# (exact-in-the-limit) normal approximation rounded to a count.
_POISSON_NORMAL_CUTOFF = 1e8


def sample_negbin(mu, psi, rng: np.random.Generator, size=None):
    """Draw NB counts via the gamma-Poisson mixture.

    lambda ~ Gamma(shape=psi, mean=mu), y ~ Poisson(lambda); the marginal
    law matches ``negbin_log_pmf``.
    """
    scalar_params = np.isscalar(mu) and np.isscalar(psi)
    mu, psi = _validate_nb_params(mu, psi)
    lam = rng.gamma(shape=psi, scale=mu / psi, size=size)
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    big = lam_arr > _POISSON_NORMAL_CUTOFF
    safe = np.where(big, 0.0, lam_arr)
    draws = rng.poisson(safe).astype(np.int64)
    if np.any(big):
        approx = rng.normal(lam_arr[big], np.sqrt(lam_arr[big]))
        draws[big] = np.maximum(0, np.rint(approx)).astype(np.int64)
    if size is None and scalar_params:
        return int(draws[0])
    return draws.reshape(np.shape(lam))


def sample_dirichlet(alphas, rng: np.random.Generator) -> np.ndarray:
    """One Dirichlet(alphas) draw via normalized Gamma variates."""
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1 or alphas.size < 1:
        raise ValueError("alphas must be a non-empty vector")
    if not np.all(np.isfinite(alphas)) or np.any(alphas <= 0.0):
        raise ValueError("Dirichlet parameters must be finite and > 0")
    g = rng.standard_gamma(alphas)
    total = g.sum()
    if total <= 0.0:
        # All gammas underflowed (only possible for extreme alphas); fall
        # back to a one-hot draw proportional to alphas.
        g = np.zeros_like(alphas)
        g[sample_categorical(alphas / alphas.sum(), rng)] = 1.0
        total = 1.0
    return g / total


def sample_categorical(weights, rng: np.random.Generator) -> int:
    """Draw an index with probability proportional to ``weights``."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("weights must be a non-empty vector")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be non-negative and finite")
    total = w.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1 (got {total!r})")
    cum = np.cumsum(w)
    cum[-1] = total  # guard against rounding in the final bin
    return int(np.searchsorted(cum, rng.random() * total, side="right"))
