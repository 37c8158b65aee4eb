"""Model state containers, joint density pieces, and the synthetic generator.

The mixture has k_max components with symmetric Dirichlet(alpha0) weights;
with alpha0 << 1 superfluous components empty out, so the occupied count is
inferred from data rather than fixed in advance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .distributions import (
    _log_gamma_raw,
    _nb_logpmf_raw,
    log_gamma,
    sample_negbin,
)

__all__ = [
    "Dataset",
    "Hyperparams",
    "ModelSpec",
    "ParamState",
    "CovariateColumn",
    "LINPRED_CLAMP",
    "component_mean",
    "linear_predictor",
    "loglik_matrix",
    "complete_log_likelihood",
    "log_prior",
    "generate_synthetic",
]

# Linear predictors are clamped here before exponentiation so early MCMC
# wandering cannot produce inf/NaN means; clamping is counted per call site.
LINPRED_CLAMP = 50.0

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Hyperparams:
    """Prior configuration.  s0 and b0 are standard deviations."""

    alpha0: float = 0.1
    m0: float = 0.0
    s0: float = 10.0
    a0: float = 0.0
    b0: float = 2.0
    k_max: int = 10

    def __post_init__(self):
        if self.alpha0 <= 0 or self.s0 <= 0 or self.b0 <= 0:
            raise ValueError("alpha0, s0, b0 must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")


@dataclass(frozen=True)
class ModelSpec:
    variant: str = "nb"  # "nb" or "zinb"
    hyper: Hyperparams = field(default_factory=Hyperparams)
    pi_prior: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.variant not in ("nb", "zinb"):
            raise ValueError(f"unknown model variant {self.variant!r}")
        if min(self.pi_prior) <= 0:
            raise ValueError("pi_prior shapes must be positive")

    @property
    def zero_inflated(self) -> bool:
        return self.variant == "zinb"


class Dataset:
    """Immutable design matrix plus count outcome.

    Column 0 of X is the intercept (all ones).  Caches the unique-count
    decomposition of y and ln Gamma(y+1), which the sampler hot path reuses
    every sweep.
    """

    def __init__(self, y, X, column_names):
        y = np.asarray(y)
        X = np.asarray(X, dtype=float)
        if y.ndim != 1 or X.ndim != 2 or y.shape[0] != X.shape[0]:
            raise ValueError("y must be length N, X must be N x D")
        if y.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("need N >= 1 observations and D >= 1 columns")
        if np.any(y < 0) or not np.all(np.floor(np.asarray(y, dtype=float)) == y):
            raise ValueError("outcomes must be non-negative integers")
        if not np.all(np.isfinite(X)):
            raise ValueError("covariates must be finite")
        if not np.allclose(X[:, 0], 1.0):
            raise ValueError("column 0 of X must be the all-ones intercept")
        if len(column_names) != X.shape[1]:
            raise ValueError("column_names must match X's width")
        self.y = y.astype(np.int64)
        self.y.setflags(write=False)
        self.X = X
        self.X.setflags(write=False)
        self.column_names = tuple(column_names)
        self.y_unique, self.y_inverse = np.unique(self.y, return_inverse=True)
        self._yf = self.y.astype(float)
        self.log_gamma_y1 = _log_gamma_raw(self._yf + 1.0)
        self.zero_mask = self.y == 0

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __eq__(self, other):
        return (
            isinstance(other, Dataset)
            and self.column_names == other.column_names
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.X, other.X)
        )


@dataclass
class ParamState:
    """One full parameter configuration; chain-private, mutated in place."""

    c: np.ndarray                 # (K,) simplex
    beta: np.ndarray              # (K, D)
    psi: np.ndarray               # (K,) positive
    z: np.ndarray                 # (N,) component indices
    pi: np.ndarray | None = None  # (K,) zero-inflation probabilities
    w: np.ndarray | None = None   # (N,) structural-zero indicators

    def validate(self, data: Dataset | None = None, spec: ModelSpec | None = None):
        k = self.c.shape[0]
        if abs(self.c.sum() - 1.0) > 1e-9 or np.any(self.c < 0):
            raise ValueError("c must lie on the simplex")
        if self.beta.shape[0] != k or self.psi.shape[0] != k:
            raise ValueError("beta/psi leading dimension must match c")
        if np.any(self.psi <= 0) or not np.all(np.isfinite(self.psi)):
            raise ValueError("psi must be positive and finite")
        if not np.all(np.isfinite(self.beta)):
            raise ValueError("beta must be finite")
        if np.any(self.z < 0) or np.any(self.z >= k):
            raise ValueError("z indices out of range")
        if self.pi is not None and (np.any(self.pi < 0) or np.any(self.pi > 1)):
            raise ValueError("pi must lie in [0, 1]")
        if data is not None and self.z.shape[0] != data.n:
            raise ValueError("z length must match the dataset")
        if self.w is not None and data is not None and np.any((self.w == 1) & (data.y > 0)):
            raise ValueError("structural zeros only allowed where y == 0")
        if spec is not None and spec.zero_inflated and self.pi is None:
            raise ValueError("zinb state requires pi")

    def copy(self) -> "ParamState":
        return ParamState(
            c=self.c.copy(),
            beta=self.beta.copy(),
            psi=self.psi.copy(),
            z=self.z.copy(),
            pi=None if self.pi is None else self.pi.copy(),
            w=None if self.w is None else self.w.copy(),
        )


def component_mean(beta_k, x):
    """exp(x . beta_k), the component mean at covariate row x.

    The linear predictor is clamped to +/-LINPRED_CLAMP; returns
    (mean, clamped_flag).
    """
    beta_k = np.asarray(beta_k, dtype=float)
    x = np.asarray(x, dtype=float)
    if beta_k.shape != x.shape:
        raise ValueError("beta_k and x must have the same length")
    eta = float(x @ beta_k)
    clamped = abs(eta) > LINPRED_CLAMP
    return math.exp(max(-LINPRED_CLAMP, min(LINPRED_CLAMP, eta))), clamped


def linear_predictor(X: np.ndarray, beta: np.ndarray):
    """Clamped eta = X @ beta.T; returns (eta, number of clamped entries)."""
    eta = X @ beta.T
    n_clamped = int(np.count_nonzero(np.abs(eta) > LINPRED_CLAMP))
    if n_clamped:
        np.clip(eta, -LINPRED_CLAMP, LINPRED_CLAMP, out=eta)
    return eta, n_clamped


def loglik_matrix(data: Dataset, beta: np.ndarray, psi: np.ndarray,
                  pi: np.ndarray | None, spec: ModelSpec) -> np.ndarray:
    """N x K matrix of per-observation, per-component log pmf values.

    Hot path: ln Gamma(y + psi_k) is evaluated on the unique counts only.
    """
    eta, _ = linear_predictor(data.X, beta)
    mu = np.exp(eta)                                   # (N, K)
    psi_row = psi[np.newaxis, :]
    log_psi_mu = np.log(psi_row + mu)
    lg_y_psi = _log_gamma_raw(data.y_unique[:, np.newaxis] + psi_row)  # (U, K)
    ll = (
        lg_y_psi[data.y_inverse]
        - _log_gamma_raw(psi)[np.newaxis, :]
        - data.log_gamma_y1[:, np.newaxis]
        + psi_row * (np.log(psi_row) - log_psi_mu)
        + data._yf[:, np.newaxis] * (eta - log_psi_mu)
    )
    if spec.zero_inflated:
        if pi is None:
            raise ValueError("zinb likelihood requires pi")
        with np.errstate(divide="ignore"):
            log_pi = np.log(pi)[np.newaxis, :]
            log_1mpi = np.log1p(-pi)[np.newaxis, :]
        ll = ll + log_1mpi
        zero = data.zero_mask
        ll[zero] = np.logaddexp(np.broadcast_to(log_pi, ll[zero].shape), ll[zero])
    return ll


def complete_log_likelihood(state: ParamState, data: Dataset, spec: ModelSpec) -> float:
    """Sum over observations of the assigned component's log pmf."""
    ll = loglik_matrix(data, state.beta, state.psi, state.pi, spec)
    return float(ll[np.arange(data.n), state.z].sum())


def _log_normal_pdf(x, mean, sd):
    return -0.5 * LOG_2PI - math.log(sd) - 0.5 * ((np.asarray(x) - mean) / sd) ** 2


def log_prior(state: ParamState, spec: ModelSpec) -> float:
    """Log prior density of (c, beta, psi [, pi]).

    The categorical mass of z belongs to the assignment update and is not
    counted here.  States on the simplex boundary return -inf.
    """
    hyper = spec.hyper
    k = state.c.shape[0]
    if np.any(state.c <= 0.0):
        return float("-inf")
    dir_term = (
        log_gamma(k * hyper.alpha0)
        - k * log_gamma(hyper.alpha0)
        + (hyper.alpha0 - 1.0) * np.log(state.c).sum()
    )
    beta_term = _log_normal_pdf(state.beta, hyper.m0, hyper.s0).sum()
    log_psi = np.log(state.psi)
    psi_term = (_log_normal_pdf(log_psi, hyper.a0, hyper.b0) - log_psi).sum()
    total = float(dir_term + beta_term + psi_term)
    if spec.zero_inflated:
        a, b = spec.pi_prior
        pi = state.pi
        with np.errstate(divide="ignore", invalid="ignore"):
            beta_norm = log_gamma(a + b) - log_gamma(a) - log_gamma(b)
            total += float(np.sum(beta_norm + (a - 1.0) * np.log(pi) + (b - 1.0) * np.log1p(-pi)))
    return total


@dataclass(frozen=True)
class CovariateColumn:
    """Generator spec for one synthetic covariate column."""

    name: str
    kind: str  # "normal" or "binary"
    param: float = 0.5  # success probability for binary columns

    def __post_init__(self):
        if self.kind not in ("normal", "binary"):
            raise ValueError(f"unknown covariate kind {self.kind!r}")


def generate_synthetic(c, beta, psi, n, covariates, seed, pi=None):
    """Draw a synthetic dataset from known mixture parameters.

    Returns (Dataset, true z).  Covariates are drawn per ``covariates``
    (CovariateColumn entries); the intercept column is always prepended.
    Serves as the recovery oracle for the sampler.
    """
    c = np.asarray(c, dtype=float)
    beta = np.asarray(beta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if n < 1:
        raise ValueError("n must be >= 1")
    if abs(c.sum() - 1.0) > 1e-9 or np.any(c < 0):
        raise ValueError("weights must lie on the simplex")
    k, d = beta.shape
    if len(covariates) != d - 1:
        raise ValueError("covariates must describe the non-intercept columns")
    rng = np.random.default_rng(seed)
    X = np.ones((n, d))
    for j, col in enumerate(covariates, start=1):
        if col.kind == "normal":
            X[:, j] = rng.standard_normal(n)
        else:
            X[:, j] = rng.binomial(1, col.param, size=n).astype(float)
    z = rng.choice(k, size=n, p=c / c.sum())
    eta = np.clip(np.einsum("nd,nd->n", X, beta[z]), -LINPRED_CLAMP, LINPRED_CLAMP)
    y = sample_negbin(np.exp(eta), psi[z], rng, size=n)
    if pi is not None:
        pi = np.asarray(pi, dtype=float)
        structural = rng.random(n) < pi[z]
        y = np.where(structural, 0, y)
    names = ("intercept",) + tuple(col.name for col in covariates)
    return Dataset(y=y, X=X, column_names=names), z
