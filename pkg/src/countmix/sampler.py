"""Blocked Gibbs / Metropolis-within-Gibbs sampler for the mixture model.

Per sweep: assignments z (conjugate categorical), structural zeros and pi
for the zero-inflated variant, weights c (conjugate Dirichlet), then
random-walk Metropolis on each beta coordinate and on log psi per
component.  Proposal scales adapt toward a target acceptance rate during
burn-in only, so the stored chain is a valid Markov chain.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (
    Dataset,
    LINPRED_CLAMP,
    ModelSpec,
    ParamState,
    linear_predictor,
    loglik_matrix,
)
from .distributions import sample_dirichlet

__all__ = [
    "SamplerConfig",
    "Trace",
    "SamplerError",
    "update_assignments",
    "update_weights",
    "update_coefficients",
    "update_precisions",
    "update_zero_inflation",
    "run_chain",
    "run_chains",
]


class SamplerError(RuntimeError):
    """Mid-run numeric fault; carries a diagnostic state dump."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 10000
    burn_in: int = 5000
    thin: int = 1
    chains: int = 4
    master_seed: int = 0
    adapt_window: int | None = None  # sweeps of adaptation; defaults to burn_in
    target_accept: float = 0.3

    def __post_init__(self):
        if self.burn_in >= self.iterations:
            raise ValueError("burn_in must be < iterations")
        if self.thin < 1 or self.chains < 1 or self.burn_in < 0:
            raise ValueError("thin and chains must be >= 1, burn_in >= 0")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.adapt_window is not None and self.adapt_window > self.burn_in:
            raise ValueError("adaptation must be confined to burn-in")

    @property
    def adapt_sweeps(self) -> int:
        return self.burn_in if self.adapt_window is None else self.adapt_window

    @property
    def n_stored(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class Trace:
    """Post-burn-in, thinned states of one chain (struct-of-arrays)."""

    c: np.ndarray                 # (S, K)
    beta: np.ndarray              # (S, K, D)
    psi: np.ndarray               # (S, K)
    z: np.ndarray                 # (S, N) small-int labels
    pi: np.ndarray | None         # (S, K) for zinb, else None
    accept_rates: dict = field(default_factory=dict)
    seed: int = 0
    chain_id: int = 0
    column_names: tuple = ()

    def __len__(self) -> int:
        return self.c.shape[0]

    @property
    def k(self) -> int:
        return self.c.shape[1]

    def state_at(self, s: int) -> ParamState:
        return ParamState(
            c=self.c[s].copy(),
            beta=self.beta[s].copy(),
            psi=self.psi[s].copy(),
            z=self.z[s].astype(np.int64),
            pi=None if self.pi is None else self.pi[s].copy(),
        )


def responsibilities(state: ParamState, data: Dataset, spec: ModelSpec) -> np.ndarray:
    """N x K posterior membership probabilities given current parameters."""
    with np.errstate(divide="ignore"):
        log_c = np.log(state.c)
    log_r = loglik_matrix(data, state.beta, state.psi, state.pi, spec) + log_c
    top = log_r.max(axis=1)
    if not np.all(np.isfinite(top)):
        raise SamplerError("all responsibilities underflowed for some observation")
    r = np.exp(log_r - top[:, np.newaxis])
    r /= r.sum(axis=1, keepdims=True)
    return r


def update_assignments(state: ParamState, data: Dataset, spec: ModelSpec,
                       rng: np.random.Generator) -> np.ndarray:
    """Draw z_n ~ Categorical(r_n) for every observation, in place."""
    r = responsibilities(state, data, spec)
    cum = np.cumsum(r, axis=1)
    u = rng.random(data.n)
    z = (u[:, np.newaxis] > cum).sum(axis=1)
    np.clip(z, 0, state.c.shape[0] - 1, out=z)
    state.z = z
    return z


def update_weights(z: np.ndarray, hyper, rng: np.random.Generator,
                   k: int | None = None) -> np.ndarray:
    """Conjugate Dirichlet(alpha0 + counts) draw of the mixing weights."""
    k = hyper.k_max if k is None else k
    counts = np.bincount(z, minlength=k).astype(float)
    return sample_dirichlet(hyper.alpha0 + counts, rng)


def _nb_eta_part(yf, eta, psi):
    """Likelihood terms that change when eta moves (psi fixed)."""
    log_psi_mu = np.log(psi + np.exp(eta))
    return float(np.sum(psi * (np.log(psi) - log_psi_mu) + yf * (eta - log_psi_mu)))


def update_coefficients(state: ParamState, data: Dataset, spec: ModelSpec,
                        scales: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Per-(k, d) random-walk Metropolis on beta, in place.

    Returns per-block acceptance flags (1 accepted, 0 rejected, NaN where
    the component was empty and beta was refreshed from the prior).
    """
    hyper = spec.hyper
    k_max, d_dim = state.beta.shape
    flags = np.full((k_max, d_dim), np.nan)
    yf = data._yf
    inv_2s2 = 0.5 / hyper.s0 ** 2
    for k in range(k_max):
        idx = np.flatnonzero(state.z == k)
        if idx.size == 0:
            state.beta[k] = rng.normal(hyper.m0, hyper.s0, size=d_dim)
            continue
        if spec.zero_inflated and state.w is not None:
            idx = idx[state.w[idx] == 0]
        if idx.size == 0:
            # All assigned observations are structural zeros: the likelihood
            # is flat in beta, so MH reduces to a prior random walk.
            xk = np.empty((0, d_dim))
            yk = np.empty(0)
            eta = np.empty(0)
            cur = 0.0
        else:
            xk = data.X[idx]
            yk = yf[idx]
            eta = np.clip(xk @ state.beta[k], -LINPRED_CLAMP, LINPRED_CLAMP)
            cur = _nb_eta_part(yk, eta, state.psi[k])
        for d in range(d_dim):
            step = scales[k, d] * rng.standard_normal()
            u = rng.random()
            new_b = state.beta[k, d] + step
            if idx.size:
                eta_new = np.clip(eta + step * xk[:, d], -LINPRED_CLAMP, LINPRED_CLAMP)
                new = _nb_eta_part(yk, eta_new, state.psi[k])
            else:
                eta_new = eta
                new = 0.0
            old_b = state.beta[k, d]
            log_ratio = (new - cur) - inv_2s2 * (
                (new_b - hyper.m0) ** 2 - (old_b - hyper.m0) ** 2
            )
            if np.isfinite(log_ratio) and np.log(u) < log_ratio:
                state.beta[k, d] = new_b
                eta = eta_new
                cur = new
                flags[k, d] = 1.0
            else:
                flags[k, d] = 0.0
    return flags


def _nb_loglik_at_psi(data: Dataset, idx, eta, psi: float) -> float:
    """Full NB log-likelihood over idx at fixed eta, variable psi."""
    from .distributions import _log_gamma_raw

    lg_u = _log_gamma_raw(data.y_unique + psi)
    mu = np.exp(eta)
    log_psi_mu = np.log(psi + mu)
    yf = data._yf[idx]
    return float(np.sum(
        lg_u[data.y_inverse[idx]]
        - _log_gamma_raw(np.array(psi))
        - data.log_gamma_y1[idx]
        + psi * (np.log(psi) - log_psi_mu)
        + yf * (eta - log_psi_mu)
    ))


def update_precisions(state: ParamState, data: Dataset, spec: ModelSpec,
                      scales: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random-walk Metropolis on log psi per component, in place.

    The log-normal prior is expressed in eta = ln psi (eta ~ N(a0, b0^2)),
    so the symmetric proposal needs no Jacobian correction.
    """
    hyper = spec.hyper
    k_max = state.psi.shape[0]
    flags = np.full(k_max, np.nan)
    inv_2b2 = 0.5 / hyper.b0 ** 2
    for k in range(k_max):
        idx = np.flatnonzero(state.z == k)
        if idx.size == 0:
            state.psi[k] = np.exp(rng.normal(hyper.a0, hyper.b0))
            continue
        if spec.zero_inflated and state.w is not None:
            idx = idx[state.w[idx] == 0]
        eta_lin = np.clip(data.X[idx] @ state.beta[k], -LINPRED_CLAMP, LINPRED_CLAMP)
        log_psi = np.log(state.psi[k])
        prop = log_psi + scales[k] * rng.standard_normal()
        u = rng.random()
        cur_ll = _nb_loglik_at_psi(data, idx, eta_lin, state.psi[k]) if idx.size else 0.0
        new_ll = _nb_loglik_at_psi(data, idx, eta_lin, float(np.exp(prop))) if idx.size else 0.0
        log_ratio = (new_ll - cur_ll) - inv_2b2 * (
            (prop - hyper.a0) ** 2 - (log_psi - hyper.a0) ** 2
        )
        if np.isfinite(log_ratio) and np.log(u) < log_ratio:
            state.psi[k] = float(np.exp(prop))
            flags[k] = 1.0
        else:
            flags[k] = 0.0
    return flags


def update_zero_inflation(state: ParamState, data: Dataset, spec: ModelSpec,
                          rng: np.random.Generator):
    """Draw structural-zero indicators w and per-component pi, in place."""
    if not spec.zero_inflated:
        raise ValueError("zero-inflation update requires the zinb variant")
    k_max = state.c.shape[0]
    a, b = spec.pi_prior
    w = np.zeros(data.n, dtype=np.int8)
    zero_idx = np.flatnonzero(data.zero_mask)
    if zero_idx.size:
        zk = state.z[zero_idx]
        eta = np.clip(
            np.einsum("nd,nd->n", data.X[zero_idx], state.beta[zk]),
            -LINPRED_CLAMP, LINPRED_CLAMP,
        )
        psi_z = state.psi[zk]
        log_nb0 = psi_z * (np.log(psi_z) - np.log(psi_z + np.exp(eta)))
        pi_z = state.pi[zk]
        p1 = pi_z
        p0 = (1.0 - pi_z) * np.exp(log_nb0)
        prob = np.where(p1 + p0 > 0, p1 / (p1 + p0), 0.0)
        w[zero_idx] = (rng.random(zero_idx.size) < prob).astype(np.int8)
    n_k = np.bincount(state.z, minlength=k_max).astype(float)
    s_k = np.bincount(state.z[w == 1], minlength=k_max).astype(float)
    state.pi = rng.beta(a + s_k, b + n_k - s_k)
    state.w = w
    return state.pi, w


def _initial_state(data: Dataset, spec: ModelSpec, chain_id: int) -> ParamState:
    """Quantile-binned start: overdispersed yet informed, rotated per chain."""
    k = spec.hyper.k_max
    order = np.roll(np.arange(k), chain_id % k)
    ranks = np.argsort(np.argsort(data.y, kind="stable"), kind="stable")
    bins = np.minimum(ranks * k // data.n, k - 1)
    z = order[bins]
    beta = np.zeros((k, data.d))
    overall = float(data.y.mean())
    for j in range(k):
        members = data.y[z == j]
        mean_j = float(members.mean()) if members.size else overall
        beta[j, 0] = np.log(mean_j + 0.5)
    state = ParamState(
        c=np.full(k, 1.0 / k),
        beta=beta,
        psi=np.ones(k),
        z=z,
    )
    if spec.zero_inflated:
        zero_frac = float(data.zero_mask.mean())
        state.pi = np.full(k, min(max(zero_frac, 0.01), 0.5))
        state.w = np.zeros(data.n, dtype=np.int8)
    return state


def _check_finite(state: ParamState, sweep: int, chain_id: int):
    ok = (
        np.all(np.isfinite(state.c))
        and np.all(np.isfinite(state.beta))
        and np.all(np.isfinite(state.psi))
        and np.all(state.psi > 0)
    )
    if not ok:
        raise SamplerError(
            f"non-finite parameter state at sweep {sweep} (chain {chain_id})",
            dump={
                "sweep": sweep,
                "chain_id": chain_id,
                "c": state.c.copy(),
                "beta": state.beta.copy(),
                "psi": state.psi.copy(),
            },
        )


def run_chain(spec: ModelSpec, data: Dataset, config: SamplerConfig,
              chain_id: int) -> Trace:
    """Run one chain; fully reproducible from (master_seed, chain_id)."""
    if config.n_stored < 1:
        raise ValueError("configuration stores no post-burn-in states")
    rng = np.random.default_rng([config.master_seed, chain_id])
    state = _initial_state(data, spec, chain_id)
    k, d = spec.hyper.k_max, data.d

    log_scale_beta = np.log(np.full((k, d), 0.1))
    log_scale_psi = np.log(np.full(k, 0.5))
    accept_beta = np.zeros((k, d))
    trials_beta = np.zeros((k, d))
    accept_psi = np.zeros(k)
    trials_psi = np.zeros(k)

    s_count = config.n_stored
    z_dtype = np.int16 if k < 2 ** 15 else np.int32
    stored_c = np.empty((s_count, k))
    stored_beta = np.empty((s_count, k, d))
    stored_psi = np.empty((s_count, k))
    stored_z = np.empty((s_count, data.n), dtype=z_dtype)
    stored_pi = np.empty((s_count, k)) if spec.zero_inflated else None

    target = config.target_accept
    adapt_until = config.adapt_sweeps
    s = 0
    for sweep in range(1, config.iterations + 1):
        update_assignments(state, data, spec, rng)
        if spec.zero_inflated:
            update_zero_inflation(state, data, spec, rng)
        state.c = update_weights(state.z, spec.hyper, rng)
        flags_b = update_coefficients(state, data, spec, np.exp(log_scale_beta), rng)
        flags_p = update_precisions(state, data, spec, np.exp(log_scale_psi), rng)
        if sweep <= adapt_until:
            gain = sweep ** -0.6
            delta_b = np.where(np.isnan(flags_b), 0.0, (flags_b - target) * gain)
            delta_p = np.where(np.isnan(flags_p), 0.0, (flags_p - target) * gain)
            log_scale_beta += delta_b
            log_scale_psi += delta_p
        if sweep > config.burn_in:
            accept_beta += np.nan_to_num(flags_b)
            trials_beta += ~np.isnan(flags_b)
            accept_psi += np.nan_to_num(flags_p)
            trials_psi += ~np.isnan(flags_p)
            if (sweep - config.burn_in) % config.thin == 0 and s < s_count:
                _check_finite(state, sweep, chain_id)
                stored_c[s] = state.c
                stored_beta[s] = state.beta
                stored_psi[s] = state.psi
                stored_z[s] = state.z
                if stored_pi is not None:
                    stored_pi[s] = state.pi
                s += 1
        elif sweep % 200 == 0:
            _check_finite(state, sweep, chain_id)

    with np.errstate(invalid="ignore"):
        rate_beta = np.where(trials_beta > 0, accept_beta / np.maximum(trials_beta, 1), np.nan)
        rate_psi = np.where(trials_psi > 0, accept_psi / np.maximum(trials_psi, 1), np.nan)
    return Trace(
        c=stored_c,
        beta=stored_beta,
        psi=stored_psi,
        z=stored_z,
        pi=stored_pi,
        accept_rates={"beta": rate_beta, "psi": rate_psi},
        seed=config.master_seed,
        chain_id=chain_id,
        column_names=data.column_names,
    )


def _chain_worker(args):
    spec, data, config, chain_id = args
    return run_chain(spec, data, config, chain_id)


def run_chains(spec: ModelSpec, data: Dataset, config: SamplerConfig,
               parallel: bool = True) -> list[Trace]:
    """Run all configured chains; output is identical to sequential runs."""
    jobs = [(spec, data, config, cid) for cid in range(config.chains)]
    if not parallel or config.chains == 1:
        return [run_chain(*job) for job in jobs]
    workers = min(config.chains, os.cpu_count() or 1)
    try:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_chain_worker, jobs))
    except SamplerError:
        raise
    except (OSError, PermissionError):
        # Sandboxed environments may forbid subprocesses; fall back.
        traces = [run_chain(*job) for job in jobs]
    return traces
