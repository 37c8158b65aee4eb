"""Post-processing of sampled traces.

Relabeling resolves the label-switching symmetry by ordering components on
their fitted mean at a reference covariate row; convergence is checked
with split-chain R-hat and an autocorrelation-based effective sample size;
interval summaries use highest-posterior-density intervals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset, LINPRED_CLAMP, ModelSpec
from .sampler import Trace

__all__ = [
    "RelabeledTrace",
    "ComponentSummary",
    "DegenerateFitError",
    "relabel",
    "apply_permutations",
    "rhat",
    "ess",
    "hpdi",
    "hard_assignments",
    "component_summary",
    "occupied_counts",
]

# Components whose weight falls below this floor in a given state are
# treated as unoccupied and sorted after the occupied ones, so that
# prior-refreshed (or transiently reborn) components cannot scramble the
# occupied ordering.  Matches the default occupancy reporting threshold.
EMPTY_WEIGHT_FLOOR = 0.01


class DegenerateFitError(RuntimeError):
    """Raised when no component clears the occupancy threshold."""


@dataclass
class RelabeledTrace(Trace):
    """A Trace plus the per-state permutations that produced it."""

    permutations: np.ndarray = None  # (S, K); perm[s, j] = original index at slot j


def _relabel_one(trace: Trace, reference_x: np.ndarray,
                 weight_floor: float) -> RelabeledTrace:
    s_count, k = trace.c.shape
    eta = np.einsum("skd,d->sk", trace.beta, reference_x)
    mu = np.exp(np.clip(eta, -LINPRED_CLAMP, LINPRED_CLAMP))
    perms = np.empty((s_count, k), dtype=np.int64)
    for s in range(s_count):
        empty = trace.c[s] < weight_floor
        # lexsort is stable: ties on (empty, mu, psi) keep original order.
        perms[s] = np.lexsort((trace.psi[s], mu[s], empty))
    return apply_permutations(trace, perms)


def apply_permutations(trace: Trace, perms: np.ndarray) -> RelabeledTrace:
    """Reorder every stored state by the given per-state permutations."""
    inv = np.argsort(perms, axis=1)
    z = np.take_along_axis(inv, trace.z.astype(np.int64), axis=1).astype(trace.z.dtype)
    return RelabeledTrace(
        c=np.take_along_axis(trace.c, perms, axis=1),
        beta=np.take_along_axis(trace.beta, perms[:, :, np.newaxis], axis=1),
        psi=np.take_along_axis(trace.psi, perms, axis=1),
        z=z,
        pi=None if trace.pi is None else np.take_along_axis(trace.pi, perms, axis=1),
        accept_rates=trace.accept_rates,
        seed=trace.seed,
        chain_id=trace.chain_id,
        column_names=trace.column_names,
        permutations=perms,
    )


def relabel(traces, reference_x=None, data: Dataset | None = None,
            weight_floor: float = EMPTY_WEIGHT_FLOOR) -> list[RelabeledTrace]:
    """Order components ascending in mu_k(reference_x) within every state.

    Ties break by ascending psi then original index; components below the
    weight floor sort last so empty prior draws stay out of the occupied
    slots.  reference_x defaults to the column means of data.X.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    if reference_x is None:
        if data is None:
            raise ValueError("pass reference_x or data to derive it from")
        reference_x = data.X.mean(axis=0)
    reference_x = np.asarray(reference_x, dtype=float)
    return [_relabel_one(t, reference_x, weight_floor) for t in traces]


def _split_halves(series_list):
    halves = []
    for x in series_list:
        x = np.asarray(x, dtype=float)
        n = (len(x) // 2) * 2
        halves.append(x[: n // 2])
        halves.append(x[n // 2: n])
    return halves


def rhat(traces, scalar_extractor=None, return_flag: bool = False):
    """Split-chain potential scale reduction for one scalar.

    ``traces`` may be Trace objects (with scalar_extractor mapping each to
    a 1-D series) or plain 1-D arrays.  Returns a float >= 1 up to
    floating error; 1.0 with a degenerate flag when every within-chain
    variance is zero.
    """
    if scalar_extractor is not None:
        series = [np.asarray(scalar_extractor(t), dtype=float) for t in traces]
    else:
        series = [np.asarray(t, dtype=float) for t in traces]
    if len(series) < 2 or any(len(x) < 4 for x in series):
        raise ValueError("rhat needs >= 2 chains of length >= 4")
    halves = _split_halves(series)
    n = min(len(h) for h in halves)
    halves = np.stack([h[:n] for h in halves])
    within = halves.var(axis=1, ddof=1).mean()
    between = n * halves.mean(axis=1).var(ddof=1)
    if within == 0.0:
        return (1.0, True) if return_flag else 1.0
    value = float(np.sqrt(((n - 1) / n * within + between / n) / within))
    return (value, False) if return_flag else value


def ess(samples, return_flag: bool = False):
    """Effective sample size via Geyer's initial positive sequence.

    Pairs of autocorrelations are summed while positive; the result is
    clipped to 1.5 * N.  A constant series reports N with a degenerate
    flag.
    """
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 8:
        raise ValueError("ess needs at least 8 samples")
    centered = x - x.mean()
    if np.all(centered == 0.0):
        return (float(n), True) if return_flag else float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]
    tau = 0.0
    m = 0
    while 2 * m + 1 < n:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        m += 1
    tau = max(tau - 1.0, 1.0 / 1.5)
    value = float(min(n / tau, 1.5 * n))
    return (value, False) if return_flag else value


def hpdi(samples, prob: float):
    """Shortest contiguous interval of sorted samples holding mass prob."""
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must lie in (0, 1)")
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n < 20:
        raise ValueError("hpdi needs at least 20 samples")
    step = min(int(np.ceil(prob * n)), n - 1)
    widths = x[step:] - x[: n - step]
    i = int(np.argmin(widths))  # first minimum on ties
    return float(x[i]), float(x[i + step])


def _strided_indices(length: int, budget: int) -> np.ndarray:
    if length <= budget:
        return np.arange(length)
    return np.linspace(0, length - 1, budget).round().astype(int)


def hard_assignments(traces, data: Dataset, spec: ModelSpec,
                     max_states: int = 400) -> np.ndarray:
    """Argmax component of the trace-averaged responsibilities per row.

    Responsibilities are recomputed from (c, beta, psi[, pi]) on a strided
    subset of stored states (budget max_states across all chains); ties go
    to the lower index.  Invariant to the order chains are supplied in.
    """
    from .sampler import responsibilities

    traces = sorted(traces, key=lambda t: t.chain_id)
    per_chain = max(1, max_states // max(len(traces), 1))
    total = np.zeros((data.n, traces[0].k))
    count = 0
    for trace in traces:
        for s in _strided_indices(len(trace), per_chain):
            total += responsibilities(trace.state_at(int(s)), data, spec)
            count += 1
    total /= count
    return np.argmax(total, axis=1)


def occupied_counts(trace: Trace) -> np.ndarray:
    """Number of components with at least one assigned observation, per state."""
    k = trace.k
    return np.array([
        int(np.count_nonzero(np.bincount(trace.z[s].astype(np.int64), minlength=k)))
        for s in range(len(trace))
    ])


@dataclass
class ComponentSummary:
    index: int
    occupied: bool
    prevalence_mean: float
    prevalence_hpdi: tuple[float, float]
    irr_mean: np.ndarray          # (D,)
    irr_hpdi: np.ndarray          # (D, 2)
    irr_excludes_one: np.ndarray  # (D,) bool
    count_mode: int
    pmf: np.ndarray               # predictive pmf over the y grid
    empirical_mode: int | None = None


def component_summary(traces, data: Dataset, spec: ModelSpec,
                      occupancy_threshold: float = 0.01,
                      reference_x=None, prob: float = 0.95,
                      assignments=None, max_pmf_states: int = 200):
    """Per-component posterior summaries from pooled relabeled traces.

    Prevalence is the posterior mean weight; the IRR point estimate is the
    posterior mean of exp(beta) (not exp of the posterior mean); the
    predictive count mode scans the posterior-mean pmf at reference_x over
    y in [0, max(y)+50].
    """
    from .distributions import _nb_logpmf_raw

    traces = sorted(traces, key=lambda t: t.chain_id)
    if reference_x is None:
        reference_x = data.X.mean(axis=0)
    reference_x = np.asarray(reference_x, dtype=float)
    c_all = np.concatenate([t.c for t in traces])          # (S, K)
    beta_all = np.concatenate([t.beta for t in traces])    # (S, K, D)
    psi_all = np.concatenate([t.psi for t in traces])
    pi_all = None if traces[0].pi is None else np.concatenate([t.pi for t in traces])
    s_all, k = c_all.shape
    d = beta_all.shape[2]

    y_grid = np.arange(int(data.y.max()) + 51, dtype=float)
    idx_pmf = _strided_indices(s_all, max_pmf_states)
    eta_ref = np.clip(np.einsum("skd,d->sk", beta_all[idx_pmf], reference_x),
                      -LINPRED_CLAMP, LINPRED_CLAMP)
    mu_ref = np.exp(eta_ref)  # (Sp, K)

    summaries = []
    any_occupied = False
    for j in range(k):
        prev = c_all[:, j]
        prev_mean = float(prev.mean())
        occ = prev_mean >= occupancy_threshold
        any_occupied = any_occupied or occ
        irr = np.exp(beta_all[:, j, :])  # (S, D)
        irr_mean = irr.mean(axis=0)
        irr_hpdi = np.array([hpdi(irr[:, dd], prob) for dd in range(d)])
        excludes = ~((irr_hpdi[:, 0] <= 1.0) & (1.0 <= irr_hpdi[:, 1]))
        pmf_draws = np.exp(_nb_logpmf_raw(
            y_grid[np.newaxis, :], mu_ref[:, j:j + 1], psi_all[idx_pmf, j:j + 1]
        ))
        if pi_all is not None:
            pi_j = pi_all[idx_pmf, j:j + 1]
            pmf_draws = (1.0 - pi_j) * pmf_draws
            pmf_draws[:, 0] += pi_j[:, 0]
        pmf = pmf_draws.mean(axis=0)
        # Zero-inflated variant: report the count mode with the zero mode
        # omitted, since the point mass at zero would otherwise swamp it.
        mode = int(np.argmax(pmf[1:]) + 1) if pi_all is not None else int(np.argmax(pmf))
        emp_mode = None
        if assignments is not None:
            members = data.y[np.asarray(assignments) == j]
            if members.size:
                emp_mode = int(np.argmax(np.bincount(members)))
        summaries.append(ComponentSummary(
            index=j,
            occupied=occ,
            prevalence_mean=prev_mean,
            prevalence_hpdi=hpdi(prev, prob),
            irr_mean=irr_mean,
            irr_hpdi=irr_hpdi,
            irr_excludes_one=excludes,
            count_mode=mode,
            pmf=pmf,
            empirical_mode=emp_mode,
        ))
    if not any_occupied:
        raise DegenerateFitError("no component clears the occupancy threshold")
    return summaries
