"""Command-line front-end: simulate, fit, and report subcommands.

Configuration precedence is flag > config file > default.  Machine files
carry full binary64 reprs; human tables use 6 significant digits.  Exit
codes: 0 success, 2 input error, 3 sampler failure, 4 convergence failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .diagnostics import (
    component_summary,
    hard_assignments,
    relabel,
    rhat,
)
from .model import (
    CovariateColumn,
    Dataset,
    Hyperparams,
    ModelSpec,
    generate_synthetic,
)
from .sampler import SamplerConfig, SamplerError, run_chains
from . import traceio

__all__ = [
    "DataError",
    "EXIT_OK",
    "EXIT_INPUT",
    "EXIT_SAMPLER",
    "EXIT_CONVERGENCE",
    "ingest",
    "export_dataset",
    "parse_config",
    "run",
    "main",
    "DEMO_TRUTH",
]

log = logging.getLogger("countmix")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SAMPLER = 3
EXIT_CONVERGENCE = 4


class DataError(Exception):
    """Bad input data or configuration."""


# Canonical demo configuration: three components shaped like the reference
# prevalences 6%/58%/37% with predictive count modes near 5, 24, and 39.
DEMO_TRUTH = {
    "weights": [420 / 7118, 4091 / 7118, 2607 / 7118],
    "beta": [
        [1.8625, 0.05, 0.60, 0.25, -0.20],
        [2.6568, -0.02, 0.25, 0.85, 0.50],
        [4.1851, 0.01, -0.25, -0.75, -0.50],
    ],
    "psi": [2.5, 150.0, 150.0],
    "covariates": [
        ["age_std", "normal"],
        ["sex", "binary", 0.5],
        ["chemo", "binary", 0.5],
        ["metastases_std", "normal"],
    ],
    "n": 7118,
    "seed": 20260825,
}

DEMO_TRUTH_ZINB = dict(DEMO_TRUTH, pi=[0.3, 0.05, 0.0])


def _sig6(x: float) -> str:
    return f"{x:.6g}"


# ---------------------------------------------------------------------------
# configuration files


def parse_config(path: str) -> dict:
    """Simple ``key = value`` file; '#' starts a comment."""
    out: dict[str, str] = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{lineno}: expected key = value")
                key, value = line.split("=", 1)
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    return out


def _resolve(flag_value, config: dict, key: str, default, cast):
    if flag_value is not None:
        return flag_value
    if key in config:
        raw = config[key]
        try:
            return cast(raw)
        except ValueError as exc:
            raise DataError(f"config key {key}: cannot parse {raw!r}") from exc
    return default


def _parse_categorical(spec_str: str) -> dict:
    """'col=ref' or 'col=ref:lev1|lev2|...'; multiple separated by ';'."""
    out = {}
    for part in spec_str.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise DataError(f"bad categorical directive {part!r} (want col=reference)")
        col, rest = part.split("=", 1)
        if ":" in rest:
            ref, levels = rest.split(":", 1)
            out[col.strip()] = (ref.strip(), tuple(s.strip() for s in levels.split("|")))
        else:
            out[col.strip()] = (rest.strip(), None)
    return out


# ---------------------------------------------------------------------------
# ingestion


def ingest(path: str, categorical: dict | None = None, outcome: str = "y") -> Dataset:
    """Read a delimited table into a Dataset.

    Declared categorical columns are dummy-coded against their reference
    level; an intercept column is prepended.  The raw values of declared
    categorical columns are retained on the returned Dataset (attribute
    ``categorical_raw``) for cross-tabulation at report time.
    """
    categorical = categorical or {}
    try:
        with open(path, newline="") as fh:
            first = fh.readline()
            if not first.strip():
                raise DataError(f"{path}: empty input file")
            delim = "\t" if "\t" in first else ","
            fh.seek(0)
            reader = csv.reader(fh, delimiter=delim)
            header = next(reader)
            rows = [row for row in reader if any(cell.strip() for cell in row)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    header = [h.strip() for h in header]
    if outcome not in header:
        raise DataError(f"{path}: outcome column {outcome!r} not in header")
    for col in categorical:
        if col not in header:
            raise DataError(f"{path}: categorical column {col!r} not in header")
    if not rows:
        raise DataError(f"{path}: no data rows")
    y_idx = header.index(outcome)

    y = np.empty(len(rows), dtype=np.int64)
    raw_cols: dict[str, list[str]] = {h: [] for h in header if h != outcome}
    for i, row in enumerate(rows):
        lineno = i + 2
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        cell = row[y_idx].strip()
        try:
            val = int(cell)
        except ValueError:
            raise DataError(f"{path}:{lineno}: outcome {cell!r} is not an integer") from None
        if val < 0:
            raise DataError(f"{path}:{lineno}: outcome {val} is negative")
        y[i] = val
        for j, h in enumerate(header):
            if j != y_idx:
                raw_cols[h].append(row[j].strip())

    columns: list[np.ndarray] = [np.ones(len(rows))]
    names: list[str] = ["intercept"]
    cat_raw: dict[str, np.ndarray] = {}
    for h in header:
        if h == outcome:
            continue
        values = raw_cols[h]
        if h in categorical:
            ref, allowed = categorical[h]
            seen = sorted(set(values))
            if allowed is not None:
                for i, v in enumerate(values):
                    if v not in allowed:
                        raise DataError(f"{path}:{i + 2}: unknown category {v!r} in column {h!r}")
                levels = sorted(allowed)
            else:
                levels = seen
            if ref not in levels:
                raise DataError(f"{path}: reference level {ref!r} absent from column {h!r}")
            for lev in levels:
                if lev == ref:
                    continue
                columns.append(np.array([1.0 if v == lev else 0.0 for v in values]))
                names.append(f"{h}={lev}")
            cat_raw[h] = np.array(values)
        else:
            parsed = np.empty(len(values))
            for i, v in enumerate(values):
                try:
                    parsed[i] = float(v)
                except ValueError:
                    raise DataError(
                        f"{path}:{i + 2}: non-numeric value {v!r} in column {h!r} "
                        "(declare it categorical?)"
                    ) from None
            if np.all(parsed == parsed[0]):
                log.warning("column %r is constant", h)
            columns.append(parsed)
            names.append(h)
    data = Dataset(y=y, X=np.column_stack(columns), column_names=names)
    data.categorical_raw = cat_raw
    log.info("ingested %d rows, columns: %s", data.n, ", ".join(names))
    return data


def export_dataset(data: Dataset, path: str, outcome: str = "y"):
    """Write a Dataset back to csv (intercept column omitted)."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join([outcome] + list(data.column_names[1:])) + "\n")
        for i in range(data.n):
            cells = [str(int(data.y[i]))] + [repr(float(v)) for v in data.X[i, 1:]]
            fh.write(",".join(cells) + "\n")


def _write_csv(path: str, header: list[str], rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def read_csv_table(path: str):
    """Read an emitted table back into a list of dicts (strings)."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# simulate


def _covariates_from_json(entries):
    cols = []
    for entry in entries:
        name, kind = entry[0], entry[1]
        param = float(entry[2]) if len(entry) > 2 else 0.5
        cols.append(CovariateColumn(name=name, kind=kind, param=param))
    return cols


def cmd_simulate(args) -> int:
    config = parse_config(args.config) if args.config else {}
    if args.params:
        try:
            with open(args.params) as fh:
                truth = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read params file {args.params}: {exc}") from exc
    elif _resolve(args.model, config, "model", "nb", str) == "zinb":
        truth = dict(DEMO_TRUTH_ZINB)
    else:
        truth = dict(DEMO_TRUTH)
    n = _resolve(args.n, config, "n", int(truth.get("n", 1000)), int)
    seed = _resolve(args.seed, config, "seed", int(truth.get("seed", 0)), int)
    if n < 1:
        raise DataError("n must be >= 1")
    out_dir = _resolve(args.out, config, "out", "simulated", str)
    os.makedirs(out_dir, exist_ok=True)
    try:
        data, z_true = generate_synthetic(
            c=truth["weights"],
            beta=np.asarray(truth["beta"], dtype=float),
            psi=truth["psi"],
            n=n,
            covariates=_covariates_from_json(truth["covariates"]),
            seed=seed,
            pi=truth.get("pi"),
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    export_dataset(data, os.path.join(out_dir, "data.csv"))
    record = dict(truth, n=n, seed=seed, z=[int(v) for v in z_true])
    with open(os.path.join(out_dir, "truth.json"), "w", newline="\n") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {data.n} rows to {out_dir}/data.csv (ground truth in truth.json)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit


def _fit_settings(args):
    config = parse_config(args.config) if args.config else {}
    input_path = _resolve(args.input, config, "input", None, str)
    if not input_path:
        raise DataError("fit requires --input (or 'input' in the config file)")
    cat_str = _resolve(args.categorical, config, "categorical", "", str)
    settings = {
        "input": input_path,
        "outcome": _resolve(args.outcome, config, "outcome", "y", str),
        "categorical": _parse_categorical(cat_str) if cat_str else {},
        "variant": _resolve(args.model, config, "model", "nb", str),
        "out": _resolve(args.out, config, "out", "fit_out", str),
        "rhat_threshold": _resolve(args.rhat_threshold, config, "rhat_threshold", 1.1, float),
        "occupancy_threshold": _resolve(
            args.occupancy_threshold, config, "occupancy_threshold", 0.01, float),
    }
    hyper = Hyperparams(
        alpha0=_resolve(args.alpha0, config, "alpha0", 0.1, float),
        m0=_resolve(args.m0, config, "m0", 0.0, float),
        s0=_resolve(args.s0, config, "s0", 10.0, float),
        a0=_resolve(args.a0, config, "a0", 0.0, float),
        b0=_resolve(args.b0, config, "b0", 2.0, float),
        k_max=_resolve(args.kmax, config, "kmax", 10, int),
    )
    sampler_cfg = SamplerConfig(
        iterations=_resolve(args.iters, config, "iters", 10000, int),
        burn_in=_resolve(args.burnin, config, "burnin", 5000, int),
        thin=_resolve(args.thin, config, "thin", 1, int),
        chains=_resolve(args.chains, config, "chains", 4, int),
        master_seed=_resolve(args.seed, config, "seed", 0, int),
        target_accept=_resolve(args.target_accept, config, "target_accept", 0.3, float),
    )
    return settings, ModelSpec(variant=settings["variant"], hyper=hyper), sampler_cfg


def _tracked_rhats(relabeled, summaries, column_names):
    """Split-chain R-hat for every occupied component's weight and betas."""
    values = {}
    for summary in summaries:
        if not summary.occupied:
            continue
        j = summary.index
        values[f"c[{j}]"] = rhat(relabeled, lambda t, j=j: t.c[:, j])
        for dd, col in enumerate(column_names):
            values[f"beta[{j}].{col}"] = rhat(
                relabeled, lambda t, j=j, dd=dd: t.beta[:, j, dd])
    return values


def _write_fit_outputs(out_dir, data, spec, sampler_cfg, settings, relabeled,
                       summaries, assignments, rhats, reference_x):
    os.makedirs(out_dir, exist_ok=True)
    chain_files = []
    for trace in relabeled:
        name = f"chain_{trace.chain_id}.csv"
        traceio.save_trace(trace, os.path.join(out_dir, name))
        chain_files.append(name)
    traceio.write_checksums(out_dir, chain_files)

    _write_csv(
        os.path.join(out_dir, "prevalence.csv"),
        ["component", "mean", "hpdi_lo", "hpdi_hi", "occupied"],
        (
            [str(s.index), repr(s.prevalence_mean), repr(s.prevalence_hpdi[0]),
             repr(s.prevalence_hpdi[1]), str(int(s.occupied))]
            for s in summaries
        ),
    )
    irr_rows = []
    for s in summaries:
        if not s.occupied:
            continue
        for dd, col in enumerate(data.column_names):
            irr_rows.append([
                str(s.index), col, repr(float(s.irr_mean[dd])),
                repr(float(s.irr_hpdi[dd, 0])), repr(float(s.irr_hpdi[dd, 1])),
                str(int(s.irr_excludes_one[dd])),
            ])
    _write_csv(
        os.path.join(out_dir, "irr_forest.csv"),
        ["component", "covariate", "mean", "hpdi_lo", "hpdi_hi", "excludes_one"],
        irr_rows,
    )
    pmf_rows = []
    for s in summaries:
        if not s.occupied:
            continue
        for yv, p in enumerate(s.pmf):
            pmf_rows.append([str(s.index), str(yv), repr(float(p))])
    _write_csv(os.path.join(out_dir, "pmf_curves.csv"),
               ["component", "y", "probability"], pmf_rows)

    cat_raw = getattr(data, "categorical_raw", {})
    cat_cols = sorted(cat_raw)
    _write_csv(
        os.path.join(out_dir, "assignments.csv"),
        ["row", "component"] + cat_cols,
        (
            [str(i), str(int(assignments[i]))] + [str(cat_raw[c][i]) for c in cat_cols]
            for i in range(data.n)
        ),
    )

    meta = {
        "variant": spec.variant,
        "k_max": spec.hyper.k_max,
        "hyper": {
            "alpha0": spec.hyper.alpha0, "m0": spec.hyper.m0, "s0": spec.hyper.s0,
            "a0": spec.hyper.a0, "b0": spec.hyper.b0,
        },
        "sampler": {
            "iterations": sampler_cfg.iterations, "burn_in": sampler_cfg.burn_in,
            "thin": sampler_cfg.thin, "chains": sampler_cfg.chains,
            "master_seed": sampler_cfg.master_seed,
        },
        "column_names": list(data.column_names),
        "reference_x": [float(v) for v in reference_x],
        "y_max": int(data.y.max()),
        "n": data.n,
        "occupied": [s.index for s in summaries if s.occupied],
        "occupancy_threshold": settings["occupancy_threshold"],
        "rhat": {k: (None if v is None else float(v)) for k, v in rhats.items()},
        "rhat_threshold": settings["rhat_threshold"],
        "categorical": {c: settings["categorical"][c][0] for c in settings["categorical"]},
    }
    with open(os.path.join(out_dir, "run_meta.json"), "w", newline="\n") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return meta


def _summary_text(data, spec, sampler_cfg, summaries, rhats, relabeled):
    lines = []
    occupied = [s for s in summaries if s.occupied]
    lines.append("countmix fit summary")
    lines.append("====================")
    lines.append(f"model: {spec.variant}  k_max: {spec.hyper.k_max}  "
                 f"alpha0: {_sig6(spec.hyper.alpha0)}")
    lines.append(f"observations: {data.n}  covariate columns: {data.d}")
    lines.append(f"chains: {sampler_cfg.chains}  iterations: {sampler_cfg.iterations}  "
                 f"burn_in: {sampler_cfg.burn_in}  thin: {sampler_cfg.thin}  "
                 f"seed: {sampler_cfg.master_seed}")
    lines.append("")
    lines.append(f"occupied components: {len(occupied)}")
    lines.append("")
    lines.append("component  prevalence  hpdi_lo  hpdi_hi  count_mode  empirical_mode")
    for s in occupied:
        emp = "-" if s.empirical_mode is None else str(s.empirical_mode)
        lines.append(
            f"{s.index:>9d}  {_sig6(s.prevalence_mean):>10s}  "
            f"{_sig6(s.prevalence_hpdi[0]):>7s}  {_sig6(s.prevalence_hpdi[1]):>7s}  "
            f"{s.count_mode:>10d}  {emp:>14s}"
        )
    lines.append("")
    lines.append("incidence rate ratios (posterior mean of exp(beta), 95% HPDI)")
    lines.append("component  covariate  irr  hpdi_lo  hpdi_hi  excludes_1")
    for s in occupied:
        for dd, col in enumerate(data.column_names):
            lines.append(
                f"{s.index:>9d}  {col}  {_sig6(float(s.irr_mean[dd]))}  "
                f"{_sig6(float(s.irr_hpdi[dd, 0]))}  {_sig6(float(s.irr_hpdi[dd, 1]))}  "
                f"{'yes' if s.irr_excludes_one[dd] else 'no'}"
            )
    lines.append("")
    if rhats:
        lines.append("split-chain R-hat (tracked scalars)")
        for name in sorted(rhats):
            lines.append(f"  {name}: {_sig6(rhats[name])}")
    else:
        lines.append("R-hat unavailable (single chain)")
    lines.append("")
    lines.append("acceptance rates after adaptation (per chain)")
    for trace in relabeled:
        rb = trace.accept_rates.get("beta")
        rp = trace.accept_rates.get("psi")
        rb_str = _sig6(float(np.nanmean(rb))) if rb is not None and not np.all(np.isnan(rb)) else "-"
        rp_str = _sig6(float(np.nanmean(rp))) if rp is not None and not np.all(np.isnan(rp)) else "-"
        lines.append(f"  chain {trace.chain_id}: beta {rb_str}  psi {rp_str}")
    lines.append("")
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    settings, spec, sampler_cfg = _fit_settings(args)
    data = ingest(settings["input"], settings["categorical"], settings["outcome"])
    if sampler_cfg.chains == 1:
        log.warning("single chain requested: R-hat is unavailable; "
                    "multiple chains are recommended")
    traces = run_chains(spec, data, sampler_cfg)
    reference_x = data.X.mean(axis=0)
    relabeled = relabel(traces, reference_x=reference_x,
                        weight_floor=settings["occupancy_threshold"])
    assignments = hard_assignments(relabeled, data, spec)
    summaries = component_summary(
        relabeled, data, spec,
        occupancy_threshold=settings["occupancy_threshold"],
        reference_x=reference_x,
        assignments=assignments,
    )
    rhats = (
        _tracked_rhats(relabeled, summaries, data.column_names)
        if sampler_cfg.chains >= 2 else {}
    )
    out_dir = settings["out"]
    _write_fit_outputs(out_dir, data, spec, sampler_cfg, settings, relabeled,
                       summaries, assignments, rhats, reference_x)
    with open(os.path.join(out_dir, "summary.txt"), "w", newline="\n") as fh:
        fh.write(_summary_text(data, spec, sampler_cfg, summaries, rhats, relabeled))
    print(f"fit complete: {len([s for s in summaries if s.occupied])} occupied "
          f"components; outputs in {out_dir}")
    bad = {k: v for k, v in rhats.items() if v > settings["rhat_threshold"]}
    if bad:
        worst = max(bad, key=bad.get)
        print(f"convergence failure: R-hat {_sig6(bad[worst])} for {worst} "
              f"exceeds {settings['rhat_threshold']}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    trace_dir = args.traces
    out_dir = args.out or trace_dir
    os.makedirs(out_dir, exist_ok=True)
    try:
        traceio.verify_checksums(trace_dir)
    except traceio.ChecksumError as exc:
        raise DataError(str(exc)) from exc
    meta_path = os.path.join(trace_dir, "run_meta.json")
    if not os.path.exists(meta_path):
        raise DataError(f"missing run_meta.json in {trace_dir}")
    with open(meta_path) as fh:
        meta = json.load(fh)

    chain_files = sorted(
        f for f in os.listdir(trace_dir)
        if f.startswith("chain_") and f.endswith(".csv")
    )
    if not chain_files:
        raise DataError(f"no chain files in {trace_dir}")
    loaded = [traceio.load_trace(os.path.join(trace_dir, f))[0] for f in chain_files]
    c_all = np.concatenate([t["c"] for t in loaded])
    beta_all = np.concatenate([t["beta"] for t in loaded])
    psi_all = np.concatenate([t["psi"] for t in loaded])
    pi_all = (np.concatenate([t["pi"] for t in loaded])
              if loaded[0]["pi"] is not None else None)
    column_names = meta["column_names"]
    occupied = meta["occupied"]
    reference_x = np.asarray(meta["reference_x"], dtype=float)

    from .diagnostics import hpdi as _hpdi
    from .model import LINPRED_CLAMP
    from .distributions import _nb_logpmf_raw

    prev_rows, irr_rows, pmf_rows = [], [], []
    y_grid = np.arange(meta["y_max"] + 51, dtype=float)
    print("prevalence")
    print("component  mean  hpdi_lo  hpdi_hi")
    for j in range(c_all.shape[1]):
        prev = c_all[:, j]
        lo, hi = _hpdi(prev, 0.95)
        occ = j in occupied
        prev_rows.append([str(j), repr(float(prev.mean())), repr(lo), repr(hi),
                          str(int(occ))])
        if occ:
            print(f"{j:>9d}  {_sig6(float(prev.mean()))}  {_sig6(lo)}  {_sig6(hi)}")
    print()
    print("incidence rate ratios")
    print("component  covariate  irr  hpdi_lo  hpdi_hi  excludes_1")
    for j in occupied:
        eta_ref = np.clip(beta_all[:, j, :] @ reference_x, -LINPRED_CLAMP, LINPRED_CLAMP)
        mu_ref = np.exp(eta_ref)
        for dd, col in enumerate(column_names):
            irr = np.exp(beta_all[:, j, dd])
            lo, hi = _hpdi(irr, 0.95)
            excl = not (lo <= 1.0 <= hi)
            irr_rows.append([str(j), col, repr(float(irr.mean())), repr(lo),
                             repr(hi), str(int(excl))])
            print(f"{j:>9d}  {col}  {_sig6(float(irr.mean()))}  {_sig6(lo)}  "
                  f"{_sig6(hi)}  {'yes' if excl else 'no'}")
        pmf_draws = np.exp(_nb_logpmf_raw(
            y_grid[np.newaxis, :], mu_ref[:, np.newaxis], psi_all[:, j, np.newaxis]))
        if pi_all is not None:
            pij = pi_all[:, j, np.newaxis]
            pmf_draws = (1.0 - pij) * pmf_draws
            pmf_draws[:, 0] += pij[:, 0]
        pmf = pmf_draws.mean(axis=0)
        for yv, p in enumerate(pmf):
            pmf_rows.append([str(j), str(yv), repr(float(p))])

    _write_csv(os.path.join(out_dir, "prevalence_table.csv"),
               ["component", "mean", "hpdi_lo", "hpdi_hi", "occupied"], prev_rows)
    _write_csv(os.path.join(out_dir, "irr_table.csv"),
               ["component", "covariate", "mean", "hpdi_lo", "hpdi_hi", "excludes_one"],
               irr_rows)
    _write_csv(os.path.join(out_dir, "pmf_table.csv"),
               ["component", "y", "probability"], pmf_rows)

    # Hard-assignment cross-tabs against declared categorical covariates.
    assign_path = os.path.join(trace_dir, "assignments.csv")
    if os.path.exists(assign_path):
        table = read_csv_table(assign_path)
        cat_cols = [c for c in (table[0].keys() if table else []) if c not in ("row", "component")]
        for col in cat_cols:
            levels = sorted({row[col] for row in table})
            counts = {j: {lev: 0 for lev in levels} for j in occupied}
            for row in table:
                j = int(row["component"])
                if j in counts:
                    counts[j][row[col]] += 1
            rows = []
            print()
            print(f"share of {col} levels within each component (%)")
            print("component  " + "  ".join(levels))
            for j in occupied:
                total = sum(counts[j].values())
                shares = [100.0 * counts[j][lev] / total if total else 0.0
                          for lev in levels]
                rows.append([str(j)] + [repr(s) for s in shares])
                print(f"{j:>9d}  " + "  ".join(_sig6(s) for s in shares))
            _write_csv(os.path.join(out_dir, f"crosstab_{col}.csv"),
                       ["component"] + levels, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry points


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="countmix",
        description="Dirichlet-prior mixtures of Negative Binomial regressions "
                    "for count outcomes, fit by multi-chain MCMC.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    sim.add_argument("--params", help="JSON file with generating parameters")
    sim.add_argument("--config", help="key=value config file")
    sim.add_argument("--model", choices=["nb", "zinb"])
    sim.add_argument("--n", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit the mixture model")
    fit.add_argument("--input")
    fit.add_argument("--config", help="key=value config file")
    fit.add_argument("--model", choices=["nb", "zinb"])
    fit.add_argument("--outcome")
    fit.add_argument("--categorical",
                     help="'col=ref' or 'col=ref:lev1|lev2'; ';'-separated")
    fit.add_argument("--kmax", type=int)
    fit.add_argument("--alpha0", type=float)
    fit.add_argument("--m0", type=float)
    fit.add_argument("--s0", type=float)
    fit.add_argument("--a0", type=float)
    fit.add_argument("--b0", type=float)
    fit.add_argument("--iters", type=int)
    fit.add_argument("--burnin", type=int)
    fit.add_argument("--thin", type=int)
    fit.add_argument("--chains", type=int)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--target-accept", dest="target_accept", type=float)
    fit.add_argument("--rhat-threshold", dest="rhat_threshold", type=float)
    fit.add_argument("--occupancy-threshold", dest="occupancy_threshold", type=float)
    fit.add_argument("--out")
    fit.set_defaults(func=cmd_fit)

    rep = sub.add_parser("report", help="render tables from persisted traces")
    rep.add_argument("--traces", required=True, help="fit output directory")
    rep.add_argument("--out", help="directory for rendered tables (default: traces dir)")
    rep.set_defaults(func=cmd_report)
    return parser


def run(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SamplerError as exc:
        print(f"sampler failure: {exc}", file=sys.stderr)
        return EXIT_SAMPLER


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
