"""Command-line harness: reproducible experiments with CSV and JSON outputs.

Subcommands mirror the experiment kinds:

======================  =======================================================
learn                   one estimation run; JSON summary only
mse_sweep               squared-error grid over shot counts N
concentration           min/mean K_ii and lambda_min statistics of Haar orbits
fisher_audit            trace bound Tr I(u) <= r*d on random protocols
concat_audit            trace bound Tr I(u) <= k^2*r*d on concatenated protocols
bound                   Van Trees reference-scale sample-count lower bound
======================  =======================================================

Usage: ``muclab <kind> [--config file.json] [--seed n] [--out dir]
[--threads n] [kind-specific flags]``. Flags override config-file values.
Outputs land in the --out directory as ``<kind>.csv`` (when the kind has a
row schema) plus ``<kind>_summary.json``. For a fixed config the CSV bytes
are identical across reruns; wall times live only in the JSON summary.

Channel specification schema (the "channel" config key, or a JSON file given
via --channel):

  {
    "d_channel": int,                  required
    "unitaries": "haar" | [[[re, im], ...], ...],   default "haar"
    "theta": [floats] | "uniform" | "dirichlet",    default "uniform"
    "r": int,        required only when neither unitaries nor theta fixes it
    "seed": int,     optional; overrides the derived stream for channel draws
  }

Explicit unitaries are nested lists of shape (r, d, d, 2) holding [re, im]
pairs. The env var MUCLAB_RANK_CAP overrides the default cap of 4096 on the
effective rank r**k.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import channel as channel_mod
from . import estimator, fisher, linalg, povm as povm_mod
from .records import CSV_SCHEMAS, ExperimentRecord, write_csv, write_json_summary
from .seeding import derive_rng, derive_seed

KINDS = ("learn", "mse_sweep", "concentration", "fisher_audit", "concat_audit", "bound")
MSE_REFERENCE_CONSTANT = 6.25


@dataclass
class ExperimentConfig:
    """Everything one run needs; kind-specific fields may stay None elsewhere."""

    kind: str = ""
    channel: dict | None = None
    N: int | None = None
    N_values: list[int] | None = None
    trials: int | None = None
    protocols: int | None = None
    k: int = 1
    d_channel: int | None = None
    r: int | None = None
    d: int | None = None
    epsilon: float | None = None
    trace_fisher: float | None = None
    sampling_path: str = "categorical_from_K"
    root_seed: int = 0
    out: str = "."
    threads: int = 1

    @classmethod
    def from_sources(cls, file_config: dict, overrides: dict) -> "ExperimentConfig":
        """Merge a config-file dict with CLI overrides (overrides win)."""
        known = {f.name for f in fields(cls)}
        merged: dict = {}
        for source in (file_config, overrides):
            for key, value in source.items():
                if key not in known:
                    raise ValueError(f"unknown config field {key!r}")
                if value is not None:
                    merged[key] = value
        return cls(**merged)


def validate(config: ExperimentConfig) -> list[str]:
    """Return a list of problems, each naming the offending field; never raises."""
    problems = []
    if config.kind not in KINDS:
        problems.append(f"kind: must be one of {KINDS}, got {config.kind!r}")
        return problems
    if config.threads < 1:
        problems.append(f"threads: must be >= 1, got {config.threads}")

    def need_channel() -> None:
        if config.channel is None:
            problems.append("channel: required for this kind")
            return
        if "d_channel" not in config.channel:
            problems.append("channel.d_channel: required")
        unitaries = config.channel.get("unitaries", "haar")
        if unitaries != "haar" and "theta" not in config.channel:
            problems.append("theta: explicit unitaries need an explicit theta")
        if (
            unitaries == "haar"
            and not isinstance(config.channel.get("theta", "uniform"), list)
            and "r" not in config.channel
        ):
            problems.append("channel.r: required when unitaries and theta are both random")

    if config.kind == "learn":
        need_channel()
        if config.N is None or config.N < 1:
            problems.append(f"N: must be >= 1, got {config.N}")
    elif config.kind == "mse_sweep":
        need_channel()
        if not config.N_values:
            problems.append("N_values: at least one shot count is required")
        elif any(n < 1 for n in config.N_values):
            problems.append(f"N_values: all entries must be >= 1, got {config.N_values}")
        if config.trials is None or config.trials < 1:
            problems.append(f"trials: must be >= 1, got {config.trials}")
    elif config.kind == "concentration":
        if config.d_channel is None or config.d_channel < 1:
            problems.append(f"d_channel: must be >= 1, got {config.d_channel}")
        if config.r is None or config.r < 1:
            problems.append(f"r: must be >= 1, got {config.r}")
        elif config.d_channel is not None and config.r > config.d_channel**2:
            problems.append(
                f"r: concentration requires r <= d_channel**2 = {config.d_channel**2}, "
                f"got {config.r}"
            )
        if config.trials is None or config.trials < 1:
            problems.append(f"trials: must be >= 1, got {config.trials}")
    elif config.kind in ("fisher_audit", "concat_audit"):
        if config.d_channel is None or config.d_channel < 1:
            problems.append(f"d_channel: must be >= 1, got {config.d_channel}")
        if config.r is None or config.r < 1:
            problems.append(f"r: must be >= 1, got {config.r}")
        if config.protocols is None or config.protocols < 1:
            problems.append(f"protocols: must be >= 1, got {config.protocols}")
        if config.kind == "concat_audit":
            if config.k < 1:
                problems.append(f"k: must be >= 1, got {config.k}")
            elif config.r is not None and config.r**config.k > channel_mod.rank_cap():
                problems.append(
                    f"k: effective rank r**k = {config.r**config.k} exceeds the cap "
                    f"{channel_mod.rank_cap()} (override via {channel_mod.RANK_CAP_ENV})"
                )
    elif config.kind == "bound":
        if config.r is None or config.r < 1:
            problems.append(f"r: must be >= 1, got {config.r}")
        if config.d is None or config.d < 1:
            problems.append(f"d: must be >= 1, got {config.d}")
        if config.k < 1:
            problems.append(f"k: must be >= 1, got {config.k}")
        if config.epsilon is None or config.epsilon <= 0:
            problems.append(f"epsilon: must be > 0, got {config.epsilon}")
    return problems


@dataclass(frozen=True)
class AuditOutcome:
    """One audited protocol: the bound report plus row-max-lemma bookkeeping."""

    report: fisher.BoundReport
    row_max_sum: float
    d: int
    meta: dict = field(default_factory=dict)


def random_fisher_protocol(d_channel: int, r: int, rng: np.random.Generator) -> AuditOutcome:
    """Draw one non-concatenating protocol and audit Tr I(u) <= r*d.

    The probe is the maximally entangled state or a Haar-random state with
    ancilla dimension in {1, 2, d_channel}; the measurement is the PGM of
    the orbit ensemble or a random complete POVM.
    """
    unitaries = np.stack([linalg.haar_unitary(d_channel, rng) for _ in range(r)])
    chan = channel_mod.MixedUnitaryChannel(unitaries, np.full(r, 1.0 / r))
    probe_kind = ["entangled", "haar"][int(rng.integers(2))]
    if probe_kind == "entangled":
        d_ancilla = d_channel
        probe = linalg.max_entangled_state(d_channel)
    else:
        choices = sorted({1, 2, d_channel})
        d_ancilla = int(choices[int(rng.integers(len(choices)))])
        probe = linalg.haar_state(d_channel * d_ancilla, rng)
    ensemble = povm_mod.probe_orbit_ensemble(chan, probe, d_ancilla)
    dim = ensemble.dim
    povm_kind = ["pgm", "random"][int(rng.integers(2))]
    if povm_kind == "pgm":
        measurement = povm_mod.pgm(ensemble)
    else:
        n_outcomes = int(rng.integers(2, 2 * dim + 1))
        measurement = povm_mod.random_povm(dim, n_outcomes, rng)
    overlap = povm_mod.overlap_matrix(measurement, ensemble)
    fim = fisher.fisher_matrix(overlap, chan.theta)
    report = fisher.audit_trace_bound(fim, r, dim, k=1)
    row_max_sum = float(overlap.max(axis=1).sum())
    meta = {"probe": probe_kind, "d_ancilla": d_ancilla, "povm": povm_kind}
    return AuditOutcome(report, row_max_sum, dim, meta)


def random_concat_protocol(
    d_channel: int, r: int, k: int, rng: np.random.Generator
) -> AuditOutcome:
    """Draw one k-fold concatenated protocol and audit Tr I(u) <= k^2*r*d."""
    unitaries = np.stack([linalg.haar_unitary(d_channel, rng) for _ in range(r)])
    theta = np.full(r, 1.0 / r)
    chan = channel_mod.MixedUnitaryChannel(unitaries, theta)
    intermediates = [linalg.haar_unitary(d_channel, rng) for _ in range(k)]
    effective = channel_mod.concat_effective(chan, intermediates)
    ensemble = povm_mod.unitary_orbit_ensemble(effective)
    dim = ensemble.dim
    povm_kind = ["pgm", "random"][int(rng.integers(2))]
    if povm_kind == "pgm":
        measurement = povm_mod.pgm(ensemble)
    else:
        n_outcomes = int(rng.integers(2, 2 * dim + 1))
        measurement = povm_mod.random_povm(dim, n_outcomes, rng)
    fim = fisher.fisher_concat(chan, intermediates, measurement, theta)
    report = fisher.audit_trace_bound(fim, r, dim, k=k)
    overlap = povm_mod.overlap_matrix(measurement, ensemble)
    row_max_sum = float(overlap.max(axis=1).sum())
    meta = {"povm": povm_kind, "k": k}
    return AuditOutcome(report, row_max_sum, dim, meta)


def _audit_record(config_kind: str, d_channel: int, r: int, k: int, root_seed: int, index: int):
    seed = derive_seed(root_seed, config_kind, index)
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    if config_kind == "fisher_audit":
        outcome = random_fisher_protocol(d_channel, r, rng)
    else:
        outcome = random_concat_protocol(d_channel, r, k, rng)
    record = ExperimentRecord(
        kind=config_kind,
        seed=seed,
        d_channel=d_channel,
        r=r,
        k=k,
        trial=index,
        metrics={
            "trace_fisher": outcome.report.trace_fisher,
            "bound": outcome.report.bound,
            "slack": outcome.report.slack,
            "satisfied": outcome.report.satisfied,
        },
        wall_time=time.perf_counter() - start,
    )
    return record, outcome


def _map_maybe_parallel(worker, args_list: list[tuple], threads: int) -> list:
    if threads <= 1 or len(args_list) <= 1:
        return [worker(*args) for args in args_list]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, *zip(*args_list)))


def _channel_from_config(config: ExperimentConfig) -> channel_mod.MixedUnitaryChannel:
    rng = derive_rng(config.root_seed, "channel")
    return channel_mod.from_spec(config.channel or {}, rng)


def _run_learn(config: ExperimentConfig) -> dict:
    chan = _channel_from_config(config)
    seed = derive_seed(config.root_seed, "learn")
    options = estimator.EstimatorOptions(sampling_path=config.sampling_path)
    result = estimator.run_pgm_estimator(chan, int(config.N), options, seed=seed)
    return {
        "kind": "learn",
        "d_channel": chan.d_channel,
        "r": chan.rank,
        "N": result.N,
        "seed": seed,
        "theta_hat": [float(x) for x in result.theta_hat],
        "counts": [int(c) for c in result.counts],
        "squared_error": result.squared_error,
        "warnings": list(result.warnings),
    }


def _mse_chunk(chan, N_values, trials, options, root_seed, trial_indices):
    return estimator.mse_curve(chan, N_values, trials, options, root_seed, trial_indices)


def _run_mse_sweep(config: ExperimentConfig) -> tuple[list[ExperimentRecord], dict]:
    chan = _channel_from_config(config)
    options = estimator.EstimatorOptions(sampling_path=config.sampling_path)
    N_values = [int(n) for n in config.N_values or []]
    trials = int(config.trials or 0)
    if config.threads > 1:
        chunks = np.array_split(np.arange(trials), config.threads)
        args = [
            (chan, N_values, trials, options, config.root_seed, [int(t) for t in chunk])
            for chunk in chunks
            if chunk.size
        ]
        parts = _map_maybe_parallel(_mse_chunk, args, config.threads)
        by_cell = {(rec.N, rec.trial): rec for part in parts for rec in part}
        records = [by_cell[(n, t)] for n in N_values for t in range(trials)]
    else:
        records = estimator.mse_curve(chan, N_values, trials, options, config.root_seed)
    per_n = {}
    for n in N_values:
        errors = np.array([rec.metrics["sq_error"] for rec in records if rec.N == n])
        per_n[str(n)] = {
            "mean_mse": float(errors.mean()),
            "stderr_mse": float(errors.std(ddof=1) / np.sqrt(errors.size)) if errors.size > 1 else 0.0,
            "reference_mse": MSE_REFERENCE_CONSTANT / n,
            "trials": int(errors.size),
        }
    summary = {
        "kind": "mse_sweep",
        "d_channel": chan.d_channel,
        "r": chan.rank,
        "N_values": N_values,
        "reference_constant": MSE_REFERENCE_CONSTANT,
        "per_N": per_n,
    }
    if len(N_values) > 1:
        means = np.array([per_n[str(n)]["mean_mse"] for n in N_values])
        slope = float(np.polyfit(np.log(N_values), np.log(means), 1)[0])
        summary["loglog_slope"] = slope
    return records, summary


def _concentration_trial_args(config: ExperimentConfig):
    return [
        (int(config.d_channel), int(config.r), config.root_seed, t)
        for t in range(int(config.trials))
    ]


def _run_concentration(config: ExperimentConfig) -> tuple[list[ExperimentRecord], dict]:
    records = _map_maybe_parallel(
        estimator.concentration_trial, _concentration_trial_args(config), config.threads
    )
    summary = estimator.concentration_summary(records)
    summary.update({"kind": "concentration", "d_channel": config.d_channel, "r": config.r})
    return records, summary


def _run_audit(config: ExperimentConfig) -> tuple[list[ExperimentRecord], dict]:
    k = config.k if config.kind == "concat_audit" else 1
    args = [
        (config.kind, int(config.d_channel), int(config.r), k, config.root_seed, i)
        for i in range(int(config.protocols))
    ]
    pairs = _map_maybe_parallel(_audit_record, args, config.threads)
    records = [record for record, _ in pairs]
    outcomes = [outcome for _, outcome in pairs]
    slacks = np.array([o.report.slack for o in outcomes])
    row_max_excess = np.array([o.row_max_sum - o.d for o in outcomes])
    summary = {
        "kind": config.kind,
        "d_channel": config.d_channel,
        "r": config.r,
        "k": k,
        "protocols": len(records),
        "all_satisfied": bool(all(o.report.satisfied for o in outcomes)),
        "min_slack": float(slacks.min()),
        "max_row_max_sum_minus_d": float(row_max_excess.max()),
    }
    return records, summary


def _run_bound(config: ExperimentConfig) -> dict:
    value = fisher.van_trees_lower_bound(
        int(config.r), int(config.d), int(config.k), float(config.epsilon), config.trace_fisher
    )
    return {
        "kind": "bound",
        "r": config.r,
        "d": config.d,
        "k": config.k,
        "epsilon": config.epsilon,
        "trace_fisher": config.trace_fisher,
        "reference_lower_bound": value,
        "note": "constant-1 reference scale, not a certified bound",
    }


def run(config: ExperimentConfig) -> int:
    """Run one experiment; persist CSV records and a JSON summary; return 0."""
    problems = validate(config)
    if problems:
        for problem in problems:
            print(f"config problem: {problem}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    records: list[ExperimentRecord] | None = None
    if config.kind == "learn":
        summary = _run_learn(config)
    elif config.kind == "mse_sweep":
        records, summary = _run_mse_sweep(config)
    elif config.kind == "concentration":
        records, summary = _run_concentration(config)
    elif config.kind in ("fisher_audit", "concat_audit"):
        records, summary = _run_audit(config)
    else:
        summary = _run_bound(config)
    summary["root_seed"] = config.root_seed
    summary["wall_time"] = time.perf_counter() - start
    out_dir = config.out or "."
    os.makedirs(out_dir, exist_ok=True)
    if records is not None and config.kind in CSV_SCHEMAS:
        csv_path = os.path.join(out_dir, f"{config.kind}.csv")
        write_csv(csv_path, config.kind, records)
        summary["csv_path"] = csv_path
    write_json_summary(os.path.join(out_dir, f"{config.kind}_summary.json"), summary)
    return 0


def _parse_theta(text: str):
    if text in ("uniform", "dirichlet"):
        return text
    return [float(part) for part in text.split(",")]


def _add_channel_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--channel", help="path to a channel spec JSON file")
    sub.add_argument("--d-channel", type=int, dest="d_channel", help="channel dimension")
    sub.add_argument("--r", type=int, help="channel rank")
    sub.add_argument(
        "--theta", type=_parse_theta, help='"uniform", "dirichlet", or comma-separated floats'
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="muclab",
        description="Numerical laboratory for learning mixed unitary channels.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--seed", type=int, dest="root_seed", help="root seed (default 0)")
    common.add_argument("--out", help="output directory (default .)")
    common.add_argument("--threads", type=int, help="worker-pool cap (default 1)")
    subparsers = parser.add_subparsers(dest="kind", required=True)

    learn = subparsers.add_parser("learn", parents=[common], help="single estimation run")
    _add_channel_flags(learn)
    learn.add_argument("--N", type=int, help="number of measurement shots")
    learn.add_argument(
        "--sampling-path", dest="sampling_path", choices=estimator.SAMPLING_PATHS
    )

    mse = subparsers.add_parser("mse_sweep", parents=[common], help="MSE vs N experiment")
    _add_channel_flags(mse)
    mse.add_argument(
        "--N", type=int, action="append", dest="N_values", help="shot count (repeatable)"
    )
    mse.add_argument("--trials", type=int, help="trials per shot count")
    mse.add_argument(
        "--sampling-path", dest="sampling_path", choices=estimator.SAMPLING_PATHS
    )

    conc = subparsers.add_parser(
        "concentration", parents=[common], help="overlap-diagonal concentration experiment"
    )
    conc.add_argument("--d-channel", type=int, dest="d_channel")
    conc.add_argument("--r", type=int)
    conc.add_argument("--trials", type=int)

    fa = subparsers.add_parser(
        "fisher_audit", parents=[common], help="Fisher trace bound audit"
    )
    fa.add_argument("--d-channel", type=int, dest="d_channel")
    fa.add_argument("--r", type=int)
    fa.add_argument("--protocols", type=int, help="number of random protocols")

    ca = subparsers.add_parser(
        "concat_audit", parents=[common], help="concatenated Fisher trace bound audit"
    )
    ca.add_argument("--d-channel", type=int, dest="d_channel")
    ca.add_argument("--r", type=int)
    ca.add_argument("--k", type=int, help="number of channel uses")
    ca.add_argument("--protocols", type=int)

    bound = subparsers.add_parser(
        "bound", parents=[common], help="Van Trees reference lower bound"
    )
    bound.add_argument("--r", type=int)
    bound.add_argument("--d", type=int, help="probe dimension d_channel * d_ancilla")
    bound.add_argument("--k", type=int)
    bound.add_argument("--epsilon", type=float)
    bound.add_argument("--trace-fisher", type=float, dest="trace_fisher")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    file_config: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as handle:
            file_config = json.load(handle)
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("config", "channel", "theta") and value is not None
    }
    channel_spec = file_config.pop("channel", None)
    if getattr(args, "channel", None):
        with open(args.channel, encoding="utf-8") as handle:
            channel_spec = json.load(handle)
    needs_channel = args.kind in ("learn", "mse_sweep")
    if needs_channel:
        channel_spec = dict(channel_spec or {})
        for key in ("d_channel", "r"):
            value = getattr(args, key, None)
            if value is not None:
                channel_spec[key] = value
                overrides.pop(key, None)
        theta = getattr(args, "theta", None)
        if theta is not None:
            channel_spec["theta"] = theta
        overrides["channel"] = channel_spec or None
    config = ExperimentConfig.from_sources(file_config, overrides)
    config.kind = args.kind
    return config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(config)
    except Exception as exc:  # surface module errors as a clean nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
