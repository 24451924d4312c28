"""Config-driven command line.

    qbinfer validate CONFIG
    qbinfer run COMMAND CONFIG [--seed N] [--steps N] [--alpha F]
                [--out-dir D] [--format csv|json] [--threads N] [--tol-*]
    qbinfer report RUN_DIR

Exit codes: 0 success, 1 domain error (the originating error class name is
printed), 2 usage or parse errors. Artifacts are deterministic given
(config, command, seed); the summary on stdout additionally carries
elapsed_ms, which is excluded from the files for that reason. Stochastic
commands refuse to run without a seed. Plain output only; NO_COLOR is
honored trivially.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import linalg
from .asymptotics import (
    DrivingSpec,
    channel_spectrum,
    convergence_fit,
    cesaro_fixed_point_residual,
    iterate_distance_curve,
    nonconvergence_witness,
    random_sequence_contraction,
    run_chain,
)
from .bayes import posterior_family, posterior_state, properness_check, sample_trajectory
from .config import ExperimentConfig, load_config, validate_report
from .decision import (
    DecisionRule,
    LossSpec,
    bayes_risk,
    bayes_solution_enumerate,
    enumerate_rules,
    pointwise_posterior_solution,
    risk,
)
from .errors import EmptyRunDir, ParseError, QbinferError
from .inference import (
    EstimatorSpec,
    credible_interval,
    hqpd_set,
    hypothesis_test,
    point_estimate,
    posterior_parameter_distribution,
)
from .instruments import KrausInstrument, compose
from .observables import DensityMatrix
from .serialize import encode_matrix, fmt_float, write_csv, write_json

STOCHASTIC_COMMANDS = {"simulate", "chain", "contraction"}

COMMANDS = (
    "simulate",
    "posterior",
    "estimate",
    "credible",
    "hqpd",
    "test",
    "risk",
    "bayes-solve",
    "spectrum",
    "converge",
    "chain",
    "contraction",
    "witness",
)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def _parallel_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _params(cfg: ExperimentConfig, args) -> dict:
    p = dict(cfg.run)
    if args.seed is not None:
        p["seed"] = args.seed
    if args.steps is not None:
        p["steps"] = args.steps
    if args.alpha is not None:
        p["alpha"] = args.alpha
    return p


def _need(params: dict, key: str):
    if key not in params:
        raise UsageError(f"run parameter {key!r} is required")
    return params[key]


def _state(cfg, params, key) -> DensityMatrix:
    return cfg.states[_need(params, key)]


def _instrument(cfg, params, key="instrument") -> KrausInstrument:
    return cfg.instruments[_need(params, key)]


def _instrument_list(cfg, params) -> list[KrausInstrument]:
    if "instruments" in params:
        return [cfg.instruments[name] for name in params["instruments"]]
    inst = _instrument(cfg, params)
    steps = int(params.get("steps", 1))
    return [inst] * steps


def _loss(params) -> LossSpec:
    block = _need(params, "loss")
    kind = block.get("kind")
    if kind == "weighted_quadratic":
        return LossSpec.weighted_quadratic(block.get("weights"))
    if kind == "linear":
        return LossSpec.linear(block["k0"], block["k1"])
    if kind == "zero_one":
        return LossSpec.zero_one(block["eps"])
    if kind == "interval":
        return LossSpec.interval(block["k0"], block["k1"])
    if kind == "partition":
        return LossSpec.partition(block["cells"], block["costs"])
    raise UsageError(f"unknown loss kind {kind!r}")


def _estimator(params) -> EstimatorSpec:
    block = _need(params, "estimator")
    kind = block.get("kind")
    if kind == "mean":
        return EstimatorSpec.weighted_mean(block.get("weights"))
    if kind == "quantile":
        return EstimatorSpec.quantile(block["p"])
    if kind == "linear":
        return EstimatorSpec.linear_loss(block["k0"], block["k1"])
    if kind == "mode":
        return EstimatorSpec.mode()
    raise UsageError(f"unknown estimator kind {kind!r}")


def _driving(params) -> DrivingSpec:
    block = _need(params, "driving")
    kind = block.get("kind")
    if kind == "iid":
        return DrivingSpec.iid(block["weights"])
    if kind == "markov":
        return DrivingSpec.markov(block["transition"], block["initial"])
    raise UsageError(f"unknown driving kind {kind!r}")


def _model_posterior_dist(cfg, params):
    """Posterior parameter distribution after the configured observations."""
    model = cfg.models[_need(params, "model")]
    state = model.prior_state
    names = params.get("instruments", [])
    outcomes = params.get("outcomes", [])
    if len(names) != len(outcomes):
        raise UsageError("instruments and outcomes must have the same length")
    for name, outcome in zip(names, outcomes):
        state = posterior_state(cfg.instruments[name], state, str(outcome))
    return model, posterior_parameter_distribution(model, state)


def _write_table(ctx, name: str, header: list[str], rows) -> str:
    if ctx["format"] == "json":
        fname = f"{name}.json"
        payload = [
            {col: (float(v) if isinstance(v, (float, np.floating)) else v)
             for col, v in zip(header, row)}
            for row in rows
        ]
        write_json(os.path.join(ctx["out_dir"], fname), payload)
    else:
        fname = f"{name}.csv"
        write_csv(os.path.join(ctx["out_dir"], fname), header, rows)
    return fname


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg, params, ctx):
    seed = int(_need(params, "seed"))
    insts = _instrument_list(cfg, params)
    prior = _state(cfg, params, "prior")
    traj = sample_trajectory(insts, prior, seed)
    purities = traj.purities()
    rows = [
        (i + 1, traj.outcomes[i], float(traj.probs[i]), float(purities[i]))
        for i in range(len(traj))
    ]
    outputs = [_write_table(ctx, "simulate", ["step", "outcome", "prob", "purity"], rows)]
    if params.get("emit_states"):
        fname = "simulate_states.json"
        write_json(
            os.path.join(ctx["out_dir"], fname),
            [encode_matrix(traj.states[i]) for i in range(len(traj))],
        )
        outputs.append(fname)
    metrics = {
        "n_steps": len(traj),
        "logprob": traj.logprob,
        "final_purity": float(purities[-1]),
    }
    return metrics, outputs


def cmd_posterior(cfg, params, ctx):
    inst = _instrument(cfg, params)
    prior = _state(cfg, params, "prior")
    fam = posterior_family(inst, prior)
    proper, _ = properness_check(fam)
    payload = {
        "outcomes": {
            lab: {
                "prob": fam.dist.prob(lab),
                "state": encode_matrix(fam.states[lab].matrix) if lab in fam.states else None,
            }
            for lab in inst.space.labels
        },
        "proper": bool(proper),
    }
    fname = "posterior.json"
    write_json(os.path.join(ctx["out_dir"], fname), payload)
    return {"n_covered": len(fam.states), "proper": bool(proper)}, [fname]


def cmd_estimate(cfg, params, ctx):
    model, dist = _model_posterior_dist(cfg, params)
    spec = _estimator(params)
    value = point_estimate(dist, spec)
    aux = {}
    if spec.kind == "quantile":
        aux["p"] = spec.p
    record = {"estimator": spec.kind, "value": value, "auxiliary": aux}
    fname = "estimate.json"
    write_json(os.path.join(ctx["out_dir"], fname), record)
    return {"estimator": spec.kind, "value": value}, [fname]


def cmd_credible(cfg, params, ctx):
    model, dist = _model_posterior_dist(cfg, params)
    alpha = float(_need(params, "alpha"))
    lo, hi, covered = credible_interval(dist, alpha)
    record = {
        "estimator": "credible_interval",
        "value": [lo, hi],
        "auxiliary": {"coverage": covered, "alpha": alpha},
    }
    fname = "credible.json"
    write_json(os.path.join(ctx["out_dir"], fname), record)
    return {"lo": lo, "hi": hi, "coverage": covered}, [fname]


def cmd_hqpd(cfg, params, ctx):
    model, dist = _model_posterior_dist(cfg, params)
    alpha = float(_need(params, "alpha"))
    values = hqpd_set(dist, alpha)
    covered = float(sum(dist.mass[list(dist.grid).index(v)] for v in values))
    record = {
        "estimator": "hqpd",
        "value": list(values),
        "auxiliary": {"coverage": covered, "alpha": alpha},
    }
    fname = "hqpd.json"
    write_json(os.path.join(ctx["out_dir"], fname), record)
    return {"size": len(values), "coverage": covered}, [fname]


def cmd_test(cfg, params, ctx):
    model, dist = _model_posterior_dist(cfg, params)
    partition = [[float(t) for t in cell] for cell in _need(params, "partition")]
    costs = [float(c) for c in _need(params, "costs")]
    convention = params.get("convention", "printed")
    index = hypothesis_test(dist, partition, costs, convention=convention)
    cell_mass = [
        float(sum(dist.mass[list(dist.grid).index(t)] for t in cell)) for cell in partition
    ]
    record = {
        "estimator": "test",
        "value": index,
        "auxiliary": {"cell_mass": cell_mass, "convention": convention},
    }
    fname = "test.json"
    write_json(os.path.join(ctx["out_dir"], fname), record)
    return {"accepted": index}, [fname]


def _rule_class(cfg, params, composite_labels, actions):
    if "rules" in params:
        return [DecisionRule({str(k): v for k, v in m.items()}) for m in params["rules"]]
    return enumerate_rules(composite_labels, actions)


def cmd_risk(cfg, params, ctx):
    model = cfg.models[_need(params, "model")]
    insts = [cfg.instruments[n] for n in _need(params, "instruments")]
    loss = _loss(params)
    actions = list(_need(params, "actions"))
    composite = compose(insts) if len(insts) > 1 else insts[0]
    rules = _rule_class(cfg, params, composite.space.labels, actions)

    def risks_for(rule):
        return {t: risk(model, insts, rule, loss, t) for t in model.grid}

    tables = _parallel_map(risks_for, rules, ctx["threads"])
    rows = []
    for rid, table in enumerate(tables):
        for t in model.grid:
            rows.append((f"r{rid}", float(t), float(table[t])))
    outputs = [_write_table(ctx, "risk", ["rule_id", "theta", "risk"], rows)]

    bayes_rule = bayes_solution_enumerate(model, insts, loss, actions)
    posterior_rule = pointwise_posterior_solution(model, insts, loss, actions)
    report = bayes_risk(model, insts, bayes_rule, loss)
    sup_risks = {f"r{rid}": float(max(t.values())) for rid, t in enumerate(tables)}
    best = min(sup_risks.values()) if sup_risks else float("nan")
    minimax_set = sorted(k for k, v in sup_risks.items() if v <= best + 1e-12)
    from .decision import admissibility_check

    admissible, _ = admissibility_check(model, insts, loss, bayes_rule, rules)
    agree = bayes_rule.mapping == posterior_rule.mapping
    summary = {
        "bayes_risk": report.bayes,
        "sup_risk": sup_risks,
        "minimax_set": minimax_set,
        "admissible": bool(admissible),
        "bayes_rule": bayes_rule.mapping,
        "posterior_rule": posterior_rule.mapping,
        "rules_agree": bool(agree),
    }
    fname = "risk_report.json"
    write_json(os.path.join(ctx["out_dir"], fname), summary)
    outputs.append(fname)
    metrics = {
        "bayes_risk": report.bayes,
        "minimax_set": minimax_set,
        "admissible": bool(admissible),
        "rules_agree": bool(agree),
    }
    return metrics, outputs


def cmd_bayes_solve(cfg, params, ctx):
    model = cfg.models[_need(params, "model")]
    insts = [cfg.instruments[n] for n in _need(params, "instruments")]
    loss = _loss(params)
    actions = list(_need(params, "actions"))
    bayes_rule = bayes_solution_enumerate(model, insts, loss, actions)
    posterior_rule = pointwise_posterior_solution(model, insts, loss, actions)
    report = bayes_risk(model, insts, bayes_rule, loss)
    diff = {
        lab: {"bayes": bayes_rule.mapping[lab], "posterior": posterior_rule.mapping[lab]}
        for lab in bayes_rule.mapping
        if bayes_rule.mapping[lab] != posterior_rule.mapping[lab]
    }
    payload = {
        "bayes_rule": bayes_rule.mapping,
        "posterior_rule": posterior_rule.mapping,
        "disagreements": diff,
        "bayes_risk": report.bayes,
    }
    fname = "bayes_solve.json"
    write_json(os.path.join(ctx["out_dir"], fname), payload)
    return {"bayes_risk": report.bayes, "n_disagreements": len(diff)}, [fname]


def cmd_spectrum(cfg, params, ctx):
    inst = _instrument(cfg, params)
    report = channel_spectrum(inst)
    payload = {
        "eigenvalues": [[float(z.real), float(z.imag)] for z in report.eigenvalues],
        "gap": report.gap,
        "peripheral_count": report.peripheral_count,
        "fixed_point": None
        if report.fixed_point is None
        else encode_matrix(report.fixed_point.matrix),
    }
    fname = "spectrum.json"
    write_json(os.path.join(ctx["out_dir"], fname), payload)
    second = abs(report.eigenvalues[1]) if report.eigenvalues.size > 1 else 0.0
    metrics = {
        "gap": report.gap,
        "peripheral_count": report.peripheral_count,
        "second_modulus": float(second),
    }
    return metrics, [fname]


def cmd_converge(cfg, params, ctx):
    inst = _instrument(cfg, params)
    rho0 = _state(cfg, params, "rho0")
    lo, hi = (int(x) for x in _need(params, "n_range"))
    ns = range(lo, hi + 1)
    rate, intercept, _ = convergence_fit(inst, rho0, ns)
    curve_ns, distances, _ = iterate_distance_curve(inst, rho0, ns)
    rows = [(int(n), float(d)) for n, d in zip(curve_ns, distances)]
    outputs = [_write_table(ctx, "converge", ["n", "distance"], rows)]
    report = channel_spectrum(inst)
    spectral = float(-np.log(abs(report.eigenvalues[1])))
    payload = {
        "alpha_hat": rate,
        "intercept": intercept,
        "spectral_alpha": spectral,
        "ratio": rate / spectral if spectral > 0 else None,
    }
    fname = "converge.json"
    write_json(os.path.join(ctx["out_dir"], fname), payload)
    outputs.append(fname)
    return payload, outputs


def cmd_chain(cfg, params, ctx):
    seed = int(_need(params, "seed"))
    inst = _instrument(cfg, params)
    rho0 = _state(cfg, params, "rho0")
    steps = int(_need(params, "steps"))
    moments = tuple(int(m) for m in params.get("moments", [2]))
    run = run_chain(inst, rho0, steps, seed, moments=moments)
    residuals = cesaro_fixed_point_residual(run, inst)
    header = ["step", "residual"] + [f"moment_{m}" for m in moments]
    rows = []
    for i, cp in enumerate(run.checkpoints):
        row = [int(cp), float(residuals[i])] + [float(run.moments[m][i]) for m in moments]
        rows.append(tuple(row))
    outputs = [_write_table(ctx, "chain", header, rows)]
    metrics = {
        "final_residual": float(residuals[-1]),
        **{f"final_moment_{m}": float(run.moments[m][-1]) for m in moments},
    }
    return metrics, outputs


def cmd_contraction(cfg, params, ctx):
    seed = int(_need(params, "seed"))
    channels = [cfg.instruments[n] for n in _need(params, "channels")]
    driving = _driving(params)
    rho = _state(cfg, params, "rho")
    sigma = _state(cfg, params, "sigma")
    steps = int(_need(params, "steps"))
    window = params.get("positivity_window", 8)
    distances, rate = random_sequence_contraction(
        channels, driving, rho, sigma, steps, seed,
        positivity_window=None if window in (None, 0) else int(window),
    )
    rows = [(i + 1, float(d)) for i, d in enumerate(distances)]
    outputs = [_write_table(ctx, "contraction", ["step", "distance"], rows)]
    metrics = {"rate": float(rate), "final_distance": float(distances[-1])}
    return metrics, outputs


def cmd_witness(cfg, params, ctx):
    u = cfg.matrices[_need(params, "unitary")]
    rho0 = _state(cfg, params, "rho0")
    steps = int(_need(params, "steps"))
    threshold = float(_need(params, "threshold"))
    witnessed, min_step = nonconvergence_witness(u, rho0, steps, threshold)
    payload = {
        "witnessed": bool(witnessed),
        "min_step_distance": min_step,
        "threshold": threshold,
        "steps": steps,
    }
    fname = "witness.json"
    write_json(os.path.join(ctx["out_dir"], fname), payload)
    return {"witnessed": bool(witnessed), "min_step_distance": min_step}, [fname]


COMMAND_IMPL = {
    "simulate": cmd_simulate,
    "posterior": cmd_posterior,
    "estimate": cmd_estimate,
    "credible": cmd_credible,
    "hqpd": cmd_hqpd,
    "test": cmd_test,
    "risk": cmd_risk,
    "bayes-solve": cmd_bayes_solve,
    "spectrum": cmd_spectrum,
    "converge": cmd_converge,
    "chain": cmd_chain,
    "contraction": cmd_contraction,
    "witness": cmd_witness,
}


# ---------------------------------------------------------------- report


def cmd_report(run_dir: str) -> str:
    names = sorted(
        f for f in os.listdir(run_dir) if f.endswith("_summary.json")
    )
    if not names:
        raise EmptyRunDir(f"no run summaries found in {run_dir!r}")
    summaries = []
    for name in names:
        with open(os.path.join(run_dir, name), "r", encoding="utf-8") as fh:
            summaries.append(json.load(fh))
    lines = ["| command | seed | metric | value |", "|---|---|---|---|"]
    csv_rows = []
    for s in summaries:
        seed = s.get("seed")
        for key in sorted(s.get("metrics", {})):
            val = s["metrics"][key]
            text = fmt_float(val) if isinstance(val, float) else str(val)
            lines.append(f"| {s['command']} | {seed} | {key} | {text} |")
            csv_rows.append((s["command"], str(seed), key, text))
    by_cmd = {s["command"]: s for s in summaries}
    if "converge" in by_cmd and "spectrum" in by_cmd:
        fitted = by_cmd["converge"]["metrics"].get("alpha_hat")
        second = by_cmd["spectrum"]["metrics"].get("second_modulus")
        if fitted is not None and second:
            spectral = -np.log(second)
            ratio = fitted / spectral
            lines.append(
                f"| converge+spectrum | - | fitted_vs_spectral_ratio | {fmt_float(ratio)} |"
            )
            csv_rows.append(("converge+spectrum", "-", "fitted_vs_spectral_ratio", fmt_float(ratio)))
    text = "\n".join(lines) + "\n"
    with open(os.path.join(run_dir, "report.md"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    write_csv(
        os.path.join(run_dir, "report.csv"),
        ["command", "seed", "metric", "value"],
        csv_rows,
    )
    return text


# ---------------------------------------------------------------- entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbinfer", description=__doc__)
    sub = parser.add_subparsers(dest="mode")

    val = sub.add_parser("validate", help="validate every object in a config")
    val.add_argument("config")
    _add_tol_flags(val)

    runp = sub.add_parser("run", help="run one command from a config")
    runp.add_argument("command", choices=COMMANDS)
    runp.add_argument("config")
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--steps", type=int, default=None)
    runp.add_argument("--alpha", type=float, default=None)
    runp.add_argument("--out-dir", default="out")
    runp.add_argument("--format", choices=("csv", "json"), default="csv")
    runp.add_argument("--threads", type=int, default=1)
    _add_tol_flags(runp)

    rep = sub.add_parser("report", help="merge run summaries in a directory")
    rep.add_argument("run_dir")
    return parser


def _add_tol_flags(p) -> None:
    p.add_argument("--tol-herm", type=float, default=None)
    p.add_argument("--tol-psd", type=float, default=None)
    p.add_argument("--tol-norm", type=float, default=None)


def _apply_tolerances(args) -> None:
    if getattr(args, "tol_herm", None) is not None:
        linalg.HERM_TOL = args.tol_herm
    if getattr(args, "tol_psd", None) is not None:
        linalg.PSD_TOL = args.tol_psd
    if getattr(args, "tol_norm", None) is not None:
        linalg.NORM_TOL = args.tol_norm


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.mode is None:
        parser.print_help()
        return 2
    try:
        if args.mode == "validate":
            _apply_tolerances(args)
            lines, ok = validate_report(args.config)
            for line in lines:
                print(line)
            return 0 if ok else 1
        if args.mode == "report":
            print(cmd_report(args.run_dir), end="")
            return 0
        # run
        _apply_tolerances(args)
        command = args.command
        lines, ok = validate_report(args.config)
        if not ok:
            for line in lines:
                print(line, file=sys.stderr)
            print("config failed validation", file=sys.stderr)
            return 1
        cfg = load_config(args.config)
        params = _params(cfg, args)
        if command in STOCHASTIC_COMMANDS and "seed" not in params:
            raise UsageError(f"command {command!r} needs a seed (--seed or run.seed)")
        seed = params.get("seed")
        os.makedirs(args.out_dir, exist_ok=True)
        ctx = {"out_dir": args.out_dir, "format": args.format, "threads": args.threads}
        t0 = time.perf_counter()
        metrics, outputs = COMMAND_IMPL[command](cfg, params, ctx)
        elapsed_ms = int(round((time.perf_counter() - t0) * 1000))
        summary_file = {
            "command": command,
            "seed": seed,
            "outputs": outputs,
            "metrics": metrics,
        }
        write_json(
            os.path.join(args.out_dir, f"{command.replace('-', '_')}_summary.json"),
            summary_file,
        )
        stdout_summary = dict(summary_file)
        stdout_summary["elapsed_ms"] = elapsed_ms
        stdout_summary["outputs"] = [os.path.join(args.out_dir, o) for o in outputs] + [
            os.path.join(args.out_dir, f"{command.replace('-', '_')}_summary.json")
        ]
        print(json.dumps(stdout_summary, sort_keys=True))
        return 0
    except ParseError as exc:
        print(f"ParseError: {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (QbinferError, ValueError, KeyError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
