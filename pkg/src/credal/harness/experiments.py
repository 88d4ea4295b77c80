"""Experiment runners: seeded replication sweeps emitting CSV rows + a JSON summary.

Every runner is deterministic given the config seed: replication r of
experiment e draws from an independent Philox substream, rows carry the
replication coordinates, and the CSV body is sorted before writing so the
output is schedule-independent.  The CSV gets one timestamped comment line;
everything below it is byte-reproducible for a given config hash.
"""

from __future__ import annotations

import datetime
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from credal.dro import ThresholdClassifier, TrainConfig, brute_force_minimax, train, world_risks
from credal.estimation import (
    certificate,
    disagreement_hard_from_labels,
    disagreement_soft_from_probs,
    hoeffding_epsilon,
    noisy_closed_form,
    read_annotations,
    empirical_disagreement_hard,
    empirical_disagreement_soft,
)
from credal.harness.config import ConfigError, ExperimentConfig, config_hash, parse_env
from credal.harness.summary import summarize
from credal.measures import (
    Gaussian,
    Probit,
    Sigmoid,
    SymmetricNoise,
    Threshold,
    expected_conditional_tv,
    joint_tv_exact,
    tv_env,
)
from credal.sets import CredalSpec
from credal.synthgen import (
    GenSeed,
    block_mechanisms,
    interval_mechanisms,
    minimax_instance,
    sample_hard_arrays,
    sample_soft_arrays,
)


class ExperimentError(RuntimeError):
    """A replication failed; message carries the (config, replication) coordinates."""


def _parallel_map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_csv(path: Path, rows: list[dict], columns: list[str], cfg_hash: str) -> None:
    stamped = f"# generated_at={datetime.datetime.now(datetime.timezone.utc).isoformat()} config_hash={cfg_hash}"
    lines = [stamped, ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    path.write_text("\n".join(lines) + "\n")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _meta(config: ExperimentConfig) -> dict:
    return {"experiment": config.experiment, "config_hash": config_hash(config), "seed": config.seed}


# ---------------------------------------------------------------------------
# Individual experiments
# ---------------------------------------------------------------------------


def _run_gating_curve(config: ExperimentConfig, jobs: int) -> tuple[list[dict], dict, list[str]]:
    p = config.params
    quad = config.quadrature
    slope = float(p["sigmoid_slope"])
    b_left, b_right = (float(b) for b in p["sigmoid_boundaries"])
    l_left = Sigmoid(slope, -slope * b_left)
    l_right = Sigmoid(slope, -slope * b_right)
    gap = float(p["env_gap"])
    std = float(p["window_std"])
    rows = []
    for m in p["window_means"]:
        e1 = Gaussian(float(m) - gap / 2.0, std)
        e2 = Gaussian(float(m) + gap / 2.0, std)
        cov = tv_env(e1, e2, quad)
        a1 = expected_conditional_tv(e1, l_left, l_right, quad)
        a2 = expected_conditional_tv(e2, l_left, l_right, quad)
        joint = joint_tv_exact(e1, l_left, e2, l_right, quad)
        rows.append(
            {
                **_meta(config),
                "window_center": float(m),
                "cov_tv": cov,
                "joint_tv": joint,
                "lower_bound": max(abs(a1 - cov), abs(a2 - cov)),
                "upper_bound": min(1.0, cov + min(a1, a2)),
            }
        )
    rows.sort(key=lambda r: r["window_center"])
    cols = ["experiment", "config_hash", "seed", "window_center", "cov_tv", "joint_tv", "lower_bound", "upper_bound"]
    return rows, summarize(rows), cols


def _sweep_labelers(regime: str, count: int, lo: float, hi: float):
    grid = np.linspace(lo, hi, count)
    if regime == "hard":
        return tuple(Threshold(float(t)) for t in grid)
    if regime == "soft":
        return tuple(Sigmoid(1.0, -float(b)) for b in grid)
    raise ConfigError(f"unknown labeler regime {regime!r}")


def _run_bounds_sweep(config: ExperimentConfig, jobs: int) -> tuple[list[dict], dict, list[str]]:
    p = config.params
    quad = config.quadrature
    rng = GenSeed(config.seed).derive(0).generator()
    mean_lo, mean_hi = p["env_mean_range"]
    envs = [Gaussian(float(m), float(p["env_std"])) for m in np.linspace(mean_lo, mean_hi, p["grid_env_count"])]
    for _ in range(p["random_env_count"]):
        envs.append(
            Gaussian(
                float(rng.uniform(*p["random_mean_range"])),
                float(rng.uniform(*p["random_std_range"])),
            )
        )
    envs = tuple(envs)
    n_env = len(envs)
    rows = []
    tol = 2.0 * quad.abs_tol
    for regime in p["regimes"]:
        labs = _sweep_labelers(regime, p["labeler_count"], *p["labeler_range"])
        n_lab = len(labs)
        cov = {
            (i, ip): tv_env(envs[i], envs[ip], quad)
            for i, ip in itertools.combinations(range(n_env), 2)
        }
        ect = {
            (i, j, jp): expected_conditional_tv(envs[i], labs[j], labs[jp], quad)
            for i in range(n_env)
            for j, jp in itertools.combinations(range(n_lab), 2)
        }
        verts = list(itertools.product(range(n_env), range(n_lab)))
        for (i, j), (ip, jp) in itertools.combinations(verts, 2):
            if i == ip and j == jp:
                continue
            if i == ip:
                pair_class = "fixed_covariate"
                exact = ect[(i, min(j, jp), max(j, jp))]
                lower = upper = upper_raw = exact
            elif j == jp:
                pair_class = "fixed_labeler"
                exact = cov[(min(i, ip), max(i, ip))]
                lower = upper = upper_raw = exact
            else:
                pair_class = "joint_shift"
                c = cov[(min(i, ip), max(i, ip))]
                a_i = ect[(i, min(j, jp), max(j, jp))]
                a_ip = ect[(ip, min(j, jp), max(j, jp))]
                lower = max(abs(a_i - c), abs(a_ip - c))
                upper_raw = c + min(a_i, a_ip)
                upper = min(1.0, upper_raw)
                exact = joint_tv_exact(envs[i], labs[j], envs[ip], labs[jp], quad)
            viol = 1.0 if (exact < lower - tol or exact > upper + tol) else 0.0
            rows.append(
                {
                    **_meta(config),
                    "regime": regime,
                    "pair_class": pair_class,
                    "i": i,
                    "j": j,
                    "ip": ip,
                    "jp": jp,
                    "exact": exact,
                    "lower": lower,
                    "upper": upper,
                    "gap_low": exact - lower,
                    "gap_up": upper_raw - exact,
                    "viol": viol,
                }
            )
    rows.sort(key=lambda r: (r["regime"], r["pair_class"], r["i"], r["j"], r["ip"], r["jp"]))
    summary = summarize(rows, group_by="pair_class")
    # headline Table-1-style aggregates: mean gaps over joint-shift pairs per regime
    for regime in p["regimes"]:
        joint = [r for r in rows if r["regime"] == regime and r["pair_class"] == "joint_shift"]
        if joint:
            summary[f"joint_shift_{regime}"] = {
                "pairs": len(joint),
                "delta_low": float(np.mean([r["gap_low"] for r in joint])),
                "delta_up": float(np.mean([r["gap_up"] for r in joint])),
                "violations": int(sum(r["viol"] for r in joint)),
            }
    cols = [
        "experiment", "config_hash", "seed", "regime", "pair_class",
        "i", "j", "ip", "jp", "exact", "lower", "upper", "gap_low", "gap_up", "viol",
    ]
    return rows, summary, cols


def _run_diameter_ablation(config: ExperimentConfig, jobs: int) -> tuple[list[dict], dict, list[str]]:
    p = config.params
    quad = config.quadrature
    regime = p["regime"]
    if regime == "hard":
        labs = tuple(Threshold(float(t)) for t in p["thresholds"])
    elif regime == "soft":
        labs = tuple(Probit(float(p["probit_kappa"]), -float(p["probit_kappa"]) * float(b)) for b in p["probit_biases"])
    else:
        raise ConfigError(f"unknown regime {regime!r}")
    seed = GenSeed(config.seed)
    env_rng = seed.derive(0).generator()
    n = int(p["n"])
    rows = []
    for e_idx in range(int(p["env_count"])):
        env = Gaussian(
            float(env_rng.uniform(*p["mean_range"])), float(env_rng.uniform(*p["std_range"]))
        )
        eta_star = max(
            expected_conditional_tv(env, l1, l2, quad)
            for l1, l2 in itertools.combinations(labs, 2)
        )
        for run in range(int(p["runs_per_env"])):
            sub = seed.derive(1, e_idx, run)
            try:
                if regime == "hard":
                    _, labels = sample_hard_arrays(env, labs, n, sub)
                    eta_hat = disagreement_hard_from_labels(labels).eta_hat
                else:
                    _, probs = sample_soft_arrays(env, labs, n, sub)
                    eta_hat = disagreement_soft_from_probs(probs).eta_hat
            except Exception as exc:
                raise ExperimentError(
                    f"diameter_ablation failed at env={e_idx} run={run}: {exc}"
                ) from exc
            rows.append(
                {
                    **_meta(config),
                    "env_index": e_idx,
                    "rep": run,
                    "env_mean": env.mean,
                    "env_std": env.std,
                    "eta_star": eta_star,
                    "eta_hat": eta_hat,
                    "gap": eta_hat - eta_star,
                    "abs_gap": abs(eta_hat - eta_star),
                }
            )
    rows.sort(key=lambda r: (r["env_index"], r["rep"]))
    cols = [
        "experiment", "config_hash", "seed", "env_index", "rep",
        "env_mean", "env_std", "eta_star", "eta_hat", "gap", "abs_gap",
    ]
    return rows, summarize(rows), cols


def _run_noise_ablation(config: ExperimentConfig, jobs: int) -> tuple[list[dict], dict, list[str]]:
    p = config.params
    env = parse_env(p["env"])
    base = Threshold(float(p["base_threshold"]))
    k = int(p["annotators"])
    n = int(p["n"])
    seed = GenSeed(config.seed)
    rows = []
    for eps_idx, eps_max in enumerate(p["eps_max_list"]):
        for rep in range(int(p["replications"])):
            sub = seed.derive(eps_idx, rep)
            rng = sub.generator()
            eps = rng.uniform(0.0, float(eps_max), size=k)
            eta_true, bound = noisy_closed_form(eps.tolist())
            labs = tuple(SymmetricNoise(base, float(e)) for e in eps)
            try:
                _, labels = sample_hard_arrays(env, labs, n, sub.derive(1))
                eta_hat = disagreement_hard_from_labels(labels).eta_hat
            except Exception as exc:
                raise ExperimentError(
                    f"noise_ablation failed at eps_max={eps_max} rep={rep}: {exc}"
                ) from exc
            rows.append(
                {
                    **_meta(config),
                    "eps_max": float(eps_max),
                    "rep": rep,
                    "eta_true": eta_true,
                    "bound": bound,
                    "eta_hat": eta_hat,
                    "gap": eta_hat - eta_true,
                    "abs_gap": abs(eta_hat - eta_true),
                    "hat_exceeds_bound": 1.0 if eta_hat > bound else 0.0,
                }
            )
    rows.sort(key=lambda r: (r["eps_max"], r["rep"]))
    cols = [
        "experiment", "config_hash", "seed", "eps_max", "rep",
        "eta_true", "bound", "eta_hat", "gap", "abs_gap", "hat_exceeds_bound",
    ]
    return rows, summarize(rows, group_by="eps_max"), cols


def _concentration_reps(args) -> list[dict]:
    env_doc, thresholds, n, reps, master, stream, eta_star, eps, meta = args
    env = parse_env(env_doc)
    labs = tuple(Threshold(float(t)) for t in thresholds)
    seed = GenSeed(master)
    out = []
    for rep in reps:
        sub = seed.derive(stream, n, rep)
        _, labels = sample_hard_arrays(env, labs, n, sub)
        eta_hat = disagreement_hard_from_labels(labels).eta_hat
        err = abs(eta_hat - eta_star)
        out.append(
            {
                **meta,
                "n": n,
                "rep": rep,
                "eta_hat": eta_hat,
                "err": err,
                "viol": 1.0 if err > eps else 0.0,
            }
        )
    return out


def _run_sample_complexity(config: ExperimentConfig, jobs: int) -> tuple[list[dict], dict, list[str]]:
    p = config.params
    env = parse_env(p["env"])
    labs = tuple(Threshold(float(t)) for t in p["thresholds"])
    if len(labs) < 2:
        raise ConfigError("sample_complexity needs at least two thresholds")
    eta_star = max(
        expected_conditional_tv(env, l1, l2, config.quadrature)
        for l1, l2 in itertools.combinations(labs, 2)
    )
    meta = _meta(config)
    rows: list[dict] = []
    tasks = []
    plan: dict[int, int] = {}
    for n in p["n_list"]:
        plan[int(n)] = max(plan.get(int(n), 0), int(p["replications"]))
    for n in p["violation_n_list"]:
        plan[int(n)] = max(plan.get(int(n), 0), int(p["violation_replications"]))
    for n, total in sorted(plan.items()):
        eps = hoeffding_epsilon(n, len(labs), config.delta)
        chunk = max(1, total // max(jobs, 1))
        rep_chunks = [list(range(s, min(s + chunk, total))) for s in range(0, total, chunk)]
        tasks.extend(
            (dict(p["env"]), tuple(p["thresholds"]), n, reps, config.seed, 2, eta_star, eps, meta)
            for reps in rep_chunks
        )
    try:
        for chunk_rows in _parallel_map(_concentration_reps, tasks, jobs):
            rows.extend(chunk_rows)
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(f"sample_complexity replication failed: {exc}") from exc
    rows.sort(key=lambda r: (r["n"], r["rep"]))
    summary = summarize(rows, group_by="n")
    summary["population_diameter"] = eta_star
    summary["per_n"] = {}
    medians = {}
    for n, total in sorted(plan.items()):
        sub = [r for r in rows if r["n"] == n]
        errs = np.sort([r["err"] for r in sub])
        eps = hoeffding_epsilon(n, len(labs), config.delta)
        q50 = float(np.quantile(errs, 0.5))
        q95 = float(np.quantile(errs, 0.95))
        medians[n] = q50
        from credal.harness.summary import wilson_interval

        viols = int(sum(r["viol"] for r in sub))
        lo, hi = wilson_interval(viols, len(sub))
        summary["per_n"][str(n)] = {
            "replications": len(sub),
            "q50_err": q50,
            "q95_err": q95,
            "eps_hoeff": eps,
            "p_viol": viols / len(sub),
            "wilson_low": lo,
            "wilson_high": hi,
            "tightness_ratio": eps / q95 if q95 > 0 else float("inf"),
        }
    slope_ns = [int(n) for n in p["n_list"]]
    if len(slope_ns) >= 3:
        xs = np.log([n for n in slope_ns])
        ys = np.log([max(medians[n], 1e-12) for n in slope_ns])
        summary["log_log_slope"] = float(np.polyfit(xs, ys, 1)[0])
    cols = ["experiment", "config_hash", "seed", "n", "rep", "eta_hat", "err", "viol"]
    return rows, summary, cols


def _mechanism_reps(args) -> list[dict]:
    env_doc, method, pinned, step, n_y, n, reps, master, eta_star, eps, meta = args
    env = parse_env(env_doc)
    if method == "interval":
        labs, _ = interval_mechanisms(n_y, env, pinned)
    else:
        labs, _ = block_mechanisms(n_y, env, step)
    seed = GenSeed(master)
    out = []
    for rep in reps:
        sub = seed.derive(3, n_y, rep)
        _, labels = sample_hard_arrays(env, labs, n, sub)
        eta_hat = disagreement_hard_from_labels(labels).eta_hat
        err = abs(eta_hat - eta_star)
        out.append(
            {
                **meta,
                "n_y": n_y,
                "rep": rep,
                "eta_star": eta_star,
                "eta_hat": eta_hat,
                "err": err,
                "viol": 1.0 if err > eps else 0.0,
            }
        )
    return out


def _run_mechanism_complexity(config: ExperimentConfig, jobs: int) -> tuple[list[dict], dict, list[str]]:
    p = config.params
    env = parse_env(p["env"])
    method = p["method"]
    if method not in ("interval", "block"):
        raise ConfigError(f"method must be 'interval' or 'block', got {method!r}")
    n = int(p["n"])
    meta = _meta(config)
    tasks = []
    implied: dict[int, float] = {}
    for n_y in p["n_y_list"]:
        n_y = int(n_y)
        if method == "interval":
            _, eta_star = interval_mechanisms(n_y, env, float(p["pinned_mass"]))
        else:
            _, eta_star = block_mechanisms(n_y, env, float(p["block_step"]))
        implied[n_y] = eta_star
        eps = hoeffding_epsilon(n, n_y, config.delta)
        total = int(p["replications"])
        chunk = max(1, total // max(jobs, 1))
        rep_chunks = [list(range(s, min(s + chunk, total))) for s in range(0, total, chunk)]
        tasks.extend(
            (
                dict(p["env"]), method, float(p["pinned_mass"]), float(p["block_step"]),
                n_y, n, reps, config.seed, eta_star, eps, meta,
            )
            for reps in rep_chunks
        )
    rows: list[dict] = []
    try:
        for chunk_rows in _parallel_map(_mechanism_reps, tasks, jobs):
            rows.extend(chunk_rows)
    except Exception as exc:
        raise ExperimentError(f"mechanism_complexity replication failed: {exc}") from exc
    rows.sort(key=lambda r: (r["n_y"], r["rep"]))
    summary = summarize(rows, group_by="n_y")
    summary["per_n_y"] = {}
    from credal.harness.summary import wilson_interval

    for n_y in sorted(implied):
        sub = [r for r in rows if r["n_y"] == n_y]
        errs = np.sort([r["err"] for r in sub])
        eps = hoeffding_epsilon(n, n_y, config.delta)
        q50 = float(np.quantile(errs, 0.5))
        q95 = float(np.quantile(errs, 0.95))
        viols = int(sum(r["viol"] for r in sub))
        lo, hi = wilson_interval(viols, len(sub))
        summary["per_n_y"][str(n_y)] = {
            "replications": len(sub),
            "implied_eta_star": implied[n_y],
            "q50_err": q50,
            "q95_err": q95,
            "eps_hoeff": eps,
            "p_viol": viols / len(sub),
            "wilson_low": lo,
            "wilson_high": hi,
            "tightness_ratio": eps / q95 if q95 > 0 else float("inf"),
        }
    cols = ["experiment", "config_hash", "seed", "n_y", "rep", "eta_star", "eta_hat", "err", "viol"]
    return rows, summary, cols


def _run_minimax_demo(config: ExperimentConfig, jobs: int) -> tuple[list[dict], dict, list[str]]:
    p = config.params
    env = parse_env(p["env"])
    quad = config.quadrature
    grid_n = int(p["grid_n"])
    rows = []
    for eta in p["etas"]:
        spec = minimax_instance(float(eta), env)
        lo = env.mean - 4.0 * env.std
        hi = env.mean + 4.0 * env.std
        grid = np.linspace(lo, hi, grid_n)
        min_sum = float("inf")
        min_max = float("inf")
        for theta in grid:
            wr = world_risks(ThresholdClassifier(float(theta), 1), spec, quad)
            risk_sum = float(wr.risks.sum())
            min_sum = min(min_sum, risk_sum)
            min_max = min(min_max, wr.worst_value)
        rows.append(
            {
                **_meta(config),
                "eta": float(eta),
                "min_risk_sum": min_sum,
                "min_max_risk": min_max,
                "sum_floor_ok": 1.0 if min_sum >= float(eta) - 1e-9 else 0.0,
                "minimax_floor_ok": 1.0 if min_max >= float(eta) / 2.0 - 1e-3 else 0.0,
            }
        )
    rows.sort(key=lambda r: r["eta"])
    cols = [
        "experiment", "config_hash", "seed", "eta",
        "min_risk_sum", "min_max_risk", "sum_floor_ok", "minimax_floor_ok",
    ]
    return rows, summarize(rows), cols


def _run_dro_train(config: ExperimentConfig, jobs: int) -> tuple[list[dict], dict, list[str]]:
    p = config.params
    env = parse_env(p["env"])
    spec = CredalSpec((env,), tuple(Threshold(float(t)) for t in p["thresholds"]))
    quad = config.quadrature
    mode = p["mode"]
    tau = float(p["tau"]) if mode == "lse" else None
    cfg = TrainConfig(
        mode=mode, tau=tau, step_size=float(p["step_size"]), steps=int(p["steps"]), seed=config.seed
    )
    h, trace = train(spec, cfg, quad)
    lo, hi, count = p["oracle_grid"]
    theta_star, oracle_value = brute_force_minimax(spec, np.linspace(float(lo), float(hi), int(count)), quad)
    rows = []
    for step, wr in enumerate(trace):
        rows.append(
            {
                **_meta(config),
                "step": step,
                "worst_value": wr.worst_value,
                "worst_i": wr.worst_world[0],
                "worst_j": wr.worst_world[1],
                "lse_value": wr.lse_value,
            }
        )
    final = world_risks(h, spec, quad)
    summary = summarize(rows)
    summary["trained"] = {
        "hypothesis": repr(h),
        "worst_value": final.worst_value,
        "oracle_theta": theta_star,
        "oracle_value": oracle_value,
        "gap_to_oracle": final.worst_value - oracle_value,
    }
    cols = ["experiment", "config_hash", "seed", "step", "worst_value", "worst_i", "worst_j", "lse_value"]
    return rows, summary, cols


def _run_certificate(config: ExperimentConfig, jobs: int) -> tuple[list[dict], dict, list[str]]:
    p = config.params
    path = p["annotations"]
    if not path:
        raise ConfigError("certificate experiment needs params.annotations = <file path>")
    try:
        samples = read_annotations(path)
    except OSError as exc:
        raise ConfigError(f"cannot read annotations file {path!r}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed annotations file {path!r}: {exc}") from exc
    kind = samples[0].kind
    matrix = (
        empirical_disagreement_hard(samples) if kind == "hard" else empirical_disagreement_soft(samples)
    )
    regime = p["regime"]
    cert = certificate(matrix, delta=config.delta, regime=regime)
    row = {**_meta(config), **cert.to_dict()}
    cols = [
        "experiment", "config_hash", "seed", "eta_hat", "epsilon", "delta",
        "n", "k", "regime", "penalty_upper", "eps_star_input",
    ]
    summary = {"experiment": config.experiment, "certificate": cert.to_dict()}
    return [row], summary, cols


_RUNNERS = {
    "gating_curve": _run_gating_curve,
    "bounds_sweep": _run_bounds_sweep,
    "diameter_ablation": _run_diameter_ablation,
    "noise_ablation": _run_noise_ablation,
    "sample_complexity": _run_sample_complexity,
    "mechanism_complexity": _run_mechanism_complexity,
    "minimax_demo": _run_minimax_demo,
    "dro_train": _run_dro_train,
    "certificate": _run_certificate,
}


def run(config: ExperimentConfig, out_dir, jobs: int = 1) -> dict:
    """Run one experiment; write ``<experiment>.csv`` and ``summary.json``.

    Returns a manifest with the output paths, row count, and config hash.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = _RUNNERS[config.experiment]
    rows, summary, cols = runner(config, jobs)
    cfg_hash = config_hash(config)
    csv_path = out / f"{config.experiment}.csv"
    _write_csv(csv_path, rows, cols, cfg_hash)
    summary = {
        **summary,
        "config": config.document(),
        "config_hash": cfg_hash,
        "abs_tol": config.quadrature.abs_tol,
    }
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return {
        "csv": str(csv_path),
        "summary": str(summary_path),
        "rows": len(rows),
        "config_hash": cfg_hash,
    }
