'''
Command line runner: `perm <command> ...`

Settings come from the packaged default.cfg, then the file named by PERM_CONFIG,
then a JSON run config given with --config, then explicit flags. Each run writes one
JSON report on stdout (and to --output when given) embedding the resolved config;
`roots` and CSV sweeps send their rows to --output instead.

Exit codes: 0 success, 1 failed acceptance checks, 2 validation error, 3 algorithm error.
'''

import argparse
import csv
import itertools
import json
import logging
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from permlab import cac_engine, curve_planner, hardness_demo, stats_lab, verify
from permlab.common.errors import ConfigError, PermLabError, RootOnContour
from permlab.common.logs import configure_logging
from permlab.common.settings import Settings, load_settings
from permlab.interp_poly import coeffs_via_ryser, find_roots
from permlab.matrix_core import EnsembleKind, EnsembleSpec, affine_combine, sample
from permlab.permanent_exact import permanent_naive, permanent_ryser
from permlab.runapi import ErrorDetail, ErrorReport, RunConfig, RunReport, jsonable, pair

logger = logging.getLogger('permlab.runner')

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_VALIDATION = 2
EXIT_ALGORITHM = 3

SWEEP_KEYS = ("b", "beta", "m", "schedule_floor")


def _real(text: str) -> float:
    '''Float parser that also accepts "e"'''
    return math.e if text.strip().lower() == "e" else float(text)


def _real_list(text: str) -> list[float]:
    return [_real(x) for x in text.split(",") if x.strip()]


def _grid(text: str) -> dict[str, list[float]]:
    '''"m=20,40,80;beta=e,3" -> {"m": [20, 40, 80], "beta": [e, 3]}'''
    grid = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        key, _, values = part.partition("=")
        grid[key.strip()] = _real_list(values)
    return grid


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--settings", help="INI settings file (overrides PERM_CONFIG)")
    common.add_argument("--output", help="report path")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--threads", type=int)
    common.add_argument("--log-level", dest="log_level")
    common.add_argument("--log-file", dest="log_file")
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--ensemble", choices=[k.value for k in EnsembleKind])
    common.add_argument("--mu", type=_real)
    return common


def _cac_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--b", type=_real)
    parser.add_argument("--beta", type=_real)
    parser.add_argument("--delta", type=_real)
    parser.add_argument("--m", type=int)
    parser.add_argument("--schedule-floor", dest="schedule_floor", type=int)
    parser.add_argument("--continuation", choices=list(cac_engine.CONTINUATIONS))
    parser.add_argument("--allow-small-beta", dest="allow_small_beta", action="store_true")
    parser.add_argument("--path", help="auto, straight or json:<file>")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    # subcommand flags stay absent unless given so the settings layers show through
    inherit = dict(parents=[common], argument_default=argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="perm", description="Permanent estimation by analytic continuation")
    commands = parser.add_subparsers(dest="command_name", required=True)

    exact = commands.add_parser("exact", **inherit, help="exact permanent of a sampled matrix")
    exact.add_argument("--method", choices=["ryser", "naive"])
    commands.add_parser("coeffs", **inherit, help="coefficients of Per(J + zA)")
    roots_parser = commands.add_parser("roots", **inherit, help="roots of Per(J + zA) as CSV")
    roots_parser.add_argument("--repeat", type=int)

    cac = commands.add_parser("cac", **inherit, help="continuation estimate of Per(J + bA)")
    _cac_flags(cac)

    curve = commands.add_parser("curve", **inherit, help="choose a root-free family curve")
    curve.add_argument("--epsilon", type=_real)
    curve.add_argument("--strategy", choices=list(curve_planner.STRATEGIES))
    curve.add_argument("--endpoint-mode", dest="endpoint_mode", choices=list(curve_planner.ENDPOINT_MODES))

    stats = commands.add_parser("stats", help="Monte Carlo checks")
    kinds = stats.add_subparsers(dest="stats_name", required=True)
    for name in ("moment", "rootcount", "jensen", "meanshift", "tail", "safedisk"):
        sub = kinds.add_parser(name, **inherit)
        sub.add_argument("--trials", type=int)
        sub.add_argument("--per-trial", dest="per_trial")
        sub.add_argument("--r", type=_real)
        sub.add_argument("--radii", type=_real_list)
        sub.add_argument("--quad-points", dest="quad_points", type=int)
        sub.add_argument("--epsilon", type=_real)
        sub.add_argument("--beta", type=_real)
        sub.add_argument("--m", type=int)
        sub.add_argument("--l", type=int)

    bw = commands.add_parser("bw-demo", **inherit, help="Berlekamp-Welch reduction demo")
    bw.add_argument("--m", type=int)
    bw.add_argument("--rate")
    bw.add_argument("--corruptions", type=int)

    sweep_parser = commands.add_parser("sweep", **inherit, help="grid of continuation runs")
    _cac_flags(sweep_parser)
    sweep_parser.add_argument("--grid", type=_grid)
    sweep_parser.add_argument("--repeat", type=int)

    check = commands.add_parser("verify", **inherit, help="acceptance checks")
    check.add_argument("--level", choices=["fast", "full"])
    _cac_flags(check)
    return parser


def _command(args: argparse.Namespace) -> str:
    if args.command_name == "stats":
        return f"stats.{args.stats_name}"
    return args.command_name


def resolve_config(args: argparse.Namespace, settings: Settings) -> RunConfig:
    '''Layer settings, the optional JSON config and explicit flags into a RunConfig'''
    command = _command(args)
    values = {
        "command": command,
        "beta": settings.beta,
        "delta": settings.delta,
        "m": settings.m,
        "schedule_floor": settings.schedule_floor,
        "continuation": settings.continuation,
        "allow_small_beta": settings.allow_small_beta,
        "epsilon": settings.epsilon,
        "strategy": settings.strategy,
        "endpoint_mode": settings.endpoint_mode,
        "trials": settings.trials,
        "quad_points": settings.quad_points,
        "threads": settings.threads,
        "points": settings.points,
        "rate": settings.rate,
    }
    flags = {k: v for k, v in vars(args).items() if k not in ("command_name", "stats_name")}

    config_path = flags.pop("config", None)
    if config_path:
        try:
            with open(config_path, 'r') as f:
                loaded = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read run config {config_path}: {e}", path=config_path) from e
        loaded.pop("schema_version", None)
        loaded.pop("command", None)
        values.update(loaded)
    for key in ("settings", "log_level", "log_file"):
        flags.pop(key, None)

    # --m and --l name different parameters per command
    if command == "stats.tail":
        if "m" in flags:
            flags["tail_m"] = flags.pop("m")
        if "l" in flags:
            flags["tail_l"] = flags.pop("l")
    elif command == "bw-demo" and "m" in flags:
        flags["points"] = flags.pop("m")
    flags.pop("l", None)

    ensemble = dict(values.pop("ensemble", None) or {})
    for flag, field in (("n", "n"), ("seed", "seed"), ("ensemble", "kind")):
        if flag in flags:
            ensemble[field] = flags.pop(flag)
    if "mu" in flags:
        ensemble["mu"] = flags["mu"]
    values.update(flags)
    if "n" in ensemble:
        values["ensemble"] = EnsembleSpec(**ensemble)
    elif command in ("exact", "coeffs", "roots", "cac", "curve", "stats.moment", "stats.rootcount",
                     "stats.jensen", "stats.meanshift", "stats.safedisk", "bw-demo", "sweep"):
        raise ConfigError(f"command {command} needs --n", command=command)
    elif ensemble.get("seed") is not None:
        values["ensemble"] = EnsembleSpec(n=1, seed=ensemble["seed"])
    return RunConfig(**values)


def cac_config(config: RunConfig) -> cac_engine.CacConfig:
    return cac_engine.CacConfig(beta=config.beta, delta=config.delta, m=config.m,
                                schedule_floor=config.schedule_floor, continuation=config.continuation,
                                allow_small_beta=config.allow_small_beta)


def _seed(config: RunConfig) -> int:
    return config.ensemble.seed if config.ensemble else 0


def run_exact(config: RunConfig, settings: Settings) -> dict:
    a = sample(config.ensemble, 0)
    if config.method == "naive":
        value = permanent_naive(a, settings.naive_cap)
    else:
        value = permanent_ryser(a, settings.ryser_cap)
    return {"n": a.n, "method": config.method, "permanent": pair(value),
            "log10_abs": math.log10(abs(value)) if value else None}


def run_coeffs(config: RunConfig, settings: Settings) -> dict:
    p = coeffs_via_ryser(sample(config.ensemble, 0), settings.coeff_cap)
    return {"n": p.n, "scale": p.scale, "normalised": jsonable(p.coeffs), "scale_hint": p.scale_hint}


def root_rows(config: RunConfig, settings: Settings) -> list[dict]:
    '''One CSV row per root: trial, j, re, im, abs, residual'''
    rows = []
    for trial in range(config.repeat):
        rs = find_roots(coeffs_via_ryser(sample(config.ensemble, trial), settings.coeff_cap))
        order = np.argsort(rs.moduli, kind="stable")
        for j, index in enumerate(order):
            z = complex(rs.roots[index])
            rows.append({"trial": trial, "j": j, "re": z.real, "im": z.imag, "abs": abs(z),
                         "residual": float(rs.residuals[index])})
    return rows


def _csv_path(config: RunConfig, settings: Settings, name: str) -> str:
    return config.output if config.output else str(Path(settings.output_dir) / name)


def _relative_error(estimate: complex, exact: complex) -> float | None:
    if exact == 0:
        logger.warning("Exact value is zero; relative error undefined")
        return None
    return abs(estimate - exact) / abs(exact)


def _plan(config: RunConfig, p, roots, b: float) -> curve_planner.InterpolationPlan:
    if config.path.startswith("json:"):
        curve = curve_planner.load_curve(config.path[len("json:"):])
        if abs(curve.endpoint - b) > 1e-12 * max(1.0, abs(b)):
            raise ConfigError(f"custom curve ends at {curve.endpoint}, expected {b}")
        return curve_planner.plan_along(curve, roots, config.beta)
    return curve_planner.plan_to_endpoint(p, roots, b, config.beta, strategy=config.path)


def continuation_row(config: RunConfig, settings: Settings, trial: int) -> dict:
    '''
    One continuation estimate of Per(J + bA') for trial ``trial``, compared with Ryser.
    Above the coefficient cap the path is planned without roots.
    '''
    cfg = cac_config(config)
    a_prime = sample(config.ensemble, trial)
    if a_prime.n <= settings.coeff_cap:
        p = coeffs_via_ryser(a_prime, settings.coeff_cap)
        roots = find_roots(p)
    else:
        p, roots = None, None
    plan = _plan(config, p, roots, config.b)
    estimate = cac_engine.approx_permanent_shifted(a_prime, config.b, plan, cfg, polynomial=p, roots=roots,
                                                   coeff_cap=settings.coeff_cap)
    if a_prime.n <= settings.ryser_cap:
        exact = permanent_ryser(affine_combine(1.0, a_prime, config.b), settings.ryser_cap)
        rel_err = _relative_error(estimate.per_shifted, exact)
    else:
        exact, rel_err = None, None
    result = estimate.cac
    return {
        "f_hat": pair(result.f_hat),
        "g_hat": pair(result.g_hat),
        "per_rescaled": pair(estimate.per_rescaled),
        "exact": pair(exact) if exact is not None else None,
        "rel_err": rel_err,
        "within_delta": rel_err is not None and rel_err <= config.delta,
        "err_budget": result.err_budget,
        "s_trace": result.s_trace,
        "continuation": result.continuation,
        "steps": plan.steps.t,
        "clearance": plan.clearance,
        "curve_id": estimate.curve_id,
        "vertices": jsonable(plan.curve.vertices),
    }


def run_cac(config: RunConfig, settings: Settings) -> dict:
    if config.b is None:
        if config.ensemble.mu == 0:
            raise ConfigError("cac needs --b, or a nonzero --mu for the biased ensemble")
        a = sample(config.ensemble, 0)
        estimate = cac_engine.approx_permanent_biased(a, config.ensemble.mu, cac_config(config), config.path,
                                                      coeff_cap=settings.coeff_cap)
        exact = permanent_ryser(a, settings.ryser_cap)
        return {"per_estimate": pair(estimate.per_rescaled), "exact": pair(exact),
                "rel_err": _relative_error(estimate.per_rescaled, exact),
                "s_trace": estimate.cac.s_trace, "err_budget": estimate.cac.err_budget,
                "curve_id": estimate.curve_id}
    if config.b == 0:
        n = config.ensemble.n
        return {"g_hat": pair(math.factorial(n)), "per_rescaled": None, "curve_id": None}
    return continuation_row(config, settings, 0)


def run_curve(config: RunConfig, settings: Settings) -> dict:
    p = coeffs_via_ryser(sample(config.ensemble, 0), settings.coeff_cap)
    roots = find_roots(p)
    curve = curve_planner.select_curve(p, config.epsilon, config.strategy, roots=roots,
                                       endpoint_mode=config.endpoint_mode, seed=_seed(config))
    clearance = curve_planner.tube_clearance(curve, roots)
    record = curve.to_record()
    record.update({"clearance": clearance.min_distance, "root_free": clearance.root_free})
    return record


def run_jensen(config: RunConfig) -> dict:
    spec = config.ensemble
    records, index = [], 0
    while len(records) < config.trials:
        p = coeffs_via_ryser(sample(spec, index))
        index += 1
        try:
            records.append(stats_lab.jensen_check(p, config.r, config.quad_points))
        except RootOnContour:
            logger.info(f"Resampling trial {index - 1}: root on contour")
    gaps = [r.gap for r in records]
    return {"instances": len(records), "drawn": index, "max_gap": max(gaps), "records": jsonable(records)}


def run_bw(config: RunConfig) -> dict:
    a = hardness_demo.RationalComplexMatrix.random(config.ensemble.n, config.ensemble.seed)
    result = hardness_demo.reduction_demo(a, config.points, Fraction(config.rate), config.ensemble.seed,
                                          corruptions=config.corruptions)
    return result.to_record()


def sweep(config: RunConfig, settings: Settings) -> list[dict]:
    '''Continuation runs over the cartesian product of the grid, ``repeat`` trials per point'''
    unknown = set(config.grid) - set(SWEEP_KEYS)
    if unknown:
        raise ConfigError(f"cannot sweep over {sorted(unknown)}", allowed=list(SWEEP_KEYS))
    keys = list(config.grid)
    rows = []
    for combo in itertools.product(*(config.grid[k] for k in keys)):
        update = {k: (int(v) if k in ("m", "schedule_floor") else v) for k, v in zip(keys, combo)}
        point = RunConfig.model_validate({**config.model_dump(), **update})
        if point.b is None:
            raise ConfigError("sweep needs --b or a b grid")
        for trial in range(config.repeat):
            row = {**update, "trial": trial}
            try:
                outcome = continuation_row(point, settings, trial)
                row.update({"status": "ok", "rel_err": outcome["rel_err"], "err_budget": outcome["err_budget"],
                            "steps": outcome["steps"], "s_t": outcome["s_trace"][-1]})
            except PermLabError as e:
                row.update({"status": e.code, "rel_err": None, "err_budget": None, "steps": None, "s_t": None})
            rows.append(row)
    logger.info(f"Sweep finished: {len(rows)} rows")
    return rows


def write_rows(path: str, rows: list[dict]) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    header = list(rows[0]) if rows else []
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)
    return path


def dispatch(config: RunConfig, settings: Settings) -> tuple[dict, int]:
    command = config.command
    threads = config.threads
    if command == "exact":
        return run_exact(config, settings), EXIT_OK
    if command == "coeffs":
        return run_coeffs(config, settings), EXIT_OK
    if command == "roots":
        path = write_rows(_csv_path(config, settings, "roots.csv"), root_rows(config, settings))
        return {"csv": path}, EXIT_OK
    if command == "cac":
        return run_cac(config, settings), EXIT_OK
    if command == "curve":
        return run_curve(config, settings), EXIT_OK
    if command == "stats.moment":
        return jsonable(stats_lab.second_moment(config.ensemble, config.r, config.trials, threads,
                                                per_trial=config.per_trial)), EXIT_OK
    if command == "stats.rootcount":
        return jsonable(stats_lab.root_count_stats(config.ensemble, config.radii, config.trials, threads,
                                                   per_trial=config.per_trial)), EXIT_OK
    if command == "stats.jensen":
        return run_jensen(config), EXIT_OK
    if command == "stats.meanshift":
        return jsonable(stats_lab.mean_shift_sensitivity(config.ensemble.n, config.mu, config.trials,
                                                         config.ensemble.seed, threads,
                                                         per_trial=config.per_trial)), EXIT_OK
    if command == "stats.tail":
        return jsonable(stats_lab.tail_bound_check(config.tail_m, config.tail_l, config.beta)), EXIT_OK
    if command == "stats.safedisk":
        return jsonable(stats_lab.safe_disk_stats(config.ensemble, config.epsilon, config.trials, threads)), EXIT_OK
    if command == "bw-demo":
        return run_bw(config), EXIT_OK
    if command == "sweep":
        rows = sweep(config, settings)
        path = config.output if config.output and config.format == "csv" else \
            str(Path(settings.output_dir) / "sweep.csv")
        write_rows(path, rows)
        return {"rows": len(rows), "csv": path}, EXIT_OK
    if command == "verify":
        report = verify.verify_suite(config.level, cfg=cac_config(config), seed=_seed(config), threads=threads)
        code = EXIT_OK if report.passed else EXIT_CHECKS_FAILED
        return {"passed": report.passed, "failed": report.failed, "results": jsonable(report.results)}, code
    raise ConfigError(f"unknown command {command}")


def run(config: RunConfig, settings: Settings | None = None) -> int:
    '''Execute one run, print its report and write it to config.output when set'''
    settings = settings or load_settings()
    logger.info(f"Starting {config.command}")
    start = time.perf_counter()
    try:
        result, code = dispatch(config, settings)
    except ValidationError as e:
        return emit_error("cli_runner.ValidationError", "invalid parameters", {"errors": jsonable(e.errors())},
                          EXIT_VALIDATION)
    except ValueError as e:
        return emit_error("cli_runner.ValueError", str(e), {}, EXIT_VALIDATION)
    except ConfigError as e:
        return emit_error(e.code, e.message, jsonable(e.details), EXIT_VALIDATION)
    except PermLabError as e:
        logger.error(f"{config.command} failed: {e.code}: {e.message}", exc_info=True)
        return emit_error(e.code, e.message, jsonable(e.details), EXIT_ALGORITHM)

    report = RunReport(command=config.command, config=config, result=result,
                       elapsed_seconds=time.perf_counter() - start)
    text = report.model_dump_json(indent=2)
    wrote_csv = config.command == "roots" or (config.command == "sweep" and config.format == "csv")
    if config.output and not wrote_csv:
        Path(config.output).parent.mkdir(parents=True, exist_ok=True)
        with open(config.output, 'w') as f:
            f.write(text)
        logger.info(f"Wrote report {config.output}")
    print(text)
    return code


def emit_error(code: str, message: str, details: dict, exit_code: int) -> int:
    report = ErrorReport(error=ErrorDetail(code=code, message=message, details=details))
    print(report.model_dump_json(indent=2))
    return exit_code


def load_report(path: str) -> RunReport:
    '''Parse a JSON report written by run()'''
    with open(path, 'r') as f:
        return RunReport.model_validate_json(f.read())


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(getattr(args, "settings", None))
        configure_logging(getattr(args, "log_level", None) or settings.log_level,
                          getattr(args, "log_file", None) or settings.log_file)
        config = resolve_config(args, settings)
    except ValidationError as e:
        return emit_error("cli_runner.ValidationError", "invalid run config", {"errors": jsonable(e.errors())},
                          EXIT_VALIDATION)
    except ConfigError as e:
        return emit_error(e.code, e.message, jsonable(e.details), EXIT_VALIDATION)
    return run(config, settings)


if __name__ == "__main__":
    sys.exit(main())
