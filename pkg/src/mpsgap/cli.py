"""Config-driven experiment runner.

Subcommands: ``run`` executes sweeps (and the path ODE when enabled) per
instance and writes CSV/JSON results, plot-ready data blocks, and rendered
gap-curve figures; ``validate`` reports feasibility without running.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import gapopt, models, report, symmetry
from .config import ConfigError, ExperimentConfig, config_as_dict, load_config
from .errors import SizeGuardError
from .tensors import SIZE_GUARD, RandomMpsFamily

log = logging.getLogger("mpsgap")


def validate(cfg: ExperimentConfig) -> dict:
    """Feasibility report: dimensions, sector sizes, memory estimate."""
    cfg.validate()
    diag: dict = {"model": cfg.model, "n_sites": cfg.n_sites, "ok": True, "messages": []}
    d = models.PHYS_DIM[cfg.model]
    if cfg.model == "random":
        # config counts the physical spin-1/2 sites; pairs block into d=4 sites
        if cfg.n_sites % 2 or cfg.n_sites < 6:
            raise ConfigError("experiment.n_sites: the random model needs an even spin count >= 6")
        diag["n_spins"] = cfg.n_sites
        diag["blocked_sites"] = cfg.n_sites // 2
        diag["blocked_phys_dim"] = 4
        dim = 2**cfg.n_sites
    else:
        dim = d**cfg.n_sites
    diag["phys_dim"] = d
    diag["hilbert_dim"] = dim
    if dim >= SIZE_GUARD:
        diag["ok"] = False
        diag["messages"].append(
            f"Hilbert-space dimension {dim} reaches the size guard {SIZE_GUARD}; refusing"
        )
        return diag
    if cfg.sector_enabled and cfg.model != "random":
        sector = models.ground_sector(cfg.model, cfg.n_sites)
        diag["sector_dim"] = sector.dim
        work_dim = sector.dim
    else:
        work_dim = dim
    diag["working_dim"] = work_dim
    diag["eigensolver"] = "dense" if work_dim < 4096 else "iterative"
    # crude memory estimate: dense working matrix plus sparse full assembly
    est = 16 * work_dim**2 + 32 * cfg.n_sites * dim * (d ** models.BLOCK_LEN[cfg.model])
    diag["estimated_bytes"] = int(est)
    if cfg.template_enabled and cfg.model != "random":
        diag["template"] = cfg.resolved_template_name()
        diag["n_parameters"] = symmetry.symmetric_s_template(cfg.resolved_template_name()).n_params
    elif cfg.model == "random":
        diag["n_parameters"] = 144
    return diag


def _run_instance(cfg: ExperimentConfig, seed: int) -> dict:
    """One full sweep (plus optional ODE follow); returns the JSON record."""
    t0 = time.time()
    grid = np.linspace(cfg.lambda_start, cfg.lambda_stop, cfg.lambda_steps)
    family = RandomMpsFamily.from_seed(seed, t=cfg.t) if cfg.model == "random" else None
    n_sites = cfg.n_sites // 2 if cfg.model == "random" else cfg.n_sites
    sector = None
    if cfg.sector_enabled and cfg.model != "random":
        sector = models.ground_sector(cfg.model, cfg.n_sites)
    template = None
    if cfg.template_enabled and cfg.model != "random":
        template = symmetry.symmetric_s_template(cfg.resolved_template_name())
    opts = gapopt.OptimizerOptions(grad_tol=cfg.grad_tol, max_iter=cfg.max_iter)
    result = gapopt.sweep(
        cfg.model,
        n_sites,
        grid,
        family=family,
        sector=sector,
        template=template,
        opts=opts,
        warm_start=cfg.optimizer_init == "warm",
    )
    ode_result = None
    if cfg.ode_enabled:
        first = next((p for p in result.s_params if p is not None), None)
        if first is not None:
            ode_result = gapopt.ode_follow(
                cfg.model,
                n_sites,
                grid,
                first,
                family=family,
                sector=sector,
                template=template,
                opts=gapopt.OdeOptions(
                    h_params=cfg.ode_h_p,
                    h_lambda=cfg.ode_h_lambda,
                    reproject_every=cfg.ode_reproject_every,
                    on_stiff="reproject",
                ),
                optimizer_opts=opts,
            )
    record = report.run_record(
        config_echo=config_as_dict(cfg),
        result=result,
        ode_result=ode_result,
        seed=seed if cfg.model == "random" else None,
        wall_clock=time.time() - t0,
    )
    record["_result"] = result
    record["_ode_result"] = ode_result
    return record


def run(cfg: ExperimentConfig, out_dir: str | None = None, workers: int = 1) -> int:
    """Execute all instances; returns a process exit code (0 unless all fail)."""
    cfg.validate()
    feas = validate(cfg)
    if not feas["ok"]:
        raise SizeGuardError("; ".join(feas["messages"]))
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [cfg.seed + k for k in range(cfg.n_instances)] if cfg.model == "random" else [cfg.seed]

    records: dict[int, dict] = {}
    failures: dict[int, str] = {}
    if workers > 1 and len(seeds) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_instance, cfg, seed): seed for seed in seeds}
            for fut in concurrent.futures.as_completed(futures):
                seed = futures[fut]
                try:
                    records[seed] = fut.result()
                except Exception as err:
                    failures[seed] = f"{type(err).__name__}: {err}"
                    log.error("instance seed=%d failed: %s", seed, failures[seed])
    else:
        for seed in seeds:
            try:
                records[seed] = _run_instance(cfg, seed)
            except Exception as err:
                failures[seed] = f"{type(err).__name__}: {err}"
                log.error("instance seed=%d failed: %s", seed, failures[seed])

    json_records = []
    stamp = time.time()
    for seed in seeds:
        if seed in failures:
            json_records.append(
                {"seed": seed, "error": failures[seed], "config": config_as_dict(cfg)}
            )
            continue
        record = records[seed]
        result = record.pop("_result")
        ode_result = record.pop("_ode_result")
        prefix = out if len(seeds) == 1 else out / f"instance_{seed:04d}"
        prefix.mkdir(parents=True, exist_ok=True)
        formats = cfg.output_formats
        if "csv" in formats:
            report.write_csv(prefix / "results.csv", report.path_rows(result), timestamp=stamp)
        if "dat" in formats:
            report.write_path_dat(prefix / "path.dat", result, ode_result)
        if "png" in formats:
            title = f"{cfg.model} N={cfg.n_sites}" + (f" seed={seed}" if cfg.model == "random" else "")
            report.render_figure(prefix / "gaps.png", result, ode_result, title=title)
        json_records.append(record)
        log.info(
            "instance seed=%d: min gap %.6g -> %.6g",
            seed,
            result.min_gap_canonical,
            result.min_gap_optimized,
        )
    if "json" in cfg.output_formats:
        report.write_json(out / "results.json", json_records)
    return 1 if len(failures) == len(seeds) else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mpsgap", description=__doc__)
    parser.add_argument("--log-level", default="info", choices=("debug", "info", "warning", "error"))
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute the experiment described by a config file")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--out-dir", default=None, help="override the configured output directory")
    p_run.add_argument("--workers", type=int, default=1, help="parallel instances (random model)")
    p_val = sub.add_parser("validate", help="report feasibility without running")
    p_val.add_argument("config", type=Path)
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    if args.command == "validate":
        diag = validate(cfg)
        print(json.dumps(diag, indent=2, sort_keys=True))
        return 0 if diag["ok"] else 1
    try:
        return run(cfg, out_dir=args.out_dir, workers=args.workers)
    except SizeGuardError as err:
        print(f"size guard: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
