"""Result serialization: fixed-schema CSV, JSON run records, plot-ready
whitespace data blocks, and rendered gap-curve figures.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import __version__
from .gapopt import PathResult

CSV_COLUMNS = (
    "lambda",
    "gap_canonical",
    "gap_optimized",
    "n_iter",
    "converged",
    "grad_norm",
    "s_params_json",
)


def _fmt(x: float) -> str:
    """17 significant digits; reruns must be diffable."""
    return format(float(x), ".17g")


def _params_json(params) -> str:
    if params is None:
        return "null"
    return json.dumps([float(p) for p in np.asarray(params).ravel()])


def path_rows(result: PathResult) -> list[dict]:
    rows = []
    for i, lam in enumerate(result.lambdas):
        diag = result.diagnostics[i]
        rows.append(
            {
                "lambda": float(lam),
                "gap_canonical": float(result.gaps_canonical[i]),
                "gap_optimized": float(result.gaps_optimized[i]),
                "n_iter": int(diag.get("n_iter", 0)),
                "converged": bool(diag.get("converged", False)),
                "grad_norm": float(diag.get("grad_norm", np.nan)),
                "s_params": result.s_params[i],
                "error": diag.get("error"),
            }
        )
    return rows


def write_csv(path: Path, rows: list[dict], timestamp: float | None = None) -> None:
    """Fixed-schema CSV; only the leading comment line carries the timestamp."""
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(timestamp or time.time()))
    lines = [f"# generated {stamp}", ",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(
            ",".join(
                [
                    _fmt(row["lambda"]),
                    _fmt(row["gap_canonical"]),
                    _fmt(row["gap_optimized"]),
                    str(row["n_iter"]),
                    str(bool(row["converged"])).lower(),
                    _fmt(row["grad_norm"]),
                    '"' + _params_json(row["s_params"]).replace('"', '""') + '"',
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def _complex_matrix_json(mat) -> dict | None:
    if mat is None:
        return None
    arr = np.asarray(mat)
    return {"real": arr.real.tolist(), "imag": arr.imag.tolist()}


def run_record(config_echo: dict, result: PathResult, ode_result: PathResult | None,
               seed: int | None, wall_clock: float, error: str | None = None) -> dict:
    """Full JSON-serializable record of one instance."""
    rows = path_rows(result) if result is not None else []
    converged_rows = [r for r in rows if r["converged"]]
    summary = {}
    if result is not None:
        gaps_can = [r["gap_canonical"] for r in rows]
        gaps_opt = [r["gap_optimized"] for r in converged_rows] or [r["gap_optimized"] for r in rows]
        summary = {
            "min_gap_canonical": float(np.nanmin(gaps_can)),
            "min_gap_optimized": float(np.nanmin(gaps_opt)),
            "improvement_ratio": result.improvement_ratio,
            "n_converged": len(converged_rows),
            "n_points": len(rows),
        }
    record = {
        "config": config_echo,
        "seed": seed,
        "software_version": __version__,
        "wall_clock_seconds": wall_clock,
        "error": error,
        "rows": [
            {**{k: v for k, v in row.items() if k != "s_params"},
             "s_params": None if row["s_params"] is None
             else [float(p) for p in np.asarray(row["s_params"]).ravel()]}
            for row in rows
        ],
        "s_matrices": [
            _complex_matrix_json(m) for m in (result.s_matrices if result is not None else [])
        ],
        "summary": summary,
    }
    if ode_result is not None:
        record["ode"] = {
            "lambdas": [float(x) for x in ode_result.lambdas],
            "gaps": [float(x) for x in ode_result.gaps_optimized],
            "s_matrices": [_complex_matrix_json(m) for m in ode_result.s_matrices],
        }
    return record


def write_json(path: Path, records: list[dict]) -> None:
    path.write_text(json.dumps({"instances": records}, indent=2, sort_keys=True) + "\n")


def write_path_dat(path: Path, result: PathResult, ode_result: PathResult | None = None) -> None:
    """Two-column whitespace blocks (gnuplot index convention), one per curve."""
    blocks = [
        ("gap_canonical", result.lambdas, result.gaps_canonical),
        ("gap_optimized", result.lambdas, result.gaps_optimized),
    ]
    if ode_result is not None:
        blocks.append(("gap_ode", ode_result.lambdas, ode_result.gaps_optimized))
    chunks = []
    for name, xs, ys in blocks:
        lines = [f"# {name}"]
        lines += [f"{_fmt(x)} {_fmt(y)}" for x, y in zip(xs, ys)]
        chunks.append("\n".join(lines))
    path.write_text("\n\n\n".join(chunks) + "\n")


def render_figure(path: Path, result: PathResult, ode_result: PathResult | None = None,
                  title: str = "") -> None:
    """Gap curves along the interpolation, with dashed minimum-gap markers."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(result.lambdas, result.gaps_canonical, "o-", ms=3.5, label="canonical")
    ax.plot(result.lambdas, result.gaps_optimized, "s-", ms=3.5, label="optimized")
    ax.axhline(result.min_gap_canonical, color="C0", ls="--", lw=0.8)
    ax.axhline(result.min_gap_optimized, color="C1", ls="--", lw=0.8)
    if ode_result is not None:
        ax.plot(ode_result.lambdas, ode_result.gaps_optimized, "x:", ms=4, label="ode path")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("spectral gap")
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
