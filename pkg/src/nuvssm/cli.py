"""Command line front end.

Subcommands: fit-steps, fit-walk, fit-lines, remove-outliers, batch-nuv,
simulate, oracle-check.  Signals go in and out as CSV; results follow a
fixed schema with a version comment line so repeated runs are byte
identical.  Exit codes: 0 success, 1 input error, 2 non-convergence
(results are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import models, svg
from .nuv import NuvConfig, run_nuv, write_trace
from .ssm import dense_joint_solve, bifm_smooth, mbf_smooth

RESULTS_VERSION = "# nuv-ssm results v1"


class InputError(Exception):
    pass


def _f(x: float) -> str:
    return format(x, ".12g")


# ---------------------------------------------------------------------------
# CSV I/O


def read_signal(path: str, column: int | None) -> np.ndarray:
    """Read one scalar sample per row; '#' comments and an optional header
    row are skipped; default column is the last one."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"input file not found: {path}")
    values = []
    seen_rows = 0
    with open(p, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            seen_rows += 1
            cells = [c.strip() for c in row]
            col = column if column is not None else len(cells) - 1
            if not 0 <= col < len(cells):
                raise InputError(f"{path}:{lineno}: column {col} out of range")
            try:
                values.append(float(cells[col]))
            except ValueError:
                if seen_rows == 1:
                    continue  # header row
                raise InputError(f"{path}:{lineno}: malformed value {cells[col]!r}") from None
    if not values:
        raise InputError(f"{path}: no data rows")
    return np.array(values)


def read_sim_events(path: str) -> list[tuple[int, float]]:
    """Recover the injected events recorded as comments by `simulate`."""
    events = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and row[0].startswith("# event"):
                events.append((int(row[1]), float(row[2])))
    return events


def write_results(path, y: np.ndarray, fitres: models.FitResult):
    by_index: dict[int, list[models.Event]] = {}
    for ev in fitres.events:
        by_index.setdefault(ev.index, []).append(ev)
    var = fitres.state.variances
    out = sys.stdout if path is None else open(path, "w", newline="")
    try:
        out.write(RESULTS_VERSION + "\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["index", "y", "smoothed", "event_kind", "event_magnitude", "sigma2_k"])
        for k in range(len(y)):
            evs = by_index.get(k, [])
            kind = ";".join(e.kind for e in evs)
            mag = ";".join(_f(e.magnitude) for e in evs)
            w.writerow([k, _f(y[k]), _f(fitres.smoothed[k]), kind, mag, _f(float(np.max(var[k])))])
    finally:
        if path is not None:
            out.close()


# ---------------------------------------------------------------------------
# option plumbing


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--input", help="input CSV (one sample per row)")
    p.add_argument("--column", type=int, help="0-based column index (default: last)")
    p.add_argument("--output", help="results CSV path (default: stdout)")
    p.add_argument("--emit-plot", dest="emit_plot", help="write an SVG chart here")
    p.add_argument("--trace", help="write the per-iteration log CSV here")
    p.add_argument("--config", help="JSON file with defaults for any long flag")
    p.add_argument("--update-rule", dest="update_rule", choices=["em", "mackay", "em_then_ml"])
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--rel-tol", dest="rel_tol", type=float)
    p.add_argument("--variance-floor", dest="variance_floor", type=float)
    p.add_argument("--init-variance", dest="init_variance", type=float)
    p.add_argument("--smoother", choices=["mbf", "bifm"])


def _merge_config(args: argparse.Namespace) -> dict:
    """Flags override the optional JSON config file; returns a plain dict."""
    merged = {}
    if getattr(args, "config", None):
        p = Path(args.config)
        if not p.is_file():
            raise InputError(f"config file not found: {args.config}")
        try:
            loaded = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON in {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise InputError(f"{args.config}: config must be a JSON object")
        merged.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for k, v in vars(args).items():
        if v is not None:
            merged[k] = v
    return merged


def _nuv_config(opts: dict) -> NuvConfig:
    kw = {}
    for name in ("update_rule", "max_iters", "rel_tol", "variance_floor", "init_variance", "smoother"):
        if opts.get(name) is not None:
            kw[name] = opts[name]
    kw["keep_trace"] = opts.get("trace") is not None
    return NuvConfig(**kw)


def _require(opts: dict, name: str):
    if opts.get(name) is None:
        raise InputError(f"missing required option --{name.replace('_', '-')}")
    return opts[name]


# ---------------------------------------------------------------------------
# model construction per subcommand


def _build_for(cmd: str, opts: dict, K: int):
    sigma2 = float(_require(opts, "sigma2"))
    if cmd == "fit-steps":
        return models.build_step_model(K, sigma2), "step"
    if cmd == "fit-walk":
        walk_var = float(_require(opts, "walk_var"))
        return models.build_walk_model(K, sigma2, walk_var), "walk"
    if cmd == "fit-lines":
        degree = int(opts.get("degree") or 1)
        continuity = bool(opts.get("continuity", True))
        if degree == 1:
            return models.build_line_model(K, sigma2, continuity), "line"
        return models.build_poly_model(K, sigma2, degree, continuity), "poly"
    if cmd == "remove-outliers":
        base_kind = opts.get("base") or "oscillator"
        if base_kind == "oscillator":
            base = models.build_oscillator_model(
                K, sigma2,
                rho=float(opts.get("rho") or 0.998),
                omega=float(opts.get("omega") or 2.0 * np.pi / 40.0),
                process_var=float(opts.get("process_var") or 1e-4),
            )
        elif base_kind == "step":
            base = models.build_step_model(K, sigma2)
        elif base_kind == "walk":
            base = models.build_walk_model(K, sigma2, float(_require(opts, "walk_var")))
        else:
            raise InputError(f"unknown base model {base_kind!r}")
        return models.build_outlier_model(base, sigma2), "outlier"
    raise InputError(f"unknown fit subcommand {cmd!r}")


def _run_fit(cmd: str, opts: dict) -> int:
    y = read_signal(_require(opts, "input"), opts.get("column"))
    model, kind = _build_for(cmd, opts, len(y))
    config = _nuv_config(opts)
    fitres = models.fit(model, y, kind, config)
    write_results(opts.get("output"), y, fitres)
    if opts.get("trace"):
        write_trace(opts["trace"], fitres.state.trace)
    if opts.get("emit_plot"):
        svg.write_chart(opts["emit_plot"], y, fitres.smoothed, fitres.events, title=cmd)
    return 0 if fitres.state.converged else 2


# ---------------------------------------------------------------------------
# simulate


def _cmd_simulate(opts: dict) -> int:
    kind = _require(opts, "kind")
    K = int(opts.get("K") or 200)
    seed = int(opts.get("seed") or 0)
    rng = np.random.default_rng(seed)
    jumps_n = int(opts.get("jumps") or 1)
    noise_std = opts.get("noise_std")

    def positions(count, margin=10):
        pos = rng.choice(np.arange(margin, K - margin), size=count, replace=False)
        return sorted(int(p) for p in pos)

    if kind == "steps":
        ns = float(noise_std if noise_std is not None else 0.1)
        size = float(opts.get("jump_size") or 10.0)
        ev = [(p, size * (1 if rng.random() < 0.5 else -1)) for p in positions(jumps_n)]
        sim = models.simulate_steps(K, ev, ns, rng)
    elif kind == "walk":
        ns = float(noise_std if noise_std is not None else 0.1)
        walk_std = float(opts.get("walk_std") or 0.1)
        size = float(opts.get("jump_size") or 3.0)
        ev = [(p, size * (1 if rng.random() < 0.5 else -1)) for p in positions(jumps_n)]
        sim = models.simulate_walk(K, walk_std, ev, ns, rng)
    elif kind == "lines":
        ns = float(noise_std if noise_std is not None else 0.1)
        size = float(opts.get("jump_size") or 0.5)
        ev = [(p, size * (1 if rng.random() < 0.5 else -1)) for p in positions(jumps_n)]
        sim = models.simulate_lines(K, ev, ns, rng)
    elif kind == "outliers":
        ns = float(noise_std if noise_std is not None else 0.05)
        size = float(opts.get("jump_size") or 20.0 * ns)
        ev = [(p, size * (1 if rng.random() < 0.5 else -1)) for p in positions(jumps_n)]
        sim = models.simulate_outliers(K, ev, ns, rng)
    else:
        raise InputError(f"unknown simulation kind {kind!r}")

    out = sys.stdout if opts.get("output") is None else open(opts["output"], "w", newline="")
    try:
        out.write(f"# nuv-ssm simulate kind={kind} seed={seed} noise_std={_f(ns)}\n")
        for idx, mag in zip(sim.event_indices, sim.event_magnitudes):
            out.write(f"# event,{idx},{_f(mag)}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["index", "value"])
        for k, v in enumerate(sim.y):
            w.writerow([k, _f(v)])
    finally:
        if opts.get("output") is not None:
            out.close()
    return 0


# ---------------------------------------------------------------------------
# batch sweep and oracle check


def _cmd_batch(opts: dict) -> int:
    inputs = opts.get("inputs") or ([opts["input"]] if opts.get("input") else [])
    if not inputs:
        raise InputError("batch-nuv needs --input (one or more paths)")
    grid_raw = opts.get("sigma2_grid")
    if grid_raw:
        grid = [float(s) for s in str(grid_raw).split(",") if s.strip()]
    else:
        grid = [float(_require(opts, "sigma2"))]
    outdir = Path(opts.get("output_dir") or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    cmd = opts.get("fit") or "fit-steps"
    workers = int(opts.get("workers") or 4)

    jobs = []
    for path in inputs:
        y = read_signal(path, opts.get("column"))
        for s2 in grid:
            jobs.append((path, s2, y))

    def run_one(job):
        path, s2, y = job
        local = dict(opts)
        local["sigma2"] = s2
        model, kind = _build_for(cmd, local, len(y))
        fitres = models.fit(model, y, kind, _nuv_config(local))
        out = outdir / f"{Path(path).stem}__sigma2_{_f(s2)}.csv"
        write_results(out, y, fitres)
        return path, s2, out, fitres

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_one, jobs))
    worst = 0
    for path, s2, out, fitres in results:
        n_ev = len(fitres.events)
        status = "ok" if fitres.state.converged else "not-converged"
        print(f"{path} sigma2={_f(s2)} events={n_ev} {status} -> {out}")
        if not fitres.state.converged:
            worst = 2
    return worst


def _cmd_oracle_check(opts: dict) -> int:
    y = read_signal(_require(opts, "input"), opts.get("column"))
    cmd = opts.get("fit") or "fit-steps"
    model, kind = _build_for(cmd, opts, len(y))
    state, _ = run_nuv(model, y, _nuv_config(opts))
    overrides = None
    # rebuild the per-step overrides at the learned variances
    from .nuv import _SsmLoop  # noqa: PLC0415

    loop = _SsmLoop(model, y, _nuv_config(opts), state.variance_floor)
    loop.var = state.variances
    overrides = loop.overrides()
    ref = dense_joint_solve(model, y, overrides)
    dev = 0.0
    for smoother in (mbf_smooth, bifm_smooth):
        res = smoother(model, y, overrides)
        dev = max(dev, float(np.max(np.abs(res.state_mean - ref.state_mean))))
        dev = max(dev, float(np.max(np.abs(res.state_cov - ref.state_cov))))
        dev = max(dev, float(np.max(np.abs(res.input_mean - ref.input_mean))))
    print(f"max deviation from dense joint solve: {dev:.3e}")
    tol = opts.get("tol")
    if tol is not None and dev > float(tol):
        return 1
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nuv-ssm",
                                     description="Sparse event estimation in scalar signals")
    sub = parser.add_subparsers(dest="command", required=True)

    for cmd in ("fit-steps", "fit-walk", "fit-lines", "remove-outliers"):
        p = sub.add_parser(cmd)
        _add_common(p)
        p.add_argument("--sigma2", type=float, help="assumed observation noise variance")
        if cmd == "fit-walk":
            p.add_argument("--walk-var", dest="walk_var", type=float)
        if cmd == "fit-lines":
            p.add_argument("--degree", type=int, choices=[1, 2])
            p.add_argument("--continuity", action=argparse.BooleanOptionalAction)
        if cmd == "remove-outliers":
            p.add_argument("--base", choices=["oscillator", "step", "walk"])
            p.add_argument("--walk-var", dest="walk_var", type=float)
            p.add_argument("--rho", type=float)
            p.add_argument("--omega", type=float)
            p.add_argument("--process-var", dest="process_var", type=float)

    p = sub.add_parser("simulate")
    p.add_argument("--kind", choices=["steps", "walk", "lines", "outliers"])
    p.add_argument("--K", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jumps", type=int, help="number of injected events")
    p.add_argument("--jump-size", dest="jump_size", type=float)
    p.add_argument("--noise-std", dest="noise_std", type=float)
    p.add_argument("--walk-std", dest="walk_std", type=float)
    p.add_argument("--output")
    p.add_argument("--config")

    p = sub.add_parser("batch-nuv")
    _add_common(p)
    p.add_argument("--inputs", nargs="+", help="multiple input CSVs")
    p.add_argument("--sigma2", type=float)
    p.add_argument("--sigma2-grid", dest="sigma2_grid",
                   help="comma-separated variance grid to sweep")
    p.add_argument("--fit", choices=["fit-steps", "fit-walk", "fit-lines", "remove-outliers"])
    p.add_argument("--walk-var", dest="walk_var", type=float)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("oracle-check")
    _add_common(p)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--fit", choices=["fit-steps", "fit-walk", "fit-lines", "remove-outliers"])
    p.add_argument("--walk-var", dest="walk_var", type=float)
    p.add_argument("--tol", type=float)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _merge_config(args)
        cmd = args.command
        if cmd in ("fit-steps", "fit-walk", "fit-lines", "remove-outliers"):
            return _run_fit(cmd, opts)
        if cmd == "simulate":
            return _cmd_simulate(opts)
        if cmd == "batch-nuv":
            return _cmd_batch(opts)
        if cmd == "oracle-check":
            return _cmd_oracle_check(opts)
        raise InputError(f"unknown command {cmd!r}")
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
