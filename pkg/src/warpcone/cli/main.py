"""``warp`` command line: config-driven experiment runs with reproducible outputs.

Exit codes: 0 success, 2 configuration or input error, 3 resource cap,
4 numerical non-convergence, 1 any other library error.  Failures print a
one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import networkx
import numpy as np
import scipy

import warpcone
from warpcone.cli.config import ExperimentConfig, load_config
from warpcone.coarse import enumerate_map_space, gh_distance, orbit_level
from warpcone.errors import ConfigError, InputError, WarpError
from warpcone.groups import make_group, word_ball
from warpcone.measure import (
    CylinderSet,
    Partition,
    cylinder_measure,
    invariance_defect_experiment,
    tower_invariance,
    tower_measures,
    weak_star_diagnostic,
)
from warpcone.spaces import (
    RotationGroup,
    action_audit,
    build_net,
    circle_rotation,
    make_space,
    so3_rotation,
    torus_translation,
    trivial_action,
)
from warpcone.warped import level_graph, spectral_gap, trivialization_report, warped_level

COMMANDS = ("level", "trivsweep", "expander", "mapspace", "ghdiag", "measures")


# -- building blocks from the config -------------------------------------------------------

def build_action(cfg: ExperimentConfig):
    g = cfg.section("group")
    group = make_group(g.pop("kind"), **g)
    space = make_space(cfg.get("space", "kind"), cfg.get("space", "dim"))
    kind = cfg.get("action", "kind")
    if kind == "trivial":
        return trivial_action(group, space)
    if kind == "rotation":
        if space.kind != "circle":
            raise ConfigError("action.kind", "rotation acts on the circle; use translation or so3")
        return circle_rotation(group, cfg.get("action", "angles"))
    if kind == "translation":
        return torus_translation(group, cfg.get("action", "vectors"), space.dim)
    if kind == "so3":
        return so3_rotation(group, cfg.get("action", "vectors"))
    raise ConfigError("action.kind", f"unknown action kind {kind!r}")


def origin(space) -> np.ndarray:
    p = np.zeros((1, space.coord_dim))
    if isinstance(space, RotationGroup):
        p[0, 0] = 1.0
    return p


def net_for(cfg: ExperimentConfig, space, t: float, seed: int):
    eps = cfg.get("net", "eps")
    if eps is None:
        eps = cfg.get("net", "eps_scale") / t
    return build_net(
        space, eps, seed,
        cap=cfg.get("caps", "net"),
        weight_samples=cfg.get("net", "weight_samples"),
        probes=cfg.get("net", "probes"),
    )


def _num(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "inf" if math.isinf(x) else repr(x)
    return str(x)


class Output:
    """Writes CSV/JSON files that start with the run header (config hash, versions, caps)."""

    def __init__(self, directory: Path, header: dict, plot_data: bool):
        self.dir = directory
        self.header = header
        self.plot_data = plot_data
        self.written = []
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, name):
        path = self.dir / name
        self.written.append(name)
        return path

    def csv(self, name, columns, rows, extra=None):
        head = dict(self.header, **(extra or {}))
        with open(self._path(name), "w") as fh:
            for key in sorted(head):
                fh.write(f"# {key}: {json.dumps(head[key], sort_keys=True)}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_num(v) for v in row) + "\n")

    def json(self, name, doc):
        with open(self._path(name), "w") as fh:
            json.dump({"header": self.header, **doc}, fh, sort_keys=True, indent=2, default=_jsonable)
            fh.write("\n")

    def plot(self, name, xs, ys):
        if not self.plot_data:
            return
        with open(self._path(name), "w") as fh:
            fh.write(f"# config_hash {self.header['config_hash']}\n")
            for x, y in zip(xs, ys):
                fh.write(f"{_num(x)} {_num(y)}\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


# -- subcommands ---------------------------------------------------------------------------

def run_level(cfg, out: Output, seed: int, threads: int):
    action = build_action(cfg)
    t = cfg.get("sweep", "t")[0]
    net = net_for(cfg, action.space, t, seed)
    level = warped_level(net, action, t, threads=threads)
    rho = level.rho
    idx = range(level.n)
    out.csv("rho.csv", ["i"] + [str(j) for j in idx], ([i] + rho[i].tolist() for i in idx), level.header())
    thr = cfg.get("sweep", "threshold")
    graph = level_graph(level, thr)
    out.csv("level_graph.csv", ["i", "j"], sorted(graph.edges()), {"threshold": thr, **level.header()})
    gap = spectral_gap(graph, tol=cfg.get("tolerances", "spectral"), seed=seed)
    audit = action_audit(action, net, samples=2000, seed=seed)
    slack = float(np.max(np.abs(rho - t * net.distance_matrix())))
    out.json("level.json", {
        "level": level.header(),
        "n": level.n,
        "threshold": thr,
        "lambda2": gap,
        "connected": networkx.is_connected(graph),
        "max_abs_rho_minus_td": slack,
        "audit": audit.as_dict(),
    })


def run_trivialization_sweep(cfg, out: Output, seed: int, threads: int):
    action = build_action(cfg)
    ts = cfg.get("sweep", "t")
    rs = cfg.get("sweep", "r")
    tol = cfg.get("tolerances", "trivialization")
    rows, first = [], {r: None for r in rs}
    for t in ts:
        net = net_for(cfg, action.space, t, seed)
        level = warped_level(net, action, t, threads=threads)
        m0 = int(net.nearest(origin(action.space))[0][0])
        for r in rs:
            rep = trivialization_report(level, m0, r)
            ok = rep.defect <= tol
            if ok and first[r] is None:
                first[r] = t
            rows.append((t, r, rep.defect, level.mesh, int(ok), rep.diagnostics.get("reason", "")))
    out.csv("trivsweep.csv", ["t", "r", "defect", "mesh", "below_tol", "reason"], rows, {"tolerance": tol})
    thresholds = [first[r] for r in rs]
    known = [x for x in thresholds if x is not None]
    out.json("trivsweep.json", {
        "threshold_t": {str(r): first[r] for r in rs},
        "threshold_monotone_in_r": all(a <= b for a, b in zip(known[:-1], known[1:])),
        "all_infinite": all(math.isinf(row[2]) for row in rows),
    })
    for r in rs:
        sel = [row for row in rows if row[1] == r]
        out.plot(f"trivsweep_r{r}.dat", [row[0] for row in sel], [row[2] for row in sel])


def run_expander_trend(cfg, out: Output, seed: int, threads: int):
    action = build_action(cfg)
    thr = cfg.get("sweep", "threshold")
    rows = []
    for t in cfg.get("sweep", "t"):
        net = net_for(cfg, action.space, t, seed)
        level = warped_level(net, action, t, threads=threads)
        graph = level_graph(level, thr)
        connected = networkx.is_connected(graph)
        gap = spectral_gap(graph, tol=cfg.get("tolerances", "spectral"), seed=seed)
        rows.append((t, thr, gap, level.n, int(not connected)))
    out.csv("expander.csv", ["t", "threshold", "lambda2", "n", "disconnected"], rows)
    gaps = [row[2] for row in rows]
    out.json("expander.json", {
        "lambda2": gaps,
        "non_increasing": all(b <= a + 1e-12 for a, b in zip(gaps[:-1], gaps[1:])),
    })
    out.plot("expander.dat", [row[0] for row in rows], gaps)


def _map_levels(cfg, seed, threads):
    action = build_action(cfg)
    K, C, R = cfg.get("sweep", "K"), cfg.get("sweep", "C"), cfg.get("sweep", "R")
    ar = cfg.get("sweep", "action_radius")
    spacing = cfg.get("net", "spacing")
    region = K * R + C + K * ar + C
    levels = []
    for t in cfg.get("sweep", "t"):
        level, m0 = orbit_level(
            action, origin(action.space), t, max(R, region), seed, spacing=spacing,
            mesh_scale=cfg.get("net", "mesh_scale"), cap=cfg.get("caps", "net"),
            weight_samples=cfg.get("net", "weight_samples"), probes=cfg.get("net", "probes"),
        )
        levels.append(enumerate_map_space(level, level, m0, m0, K, C, R, spacing=spacing,
                                          action_radius=ar, cap=cfg.get("caps", "maps")))
    return action, levels


def run_mapspace(cfg, out: Output, seed: int, threads: int):
    action, levels = _map_levels(cfg, seed, threads)
    m = n = action.space.dim
    rows = []
    for ms in levels:
        diam = float(np.max(ms.delta)) if len(ms) else 0.0
        rows.append((ms.t, len(ms), int(ms.truncated), diam, ms.counting_bound(m, n)))
        with open(out._path(f"mapspace_t{_num(ms.t)}.json"), "w") as fh:
            fh.write(json.dumps({"header": out.header, "level": json.loads(ms.to_json())}, sort_keys=True))
            fh.write("\n")
    out.csv("mapspace.csv", ["t", "n_maps", "truncated", "diameter", "count_bound"], rows)
    out.plot("mapspace.dat", [r[0] for r in rows], [r[1] for r in rows])


def run_ghdiag(cfg, out: Output, seed: int, threads: int):
    _, levels = _map_levels(cfg, seed, threads)
    budget = cfg.get("caps", "gh_budget")
    rows = []
    for a, b in zip(levels[:-1], levels[1:]):
        res = gh_distance(a.as_metric_space(), b.as_metric_space(), budget=budget, seed=seed)
        rows.append((a.t, b.t, res.value, int(res.exact), len(a), len(b)))
    out.csv("ghdiag.csv", ["t_prev", "t", "gh", "exact", "n_prev", "n"], rows, {"gh_budget": budget})
    vals = [r[2] for r in rows]
    out.json("ghdiag.json", {"gh": vals, "last_le_first": bool(vals) and vals[-1] <= vals[0]})
    out.plot("ghdiag.dat", [r[1] for r in rows], vals)


def run_measure_suite(cfg, out: Output, seed: int, threads: int):
    action = build_action(cfg)
    rs = cfg.get("sweep", "r")
    c = cfg.get("experiment", "t_coeff")
    samples = cfg.get("experiment", "samples")
    bound = cfg.get("experiment", "bound")
    spacing = cfg.get("net", "spacing")
    group = action.group
    radius = cfg.get("experiment", "gamma_radius")
    gamma = next((g for g in word_ball(group, radius) if g.length == radius), None)
    if gamma is None:
        raise InputError(f"group has no element of length {radius}")
    ts = [c * r * r for r in rs]
    eps = cfg.get("net", "eps") or cfg.get("net", "eps_scale") * min(r / t for r, t in zip(rs, ts))
    net = build_net(action.space, eps, seed, cap=cfg.get("caps", "net"),
                    weight_samples=cfg.get("net", "weight_samples"), probes=cfg.get("net", "probes"))
    m0 = origin(action.space)
    reports = [invariance_defect_experiment(action, group.identity_element, rs[0], ts[0], samples, seed,
                                            net=net, m0=m0, bound=bound, spacing=spacing)]
    for r, t in zip(rs, ts):
        reports.append(invariance_defect_experiment(action, gamma, r, t, samples, seed, net=net, m0=m0,
                                                    bound=bound, spacing=spacing))
    sweep = [rep.as_dict() for rep in reports[1:]]
    defects = [row["defect"] for row in sweep]
    shells = [row["shell_mass"] for row in sweep]

    counts = cfg.get("experiment", "tower_samples")
    measures, drawn = tower_measures(action, rs[0], counts, seed, bound=bound, spacing=spacing)
    ws = weak_star_diagnostic(measures, ultrametric=True)
    inv = tower_invariance(drawn[-1], gamma)

    unit = cylinder_measure(CylinderSet.single(Partition.uniform(1.0, 1)),
                            rtol=cfg.get("tolerances", "quadrature"))
    out.json("measures.json", {
        "identity_row": reports[0].as_dict(),
        "invariance_sweep": sweep,
        "weak_star": {
            "sample_counts": counts,
            "rejected_samples": [d.rejected for d in drawn],
            "consecutive": ws.consecutive,
            "invariance": {str(gamma): inv},
        },
        "cylinder_full_line_unit_mass": unit,
        "verdict": {
            "defect_last_le_first": defects[-1] <= defects[0],
            "shell_non_increasing": all(b <= a for a, b in zip(shells[:-1], shells[1:])),
            "weak_star_last_le_first": (not ws.consecutive) or ws.consecutive[-1] <= ws.consecutive[0],
            "unit_mass_within_1e-6": abs(unit - 1.0) <= 1e-6,
        },
    })
    out.csv("invariance.csv", ["gamma", "r", "t", "defect", "shell_mass", "rejected_samples", "samples"],
            ([row[k] for k in ("gamma", "r", "t", "defect", "shell_mass", "rejected_samples", "samples")]
             for row in sweep))
    out.plot("invariance.dat", rs, defects)


RUNNERS = {
    "level": run_level,
    "trivsweep": run_trivialization_sweep,
    "expander": run_expander_trend,
    "mapspace": run_mapspace,
    "ghdiag": run_ghdiag,
    "measures": run_measure_suite,
}


# -- entry point ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="warp", description="Warped cone experiments")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", default=None, help="INI-style experiment file")
    p.add_argument("--seed", type=int, default=None, help="overrides [experiment] seed")
    p.add_argument("--out", default=None, help="output directory (overrides OUTPUT_DIR and [output] dir)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--plot-data", action="store_true", help="also write two-column .dat series")
    return p


def run_header(cfg: ExperimentConfig, command: str) -> dict:
    return {
        "command": command,
        "config_hash": cfg.digest(),
        "config": cfg.hashed(),
        "versions": {
            "warpcone": warpcone.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "networkx": networkx.__version__,
        },
        "caps": cfg.section("caps"),
        "tolerances": cfg.section("tolerances"),
    }


def _error_record(exc: BaseException, code: int) -> str:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ConfigError):
        rec["key"] = exc.key
    if getattr(exc, "cap", None) is not None:
        rec["cap"] = exc.cap
    return json.dumps(rec, sort_keys=True)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.values["experiment"]["seed"] = args.seed
        seed = cfg.get("experiment", "seed")
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        directory = args.out or os.environ.get("OUTPUT_DIR") or cfg.get("output", "dir")
        prefix = cfg.get("output", "prefix")
        out = Output(Path(directory) / prefix if prefix else Path(directory),
                     run_header(cfg, args.command), args.plot_data)
        RUNNERS[args.command](cfg, out, seed, args.threads)
    except WarpError as exc:
        code = exc.exit_code
        print(_error_record(exc, code), file=sys.stderr)
        return code
    print(json.dumps({"command": args.command, "files": out.written, "dir": str(out.dir)}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
