"""Configuration-driven experiment runner.

Configs are INI files (one nesting level: an [experiment] section plus one
kind-specific section).  Every run writes results.csv (deterministic
formatting, each row carrying the config hash), optional plot-data files,
and manifest.json (config hash, seed, package versions, wall time).

    falconer-lab run <config>       exit 0 ok / 2 config error / 3 compute error
    falconer-lab validate <config>
    falconer-lab list-kinds

FALCONER_THREADS overrides the worker-pool size.  All randomness flows from
the single config seed through counter-based Philox streams, so results are
schedule-independent.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import ComputeError, ConfigInvalid, LabError

KINDS = [
    "train_track_scaling",
    "decomposition_pipeline",
    "liu_identity",
    "decoupling_sweep",
    "radial_projection",
    "erdos_count",
    "minkowski",
]


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def write_csv(path, header, rows, config_hash):
    with open(path, "w") as fh:
        fh.write(",".join(header + ["config_hash"]) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + f",{config_hash}\n")


def pool_size():
    try:
        return max(1, int(os.environ.get("FALCONER_THREADS", "2")))
    except ValueError:
        return 2


def parallel_map(fn, items):
    """Ordered map over a worker pool; reduction order is fixed by index."""
    if pool_size() == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=pool_size()) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# config parsing / validation
# ---------------------------------------------------------------------------

def load_config(path):
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigInvalid("file", f"cannot read config {path}")
    if "experiment" not in cp:
        raise ConfigInvalid("experiment", "missing [experiment] section")
    exp = dict(cp["experiment"])
    kind = exp.get("kind")
    if kind not in KINDS:
        raise ConfigInvalid("kind", f"unknown kind {kind!r}; see list-kinds")
    params = dict(cp[kind]) if kind in cp else {}
    return {"kind": kind, "seed": exp.get("seed", "0"),
            "output": exp.get("output", f"out/{kind}"), "params": params}


def config_hash(cfg):
    canon = json.dumps(cfg, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _need_int(params, key, default=None, minimum=None, pow2=False):
    raw = params.get(key, default)
    if raw is None:
        raise ConfigInvalid(key, "required")
    try:
        val = int(raw)
    except (TypeError, ValueError):
        raise ConfigInvalid(key, f"not an integer: {raw!r}")
    if minimum is not None and val < minimum:
        raise ConfigInvalid(key, f"{val} < minimum {minimum}")
    if pow2 and (val & (val - 1)) != 0:
        raise ConfigInvalid(key, f"{val} is not a power of two")
    return val


def _need_float(params, key, default=None, lo=None, hi=None):
    raw = params.get(key, default)
    if raw is None:
        raise ConfigInvalid(key, "required")
    try:
        val = float(raw)
    except (TypeError, ValueError):
        raise ConfigInvalid(key, f"not a number: {raw!r}")
    if lo is not None and val < lo:
        raise ConfigInvalid(key, f"{val} below {lo}")
    if hi is not None and val > hi:
        raise ConfigInvalid(key, f"{val} above {hi}")
    return val


def _int_list(params, key, default):
    raw = params.get(key, default)
    try:
        return [int(tok) for tok in str(raw).replace(",", " ").split()]
    except ValueError:
        raise ConfigInvalid(key, f"not an integer list: {raw!r}")


def validate(cfg):
    """Raise ConfigInvalid on the first offending field."""
    kind = cfg["kind"]
    p = cfg["params"]
    try:
        int(cfg["seed"])
    except ValueError:
        raise ConfigInvalid("seed", f"not an integer: {cfg['seed']!r}")
    if kind == "train_track_scaling":
        Rs = _int_list(p, "r_list", "256 512 1024")
        for R in Rs:
            if R & (R - 1) or R < 16:
                raise ConfigInvalid("r_list", f"{R} not a power of two >= 16")
        _need_float(p, "alpha", "1.2", lo=1.0, hi=1.999)
    elif kind == "decomposition_pipeline":
        _need_int(p, "r", "256", minimum=16, pow2=True)
        n = _need_int(p, "n", "1024", minimum=64, pow2=True)
        R = _need_int(p, "r", "256")
        if p.get("measure", "train_track") == "train_track" and n < 4 * R:
            raise ConfigInvalid("n", f"n={n} < 4R={4 * R}")
        _need_int(p, "r0", "16", minimum=4, pow2=True)
        _need_int(p, "j_scales", "3", minimum=1)
        _need_float(p, "delta", "0.002", lo=1e-5, hi=0.1)
        _need_float(p, "alpha", "1.2", lo=1.0, hi=1.999)
    elif kind == "liu_identity":
        _need_int(p, "n", "256", minimum=64, pow2=True)
        _need_int(p, "count", "20", minimum=1)
        _need_float(p, "r_max", "48", lo=8)
    elif kind == "decoupling_sweep":
        _int_list(p, "r_list", "256 1024")
        _need_int(p, "configs", "200", minimum=1)
        for tok in str(p.get("p_list", "2 4 6")).split():
            if float(tok) < 2 or float(tok) > 6:
                raise ConfigInvalid("p_list", f"p={tok} outside [2, 6]")
    elif kind == "radial_projection":
        _need_int(p, "r", "64", minimum=16, pow2=True)
        _need_int(p, "n", "512", minimum=64, pow2=True)
        _need_float(p, "alpha", "1.2", lo=1.0, hi=1.999)
    elif kind == "erdos_count":
        _int_list(p, "n_list", "100 1024 3136 10000")
        _need_float(p, "s", "1.26", lo=0.1, hi=1.999)
    elif kind == "minkowski":
        _need_int(p, "r", "256", minimum=16, pow2=True)
        _need_float(p, "alpha", "1.25", lo=1.0, hi=1.999)
    return True


# ---------------------------------------------------------------------------
# experiment kinds
# ---------------------------------------------------------------------------

def run_train_track_scaling(cfg, outdir, h):
    from .distance_transform import (full_pushforward_separable,
                                     pinned_pushforward_cells)
    from .fractal_gen import TrainTrackSpec, train_track_separable

    p = cfg["params"]
    Rs = _int_list(p, "r_list", "256 512 1024")
    alpha = _need_float(p, "alpha", "1.2")
    layout = p.get("layout", "union")
    rows = []
    for R in Rs:
        spec = TrainTrackSpec(R=R, alpha=alpha, layout=layout)
        n = 4 * R
        sep = train_track_separable(spec, n)
        bins = 2 * R
        full = full_pushforward_separable(sep, bins=bins, t_max=1.5)
        e_full = full.l2_sq()
        pin = (spec.slat_width / 2.0, spec.slat_height / 2.0)
        ix, iy, w = sep.occupied_cells()
        cx = (ix + 0.5) * sep.h
        cy = (iy + 0.5) * sep.h
        dpin = pinned_pushforward_cells(cx, cy, w, pin, bins=bins, t_max=1.5)
        e_pin = dpin.l2_sq()
        rows.append((R, alpha, n, e_full, e_pin))
    Rv = np.log([r[0] for r in rows])
    slope_full = float(np.polyfit(Rv, np.log([r[3] for r in rows]), 1)[0])
    slope_pin = float(np.polyfit(Rv, np.log([r[4] for r in rows]), 1)[0])
    write_csv(os.path.join(outdir, "results.csv"),
              ["R", "alpha", "n", "l2_full", "l2_pinned"], rows, h)
    return {"slope_full": slope_full, "slope_pinned": slope_pin,
            "predicted": -1.5 * alpha + 2.0}


def _pipeline_measures(p, seed):
    from .fractal_gen import TrainTrackSpec, train_track
    from .measure_core import Rect, split_supports, uniform_square

    n = int(p.get("n", "1024"))
    kind = p.get("measure", "train_track")
    if kind == "train_track":
        spec = TrainTrackSpec(R=int(p.get("r", "256")),
                              alpha=float(p.get("alpha", "1.2")),
                              tilt=float(p.get("tilt", "0")))
        mu = train_track(spec, n)
    elif kind == "uniform":
        mu = uniform_square(n)
    else:
        raise ConfigInvalid("measure", f"unknown measure {kind!r}")
    mu1, mu2 = split_supports(mu, Rect(0.0, 1.0, 0.0, 1.0 / 3.0),
                              Rect(0.0, 1.0, 2.0 / 3.0, 1.0),
                              min_separation=float(p.get("separation", "0.3")))
    return mu, mu1, mu2


def run_decomposition_pipeline(cfg, outdir, h):
    from .distance_transform import pinned_pushforward, sample_pins
    from .wave_packets import assemble_good, build_plan, classify

    p = cfg["params"]
    seed = int(cfg["seed"])
    mu, mu1, mu2 = _pipeline_measures(p, seed)
    n = mu.n
    plan = build_plan(int(p.get("r0", "16")), int(p.get("j_scales", "3")), n,
                      delta=float(p.get("delta", "0.002")))
    dec = classify(plan, mu2)
    good = assemble_good(mu1, dec)
    pins, wts = sample_pins(mu2, int(p.get("pins", "32")), seed)
    rows = []
    for (px, py), wt in zip(pins, wts):
        d1 = pinned_pushforward(mu1, (px, py), bins=1024)
        dg = pinned_pushforward(good, (px, py), bins=1024)
        gap = float(np.abs(d1.bins - dg.bins).sum() * d1.dt)
        l2g = dg.l2_sq()
        l21 = d1.l2_sq()
        bound_good = max(0.0, 1.0 - 2.0 * gap) ** 2 / l2g if l2g > 0 else 0.0
        bound_raw = 1.0 / l21 if l21 > 0 else 0.0
        rows.append((px, py, wt, gap, l21, l2g, bound_good, bound_raw))
    write_csv(os.path.join(outdir, "results.csv"),
              ["pin_x", "pin_y", "weight", "l1_closeness", "l2_mu1", "l2_mugood",
               "bound_good", "bound_raw"], rows, h)
    gaps = np.array([r[3] for r in rows])
    wts = np.array([r[2] for r in rows])
    summary = {
        "n_bad_tubes": sum(int(s.bad.sum()) for s in dec.sectors),
        "l2_mu1": float(np.sum(wts * [r[4] for r in rows])),
        "l2_mugood": float(np.sum(wts * [r[5] for r in rows])),
        "frac_pins_gap_below_0.05": float(np.sum(wts[gaps < 0.05])),
        "witness_bound_good": float(max(r[6] for r in rows)),
        "witness_bound_raw": float(max(r[7] for r in rows)),
    }
    summary["l2_ratio"] = (summary["l2_mu1"] / summary["l2_mugood"]
                           if summary["l2_mugood"] > 0 else float("inf"))
    return summary


def run_liu_identity(cfg, outdir, h):
    from .distance_transform import liu_check, make_annulus_test_function

    p = cfg["params"]
    n = int(p.get("n", "256"))
    count = int(p.get("count", "20"))
    r_max = float(p.get("r_max", "48"))
    seed = int(cfg["seed"])
    x = (0.0, 0.0)
    rows = []
    for i in range(count):
        f = make_annulus_test_function(n, x, seed=seed + i, r_max=r_max)
        lhs, rhs, rem, gap = liu_check(f, x, None, r_max)
        rows.append((i, lhs, rhs, rem, gap))
    write_csv(os.path.join(outdir, "results.csv"),
              ["idx", "lhs", "rhs", "remainder_bound", "rel_gap"], rows, h)
    return {"max_rel_gap": float(max(r[4] for r in rows))}


def run_decoupling_sweep(cfg, outdir, h):
    from .decoupling_bench import decoupling_ratio, random_config

    p = cfg["params"]
    Rs = _int_list(p, "r_list", "256 1024")
    ps = [float(t) for t in str(p.get("p_list", "2 4 6")).split()]
    total = int(p.get("configs", "200"))
    seed = int(cfg["seed"])
    per = max(1, total // (len(Rs) * len(ps)))
    jobs = []
    s = 0
    for R in Rs:
        for pv in ps:
            for k in range(per):
                jobs.append((R, pv, seed * 100003 + s))
                s += 1

    def one(job):
        R, pv, sd = job
        config = random_config(R, pv, sd)
        res = decoupling_ratio(config)
        return (sd, R, pv, res["W"], res["M"], res["lhs"], res["rhs"], res["ratio"])

    rows = parallel_map(one, jobs)
    write_csv(os.path.join(outdir, "results.csv"),
              ["seed", "R", "p", "W", "M", "lhs", "rhs", "ratio"], rows, h)
    worst = {}
    for row in rows:
        key = (row[1], row[2])
        worst[key] = max(worst.get(key, 0.0), row[7])
    return {"max_ratio": {f"R{k[0]}_p{k[1]}": v for k, v in worst.items()}}


def run_radial_projection(cfg, outdir, h):
    from .radial_projection import bad_mass_profile, orponen_functional
    from .wave_packets import build_plan, classify

    p = cfg["params"]
    seed = int(cfg["seed"])
    mu, mu1, mu2 = _pipeline_measures(p, seed)
    plan = build_plan(int(p.get("r0", "16")), int(p.get("j_scales", "3")), mu.n,
                      delta=float(p.get("delta", "0.002")))
    dec = classify(plan, mu2)
    profile = bad_mass_profile(mu1, mu2, dec, seed=seed)
    rows = [(r["j"], r["R_j"], r["bad_mass"], r["max_arc_cover"], int(r["vitali_ok"]))
            for r in profile]
    write_csv(os.path.join(outdir, "results.csv"),
              ["j", "R_j", "bad_mass", "max_arc_cover", "vitali_ok"], rows, h)
    orp = {}
    for pv in (1.1, 1.5, 2.0):
        orp[f"p={pv}"] = orponen_functional(mu1, mu2, pv, max_pins=48, seed=seed)
    return {"orponen": orp, "profile": rows}


def run_erdos_count(cfg, outdir, h):
    from .erdos_distances import (best_pin_exponent, grid_points,
                                  separated_random_points)
    from .norm_geometry import body_from_preset

    p = cfg["params"]
    seed = int(cfg["seed"])
    Ns = _int_list(p, "n_list", "100 1024 3136 10000")
    s = float(p.get("s", "1.26"))
    bodies = p.get("bodies", "disk; ellipse 2 1; lp 4").split(";")
    rows = []
    summary = {}
    for family_name in ("grid", "random"):
        if family_name == "grid":
            fams = [grid_points(int(round(np.sqrt(N)))) for N in Ns]
        else:
            fams = [separated_random_points(N, seed=seed) for N in Ns]
        for body_spec in bodies:
            body_spec = body_spec.strip()
            K = None if body_spec == "disk" else body_from_preset(body_spec)
            expo, records = best_pin_exponent(fams, K, s, seed=seed)
            for (N, c) in records:
                rows.append((family_name, N, s, body_spec, c))
            summary[f"{family_name}:{body_spec}"] = expo
    write_csv(os.path.join(outdir, "results.csv"),
              ["family", "N", "s", "body", "best_count"], rows, h)
    return {"exponents": summary}


def run_minkowski(cfg, outdir, h):
    from .distance_transform import minkowski_lower
    from .fractal_gen import TrainTrackSpec, train_track
    from .measure_core import Rect, split_supports

    p = cfg["params"]
    R = int(p.get("r", "256"))
    alpha = float(p.get("alpha", "1.25"))
    n = int(p.get("n", str(4 * R)))
    spec = TrainTrackSpec(R=R, alpha=alpha)
    mu = train_track(spec, n)
    mu1, mu2 = split_supports(mu, Rect(0, 1, 0, 1 / 3), Rect(0, 1, 2 / 3, 1),
                              min_separation=0.3)
    pin = (spec.slat_width / 2, 1.0 - spec.slat_height / 2)
    deltas = [2.0 ** -k for k in range(4, 4 + int(p.get("n_deltas", "5")))]
    slope, dim_est, records = minkowski_lower(mu1, pin, None, deltas)
    write_csv(os.path.join(outdir, "results.csv"),
              ["delta", "neighborhood_measure", "l2_lower_bound"],
              records, h)
    return {"slope": slope, "dim_estimate": dim_est,
            "paper_floor_4a3_minus_23": 4 * alpha / 3 - 2 / 3,
            "caveat": "finite-scale estimate; the floor is reported, not asserted"}


RUNNERS = {
    "train_track_scaling": run_train_track_scaling,
    "decomposition_pipeline": run_decomposition_pipeline,
    "liu_identity": run_liu_identity,
    "decoupling_sweep": run_decoupling_sweep,
    "radial_projection": run_radial_projection,
    "erdos_count": run_erdos_count,
    "minkowski": run_minkowski,
}


def run(config_path) -> int:
    try:
        cfg = load_config(config_path)
        validate(cfg)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    outdir = cfg["output"]
    os.makedirs(outdir, exist_ok=True)
    hsh = config_hash(cfg)
    t0 = time.time()
    try:
        summary = RUNNERS[cfg["kind"]](cfg, outdir, hsh)
    except LabError as exc:
        print(f"compute error in {cfg['kind']}: {exc}", file=sys.stderr)
        return 3
    manifest = {
        "config": cfg,
        "config_hash": hsh,
        "seed": int(cfg["seed"]),
        "versions": {"falconer_lab": __version__, "numpy": np.__version__},
        "wall_time_s": round(time.time() - t0, 3),
        "summary": summary,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="falconer-lab")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("config")
    sub.add_parser("list-kinds", help="list experiment kinds")
    args = ap.parse_args(argv)
    if args.cmd == "list-kinds":
        for k in KINDS:
            print(k)
        return 0
    if args.cmd == "validate":
        try:
            cfg = load_config(args.config)
            validate(cfg)
        except ConfigInvalid as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        print("ok")
        return 0
    return run(args.config)


if __name__ == "__main__":
    sys.exit(main())
