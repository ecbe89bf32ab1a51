"""Dispatch of experiment configs to the toolkit, cell by cell.

An experiment is split into independent cells (one per sweep coordinate or
scenario).  Each cell draws randomness only from its own keyed stream, so
results do not depend on execution order or on the worker count, which is
read from ``RHS_WORKERS``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import SCHEMA_VERSION, __version__
from ..channels import multipath_channel, random_paths
from ..codebook import training_overhead_sweep
from ..comm.beamforming import CommScenario, OptimizeOptions, initial_beamformer, optimize_holographic, requantized_sum_rate, user_rates
from ..comm.hardware import LinkSetup, hardware_cost_comparison, hdma_vs_sdma_sweep
from ..cost import CostModel, cost_effectiveness, surrogate_elements
from ..errors import ConfigError
from ..sensing.isac import IsacScene, isac_floor_sweep
from ..sensing.radar import crb_proxy, detection_probability, simulate_detector
from ..sensing.ris import CaptureModel, RhsLossModel, surface_comparison_sweep
from ..surface import (
    Direction,
    DirectionGrid,
    Quantization,
    SurfaceGeometry,
    beampattern_gain,
    beampattern_table,
    single_beam_pattern,
    spread_feeds,
    steering_matrix,
)
from .results import ResultSet, config_hash
from .rng import stream


def _geometry(g, feeds=None):
    k = max(g["n_feeds"], feeds or 1)
    fd = None if k == 1 else spread_feeds(g["n_y"], g["n_z"], g["spacing"], k)
    return SurfaceGeometry(g["n_y"], g["n_z"], g["wavelength"], g["spacing"], g["n_g"], fd)


def _quant(bits):
    return Quantization() if bits == 0 else Quantization(bits)


def _rows(cols: dict):
    names = list(cols)
    n = len(cols[names[0]]) if names else 0
    return [{k: float(cols[k][i]) for k in names} for i in range(n)]


# ------------------------------------------------------------------- kinds
# each kind: columns(cfg) -> schema, cells(cfg) -> coordinates, run(cfg, coords) -> rows


def _pattern_columns(cfg):
    return ["theta_deg", "phi_deg", "gain_linear", "gain_db"]


def _pattern_cells(cfg):
    return [{}]


def _pattern_run(cfg, coords):
    p = cfg["pattern"]
    geom = _geometry(cfg["geometry"])
    d = Direction.from_degrees(p["theta_deg"], p["phi_deg"])
    pat = single_beam_pattern(geom, p["feed"], d, _quant(p["bits"]))
    grid = DirectionGrid.regular(tuple(p["theta_range"]), tuple(p["phi_range"]), p["step_deg"])
    return _rows(beampattern_table(grid, beampattern_gain(geom, pat, p["feed"], grid)))


def _comm_columns(cfg):
    c = cfg["comm"]
    if c["mode"] == "cost-sweep":
        return ["c", "target_rate", "rhs_elements", "pa_elements", "rhs_cost", "pa_cost", "attainable"]
    cols = ["scenario", "iteration", "sum_rate_bps_hz"] + [f"rate_user_{l}" for l in range(c["users"])]
    return cols + (["quantized_sum_rate"] if c["bits"] else [])


def _comm_cells(cfg):
    c = cfg["comm"]
    if c["mode"] == "cost-sweep":
        return [{"target_rate": float(t)} for t in cfg["sweep"]["target_rate"]]
    return [{"scenario": s} for s in range(c["scenarios"])]


def _link_setup(sec):
    return LinkSetup(tuple(float(x) for x in sec["user_phi_deg"]), sec["snr_db"])


def _comm_run(cfg, coords):
    c = cfg["comm"]
    if c["mode"] == "cost-sweep":
        t = coords["target_rate"]
        tab = hardware_cost_comparison(cfg["sweep"]["c"], [t], {"n_max": c["n_max"]}, _link_setup(c), c["chi"])
        return _rows(tab)
    s = coords["scenario"]
    rng = stream(cfg.seed, "comm", s)
    geom = _geometry(cfg["geometry"], c["users"])
    H = [multipath_channel(geom, random_paths(rng, c["paths"]), c["rx_antennas"]).matrix for _ in range(c["users"])]
    sc = CommScenario(geom, H, c["sigma2"], c["P_T"])
    opt = cfg["optimizer"]
    bf, trace = optimize_holographic(sc, initial_beamformer(sc), OptimizeOptions(max_iters=opt["max_iters"], tol=opt["tol"]))
    rows = [{"scenario": s, "iteration": i, "sum_rate_bps_hz": r} for i, r in enumerate(trace.sum_rates)]
    for l, r in enumerate(user_rates(sc, bf)):
        rows[-1][f"rate_user_{l}"] = float(r)
    if c["bits"]:
        rows[-1]["quantized_sum_rate"] = requantized_sum_rate(sc, bf, Quantization(c["bits"]))[0]
    return rows


def _hdma_columns(cfg):
    return ["n_elements", "beta_ratio", "hdma_rate", "sdma_rate", "hdma_cost", "sdma_cost", "hdma_eta", "sdma_eta"]


def _hdma_cells(cfg):
    return [{"beta_ratio": float(b)} for b in cfg["sweep"]["beta_ratio"]]


def _hdma_run(cfg, coords):
    h = cfg["hdma"]
    sizes = [int(n) for n in cfg["sweep"]["n_elements"]]
    return _rows(hdma_vs_sdma_sweep(sizes, [coords["beta_ratio"]], _link_setup(h), h["nu"], h["chi"]))


def _codebook_columns(cfg):
    return ["N", "hierarchical_queries", "exhaustive_queries", "rate_ratio", "rate_hierarchical", "rate_exhaustive"]


def _codebook_cells(cfg):
    return [{"N": int(n)} for n in cfg["sweep"]["N"]]


def _codebook_run(cfg, coords):
    c = cfg["codebook"]
    seed = cfg.seed

    def rng_for(N, trial):
        return stream(seed, "codebook", N, trial)

    tab = training_overhead_sweep([coords["N"]], c["T"], c["trials"], c["snr_db"], rng_for, c["r_min"], c["wavelength"])
    return _rows(tab)


def _radar_columns(cfg):
    return ["gamma_db", "p_fa", "p_d_analytic", "p_d_empirical", "p_fa_empirical", "crb_proxy"]


def _radar_cells(cfg):
    return [{"gamma_db": float(g)} for g in cfg["sweep"]["gamma_db"]]


def _radar_run(cfg, coords):
    r = cfg["radar"]
    g_db = coords["gamma_db"]
    gamma = 10 ** (g_db / 10)
    pfa_e, pd_e = simulate_detector(gamma, r["p_fa"], r["trials"], stream(cfg.seed, "radar", g_db))
    return [
        {
            "gamma_db": g_db,
            "p_fa": r["p_fa"],
            "p_d_analytic": detection_probability(gamma, r["p_fa"]),
            "p_d_empirical": pd_e,
            "p_fa_empirical": pfa_e,
            "crb_proxy": crb_proxy(gamma),
        }
    ]


def _isac_columns(cfg):
    return ["sinr_min_db", "feasible", "delta", "min_sinr_db", "power"]


def _isac_cells(cfg):
    return [{}]


def _isac_run(cfg, coords):
    s = cfg["isac"]
    geom = _geometry(cfg["geometry"])
    users = [steering_matrix(geom, [Direction.from_degrees(*d)])[0] for d in s["users_deg"]]
    targets = tuple(Direction.from_degrees(*d) for d in s["targets_deg"])
    scene = IsacScene(geom, users, targets, s["sigma2"])
    floors_db = [float(f) for f in cfg["sweep"]["sinr_min_db"]]
    opt = cfg["optimizer"]
    res = isac_floor_sweep(scene, [10 ** (f / 10) for f in floors_db], s["P_T"], s["rho"], max_iters=opt["max_iters"], tol=opt["tol"])
    rows = []
    for f, r in zip(floors_db, res):
        if r is None:
            rows.append({"sinr_min_db": f, "feasible": 0.0})
            continue
        ms = float(np.min(r.sinr)) if r.sinr.size else math.inf
        rows.append({"sinr_min_db": f, "feasible": 1.0, "delta": r.delta, "min_sinr_db": 10 * math.log10(ms) if ms > 0 else -math.inf, "power": r.power})
    return rows


def _ris_columns(cfg):
    return ["freq_hz", "n_elements", "edge", "gamma_rhs", "gamma_ris", "margin_db", "winner"]


def _ris_cells(cfg):
    return [{"freq_hz": float(f)} for f in cfg["sweep"]["freq_hz"]]


def _ris_run(cfg, coords):
    r = cfg["ris"]
    loss = RhsLossModel(r["decay_alpha"], r["divider_loss_db"])
    cap = CaptureModel(r["kappa"], r["feed_distance"])
    tgt = Direction.from_degrees(r["target_theta_deg"], r["target_phi_deg"])
    edges = [int(e) for e in cfg["sweep"]["edge"]]
    return _rows(surface_comparison_sweep([coords["freq_hz"]], edges, loss, cap, tgt, r["amplitude"]))


def _cost_columns(cfg):
    return ["delta", "beta_ratio", "eta", "rhs_elements", "rhs_cost", "pa_cost"]


def _cost_cells(cfg):
    return [{"beta_ratio": float(b)} for b in cfg["sweep"]["beta_ratio"]]


def _cost_run(cfg, coords):
    c = cfg["cost"]
    cm = CostModel(nu=c["nu"], chi=c["chi"], beta_ratio=coords["beta_ratio"], K=c["K"], P_M=c["P_M"], rho=c["rho"])
    deltas = np.asarray(cfg["sweep"]["delta"], dtype=float)
    eta = np.atleast_1d(cost_effectiveness(cm, deltas))
    n = surrogate_elements(deltas, cm.P_M)
    return [
        {
            "delta": float(d),
            "beta_ratio": cm.beta_ratio,
            "eta": float(e),
            "rhs_elements": float(k),
            "rhs_cost": float(cm.rhs_cost(k)),
            "pa_cost": float(cm.phased_array_cost(d / cm.P_M)),
        }
        for d, e, k in zip(deltas, eta, n)
    ]


KIND_TABLE = {
    "pattern": (_pattern_columns, _pattern_cells, _pattern_run),
    "comm": (_comm_columns, _comm_cells, _comm_run),
    "hdma": (_hdma_columns, _hdma_cells, _hdma_run),
    "codebook": (_codebook_columns, _codebook_cells, _codebook_run),
    "radar": (_radar_columns, _radar_cells, _radar_run),
    "isac": (_isac_columns, _isac_cells, _isac_run),
    "compare-ris": (_ris_columns, _ris_cells, _ris_run),
    "cost": (_cost_columns, _cost_cells, _cost_run),
}


# ------------------------------------------------------------------- driver


def worker_count() -> int:
    raw = os.environ.get("RHS_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"RHS_WORKERS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"RHS_WORKERS must be a positive integer, got {raw!r}")
    return n


def _execute(cfg, coords):
    """Run one cell; failures come back as a single error row."""
    try:
        return KIND_TABLE[cfg.kind][2](cfg, coords), None
    except Exception as e:  # noqa: BLE001 - crash isolation is the point
        where = ", ".join(f"{k}={v}" for k, v in coords.items()) or "cell"
        return [dict(coords)], f"{where}: {type(e).__name__}: {e}"


def run_experiment(cfg, workers=None) -> ResultSet:
    """Run every cell of ``cfg`` and collect one :class:`ResultSet`.

    A failing cell leaves a row with its coordinates and an ``error``
    message; the other cells still run.  Output is identical for any
    worker count.
    """
    columns_fn, cells_fn, _ = KIND_TABLE[cfg.kind]
    cells = cells_fn(cfg)
    n = worker_count() if workers is None else int(workers)
    if n > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=min(n, len(cells))) as ex:
            results = list(ex.map(_execute, [cfg] * len(cells), cells))
    else:
        results = [_execute(cfg, c) for c in cells]
    columns = list(columns_fn(cfg))
    rows, errors = [], []
    for out, err in results:
        for r in out:
            row = {c: r.get(c, math.nan) for c in columns}
            if err is not None:
                row["error"] = err
            rows.append(row)
        if err is not None:
            errors.append(err)
    if errors:
        columns.append("error")
        for r in rows:
            r.setdefault("error", "")
    mat = cfg.materialized()
    meta = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "config_hash": config_hash(mat),
        "config": mat,
        "version": __version__,
        "schema": SCHEMA_VERSION,
        "errors": errors,
    }
    return ResultSet(columns, rows, meta)
