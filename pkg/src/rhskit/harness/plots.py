"""SVG figures drawn from result tables.

Figures are a convenience layer: they read columns of a ResultSet and never
modify it.  The backing CSV is written next to every figure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp, so figures are reproducible too
matplotlib.rcParams["svg.hashsalt"] = "rhskit"


@dataclass(frozen=True)
class PlotSpec:
    """``style`` is 'line', 'heatmap' or 'polar'.

    ``y`` may list several columns (one line each); ``series`` splits a line
    plot by the values of another column.  Heatmaps use ``x``, ``y[0]`` as
    axes and ``value`` as color.  Polar plots take the cut where ``cut``
    equals ``cut_value`` and normalize the gain to its maximum.
    """

    name: str
    style: str
    x: str
    y: tuple
    series: str | None = None
    value: str | None = None
    logx: bool = False
    logy: bool = False
    title: str = ""
    cut: str | None = None
    cut_value: float | None = None

    def columns(self):
        cols = [self.x, *self.y]
        for extra in (self.series, self.value, self.cut):
            if extra:
                cols.append(extra)
        return cols


def default_specs(kind, cfg=None):
    """Figures drawn for each experiment kind by ``--plots``."""
    if kind == "pattern":
        phi0 = cfg["pattern"]["phi_deg"] if cfg is not None else 0.0
        return [PlotSpec("beampattern", "polar", "theta_deg", ("gain_linear",), cut="phi_deg", cut_value=phi0, title="normalized gain")]
    if kind == "comm":
        if cfg is not None and cfg["comm"]["mode"] == "cost-sweep":
            return [PlotSpec("hardware_cost", "line", "target_rate", ("rhs_cost", "pa_cost"), series="c", title="hardware cost")]
        return [PlotSpec("sum_rate_trace", "line", "iteration", ("sum_rate_bps_hz",), series="scenario", title="sum rate")]
    if kind == "hdma":
        return [PlotSpec("cost_efficiency", "line", "n_elements", ("hdma_eta", "sdma_eta"), series="beta_ratio", logx=True)]
    if kind == "codebook":
        return [
            PlotSpec("training_overhead", "line", "N", ("hierarchical_queries", "exhaustive_queries"), logx=True, title="training overhead"),
            PlotSpec("training_rate", "line", "N", ("rate_hierarchical", "rate_exhaustive"), logx=True),
        ]
    if kind == "radar":
        return [PlotSpec("detection", "line", "gamma_db", ("p_d_analytic", "p_d_empirical"), title="detection probability")]
    if kind == "isac":
        return [PlotSpec("isac_utility", "line", "sinr_min_db", ("delta",))]
    if kind == "compare-ris":
        return [PlotSpec("winner_map", "heatmap", "edge", ("freq_hz",), value="winner", title="1 = RHS wins")]
    if kind == "cost":
        return [PlotSpec("cost_effectiveness", "line", "delta", ("eta",), series="beta_ratio", logx=True)]
    raise ValueError(f"no default figures for kind {kind!r}")


def _col(rs, name):
    return np.array([float(v) if not isinstance(v, str) else math.nan for v in rs.column(name)], dtype=float)


def _draw_line(ax, rs, spec):
    x = _col(rs, spec.x)
    groups = [(None, np.ones(x.size, bool))]
    if spec.series:
        s = _col(rs, spec.series)
        groups = [(v, s == v) for v in sorted(set(s[~np.isnan(s)].tolist()))]
    for yname in spec.y:
        y = _col(rs, yname)
        for v, sel in groups:
            o = np.argsort(x[sel], kind="stable")
            label = yname if v is None else f"{yname} ({spec.series}={v:g})"
            ax.plot(x[sel][o], y[sel][o], marker="o", ms=3, label=label)
    ax.set_xlabel(spec.x)
    if spec.logx:
        ax.set_xscale("log")
    if spec.logy:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")


def _draw_heatmap(fig, ax, rs, spec):
    x, y, v = _col(rs, spec.x), _col(rs, spec.y[0]), _col(rs, spec.value)
    xs, ys = sorted(set(x.tolist())), sorted(set(y.tolist()))
    Z = np.full((len(ys), len(xs)), np.nan)
    for a, b, c in zip(x, y, v):
        Z[ys.index(b), xs.index(a)] = c
    im = ax.imshow(Z, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(xs)), [f"{t:g}" for t in xs])
    ax.set_yticks(range(len(ys)), [f"{t:g}" for t in ys])
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y[0])
    fig.colorbar(im, ax=ax, label=spec.value)


def _draw_polar(ax, rs, spec):
    x, g = _col(rs, spec.x), _col(rs, spec.y[0])
    sel = np.ones(x.size, bool)
    if spec.cut:
        c = _col(rs, spec.cut)
        target = spec.cut_value if spec.cut_value is not None else c[np.nanargmax(g)]
        # nearest available cut
        near = c[np.nanargmin(np.abs(c - target))]
        sel = c == near
    o = np.argsort(x[sel], kind="stable")
    gn = g[sel][o]
    peak = np.nanmax(gn) if gn.size else 0.0
    gn = gn / peak if peak > 0 else gn
    ax.plot(np.radians(x[sel][o]), gn)
    ax.set_thetamin(float(np.nanmin(x)))
    ax.set_thetamax(float(np.nanmax(x)))


def emit_plots(resultset, specs, out_dir, csv_name=None):
    """Write one SVG per spec plus the backing CSV; returns the written paths.

    Raises ValueError, before writing anything, on an empty result set or a
    column a spec references but the result set lacks.
    """
    if isinstance(specs, PlotSpec):
        specs = [specs]
    if len(resultset) == 0:
        raise ValueError("result set is empty; nothing to plot")
    for spec in specs:
        missing = [c for c in spec.columns() if c not in resultset.columns]
        if missing:
            raise ValueError(f"figure {spec.name!r} needs missing column(s): {', '.join(missing)}")
        if spec.style not in ("line", "heatmap", "polar"):
            raise ValueError(f"unknown figure style {spec.style!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for spec in specs:
        if spec.style == "polar":
            fig = plt.figure(figsize=(5, 5))
            ax = fig.add_subplot(projection="polar")
            _draw_polar(ax, resultset, spec)
        else:
            fig, ax = plt.subplots(figsize=(6, 4))
            if spec.style == "line":
                _draw_line(ax, resultset, spec)
            else:
                _draw_heatmap(fig, ax, resultset, spec)
        if spec.title:
            ax.set_title(spec.title)
        path = out / f"{spec.name}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    csv_path = out / (csv_name or f"{resultset.metadata.get('kind', 'results')}.csv")
    resultset.write_csv(csv_path)
    written.append(csv_path)
    return written
