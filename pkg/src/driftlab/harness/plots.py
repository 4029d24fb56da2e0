"""SVG figures rebuilt from persisted sweep tables.

Every figure consumes CSV only, so a results directory can be re-plotted
without re-running anything.  Output bytes are deterministic: fixed SVG
hash salt, no timestamp metadata, text left as text.  Feeding the same
CSV twice must produce identical files.
"""

import csv
import math
import os

import matplotlib

matplotlib.use("svg")
from matplotlib.figure import Figure

from ..drift import alpha_exponent
from ..errors import FormatError

__all__ = ["emit_plots"]

_COLORS = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
    "#bcbd22",
    "#e377c2",
)

# columns the entry CSV must carry, per experiment kind
_REQUIRED = {
    "uv-timescale": ("gamma", "eta", "t_c", "alpha", "alpha_theory", "t0"),
    "matrix-sensing": ("beta", "step", "test_error", "trace_hessian"),
    "spectral-report": ("index", "eigenvalue", "abs_kappa_plus", "abs_kappa_minus"),
    "drift-compare": ("t", "relative_error"),
    "beta-star-protocol": ("eta", "seed", "beta_star"),
}


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        return fields, list(reader)


def _check_schema(kind, path, fields):
    missing = [c for c in _REQUIRED[kind] if c not in fields]
    if missing:
        raise FormatError(f"{path} is missing columns {missing} expected for {kind}")


def _f(row, key):
    v = row.get(key, "")
    return float(v) if v not in ("", None) else math.nan


def _grouped(rows, key):
    out = {}
    for row in rows:
        out.setdefault(_f(row, key), []).append(row)
    return dict(sorted(out.items()))


def _new_fig(n_panels):
    fig = Figure(figsize=(4.8 * n_panels, 3.6))
    axes = fig.subplots(1, n_panels)
    return fig, ([axes] if n_panels == 1 else list(axes))


def _save(fig, out_path):
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})


def _plot_uv(path, rows, axes):
    ax_t, ax_a = axes
    for i, (gamma, grp) in enumerate(_grouped(rows, "gamma").items()):
        etas = [_f(r, "eta") for r in grp]
        tcs = [_f(r, "t_c") for r in grp]
        color = _COLORS[i % len(_COLORS)]
        ax_t.loglog(etas, tcs, "o", ms=4, color=color, label=f"gamma={gamma:g}")
        alpha, t0 = _f(grp[0], "alpha"), _f(grp[0], "t0")
        if math.isfinite(alpha) and math.isfinite(t0):
            line = [t0 * e ** (-alpha) for e in etas]
            ax_t.loglog(etas, line, "-", lw=1, color=color)
    ax_t.set_xlabel("eta")
    ax_t.set_ylabel("T_c (steps)")
    ax_t.set_title("collapse timescale vs step size")
    if rows:
        ax_t.legend(fontsize=7)

    pts = {}
    for r in rows:
        if math.isfinite(_f(r, "alpha")):
            pts[_f(r, "gamma")] = _f(r, "alpha")
    gs = [0.2 + 0.6 * i / 199 for i in range(200)]
    ax_a.loglog(gs, [alpha_exponent(g) for g in gs], "-", color="#444444", lw=1, label="max(2(1-g), g)")
    if pts:
        items = sorted(pts.items())
        ax_a.loglog([g for g, _ in items], [a for _, a in items], "o", ms=5, color=_COLORS[1], label="measured")
    ax_a.set_xlabel("gamma")
    ax_a.set_ylabel("alpha")
    ax_a.set_title("timescale exponent")
    ax_a.legend(fontsize=7)


def _plot_sensing(path, rows, axes):
    ax_e, ax_h = axes
    for i, (beta, grp) in enumerate(_grouped(rows, "beta").items()):
        steps = [_f(r, "step") for r in grp]
        color = _COLORS[i % len(_COLORS)]
        ax_e.semilogy(steps, [max(_f(r, "test_error"), 1e-12) for r in grp], lw=1, color=color, label=f"beta={beta:g}")
        ax_h.plot(steps, [_f(r, "trace_hessian") for r in grp], lw=1, color=color)
    ax_e.set_xlabel("step")
    ax_e.set_ylabel("expected test error")
    ax_e.set_title("test error during label-noise phase")
    if rows:
        ax_e.legend(fontsize=7)
    ax_h.set_xlabel("step")
    ax_h.set_ylabel("trace of Hessian")
    ax_h.set_title("flatness drift")


def _plot_spectral(path, rows, axes):
    (ax,) = axes
    idx = [_f(r, "index") for r in rows]
    ax.plot(idx, [_f(r, "abs_kappa_plus") for r in rows], "o", ms=3, label="|kappa+|")
    ax.plot(idx, [_f(r, "abs_kappa_minus") for r in rows], "s", ms=3, label="|kappa-|")
    ax.axhline(1.0, color="#888888", lw=0.8)
    ax.set_xlabel("mode index")
    ax.set_ylabel("step multiplier magnitude")
    ax.set_title("per-mode decay")
    ax.legend(fontsize=7)


def _plot_drift(path, rows, axes):
    (ax,) = axes
    ax.plot([_f(r, "t") for r in rows], [_f(r, "relative_error") for r in rows], "o-", ms=3, lw=1)
    ax.set_xlabel("rescaled time t")
    ax.set_ylabel("relative error")
    ax.set_title("simulated vs predicted drift velocity")


def _plot_beta_star(path, rows, axes):
    (ax,) = axes
    per_eta = {}
    for r in rows:
        b = _f(r, "beta_star")
        if math.isfinite(b) and b < 1.0:
            per_eta.setdefault(_f(r, "eta"), []).append(1.0 - b)
    for eta, gaps in sorted(per_eta.items()):
        ax.loglog([eta] * len(gaps), gaps, "o", ms=3, color=_COLORS[0], alpha=0.55)
        gaps = sorted(gaps)
        med = gaps[len(gaps) // 2] if len(gaps) % 2 else 0.5 * (gaps[len(gaps) // 2 - 1] + gaps[len(gaps) // 2])
        ax.loglog([eta], [med], "D", ms=6, color=_COLORS[1])
    summary = os.path.join(os.path.dirname(path) or ".", "summary.csv")
    if per_eta and os.path.exists(summary):
        _, srows = _read_rows(summary)
        if srows and srows[0].get("exponent"):
            expo, amp = _f(srows[0], "exponent"), _f(srows[0], "amplitude")
            etas = sorted(per_eta)
            xs = [etas[0] * (etas[-1] / etas[0]) ** (i / 99) for i in range(100)]
            ax.loglog(xs, [amp * x**expo for x in xs], "-", color="#444444", lw=1, label=f"fit slope {expo:.3f}")
            ax.legend(fontsize=7)
    ax.set_xlabel("eta")
    ax.set_ylabel("1 - beta*")
    ax.set_title("optimal momentum gap vs step size")


_PANELS = {
    "uv-timescale": (_plot_uv, 2),
    "matrix-sensing": (_plot_sensing, 2),
    "spectral-report": (_plot_spectral, 1),
    "drift-compare": (_plot_drift, 1),
    "beta-star-protocol": (_plot_beta_star, 1),
}

# table holding each kind's plotted series (the rest of the directory is
# consulted only for overlays)
ENTRY_TABLE = {
    "uv-timescale": "summary",
    "matrix-sensing": "curves",
    "spectral-report": "modes",
    "drift-compare": "segments",
    "beta-star-protocol": "fits",
}


def emit_plots(csv_path, kind, out_dir=None):
    """Render the figure for ``kind`` from ``csv_path``.

    Returns the list of written SVG paths.  A header-only CSV yields an
    axes-only figure; a CSV without the kind's columns raises FormatError.
    """
    if kind not in _PANELS:
        raise FormatError(f"no figure is defined for kind {kind!r}")
    fields, rows = _read_rows(csv_path)
    _check_schema(kind, csv_path, fields)

    matplotlib.rcParams["svg.hashsalt"] = "driftlab"
    matplotlib.rcParams["svg.fonttype"] = "none"

    draw, n_panels = _PANELS[kind]
    fig, axes = _new_fig(n_panels)
    draw(csv_path, rows, axes)
    target_dir = out_dir if out_dir is not None else (os.path.dirname(csv_path) or ".")
    out_path = os.path.join(target_dir, f"{kind}.svg")
    _save(fig, out_path)
    return [out_path]
