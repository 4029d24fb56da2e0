import pytest

from driftlab.errors import FormatError
from driftlab.harness import emit_plots, write_csv
from driftlab.harness.plots import ENTRY_TABLE


def _uv_summary_rows():
    rows = []
    for gamma, alpha in ((0.5, 1.0), (0.8, 0.8)):
        for eta in (1e-3, 1e-2, 1e-1):
            rows.append(
                {
                    "gamma": gamma,
                    "eta": eta,
                    "t_c": 3.0 * eta**-alpha,
                    "alpha": alpha,
                    "t0": 3.0,
                    "alpha_theory": alpha,
                }
            )
    return rows


_UV_FIELDS = ["gamma", "eta", "t_c", "alpha", "t0", "alpha_theory"]


def test_uv_plot_is_deterministic(tmp_path):
    path = tmp_path / "summary.csv"
    write_csv(str(path), _UV_FIELDS, _uv_summary_rows())
    (first,) = emit_plots(str(path), "uv-timescale")
    blob = open(first, "rb").read()
    (second,) = emit_plots(str(path), "uv-timescale")
    assert open(second, "rb").read() == blob
    assert b"<svg" in blob


def test_plot_out_dir_override(tmp_path):
    src = tmp_path / "in"
    dst = tmp_path / "elsewhere"
    src.mkdir()
    dst.mkdir()
    path = src / "summary.csv"
    write_csv(str(path), _UV_FIELDS, _uv_summary_rows())
    (svg,) = emit_plots(str(path), "uv-timescale", str(dst))
    assert svg.startswith(str(dst))


def test_missing_columns_raise_format_error(tmp_path):
    path = tmp_path / "summary.csv"
    write_csv(str(path), ["gamma", "eta"], [])
    with pytest.raises(FormatError, match="missing columns"):
        emit_plots(str(path), "uv-timescale")


def test_unknown_kind_raises(tmp_path):
    path = tmp_path / "x.csv"
    write_csv(str(path), ["a"], [])
    with pytest.raises(FormatError, match="no figure"):
        emit_plots(str(path), "mystery")


def test_header_only_csv_yields_axes_only_figure(tmp_path):
    path = tmp_path / "segments.csv"
    write_csv(str(path), ["t", "relative_error"], [])
    (svg,) = emit_plots(str(path), "drift-compare")
    assert b"<svg" in open(svg, "rb").read()


def test_every_kind_renders(tmp_path):
    tables = {
        "uv-timescale": (_UV_FIELDS, _uv_summary_rows()),
        "matrix-sensing": (
            ["beta", "step", "test_error", "trace_hessian"],
            [
                {"beta": b, "step": s, "test_error": 1.0 / (s + 1), "trace_hessian": 50.0 - s}
                for b in (0.0, 0.9)
                for s in (0, 10, 20)
            ],
        ),
        "spectral-report": (
            ["index", "eigenvalue", "abs_kappa_plus", "abs_kappa_minus"],
            [
                {"index": i, "eigenvalue": 2.0 - i, "abs_kappa_plus": 0.99, "abs_kappa_minus": 0.5}
                for i in range(3)
            ],
        ),
        "drift-compare": (
            ["t", "relative_error"],
            [{"t": t, "relative_error": 0.1} for t in (0, 200, 400)],
        ),
        "beta-star-protocol": (
            ["eta", "seed", "beta_star"],
            [
                {"eta": e, "seed": s, "beta_star": 1.0 - 0.5 * e**0.7}
                for e in (0.025, 0.05, 0.1)
                for s in (0, 1)
            ],
        ),
    }
    for kind, (fields, rows) in tables.items():
        sub = tmp_path / kind
        sub.mkdir()
        path = sub / f"{ENTRY_TABLE[kind]}.csv"
        write_csv(str(path), fields, rows)
        (svg,) = emit_plots(str(path), kind)
        assert svg.endswith(f"{kind}.svg")
        assert b"<svg" in open(svg, "rb").read()


def test_beta_star_overlay_reads_sibling_summary(tmp_path):
    fits = tmp_path / "fits.csv"
    write_csv(
        str(fits),
        ["eta", "seed", "beta_star"],
        [
            {"eta": e, "seed": s, "beta_star": 1.0 - 0.5 * e**0.7}
            for e in (0.025, 0.05, 0.1)
            for s in (0, 1, 2)
        ],
    )
    write_csv(
        str(tmp_path / "summary.csv"),
        ["exponent", "amplitude", "residual", "n_eta"],
        [{"exponent": 0.7, "amplitude": 0.5, "residual": 0.0, "n_eta": 3}],
    )
    (svg,) = emit_plots(str(fits), "beta-star-protocol")
    blob = open(svg, "rb").read()
    # text is kept as text, so the fitted-slope legend survives verbatim
    assert b"fit slope 0.700" in blob
