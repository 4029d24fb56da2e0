import hashlib

import pytest

from driftlab.errors import DivergenceError, FitError
from driftlab.harness import cell_stream_index, run_cells, write_csv, write_run_log
from driftlab.harness.sweep import CellOutcome, format_value


def test_stream_index_matches_hash_oracle():
    # independent recomputation: sha256 of the canonical joined parts,
    # first 8 bytes big endian, sign bit dropped
    blob = "uv-data|0".encode()
    want = int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") >> 1
    assert cell_stream_index("uv-data", 0) == want
    assert want == 5901990327647542096


def test_stream_index_frozen_values():
    assert cell_stream_index("uv-data", 1) == 1001623404226539302
    assert cell_stream_index(0.5, 0.01, 2) == 3054772008337210863


def test_stream_index_canonicalization():
    # ints, equal floats, and their decimal strings collide by design;
    # cell tags must carry a distinguishing prefix instead
    assert cell_stream_index(1) == cell_stream_index(1.0) == cell_stream_index("1")
    assert cell_stream_index(True) != cell_stream_index(1)
    assert cell_stream_index("a", "b") != cell_stream_index("b", "a")
    assert 0 <= cell_stream_index("x") < 2**63


def _ok_worker(cell):
    return CellOutcome(key=cell, rows=[{"cell": cell[0]}])


def test_run_cells_preserves_input_order():
    cells = [(i,) for i in range(17)]
    for parallelism in (1, 4):
        results = run_cells(cells, _ok_worker, parallelism)
        assert [o.key for o in results] == [tuple(c) for c in cells]
        assert all(o.status == "completed" for o in results)
        assert all(o.wall_ms >= 0.0 for o in results)


def test_run_cells_records_divergence_and_failure():
    def worker(cell):
        if cell[0] == "d":
            raise DivergenceError("blew up")
        if cell[0] == "f":
            raise FitError("no fit")
        return CellOutcome(key=cell, rows=[{}])

    out = run_cells([("ok",), ("d",), ("f",)], worker, parallelism=2)
    assert [o.status for o in out] == ["completed", "diverged", "failed"]
    assert out[1].message == "blew up"
    assert out[2].message == "no fit"
    assert out[1].rows == []


def test_run_cells_propagates_foreign_exceptions():
    def worker(cell):
        raise ValueError("a real bug")

    with pytest.raises(ValueError, match="a real bug"):
        run_cells([(0,)], worker, parallelism=1)


def test_run_cells_rejects_wrong_return_type():
    with pytest.raises(TypeError, match="CellOutcome"):
        run_cells([(0,)], lambda cell: {"not": "an outcome"}, parallelism=1)


def test_format_value_fixed_width():
    assert format_value(None) == ""
    assert format_value(True) == "true"
    assert format_value(False) == "false"
    assert format_value(7) == "7"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(2.0 / 3.0) == "0.66666666666666663"
    assert format_value("text") == "text"


def test_write_csv_empty_rows_still_has_header(tmp_path):
    path = tmp_path / "empty.csv"
    write_csv(str(path), ["a", "b"], [])
    assert path.read_text() == "a,b\n"


def test_write_csv_formats_and_fills_missing(tmp_path):
    path = tmp_path / "rows.csv"
    write_csv(str(path), ["a", "b", "c"], [{"a": 0.1, "c": True}])
    assert path.read_text() == "a,b,c\n0.10000000000000001,,true\n"


def test_write_run_log_columns(tmp_path):
    path = tmp_path / "runs.csv"
    outcomes = [
        CellOutcome(key=(0.5, 1), status="completed", wall_ms=1.5),
        CellOutcome(key=("x",), status="diverged", message="boom", wall_ms=2.0),
    ]
    write_run_log(str(path), outcomes, {"kind": "uv-timescale", "seed": 2})
    lines = path.read_text().splitlines()
    assert lines[0] == "kind,seed,cell,status,message,wall_ms"
    assert lines[1].startswith("uv-timescale,2,0.5|1,completed,,")
    assert lines[2].startswith("uv-timescale,2,x,diverged,boom,")
