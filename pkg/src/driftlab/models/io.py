"""Dataset serialization with stable, fully reproducible formatting.

All floats are written with %.17g so a save/load round trip is exact
for float64.  The vector dataset lives in one CSV; the sensing dataset
is a directory with a JSON manifest plus one CSV per matrix.
"""

import json
import os

import numpy as np

from ..errors import ConfigError
from .sensing import SensingDataset
from .uv import UVDataset

__all__ = [
    "save_uv_dataset",
    "load_uv_dataset",
    "save_sensing_dataset",
    "load_sensing_dataset",
]

_FMT = "%.17g"


def save_uv_dataset(path, dataset):
    rows = [f"{i},{x:.17g},{y:.17g}" for i, (x, y) in enumerate(zip(dataset.x, dataset.y))]
    with open(path, "w") as fh:
        fh.write("index,x,y\n")
        fh.write("\n".join(rows))
        fh.write("\n")


def load_uv_dataset(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ConfigError("expected columns index,x,y", location=str(path))
    return UVDataset(x=data[:, 1].copy(), y=data[:, 2].copy())


def _save_matrix(path, a):
    np.savetxt(path, np.atleast_2d(a), fmt=_FMT, delimiter=",")


def _load_matrix(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def save_sensing_dataset(dirpath, dataset):
    os.makedirs(dirpath, exist_ok=True)
    files = []
    for i in range(dataset.P):
        name = f"a_{i:04d}.csv"
        _save_matrix(os.path.join(dirpath, name), dataset.A[i])
        files.append(name)
    _save_matrix(os.path.join(dirpath, "x_star.csv"), dataset.x_star)
    manifest = {
        "d": dataset.d,
        "rank": dataset.rank,
        "P": dataset.P,
        "y": [float(f"{v:.17g}") for v in dataset.y],
        "x_star": "x_star.csv",
        "files": files,
    }
    with open(os.path.join(dirpath, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_sensing_dataset(dirpath):
    manifest_path = os.path.join(dirpath, "manifest.json")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read manifest: {err}", location=manifest_path)
    for key in ("d", "rank", "P", "y", "x_star", "files"):
        if key not in manifest:
            raise ConfigError(f"manifest missing key {key!r}", location=manifest_path)
    a = np.stack([_load_matrix(os.path.join(dirpath, f)) for f in manifest["files"]])
    return SensingDataset(
        A=a,
        x_star=_load_matrix(os.path.join(dirpath, manifest["x_star"])),
        y=np.asarray(manifest["y"], dtype=np.float64),
        rank=int(manifest["rank"]),
    )
