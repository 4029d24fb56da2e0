"""Model zoo: losses with exact derivatives up to third order."""

from .linear import LinearDataset, LinearRegressionModel, linear_dataset
from .mlp import MLPDataset, MLPModel
from .noise import NoiseMap
from .sensing import MatrixSensingModel, SensingDataset, sensing_dataset
from .uv import UVDataset, VectorUVModel, uv_dataset

__all__ = [
    "LinearDataset",
    "LinearRegressionModel",
    "linear_dataset",
    "MLPDataset",
    "MLPModel",
    "NoiseMap",
    "MatrixSensingModel",
    "SensingDataset",
    "sensing_dataset",
    "UVDataset",
    "VectorUVModel",
    "uv_dataset",
]
