"""Imputation benchmark, model comparison and DNN tuning harnesses."""
from .comparison import ModelReport, ModelRow, derive_seed, prepare, run_model_comparison
from .imputation import BASELINE_RATE, CellResult, ImputationBenchmarkReport, run_imputation_benchmark
from .masking import DEFAULT_RATES, HiddenCells, MaskingProtocol, RateTooHighError, mask_cells
from .tuning import NEURON_CONFIGS, TuningGrid, TuningPoint, TuningResult, run_dnn_tuning

__all__ = [
    "BASELINE_RATE",
    "CellResult",
    "DEFAULT_RATES",
    "HiddenCells",
    "ImputationBenchmarkReport",
    "MaskingProtocol",
    "ModelReport",
    "ModelRow",
    "NEURON_CONFIGS",
    "RateTooHighError",
    "TuningGrid",
    "TuningPoint",
    "TuningResult",
    "derive_seed",
    "mask_cells",
    "prepare",
    "run_dnn_tuning",
    "run_imputation_benchmark",
    "run_model_comparison",
]
