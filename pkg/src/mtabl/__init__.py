"""Bilinear layers with single- and multi-head temporal attention.

A small numpy library built around exact manual forward/backward passes
for three layer kinds (BL, TABL, MTABL), plus a training harness for
3-class order-book mid-price movement prediction and verification tools
(finite-difference gradient checks, structural reduction checks, and a
multiplication cost model with an instrumented counter).
"""

from .data import (
    Dataset,
    RawDayMatrix,
    SeriesSample,
    load_day,
    load_dataset,
    normalize,
    save_dataset,
    split_days,
    synth_generate,
    windowize,
)
from .errors import (
    CacheMismatchError,
    ConfigurationError,
    ConstraintError,
    DataError,
    DimensionError,
    DivergenceError,
    FormatError,
    MtablError,
    ParseError,
)
from .layers import (
    BLParams,
    LayerCache,
    MTABLParams,
    TABLParams,
    bl_forward,
    layer_backward,
    layer_forward,
    mtabl_forward,
    tabl_forward,
)
from .linalg import Matrix, as_matrix, count_multiplications, softmax_rows
from .losses import cross_entropy, inverse_frequency_weights, uniform_weights
from .metrics import EvalReport, confusion_matrix, evaluate
from .network import (
    LayerSpec,
    NetworkSpec,
    init_network_params,
    network_backward,
    network_forward,
    predict_labels,
    topology,
)
from .optim import OptimConfig, TrainState, batch_gradients, step, train
from .serialize import load_checkpoint, save_checkpoint
from .verify import (
    ComplexityEstimate,
    GradCheckReport,
    ReductionReport,
    check_reduction,
    complexity_estimate,
    draw_gradcheck_sample,
    gradcheck,
    gradcheck_layer,
    measure_multiplications,
    tabl_complexity_total,
)

__version__ = "0.1.0"

__all__ = [
    "BLParams", "CacheMismatchError", "ComplexityEstimate", "ConfigurationError",
    "ConstraintError", "DataError", "Dataset", "DimensionError", "DivergenceError",
    "EvalReport", "FormatError", "GradCheckReport", "LayerCache", "LayerSpec",
    "MTABLParams", "Matrix", "MtablError", "NetworkSpec", "OptimConfig",
    "ParseError", "RawDayMatrix", "ReductionReport", "SeriesSample", "TABLParams",
    "TrainState", "as_matrix", "batch_gradients", "bl_forward", "check_reduction",
    "complexity_estimate", "confusion_matrix", "count_multiplications",
    "cross_entropy", "draw_gradcheck_sample", "evaluate", "gradcheck",
    "gradcheck_layer",
    "init_network_params", "inverse_frequency_weights", "layer_backward",
    "layer_forward", "load_checkpoint", "load_dataset", "load_day",
    "measure_multiplications", "mtabl_forward", "network_backward",
    "network_forward", "normalize", "predict_labels", "save_checkpoint",
    "save_dataset", "softmax_rows", "split_days", "step", "synth_generate",
    "tabl_complexity_total", "tabl_forward", "topology", "train",
    "uniform_weights", "windowize",
]
