"""Neural integral equations solved and trained in Chebyshev coefficient space."""

from __future__ import annotations

from ._kernels import BACKEND
from .chebyshev import (
    CollocationGrid,
    TimeMap,
    cheb_nodes,
    eval_series,
    eval_series_grid,
    node_projection_matrix,
    project_mc,
    project_nodes,
    time_map,
)
from .datagen import (
    Dataset,
    DelayNetSpec,
    HyperbolicKernel,
    IrregularFraction,
    Regular,
    Trajectory,
    downsample,
    gen_delay_dataset,
    gen_ie_dataset,
    nystrom_solve,
    split,
)
from .errors import (
    ChecksumError,
    DivergedError,
    NonFiniteError,
    SchemaError,
    SingularSystemError,
    SpectralNIEError,
)
from .ie_core import (
    IEProblem,
    Kind,
    SolveReport,
    SolverConfig,
    classical_to_spectral,
    picard_solve,
    residual,
)
from .neural import (
    AdamState,
    LayerSpec,
    MLPParams,
    NeuralIntegrand,
    ProblemTemplate,
    Tape,
    adam_step,
    forward,
    init_params,
    loss_and_grad,
    mlp_spec,
    solve_batch,
)
from .spectral_ops import antiderivative, fredholm_integral, volterra_eval
from .train_eval import (
    Metrics,
    TrainConfig,
    benchmark,
    evaluate,
    interpolation_eval,
    make_free_term,
    new_model,
    project_trajectory,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BACKEND",
    "ChecksumError",
    "CollocationGrid",
    "Dataset",
    "DelayNetSpec",
    "DivergedError",
    "HyperbolicKernel",
    "IEProblem",
    "IrregularFraction",
    "Kind",
    "LayerSpec",
    "MLPParams",
    "Metrics",
    "NeuralIntegrand",
    "NonFiniteError",
    "ProblemTemplate",
    "Regular",
    "SchemaError",
    "SingularSystemError",
    "SolveReport",
    "SolverConfig",
    "SpectralNIEError",
    "Tape",
    "TimeMap",
    "TrainConfig",
    "Trajectory",
    "adam_step",
    "antiderivative",
    "benchmark",
    "cheb_nodes",
    "classical_to_spectral",
    "downsample",
    "eval_series",
    "eval_series_grid",
    "evaluate",
    "forward",
    "fredholm_integral",
    "gen_delay_dataset",
    "gen_ie_dataset",
    "init_params",
    "interpolation_eval",
    "loss_and_grad",
    "make_free_term",
    "mlp_spec",
    "new_model",
    "node_projection_matrix",
    "nystrom_solve",
    "picard_solve",
    "project_mc",
    "project_nodes",
    "project_trajectory",
    "residual",
    "solve_batch",
    "split",
    "time_map",
    "train",
    "volterra_eval",
]
