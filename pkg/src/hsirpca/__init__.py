"""Low-rank plus dictionary-sparse decomposition of hyperspectral images.

Splits a flattened scene D (pixels x bands) into a low-rank background L
and a target component (At C)^T whose activations C are column-sparse over
a dictionary of target spectra, then detects targets at the non-zero
support of the sparse component.
"""

from .cube import BandMask, HsiCube, flatten, remove_bands, unflatten
from .detect import (DetectionReport, binarize, detection_scores, evaluate,
                     roc_points)
from .dictionary import (SpectrumRecord, TargetDictionary, build_dictionary,
                         load_spectra, save_spectra)
from .errors import DataError, SolverError
from .hsio import (read_cube, read_mask_pgm, read_score_pgm, write_cube,
                   write_mask_pgm, write_score_pgm)
from .prox import (ThinSvd, group_soft_threshold, group_threshold_optimality_gap,
                   singular_value_shrink, svt_optimality_gap, thin_svd)
from .scene import (ALPHAS, BlockSpec, GroundTruth, ImplantPlan, SceneSpec,
                    add_noise, build_scenes, convoy_blocks, implant,
                    paper_protocol, parse_scene_spec, protocol_target,
                    replicate_background, synth_background)
from .solver import (DecompositionResult, SolverConfig, TraceRecord,
                     active_columns, admm_solve_C, lambda_grid,
                     nonconvex_diagnostic, objective, solve, tau_grid,
                     trace_to_csv, update_L)

__version__ = "0.1.0"

__all__ = [
    "ALPHAS", "BandMask", "BlockSpec", "DataError", "DecompositionResult",
    "DetectionReport", "GroundTruth", "HsiCube", "ImplantPlan", "SceneSpec",
    "SolverConfig", "SolverError", "SpectrumRecord", "TargetDictionary",
    "ThinSvd", "TraceRecord", "active_columns", "add_noise", "admm_solve_C",
    "binarize", "build_dictionary", "build_scenes", "convoy_blocks",
    "detection_scores", "evaluate", "flatten", "group_soft_threshold",
    "group_threshold_optimality_gap", "implant", "lambda_grid",
    "load_spectra", "nonconvex_diagnostic", "objective", "paper_protocol",
    "parse_scene_spec", "protocol_target", "read_cube", "read_mask_pgm",
    "read_score_pgm", "remove_bands", "replicate_background", "roc_points",
    "save_spectra", "singular_value_shrink", "solve", "svt_optimality_gap",
    "synth_background", "tau_grid", "thin_svd", "trace_to_csv", "unflatten",
    "update_L", "write_cube", "write_mask_pgm", "write_score_pgm",
]
