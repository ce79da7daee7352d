"""Regularized self-consistent quantum gate-set tomography."""
from .design import (CompletenessReport, FiducialDesign, ScicReport, SequenceSet, build_scic,
                     is_informationally_complete, is_scic, is_tomographically_complete, standard_fiducials)
from .estimator import (EstimateResult, RegularizationConfig, estimate, linear_inversion_init, objective,
                        regularization, select_r)
from .exceptions import DegenerateDesignError, NoLinearGaugeError
from .gauge import (GaugeTransform, apply_gauge, gauge_distance, gauge_optimize, indistinguishable,
                    linear_gauge_match)
from .harness import StudyConfig, StudyRow, fit_rate, run_study
from .optimize import OptimizerConfig
from .parametrization import PhysicalParameterization
from .qops import GateSet, MatrixBasis, ValidationReport, pauli_basis, validate
from .simulator import Dataset, DistributionTable, frequencies, loss, probabilities, sample

__all__ = [
    "CompletenessReport", "Dataset", "DegenerateDesignError", "DistributionTable", "EstimateResult",
    "FiducialDesign", "GateSet", "GaugeTransform", "MatrixBasis", "NoLinearGaugeError", "OptimizerConfig",
    "PhysicalParameterization", "RegularizationConfig", "ScicReport", "SequenceSet", "StudyConfig", "StudyRow",
    "ValidationReport", "apply_gauge", "build_scic", "estimate", "fit_rate", "frequencies", "gauge_distance",
    "gauge_optimize", "indistinguishable", "is_informationally_complete", "is_scic",
    "is_tomographically_complete", "linear_gauge_match", "linear_inversion_init", "loss", "objective",
    "pauli_basis", "probabilities", "regularization", "run_study", "sample", "select_r", "standard_fiducials",
    "validate",
]
