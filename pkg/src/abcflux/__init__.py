"""abcflux: simulator and numerical verification toolkit for the long-range
three-species (ABC) exclusion process and its fluctuation fields."""

__version__ = "0.1.0"

from .errors import ConfigurationError, NumericalError, ParameterError
from .kernel import (HypothesisClass, KernelTables, ModelParams, RateModel,
                     build_rate_model, build_tables, classify_hypothesis,
                     exchange_rate, normalize_kernel, theta)
from .lattice import BlockAverages, Configuration, block_average, exchange, sample_invariant
from .operators import TestFunction, bump, gaussian, modulated_gaussian
from .fields import (FieldContext, FieldSeries, NormalModeConstants,
                     fluctuation_field, normal_field, normal_mode_constants)
from .analysis import (EnsembleResult, EstimatorReport, ExperimentPlan,
                       batch_mean_estimate, fit_power_law, run_ensemble,
                       test_limit_prediction)

__all__ = [name for name in dir() if not name.startswith("_")]
