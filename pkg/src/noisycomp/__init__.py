"""Reliable computation of functions through noisy devices: rates, capacity, codes and pipelines."""

from .capacity import CapacityResult, blahut_arimoto, capacity_grid_oracle, capacity_iid
from .coding import (FeinsteinCode, build_feinstein_code, dumps, exact_max_error,
                     lemma_code_size, loads, regions_disjoint)
from .errors import NoisyCompError
from .infomeasures import (RateReport, cascade_channel, conditional_entropy_given_function,
                           entropy, mutual_information, typical_input_rate)
from .model import (BINARY, Alphabet, DMChannel, DetFunction, NoisyComputationInstance, Pmf,
                    alphabet, bsc, fn_as_channel, identity_function, make_channel,
                    make_det_function, make_pmf, uniform_noise_channel, uniform_pmf)
from .pipeline import (ErrorEstimate, ReliablePipeline, SweepConfig, build_pipeline,
                       choose_block_lengths, converse_bound, rate_error_sweep, run_once, simulate)
from .typicality import TypicalSpec, CondTypicalSpec, typical_count, typical_set

__all__ = [
    "Alphabet", "BINARY", "CapacityResult", "CondTypicalSpec", "DMChannel", "DetFunction",
    "ErrorEstimate", "FeinsteinCode", "NoisyCompError", "NoisyComputationInstance", "Pmf",
    "RateReport", "ReliablePipeline", "SweepConfig", "TypicalSpec", "alphabet", "blahut_arimoto",
    "bsc", "build_feinstein_code", "build_pipeline", "capacity_grid_oracle", "capacity_iid",
    "cascade_channel", "choose_block_lengths", "conditional_entropy_given_function",
    "converse_bound", "dumps", "entropy", "exact_max_error", "fn_as_channel", "identity_function",
    "lemma_code_size", "loads", "make_channel", "make_det_function", "make_pmf",
    "mutual_information", "rate_error_sweep", "regions_disjoint", "run_once", "simulate",
    "typical_count", "typical_input_rate", "typical_set", "uniform_noise_channel", "uniform_pmf",
]
