"""Co-evolution of input-feature subsets and shallow neural topologies.

A library plus CLI that searches the joint space of technical-indicator
subsets and feed-forward topologies as a tri-objective problem (test-regime
balanced error, architectural complexity, earlier-regime balanced error) and
selects one non-dominated architecture a posteriori from a decision maker's
preference ranking.
"""

__version__ = "0.1.0"

from .decision import PreferenceSpec, mtd_select, preference_weights
from .genome import Architecture, SearchSpaceConfig, complexity, decode, encode
from .market_data import (DatasetSplits, OhlcvSeries, PatternSet, SplitSpec,
                          build_patterns, load_ohlcv_csv, split_by_dates)
from .moea import EagdConfig, Nsga2Config, ParetoArchive, eagd_run, hypervolume, nsga2_run
from .neural import ActivationKind, ScgConfig, Topology, predict, scg_train
from .objectives import EvalConfig, ObjectiveVector, evaluate

__all__ = [
    "ActivationKind", "Architecture", "DatasetSplits", "EagdConfig", "EvalConfig",
    "Nsga2Config", "ObjectiveVector", "OhlcvSeries", "ParetoArchive", "PatternSet",
    "PreferenceSpec", "ScgConfig", "SearchSpaceConfig", "SplitSpec", "Topology",
    "build_patterns", "complexity", "decode", "eagd_run", "encode", "evaluate",
    "hypervolume", "load_ohlcv_csv", "mtd_select", "nsga2_run", "predict",
    "preference_weights", "scg_train", "split_by_dates",
]
