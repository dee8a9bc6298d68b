"""Online multi-label classification over an incrementally clustered label space."""
from .baselines import BinaryRelevanceHoeffding, MajorityLabelset, SingleMlhat, make_learner
from .clustering import ClusterHierarchy, CooccurrenceStats, balanced_partition, jaccard_dissimilarity
from .core import EMPTY, Instance, LabelSet, labelset_from_indicator, labelset_restrict, labelset_to_indicator
from .drift import ADWIN, ErrorSummary, hoeffding_epsilon, hoeffding_epsilon_tree, welch_significant, welch_t
from .io import DriftEvent, LabelSpec, SyntheticSpec, generate_synthetic, load_arff, load_csv
from .metrics import PrequentialState, prequential_update, report, rolling_series
from .mlhat import MlhatTree, TreeConfig
from .model import IhomerConfig, IhomerModel, SwapAction

__version__ = "0.1.0"

__all__ = [
    "ADWIN", "BinaryRelevanceHoeffding", "ClusterHierarchy", "CooccurrenceStats", "DriftEvent", "EMPTY",
    "ErrorSummary", "IhomerConfig", "IhomerModel", "Instance", "LabelSet", "LabelSpec", "MajorityLabelset",
    "MlhatTree", "PrequentialState", "SingleMlhat", "SwapAction", "SyntheticSpec", "TreeConfig",
    "balanced_partition", "generate_synthetic", "hoeffding_epsilon", "hoeffding_epsilon_tree",
    "jaccard_dissimilarity", "labelset_from_indicator", "labelset_restrict", "labelset_to_indicator",
    "load_arff", "load_csv", "make_learner", "prequential_update", "report", "rolling_series",
    "welch_significant", "welch_t",
]
