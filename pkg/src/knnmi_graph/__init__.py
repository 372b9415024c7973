"""Non-parametric Markov network structure learning with kNN mutual information."""

from .citest import (FisherZTest, HybridTest, PermutationTest, SeparationOracle, TestSpec,
                     fisher_z_ci_test, hybrid_ci_test, permutation_ci_test)
from .core import (CITestResult, Dataset, EstimatorConfig, MarkovBlanket, UndirectedGraph,
                   load_dataset, read_edge_list, save_dataset, write_edge_list)
from .estimators import conditional_mutual_information, digamma, entropy, mutual_information
from .eval import hamming_distance, run_benchmark
from .knn import SpatialIndex, build_index
from .structure import LearnerConfig, iamb_blanket, learn_graph
from .synthdata import (GeneratorSpec, ecdf_transform, generate_random_network,
                        generate_replicated_network, generate_small_network, sample_noise)

__version__ = "0.1.0"

__all__ = [
    "CITestResult", "Dataset", "EstimatorConfig", "FisherZTest", "GeneratorSpec", "HybridTest",
    "LearnerConfig", "MarkovBlanket", "PermutationTest", "SeparationOracle", "SpatialIndex",
    "TestSpec", "UndirectedGraph", "build_index", "conditional_mutual_information", "digamma",
    "ecdf_transform", "entropy", "fisher_z_ci_test", "generate_random_network",
    "generate_replicated_network", "generate_small_network", "hamming_distance",
    "hybrid_ci_test", "iamb_blanket", "learn_graph", "load_dataset", "mutual_information",
    "permutation_ci_test", "read_edge_list", "run_benchmark", "sample_noise", "save_dataset",
    "write_edge_list",
]
