"""MAP clustering for Dirichlet process mixture models by heuristic search."""
from .errors import InputError, InvariantError, SearchBudgetExceeded
from .models import ClusterStats, DcmModel, GaussianModel, build_model
from .prior import MVector, canonicalize, greedy_completion, log_prob_m
from .search import SearchResult, dpsearch
from .mcmc import run_chain, run_protocol
from .oracle import enumerate_posterior, exhaustive_map, log_joint, pairwise_fscore
from .data import Dataset, generate, generate_documents

__all__ = [
    "InputError", "InvariantError", "SearchBudgetExceeded",
    "ClusterStats", "DcmModel", "GaussianModel", "build_model",
    "MVector", "canonicalize", "greedy_completion", "log_prob_m",
    "SearchResult", "dpsearch", "run_chain", "run_protocol",
    "enumerate_posterior", "exhaustive_map", "log_joint", "pairwise_fscore",
    "Dataset", "generate", "generate_documents",
]
