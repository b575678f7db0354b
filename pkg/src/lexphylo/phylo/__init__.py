from .likelihood import LikelihoodEngine, PatternData, log_likelihood
from .model import ALPHA_MAX, ALPHA_MIN, BinaryCTMC, GammaRates, discretize_gamma, transition_matrix
from .optimize import fit_parameters
from .simulate import simulate_matrix
from .tree import Node, Tree, parse_newick, parse_newick_many, write_newick
from .unrooted import UnrootedTree
from .mcmc import McmcConfig, McmcResult, mcmc_run
from .search import MLResult, SearchSettings, ml_search, starting_tree
