"""Graph-based relation extraction and dependency parsing on a small numpy autodiff core."""
from .errors import GraphREError
from .estimator import BiaffineParser
from .evaluation import Triple, TripleSet, exact_micro_f1

__version__ = "0.1.0"

__all__ = ["BiaffineParser", "GraphREError", "Triple", "TripleSet", "exact_micro_f1", "__version__"]
