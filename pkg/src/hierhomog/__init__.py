"""Hierarchical computation of effective coefficients for two-continuum media."""

__version__ = "0.1.0"

from .coeff import Constant, Laminate, Paper4, Tabulated, model_from_dict  # noqa: E402
from .driver import compare, dof_budget, full_reference_solve, hierarchical_solve  # noqa: E402
from .estimator import HierarchicalHomogenizer  # noqa: E402
from .hierarchy import build_hierarchy, select_parents  # noqa: E402

__all__ = [
    "Constant", "Laminate", "Paper4", "Tabulated", "model_from_dict",
    "build_hierarchy", "select_parents", "hierarchical_solve", "full_reference_solve",
    "compare", "dof_budget", "HierarchicalHomogenizer",
]
