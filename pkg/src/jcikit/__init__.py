"""Causal discovery from pooled observational and experimental data.

The toolkit models a collection of datasets gathered under different
experimental regimes as a single pooled dataset with dummy variables: a
regime indicator and one intervention indicator per experimental
manipulation. Conditional independence tests on the pooled data are
converted into graphical separation statements in a way that stays sound
under the determinism introduced by the dummy variables, and an exact
weighted-constraint solver recovers the ancestral causal structure that
minimizes the total weight of contradicted statements.

Modules
-------
graphs
    Typed causal graphs, d-separation, deterministic-relation closures,
    latent projection, oracle statement enumeration.
statements
    Weighted (in)dependence and separation statements plus file I/O.
models
    Experimental design matrices, linear-Gaussian model generation with
    soft interventions, pooled sampling, and population-level moments.
independence
    Partial correlation, Fisher z tests, frequentist weighting, and the
    sound conversion from test results to separation statements.
solver
    Exact weighted-loss minimization over ancestral structures, scoring
    of individual predictions, and the simpler invariance-based baselines.
evaluation
    Synthetic-benchmark harness, baseline comparison, precision-recall
    curves, and result serialization.
"""

from .graphs import (
    Admg,
    CausalGraph,
    CycleError,
    DetRelationSet,
    GraphStructureError,
    Kind,
    Path,
    Variable,
    ancestors,
    descendants,
    det_closure,
    enumerate_d_statements,
    functionally_determined,
    is_D_separated,
    is_D_separated_by_paths,
    is_d_separated,
    is_d_separated_by_paths,
    latent_project,
    load_graph,
    save_graph,
)
from .statements import (
    DStatement,
    IndependenceKind,
    SeparationKind,
    WeightedStatement,
    load_statements,
    save_statements,
)

__all__ = [
    "Admg",
    "CausalGraph",
    "CycleError",
    "DetRelationSet",
    "DStatement",
    "GraphStructureError",
    "IndependenceKind",
    "Kind",
    "Path",
    "SeparationKind",
    "Variable",
    "WeightedStatement",
    "ancestors",
    "descendants",
    "det_closure",
    "enumerate_d_statements",
    "functionally_determined",
    "is_D_separated",
    "is_D_separated_by_paths",
    "is_d_separated",
    "is_d_separated_by_paths",
    "latent_project",
    "load_graph",
    "load_statements",
    "save_graph",
    "save_statements",
]

__version__ = "0.1.0"
