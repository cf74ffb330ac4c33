"""dfdsem: semantic data-flow diagrams from container orchestration
configs, with rule-based fact materialization and closed-world
security-pattern matching."""

__version__ = "0.1.0"

from .compose import ComposeError, ComposeModel, normalize_image, parse_compose
from .dfd import (
    BuildError,
    DfdModel,
    IdGenerator,
    build_model,
    docker_socket_storage,
    validate_model,
)
from .evaluation import (
    CriterionMapping,
    EvalRow,
    LabelError,
    LabelSet,
    default_mappings,
    evaluate_corpus,
    load_labels,
)
from .graph import KnowledgeGraph, LoweringError, Term, Triple, base_vocabulary, lower
from .patterns import (
    MatchRow,
    PatternQuery,
    PatternReport,
    builtin_catalog,
    evaluate,
    run_catalog,
)
from .reasoner import (
    ClassExpr,
    Rule,
    ThreatTemplate,
    TripleBudgetError,
    default_rules,
    eval_class_expression,
    materialize,
)
from .taxonomy import (
    StorageKind,
    Taxonomy,
    TaxonomyError,
    classify_image,
    classify_path,
    classify_port,
    load_default_taxonomy,
    load_taxonomy,
)

__all__ = [
    "__version__",
    "BuildError",
    "ClassExpr",
    "ComposeError",
    "ComposeModel",
    "CriterionMapping",
    "DfdModel",
    "EvalRow",
    "IdGenerator",
    "KnowledgeGraph",
    "LabelError",
    "LabelSet",
    "LoweringError",
    "MatchRow",
    "PatternQuery",
    "PatternReport",
    "Rule",
    "StorageKind",
    "Taxonomy",
    "TaxonomyError",
    "Term",
    "ThreatTemplate",
    "Triple",
    "TripleBudgetError",
    "base_vocabulary",
    "build_model",
    "builtin_catalog",
    "classify_image",
    "classify_path",
    "classify_port",
    "default_mappings",
    "default_rules",
    "docker_socket_storage",
    "eval_class_expression",
    "evaluate",
    "evaluate_corpus",
    "load_default_taxonomy",
    "load_labels",
    "load_taxonomy",
    "lower",
    "materialize",
    "normalize_image",
    "parse_compose",
    "run_catalog",
    "validate_model",
]
