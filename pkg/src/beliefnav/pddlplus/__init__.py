"""Parser, printer and grounder for the PDDL+ subset used by the navigation domain."""

from .grounding import (
    AttachmentRegistry,
    GroundedModel,
    GroundedOperator,
    GroundingError,
    UnresolvedAttachment,
    ground,
    print_model,
)
from .model import DomainModel, ProblemModel
from .parser import (
    ArityMismatch,
    PddlError,
    PddlSyntaxError,
    UndeclaredSymbol,
    UnsupportedFeature,
    parse_domain,
    parse_problem,
)
from .printer import print_domain, print_problem

__all__ = [
    "ArityMismatch", "AttachmentRegistry", "DomainModel", "GroundedModel", "GroundedOperator",
    "GroundingError", "PddlError", "PddlSyntaxError", "ProblemModel", "UndeclaredSymbol",
    "UnresolvedAttachment", "UnsupportedFeature", "ground", "parse_domain", "parse_problem",
    "print_domain", "print_model", "print_problem",
]
