"""csskit: capabilities, skills and services for flexible production.

Describe production functions as constraint-bearing capabilities, decide
required-vs-provided compatibility by closed-world satisfiability, execute
matched functions as skills behind a standardized state machine and a
line-delimited wire protocol, and trade capability bundles as services
with commercial tender criteria.
"""

from .documents import (
    build_world,
    load_document_file,
    load_document_text,
    world_to_doc,
)
from .errors import CssError
from .expressions import (
    Atom,
    CapabilityExpression,
    FeasibleSet,
    NormalForm,
    evaluate_expression,
    expression_to_text,
    normalize,
    parse_expression,
)
from .hosting import CapabilityEnvelopeBehavior, build_resource_host
from .market import (
    Admissibility,
    Award,
    Contract,
    ServiceOffer,
    ServiceRequest,
    TenderCriteria,
    evaluate_offer,
    form_contract,
    select_offers,
)
from .matching import (
    DISJOINT_CLASS,
    MatchDegree,
    MatchResult,
    conjoin,
    match_capabilities,
    rank_providers,
    satisfiable,
)
from .model import (
    Capability,
    ParameterSpec,
    ProcessStep,
    Product,
    PropertyDefinition,
    Resource,
    SkillDescriptor,
    ValidationReport,
    WorldModel,
    resolve_capability,
    validate_model,
)
from .orchestrate import (
    ExecuteOptions,
    ExecutionTrace,
    PlanEntry,
    ProductionPlan,
    bind_parameters,
    execute_plan,
    plan,
    trace_to_lines,
)
from .protocol import (
    Message,
    SkillClient,
    connect_loopback,
    connect_tcp,
    decode,
    encode,
    serve,
)
from .skills import (
    COMMANDS,
    STATES,
    FeasibilityResult,
    SimulatedClock,
    SkillBehavior,
    SkillFault,
    SkillHost,
    transition,
)
from .taxonomy import Taxonomy, TaxonomyClass, is_subclass_of
from .values import canonicalize_unit

__version__ = "0.1.0"

__all__ = [
    "Admissibility",
    "Atom",
    "Award",
    "COMMANDS",
    "Capability",
    "CapabilityEnvelopeBehavior",
    "CapabilityExpression",
    "Contract",
    "CssError",
    "DISJOINT_CLASS",
    "ExecuteOptions",
    "ExecutionTrace",
    "FeasibilityResult",
    "FeasibleSet",
    "MatchDegree",
    "MatchResult",
    "Message",
    "NormalForm",
    "ParameterSpec",
    "PlanEntry",
    "ProcessStep",
    "Product",
    "ProductionPlan",
    "PropertyDefinition",
    "Resource",
    "STATES",
    "ServiceOffer",
    "ServiceRequest",
    "SimulatedClock",
    "SkillBehavior",
    "SkillClient",
    "SkillDescriptor",
    "SkillFault",
    "SkillHost",
    "Taxonomy",
    "TaxonomyClass",
    "TenderCriteria",
    "ValidationReport",
    "WorldModel",
    "bind_parameters",
    "build_resource_host",
    "build_world",
    "canonicalize_unit",
    "conjoin",
    "connect_loopback",
    "connect_tcp",
    "decode",
    "encode",
    "evaluate_expression",
    "evaluate_offer",
    "execute_plan",
    "expression_to_text",
    "form_contract",
    "is_subclass_of",
    "load_document_file",
    "load_document_text",
    "match_capabilities",
    "normalize",
    "parse_expression",
    "plan",
    "rank_providers",
    "resolve_capability",
    "satisfiable",
    "select_offers",
    "serve",
    "trace_to_lines",
    "transition",
    "validate_model",
    "world_to_doc",
]
