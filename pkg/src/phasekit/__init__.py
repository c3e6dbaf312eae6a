"""phasekit: uniform stationary-phase evaluation of oscillatory integrals.

The pieces, bottom up:

    expr        tiny expression language (parse, render, evaluate, differentiate)
    jets        truncated Taylor series, one variable and several
    kernel      grid evaluation and panel quadrature, compiled when available
    oracle      brute-force oscillatory quadrature, the reference values
    inert       sampled certificates that a weight family has uniform bounds
    stationary  window classification and stationary-point location
    expansion   the stationary-phase expansion itself, values and W-series
    pipeline    iterated reduction of several variables, one window at a time
    cli         config-driven front end over all of the above
"""

from .errors import (
    DomainViolation,
    ExprParseError,
    NameCollision,
    NoConvergence,
    OrderExceeded,
    PhasekitError,
    QuadratureFailure,
    SchemaError,
    SingularImplicit,
    StepHypothesisViolation,
    SupportViolation,
    UnboundParameter,
)
from .expr import evaluate, parse, render
from .inert import FamilySpec, InertReport, check_inert, fourier_decay_check, product_family, specialize_family
from .oracle import IntegralSpec, OracleResult, quad1d, quad_nd
from .stationary import (
    Indeterminate,
    NonStationary,
    SPContext,
    Stationary,
    StationaryPointForm,
    classify,
    t0_jet,
    t0_monomial,
)
from .expansion import ExpansionResult, sp_constants, sp_expand, w_value_mjet, weight_out
from .pipeline import (
    Ambient,
    PipelineResult,
    PipelineSpec,
    StepRecord,
    ci_example,
    ci_oracle_spec,
    prune,
)
from .pipeline import run as run_reduction
from .cli import RunConfig, parse_config, render_config

__version__ = "0.1.0"

__all__ = [
    "Ambient",
    "DomainViolation",
    "ExpansionResult",
    "ExprParseError",
    "FamilySpec",
    "Indeterminate",
    "InertReport",
    "IntegralSpec",
    "NameCollision",
    "NoConvergence",
    "NonStationary",
    "OracleResult",
    "OrderExceeded",
    "PhasekitError",
    "PipelineResult",
    "PipelineSpec",
    "QuadratureFailure",
    "RunConfig",
    "SPContext",
    "SchemaError",
    "SingularImplicit",
    "Stationary",
    "StationaryPointForm",
    "StepHypothesisViolation",
    "StepRecord",
    "SupportViolation",
    "UnboundParameter",
    "check_inert",
    "ci_example",
    "ci_oracle_spec",
    "classify",
    "evaluate",
    "fourier_decay_check",
    "parse",
    "parse_config",
    "prune",
    "quad1d",
    "quad_nd",
    "render",
    "render_config",
    "run_reduction",
    "sp_constants",
    "sp_expand",
    "t0_jet",
    "t0_monomial",
    "w_value_mjet",
    "weight_out",
    "__version__",
]
