"""jetred: jet calculus for reduction operators (nonclassical symmetries) of PDEs."""

from .expr import (
    Expr,
    ExprError,
    JetVariable,
    MalformedExpressionError,
    MultiIndex,
    NameResolutionError,
    UnsupportedFormError,
    VariableContext,
    ZeroVerdict,
    collect_jet_coefficients,
    is_zero,
    normalize,
    partial_diff,
    substitute,
    zero_verdict,
)
from .jets import (
    InvolutionCertificate,
    ProlongedField,
    TransversalityError,
    TransversalityReport,
    VectorField,
    VectorFieldFamily,
    apply_prolonged,
    characteristic,
    check_involution,
    check_transversality,
    commutator,
    family,
    make_field,
    prolong,
    total_derivative,
    total_derivative_multi,
)

__version__ = "0.1.0"
