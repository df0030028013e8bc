use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("denominator {0:e} is below the division tolerance")]
    DivisionNearZero(f64),
    #[error("non-integer power of negative base {0}")]
    NegativeBaseRealPower(f64),
    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),
    #[error("point has {got} components, expected at least {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("component {component} is not a sum of monomials; declare quasi and residual parts explicitly")]
    NotMonomialSum { component: usize },
    #[error("component {component}: monomial weight {weight} exceeds k + alpha_i = {limit}")]
    WeightTooHigh { component: usize, weight: f64, limit: f64 },
    #[error("invalid type: {0}")]
    InvalidType(String),
    #[error("{kind} certificate failed for component {component}: {detail}")]
    CertificateFailed { kind: &'static str, component: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: expected {expected}, found {found}")]
    Syntax { line: usize, column: usize, expected: String, found: String },
    #[error("unknown identifier `{name}` at {line}:{column}")]
    UnknownIdentifier { name: String, line: usize, column: usize },
    #[error("exponent at {line}:{column} must be a literal or a parameter ratio")]
    NonLiteralExponent { line: usize, column: usize },
    #[error("missing section or key `{0}`")]
    MissingSection(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid document: {0}")]
    Document(String),
    #[error("in `{context}`: {source}")]
    InExpression { context: String, source: Box<ParseError> },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("leading term is not invertible: {0}")]
    LeadingTermNotInvertible(String),
    #[error("leading coefficient {0} is not positive")]
    NonPositiveLeadingCoefficient(f64),
    #[error("series has no terms below the truncation")]
    Empty,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("no balance root found")]
    NoRootFound,
    #[error("Jacobian singular at Newton iterate from seed {0:?}")]
    JacobianSingularAtIterate(Vec<f64>),
    #[error("ill-conditioned Jordan structure near eigenvalue {eigenvalue}: rank gap {gap:e}")]
    IllConditionedJordan { eigenvalue: f64, gap: f64 },
    #[error("residual is not series-representable: {0}")]
    ResidualNotSeriesRepresentable(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpansionError {
    #[error("complex blow-up power eigenvalues are not supported")]
    ComplexSpectrumUnsupported,
    #[error("power-determining matrix is not hyperbolic (min |Re lambda| = {0:e})")]
    NonHyperbolic(f64),
    #[error("resonance test ambiguous: |gamma + 1 + lambda| = {distance:e} (gamma = {gamma}, lambda = {lambda})")]
    ResonanceToleranceAmbiguous { gamma: f64, lambda: f64, distance: f64 },
    #[error("order {order} needs more terms than the working truncation {trunc} can hold")]
    OrderTooDeepForTruncation { order: usize, trunc: f64 },
    #[error("order must be at least 1")]
    InvalidOrder,
    #[error("gap delta = {0} is not positive; the expansion does not organize by order")]
    NonPositiveGap(f64),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("integrator step failed at theta = {theta:e}: {reason}")]
    IntegratorStepFailure { theta: f64, reason: String },
    #[error("degenerate fit for component {0}")]
    DegenerateFit(usize),
    #[error("s-time diagnostic inconclusive: unstable takeover before a decay window formed")]
    UnstableTakeoverImmediate,
    #[error("s-time diagnostic requires a stable eigenvalue")]
    NoStableModes,
    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Umbrella error for the end-to-end pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("root index {index} out of range ({found} roots found)")]
    RootIndex { index: usize, found: usize },
}
