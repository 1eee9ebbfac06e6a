//! Scenario files: a versioned JSON document naming one check, its payload
//! and the expected verdicts.

use std::collections::BTreeMap;

use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Expected outcome per row id and leg name; `true` means PASS.
pub type Expectations = BTreeMap<String, BTreeMap<String, bool>>;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub check: Check,
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Seed of the sample points and default seed of random transforms.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub expect: Expectations,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Check {
    Tensor(QuantityCheck),
    Objectivity(QuantityCheck),
    Relative(QuantityCheck),
    Christoffel(ChristoffelCheck),
    GeometricSuite(Empty),
    Mechanics(MechanicsCheck),
    NsSymmetry(NsCheck),
    Decomposed(DecomposedCheck),
    ClosureScreen(ClosureCheck),
}

impl Check {
    pub fn kind(&self) -> &'static str {
        match self {
            Check::Tensor(_) => "tensor",
            Check::Objectivity(_) => "objectivity",
            Check::Relative(_) => "relative",
            Check::Christoffel(_) => "christoffel",
            Check::GeometricSuite(_) => "geometric-suite",
            Check::Mechanics(_) => "mechanics",
            Check::NsSymmetry(_) => "ns-symmetry",
            Check::Decomposed(_) => "decomposed",
            Check::ClosureScreen(_) => "closure-screen",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Empty {}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    Scalar,
    Vec3,
    Mat3,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum RuleName {
    Scalar,
    Contra1,
    Cov1,
    Rank2,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Explicit,
    Full,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityCheck {
    pub quantities: Vec<QuantitySpec>,
    #[serde(default)]
    pub transforms: Vec<TransformSpec>,
    #[serde(default)]
    pub random_rotations: Option<RandomSet>,
    #[serde(default)]
    pub mode: ModeName,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSet {
    pub count: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantitySpec {
    pub name: String,
    pub definition: String,
    pub rule: RuleName,
    #[serde(default)]
    pub multiplier: Option<f64>,
    /// Inhomogeneous part of the rule, in new coordinates.
    #[serde(default)]
    pub rule_offset: Option<String>,
    #[serde(default)]
    pub fields: Vec<FieldSpec>,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    /// Axial vector of the spin `Omega` of the original frame.
    #[serde(default)]
    pub spin: Option<[f64; 3]>,
    /// Expected tensor defect `q~ - rule(q)` in new coordinates; `Omega`
    /// stands for the spin of each transform.
    #[serde(default)]
    pub expected_defect: Option<String>,
    #[serde(default)]
    pub defect_tolerance: Option<f64>,
    /// Overrides the check's objectivity mode.
    #[serde(default)]
    pub mode: Option<ModeName>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum RoleName {
    Inner,
    Specified,
    Free,
}

/// Component law of a field: a rule name or the transform's velocity rule.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum LawName {
    Scalar,
    Contra1,
    Cov1,
    Rank2,
    Velocity,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    pub role: RoleName,
    pub law: LawName,
    #[serde(default)]
    pub expr: Option<String>,
    /// Required for free fields.
    #[serde(default)]
    pub shape: Option<ShapeName>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ParamLawName {
    Constant,
    Point,
    Vector,
    Rank2,
    Scalar,
    Time,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Scalar(f64),
    Vector([f64; 3]),
    Matrix([[f64; 3]; 3]),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub value: Value,
    pub law: ParamLawName,
}

fn zero3() -> [f64; 3] {
    [0.0; 3]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    /// `Q(t)` about `axis` with angle `rate t + phase`.
    Rotation {
        axis: [f64; 3],
        rate: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `x~ = R x + v t + c`, `t~ = t + tau`; `R` given as a rotation vector.
    Galilei {
        #[serde(default = "zero3")]
        rotation: [f64; 3],
        #[serde(default = "zero3")]
        v: [f64; 3],
        #[serde(default = "zero3")]
        c: [f64; 3],
        #[serde(default)]
        tau: f64,
    },
    Euclidean {
        axis: [f64; 3],
        rate: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        shift: Option<String>,
        #[serde(default)]
        tau: f64,
    },
    Symmetry {
        symmetry: SymmetrySpec,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum SymmetrySpec {
    G {
        #[serde(default = "zero3")]
        rotation: [f64; 3],
        #[serde(default = "zero3")]
        v: [f64; 3],
        #[serde(default = "zero3")]
        c: [f64; 3],
        #[serde(default)]
        tau: f64,
    },
    S1 {
        eps: f64,
    },
    S2 {
        f: String,
        #[serde(default)]
        g: Option<String>,
    },
    /// Reflection of coordinate `axis` in `1..=3`.
    S3 {
        axis: usize,
    },
    S4,
    S5 {
        a: f64,
    },
    S6 {
        omega_z: f64,
    },
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ChartName {
    Identity,
    Spherical,
    Cylindrical,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChristoffelCheck {
    pub charts: Vec<ChartName>,
    /// Points per chart for the closed-form comparison.
    #[serde(default)]
    pub points: Option<usize>,
    /// Covector field for the covariant-derivative test.
    #[serde(default)]
    pub covector: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsCheck {
    pub problem: MechanicsProblem,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Oscillator,
    DragGravity,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TermsName {
    Full,
    WithoutDragTerm,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ConventionName {
    Transported,
    Frozen,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefsSpec {
    #[serde(default = "zero3")]
    pub x0r: [f64; 3],
    #[serde(default = "zero3")]
    pub x0r_rate: [f64; 3],
    #[serde(default = "zero3")]
    pub v0r: [f64; 3],
    #[serde(default)]
    pub t0r: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSpec {
    /// Free-form force `F(x, v, t)`.
    #[serde(default)]
    pub custom: Option<String>,
    /// Radial and velocity coefficients of an invariant force.
    #[serde(default)]
    pub invariant: Option<[String; 2]>,
    #[serde(default)]
    pub refs: RefsSpec,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

fn one() -> f64 {
    1.0
}

fn far_centre() -> [f64; 3] {
    [0.0, 0.0, -1e6]
}

fn x_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanicsProblem {
    /// Integration against the closed-form harmonic solution.
    Oscillator {
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default = "one")]
        mass: f64,
        #[serde(default = "x_axis")]
        x0: [f64; 3],
        #[serde(default = "zero3")]
        v0: [f64; 3],
        dt: f64,
        steps: usize,
        accuracy: f64,
    },
    /// Terminal velocity `(0, 0, -m g / a)` of linear drag under gravity.
    DragGravity {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        g: f64,
        #[serde(default = "one")]
        mass: f64,
        /// Centre of attraction; far away for uniform gravity.
        #[serde(default = "far_centre")]
        centre: [f64; 3],
        #[serde(default = "zero3")]
        x0: [f64; 3],
        #[serde(default = "zero3")]
        v0: [f64; 3],
        dt: f64,
        steps: usize,
        accuracy: f64,
    },
    GalileanCovariance {
        models: Vec<ModelName>,
        transforms: RandomSet,
        x0: [f64; 3],
        v0: [f64; 3],
        dt: f64,
        steps: usize,
    },
    /// Drag-gravity path seen from a rotating, translating frame.
    Closure {
        axis: [f64; 3],
        rate: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        shift: Option<String>,
        #[serde(default)]
        tau: f64,
        terms: Vec<TermsName>,
        x0: [f64; 3],
        v0: [f64; 3],
        dt: f64,
        steps: usize,
        #[serde(default)]
        accuracy: Option<f64>,
    },
    FrameIndifference {
        force: ForceSpec,
        conventions: Vec<ConventionName>,
        transforms: RandomSet,
    },
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SolutionName {
    TaylorGreen,
    Beltrami,
    Shear,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationControl {
    pub axis: [f64; 3],
    pub rate: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsCheck {
    pub solution: SolutionName,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub symmetries: Vec<SymmetrySpec>,
    /// Time-dependent rotations, which are not symmetries of the equations.
    #[serde(default)]
    pub rotation_controls: Vec<RotationControl>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposedCheck {
    pub mean: SolutionName,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub size: Option<usize>,
    #[serde(default)]
    pub ensemble_seed: Option<u64>,
    pub symmetries: Vec<SymmetrySpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureRefsSpec {
    pub t0r: f64,
    pub x0r: [f64; 3],
    pub u0r: [f64; 3],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ClosureModelSpec {
    Named(NamedModel),
    Custom(Box<CustomModel>),
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NamedModel {
    Compliant,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub phi: [String; 5],
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub refs: Option<ClosureRefsSpec>,
    pub nu: f64,
    /// Mean velocity field used for screening.
    #[serde(default)]
    pub mean: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureCheck {
    pub model: ClosureModelSpec,
    pub symmetries: Vec<SymmetrySpec>,
}

/// Parse a scenario document and check its version.
pub fn parse_scenario(text: &str) -> Result<Scenario, String> {
    if text.trim().is_empty() {
        return Err("empty scenario file".into());
    }
    let s: Scenario = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if s.schema != SCHEMA_VERSION {
        return Err(format!("unsupported schema version {}, expected {SCHEMA_VERSION}", s.schema));
    }
    if s.name.trim().is_empty() {
        return Err("scenario name must not be empty".into());
    }
    if let Some(t) = s.tolerance {
        if !(t.is_finite() && t > 0.0) {
            return Err(format!("tolerance must be positive, found {t}"));
        }
    }
    if s.points == Some(0) {
        return Err("points must be positive".into());
    }
    Ok(s)
}
