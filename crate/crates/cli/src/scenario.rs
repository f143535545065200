//! Scenario files.
//!
//! ```json
//! {"name": "dc-z1", "kind": "dc-check", "params": {"caps": [6, 6], "k": 1, ...}}
//! ```
//!
//! `params` is parsed into the struct for `kind` before anything runs; unknown
//! kinds, unknown fields and wrong types are all parse errors.

use polyhardy::io::{ComplexFile, FactorFile, StructureFile, TensorFile};
use polyhardy::Layout;
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

pub const KINDS: [&str; 8] = [
    "beurling-roundtrip",
    "mixed-factorize",
    "commutant",
    "theta-fourier",
    "wold",
    "sn-example",
    "theorem5",
    "dc-check",
];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    kind: String,
    #[serde(default)]
    params: Value,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub params: Params,
}

#[derive(Clone, Debug)]
pub enum Params {
    BeurlingRoundtrip(BeurlingParams),
    MixedFactorize(MixedFactorizeParams),
    Commutant(CommutantParams),
    ThetaFourier(ThetaFourierParams),
    Wold(WoldParams),
    SnExample(SnParams),
    Theorem5(Theorem5Params),
    DcCheck(DcCheckParams),
}

impl Params {
    pub fn kind(&self) -> &'static str {
        match self {
            Params::BeurlingRoundtrip(_) => KINDS[0],
            Params::MixedFactorize(_) => KINDS[1],
            Params::Commutant(_) => KINDS[2],
            Params::ThetaFourier(_) => KINDS[3],
            Params::Wold(_) => KINDS[4],
            Params::SnExample(_) => KINDS[5],
            Params::Theorem5(_) => KINDS[6],
            Params::DcCheck(_) => KINDS[7],
        }
    }

    pub fn common(&self) -> Common {
        let (tol, seed) = match self {
            Params::BeurlingRoundtrip(p) => (p.tol, p.seed),
            Params::MixedFactorize(p) => (p.tol, p.seed),
            Params::Commutant(p) => (p.tol, p.seed),
            Params::ThetaFourier(p) => (p.tol, p.seed),
            Params::Wold(p) => (p.tol, p.seed),
            Params::SnExample(p) => (p.tol, p.seed),
            Params::Theorem5(p) => (p.tol, p.seed),
            Params::DcCheck(p) => (p.tol, p.seed),
        };
        Common { tol, seed }
    }

    /// Tolerance used when neither the scenario nor the caller sets one.
    pub fn default_tol(&self) -> f64 {
        match self {
            Params::Commutant(_) | Params::ThetaFourier(_) => 1e-10,
            _ => polyhardy::DEFAULT_TOL,
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, CliError> {
        let raw: RawScenario = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        let params = match raw.kind.as_str() {
            "beurling-roundtrip" => Params::BeurlingRoundtrip(typed(raw.params)?),
            "mixed-factorize" => Params::MixedFactorize(typed(raw.params)?),
            "commutant" => Params::Commutant(typed(raw.params)?),
            "theta-fourier" => Params::ThetaFourier(typed(raw.params)?),
            "wold" => Params::Wold(typed(raw.params)?),
            "sn-example" => Params::SnExample(typed(raw.params)?),
            "theorem5" => Params::Theorem5(typed(raw.params)?),
            "dc-check" => Params::DcCheck(typed(raw.params)?),
            other => {
                return Err(CliError::Parse(format!("unknown kind {other:?}; expected one of {}", KINDS.join(", "))))
            }
        };
        Ok(Scenario { name: raw.name, params })
    }
}

fn typed<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, CliError> {
    let v = if v.is_null() { Value::Object(Default::default()) } else { v };
    serde_json::from_value(v).map_err(|e| CliError::Parse(format!("params: {e}")))
}

/// Fields every kind accepts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Common {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

fn default_max_zeros() -> usize {
    4
}

fn default_beurling_modulus() -> f64 {
    0.7
}

/// `S = θ H^2(D)` for a one-variable Blaschke product; explicit zeros or
/// random ones from the seed.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeurlingParams {
    pub cap: usize,
    #[serde(default)]
    pub zeros: Option<Vec<ComplexFile>>,
    #[serde(default = "default_max_zeros")]
    pub max_zeros: usize,
    #[serde(default = "default_beurling_modulus")]
    pub max_modulus: f64,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_layout() -> Layout {
    Layout::Split
}

fn default_zero_tol() -> f64 {
    1e-6
}

/// Builds `Θ H^2(D^k) ⊗ Q_1 ⊗ …` and factorizes it back. `theta` and
/// `factors` are given together or both drawn from the seed.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedFactorizeParams {
    pub caps: Vec<usize>,
    pub k: usize,
    #[serde(default)]
    pub theta: Option<StructureFile>,
    #[serde(default)]
    pub factors: Option<Vec<FactorFile>>,
    #[serde(default = "default_layout")]
    pub layout: Layout,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Symbol of `T = M_φ` against the coordinate shifts. `phi` explicit, or a
/// random polynomial on `phi_caps`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutantParams {
    pub caps: Vec<usize>,
    #[serde(default)]
    pub phi: Option<TensorFile>,
    #[serde(default)]
    pub phi_caps: Option<Vec<usize>>,
    pub max_degree: Vec<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaCoeff {
    pub index: Vec<usize>,
    pub value: TensorFile,
}

/// Random `Θ_k` at the listed indices, polynomials on `caps`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCoeffs {
    pub indices: Vec<Vec<usize>>,
    pub caps: Vec<usize>,
}

fn default_range_tol() -> f64 {
    polyhardy::DEFAULT_TOL
}

/// Block multiplier `Σ z^k ⊗ Θ_k` on `caps` split after `split` variables.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaFourierParams {
    pub caps: Vec<usize>,
    pub split: usize,
    #[serde(default)]
    pub coefficients: Option<Vec<ThetaCoeff>>,
    #[serde(default)]
    pub random: Option<RandomCoeffs>,
    pub max_k: Vec<usize>,
    /// Tolerance of the range classification.
    #[serde(default = "default_range_tol")]
    pub range_tol: f64,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Subspace constructions shared by `wold`.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SubspaceSpec {
    Beurling { caps: Vec<usize>, theta: StructureFile },
    Mixed {
        caps: Vec<usize>,
        theta: StructureFile,
        factors: Vec<FactorFile>,
        #[serde(default = "default_layout")]
        layout: Layout,
    },
    Kernels { caps: Vec<usize>, alphas: Vec<ComplexFile> },
}

/// Finite Wold tiling of a constructed subspace.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WoldParams {
    pub subspace: SubspaceSpec,
    pub vars: Vec<usize>,
    pub interior_caps: Vec<usize>,
    #[serde(default)]
    pub expected_wandering_dim: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_sn_modulus() -> f64 {
    0.6
}

fn default_separation() -> f64 {
    0.1
}

fn default_rank_epsilon() -> f64 {
    polyhardy::DEFAULT_RANK_EPSILON
}

/// `S_N` from kernel points: explicit `alphas`, or `n` random separated points.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnParams {
    pub cap: usize,
    #[serde(default)]
    pub alphas: Option<Vec<ComplexFile>>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_sn_modulus")]
    pub max_modulus: f64,
    #[serde(default = "default_separation")]
    pub min_separation: f64,
    #[serde(default = "default_rank_epsilon")]
    pub rank_epsilon: f64,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhiFile {
    Constant { c: ComplexFile },
    Linear { c: ComplexFile },
}

fn default_z_cap() -> usize {
    4
}

fn default_w_cap() -> usize {
    48
}

/// Kernel-type construction from one-variable symbols; `psi` defaults to the
/// balanced constant.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem5Params {
    pub phis: Vec<PhiFile>,
    #[serde(default)]
    pub psi: Option<ComplexFile>,
    #[serde(default = "default_z_cap")]
    pub z_cap: usize,
    #[serde(default = "default_w_cap")]
    pub w_cap: usize,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Doubly commuting check of `Θ H^2(D^k) ⊗ Q_1 ⊗ …`; random when `theta`
/// and `factors` are absent.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcCheckParams {
    pub caps: Vec<usize>,
    pub k: usize,
    #[serde(default)]
    pub theta: Option<StructureFile>,
    #[serde(default)]
    pub factors: Option<Vec<FactorFile>>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}
