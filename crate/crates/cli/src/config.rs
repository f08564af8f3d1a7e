//! Experiment configuration files.
//!
//! Configs are TOML with a fixed set of sections; every table rejects keys it
//! does not know. See `docs/config.md` for the grammar.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PlainDlt,
    ConditionalDlt,
    MixingDlt,
    MixingCorrelation,
    CharFn,
    Spectrum,
    ZorichSpectrum,
    HypothesisCheck,
    IdentityCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PlainDlt => "plain_dlt",
            ExperimentKind::ConditionalDlt => "conditional_dlt",
            ExperimentKind::MixingDlt => "mixing_dlt",
            ExperimentKind::MixingCorrelation => "mixing_correlation",
            ExperimentKind::CharFn => "char_fn",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::ZorichSpectrum => "zorich_spectrum",
            ExperimentKind::HypothesisCheck => "hypothesis_check",
            ExperimentKind::IdentityCheck => "identity_check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub companion: Option<CompanionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cocycle: Option<CocycleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeConfig>,
    #[serde(default)]
    pub events: EventsConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zorich: Option<ZorichConfig>,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub identities: IdentityConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    TorusAutomorphism { matrix: Vec<Vec<i64>> },
    TwoSidedShift { weights: Vec<f64> },
    TorusTranslation { vector: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompanionSpec {
    StableTranslation { amplitude: f64 },
    Identity {},
    TorusTranslation { vector: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    CoordinateCosine { frequency: Vec<i64> },
    CoordinateSymbol { index: i64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CocycleFunctional {
    /// `sigma(x, v, N)` with `v` drawn from the projective measure.
    #[default]
    Vector,
    /// `sigma(x, N)`.
    Norm,
    /// `sigma(x, s(x), N)` for the configured section.
    Section,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleConfig {
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub functional: CocycleFunctional,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renorm_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_norm_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionSpec>,
    /// Matrix `D` of the companion cocycle; the identity transport when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub companion_matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    SymbolTable {
        matrices: Vec<Vec<Vec<f64>>>,
    },
    SmoothTorus {
        base: Vec<Vec<f64>>,
        terms: Vec<TermSpec>,
    },
    Identity {
        dim: usize,
    },
    /// The derivative cocycle of a torus automorphism: its own matrix.
    Derivative {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub frequency: Vec<i64>,
    pub cos: Vec<Vec<f64>>,
    pub sin: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SectionSpec {
    Constant { vector: Vec<f64> },
    Trigonometric { base: Vec<f64>, terms: Vec<SectionTermSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionTermSpec {
    pub frequency: Vec<i64>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingSpec {
    /// `A_N = rate * N`.
    Linear,
    /// `A_N = N * E f` with the exact mean of the observable.
    Mean,
    /// `A_N = N * lambda_1` with `lambda_1` from a prior spectrum run.
    TopExponent,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizingSpec {
    Linear,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawSpec {
    Gaussian,
    Dirac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VarianceSpec {
    Value(f64),
    Method(VarianceMethod),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    GreenKubo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub averaging: AveragingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    pub normalizing: NormalizingSpec,
    pub law: LawSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<VarianceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green_kubo: Option<GreenKuboConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenKuboConfig {
    pub lag_max: usize,
    pub n_samples: usize,
}

impl Default for GreenKuboConfig {
    fn default() -> Self {
        GreenKuboConfig { lag_max: 50, n_samples: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub n_steps: u64,
    pub n_orbits: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig { n_steps: 10_000, n_orbits: 64 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<EventSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<EventSpec>,
    /// Open interval `(a, b)`; `-inf` and `inf` are allowed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    TorusBox { lower: Vec<f64>, upper: Vec<f64> },
    Cylinder { start: i64, symbols: Vec<usize> },
    ProjectiveCap { center: Vec<f64>, radius: f64 },
    FullSpace {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Schedule of orbit lengths `N`.
    #[serde(default)]
    pub n: Vec<u64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_floor")]
    pub tolerance_floor: f64,
    #[serde(default = "default_se_multiple")]
    pub se_multiple: f64,
    /// Frequencies for `char_fn`.
    #[serde(default)]
    pub t: Vec<f64>,
}

fn default_samples() -> usize {
    10_000
}

fn default_floor() -> f64 {
    0.02
}

fn default_se_multiple() -> f64 {
    5.0
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: Vec::new(),
            n_samples: default_samples(),
            tolerance_floor: default_floor(),
            se_multiple: default_se_multiple(),
            t: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub n_steps: u64,
    pub n_orbits: usize,
    /// Reference exponents, compared entrywise within `tolerance`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Require the exponents to sum to zero within 3 standard errors.
    #[serde(default)]
    pub sum_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZorichConfig {
    pub permutation: String,
    pub n_orbits: usize,
    pub n_steps: u64,
    /// Require `theta_1 - theta_2` to exceed this many combined standard
    /// errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_se: Option<f64>,
    /// Rerun on an independent stream and require agreement.
    #[serde(default)]
    pub replicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "default_contraction_n")]
    pub contraction_n_max: usize,
    #[serde(default = "default_splitting_n")]
    pub adaptedness_n_max: usize,
    #[serde(default = "default_splitting_n")]
    pub splitting_n_max: usize,
    #[serde(default = "default_directions")]
    pub n_directions: usize,
    #[serde(default = "default_boundedness")]
    pub boundedness_samples: usize,
    /// Allowed relative growth of a running maximum over the final decade.
    #[serde(default = "default_growth")]
    pub growth_tolerance: f64,
    /// Allowed relative error of the fitted contraction rate against the
    /// stable eigenvalue.
    #[serde(default = "default_slope_tolerance")]
    pub slope_tolerance: f64,
}

fn default_contraction_n() -> usize {
    1000
}

fn default_splitting_n() -> usize {
    10_000
}

fn default_directions() -> usize {
    100
}

fn default_boundedness() -> usize {
    4096
}

fn default_growth() -> f64 {
    0.01
}

fn default_slope_tolerance() -> f64 {
    0.05
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            contraction_n_max: default_contraction_n(),
            adaptedness_n_max: default_splitting_n(),
            splitting_n_max: default_splitting_n(),
            n_directions: default_directions(),
            boundedness_samples: default_boundedness(),
            growth_tolerance: default_growth(),
            slope_tolerance: default_slope_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    #[serde(default = "default_triples")]
    pub n_triples: usize,
    /// Bound on `r + s` in the cocycle identity.
    #[serde(default = "default_max_split")]
    pub max_split: u64,
    #[serde(default = "default_reversal")]
    pub reversal_n: Vec<u64>,
    #[serde(default = "default_long_n")]
    pub long_n: u64,
}

fn default_triples() -> usize {
    1000
}

fn default_max_split() -> u64 {
    40
}

fn default_reversal() -> Vec<u64> {
    vec![1, 10, 100, 1000, 10_000]
}

fn default_long_n() -> u64 {
    10_000
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig {
            n_triples: default_triples(),
            max_split: default_max_split(),
            reversal_n: default_reversal(),
            long_n: default_long_n(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        experiment = "plain_dlt"
        seed = 3

        [system]
        kind = "two_sided_shift"
        weights = [0.5, 0.5]

        [observable]
        kind = "coordinate_symbol"
        index = 0
    "#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::PlainDlt);
        assert_eq!(cfg.run, RunConfig::default());
        assert_eq!(cfg.observable, Some(ObservableSpec::CoordinateSymbol { index: 0 }));
    }

    #[test]
    fn unknown_keys_are_named() {
        for (extra, key) in [
            ("bogus = 1\n", "bogus"),
            ("[run]\nsamples = 10\n", "samples"),
            ("[events.a]\nkind = \"full_space\"\nwidth = 2\n", "width"),
        ] {
            let text = format!("{MINIMAL}\n{extra}");
            let text = if extra.starts_with("bogus") { format!("{extra}{MINIMAL}") } else { text };
            let err = ExperimentConfig::from_toml(&text).unwrap_err();
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn variance_is_a_number_or_a_method() {
        let text = r#"
            averaging = "zero"
            normalizing = "sqrt"
            law = "gaussian"
            variance = "green_kubo"
        "#;
        let s: SchemeConfig = toml::from_str(text).unwrap();
        assert_eq!(s.variance, Some(VarianceSpec::Method(VarianceMethod::GreenKubo)));
        let s: SchemeConfig = toml::from_str(&text.replace("\"green_kubo\"", "0.25")).unwrap();
        assert_eq!(s.variance, Some(VarianceSpec::Value(0.25)));
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
