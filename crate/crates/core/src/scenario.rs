//! JSON scenario files: schema, parsing with key-level error reporting, and
//! construction of the validated source/target pair.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::dist::{
    binomial_dist, vasicek_mixture_dist, DiscreteScoreDist, PosteriorCurve, SourceModel, TargetSpec,
    DEFAULT_QUAD_NODES,
};
use crate::error::RecalError;
use crate::eval::Functional;
use crate::methods::MethodId;
use crate::solvers::SolverConfig;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid scenario at `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ScenarioError {
    fn at(key: &str, message: impl fmt::Display) -> Self {
        Self::Invalid {
            key: key.to_string(),
            message: message.to_string(),
        }
    }

    /// Offending key for validation errors.
    pub fn key(&self) -> Option<&str> {
        match self {
            Self::Invalid { key, .. } => Some(key),
            Self::Io { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinomialSpec {
    pub trials: u32,
    pub success_prob: f64,
}

fn default_quad_nodes() -> usize {
    DEFAULT_QUAD_NODES
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VasicekSpec {
    pub trials: u32,
    pub mean: f64,
    pub correlation: f64,
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Binomial score laws per class, mixed with class-1 weight `prior`.
    ClassConditional {
        class0: BinomialSpec,
        class1: BinomialSpec,
        prior: f64,
    },
    Explicit {
        support: Vec<f64>,
        probs: Vec<f64>,
        posterior: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureSpec {
    Binomial(BinomialSpec),
    VasicekMixture(VasicekSpec),
    /// Pmf over the source support.
    Explicit { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub feature: FeatureSpec,
    pub prior: f64,
}

/// `"all"` or an explicit list of method names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum MethodSelection {
    #[default]
    All,
    List(Vec<MethodId>),
}

impl MethodSelection {
    /// Selected methods in reporting order, without duplicates.
    pub fn resolve(&self) -> Vec<MethodId> {
        match self {
            Self::All => MethodId::ALL.to_vec(),
            Self::List(list) => {
                let mut out = list.clone();
                out.sort();
                out.dedup();
                out
            }
        }
    }

    /// Parses `all` or a comma-separated list.
    pub fn parse_list(s: &str) -> Result<Self, RecalError> {
        if s.trim() == "all" {
            return Ok(Self::All);
        }
        s.split(',')
            .map(|m| m.trim().parse())
            .collect::<Result<Vec<_>, _>>()
            .map(Self::List)
    }
}

impl Serialize for MethodSelection {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::All => serializer.serialize_str("all"),
            Self::List(list) => list.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for MethodSelection {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SelectionVisitor;

        impl<'de> Visitor<'de> for SelectionVisitor {
            type Value = MethodSelection;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("\"all\" or a list of method names")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == "all" {
                    Ok(MethodSelection::All)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut list = Vec::new();
                while let Some(m) = seq.next_element::<MethodId>()? {
                    list.push(m);
                }
                if list.is_empty() {
                    return Err(de::Error::invalid_length(0, &"at least one method"));
                }
                Ok(MethodSelection::List(list))
            }
        }

        deserializer.deserialize_any(SelectionVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub source: SourceSpec,
    pub target: TargetSection,
    #[serde(default)]
    pub methods: MethodSelection,
    #[serde(default)]
    pub functional: Functional,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// Source and target models built from a scenario, with the run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub source: SourceModel,
    pub target: TargetSpec,
    pub methods: Vec<MethodId>,
    pub functional: Functional,
    pub solver: SolverConfig,
}

fn open_unit(key: &str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(ScenarioError::at(key, format!("{v} must lie strictly between 0 and 1")))
    }
}

fn binomial_at(key: &str, spec: &BinomialSpec) -> Result<DiscreteScoreDist, ScenarioError> {
    if spec.trials == 0 {
        return Err(ScenarioError::at(&format!("{key}.trials"), "must be at least 1"));
    }
    open_unit(&format!("{key}.success_prob"), spec.success_prob)?;
    binomial_dist(spec.trials, spec.success_prob, None).map_err(|e| ScenarioError::at(key, e))
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            let key = if path == "." { "<root>".to_string() } else { path };
            ScenarioError::at(&key, err.into_inner())
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Range-checks every field and builds the models.
    pub fn resolve(&self) -> Result<ResolvedScenario, ScenarioError> {
        let source = match &self.source {
            SourceSpec::ClassConditional { class0, class1, prior } => {
                let f0 = binomial_at("source.class_conditional.class0", class0)?;
                let f1 = binomial_at("source.class_conditional.class1", class1)?;
                if class0.trials != class1.trials {
                    return Err(ScenarioError::at(
                        "source.class_conditional.class1.trials",
                        format!("must equal class0.trials = {}", class0.trials),
                    ));
                }
                open_unit("source.class_conditional.prior", *prior)?;
                SourceModel::from_class_conditionals(&f0, &f1, *prior)
                    .map_err(|e| ScenarioError::at("source.class_conditional", e))?
            }
            SourceSpec::Explicit {
                support,
                probs,
                posterior,
            } => {
                let dist = DiscreteScoreDist::from_weights(support.clone(), probs.clone())
                    .map_err(|e| ScenarioError::at("source.explicit.probs", e))?;
                let curve = PosteriorCurve::new(support.clone(), posterior.clone())
                    .map_err(|e| ScenarioError::at("source.explicit.posterior", e))?;
                SourceModel::new(dist, curve).map_err(|e| ScenarioError::at("source.explicit", e))?
            }
        };
        let support = source.support().to_vec();

        let q = self.target.prior;
        open_unit("target.prior", q)?;
        let feature = match &self.target.feature {
            FeatureSpec::Binomial(spec) => binomial_at("target.feature.binomial", spec)?,
            FeatureSpec::VasicekMixture(spec) => {
                let key = "target.feature.vasicek_mixture";
                if spec.trials == 0 {
                    return Err(ScenarioError::at(&format!("{key}.trials"), "must be at least 1"));
                }
                open_unit(&format!("{key}.mean"), spec.mean)?;
                open_unit(&format!("{key}.correlation"), spec.correlation)?;
                if spec.quad_nodes < 16 {
                    return Err(ScenarioError::at(&format!("{key}.quad_nodes"), "must be at least 16"));
                }
                vasicek_mixture_dist(spec.trials, spec.mean, spec.correlation, spec.quad_nodes)
                    .map_err(|e| ScenarioError::at(key, e))?
            }
            FeatureSpec::Explicit { probs } => {
                if probs.len() != support.len() {
                    return Err(ScenarioError::at(
                        "target.feature.explicit.probs",
                        format!("has {} entries, source support has {}", probs.len(), support.len()),
                    ));
                }
                DiscreteScoreDist::from_weights(support.clone(), probs.clone())
                    .map_err(|e| ScenarioError::at("target.feature.explicit.probs", e))?
            }
        };
        if !feature.same_support(&support) {
            return Err(ScenarioError::at(
                "target.feature",
                format!(
                    "support of {} points does not match the source support of {} points",
                    feature.len(),
                    support.len()
                ),
            ));
        }
        let target = TargetSpec::for_source(&source, feature, q).map_err(|e| ScenarioError::at("target", e))?;
        self.solver.validate().map_err(|e| ScenarioError::at("solver", e))?;

        Ok(ResolvedScenario {
            source,
            target,
            methods: self.methods.resolve(),
            functional: self.functional.clone(),
            solver: self.solver,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAPER: &str = include_str!("../fixtures/example_paper.json");

    fn key_of(text: &str) -> String {
        let err = Scenario::from_json_str(text)
            .and_then(|s| s.resolve().map(|_| s))
            .unwrap_err();
        err.key().unwrap().to_string()
    }

    #[test]
    fn bundled_fixture_parses() {
        let s = Scenario::from_json_str(PAPER).unwrap();
        let r = s.resolve().unwrap();
        assert_eq!(r.source.support().len(), 17);
        assert!((r.source.prior() - 0.01).abs() < 1e-12);
        assert_eq!(r.target.prior(), 0.05);
        assert_eq!(r.methods, MethodId::ALL.to_vec());
        assert_eq!(r.functional, Functional::Sqrt);
    }

    #[test]
    fn round_trip() {
        let s = Scenario::from_json_str(PAPER).unwrap();
        let again = Scenario::from_json_str(&s.to_json_string()).unwrap();
        assert_eq!(s, again);
        let listed = Scenario {
            methods: MethodSelection::List(vec![MethodId::Fjs, MethodId::LabelShift]),
            ..s
        };
        assert_eq!(Scenario::from_json_str(&listed.to_json_string()).unwrap(), listed);
    }

    #[test]
    fn zero_target_prior_names_key() {
        let text = PAPER.replace("\"prior\": 0.05", "\"prior\": 0");
        assert_eq!(key_of(&text), "target.prior");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = PAPER.replace("\"prior\": 0.05", "\"prior\": 0.05, \"priors\": 1");
        let err = Scenario::from_json_str(&text).unwrap_err();
        assert_eq!(err.key(), Some("target.priors"));
    }

    #[test]
    fn missing_key_rejected() {
        let text = r#"{"source": {"explicit": {"support": [0, 1], "probs": [0.5, 0.5], "posterior": [0.1, 0.3]}},
                      "target": {"feature": {"explicit": {"probs": [0.5, 0.5]}}}}"#;
        let err = Scenario::from_json_str(text).unwrap_err();
        assert_eq!(err.key(), Some("target"));
        assert!(err.to_string().contains("prior"));
    }

    #[test]
    fn range_errors_name_keys() {
        let explicit = |support: &str, probs: &str, post: &str, tprobs: &str| {
            format!(
                r#"{{"source": {{"explicit": {{"support": {support}, "probs": {probs}, "posterior": {post}}}}},
                   "target": {{"feature": {{"explicit": {{"probs": {tprobs}}}}}, "prior": 0.2}}}}"#
            )
        };
        assert_eq!(
            key_of(&explicit("[0, 1]", "[0, 0]", "[0.1, 0.3]", "[0.5, 0.5]")),
            "source.explicit.probs"
        );
        assert_eq!(
            key_of(&explicit("[0, 1]", "[1, 1]", "[0.1, 1.3]", "[0.5, 0.5]")),
            "source.explicit.posterior"
        );
        assert_eq!(
            key_of(&explicit("[0, 1]", "[1, 1]", "[0.1, 0.3]", "[0.5, 0.2, 0.3]")),
            "target.feature.explicit.probs"
        );
        let mismatched = PAPER.replace("\"trials\": 16, \"mean\"", "\"trials\": 12, \"mean\"");
        assert_eq!(key_of(&mismatched), "target.feature");
        let bad_corr = PAPER.replace("\"correlation\": 0.3", "\"correlation\": 1.0");
        assert_eq!(key_of(&bad_corr), "target.feature.vasicek_mixture.correlation");
        let bad_method = PAPER.replace("\"methods\": \"all\"", "\"methods\": [\"isotonic\"]");
        assert_eq!(key_of(&bad_method), "methods[0]");
    }

    #[test]
    fn unnormalized_weights_are_normalized() {
        let text = r#"{"source": {"explicit": {"support": [0, 1], "probs": [1, 3], "posterior": [0.1, 0.3]}},
                      "target": {"feature": {"explicit": {"probs": [2, 2]}}, "prior": 0.3},
                      "methods": ["capped_scaling"]}"#;
        let r = Scenario::from_json_str(text).unwrap().resolve().unwrap();
        assert_eq!(r.source.feature_dist().probs(), &[0.25, 0.75]);
        assert_eq!(r.target.feature_dist().probs(), &[0.5, 0.5]);
        assert_eq!(r.methods, vec![MethodId::CappedScaling]);
    }

    #[test]
    fn selection_list_parsing() {
        assert_eq!(MethodSelection::parse_list("all").unwrap(), MethodSelection::All);
        let sel = MethodSelection::parse_list("fjs, label_shift,fjs").unwrap();
        assert_eq!(sel.resolve(), vec![MethodId::LabelShift, MethodId::Fjs]);
        assert!(MethodSelection::parse_list("fjs,bogus").is_err());
    }
}
