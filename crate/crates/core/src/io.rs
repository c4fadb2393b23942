//! Problem files.
//!
//! One JSON document per problem. Every array carries an explicit `shape`
//! header and is stored flat in row-major order, so `features` of shape
//! `[N, K, d]` lists `phi(x, a)_j` with `j` varying fastest. Doubles are
//! written with shortest round-trip formatting and parsed exactly, so a
//! save/load cycle is lossless.
//!
//! ```json
//! {
//!   "format": "banditlab-problem",
//!   "version": 1,
//!   "label": "fig1",
//!   "n_arms": 5,
//!   "noise_sigma": 0.3,
//!   "contexts": { "kind": "finite", "shape": [20], "probs": [0.05, ...] },
//!   "reward": { "kind": "table", "shape": [20, 5], "values": [...] },
//!   "representations": [
//!     { "kind": "finite", "label": "orig", "shape": [20, 5, 6],
//!       "features": [...], "param": [...], "feature_bound": 3.1,
//!       "param_bound": 1.0, "misspec": null }
//!   ],
//!   "notes": []
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{
    ContextSpace, ContextualProblem, FeatureMap, FiniteRepresentation, MapRepresentation,
    Representation, RewardModel, SamplerSpec,
};

pub const FORMAT_TAG: &str = "banditlab-problem";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    format: String,
    version: u32,
    label: String,
    n_arms: usize,
    noise_sigma: f64,
    contexts: ContextsFile,
    reward: RewardFile,
    representations: Vec<RepFile>,
    #[serde(default)]
    notes: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ContextsFile {
    Finite { shape: [usize; 1], probs: Vec<f64> },
    Continuous { sampler: SamplerSpec, mc_samples: usize },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RewardFile {
    Table { shape: [usize; 2], values: Vec<f64> },
    HalfDiscSelect,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RepFile {
    Finite {
        label: String,
        shape: [usize; 3],
        features: Vec<f64>,
        param: Vec<f64>,
        feature_bound: f64,
        param_bound: f64,
        misspec: Option<Vec<f64>>,
    },
    Map {
        label: String,
        map: FeatureMap,
        param: Vec<f64>,
        feature_bound: f64,
        param_bound: f64,
    },
}

fn to_file(problem: &ContextualProblem) -> ProblemFile {
    let contexts = match &problem.contexts {
        ContextSpace::Finite { probs } => ContextsFile::Finite {
            shape: [probs.len()],
            probs: probs.clone(),
        },
        ContextSpace::Continuous {
            sampler,
            mc_samples,
        } => ContextsFile::Continuous {
            sampler: *sampler,
            mc_samples: *mc_samples,
        },
    };
    let reward = match &problem.reward {
        RewardModel::Table(values) => RewardFile::Table {
            shape: [values.len() / problem.n_arms.max(1), problem.n_arms],
            values: values.clone(),
        },
        RewardModel::HalfDiscSelect => RewardFile::HalfDiscSelect,
    };
    let representations = problem
        .representations
        .iter()
        .map(|rep| match rep {
            Representation::Finite(r) => RepFile::Finite {
                label: r.label.clone(),
                shape: [r.n_contexts, r.n_arms, r.dim],
                features: r.features.clone(),
                param: r.param.clone(),
                feature_bound: r.feature_bound,
                param_bound: r.param_bound,
                misspec: r.misspec.clone(),
            },
            Representation::Map(r) => RepFile::Map {
                label: r.label.clone(),
                map: r.map,
                param: r.param.clone(),
                feature_bound: r.feature_bound,
                param_bound: r.param_bound,
            },
        })
        .collect();
    ProblemFile {
        format: FORMAT_TAG.to_string(),
        version: FORMAT_VERSION,
        label: problem.label.clone(),
        n_arms: problem.n_arms,
        noise_sigma: problem.noise_sigma,
        contexts,
        reward,
        representations,
        notes: problem.notes.clone(),
    }
}

fn check_len(what: &str, got: usize, shape: &[usize]) -> Result<()> {
    let expected: usize = shape.iter().product();
    if got != expected {
        return Err(Error::Malformed(format!(
            "{what}: shape {shape:?} needs {expected} values, found {got}"
        )));
    }
    Ok(())
}

fn from_file(file: ProblemFile) -> Result<ContextualProblem> {
    if file.format != FORMAT_TAG {
        return Err(Error::Malformed(format!(
            "unexpected format tag '{}'",
            file.format
        )));
    }
    if file.version != FORMAT_VERSION {
        return Err(Error::Malformed(format!(
            "unsupported format version {}",
            file.version
        )));
    }
    let contexts = match file.contexts {
        ContextsFile::Finite { shape, probs } => {
            check_len("probs", probs.len(), &shape)?;
            ContextSpace::Finite { probs }
        }
        ContextsFile::Continuous {
            sampler,
            mc_samples,
        } => ContextSpace::Continuous {
            sampler,
            mc_samples,
        },
    };
    let reward = match file.reward {
        RewardFile::Table { shape, values } => {
            check_len("reward", values.len(), &shape)?;
            if shape[1] != file.n_arms {
                return Err(Error::Malformed(format!(
                    "reward table has {} arms, problem declares {}",
                    shape[1], file.n_arms
                )));
            }
            RewardModel::Table(values)
        }
        RewardFile::HalfDiscSelect => RewardModel::HalfDiscSelect,
    };
    let mut representations = Vec::with_capacity(file.representations.len());
    for rep in file.representations {
        representations.push(match rep {
            RepFile::Finite {
                label,
                shape,
                features,
                param,
                feature_bound,
                param_bound,
                misspec,
            } => {
                check_len(&format!("features of '{label}'"), features.len(), &shape)?;
                check_len(&format!("param of '{label}'"), param.len(), &shape[2..])?;
                if let Some(f) = &misspec {
                    check_len(&format!("misspec of '{label}'"), f.len(), &shape[..2])?;
                }
                Representation::Finite(FiniteRepresentation {
                    n_contexts: shape[0],
                    n_arms: shape[1],
                    dim: shape[2],
                    features,
                    param,
                    feature_bound,
                    param_bound,
                    misspec,
                    label,
                })
            }
            RepFile::Map {
                label,
                map,
                param,
                feature_bound,
                param_bound,
            } => {
                check_len(&format!("param of '{label}'"), param.len(), &[map.dim()])?;
                Representation::Map(MapRepresentation {
                    map,
                    param,
                    feature_bound,
                    param_bound,
                    label,
                })
            }
        });
    }
    let problem = ContextualProblem {
        label: file.label,
        contexts,
        n_arms: file.n_arms,
        reward,
        noise_sigma: file.noise_sigma,
        representations,
        notes: file.notes,
    };
    problem.validate()?;
    Ok(problem)
}

pub fn problem_to_string(problem: &ContextualProblem) -> Result<String> {
    serde_json::to_string_pretty(&to_file(problem))
        .map_err(|e| Error::Malformed(format!("cannot serialize problem: {e}")))
}

pub fn problem_from_str(text: &str) -> Result<ContextualProblem> {
    let file: ProblemFile = serde_json::from_str(text)
        .map_err(|e| Error::Malformed(format!("invalid problem document: {e}")))?;
    from_file(file)
}

pub fn save_problem(problem: &ContextualProblem, path: &Path) -> Result<()> {
    let text = problem_to_string(problem)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_problem(path: &Path) -> Result<ContextualProblem> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ProblemFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    from_file(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{problem_from_representation, uniform};

    #[test]
    fn round_trip_awkward_doubles() {
        let feats = vec![
            0.1,
            1.0 / 3.0,
            -2.0f64.sqrt(),
            1e-300,
            std::f64::consts::PI,
            -0.0,
            123456789.123456789,
            f64::EPSILON,
        ];
        let rep = FiniteRepresentation::new(2, 2, 2, feats, vec![0.7, -0.3], "awkward").unwrap();
        let p = problem_from_representation("rt", uniform(2), rep, 0.3).unwrap();
        let back = problem_from_str(&problem_to_string(&p).unwrap()).unwrap();
        assert_eq!(p, back);
        let (a, b) = (p.finite_rep(0).unwrap(), back.finite_rep(0).unwrap());
        for (x, y) in a.features.iter().zip(&b.features) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rejects_shape_mismatch() {
        let rep = FiniteRepresentation::new(1, 1, 2, vec![1.0, 0.0], vec![1.0, 0.0], "r").unwrap();
        let p = problem_from_representation("s", vec![1.0], rep, 0.0).unwrap();
        let text = problem_to_string(&p).unwrap().replace("\"shape\": [\n        1,\n        1,\n        2", "\"shape\": [\n        1,\n        1,\n        3");
        assert!(problem_from_str(&text).is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        let rep = FiniteRepresentation::new(1, 1, 1, vec![1.0], vec![1.0], "r").unwrap();
        let p = problem_from_representation("u", vec![1.0], rep, 0.0).unwrap();
        let text = problem_to_string(&p)
            .unwrap()
            .replacen('{', "{\"surprise\": 1,", 1);
        assert!(matches!(problem_from_str(&text), Err(Error::Malformed(_))));
    }
}
