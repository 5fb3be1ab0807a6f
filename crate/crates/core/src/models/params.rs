use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttributeSpace, QMatrix, ResponseProbTable, ResponseSpec};
use crate::error::{Error, Result};

/// One LCDM effect: the product of the listed attributes (0-based) times `weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcdmTerm {
    pub attributes: Vec<usize>,
    pub weight: f64,
}

/// Structural parameters of one diagnostic classification model family.
///
/// Per-attribute arrays are `J x K`, with `null` (None) wherever the Q-matrix
/// has a zero; the model file is this enum serialized as JSON with a
/// `family` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParams {
    Dina {
        slip: Vec<f64>,
        guess: Vec<f64>,
    },
    Dino {
        slip: Vec<f64>,
        guess: Vec<f64>,
    },
    /// Item-attribute slip/guess pairs. The textbook form with one pair per
    /// attribute is [`ModelParams::nida_per_attribute`].
    Nida {
        slip: Vec<Vec<Option<f64>>>,
        guess: Vec<Vec<Option<f64>>>,
    },
    ReducedNcRum {
        phi: Vec<f64>,
        penalty: Vec<Vec<Option<f64>>>,
    },
    Crum {
        intercept: Vec<f64>,
        slope: Vec<Vec<Option<f64>>>,
    },
    /// Log-linear model with all listed interaction terms; unlisted terms are
    /// zero. `p = logistic(sum(terms) + intercept)`.
    Lcdm {
        intercept: Vec<f64>,
        terms: Vec<Vec<LcdmTerm>>,
    },
    Saturated {
        table: ResponseProbTable,
    },
}

/// Family tag without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Dina,
    Dino,
    Nida,
    ReducedNcRum,
    Crum,
    Lcdm,
    Saturated,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dina" => Family::Dina,
            "dino" => Family::Dino,
            "nida" => Family::Nida,
            "reduced_nc_rum" | "nc_rum" | "ncrum" => Family::ReducedNcRum,
            "crum" | "c_rum" => Family::Crum,
            "lcdm" => Family::Lcdm,
            "saturated" => Family::Saturated,
            other => return Err(Error::Domain(format!("unknown model family {other:?}"))),
        })
    }
}

/// Conjunctive ideal response: 1 iff every required attribute is present.
pub fn ideal_response_dina(profile: &[usize], qrow: &[u8]) -> Result<u8> {
    check_binary_profile(profile, qrow)?;
    Ok(u8::from(
        profile.iter().zip(qrow).all(|(&a, &q)| a >= q as usize),
    ))
}

/// Disjunctive ideal response: 1 iff at least one required attribute is present.
/// An empty requirement gives 0 (the empty product in `1 - prod (1-a)^q` is 1).
pub fn ideal_response_dino(profile: &[usize], qrow: &[u8]) -> Result<u8> {
    check_binary_profile(profile, qrow)?;
    Ok(u8::from(
        profile.iter().zip(qrow).any(|(&a, &q)| q == 1 && a == 1),
    ))
}

fn check_binary_profile(profile: &[usize], qrow: &[u8]) -> Result<()> {
    if profile.len() != qrow.len() {
        return Err(Error::Domain(format!(
            "profile length {} != Q-row length {}",
            profile.len(),
            qrow.len()
        )));
    }
    if profile.iter().any(|&a| a > 1) {
        return Err(Error::Unsupported(
            "ideal responses need binary attributes".into(),
        ));
    }
    Ok(())
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn open_unit(name: &str, item: usize, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} for item {} is {v}; must lie in (0,1)",
            item + 1
        )))
    }
}

fn check_len<T>(name: &str, v: &[T], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} has {} entries, expected {n}",
            v.len()
        )))
    }
}

/// Checks a `J x K` optional array: present exactly where `q` loads.
fn check_loaded(name: &str, q: &QMatrix, m: &[Vec<Option<f64>>], unit: bool) -> Result<()> {
    check_len(name, m, q.n_items())?;
    for (j, row) in m.iter().enumerate() {
        check_len(name, row, q.n_attributes())?;
        for (k, v) in row.iter().enumerate() {
            match (q.loads(j, k), v) {
                (true, Some(x)) => {
                    if unit {
                        open_unit(name, j, *x)?;
                    } else if !x.is_finite() {
                        return Err(Error::Domain(format!(
                            "{name}[{},{}] is not finite",
                            j + 1,
                            k + 1
                        )));
                    }
                }
                (true, None) => {
                    return Err(Error::Domain(format!(
                        "{name} missing for item {} attribute {}",
                        j + 1,
                        k + 1
                    )))
                }
                (false, Some(_)) => {
                    return Err(Error::Domain(format!(
                        "{name} given for item {} attribute {} but Q has 0 there",
                        j + 1,
                        k + 1
                    )))
                }
                (false, None) => {}
            }
        }
    }
    Ok(())
}

impl ModelParams {
    /// NIDA with a single (slip, guess) pair per attribute, shared across items.
    pub fn nida_per_attribute(q: &QMatrix, slip: &[f64], guess: &[f64]) -> Self {
        let expand = |v: &[f64]| {
            q.rows()
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(v)
                        .map(|(&l, &x)| (l == 1).then_some(x))
                        .collect()
                })
                .collect()
        };
        ModelParams::Nida {
            slip: expand(slip),
            guess: expand(guess),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelParams::Dina { .. } => Family::Dina,
            ModelParams::Dino { .. } => Family::Dino,
            ModelParams::Nida { .. } => Family::Nida,
            ModelParams::ReducedNcRum { .. } => Family::ReducedNcRum,
            ModelParams::Crum { .. } => Family::Crum,
            ModelParams::Lcdm { .. } => Family::Lcdm,
            ModelParams::Saturated { .. } => Family::Saturated,
        }
    }

    /// Checks shapes, ranges and Q-compatibility.
    pub fn validate(&self, q: &QMatrix) -> Result<()> {
        let j = q.n_items();
        match self {
            ModelParams::Dina { slip, guess } | ModelParams::Dino { slip, guess } => {
                check_len("slip", slip, j)?;
                check_len("guess", guess, j)?;
                for (i, (&s, &g)) in slip.iter().zip(guess).enumerate() {
                    open_unit("slip", i, s)?;
                    open_unit("guess", i, g)?;
                }
            }
            ModelParams::Nida { slip, guess } => {
                check_loaded("slip", q, slip, true)?;
                check_loaded("guess", q, guess, true)?;
            }
            ModelParams::ReducedNcRum { phi, penalty } => {
                check_len("phi", phi, j)?;
                for (i, &p) in phi.iter().enumerate() {
                    open_unit("phi", i, p)?;
                }
                check_loaded("penalty", q, penalty, true)?;
            }
            ModelParams::Crum { intercept, slope } => {
                check_len("intercept", intercept, j)?;
                if intercept.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Domain("non-finite intercept".into()));
                }
                check_loaded("slope", q, slope, false)?;
            }
            ModelParams::Lcdm { intercept, terms } => {
                check_len("intercept", intercept, j)?;
                check_len("terms", terms, j)?;
                for (i, item_terms) in terms.iter().enumerate() {
                    if !intercept[i].is_finite() {
                        return Err(Error::Domain(format!(
                            "non-finite intercept for item {}",
                            i + 1
                        )));
                    }
                    for t in item_terms {
                        if t.attributes.is_empty() || !t.weight.is_finite() {
                            return Err(Error::Domain(format!(
                                "malformed LCDM term for item {}",
                                i + 1
                            )));
                        }
                        if let Some(&k) = t
                            .attributes
                            .iter()
                            .find(|&&k| k >= q.n_attributes() || !q.loads(i, k))
                        {
                            return Err(Error::Domain(format!(
                                "LCDM term on attribute {} for item {} not permitted by Q",
                                k + 1,
                                i + 1
                            )));
                        }
                    }
                }
            }
            ModelParams::Saturated { table } => {
                check_len("table items", table.categories(), j)?;
            }
        }
        Ok(())
    }

    /// Response distribution of item `item` for the class with `profile`.
    ///
    /// Parametric families return `(1 - p, p)`; the saturated family returns
    /// the stored column.
    pub fn response_prob(
        &self,
        q: &QMatrix,
        space: &AttributeSpace,
        item: usize,
        profile: &[usize],
    ) -> Result<Vec<f64>> {
        if let ModelParams::Saturated { table } = self {
            let class = space.index(profile)?;
            if class >= table.n_classes() {
                return Err(Error::Domain(format!(
                    "class {class} outside saturated table"
                )));
            }
            return Ok(table.dist(item, class).to_vec());
        }
        if !space.is_binary() {
            return Err(Error::Unsupported(format!(
                "{:?} needs binary attributes; use a saturated table",
                self.family()
            )));
        }
        let qrow = q.row(item);
        let present = |k: usize| profile[k] == 1;
        let p = match self {
            ModelParams::Dina { slip, guess } => {
                if ideal_response_dina(profile, qrow)? == 1 {
                    1.0 - slip[item]
                } else {
                    guess[item]
                }
            }
            ModelParams::Dino { slip, guess } => {
                if ideal_response_dino(profile, qrow)? == 1 {
                    1.0 - slip[item]
                } else {
                    guess[item]
                }
            }
            ModelParams::Nida { slip, guess } => {
                q.required(item).into_iter().fold(1.0, |acc, k| {
                    let factor = if present(k) {
                        1.0 - slip[item][k].unwrap_or(0.0)
                    } else {
                        guess[item][k].unwrap_or(1.0)
                    };
                    acc * factor
                })
            }
            ModelParams::ReducedNcRum { phi, penalty } => q
                .required(item)
                .into_iter()
                .filter(|&k| !present(k))
                .fold(phi[item], |acc, k| acc * penalty[item][k].unwrap_or(1.0)),
            ModelParams::Crum { intercept, slope } => {
                let eta = q
                    .required(item)
                    .into_iter()
                    .filter(|&k| present(k))
                    .fold(intercept[item], |acc, k| {
                        acc + slope[item][k].unwrap_or(0.0)
                    });
                logistic(eta)
            }
            ModelParams::Lcdm { intercept, terms } => {
                let eta = terms[item]
                    .iter()
                    .filter(|t| t.attributes.iter().all(|&k| qrow[k] == 1 && present(k)))
                    .fold(intercept[item], |acc, t| acc + t.weight);
                logistic(eta)
            }
            ModelParams::Saturated { .. } => unreachable!(),
        };
        Ok(vec![1.0 - p, p])
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Materializes `p_{j,a}^y` for every item and class of `space`.
pub fn build_prob_table(
    model: &ModelParams,
    q: &QMatrix,
    space: &AttributeSpace,
    spec: &ResponseSpec,
) -> Result<ResponseProbTable> {
    if q.n_attributes() != space.n_attributes() {
        return Err(Error::Domain(format!(
            "Q has {} attributes, space has {}",
            q.n_attributes(),
            space.n_attributes()
        )));
    }
    if spec.n_items() != q.n_items() {
        return Err(Error::Domain(format!(
            "response spec has {} items, Q has {}",
            spec.n_items(),
            q.n_items()
        )));
    }
    model.validate(q)?;
    if let ModelParams::Saturated { table } = model {
        if table.categories() != spec.categories() || table.n_classes() != space.n_classes() {
            return Err(Error::Domain(
                "saturated table does not match space/response spec".into(),
            ));
        }
        return Ok(table.clone());
    }
    if !spec.is_binary() {
        return Err(Error::Unsupported(
            "parametric families are binary-response only; use a saturated table".into(),
        ));
    }
    let profiles: Vec<Vec<usize>> = space.profiles().collect();
    let probs = (0..q.n_items())
        .map(|j| {
            profiles
                .iter()
                .map(|a| model.response_prob(q, space, j, a))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ResponseProbTable::new(probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q3() -> QMatrix {
        QMatrix::new(vec![vec![1, 1, 0]]).unwrap()
    }

    #[test]
    fn dina_ideal_response() {
        assert_eq!(ideal_response_dina(&[1, 1, 0], &[1, 1, 0]).unwrap(), 1);
        assert_eq!(ideal_response_dina(&[1, 0, 0], &[1, 1, 0]).unwrap(), 0);
        assert_eq!(ideal_response_dina(&[1, 1, 1], &[0, 0, 0]).unwrap(), 1);
        assert!(matches!(
            ideal_response_dina(&[2, 0, 0], &[1, 0, 0]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn dino_ideal_response() {
        assert_eq!(ideal_response_dino(&[1, 0, 0], &[1, 1, 0]).unwrap(), 1);
        assert_eq!(ideal_response_dino(&[0, 0, 1], &[1, 1, 0]).unwrap(), 0);
        assert_eq!(ideal_response_dino(&[0, 0, 0], &[0, 0, 0]).unwrap(), 0);
    }

    #[test]
    fn nida_item_ten() {
        let q = q3();
        let space = AttributeSpace::binary(3).unwrap();
        let m = ModelParams::Nida {
            slip: vec![vec![Some(0.1), Some(0.1), None]],
            guess: vec![vec![Some(0.5), Some(0.5), None]],
        };
        let p = |a: [usize; 3]| m.response_prob(&q, &space, 0, &a).unwrap()[1];
        assert!((p([1, 1, 0]) - 0.81).abs() < 1e-15);
        assert!((p([1, 0, 1]) - 0.45).abs() < 1e-15);
        assert!((p([0, 0, 1]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ncrum_item_ten() {
        let q = q3();
        let space = AttributeSpace::binary(3).unwrap();
        let m = ModelParams::ReducedNcRum {
            phi: vec![0.9],
            penalty: vec![vec![Some(0.5), Some(0.7), None]],
        };
        let p = m.response_prob(&q, &space, 0, &[0, 0, 1]).unwrap()[1];
        assert!((p - 0.315).abs() < 1e-15);
    }

    #[test]
    fn lcdm_uses_additive_intercept() {
        let q = QMatrix::new(vec![vec![1, 0, 0]]).unwrap();
        let space = AttributeSpace::binary(3).unwrap();
        let m = ModelParams::Lcdm {
            intercept: vec![-2.0],
            terms: vec![vec![LcdmTerm {
                attributes: vec![0],
                weight: 4.0,
            }]],
        };
        let hi = m.response_prob(&q, &space, 0, &[1, 0, 0]).unwrap()[1];
        let lo = m.response_prob(&q, &space, 0, &[0, 1, 1]).unwrap()[1];
        assert!((hi - 0.8807970779778823).abs() < 1e-12);
        assert!((lo - 0.11920292202211755).abs() < 1e-12);
    }

    #[test]
    fn crum_is_main_effect_logistic() {
        let q = QMatrix::new(vec![vec![1, 1]]).unwrap();
        let space = AttributeSpace::binary(2).unwrap();
        let m = ModelParams::Crum {
            intercept: vec![-1.0],
            slope: vec![vec![Some(0.5), Some(1.5)]],
        };
        let p = m.response_prob(&q, &space, 0, &[1, 1]).unwrap()[1];
        assert!((p - logistic(1.0)).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let q = q3();
        let bad = ModelParams::Dina {
            slip: vec![1.2],
            guess: vec![0.1],
        };
        assert!(matches!(bad.validate(&q), Err(Error::Domain(_))));
        let misplaced = ModelParams::ReducedNcRum {
            phi: vec![0.9],
            penalty: vec![vec![Some(0.5), Some(0.7), Some(0.3)]],
        };
        assert!(misplaced.validate(&q).is_err());
        let r_one = ModelParams::ReducedNcRum {
            phi: vec![0.9],
            penalty: vec![vec![Some(1.0), Some(0.7), None]],
        };
        assert!(r_one.validate(&q).is_err());
    }

    #[test]
    fn dina_with_slip_equal_guess_is_flat() {
        let q = QMatrix::new(vec![vec![1]]).unwrap();
        let space = AttributeSpace::binary(1).unwrap();
        let m = ModelParams::Dina {
            slip: vec![0.5],
            guess: vec![0.5],
        };
        let t = build_prob_table(&m, &q, &space, &ResponseSpec::binary(1)).unwrap();
        assert_eq!(t.dist(0, 0), &[0.5, 0.5]);
        assert_eq!(t.dist(0, 1), &[0.5, 0.5]);
    }

    #[test]
    fn saturated_is_copied() {
        let q = QMatrix::new(vec![vec![1]]).unwrap();
        let space = AttributeSpace::binary(1).unwrap();
        let table =
            ResponseProbTable::new(vec![vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.3, 0.1]]]).unwrap();
        let m = ModelParams::Saturated {
            table: table.clone(),
        };
        let built = build_prob_table(&m, &q, &space, &ResponseSpec::new(vec![3]).unwrap()).unwrap();
        assert_eq!(built, table);
    }

    #[test]
    fn parametric_multicategory_rejected() {
        let q = QMatrix::new(vec![vec![1]]).unwrap();
        let space = AttributeSpace::binary(1).unwrap();
        let m = ModelParams::Dina {
            slip: vec![0.1],
            guess: vec![0.2],
        };
        let r = build_prob_table(&m, &q, &space, &ResponseSpec::new(vec![3]).unwrap());
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn model_file_round_trip() {
        let m = ModelParams::ReducedNcRum {
            phi: vec![0.9],
            penalty: vec![vec![Some(0.5), Some(0.7), None]],
        };
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"family\":\"reduced_nc_rum\""));
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
