//! Structural parameters recovered from a response table by per-item
//! least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::models::{Family, LcdmTerm, ModelParams, QMatrix, ResponseProbTable};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackSolved {
    pub params: ModelParams,
    /// Per item, the Euclidean norm over classes of `p_fitted - p_hat`.
    pub residuals: Vec<f64>,
}

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn logit(p: f64) -> f64 {
    let p = clamp(p);
    (p / (1.0 - p)).ln()
}

/// Nonempty subsets of `attrs`, by size then lexicographically.
fn subsets(attrs: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u32..(1 << attrs.len()))
        .map(|mask| {
            attrs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &k)| k)
                .collect()
        })
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

fn solve(item: usize, rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Vec<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    let x = DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]);
    least_squares(&x, &DVector::from_vec(y))
        .map(|b| b.iter().copied().collect())
        .map_err(|message| Error::Singular { item, message })
}

fn group_mean(item: usize, p: &[f64], mask: &[bool], want: bool, what: &str) -> Result<f64> {
    let vals: Vec<f64> = p
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m == want)
        .map(|(&x, _)| x)
        .collect();
    if vals.is_empty() {
        return Err(Error::Singular {
            item,
            message: format!("no {what} class"),
        });
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Fits `family` to `table` given each class's binary attribute profile.
///
/// DINA/DINO: `1 - s` is the mean over capable classes and `g` the mean over
/// the rest. NIDA: one `(s_j, g_j)` pair per item, from regressing `log p` on
/// the counts of mastered and missing required attributes. Reduced NC-RUM:
/// `log p` on an intercept and the missing-attribute indicators. C-RUM: logit
/// `p` on an intercept and main effects. LCDM: logit `p` on an intercept and
/// every interaction of the required attributes.
pub fn back_solve_params(
    table: &ResponseProbTable,
    q: &QMatrix,
    family: Family,
    profiles: &[Vec<usize>],
) -> Result<BackSolved> {
    if !table.is_binary() {
        return Err(Error::Unsupported(
            "back-solving needs binary responses".into(),
        ));
    }
    if profiles.len() != table.n_classes() || q.n_items() != table.n_items() {
        return Err(Error::Domain("profiles, Q and table sizes disagree".into()));
    }
    if profiles.iter().flatten().any(|&v| v > 1)
        || profiles.iter().any(|p| p.len() != q.n_attributes())
    {
        return Err(Error::Domain(
            "profiles must be binary with one entry per attribute".into(),
        ));
    }
    let jn = table.n_items();
    let kn = q.n_attributes();
    let m = table.n_classes();
    let has = |a: usize, k: usize| profiles[a][k] == 1;
    let params = match family {
        Family::Dina | Family::Dino => {
            let mut slip = Vec::with_capacity(jn);
            let mut guess = Vec::with_capacity(jn);
            for j in 0..jn {
                let req = q.required(j);
                let p: Vec<f64> = (0..m).map(|a| table.positive(j, a)).collect();
                let capable: Vec<bool> = (0..m)
                    .map(|a| match family {
                        Family::Dina => req.iter().all(|&k| has(a, k)),
                        _ => req.iter().any(|&k| has(a, k)),
                    })
                    .collect();
                slip.push(1.0 - group_mean(j, &p, &capable, true, "capable")?);
                guess.push(group_mean(j, &p, &capable, false, "incapable")?);
            }
            match family {
                Family::Dina => ModelParams::Dina { slip, guess },
                _ => ModelParams::Dino { slip, guess },
            }
        }
        Family::Nida => {
            let mut slip = vec![vec![None; kn]; jn];
            let mut guess = vec![vec![None; kn]; jn];
            for j in 0..jn {
                let req = q.required(j);
                let mut rows = Vec::with_capacity(m);
                let mut y = Vec::with_capacity(m);
                for a in 0..m {
                    let c = req.iter().filter(|&&k| has(a, k)).count() as f64;
                    rows.push(vec![c, req.len() as f64 - c]);
                    y.push(clamp(table.positive(j, a)).ln());
                }
                let b = solve(j, rows, y)?;
                for &k in &req {
                    slip[j][k] = Some(1.0 - b[0].exp());
                    guess[j][k] = Some(b[1].exp());
                }
            }
            ModelParams::Nida { slip, guess }
        }
        Family::ReducedNcRum => {
            let mut phi = Vec::with_capacity(jn);
            let mut penalty = vec![vec![None; kn]; jn];
            for j in 0..jn {
                let req = q.required(j);
                let rows = (0..m)
                    .map(|a| {
                        std::iter::once(1.0)
                            .chain(req.iter().map(|&k| if has(a, k) { 0.0 } else { 1.0 }))
                            .collect()
                    })
                    .collect();
                let y = (0..m).map(|a| clamp(table.positive(j, a)).ln()).collect();
                let b = solve(j, rows, y)?;
                phi.push(b[0].exp());
                for (&k, bk) in req.iter().zip(&b[1..]) {
                    penalty[j][k] = Some(bk.exp());
                }
            }
            ModelParams::ReducedNcRum { phi, penalty }
        }
        Family::Crum => {
            let mut intercept = Vec::with_capacity(jn);
            let mut slope = vec![vec![None; kn]; jn];
            for j in 0..jn {
                let req = q.required(j);
                let rows = (0..m)
                    .map(|a| {
                        std::iter::once(1.0)
                            .chain(req.iter().map(|&k| profiles[a][k] as f64))
                            .collect()
                    })
                    .collect();
                let y = (0..m).map(|a| logit(table.positive(j, a))).collect();
                let b = solve(j, rows, y)?;
                intercept.push(b[0]);
                for (&k, bk) in req.iter().zip(&b[1..]) {
                    slope[j][k] = Some(*bk);
                }
            }
            ModelParams::Crum { intercept, slope }
        }
        Family::Lcdm => {
            let mut intercept = Vec::with_capacity(jn);
            let mut terms = Vec::with_capacity(jn);
            for j in 0..jn {
                let sets = subsets(&q.required(j));
                let rows = (0..m)
                    .map(|a| {
                        std::iter::once(1.0)
                            .chain(sets.iter().map(|s| {
                                if s.iter().all(|&k| has(a, k)) {
                                    1.0
                                } else {
                                    0.0
                                }
                            }))
                            .collect()
                    })
                    .collect();
                let y = (0..m).map(|a| logit(table.positive(j, a))).collect();
                let b = solve(j, rows, y)?;
                intercept.push(b[0]);
                terms.push(
                    sets.into_iter()
                        .zip(&b[1..])
                        .map(|(attributes, &weight)| LcdmTerm { attributes, weight })
                        .collect(),
                );
            }
            ModelParams::Lcdm { intercept, terms }
        }
        Family::Saturated => {
            return Err(Error::Unsupported(
                "the saturated family has no structural parameters".into(),
            ));
        }
    };
    let residuals = residuals(&params, table, q, profiles)?;
    Ok(BackSolved { params, residuals })
}

fn residuals(
    params: &ModelParams,
    table: &ResponseProbTable,
    q: &QMatrix,
    profiles: &[Vec<usize>],
) -> Result<Vec<f64>> {
    let space = crate::models::AttributeSpace::binary(q.n_attributes())?;
    (0..table.n_items())
        .map(|j| {
            let mut ss = 0.0;
            for (a, profile) in profiles.iter().enumerate() {
                let fit = params.response_prob(q, &space, j, profile)?[1];
                ss += (fit - table.positive(j, a)).powi(2);
            }
            Ok(ss.sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_prob_table, AttributeSpace, ResponseSpec};

    fn full_setup(q: &QMatrix, model: &ModelParams) -> (ResponseProbTable, Vec<Vec<usize>>) {
        let space = AttributeSpace::binary(q.n_attributes()).unwrap();
        let t = build_prob_table(model, q, &space, &ResponseSpec::binary(q.n_items())).unwrap();
        (t, space.profiles().collect())
    }

    #[test]
    fn dina_round_trip() {
        let q = QMatrix::new(vec![vec![1, 0], vec![1, 1], vec![0, 1]]).unwrap();
        let model = ModelParams::Dina {
            slip: vec![0.1, 0.2, 0.05],
            guess: vec![0.2, 0.1, 0.3],
        };
        let (t, prof) = full_setup(&q, &model);
        let r = back_solve_params(&t, &q, Family::Dina, &prof).unwrap();
        let ModelParams::Dina { slip, guess } = r.params else {
            panic!()
        };
        for (a, b) in slip.iter().zip([0.1, 0.2, 0.05]) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in guess.iter().zip([0.2, 0.1, 0.3]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(r.residuals.iter().all(|&x| x < 1e-12));
    }

    #[test]
    fn lcdm_needs_every_pattern() {
        let q = QMatrix::new(vec![vec![1, 1]]).unwrap();
        let t = ResponseProbTable::from_binary(&[vec![0.2, 0.5, 0.9]]).unwrap();
        let prof = vec![vec![0, 0], vec![1, 0], vec![1, 1]];
        match back_solve_params(&t, &q, Family::Lcdm, &prof) {
            Err(Error::Singular { item, .. }) => assert_eq!(item, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn subsets_order() {
        assert_eq!(subsets(&[0, 2]), vec![vec![0], vec![2], vec![0, 2]]);
    }
}
