//! The three three-attribute simulation designs (NIDA, reduced NC-RUM, LCDM)
//! used by the replication studies, plus their published class labels.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::{
    build_prob_table, AttributeSpace, LcdmTerm, ModelParams, QMatrix, ResponseProbTable,
    ResponseSpec,
};
use crate::simulate::MixtureWeights;

/// A complete generating model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub name: String,
    pub q: QMatrix,
    pub levels: AttributeSpace,
    pub model: ModelParams,
    /// Class proportions in mixed-radix class order.
    pub weights: MixtureWeights,
    /// Class indices listed in report order (`C1`, `C2`, ...). Only classes
    /// listed here are reported; defaults to the positive-weight classes.
    #[serde(default)]
    pub report_order: Option<Vec<usize>>,
}

impl Design {
    pub fn space(&self) -> &AttributeSpace {
        &self.levels
    }

    pub fn response_spec(&self) -> ResponseSpec {
        match &self.model {
            ModelParams::Saturated { table } => {
                ResponseSpec::new(table.categories().to_vec()).expect("table categories are >= 2")
            }
            _ => ResponseSpec::binary(self.q.n_items()),
        }
    }

    /// Full table over every class of the space.
    pub fn table(&self) -> Result<ResponseProbTable> {
        build_prob_table(&self.model, &self.q, &self.levels, &self.response_spec())
    }

    /// Reported classes, in report order.
    pub fn reported_classes(&self) -> Vec<usize> {
        self.report_order
            .clone()
            .unwrap_or_else(|| self.weights.support())
    }

    /// Table and weights over the reported classes.
    pub fn truth(&self) -> Result<(ResponseProbTable, MixtureWeights)> {
        let classes = self.reported_classes();
        Ok((
            self.table()?.restrict_classes(&classes)?,
            self.weights.restrict(&classes)?,
        ))
    }

    /// Attribute profile of each reported class.
    pub fn reported_profiles(&self) -> Vec<Vec<usize>> {
        self.reported_classes()
            .iter()
            .map(|&c| self.levels.profile(c))
            .collect()
    }
}

const P100: usize = 4;
const P010: usize = 2;
const P001: usize = 1;
const P110: usize = 6;
const P101: usize = 5;
const P011: usize = 3;
const P111: usize = 7;
const P000: usize = 0;

/// C1..C8 = 100, 010, 001, 110, 101, 011, 111, 000.
const EIGHT_CLASS_ORDER: [usize; 8] = [P100, P010, P001, P110, P101, P011, P111, P000];

fn rows(spec: &[[u8; 3]]) -> Vec<Vec<u8>> {
    spec.iter().map(|r| r.to_vec()).collect()
}

fn by_class(pairs: &[(usize, f64)]) -> Vec<f64> {
    let mut w = vec![0.0; 8];
    for &(c, v) in pairs {
        w[c] = v;
    }
    w
}

/// 13 items, item-specific slip/guess per loaded attribute.
pub fn nida() -> Design {
    let q = QMatrix::new(rows(&[
        [1, 0, 0],
        [1, 0, 0],
        [1, 0, 0],
        [0, 1, 0],
        [0, 1, 0],
        [0, 1, 0],
        [0, 0, 1],
        [0, 0, 1],
        [0, 0, 1],
        [1, 1, 0],
        [1, 0, 1],
        [0, 1, 1],
        [1, 1, 1],
    ]))
    .expect("static Q");
    let guess_single = [0.1, 0.2, 0.3];
    let mut slip = Vec::new();
    let mut guess = Vec::new();
    for j in 0..13 {
        let multi = q.required(j).len() > 1;
        slip.push(q.row(j).iter().map(|&l| (l == 1).then_some(0.1)).collect());
        guess.push(
            q.row(j)
                .iter()
                .enumerate()
                .map(|(k, &l)| (l == 1).then_some(if multi { 0.5 } else { guess_single[k] }))
                .collect(),
        );
    }
    let weights = by_class(&[
        (P100, 0.15),
        (P010, 0.15),
        (P001, 0.15),
        (P110, 0.1),
        (P101, 0.1),
        (P011, 0.1),
        (P111, 0.15),
        (P000, 0.1),
    ]);
    Design {
        name: "nida".into(),
        q,
        levels: AttributeSpace::binary(3).expect("static space"),
        model: ModelParams::Nida { slip, guess },
        weights: MixtureWeights::new(weights).expect("static weights"),
        report_order: Some(EIGHT_CLASS_ORDER.to_vec()),
    }
}

/// 15 items, five populated classes (101, 011 and 000 have zero weight).
pub fn reduced_ncrum() -> Design {
    let q = QMatrix::new(rows(&[
        [1, 0, 0],
        [1, 0, 0],
        [1, 0, 0],
        [0, 1, 0],
        [0, 1, 0],
        [0, 1, 0],
        [0, 0, 1],
        [0, 0, 1],
        [0, 0, 1],
        [1, 1, 0],
        [1, 1, 0],
        [1, 0, 1],
        [1, 0, 1],
        [0, 1, 1],
        [0, 1, 1],
    ]))
    .expect("static Q");
    let r: [[Option<f64>; 3]; 15] = [
        [Some(0.2), None, None],
        [Some(0.2), None, None],
        [Some(0.2), None, None],
        [None, Some(0.3), None],
        [None, Some(0.3), None],
        [None, Some(0.3), None],
        [None, None, Some(0.4)],
        [None, None, Some(0.4)],
        [None, None, Some(0.4)],
        [Some(0.5), Some(0.7), None],
        [Some(0.5), Some(0.7), None],
        [Some(0.6), None, Some(0.4)],
        [Some(0.6), None, Some(0.4)],
        [None, Some(0.5), Some(0.5)],
        [None, Some(0.5), Some(0.5)],
    ];
    let weights = by_class(&[
        (P100, 1.0 / 6.0),
        (P010, 1.0 / 6.0),
        (P001, 1.0 / 6.0),
        (P110, 1.0 / 6.0),
        (P111, 1.0 / 3.0),
    ]);
    Design {
        name: "reduced_ncrum".into(),
        q,
        levels: AttributeSpace::binary(3).expect("static space"),
        model: ModelParams::ReducedNcRum {
            phi: vec![0.9; 15],
            penalty: r.iter().map(|row| row.to_vec()).collect(),
        },
        weights: MixtureWeights::normalized(weights).expect("static weights"),
        report_order: Some(vec![P100, P010, P001, P110, P111]),
    }
}

fn term(attributes: &[usize], weight: f64) -> LcdmTerm {
    LcdmTerm {
        attributes: attributes.to_vec(),
        weight,
    }
}

/// 16 items with main effects, zero two-way interactions and one three-way item.
pub fn lcdm() -> Design {
    let q = QMatrix::new(rows(&[
        [1, 0, 0],
        [1, 0, 0],
        [1, 0, 0],
        [0, 1, 0],
        [0, 1, 0],
        [0, 1, 0],
        [0, 0, 1],
        [0, 0, 1],
        [0, 0, 1],
        [1, 1, 0],
        [1, 1, 0],
        [1, 0, 1],
        [1, 0, 1],
        [0, 1, 1],
        [0, 1, 1],
        [1, 1, 1],
    ]))
    .expect("static Q");
    let mut terms = Vec::new();
    for j in 0..16 {
        let req = q.required(j);
        terms.push(match req.len() {
            1 => vec![term(&req, 4.0)],
            2 => vec![term(&req[..1], 2.0), term(&req[1..], 2.0), term(&req, 0.0)],
            _ => vec![
                term(&[0], 1.0),
                term(&[1], 1.0),
                term(&[2], 1.0),
                term(&[0, 1], 0.0),
                term(&[0, 2], 0.0),
                term(&[1, 2], 0.0),
                term(&[0, 1, 2], 1.0),
            ],
        });
    }
    Design {
        name: "lcdm".into(),
        q,
        levels: AttributeSpace::binary(3).expect("static space"),
        model: ModelParams::Lcdm {
            intercept: vec![-2.0; 16],
            terms,
        },
        weights: MixtureWeights::uniform(8),
        report_order: Some(EIGHT_CLASS_ORDER.to_vec()),
    }
}

pub fn by_name(name: &str) -> Option<Design> {
    match name.to_ascii_lowercase().replace('-', "_").as_str() {
        "nida" => Some(nida()),
        "reduced_ncrum" | "ncrum" | "nc_rum" => Some(reduced_ncrum()),
        "lcdm" => Some(lcdm()),
        _ => None,
    }
}
