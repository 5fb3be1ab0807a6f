//! Q-matrices, attribute spaces, model families and response-probability tables.

mod params;
mod partition;
mod qmatrix;
mod space;
mod table;

pub use params::{
    build_prob_table, ideal_response_dina, ideal_response_dino, logistic, Family, LcdmTerm,
    ModelParams,
};
pub use partition::Partition;
pub use qmatrix::QMatrix;
pub use space::{AttributeSpace, ResponseSpec, MAX_CLASSES};
pub use table::{round12, ResponseProbTable, NORMALIZATION_TOL};

pub(crate) use table::same_dist;

/// Partition of classes induced by item `item`: two classes share a block iff
/// their response distributions agree (compared after rounding to 12 decimals).
pub fn true_partial_info(table: &ResponseProbTable, item: usize) -> Partition {
    let mut reps: Vec<usize> = Vec::new();
    let mut labels = Vec::with_capacity(table.n_classes());
    for a in 0..table.n_classes() {
        let d = table.dist(item, a);
        match reps
            .iter()
            .position(|&r| same_dist(table.dist(item, r), d, None))
        {
            Some(b) => labels.push(b),
            None => {
                labels.push(reps.len());
                reps.push(a);
            }
        }
    }
    Partition::from_labels(&labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_attribute_item_splits_on_that_attribute() {
        let q = QMatrix::new(vec![vec![1, 0, 0]]).unwrap();
        let space = AttributeSpace::binary(3).unwrap();
        let m = ModelParams::nida_per_attribute(&q, &[0.1, 0.1, 0.1], &[0.1, 0.2, 0.3]);
        let t = build_prob_table(&m, &q, &space, &ResponseSpec::binary(1)).unwrap();
        let p = true_partial_info(&t, 0);
        assert_eq!(p.blocks(), &[vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
    }

    #[test]
    fn dina_conjunction_splits_by_ideal_response() {
        let q = QMatrix::new(vec![vec![1, 1, 0]]).unwrap();
        let space = AttributeSpace::binary(3).unwrap();
        let m = ModelParams::Dina {
            slip: vec![0.1],
            guess: vec![0.2],
        };
        let t = build_prob_table(&m, &q, &space, &ResponseSpec::binary(1)).unwrap();
        assert_eq!(
            true_partial_info(&t, 0).blocks(),
            &[vec![0, 1, 2, 3, 4, 5], vec![6, 7]]
        );
    }

    #[test]
    fn constant_item_is_one_block() {
        let q = QMatrix::new(vec![vec![1, 1]]).unwrap();
        let space = AttributeSpace::binary(2).unwrap();
        let m = ModelParams::Dina {
            slip: vec![0.3],
            guess: vec![0.7],
        };
        let t = build_prob_table(&m, &q, &space, &ResponseSpec::binary(1)).unwrap();
        assert_eq!(true_partial_info(&t, 0), Partition::single_block(4));
    }
}
