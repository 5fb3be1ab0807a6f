//! Exact model tables in, exact structure out.

use dcm::designs::{self, Design};
use dcm::harness::flatten_params;
use dcm::inference::{
    back_solve_params, cluster_partial_info, reconstruct_q, ClusterOptions, Coding,
};
use dcm::models::{build_prob_table, true_partial_info, AttributeSpace, Partition, QMatrix};

fn all_designs() -> Vec<Design> {
    ["nida", "reduced_ncrum", "lcdm"]
        .iter()
        .map(|n| designs::by_name(n).unwrap())
        .collect()
}

#[test]
fn clustering_exact_tables_reproduces_true_partial_info() {
    for d in all_designs() {
        let (truth, _) = d.truth().unwrap();
        for j in 0..truth.n_items() {
            let est = cluster_partial_info(&truth, j, None, &ClusterOptions::default());
            assert_eq!(
                est,
                true_partial_info(&truth, j),
                "{} item {}",
                d.name,
                j + 1
            );
        }
    }
}

#[test]
fn back_solving_exact_tables_rebuilds_them() {
    for d in all_designs() {
        let (truth, _) = d.truth().unwrap();
        let solved =
            back_solve_params(&truth, &d.q, d.model.family(), &d.reported_profiles()).unwrap();
        assert!(
            solved.residuals.iter().all(|&r| r < 1e-10),
            "{}: {:?}",
            d.name,
            solved.residuals
        );
        let rebuilt = build_prob_table(&solved.params, &d.q, d.space(), &d.response_spec())
            .unwrap()
            .restrict_classes(&d.reported_classes())
            .unwrap();
        for j in 0..truth.n_items() {
            for a in 0..truth.n_classes() {
                let diff = (rebuilt.positive(j, a) - truth.positive(j, a)).abs();
                assert!(
                    diff < 1e-10,
                    "{} item {} class {}: {diff:e}",
                    d.name,
                    j + 1,
                    a + 1
                );
            }
        }
    }
}

#[test]
fn back_solved_parameters_match_the_design() {
    // NIDA's per-attribute values within an item are not separately
    // identified, so only the single-attribute families are compared by name.
    for name in ["reduced_ncrum", "lcdm"] {
        let d = designs::by_name(name).unwrap();
        let (truth, _) = d.truth().unwrap();
        let solved =
            back_solve_params(&truth, &d.q, d.model.family(), &d.reported_profiles()).unwrap();
        let want = flatten_params(&d.model);
        let got = flatten_params(&solved.params);
        assert_eq!(want.len(), got.len(), "{name}");
        for ((lw, w), (lg, g)) in want.iter().zip(&got) {
            assert_eq!(lw, lg);
            assert!((w - g).abs() < 1e-10, "{name} {lw}: {w} vs {g}");
        }
    }
}

#[test]
fn reconstruct_recovers_nida_q_under_true_coding() {
    let d = designs::nida();
    let (truth, _) = d.truth().unwrap();
    let parts: Vec<Partition> = (0..truth.n_items())
        .map(|j| true_partial_info(&truth, j))
        .collect();
    let rec = reconstruct_q(&parts, d.space(), &Coding::Given(d.reported_classes())).unwrap();
    assert!(rec.uninformative.is_empty());
    assert_eq!(rec.q_matrix().unwrap(), d.q);
}

/// Level patterns of the five-class real-data cluster table: per item, the
/// level (1-4) of classes C1..C5.
const SOCIAL_LEVELS: [[u8; 5]; 13] = [
    [2, 2, 2, 1, 2],
    [3, 2, 2, 1, 3],
    [3, 2, 2, 1, 3],
    [3, 2, 3, 1, 4],
    [2, 1, 1, 1, 2],
    [2, 1, 1, 1, 2],
    [3, 1, 2, 1, 4],
    [3, 1, 2, 1, 4],
    [1, 1, 2, 1, 2],
    [1, 1, 2, 1, 2],
    [1, 1, 2, 1, 2],
    [2, 1, 2, 1, 3],
    [2, 1, 2, 1, 3],
];

#[test]
fn reconstruct_recovers_published_q_from_cluster_table() {
    let parts: Vec<Partition> = SOCIAL_LEVELS
        .iter()
        .map(|row| Partition::from_labels(&row.iter().map(|&l| l as usize).collect::<Vec<_>>()))
        .collect();
    let space = AttributeSpace::binary(3).unwrap();
    let coding: Vec<usize> = [[1, 1, 0], [1, 0, 0], [1, 0, 1], [0, 0, 0], [1, 1, 1]]
        .iter()
        .map(|p| space.index(p).unwrap())
        .collect();
    let rec = reconstruct_q(&parts, &space, &Coding::Given(coding)).unwrap();
    let expected = QMatrix::new(vec![
        vec![1, 0, 0],
        vec![1, 1, 0],
        vec![1, 1, 0],
        vec![1, 1, 1],
        vec![0, 1, 0],
        vec![0, 1, 0],
        vec![0, 1, 1],
        vec![0, 1, 1],
        vec![0, 0, 1],
        vec![0, 0, 1],
        vec![0, 0, 1],
        vec![0, 1, 1],
        vec![0, 1, 1],
    ])
    .unwrap();
    assert_eq!(rec.q_matrix().unwrap(), expected);
}

#[test]
fn auto_coding_is_consistent_with_cluster_table() {
    let parts: Vec<Partition> = SOCIAL_LEVELS
        .iter()
        .map(|row| Partition::from_labels(&row.iter().map(|&l| l as usize).collect::<Vec<_>>()))
        .collect();
    let space = AttributeSpace::binary(3).unwrap();
    let auto = reconstruct_q(&parts, &space, &Coding::Auto).unwrap();
    let given = reconstruct_q(&parts, &space, &Coding::Given(auto.coding.clone())).unwrap();
    assert_eq!(auto.rows, given.rows);
    assert!(auto.uninformative.is_empty());
}
