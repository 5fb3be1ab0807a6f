use nalgebra::DMatrix;
use proptest::prelude::*;

use dcm::identifiability::{
    build_t_matrix, check_three_identities, check_two_valued_binary, CheckOptions, ItemPartition,
    DEFAULT_T_ROW_CAP,
};
use dcm::inference::{hungarian, hungarian_rect};
use dcm::linalg::numeric_rank;
use dcm::models::{
    build_prob_table, AttributeSpace, ModelParams, QMatrix, ResponseProbTable, ResponseSpec,
};
use dcm::simulate::MixtureWeights;

fn normalize(raw: Vec<f64>) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Tables with 1-4 items, 1-5 classes and 2-3 categories per item.
fn table_strategy() -> impl Strategy<Value = ResponseProbTable> {
    (1usize..=4, 1usize..=5)
        .prop_flat_map(|(j, m)| {
            proptest::collection::vec(2usize..=3, j).prop_map(move |cats| (cats, m))
        })
        .prop_flat_map(|(cats, m)| {
            let items: Vec<_> = cats
                .iter()
                .map(|&k| proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, k), m))
                .collect();
            items
        })
        .prop_map(|raw| {
            let probs = raw
                .into_iter()
                .map(|item| item.into_iter().map(normalize).collect())
                .collect();
            ResponseProbTable::new(probs).unwrap()
        })
}

fn q_strategy() -> impl Strategy<Value = QMatrix> {
    (1usize..=3, 1usize..=6).prop_flat_map(|(k, j)| {
        proptest::collection::vec(1u32..(1 << k), j).prop_map(move |rows| {
            QMatrix::new(
                rows.iter()
                    .map(|r| (0..k).map(|b| ((r >> b) & 1) as u8).collect())
                    .collect(),
            )
            .unwrap()
        })
    })
}

fn per_attribute(q: &QMatrix, values: &[f64]) -> Vec<Vec<Option<f64>>> {
    q.rows()
        .iter()
        .enumerate()
        .map(|(j, row)| {
            row.iter()
                .enumerate()
                .map(|(k, &x)| (x == 1).then(|| values[(j * 7 + k) % values.len()]))
                .collect()
        })
        .collect()
}

fn model_strategy() -> impl Strategy<Value = (QMatrix, ModelParams)> {
    (
        q_strategy(),
        0usize..4,
        proptest::collection::vec(0.05f64..0.95, 24),
    )
        .prop_map(|(q, family, v)| {
            let j = q.n_items();
            let model = match family {
                0 => ModelParams::Dina {
                    slip: v[..j].iter().map(|x| x / 2.0).collect(),
                    guess: v[j..2 * j].iter().map(|x| x / 2.0).collect(),
                },
                1 => ModelParams::ReducedNcRum {
                    phi: v[..j].to_vec(),
                    penalty: per_attribute(&q, &v[12..]),
                },
                2 => ModelParams::Crum {
                    intercept: v[..j].iter().map(|x| 6.0 * x - 3.0).collect(),
                    slope: per_attribute(&q, &v[12..].iter().map(|x| 4.0 * x).collect::<Vec<_>>()),
                },
                _ => ModelParams::Nida {
                    slip: per_attribute(&q, &v[..12]),
                    guess: per_attribute(&q, &v[12..]),
                },
            };
            (q, model)
        })
}

/// Pattern probability by direct enumeration over classes.
fn brute_force_pattern(
    table: &ResponseProbTable,
    weights: &MixtureWeights,
    items: &[usize],
    pattern: &[usize],
) -> f64 {
    (0..table.n_classes())
        .map(|a| {
            weights.as_slice()[a]
                * items
                    .iter()
                    .zip(pattern)
                    .map(|(&j, &y)| table.dist(j, a)[y])
                    .product::<f64>()
        })
        .sum()
}

fn patterns(cats: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &k in cats {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    permutations(n - 1)
        .into_iter()
        .flat_map(|p| {
            (0..n).map(move |i| {
                let mut q = p.clone();
                q.insert(i, n - 1);
                q
            })
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn model_tables_are_normalized((q, model) in model_strategy()) {
        let space = AttributeSpace::binary(q.n_attributes()).unwrap();
        let table = build_prob_table(&model, &q, &space, &ResponseSpec::binary(q.n_items())).unwrap();
        for j in 0..table.n_items() {
            for a in 0..table.n_classes() {
                let d = table.dist(j, a);
                prop_assert!(d.iter().all(|&p| (0.0..=1.0).contains(&p)));
                prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn t_matrix_of_a_union_is_the_khatri_rao_product(table in table_strategy(), split in 0usize..4) {
        let j = table.n_items();
        prop_assume!(j >= 2);
        let cut = 1 + split % (j - 1);
        let left: Vec<usize> = (0..cut).collect();
        let right: Vec<usize> = (cut..j).collect();
        let all: Vec<usize> = (0..j).collect();
        let tl = build_t_matrix(&table, &left, DEFAULT_T_ROW_CAP).unwrap().matrix;
        let tr = build_t_matrix(&table, &right, DEFAULT_T_ROW_CAP).unwrap().matrix;
        let t = build_t_matrix(&table, &all, DEFAULT_T_ROW_CAP).unwrap().matrix;
        prop_assert_eq!(t.nrows(), tl.nrows() * tr.nrows());
        for r1 in 0..tl.nrows() {
            for r2 in 0..tr.nrows() {
                for c in 0..t.ncols() {
                    let want = tl[(r1, c)] * tr[(r2, c)];
                    prop_assert!((t[(r1 * tr.nrows() + r2, c)] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn t_times_pi_matches_enumeration(table in table_strategy(), seed in any::<u64>()) {
        let m = table.n_classes();
        let raw: Vec<f64> = (0..m).map(|a| 1.0 + ((seed >> (a * 8)) & 0xff) as f64).collect();
        let weights = MixtureWeights::new(normalize(raw)).unwrap();
        let items: Vec<usize> = (0..table.n_items()).collect();
        let marginal = build_t_matrix(&table, &items, DEFAULT_T_ROW_CAP).unwrap().marginal(&weights).unwrap();
        let cats: Vec<usize> = items.iter().map(|&j| table.categories()[j]).collect();
        for (row, pattern) in patterns(&cats).iter().enumerate() {
            let want = brute_force_pattern(&table, &weights, &items, pattern);
            prop_assert!((marginal[row] - want).abs() < 1e-12);
        }
        prop_assert!((marginal.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_ignores_permutations_and_column_scaling(
        rows in 2usize..7,
        cols in 2usize..6,
        inner in 1usize..5,
        seed in proptest::collection::vec(-1.0f64..1.0, 60),
        scales in proptest::collection::vec(1e-3f64..10.0, 6),
        shift in 0usize..100,
    ) {
        let a = DMatrix::from_fn(rows, inner, |i, k| seed[(i * 5 + k) % 60]);
        let b = DMatrix::from_fn(inner, cols, |k, c| seed[(30 + k * 7 + c) % 60]);
        let m = a * b;
        let base = numeric_rank(&m).unwrap();
        let row_perm: Vec<usize> = (0..rows).map(|i| (i + shift) % rows).rev().collect();
        let col_perm: Vec<usize> = (0..cols).map(|c| (c + shift / 7) % cols).collect();
        let moved = DMatrix::from_fn(rows, cols, |i, c| m[(row_perm[i], col_perm[c])] * scales[c]);
        prop_assert_eq!(numeric_rank(&moved).unwrap(), base);
    }

    #[test]
    fn hungarian_is_optimal_against_enumeration(
        n in 1usize..=6,
        extra in 0usize..=2,
        raw in proptest::collection::vec(0.0f64..10.0, 48),
    ) {
        let cols = n + extra;
        let cost: Vec<Vec<f64>> = (0..n).map(|i| (0..cols).map(|j| raw[i * 8 + j]).collect()).collect();
        let got = hungarian(&cost);
        let mut seen = vec![false; cols];
        for &c in &got {
            prop_assert!(!seen[c]);
            seen[c] = true;
        }
        let got_cost: f64 = got.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        // Every injection rows -> cols is a prefix of some permutation of cols.
        let best = permutations(cols)
            .iter()
            .map(|p| (0..n).map(|i| cost[i][p[i]]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((got_cost - best).abs() < 1e-9, "{} vs {}", got_cost, best);
    }

    #[test]
    fn rectangular_assignment_leaves_surplus_rows_unmatched(
        rows in 2usize..=6,
        raw in proptest::collection::vec(0.0f64..10.0, 36),
    ) {
        let cols = rows - 1;
        let cost: Vec<Vec<f64>> = (0..rows).map(|i| (0..cols).map(|j| raw[i * 6 + j]).collect()).collect();
        let got = hungarian_rect(&cost);
        prop_assert_eq!(got.iter().filter(|x| x.is_none()).count(), 1);
        let got_cost: f64 = got.iter().enumerate().filter_map(|(i, j)| j.map(|j| cost[i][j])).sum();
        let best = permutations(rows)
            .iter()
            .map(|p| (0..cols).map(|j| cost[p[j]][j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((got_cost - best).abs() < 1e-9);
    }

    #[test]
    fn three_identities_imply_two_valued_conditions_for_dina(
        k in 1usize..=3,
        extra in proptest::collection::vec(1u32..8, 0..3),
        sg in proptest::collection::vec(0.02f64..0.45, 24),
        w in proptest::collection::vec(0.05f64..1.0, 8),
    ) {
        let mut rows: Vec<Vec<u8>> = Vec::new();
        for _ in 0..3 {
            for a in 0..k {
                rows.push((0..k).map(|b| u8::from(a == b)).collect());
            }
        }
        for r in &extra {
            let row: Vec<u8> = (0..k).map(|b| ((r >> b) & 1) as u8).collect();
            if row.iter().any(|&x| x == 1) {
                rows.push(row);
            }
        }
        let q = QMatrix::new(rows).unwrap();
        let j = q.n_items();
        // s, g < 0.5 keeps s + g != 1.
        let model = ModelParams::Dina { slip: sg[..j].to_vec(), guess: sg[12..12 + j].to_vec() };
        let space = AttributeSpace::binary(k).unwrap();
        let table = build_prob_table(&model, &q, &space, &ResponseSpec::binary(j)).unwrap();
        let weights = MixtureWeights::new(normalize(w[..space.n_classes()].to_vec())).unwrap();
        prop_assert!(check_three_identities(&q).pass);
        let partition = ItemPartition::with_remainder((0..k).collect(), (k..2 * k).collect(), j).unwrap();
        let verdict = check_two_valued_binary(&table, &weights, Some(&partition), &CheckOptions::default()).unwrap();
        prop_assert!(verdict.pass, "{}", verdict);
    }
}
