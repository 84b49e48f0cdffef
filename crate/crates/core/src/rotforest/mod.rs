//! Rotation Forest: decision trees trained on feature axes rotated by
//! per-subset PCA, averaged into an ensemble.

mod cv;
mod forest;
mod io;
mod rotation;
mod tree;

pub use cv::{cross_validate, stratified_folds, CvReport};
pub use forest::{train, train_member, train_parallel, Member, RotationForestConfig, RotationForestModel};
pub use io::{
    load_model, member_from_str, member_to_string, model_to_string, parse_model, save_model, FORMAT_VERSION,
};
pub use rotation::{build_rotation, member_rng, RotationMatrix};
pub use tree::{tree_train, DecisionTree, Node, TreeParams};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::features::{Class, FeatureTable};

/// Two overlapping Gaussian classes in 6 dimensions, alternating labels.
/// Class means differ by 0.8 in every coordinate; unit variance with
/// correlated pairs so axis-aligned trees benefit from rotation.
pub fn two_gaussian_table(rows: usize, seed: u64) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let names: Vec<String> = (0..6).map(|i| format!("x{i}")).collect();
    let mut table = FeatureTable::new(names);
    for i in 0..rows {
        let class = if i % 2 == 0 { Class::Interictal } else { Class::Preictal };
        let shift = if class == Class::Preictal { 0.8 } else { 0.0 };
        let z: Vec<f64> = (0..6).map(|_| normal.sample(&mut rng)).collect();
        let row = (0..6)
            .map(|j| {
                let partner = z[j ^ 1];
                shift + 0.8 * z[j] + 0.6 * partner
            })
            .collect();
        table.push(row, class).unwrap();
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use ndarray::Array2;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use Class::{Interictal as I, Preictal as P};

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Cyclic Jacobi eigen-decomposition; test-only reference solver.
    fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
        let n = a.nrows();
        let mut a = a.clone();
        let mut v = Array2::<f64>::eye(n);
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[[i, j]].powi(2)).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[[k, p]], a[[k, q]]);
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                        v[[k, p]] = c * vkp - s * vkq;
                        v[[k, q]] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
        let vals = order.iter().map(|&i| a[[i, i]]).collect();
        let mut vecs = Array2::zeros((n, n));
        for (out, &src) in order.iter().enumerate() {
            let mut col = v.column(src).to_owned();
            let big = (0..n).fold(0, |b, i| if col[i].abs() > col[b].abs() { i } else { b });
            if col[big] < 0.0 {
                col.mapv_inplace(|x| -x);
            }
            vecs.column_mut(out).assign(&col);
        }
        (vals, vecs)
    }

    /// Replays the rotation's RNG draws step by step and assembles the
    /// expected block matrix with the reference solver.
    fn traced_rotation(table: &FeatureTable, m: usize, frac: f64, seed: u64, tree: usize) -> Array2<f64> {
        let mut rng = member_rng(seed, tree);
        let p = table.n_features();
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(&mut rng);
        let mut r = Array2::zeros((p, p));
        for subset in order.chunks(m) {
            let classes = loop {
                let take_i = rng.random_bool(0.5);
                let take_p = rng.random_bool(0.5);
                let mut c = Vec::new();
                if take_i {
                    c.push(I);
                }
                if take_p {
                    c.push(P);
                }
                if !c.is_empty() {
                    break c;
                }
            };
            let pool: Vec<usize> = (0..table.len()).filter(|&i| classes.contains(&table.labels()[i])).collect();
            let k = (frac * pool.len() as f64).ceil() as usize;
            let sample: Vec<usize> = (0..k).map(|_| pool[rng.random_range(0..pool.len())]).collect();
            let x = Array2::from_shape_fn((k, subset.len()), |(a, b)| table.rows()[sample[a]][subset[b]]);
            let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
            let c = &x - &mean.insert_axis(ndarray::Axis(0));
            let cov = c.t().dot(&c) / (k - 1) as f64;
            let (_, vecs) = jacobi_eigen(&cov);
            for (a, &fa) in subset.iter().enumerate() {
                for (b, &fb) in subset.iter().enumerate() {
                    r[[fa, fb]] = vecs[[a, b]];
                }
            }
        }
        r
    }

    #[test]
    fn single_block_matches_trace() {
        let table = {
            let t = two_gaussian_table(40, 1);
            let rows: Vec<Vec<f64>> = t.rows().iter().map(|r| r[..3].to_vec()).collect();
            FeatureTable::from_rows(vec!["a".into(), "b".into(), "c".into()], rows, t.labels().to_vec()).unwrap()
        };
        let cfg = RotationForestConfig { features_per_subset: 3, pca_sample_fraction: 1.0, seed: 4, ..Default::default() };
        let r = build_rotation(&table, &cfg, &mut member_rng(4, 0)).unwrap();
        let want = traced_rotation(&table, 3, 1.0, 4, 0);
        assert!(max_abs(&(&r.0 - &want)) < 1e-8);
        assert!(max_abs(&(r.0.t().dot(&r.0) - Array2::<f64>::eye(3))) < 1e-8);
    }

    #[test]
    fn two_blocks_match_trace() {
        let table = two_gaussian_table(60, 2);
        let cfg = RotationForestConfig { seed: 17, ..Default::default() };
        for tree in 0..4 {
            let r = build_rotation(&table, &cfg, &mut member_rng(17, tree)).unwrap();
            let want = traced_rotation(&table, 3, 0.75, 17, tree);
            assert!(max_abs(&(&r.0 - &want)) < 1e-8, "tree {tree}");
            // exactly two 3×3 blocks: 18 structural non-zeros at most
            let nonzero = r.0.iter().filter(|v| **v != 0.0).count();
            assert!(nonzero <= 18);
        }
    }

    #[test]
    fn degenerate_block_falls_back_to_identity() {
        let rows = vec![vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 1.0, 1.0, 5.0], vec![1.0, 1.0, 1.0, 3.0]];
        let mut table = FeatureTable::from_rows((0..4).map(|i| format!("f{i}")).collect(), rows, vec![I, P, I]).unwrap();
        table.push(vec![1.0, 1.0, 1.0, 2.0], P).unwrap();
        let cfg = RotationForestConfig { features_per_subset: 1, ..Default::default() };
        let r = build_rotation(&table, &cfg, &mut member_rng(0, 0)).unwrap();
        for i in 0..3 {
            assert_eq!(r.0[[i, i]], 1.0);
        }
        assert!(max_abs(&(r.0.t().dot(&r.0) - Array2::<f64>::eye(4))) < 1e-8);
    }

    #[test]
    fn separable_single_tree_fits_training_data() {
        let mut table = FeatureTable::new(vec!["a".into(), "b".into()]);
        let mut rng = member_rng(3, 99);
        for i in 0..50 {
            let c = if i % 2 == 0 { I } else { P };
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = if c == P { rng.random_range(2.0..3.0) } else { rng.random_range(-3.0..-2.0) };
            table.push(vec![a, b], c).unwrap();
        }
        let cfg = RotationForestConfig { ensemble_size: 1, features_per_subset: 2, ..Default::default() };
        let model = train(&table, &cfg).unwrap();
        for (row, &label) in table.rows().iter().zip(table.labels()) {
            assert_eq!(model.predict(row).unwrap().0, label);
        }
    }

    #[test]
    fn single_class_table_is_rejected() {
        let t = FeatureTable::from_rows(vec!["a".into()], vec![vec![1.0], vec![2.0]], vec![I, I]).unwrap();
        assert!(matches!(train(&t, &RotationForestConfig::default()), Err(Error::Training(_))));
    }

    #[test]
    fn serial_and_parallel_training_agree() {
        let table = two_gaussian_table(200, 5);
        let cfg = RotationForestConfig { seed: 8, ..Default::default() };
        let a = model_to_string(&train(&table, &cfg).unwrap());
        let b = model_to_string(&train(&table, &cfg).unwrap());
        let c = model_to_string(&train_parallel(&table, &cfg, 4).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    fn leaf_tree(probs: [f64; 2]) -> Member {
        Member {
            rotation: RotationMatrix(Array2::eye(2)),
            tree: DecisionTree::from_nodes(vec![Node::Leaf { probs }]).unwrap(),
        }
    }

    fn hand_model(leaves: &[[f64; 2]]) -> RotationForestModel {
        RotationForestModel {
            feature_names: vec!["a".into(), "b".into()],
            config: RotationForestConfig { ensemble_size: leaves.len(), ..Default::default() },
            members: leaves.iter().map(|&p| leaf_tree(p)).collect(),
        }
    }

    #[test]
    fn averaged_vote_example() {
        let m = hand_model(&[[0.6, 0.4], [0.2, 0.8], [0.3, 0.7]]);
        let p = m.predict_proba(&[0.0, 0.0]).unwrap();
        assert!((p[0] - 1.1 / 3.0).abs() < 1e-12 && (p[1] - 1.9 / 3.0).abs() < 1e-12);
        let (class, conf) = m.predict(&[0.0, 0.0]).unwrap();
        assert_eq!(class, P);
        assert!((conf - 0.6333).abs() < 1e-4);
    }

    #[test]
    fn unanimous_and_tied_votes() {
        assert_eq!(hand_model(&[[0.0, 1.0], [0.0, 1.0]]).predict(&[1.0, 1.0]).unwrap(), (P, 1.0));
        assert_eq!(hand_model(&[[0.5, 0.5]]).predict(&[1.0, 1.0]).unwrap(), (I, 0.5));
        assert!(matches!(hand_model(&[[0.5, 0.5]]).predict(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn cross_validation_on_separable_data() {
        let mut table = FeatureTable::new(vec!["s".into(), "n".into()]);
        let mut rng = member_rng(11, 0);
        for _ in 0..200 {
            let s: f64 = rng.random_range(-1.0..1.0);
            let noise: f64 = rng.random_range(-1.0..1.0);
            table.push(vec![s, noise], if s > 0.0 { P } else { I }).unwrap();
        }
        let cfg = RotationForestConfig { ensemble_size: 3, features_per_subset: 1, ..Default::default() };
        let report = cross_validate(&table, &cfg, 10).unwrap();
        assert_eq!(report.mean_accuracy, 1.0);
        assert_eq!(cross_validate(&table, &cfg, 10).unwrap(), report);
    }

    #[test]
    fn leave_one_out_and_too_many_folds() {
        let table = two_gaussian_table(12, 3);
        let cfg = RotationForestConfig { ensemble_size: 2, ..Default::default() };
        let report = cross_validate(&table, &cfg, 12).unwrap();
        assert_eq!(report.fold_accuracies.len(), 12);
        assert!(report.fold_accuracies.iter().all(|&a| a == 0.0 || a == 1.0));
        assert!(matches!(cross_validate(&table, &cfg, 13), Err(Error::Parameter(_))));
    }

    #[test]
    fn stratified_folds_balance_classes() {
        let labels: Vec<Class> = (0..100).map(|i| if i < 30 { P } else { I }).collect();
        let folds = stratified_folds(&labels, 10, 1);
        for f in 0..10 {
            let pre = (0..100).filter(|&i| folds[i] == f && labels[i] == P).count();
            assert_eq!(pre, 3);
        }
    }

    #[test]
    fn model_text_round_trip_and_errors() {
        let table = two_gaussian_table(80, 9);
        let cfg = RotationForestConfig { ensemble_size: 3, tree: TreeParams { max_depth: Some(4), min_leaf: 2 }, ..Default::default() };
        let model = train(&table, &cfg).unwrap();
        let text = model_to_string(&model);
        let back = parse_model(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(model_to_string(&back), text);

        let cut = &text[..text.len() / 2];
        assert!(matches!(parse_model(cut), Err(Error::Format { .. })));
        let bumped = text.replacen("rotation-forest 1", "rotation-forest 2", 1);
        assert!(matches!(parse_model(&bumped), Err(Error::UnsupportedVersion { found: 2, .. })));
        assert!(matches!(parse_model("garbage"), Err(Error::Format { line: 1, .. })));
    }
}
