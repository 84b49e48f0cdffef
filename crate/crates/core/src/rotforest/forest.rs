use super::rotation::{build_rotation, member_rng, RotationMatrix};
use super::tree::{tree_train, DecisionTree, TreeParams};
use crate::features::{Class, FeatureTable};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RotationForestConfig {
    pub ensemble_size: usize,
    pub features_per_subset: usize,
    pub pca_sample_fraction: f64,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for RotationForestConfig {
    fn default() -> Self {
        RotationForestConfig {
            ensemble_size: 10,
            features_per_subset: 3,
            pca_sample_fraction: 0.75,
            tree: TreeParams::default(),
            seed: 0,
        }
    }
}

impl RotationForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 1 || self.features_per_subset < 1 || self.tree.min_leaf < 1 {
            return Err(Error::Parameter(
                "ensemble size, features per subset and min leaf must be at least 1".into(),
            ));
        }
        if !(self.pca_sample_fraction > 0.0 && self.pca_sample_fraction <= 1.0) {
            return Err(Error::Parameter(format!(
                "PCA sample fraction {} outside (0, 1]",
                self.pca_sample_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub rotation: RotationMatrix,
    pub tree: DecisionTree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationForestModel {
    pub feature_names: Vec<String>,
    pub config: RotationForestConfig,
    pub members: Vec<Member>,
}

fn check_trainable(table: &FeatureTable) -> Result<()> {
    if table.len() < 2 {
        return Err(Error::Training(format!("need at least 2 rows, got {}", table.len())));
    }
    if table.class_counts().contains(&0) {
        return Err(Error::Training("training table must contain both classes".into()));
    }
    Ok(())
}

/// Build member `index` from its own RNG stream; independent of every other
/// member, so members can be built in any order or on any machine.
pub fn train_member(table: &FeatureTable, config: &RotationForestConfig, index: usize) -> Result<Member> {
    config.validate()?;
    check_trainable(table)?;
    let mut rng = member_rng(config.seed, index);
    let rotation = build_rotation(table, config, &mut rng)?;
    let rotated: Vec<Vec<f64>> = table.rows().iter().map(|r| rotation.rotate(r)).collect();
    let tree = tree_train(&rotated, table.labels(), &config.tree);
    Ok(Member { rotation, tree })
}

pub fn train(table: &FeatureTable, config: &RotationForestConfig) -> Result<RotationForestModel> {
    train_parallel(table, config, 1)
}

/// Same model as [`train`], with members built on `threads` threads.
pub fn train_parallel(
    table: &FeatureTable,
    config: &RotationForestConfig,
    threads: usize,
) -> Result<RotationForestModel> {
    config.validate()?;
    check_trainable(table)?;
    let n = config.ensemble_size;
    let threads = threads.clamp(1, n);
    let members = if threads == 1 {
        (0..n).map(|i| train_member(table, config, i)).collect::<Result<Vec<_>>>()?
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let mut slots: Vec<Option<Result<Member>>> = (0..n).map(|_| None).collect();
        let done = std::sync::Mutex::new(Vec::new());
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let m = train_member(table, config, i);
                    done.lock().unwrap().push((i, m));
                });
            }
        });
        for (i, m) in done.into_inner().unwrap() {
            slots[i] = Some(m);
        }
        slots.into_iter().map(|m| m.expect("every member built")).collect::<Result<Vec<_>>>()?
    };
    Ok(RotationForestModel {
        feature_names: table.names().to_vec(),
        config: config.clone(),
        members,
    })
}

impl RotationForestModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Mean of the members' leaf distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "vector has {} features, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        let mut acc = [0.0; 2];
        for m in &self.members {
            let p = m.tree.leaf_probs(&m.rotation.rotate(x));
            acc[0] += p[0];
            acc[1] += p[1];
        }
        let l = self.members.len() as f64;
        Ok([acc[0] / l, acc[1] / l])
    }

    /// Argmax of the averaged distribution; ties go to interictal.
    pub fn predict(&self, x: &[f64]) -> Result<(Class, f64)> {
        let p = self.predict_proba(x)?;
        Ok(if p[1] > p[0] { (Class::Preictal, p[1]) } else { (Class::Interictal, p[0]) })
    }
}
