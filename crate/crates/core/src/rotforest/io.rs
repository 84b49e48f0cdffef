//! Line-oriented text format for trained models.
//!
//! ```text
//! rotation-forest <version>
//! config ensemble_size=<L> features_per_subset=<M> pca_sample_fraction=<f> max_depth=<n|none> min_leaf=<n> seed=<u64>
//! features <p>
//! <feature name>                       (p lines)
//! member <index>
//! rotation <p>
//! <p space-separated decimals>         (p lines, row-major)
//! tree <node count>
//! split <feature> <threshold> <right>  | leaf <p_interictal> <p_preictal>   (preorder)
//! ...                                  (one member block per ensemble member)
//! end
//! ```
//!
//! Decimals use the shortest representation that parses back to the same
//! `f64`, so a save/load cycle is exact.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::rotation::RotationMatrix;
use super::tree::{DecisionTree, Node, TreeParams};
use super::{Member, RotationForestConfig, RotationForestModel};
use crate::error::IoContext;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "rotation-forest";

pub fn write_member(out: &mut String, index: usize, member: &Member) {
    let r = &member.rotation.0;
    writeln!(out, "member {index}").unwrap();
    writeln!(out, "rotation {}", r.nrows()).unwrap();
    for row in r.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", cells.join(" ")).unwrap();
    }
    writeln!(out, "tree {}", member.tree.nodes().len()).unwrap();
    for node in member.tree.nodes() {
        match node {
            Node::Split { feature, threshold, right } => {
                writeln!(out, "split {feature} {threshold:?} {right}").unwrap()
            }
            Node::Leaf { probs } => writeln!(out, "leaf {:?} {:?}", probs[0], probs[1]).unwrap(),
        }
    }
}

fn write_config(out: &mut String, c: &RotationForestConfig) {
    let depth = c.tree.max_depth.map_or("none".to_string(), |d| d.to_string());
    writeln!(
        out,
        "config ensemble_size={} features_per_subset={} pca_sample_fraction={:?} max_depth={} min_leaf={} seed={}",
        c.ensemble_size, c.features_per_subset, c.pca_sample_fraction, depth, c.tree.min_leaf, c.seed
    )
    .unwrap();
}

pub fn model_to_string(model: &RotationForestModel) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC} {FORMAT_VERSION}").unwrap();
    write_config(&mut out, &model.config);
    writeln!(out, "features {}", model.feature_names.len()).unwrap();
    for name in &model.feature_names {
        writeln!(out, "{name}").unwrap();
    }
    for (i, m) in model.members.iter().enumerate() {
        write_member(&mut out, i, m);
    }
    out.push_str("end\n");
    out
}

pub fn save_model(model: &RotationForestModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(model)).ctx(|| format!("writing {}", path.display()))
}

pub fn load_model(path: &Path) -> Result<RotationForestModel> {
    let text = std::fs::read(path).ctx(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8(text).map_err(|e| Error::Format {
        line: 0,
        message: format!("not UTF-8 ({e})"),
    })?;
    parse_model(&text)
}

/// Cursor over lines with 1-based numbering for error context.
pub(crate) struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Lines { iter: text.lines().enumerate(), line: 0 }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format { line: self.line, message: message.into() }
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        match self.iter.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(Error::Format {
                line: self.line + 1,
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    /// Next line must be `<keyword> <rest>`; returns `rest`.
    fn keyword(&mut self, keyword: &str) -> Result<&'a str> {
        let line = self.next(keyword)?;
        match line.split_once(' ') {
            Some((k, rest)) if k == keyword => Ok(rest),
            _ => Err(self.err(format!("expected `{keyword}`, found `{line}`"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("bad {what} `{s}`")))
    }
}

pub(crate) fn parse_member(lines: &mut Lines<'_>, expected_index: usize, p: usize) -> Result<Member> {
    let idx: usize = {
        let s = lines.keyword("member")?;
        lines.parse(s, "member index")?
    };
    if idx != expected_index {
        return Err(lines.err(format!("member {idx} out of order, expected {expected_index}")));
    }
    let dim: usize = {
        let s = lines.keyword("rotation")?;
        lines.parse(s, "rotation size")?
    };
    if dim != p {
        return Err(lines.err(format!("rotation is {dim}×{dim}, model has {p} features")));
    }
    let mut data = Vec::with_capacity(p * p);
    for _ in 0..p {
        let row = lines.next("rotation row")?;
        let before = data.len();
        for cell in row.split(' ') {
            data.push(lines.parse::<f64>(cell, "rotation entry")?);
        }
        if data.len() - before != p {
            return Err(lines.err(format!("rotation row has {} entries, expected {p}", data.len() - before)));
        }
    }
    let rotation = RotationMatrix(Array2::from_shape_vec((p, p), data).expect("sized above"));

    let count: usize = {
        let s = lines.keyword("tree")?;
        lines.parse(s, "node count")?
    };
    let mut nodes = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let line = lines.next("tree node")?;
        let fields: Vec<&str> = line.split(' ').collect();
        let node = match fields.as_slice() {
            ["split", f, t, r] => Node::Split {
                feature: lines.parse(f, "split feature")?,
                threshold: lines.parse(t, "split threshold")?,
                right: lines.parse(r, "right child")?,
            },
            ["leaf", a, b] => Node::Leaf {
                probs: [lines.parse(a, "probability")?, lines.parse(b, "probability")?],
            },
            _ => return Err(lines.err(format!("bad tree node `{line}`"))),
        };
        if let Node::Split { feature, .. } = node {
            if feature >= p {
                return Err(lines.err(format!("split feature {feature} out of range")));
            }
        }
        nodes.push(node);
    }
    let tree = DecisionTree::from_nodes(nodes).map_err(|m| lines.err(m))?;
    Ok(Member { rotation, tree })
}

fn parse_config(lines: &mut Lines<'_>) -> Result<RotationForestConfig> {
    let rest = lines.keyword("config")?;
    let mut cfg = RotationForestConfig { tree: TreeParams::default(), ..RotationForestConfig::default() };
    let mut seen = 0;
    for field in rest.split(' ') {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| lines.err(format!("config field `{field}` is not key=value")))?;
        match k {
            "ensemble_size" => cfg.ensemble_size = lines.parse(v, k)?,
            "features_per_subset" => cfg.features_per_subset = lines.parse(v, k)?,
            "pca_sample_fraction" => cfg.pca_sample_fraction = lines.parse(v, k)?,
            "max_depth" => cfg.tree.max_depth = if v == "none" { None } else { Some(lines.parse(v, k)?) },
            "min_leaf" => cfg.tree.min_leaf = lines.parse(v, k)?,
            "seed" => cfg.seed = lines.parse(v, k)?,
            _ => return Err(lines.err(format!("unknown config field `{k}`"))),
        }
        seen += 1;
    }
    if seen != 6 {
        return Err(lines.err("config needs all six fields"));
    }
    cfg.validate().map_err(|e| lines.err(e.to_string()))?;
    Ok(cfg)
}

pub fn parse_model(text: &str) -> Result<RotationForestModel> {
    let mut lines = Lines::new(text);
    let version: u32 = {
        let s = lines.keyword(MAGIC)?;
        lines.parse(s, "format version")?
    };
    if version > FORMAT_VERSION || version == 0 {
        return Err(Error::UnsupportedVersion { found: version, supported: FORMAT_VERSION });
    }
    let config = parse_config(&mut lines)?;
    let p: usize = {
        let s = lines.keyword("features")?;
        lines.parse(s, "feature count")?
    };
    let mut feature_names = Vec::with_capacity(p.min(1 << 16));
    for _ in 0..p {
        feature_names.push(lines.next("feature name")?.to_string());
    }
    let mut members = Vec::with_capacity(config.ensemble_size);
    for i in 0..config.ensemble_size {
        members.push(parse_member(&mut lines, i, p)?);
    }
    let tail = lines.next("`end`")?;
    if tail != "end" {
        return Err(lines.err(format!("expected `end`, found `{tail}`")));
    }
    if let Ok(extra) = lines.next("") {
        return Err(lines.err(format!("trailing content `{extra}`")));
    }
    Ok(RotationForestModel { feature_names, config, members })
}

/// Single member in the same text form, used as a MapReduce value.
pub fn member_to_string(index: usize, member: &Member) -> String {
    let mut out = String::new();
    write_member(&mut out, index, member);
    out
}

pub fn member_from_str(text: &str, index: usize, p: usize) -> Result<Member> {
    parse_member(&mut Lines::new(text), index, p)
}
