use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

use super::EmbeddingSet;

/// A bijective partial correspondence between two embedding sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorSet {
    pairs: Vec<(usize, usize)>,
}

impl AnchorSet {
    /// Validates `pairs` against the sizes of the source and target sets.
    pub fn new(pairs: Vec<(usize, usize)>, n_src: usize, n_dst: usize) -> Result<Self> {
        let mut src = HashSet::new();
        let mut dst = HashSet::new();
        for (row, &(s, t)) in pairs.iter().enumerate() {
            if s >= n_src {
                return Err(Error::InvalidAnchors(format!(
                    "row {row}: src index {s} out of range (n={n_src})"
                )));
            }
            if t >= n_dst {
                return Err(Error::InvalidAnchors(format!(
                    "row {row}: dst index {t} out of range (n={n_dst})"
                )));
            }
            if !src.insert(s) {
                return Err(Error::InvalidAnchors(format!("row {row}: duplicate src index {s}")));
            }
            if !dst.insert(t) {
                return Err(Error::InvalidAnchors(format!("row {row}: duplicate dst index {t}")));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn targets(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    /// Keeps only the first `count` pairs.
    pub fn truncated(&self, count: usize) -> Self {
        Self {
            pairs: self.pairs.iter().take(count).copied().collect(),
        }
    }
}

/// Reads a two-column `src_index,dst_index` CSV. A non-numeric first line is
/// treated as a header.
pub fn load_anchors(path: &Path, n_src: usize, n_dst: usize) -> Result<AnchorSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (fields.len() == 2)
            .then(|| Some((fields[0].parse::<usize>().ok()?, fields[1].parse::<usize>().ok()?)))
            .flatten();
        match parsed {
            Some(p) => pairs.push(p),
            None if idx == 0 => continue,
            None => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("expected two non-negative integers, got {line:?}"),
                })
            }
        }
    }
    AnchorSet::new(pairs, n_src, n_dst).map_err(|e| match e {
        Error::InvalidAnchors(m) => Error::InvalidAnchors(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_anchors(anchors: &AnchorSet, path: &Path) -> Result<()> {
    let mut out = String::from("src_index,dst_index\n");
    for (s, t) in anchors.pairs() {
        out.push_str(&format!("{s},{t}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Per-point class labels with the ordered list of distinct classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAssignment {
    labels: Vec<String>,
    classes: Vec<String>,
}

impl LabelAssignment {
    /// Classes are ordered lexicographically.
    pub fn new(labels: Vec<String>) -> Self {
        let classes: BTreeSet<&String> = labels.iter().collect();
        let classes = classes.into_iter().cloned().collect();
        Self { labels, classes }
    }

    pub fn from_indices(labels: &[usize]) -> Self {
        Self::new(labels.iter().map(|l| format!("{l:03}")).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Index of each point's class in `classes`.
    pub fn class_indices(&self, classes: &[String]) -> Result<Vec<usize>> {
        let lookup: HashMap<&str, usize> =
            classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        self.labels
            .iter()
            .map(|l| {
                lookup
                    .get(l.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("class {l:?} missing from ordering")))
            })
            .collect()
    }
}

/// The common class ordering of two assignments; errors when the class
/// vocabularies differ.
pub fn shared_classes(a: &LabelAssignment, b: &LabelAssignment) -> Result<Vec<String>> {
    if a.classes != b.classes {
        let only_a: Vec<_> = a.classes.iter().filter(|c| !b.classes.contains(c)).collect();
        let only_b: Vec<_> = b.classes.iter().filter(|c| !a.classes.contains(c)).collect();
        return Err(Error::InvalidInput(format!(
            "class vocabularies differ: only in first {only_a:?}, only in second {only_b:?}"
        )));
    }
    Ok(a.classes.clone())
}

/// Reads an `id,label` CSV and aligns it to the rows of `set`.
pub fn load_labels(path: &Path, set: &EmbeddingSet) -> Result<LabelAssignment> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut by_id = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || (idx == 0 && line.replace(' ', "") == "id,label") {
            continue;
        }
        let Some((id, label)) = line.split_once(',') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "expected `id,label`".into(),
            });
        };
        if by_id.insert(id.trim().to_string(), label.trim().to_string()).is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("duplicate id {:?}", id.trim()),
            });
        }
    }
    let labels = set
        .ids()
        .iter()
        .map(|id| {
            by_id.get(id).cloned().ok_or_else(|| {
                Error::InvalidInput(format!("{}: no label for id {id:?}", path.display()))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelAssignment::new(labels))
}

pub fn save_labels(labels: &LabelAssignment, ids: &[String], path: &Path) -> Result<()> {
    let mut out = String::from("id,label\n");
    for (id, l) in ids.iter().zip(labels.labels()) {
        out.push_str(&format!("{id},{l}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
