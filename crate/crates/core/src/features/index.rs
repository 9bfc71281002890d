//! Feature indexing with a frequency cutoff.

use std::collections::HashMap;

use crate::corpus::Document;

use super::{document_features, FeatureExtractor, Sidecar};

/// Maps feature strings to dense ids. Only features whose corpus
/// frequency reaches the cutoff receive an id; ids follow first-seen
/// order, so the same corpus always produces the same index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureIndex {
    ids: HashMap<String, u32>,
    names: Vec<String>,
    cutoff: u32,
}

impl FeatureIndex {
    /// Builds an index from an iterator of per-position feature sets.
    pub fn from_feature_sets<'a, I>(sets: I, cutoff: u32) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        // (first-seen rank, count) per feature
        let mut seen: HashMap<&str, (usize, u32)> = HashMap::new();
        let mut order: Vec<&str> = Vec::new();
        for set in sets {
            for f in set {
                match seen.get_mut(f.as_str()) {
                    Some((_, c)) => *c += 1,
                    None => {
                        seen.insert(f, (order.len(), 1));
                        order.push(f);
                    }
                }
            }
        }
        let mut ids = HashMap::new();
        let mut names = Vec::new();
        for name in order {
            let (_, count) = seen[name];
            if count >= cutoff {
                ids.insert(name.to_string(), names.len() as u32);
                names.push(name.to_string());
            }
        }
        FeatureIndex { ids, names, cutoff }
    }

    /// Rebuilds an index from an id-ordered name list (model loading).
    pub fn from_names(names: Vec<String>, cutoff: u32) -> Self {
        let ids = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        FeatureIndex { ids, names, cutoff }
    }

    pub fn id(&self, feature: &str) -> Option<u32> {
        self.ids.get(feature).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    /// Maps a feature set to sorted, deduplicated ids, skipping unindexed
    /// features.
    pub fn project(&self, features: &[String]) -> Vec<u32> {
        let mut ids: Vec<u32> = features.iter().filter_map(|f| self.id(f)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Builds the feature index over a pre-processed corpus.
pub fn build_index(
    docs: &[Document],
    extractor: &FeatureExtractor,
    sidecar: Option<&Sidecar>,
    cutoff: u32,
) -> FeatureIndex {
    let all: Vec<Vec<String>> = docs
        .iter()
        .flat_map(|doc| {
            document_features(doc, extractor, sidecar)
                .into_iter()
                .flatten()
        })
        .collect();
    FeatureIndex::from_feature_sets(all.iter().map(|v| v.as_slice()), cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|s| s.iter().map(|f| f.to_string()).collect())
            .collect()
    }

    #[test]
    fn cutoff_one_indexes_everything() {
        let data = sets(&[&["a", "b"], &["b", "c"]]);
        let idx = FeatureIndex::from_feature_sets(data.iter().map(|v| v.as_slice()), 1);
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.id("a"), Some(0));
        assert_eq!(idx.id("b"), Some(1));
        assert_eq!(idx.id("c"), Some(2));
    }

    #[test]
    fn below_cutoff_features_are_absent() {
        // "a" appears 3 times, cutoff 4 drops it; "b" appears 4 times
        let data = sets(&[&["a", "b"], &["a", "b"], &["a", "b"], &["b"]]);
        let idx = FeatureIndex::from_feature_sets(data.iter().map(|v| v.as_slice()), 4);
        assert_eq!(idx.id("a"), None);
        assert_eq!(idx.id("b"), Some(0));
        assert_eq!(idx.len(), 1);
    }

    #[test]
    fn id_assignment_follows_first_seen_order() {
        let data = sets(&[&["z", "a"], &["m", "z", "a"]]);
        let idx = FeatureIndex::from_feature_sets(data.iter().map(|v| v.as_slice()), 1);
        assert_eq!(idx.id("z"), Some(0));
        assert_eq!(idx.id("a"), Some(1));
        assert_eq!(idx.id("m"), Some(2));
    }

    #[test]
    fn same_input_same_index() {
        let data = sets(&[&["x", "y"], &["y"], &["x", "z"]]);
        let a = FeatureIndex::from_feature_sets(data.iter().map(|v| v.as_slice()), 2);
        let b = FeatureIndex::from_feature_sets(data.iter().map(|v| v.as_slice()), 2);
        assert_eq!(a, b);
    }

    #[test]
    fn project_sorts_and_skips_unindexed() {
        let data = sets(&[&["a", "b", "c"]]);
        let idx = FeatureIndex::from_feature_sets(data.iter().map(|v| v.as_slice()), 1);
        let q = vec![
            "c".to_string(),
            "missing".to_string(),
            "a".to_string(),
            "c".to_string(),
        ];
        assert_eq!(idx.project(&q), vec![0, 2]);
    }
}
