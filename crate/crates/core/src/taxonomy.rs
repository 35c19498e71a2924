//! Label hierarchy: the fixed set of leaf hypernyms, their root-to-leaf
//! paths and canonical definitions.
//!
//! The hierarchy is read from a JSON file of the form
//!
//! ```json
//! {"labels": {"Bonds": {"path": ["SEC", "Debt", "Bonds"], "definition": "..."}}}
//! ```
//!
//! Nothing about the FIBO structure is hard-coded here; the shipped
//! transcription lives under `data/finsim3/`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 17 hypernyms of the FinSim-3 shared task.
pub const FINSIM_LABELS: [&str; 17] = [
    "Equity Index",
    "Regulatory Agency",
    "Credit Index",
    "Central Securities Depository",
    "Debt pricing and yields",
    "Bonds",
    "Swap",
    "Stock Corporation",
    "Option",
    "Funds",
    "Future",
    "Credit Events",
    "MMIs",
    "Stocks",
    "Parametric schedules",
    "Forward",
    "Securities restrictions",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub path: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTaxonomy {
    leaves: BTreeMap<String, LabelEntry>,
}

impl LabelTaxonomy {
    /// Builds a taxonomy from `(leaf, entry)` pairs, validating every
    /// structural invariant. Duplicate leaf names are rejected.
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, LabelEntry)>,
    {
        let mut leaves = BTreeMap::new();
        for (name, entry) in entries {
            if leaves.contains_key(&name) {
                return Err(Error::Taxonomy(format!("duplicate leaf `{name}`")));
            }
            leaves.insert(name, entry);
        }
        let tax = LabelTaxonomy { leaves };
        tax.validate()?;
        Ok(tax)
    }

    fn validate(&self) -> Result<()> {
        if self.leaves.is_empty() {
            return Err(Error::Taxonomy("no labels".into()));
        }
        let mut parent_of: HashMap<&str, Option<&str>> = HashMap::new();
        let mut interior: HashSet<&str> = HashSet::new();
        for (name, entry) in &self.leaves {
            let path = &entry.path;
            let Some(last) = path.last() else {
                return Err(Error::Taxonomy(format!("leaf `{name}` has an empty path")));
            };
            if last != name {
                return Err(Error::Taxonomy(format!("leaf `{name}` has a path ending in `{last}`")));
            }
            if path.iter().any(|n| n.trim().is_empty()) {
                return Err(Error::Taxonomy(format!("leaf `{name}` has a blank node name")));
            }
            if let Some(def) = &entry.definition {
                if def.trim().is_empty() {
                    return Err(Error::Taxonomy(format!("leaf `{name}` has an empty definition")));
                }
            }
            for (i, node) in path.iter().enumerate() {
                let parent = if i == 0 { None } else { Some(path[i - 1].as_str()) };
                match parent_of.get(node.as_str()) {
                    Some(p) if *p != parent => {
                        return Err(Error::Taxonomy(format!("node `{node}` has inconsistent ancestors")));
                    }
                    Some(_) => {}
                    None => {
                        parent_of.insert(node, parent);
                    }
                }
                if i + 1 < path.len() {
                    interior.insert(node);
                }
            }
        }
        if let Some(leaf) = self.leaves.keys().find(|l| interior.contains(l.as_str())) {
            return Err(Error::Taxonomy(format!("leaf `{leaf}` appears as an interior node")));
        }
        Ok(())
    }

    /// Leaf names in ascending order.
    pub fn labels(&self) -> impl ExactSizeIterator<Item = &str> + Clone {
        self.leaves.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.leaves.contains_key(label)
    }

    pub fn path(&self, label: &str) -> Result<&[String]> {
        self.entry(label).map(|e| e.path.as_slice())
    }

    fn entry(&self, label: &str) -> Result<&LabelEntry> {
        self.leaves
            .get(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn root_of(&self, label: &str) -> Result<&str> {
        Ok(&self.path(label)?[0])
    }

    /// The node directly below the root; depth-1 leaves are their own first child.
    pub fn first_child_of(&self, label: &str) -> Result<&str> {
        let path = self.path(label)?;
        Ok(path.get(1).unwrap_or(&path[0]))
    }

    /// Canonical definition text, falling back to the label name.
    pub fn definition<'a>(&'a self, label: &'a str) -> Result<&'a str> {
        let entry = self.entry(label)?;
        Ok(entry.definition.as_deref().unwrap_or(label))
    }

    /// Leaves of the FinSim-3 label set absent from this taxonomy.
    pub fn missing_finsim_labels(&self) -> Vec<&'static str> {
        FINSIM_LABELS.iter().copied().filter(|l| !self.contains(l)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = HierarchyRef { labels: &self.leaves };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

#[derive(Serialize)]
struct HierarchyRef<'a> {
    labels: &'a BTreeMap<String, LabelEntry>,
}

#[derive(Deserialize)]
struct HierarchyFile {
    labels: OrderedEntries,
}

/// Map that keeps duplicate keys so they can be reported instead of
/// silently overwritten.
struct OrderedEntries(Vec<(String, LabelEntry)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = OrderedEntries;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of leaf label to {path, definition}")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, LabelEntry>()? {
                    out.push((k, v));
                }
                Ok(OrderedEntries(out))
            }
        }

        deserializer.deserialize_map(EntriesVisitor).map_err(de::Error::custom)
    }
}

pub fn parse_taxonomy(json: &str) -> Result<LabelTaxonomy> {
    let file: HierarchyFile = serde_json::from_str(json)?;
    LabelTaxonomy::from_entries(file.labels.0)
}

pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<LabelTaxonomy> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_taxonomy(&text)
}
