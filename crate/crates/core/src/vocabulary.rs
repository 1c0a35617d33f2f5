//! Vocabulary of retrievable concepts and their nonexclusive category scheme.
//!
//! The on-disk form is a UTF-8 CSV with header `name,description,categories`.
//! `categories` is a `|`-separated list of labels; category ids are assigned
//! in order of first appearance and labels are matched case-insensitively.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ItemId = usize;
pub type CategoryId = usize;

pub const CATEGORY_SEPARATOR: char = '|';

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabularyItem {
    pub id: ItemId,
    pub name: String,
    pub description: Option<String>,
    /// Sorted, deduplicated.
    pub categories: Vec<CategoryId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextMode {
    NameOnly,
    NamePlusDescription,
}

impl std::str::FromStr for TextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "name_only" => Ok(TextMode::NameOnly),
            "name_plus_description" => Ok(TextMode::NamePlusDescription),
            other => Err(Error::validation(format!(
                "unknown text mode {other:?} (expected name_only or name_plus_description)"
            ))),
        }
    }
}

impl std::fmt::Display for TextMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TextMode::NameOnly => "name_only",
            TextMode::NamePlusDescription => "name_plus_description",
        })
    }
}

impl VocabularyItem {
    /// Text submitted to the embedding model for this item.
    pub fn compose_text(&self, mode: TextMode) -> Result<String> {
        match mode {
            TextMode::NameOnly => Ok(self.name.clone()),
            TextMode::NamePlusDescription => {
                let desc = self
                    .description
                    .as_deref()
                    .map(str::trim)
                    .filter(|d| !d.is_empty())
                    .ok_or_else(|| {
                        Error::validation(format!(
                            "item {} ({:?}) has no description, required for name_plus_description",
                            self.id, self.name
                        ))
                    })?;
                let name = self.name.trim().trim_end_matches('.');
                Ok(format!("{name}. {desc}"))
            }
        }
    }
}

/// Category labels plus a per-item membership bitset for O(1) overlap tests.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryScheme {
    labels: Vec<String>,
    membership: Vec<Vec<CategoryId>>,
    bits: Vec<Vec<u64>>,
}

impl CategoryScheme {
    /// Build from labels and per-item memberships, validating ids and label uniqueness.
    pub fn new(labels: Vec<String>, membership: Vec<Vec<CategoryId>>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (id, label) in labels.iter().enumerate() {
            let key = label.trim().to_lowercase();
            if key.is_empty() {
                return Err(Error::validation(format!("category {id} has an empty label")));
            }
            if let Some(prev) = seen.insert(key, id) {
                return Err(Error::validation(format!(
                    "category labels {prev} and {id} collide after case-folding ({label:?})"
                )));
            }
        }
        let words = labels.len().div_ceil(64).max(1);
        let mut bits = Vec::with_capacity(membership.len());
        let mut normalized = Vec::with_capacity(membership.len());
        for (item, cats) in membership.into_iter().enumerate() {
            let mut cats = cats;
            cats.sort_unstable();
            cats.dedup();
            let mut row = vec![0u64; words];
            for &c in &cats {
                if c >= labels.len() {
                    return Err(Error::validation(format!(
                        "item {item} references unknown category id {c}"
                    )));
                }
                row[c / 64] |= 1 << (c % 64);
            }
            bits.push(row);
            normalized.push(cats);
        }
        Ok(CategoryScheme {
            labels,
            membership: normalized,
            bits,
        })
    }

    pub fn num_categories(&self) -> usize {
        self.labels.len()
    }

    pub fn num_items(&self) -> usize {
        self.membership.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: CategoryId) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    pub fn categories_of(&self, item: ItemId) -> &[CategoryId] {
        &self.membership[item]
    }

    pub fn contains(&self, item: ItemId, category: CategoryId) -> bool {
        category < self.labels.len() && self.bits[item][category / 64] & (1 << (category % 64)) != 0
    }

    pub fn is_categorized(&self, item: ItemId) -> bool {
        !self.membership[item].is_empty()
    }

    /// True when the two items share at least one category.
    pub fn shares_category(&self, a: ItemId, b: ItemId) -> bool {
        self.bits[a]
            .iter()
            .zip(&self.bits[b])
            .any(|(x, y)| x & y != 0)
    }

    /// Number of categories both items belong to.
    pub fn shared_count(&self, a: ItemId, b: ItemId) -> u32 {
        self.bits[a]
            .iter()
            .zip(&self.bits[b])
            .map(|(x, y)| (x & y).count_ones())
            .sum()
    }

    /// Number of categories in `subset` shared by both items.
    pub fn shared_count_within(&self, a: ItemId, b: ItemId, subset: &[u64]) -> u32 {
        self.bits[a]
            .iter()
            .zip(&self.bits[b])
            .zip(subset)
            .map(|((x, y), s)| (x & y & s).count_ones())
            .sum()
    }

    /// Bitset over category ids, validated against this scheme.
    pub fn subset_mask(&self, subset: &[CategoryId]) -> Result<Vec<u64>> {
        let mut mask = vec![0u64; self.bits.first().map_or(1, Vec::len)];
        for &c in subset {
            if c >= self.labels.len() {
                return Err(Error::validation(format!("unknown category id {c}")));
            }
            mask[c / 64] |= 1 << (c % 64);
        }
        Ok(mask)
    }

    pub fn find(&self, label: &str) -> Option<CategoryId> {
        let key = label.trim().to_lowercase();
        self.labels.iter().position(|l| l.trim().to_lowercase() == key)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    items: Vec<VocabularyItem>,
    scheme: CategoryScheme,
}

#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    categories: String,
}

impl Vocabulary {
    /// Assemble a vocabulary from (name, description, category labels) tuples.
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Option<S>, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut builder = Builder::default();
        for (row, (name, desc, cats)) in entries.into_iter().enumerate() {
            let labels: Vec<&str> = cats.iter().map(AsRef::as_ref).collect();
            builder
                .push(name.as_ref(), desc.as_ref().map(AsRef::as_ref), &labels)
                .map_err(|m| Error::validation(format!("entry {row}: {m}")))?;
        }
        builder.finish()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[VocabularyItem] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> Option<&VocabularyItem> {
        self.items.get(id)
    }

    pub fn scheme(&self) -> &CategoryScheme {
        &self.scheme
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.name.as_str())
    }

    pub fn find(&self, name: &str) -> Option<ItemId> {
        let key = name.trim().to_lowercase();
        self.items
            .iter()
            .position(|i| i.name.trim().to_lowercase() == key)
    }

    pub fn compose_texts(&self, mode: TextMode) -> Result<Vec<String>> {
        self.items.iter().map(|i| i.compose_text(mode)).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for item in &self.items {
            let categories = item
                .categories
                .iter()
                .map(|&c| self.scheme.labels[c].as_str())
                .collect::<Vec<_>>()
                .join(&CATEGORY_SEPARATOR.to_string());
            w.serialize(CsvRow {
                name: item.name.clone(),
                description: item.description.clone().unwrap_or_default(),
                categories,
            })
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Default)]
struct Builder {
    items: Vec<VocabularyItem>,
    names: HashMap<String, ItemId>,
    labels: Vec<String>,
    label_ids: HashMap<String, CategoryId>,
}

impl Builder {
    fn push(
        &mut self,
        name: &str,
        description: Option<&str>,
        labels: &[&str],
    ) -> std::result::Result<(), String> {
        let trimmed = name.trim();
        if trimmed.is_empty() {
            return Err("empty name".into());
        }
        let key = trimmed.to_lowercase();
        if let Some(&prev) = self.names.get(&key) {
            return Err(format!("duplicate name {name:?} (first seen as item {prev})"));
        }
        let mut categories = Vec::with_capacity(labels.len());
        for &label in labels {
            let label_key = label.trim().to_lowercase();
            if label_key.is_empty() {
                return Err(format!("unknown category token {label:?} in {name:?}"));
            }
            let id = match self.label_ids.get(&label_key) {
                Some(&id) => id,
                None => {
                    let id = self.labels.len();
                    self.labels.push(label.trim().to_string());
                    self.label_ids.insert(label_key, id);
                    id
                }
            };
            categories.push(id);
        }
        categories.sort_unstable();
        categories.dedup();
        let id = self.items.len();
        self.names.insert(key, id);
        self.items.push(VocabularyItem {
            id,
            name: name.to_string(),
            description: description
                .filter(|d| !d.trim().is_empty())
                .map(str::to_string),
            categories,
        });
        Ok(())
    }

    fn finish(self) -> Result<Vocabulary> {
        if self.items.is_empty() {
            return Err(Error::validation("vocabulary is empty"));
        }
        let membership = self.items.iter().map(|i| i.categories.clone()).collect();
        let scheme = CategoryScheme::new(self.labels, membership)?;
        Ok(Vocabulary {
            items: self.items,
            scheme,
        })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Load and validate a vocabulary CSV. Item ids follow file order.
pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::None).from_reader(file);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["name", "description", "categories"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `name,description,categories`, found {headers:?}"),
        ));
    }
    let mut builder = Builder::default();
    for record in reader.deserialize::<CsvRow>() {
        let row = record.map_err(|e| csv_error(path, e))?;
        let line = builder.items.len() + 2;
        let labels: Vec<&str> = if row.categories.trim().is_empty() {
            Vec::new()
        } else {
            row.categories.split(CATEGORY_SEPARATOR).collect()
        };
        let desc = Some(row.description.as_str());
        builder
            .push(&row.name, desc, &labels)
            .map_err(|m| Error::parse(path, line, m))?;
    }
    builder.finish().map_err(|e| match e {
        Error::Validation(m) => Error::parse(path, 0, m),
        other => other,
    })
}
