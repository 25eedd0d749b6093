//! User profiles, item occurrence counts, co-occurrence counting and item labels.
//!
//! Input files are line-oriented, tab-separated and have no header:
//!
//! * profiles: `user_id<TAB>item_id`
//! * labels:   `item_id<TAB>label_id`
//!
//! Lines starting with `#` and blank lines are ignored. Item ids are opaque
//! strings; internally they are mapped to dense indices in lexicographic order
//! so every derived structure is independent of record order.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Splits `a<TAB>b` into its two fields. `None` for blank or comment lines.
pub(crate) fn split_pair(line: &str, lineno: usize) -> Result<Option<(&str, &str)>> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let mut fields = line.split('\t');
    match (fields.next(), fields.next(), fields.next()) {
        (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => Ok(Some((a, b))),
        _ => Err(Error::Parse {
            line: lineno,
            message: format!("expected two non-empty tab-separated fields, got {line:?}"),
        }),
    }
}

fn read_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().map(|(i, l)| {
        l.map(|l| (i + 1, l)).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })
    })
}

/// Item ids with their occurrence counts, indexed densely in sorted id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemCatalog {
    ids: Vec<String>,
    occurrences: Vec<u32>,
    index: HashMap<String, u32>,
}

impl ItemCatalog {
    /// Builds a catalog from `(item_id, occurrence)` pairs. Ids must be unique and counts ≥ 1.
    pub fn from_counts(counts: impl IntoIterator<Item = (String, u32)>) -> Result<Self> {
        let mut sorted: BTreeMap<String, u32> = BTreeMap::new();
        for (id, c) in counts {
            if c == 0 {
                return Err(Error::contract(format!("item {id} has zero occurrences")));
            }
            if sorted.insert(id.clone(), c).is_some() {
                return Err(Error::contract(format!("duplicate item id {id}")));
            }
        }
        let (ids, occurrences): (Vec<_>, Vec<_>) = sorted.into_iter().unzip();
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Ok(ItemCatalog {
            ids,
            occurrences,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).map(|&i| i as usize)
    }

    /// Number of profiles containing the item (`|A|`).
    pub fn occurrences(&self, idx: usize) -> u32 {
        self.occurrences[idx]
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "#simmap occurrences items={}", self.len())?;
        for (id, c) in self.ids.iter().zip(&self.occurrences) {
            writeln!(out, "{id}\t{c}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut counts = Vec::new();
        for line in read_lines(reader) {
            let (lineno, line) = line?;
            if let Some((id, c)) = split_pair(&line, lineno)? {
                let c = parse_field::<u32>(c, lineno)?;
                counts.push((id.to_string(), c));
            }
        }
        if counts.is_empty() {
            return Err(Error::EmptyInput);
        }
        ItemCatalog::from_counts(counts).map_err(|e| match e {
            Error::Contract(m) => Error::Parse {
                line: 0,
                message: m,
            },
            e => e,
        })
    }
}

pub(crate) fn parse_field<T: FromStr>(s: &str, line: usize) -> Result<T>
where
    T::Err: fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| Error::Parse {
        line,
        message: format!("cannot parse {s:?}: {e}"),
    })
}

/// Per-user item sets plus per-item occurrence counts.
#[derive(Debug, Clone)]
pub struct ProfileStore {
    catalog: ItemCatalog,
    /// Sorted by user id. Items are catalog indices in first-seen order.
    users: Vec<(String, Vec<u32>)>,
}

impl ProfileStore {
    pub fn catalog(&self) -> &ItemCatalog {
        &self.catalog
    }

    pub fn users(&self) -> &[(String, Vec<u32>)] {
        &self.users
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn item_count(&self) -> usize {
        self.catalog.len()
    }

    /// Builds a store from in-memory `(user, item)` records.
    pub fn from_records<U, I>(records: impl IntoIterator<Item = (U, I)>) -> Result<Self>
    where
        U: AsRef<str>,
        I: AsRef<str>,
    {
        let mut builder = ProfileBuilder::default();
        for (u, i) in records {
            builder.push(u.as_ref(), i.as_ref());
        }
        builder.finish()
    }
}

#[derive(Default)]
struct ProfileBuilder {
    users: HashMap<String, (Vec<String>, HashSet<String>)>,
}

impl ProfileBuilder {
    fn push(&mut self, user: &str, item: &str) {
        let (list, seen) = self.users.entry(user.to_string()).or_default();
        if seen.insert(item.to_string()) {
            list.push(item.to_string());
        }
    }

    fn finish(self) -> Result<ProfileStore> {
        if self.users.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for (list, _) in self.users.values() {
            for item in list {
                *counts.entry(item.as_str()).or_insert(0) += 1;
            }
        }
        let catalog = ItemCatalog::from_counts(counts.into_iter().map(|(k, v)| (k.to_string(), v)))?;
        let mut users: Vec<(String, Vec<u32>)> = self
            .users
            .iter()
            .map(|(u, (list, _))| {
                let items = list
                    .iter()
                    .map(|i| catalog.index[i.as_str()])
                    .collect();
                (u.clone(), items)
            })
            .collect();
        users.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(ProfileStore { catalog, users })
    }
}

/// Reads `user_id<TAB>item_id` records. Records may arrive in any order.
pub fn parse_profiles<R: BufRead>(reader: R) -> Result<ProfileStore> {
    let mut builder = ProfileBuilder::default();
    for line in read_lines(reader) {
        let (lineno, line) = line?;
        if let Some((user, item)) = split_pair(&line, lineno)? {
            builder.push(user, item);
        }
    }
    builder.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CoocEntry {
    pub a: u32,
    pub b: u32,
    pub count: u32,
}

/// Sparse symmetric co-occurrence counts. Entries are stored once per
/// unordered pair with `a < b`, sorted by `(a, b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoocMatrix {
    entries: Vec<CoocEntry>,
    item_count: usize,
}

impl CoocMatrix {
    /// Validates and canonicalizes raw entries.
    pub fn from_entries(item_count: usize, raw: impl IntoIterator<Item = (u32, u32, u32)>) -> Result<Self> {
        let mut entries = Vec::new();
        for (a, b, count) in raw {
            if a == b {
                return Err(Error::contract(format!("diagonal co-occurrence entry for item {a}")));
            }
            if count == 0 {
                return Err(Error::contract(format!("zero co-occurrence count for ({a}, {b})")));
            }
            if a as usize >= item_count || b as usize >= item_count {
                return Err(Error::contract(format!("item index out of range in ({a}, {b})")));
            }
            entries.push(CoocEntry {
                a: a.min(b),
                b: a.max(b),
                count,
            });
        }
        entries.sort_unstable();
        if entries.windows(2).any(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b)) {
            return Err(Error::contract("duplicate co-occurrence pair"));
        }
        Ok(CoocMatrix {
            entries,
            item_count,
        })
    }

    pub fn entries(&self) -> &[CoocEntry] {
        &self.entries
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn pair_count(&self) -> usize {
        self.entries.len()
    }

    /// Symmetric lookup; 0 when the pair never co-occurred or `a == b`.
    pub fn get(&self, a: usize, b: usize) -> u32 {
        let (a, b) = (a.min(b) as u32, a.max(b) as u32);
        self.entries
            .binary_search_by(|e| (e.a, e.b).cmp(&(a, b)))
            .map(|i| self.entries[i].count)
            .unwrap_or(0)
    }

    pub fn write_tsv<W: Write>(&self, catalog: &ItemCatalog, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "#simmap cooc items={} pairs={}",
            self.item_count,
            self.entries.len()
        )?;
        for e in &self.entries {
            writeln!(
                out,
                "{}\t{}\t{}",
                catalog.id(e.a as usize),
                catalog.id(e.b as usize),
                e.count
            )?;
        }
        Ok(())
    }

    /// Reads `item_a<TAB>item_b<TAB>count` lines; ids are resolved against `catalog`.
    pub fn read_tsv<R: BufRead>(reader: R, catalog: &ItemCatalog) -> Result<Self> {
        let mut raw = Vec::new();
        for line in read_lines(reader) {
            let (lineno, line) = line?;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected three tab-separated fields, got {trimmed:?}"),
                });
            }
            let lookup = |id: &str| {
                catalog.index_of(id).ok_or_else(|| Error::Parse {
                    line: lineno,
                    message: format!("item {id:?} missing from occurrence table"),
                })
            };
            let a = lookup(fields[0])?;
            let b = lookup(fields[1])?;
            let count = parse_field::<u32>(fields[2], lineno)?;
            if count > catalog.occurrences(a).min(catalog.occurrences(b)) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("co-occurrence {count} exceeds an item's occurrence count"),
                });
            }
            raw.push((a as u32, b as u32, count));
        }
        CoocMatrix::from_entries(catalog.len(), raw).map_err(|e| match e {
            Error::Contract(m) => Error::Parse {
                line: 0,
                message: m,
            },
            e => e,
        })
    }
}

fn pair_key(a: u32, b: u32) -> u64 {
    let (lo, hi) = (a.min(b), a.max(b));
    ((lo as u64) << 32) | hi as u64
}

/// Counts, for every unordered item pair, the number of profiles containing both.
///
/// Users are sharded across worker threads and the partial counts merged; the
/// result is sorted, so it does not depend on the thread count.
pub fn count_cooccurrences(store: &ProfileStore) -> Result<CoocMatrix> {
    if store.users.is_empty() {
        return Err(Error::EmptyInput);
    }
    let merged = store
        .users
        .par_iter()
        .fold(HashMap::<u64, u32>::new, |mut acc, (_, items)| {
            for (x, &a) in items.iter().enumerate() {
                for &b in &items[x + 1..] {
                    *acc.entry(pair_key(a, b)).or_insert(0) += 1;
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut left, right| {
            let (mut big, small) = if left.len() >= right.len() {
                (std::mem::take(&mut left), right)
            } else {
                (right, left)
            };
            for (k, v) in small {
                *big.entry(k).or_insert(0) += v;
            }
            big
        });
    let mut entries: Vec<CoocEntry> = merged
        .into_iter()
        .map(|(k, count)| CoocEntry {
            a: (k >> 32) as u32,
            b: (k & 0xffff_ffff) as u32,
            count,
        })
        .collect();
    entries.sort_unstable();
    Ok(CoocMatrix {
        entries,
        item_count: store.item_count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Artist,
    Genre,
}

impl FromStr for LabelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "artist" => Ok(LabelKind::Artist),
            "genre" => Ok(LabelKind::Genre),
            other => Err(Error::contract(format!("unknown label kind {other:?} (expected artist|genre)"))),
        }
    }
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelKind::Artist => "artist",
            LabelKind::Genre => "genre",
        })
    }
}

/// Item → label assignments. Items without any record are absent.
#[derive(Debug, Clone)]
pub struct LabelTable {
    kind: LabelKind,
    labels: HashMap<String, Vec<u32>>,
    label_names: Vec<String>,
}

impl LabelTable {
    pub fn from_records<I, L>(kind: LabelKind, records: impl IntoIterator<Item = (I, L)>) -> Self
    where
        I: AsRef<str>,
        L: AsRef<str>,
    {
        let records: Vec<(String, String)> = records
            .into_iter()
            .map(|(i, l)| (i.as_ref().to_string(), l.as_ref().to_string()))
            .collect();
        let names: BTreeSet<&str> = records.iter().map(|(_, l)| l.as_str()).collect();
        let label_names: Vec<String> = names.into_iter().map(str::to_string).collect();
        let lookup: HashMap<&str, u32> = label_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i as u32))
            .collect();
        let mut labels: HashMap<String, Vec<u32>> = HashMap::new();
        for (item, label) in &records {
            let l = lookup[label.as_str()];
            let list = labels.entry(item.clone()).or_default();
            if !list.contains(&l) {
                list.push(l);
            }
        }
        LabelTable {
            kind,
            labels,
            label_names,
        }
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    /// Label indices of an item, `None` when the item is unlabeled.
    pub fn labels_of(&self, item: &str) -> Option<&[u32]> {
        self.labels.get(item).map(Vec::as_slice)
    }

    /// Label names of an item, in input order.
    pub fn label_names_of(&self, item: &str) -> Option<Vec<&str>> {
        self.labels_of(item)
            .map(|ls| ls.iter().map(|&l| self.label_names[l as usize].as_str()).collect())
    }

    pub fn label_name(&self, label: u32) -> &str {
        &self.label_names[label as usize]
    }

    pub fn label_count(&self) -> usize {
        self.label_names.len()
    }

    pub fn item_count(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labeled items in sorted id order.
    pub fn items(&self) -> Vec<(&str, &[u32])> {
        let mut v: Vec<_> = self
            .labels
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_slice()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }
}

/// Reads `item_id<TAB>label_id` records. An empty stream yields an empty table.
pub fn parse_labels<R: BufRead>(reader: R, kind: LabelKind) -> Result<LabelTable> {
    let mut records = Vec::new();
    for line in read_lines(reader) {
        let (lineno, line) = line?;
        if let Some((item, label)) = split_pair(&line, lineno)? {
            records.push((item.to_string(), label.to_string()));
        }
    }
    Ok(LabelTable::from_records(kind, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(recs: &[(&str, &str)]) -> ProfileStore {
        ProfileStore::from_records(recs.iter().copied()).unwrap()
    }

    #[test]
    fn occurrence_counts() {
        let s = store(&[("u1", "a"), ("u1", "b"), ("u2", "a")]);
        let c = s.catalog();
        assert_eq!(c.occurrences(c.index_of("a").unwrap()), 2);
        assert_eq!(c.occurrences(c.index_of("b").unwrap()), 1);
    }

    #[test]
    fn duplicates_within_user_collapse() {
        let s = store(&[("u1", "a"), ("u1", "a")]);
        assert_eq!(s.catalog().occurrences(0), 1);
        assert_eq!(s.users()[0].1.len(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = "u1\ta\nu2 b\n";
        match parse_profiles(input.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let input = "u1\ta\tc\n";
        assert!(matches!(
            parse_profiles(input.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_profiles_rejected() {
        assert!(matches!(parse_profiles("".as_bytes()), Err(Error::EmptyInput)));
        assert!(matches!(parse_profiles("# only a comment\n\n".as_bytes()), Err(Error::EmptyInput)));
    }

    #[test]
    fn single_profile_pairs() {
        let s = store(&[("u1", "a"), ("u1", "b"), ("u1", "c")]);
        let m = count_cooccurrences(&s).unwrap();
        assert_eq!(m.pair_count(), 3);
        assert_eq!(m.get(0, 1), 1);
        assert_eq!(m.get(0, 2), 1);
        assert_eq!(m.get(2, 1), 1);
        assert_eq!(m.get(1, 1), 0);
    }

    #[test]
    fn two_profiles_accumulate() {
        let s = store(&[("u1", "a"), ("u1", "b"), ("u2", "b"), ("u2", "a")]);
        let m = count_cooccurrences(&s).unwrap();
        assert_eq!(m.get(0, 1), 2);
    }

    #[test]
    fn cooc_tsv_round_trip() {
        let s = store(&[("u1", "a"), ("u1", "b"), ("u2", "b"), ("u2", "c"), ("u2", "a")]);
        let m = count_cooccurrences(&s).unwrap();
        let mut occ = Vec::new();
        s.catalog().write_tsv(&mut occ).unwrap();
        let mut cooc = Vec::new();
        m.write_tsv(s.catalog(), &mut cooc).unwrap();
        let cat = ItemCatalog::read_tsv(occ.as_slice()).unwrap();
        assert_eq!(&cat, s.catalog());
        assert_eq!(CoocMatrix::read_tsv(cooc.as_slice(), &cat).unwrap(), m);
    }

    #[test]
    fn cooc_above_occurrence_rejected() {
        let cat = ItemCatalog::from_counts([("a".into(), 1), ("b".into(), 3)]).unwrap();
        let err = CoocMatrix::read_tsv("a\tb\t2\n".as_bytes(), &cat).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn labels_single_and_multi() {
        let t = parse_labels("s1\trock\n".as_bytes(), LabelKind::Genre).unwrap();
        assert_eq!(t.label_names_of("s1").unwrap(), vec!["rock"]);
        let t = parse_labels("s1\trock\ns1\tpop\n".as_bytes(), LabelKind::Genre).unwrap();
        assert_eq!(t.label_names_of("s1").unwrap(), vec!["rock", "pop"]);
        assert!(t.labels_of("s2").is_none());
    }

    #[test]
    fn empty_labels_valid() {
        let t = parse_labels("".as_bytes(), LabelKind::Artist).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.kind(), LabelKind::Artist);
    }

    #[test]
    fn malformed_label_line() {
        let err = parse_labels("s1\trock\nbad\n".as_bytes(), LabelKind::Genre).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
