//! String similarity (length ratio averaged with Smith-Waterman-Gotoh) and the
//! precomputed top-k_m similarity index over MD attribute pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;

use crate::constraints::Md;
use crate::store::{Database, Value};

/// Alignment scores for [`swg_similarity`].
pub const MATCH: f64 = 1.0;
pub const MISMATCH: f64 = -2.0;
pub const GAP_OPEN: f64 = -0.5;
pub const GAP_EXTEND: f64 = -0.3;

pub fn length_similarity(a: &str, b: &str) -> f64 {
    let (la, lb) = (a.chars().count(), b.chars().count());
    if la == 0 && lb == 0 {
        return 1.0;
    }
    la.min(lb) as f64 / la.max(lb) as f64
}

/// Best local alignment score with affine gaps, normalised by the shorter length.
///
/// A gap of length k costs `GAP_OPEN + (k - 1) * GAP_EXTEND`.
pub fn swg_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() {
            1.0
        } else {
            0.0
        };
    }
    let m = b.len();
    let neg = f64::NEG_INFINITY;
    let mut h_prev = vec![0.0; m + 1];
    let mut e_prev = vec![neg; m + 1];
    let mut h = vec![0.0; m + 1];
    let mut e = vec![neg; m + 1];
    let mut best: f64 = 0.0;
    for &ca in &a {
        let mut f = neg;
        h[0] = 0.0;
        for j in 1..=m {
            // e: gap in b (consumes a), f: gap in a (consumes b)
            e[j] = (e_prev[j] + GAP_EXTEND).max(h_prev[j] + GAP_OPEN);
            f = (f + GAP_EXTEND).max(h[j - 1] + GAP_OPEN);
            let s = if ca == b[j - 1] { MATCH } else { MISMATCH };
            h[j] = 0.0f64.max(h_prev[j - 1] + s).max(e[j]).max(f);
            best = best.max(h[j]);
        }
        std::mem::swap(&mut h, &mut h_prev);
        std::mem::swap(&mut e, &mut e_prev);
    }
    (best / (MATCH * a.len().min(m) as f64)).clamp(0.0, 1.0)
}

pub fn combined_similarity(a: &str, b: &str) -> f64 {
    (swg_similarity(a, b) + length_similarity(a, b)) / 2.0
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttrRef {
    pub relation: String,
    pub attribute: String,
}

impl AttrRef {
    pub fn new(relation: &str, attribute: &str) -> Self {
        AttrRef {
            relation: relation.to_string(),
            attribute: attribute.to_string(),
        }
    }
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.relation, self.attribute)
    }
}

pub type PairKey = (AttrRef, AttrRef);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub k_m: usize,
    pub threshold: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            k_m: 5,
            threshold: 0.65,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct PairEntries {
    by_left: BTreeMap<Value, Vec<(Value, f64)>>,
    by_right: BTreeMap<Value, Vec<(Value, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityIndex {
    pub params: SimParams,
    pairs: BTreeMap<PairKey, PairEntries>,
}

fn rank(list: &mut [(Value, f64)]) {
    list.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
}

impl SimilarityIndex {
    pub fn empty(params: SimParams) -> Self {
        SimilarityIndex {
            params,
            pairs: BTreeMap::new(),
        }
    }

    /// Scores every value pair of each MD left-hand-side attribute pair and keeps
    /// pairs above the threshold that rank in the top k_m on both sides.
    /// Target-relation columns take their values from `examples`.
    pub fn build(db: &Database, examples: &[Vec<Value>], mds: &[Md], params: SimParams) -> Self {
        let mut idx = SimilarityIndex::empty(params);
        let mut keys = BTreeSet::new();
        for md in mds {
            for (l, r) in &md.lhs {
                keys.insert((l.clone(), r.clone()));
            }
        }
        for key in keys {
            let left = column_values(db, examples, &key.0);
            let right = column_values(db, examples, &key.1);
            idx.insert_scored(key, &left, &right);
        }
        idx
    }

    fn insert_scored(&mut self, key: PairKey, left: &BTreeSet<Value>, right: &BTreeSet<Value>) {
        let params = self.params;
        let left: Vec<&Value> = left.iter().collect();
        let scored: Vec<(Value, Value, f64)> = left
            .par_iter()
            .flat_map_iter(|l| {
                right.iter().filter_map(move |r| {
                    let s = combined_similarity(l, r);
                    (s >= params.threshold).then(|| ((*l).clone(), r.clone(), s))
                })
            })
            .collect();
        let mut by_left: BTreeMap<Value, Vec<(Value, f64)>> = BTreeMap::new();
        let mut by_right: BTreeMap<Value, Vec<(Value, f64)>> = BTreeMap::new();
        for (l, r, s) in &scored {
            by_left.entry(l.clone()).or_default().push((r.clone(), *s));
            by_right.entry(r.clone()).or_default().push((l.clone(), *s));
        }
        for list in by_left.values_mut().chain(by_right.values_mut()) {
            rank(list);
            list.truncate(params.k_m);
        }
        let kept: Vec<(Value, Value, f64)> = scored
            .into_iter()
            .filter(|(l, r, _)| {
                by_left[l].iter().any(|(x, _)| x == r) && by_right[r].iter().any(|(x, _)| x == l)
            })
            .collect();
        let mut entries = PairEntries::default();
        for (l, r, s) in kept {
            entries
                .by_left
                .entry(l.clone())
                .or_default()
                .push((r.clone(), s));
            entries.by_right.entry(r).or_default().push((l, s));
        }
        for list in entries
            .by_left
            .values_mut()
            .chain(entries.by_right.values_mut())
        {
            rank(list);
        }
        if !entries.by_left.is_empty() {
            self.pairs.insert(key, entries);
        }
    }

    /// Adds a pair directly; used to build fixtures with hand-picked matches.
    pub fn insert(&mut self, key: PairKey, left: &str, right: &str, score: f64) {
        let e = self.pairs.entry(key).or_default();
        e.by_left
            .entry(Value::from(left))
            .or_default()
            .push((Value::from(right), score));
        e.by_right
            .entry(Value::from(right))
            .or_default()
            .push((Value::from(left), score));
        for list in e.by_left.values_mut().chain(e.by_right.values_mut()) {
            rank(list);
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &PairKey> {
        self.pairs.keys()
    }

    pub fn pairs_touching(&self, attr: &AttrRef) -> Vec<PairKey> {
        self.pairs
            .keys()
            .filter(|(l, r)| l == attr || r == attr)
            .cloned()
            .collect()
    }

    /// Values on `attr`'s side of `key` that match `value` taken from the other side.
    pub fn matches_from(&self, key: &PairKey, attr: &AttrRef, value: &Value) -> Vec<(Value, f64)> {
        let Some(e) = self.pairs.get(key) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        if &key.1 == attr {
            out.extend(e.by_left.get(value).into_iter().flatten().cloned());
        }
        if &key.0 == attr {
            out.extend(e.by_right.get(value).into_iter().flatten().cloned());
        }
        out
    }

    /// Score of (`left`, `right`) under `key`, looking the pair up in either orientation.
    pub fn score(&self, key: &PairKey, left: &str, right: &str) -> Option<f64> {
        let e = self.pairs.get(key)?;
        let find = |map: &BTreeMap<Value, Vec<(Value, f64)>>, a: &str, b: &str| {
            map.get(a)
                .and_then(|l| l.iter().find(|(v, _)| &**v == b).map(|(_, s)| *s))
        };
        find(&e.by_left, left, right).or_else(|| {
            if key.0 == key.1 {
                find(&e.by_left, right, left)
            } else {
                None
            }
        })
    }

    /// Rows `left_attr,right_attr,left_value,right_value,score`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        for ((l, r), e) in &self.pairs {
            for (lv, list) in &e.by_left {
                for (rv, s) in list {
                    let row = [
                        l.to_string(),
                        r.to_string(),
                        lv.to_string(),
                        rv.to_string(),
                        format!("{s:.6}"),
                    ];
                    w.write_record(&row).expect("writing to memory");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
    }

    pub fn len(&self) -> usize {
        self.pairs
            .values()
            .map(|e| e.by_left.values().map(Vec::len).sum::<usize>())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[cfg(test)]
    pub(crate) fn max_list_len(&self) -> usize {
        self.pairs
            .values()
            .flat_map(|e| e.by_left.values().chain(e.by_right.values()))
            .map(Vec::len)
            .max()
            .unwrap_or(0)
    }

    #[cfg(test)]
    pub(crate) fn min_score(&self) -> Option<f64> {
        self.pairs
            .values()
            .flat_map(|e| e.by_left.values().flatten())
            .map(|(_, s)| *s)
            .min_by(f64::total_cmp)
    }
}

fn column_values(db: &Database, examples: &[Vec<Value>], attr: &AttrRef) -> BTreeSet<Value> {
    let Ok((r, a)) = db.schema().resolve(&attr.relation, &attr.attribute) else {
        return BTreeSet::new();
    };
    if r == db.target() {
        examples.iter().filter_map(|e| e.get(a).cloned()).collect()
    } else {
        db.rows(r).iter().map(|row| row[a].clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent reference: enumerate every local alignment as a path through
    /// explicit gap runs with memoised recursion over (i, j, state).
    fn reference_swg(a: &str, b: &str) -> f64 {
        use std::collections::HashMap;
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        if a.is_empty() || b.is_empty() {
            return if a.is_empty() && b.is_empty() {
                1.0
            } else {
                0.0
            };
        }
        // best score of an alignment that starts at (i, j) with the given state
        // 0 = free, 1 = inside a gap consuming a, 2 = inside a gap consuming b
        fn go(
            i: usize,
            j: usize,
            st: u8,
            a: &[char],
            b: &[char],
            memo: &mut HashMap<(usize, usize, u8), f64>,
        ) -> f64 {
            if let Some(&v) = memo.get(&(i, j, st)) {
                return v;
            }
            let mut best = 0.0f64; // stop here
            if i < a.len() && j < b.len() {
                let s = if a[i] == b[j] { 1.0 } else { -2.0 };
                best = best.max(s + go(i + 1, j + 1, 0, a, b, memo));
            }
            if i < a.len() {
                let cost = if st == 1 { -0.3 } else { -0.5 };
                best = best.max(cost + go(i + 1, j, 1, a, b, memo));
            }
            if j < b.len() {
                let cost = if st == 2 { -0.3 } else { -0.5 };
                best = best.max(cost + go(i, j + 1, 2, a, b, memo));
            }
            memo.insert((i, j, st), best);
            best
        }
        let mut memo = HashMap::new();
        let mut best = 0.0f64;
        for i in 0..a.len() {
            for j in 0..b.len() {
                // a local alignment starts with a match or mismatch
                let s = if a[i] == b[j] { 1.0 } else { -2.0 };
                best = best.max(s + go(i + 1, j + 1, 0, &a, &b, &mut memo));
            }
        }
        (best / a.len().min(b.len()) as f64).clamp(0.0, 1.0)
    }

    #[test]
    fn length_examples() {
        assert!((length_similarity("Superbad", "Superbad (2007)") - 8.0 / 15.0).abs() < 1e-12);
        assert_eq!(length_similarity("abc", "abc"), 1.0);
        assert_eq!(length_similarity("", "x"), 0.0);
        assert_eq!(length_similarity("", ""), 1.0);
    }

    #[test]
    fn swg_examples() {
        assert_eq!(swg_similarity("Superbad", "Superbad"), 1.0);
        assert_eq!(swg_similarity("abc", "xyz"), 0.0);
        assert_eq!(swg_similarity("", ""), 1.0);
        assert_eq!(swg_similarity("a", ""), 0.0);
        let s = swg_similarity("Superbad", "Superbad (2007)");
        assert!((s - reference_swg("Superbad", "Superbad (2007)")).abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swg_gap_costs_are_affine() {
        // "abcd" vs "abXXcd": best is abcd aligned with one gap of 2 => 4 - 0.5 - 0.3
        let s = swg_similarity("abcd", "abXXcd");
        assert!((s - 3.2 / 4.0).abs() < 1e-12, "{s}");
        assert!((reference_swg("abcd", "abXXcd") - s).abs() < 1e-12);
    }

    #[test]
    fn combined_examples() {
        assert_eq!(combined_similarity("abc", "abc"), 1.0);
        assert_eq!(combined_similarity("abc", "xyz"), 0.5);
        let c = combined_similarity("Superbad", "Superbad (2007)");
        assert!((c - (1.0 + 8.0 / 15.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn zoolander_matches_only_its_title() {
        let titles = ["Superbad (2007)", "Zoolander (2001)", "Orphanage (2007)"];
        let scores: Vec<f64> = titles
            .iter()
            .map(|t| combined_similarity("Zoolander", t))
            .collect();
        assert!(scores[1] >= 0.65);
        assert!(scores[0] < 0.65 && scores[2] < 0.65, "{scores:?}");
    }

    proptest! {
        #[test]
        fn swg_agrees_with_reference(a in "[abc]{0,7}", b in "[abc]{0,7}") {
            prop_assert!((swg_similarity(&a, &b) - reference_swg(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn symmetric_and_bounded(a in "\\PC{0,12}", b in "\\PC{0,12}") {
            for f in [length_similarity, swg_similarity, combined_similarity] {
                let x = f(&a, &b);
                prop_assert!((x - f(&b, &a)).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }

        #[test]
        fn index_lists_respect_params(
            left in prop::collection::vec("[ab]{1,4}", 1..5),
            right in prop::collection::vec("[ab]{1,4}", 1..8),
            k_m in 1usize..4,
            threshold in 0.0f64..1.0,
        ) {
            let schema = crate::store::Schema::parse("t(name:text)\nr(name:text)").unwrap();
            let rows: Vec<(&str, Vec<&str>)> = right.iter().map(|v| ("r", vec![v.as_str()])).collect();
            let db = Database::from_rows(schema, "t", &rows).unwrap();
            let cs = crate::constraints::parse_constraints("md: t[name] ~ r[name] -> t[name] <-> r[name]", db.schema())
                .unwrap();
            let exs: Vec<Vec<Value>> = left.iter().map(|v| vec![Value::from(v.as_str())]).collect();
            let idx = SimilarityIndex::build(&db, &exs, &cs.mds, SimParams { k_m, threshold });
            prop_assert!(idx.max_list_len() <= k_m);
            prop_assert!(idx.min_score().is_none_or(|s| s >= threshold));
        }

        #[test]
        fn identity_is_one(s in "\\PC{1,12}") {
            prop_assert_eq!(combined_similarity(&s, &s), 1.0);
        }
    }
}
