//! Vote tallies with deterministic leader/runner-up queries.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hash;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

/// A vote label with a fixed total order.
///
/// Leader and runner-up queries break ties by the lowest label under `Ord`.
/// `at_rank` enumerates the universe in that order for types where the
/// universe is enumerable (integer labels); top-slot padding uses it to name
/// the lowest never-seen labels. Non-enumerable universes (strings) return
/// `None` and padding falls back to inert placeholders that no vote can hit.
pub trait Label: Clone + Ord + Eq + Hash + fmt::Debug {
    fn at_rank(rank: usize) -> Option<Self>;
}

macro_rules! impl_label_for_uint {
    ($($t:ty),*) => {$(
        impl Label for $t {
            fn at_rank(rank: usize) -> Option<Self> {
                <$t>::try_from(rank).ok()
            }
        }
    )*};
}
impl_label_for_uint!(u8, u16, u32, u64, usize);

impl Label for String {
    fn at_rank(_rank: usize) -> Option<Self> {
        None
    }
}

/// One entry of a top-m ranking. `Observed` labels can be hit by votes;
/// `Placeholder(i)` fills the i-th slot that no known label occupies and
/// matches nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopLabel<L> {
    Observed(L),
    Placeholder(usize),
}

impl<L: PartialEq> TopLabel<L> {
    pub fn matches(&self, vote: &L) -> bool {
        match self {
            TopLabel::Observed(l) => l == vote,
            TopLabel::Placeholder(_) => false,
        }
    }

    pub fn observed(&self) -> Option<&L> {
        match self {
            TopLabel::Observed(l) => Some(l),
            TopLabel::Placeholder(_) => None,
        }
    }
}

impl<L: fmt::Display> fmt::Display for TopLabel<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopLabel::Observed(l) => l.fmt(f),
            TopLabel::Placeholder(i) => write!(f, "<unseen:{i}>"),
        }
    }
}

/// Label counts with a running total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "L: Serialize + Ord",
    deserialize = "L: DeserializeOwned + Ord"
))]
pub struct Tally<L: Label> {
    counts: BTreeMap<L, u64>,
    n: u64,
}

impl<L: Label> Default for Tally<L> {
    fn default() -> Self {
        Self::new()
    }
}

impl<L: Label> Tally<L> {
    pub fn new() -> Self {
        Tally {
            counts: BTreeMap::new(),
            n: 0,
        }
    }

    pub fn from_votes<I: IntoIterator<Item = L>>(votes: I) -> Self {
        let mut t = Self::new();
        for v in votes {
            t.record(v);
        }
        t
    }

    pub fn record(&mut self, label: L) {
        *self.counts.entry(label).or_insert(0) += 1;
        self.n += 1;
    }

    /// Total number of recorded votes.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn count(&self, label: &L) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<L, u64> {
        &self.counts
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Current majority label, lowest label on ties; `None` on an empty tally.
    pub fn leader(&self) -> Option<&L> {
        let mut best: Option<(&L, u64)> = None;
        for (label, &c) in &self.counts {
            match best {
                Some((_, bc)) if c <= bc => {}
                _ => best = Some((label, c)),
            }
        }
        best.map(|(l, _)| l)
    }

    /// The leader followed by the descending runner-ups, padded to length `m`.
    ///
    /// Entry 0 is the leader; ties break toward the lowest label. Slots with
    /// no observed label are padded with the lowest never-seen labels of the
    /// universe when it is enumerable, otherwise with inert placeholders.
    pub fn leader_and_runners(&self, m: usize) -> Vec<TopLabel<L>> {
        assert!(m >= 2, "top-m width must be at least 2");
        let mut ranked: Vec<(&L, u64)> = self.counts.iter().map(|(l, &c)| (l, c)).collect();
        // Stable sort on descending count keeps the BTreeMap's ascending
        // label order inside each count class, which is the tie-break rule.
        ranked.sort_by_key(|entry| std::cmp::Reverse(entry.1));

        let mut out: Vec<TopLabel<L>> = ranked
            .into_iter()
            .take(m)
            .map(|(l, _)| TopLabel::Observed(l.clone()))
            .collect();

        let mut rank = 0usize;
        let mut placeholder = 0usize;
        while out.len() < m {
            match L::at_rank(rank) {
                Some(candidate) => {
                    rank += 1;
                    if !self.counts.contains_key(&candidate) {
                        out.push(TopLabel::Observed(candidate));
                    }
                }
                None => {
                    out.push(TopLabel::Placeholder(placeholder));
                    placeholder += 1;
                }
            }
        }
        out
    }
}
