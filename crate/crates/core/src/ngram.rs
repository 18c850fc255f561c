//! Exact k-gram counting for k = 1..n_max.
//!
//! Windows slide over the whole stream with no resets. Keys are token-ID
//! tuples packed into a `u64` or `u128` when `n_max · ⌈log₂ |V|⌉` fits, and
//! stored as boxed slices otherwise. Packing puts the first token in the high
//! bits, so the context of a packed key is `key >> bits` and sorting keys
//! groups grams by context.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::Hash;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::tokenize::{Granularity, TokenStream, Vocabulary};

const DUMP_MAGIC: &str = "#entrate-ngram-table v1";

trait PackedKey: Copy + Eq + Hash + Ord + Send + Sync + Default {
    fn mask(width: u32) -> Self;
    fn push(self, token: u32, bits: u32, mask: Self) -> Self;
    fn context(self, bits: u32) -> Self;
    fn unpack(self, k: usize, bits: u32) -> Vec<u32>;
    fn pack(gram: &[u32], bits: u32) -> Self;
}

macro_rules! packed_key {
    ($t:ty) => {
        impl PackedKey for $t {
            fn mask(width: u32) -> Self {
                if width >= <$t>::BITS {
                    <$t>::MAX
                } else {
                    ((1 as $t) << width) - 1
                }
            }

            #[inline]
            fn push(self, token: u32, bits: u32, mask: Self) -> Self {
                (self.checked_shl(bits).unwrap_or(0) | token as $t) & mask
            }

            #[inline]
            fn context(self, bits: u32) -> Self {
                self.checked_shr(bits).unwrap_or(0)
            }

            fn unpack(self, k: usize, bits: u32) -> Vec<u32> {
                let tok_mask = Self::mask(bits);
                (0..k)
                    .rev()
                    .map(|i| ((self >> (bits * i as u32)) & tok_mask) as u32)
                    .collect()
            }

            fn pack(gram: &[u32], bits: u32) -> Self {
                let mask = Self::mask(bits * gram.len() as u32);
                gram.iter().fold(0 as $t, |acc, &t| acc.push(t, bits, mask))
            }
        }
    };
}

packed_key!(u64);
packed_key!(u128);

#[derive(Debug, Clone, PartialEq, Eq)]
enum GramMap {
    Narrow(FxHashMap<u64, u64>),
    Wide(FxHashMap<u128, u64>),
    Slices(FxHashMap<Box<[u32]>, u64>),
}

/// How grams are keyed for a given vocabulary and order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Narrow { bits: u32 },
    Wide { bits: u32 },
    Slices,
}

impl Layout {
    fn choose(vocab_size: usize, n_max: usize) -> Layout {
        let bits = bits_per_token(vocab_size);
        let width = bits as usize * n_max;
        if width <= 64 {
            Layout::Narrow { bits }
        } else if width <= 128 {
            Layout::Wide { bits }
        } else {
            Layout::Slices
        }
    }

    fn empty_map(self) -> GramMap {
        match self {
            Layout::Narrow { .. } => GramMap::Narrow(FxHashMap::default()),
            Layout::Wide { .. } => GramMap::Wide(FxHashMap::default()),
            Layout::Slices => GramMap::Slices(FxHashMap::default()),
        }
    }
}

fn bits_per_token(vocab_size: usize) -> u32 {
    // at least one bit so that every order has a nonzero key width
    (usize::BITS - vocab_size.saturating_sub(1).leading_zeros()).max(1)
}

/// Options for [`count_ngrams_with`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountOptions {
    /// Split the stream into this many overlapping chunks counted in
    /// parallel. `0` or `1` counts each order in one sequential scan.
    pub chunks: usize,
    /// Memory-budget mode: for k ≥ 2 a k-gram is only stored when its
    /// (k−1)-gram prefix was stored with at least this count. Entropies
    /// computed from a pruned table are biased low.
    pub prune_min_count: Option<u64>,
}

/// Exact counts of every k-gram, k = 1..n_max, of one stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramTable {
    n_max: usize,
    vocab: Vocabulary,
    layout: Layout,
    totals: Vec<u64>,
    maps: Vec<GramMap>,
    pruned_below: Option<u64>,
}

pub fn count_ngrams(stream: &TokenStream, n_max: usize) -> Result<NgramTable> {
    count_ngrams_with(stream, n_max, &CountOptions::default())
}

/// Chunk-parallel counting; the result is identical to [`count_ngrams`].
pub fn count_ngrams_chunked(stream: &TokenStream, n_max: usize, chunks: usize) -> Result<NgramTable> {
    count_ngrams_with(
        stream,
        n_max,
        &CountOptions {
            chunks,
            ..CountOptions::default()
        },
    )
}

pub fn count_ngrams_with(stream: &TokenStream, n_max: usize, options: &CountOptions) -> Result<NgramTable> {
    if n_max == 0 {
        return Err(Error::ZeroOrder);
    }
    if stream.len() < n_max {
        return Err(Error::StreamTooShort {
            len: stream.len(),
            n_max,
        });
    }
    let mut table = NgramTable::empty(n_max, stream.vocab.clone());
    let tokens = &stream.tokens;
    let layout = table.layout;
    table.totals = (1..=n_max).map(|k| (tokens.len() + 1 - k) as u64).collect();

    if let Some(min) = options.prune_min_count {
        table.pruned_below = Some(min);
        let mut maps: Vec<GramMap> = Vec::with_capacity(n_max);
        for k in 1..=n_max {
            let map = count_order(
                tokens,
                0..tokens.len() + 1 - k,
                k,
                layout,
                maps.last().map(|m| (m, min)),
            );
            maps.push(map);
        }
        table.maps = maps;
    } else if options.chunks > 1 {
        let n_windows = tokens.len();
        let step = n_windows.div_ceil(options.chunks).max(1);
        let starts: Vec<usize> = (0..n_windows).step_by(step).collect();
        table.maps = (1..=n_max)
            .into_par_iter()
            .map(|k| {
                let last_start = tokens.len() + 1 - k;
                let partials: Vec<GramMap> = starts
                    .par_iter()
                    .map(|&s| {
                        let e = (s + step).min(last_start);
                        count_order(tokens, s.min(e)..e, k, layout, None)
                    })
                    .collect();
                partials
                    .into_iter()
                    .reduce(|mut acc, m| {
                        merge_map(&mut acc, &m);
                        acc
                    })
                    .unwrap_or_else(|| layout.empty_map())
            })
            .collect();
    } else {
        table.maps = (1..=n_max)
            .into_par_iter()
            .map(|k| count_order(tokens, 0..tokens.len() + 1 - k, k, layout, None))
            .collect();
    }
    Ok(table)
}

/// Counts the k-grams whose start lies in `starts`.
fn count_order(
    tokens: &[u32],
    starts: std::ops::Range<usize>,
    k: usize,
    layout: Layout,
    prune: Option<(&GramMap, u64)>,
) -> GramMap {
    match layout {
        Layout::Narrow { bits } => {
            let prefix = prune.map(|(m, min)| match m {
                GramMap::Narrow(m) => (m, min),
                _ => unreachable!("layout is fixed per table"),
            });
            GramMap::Narrow(count_packed::<u64>(tokens, starts, k, bits, prefix))
        }
        Layout::Wide { bits } => {
            let prefix = prune.map(|(m, min)| match m {
                GramMap::Wide(m) => (m, min),
                _ => unreachable!("layout is fixed per table"),
            });
            GramMap::Wide(count_packed::<u128>(tokens, starts, k, bits, prefix))
        }
        Layout::Slices => {
            let mut map: FxHashMap<Box<[u32]>, u64> = FxHashMap::default();
            let prefix = prune.map(|(m, min)| match m {
                GramMap::Slices(m) => (m, min),
                _ => unreachable!("layout is fixed per table"),
            });
            for i in starts {
                let gram = &tokens[i..i + k];
                if let Some((prev, min)) = prefix {
                    if prev.get(&gram[..k - 1]).is_none_or(|&c| c < min) {
                        continue;
                    }
                }
                match map.get_mut(gram) {
                    Some(c) => *c += 1,
                    None => {
                        map.insert(gram.into(), 1);
                    }
                }
            }
            GramMap::Slices(map)
        }
    }
}

fn count_packed<K: PackedKey>(
    tokens: &[u32],
    starts: std::ops::Range<usize>,
    k: usize,
    bits: u32,
    prefix: Option<(&FxHashMap<K, u64>, u64)>,
) -> FxHashMap<K, u64> {
    let mut map: FxHashMap<K, u64> = FxHashMap::default();
    if starts.is_empty() {
        return map;
    }
    let mask = K::mask(bits * k as u32);
    let first = starts.start;
    let mut key = K::pack(&tokens[first..first + k - 1], bits);
    for i in starts {
        key = key.push(tokens[i + k - 1], bits, mask);
        if let Some((prev, min)) = prefix {
            if prev.get(&key.context(bits)).is_none_or(|&c| c < min) {
                continue;
            }
        }
        *map.entry(key).or_insert(0) += 1;
    }
    map
}

fn merge_map(into: &mut GramMap, from: &GramMap) {
    fn add<K: Eq + Hash + Clone>(into: &mut FxHashMap<K, u64>, from: &FxHashMap<K, u64>) {
        into.reserve(from.len());
        for (k, &c) in from {
            *into.entry(k.clone()).or_insert(0) += c;
        }
    }
    match (into, from) {
        (GramMap::Narrow(a), GramMap::Narrow(b)) => add(a, b),
        (GramMap::Wide(a), GramMap::Wide(b)) => add(a, b),
        (GramMap::Slices(a), GramMap::Slices(b)) => add(a, b),
        _ => unreachable!("merged tables share a layout"),
    }
}

/// Pointwise sum of two tables over the same vocabulary and order.
pub fn merge_tables(a: &NgramTable, b: &NgramTable) -> Result<NgramTable> {
    if a.n_max != b.n_max {
        return Err(Error::VocabMismatch(format!("n_max {} vs {}", a.n_max, b.n_max)));
    }
    if a.vocab != b.vocab {
        return Err(Error::VocabMismatch(format!(
            "vocabularies differ ({} vs {} entries)",
            a.vocab.len(),
            b.vocab.len()
        )));
    }
    let mut out = a.clone();
    for (k, m) in out.maps.iter_mut().enumerate() {
        merge_map(m, &b.maps[k]);
    }
    for (t, u) in out.totals.iter_mut().zip(&b.totals) {
        *t += u;
    }
    out.pruned_below = match (a.pruned_below, b.pruned_below) {
        (None, None) => None,
        (x, y) => x.max(y),
    };
    Ok(out)
}

impl NgramTable {
    /// A table with no observations.
    pub fn empty(n_max: usize, vocab: Vocabulary) -> NgramTable {
        let layout = Layout::choose(vocab.len(), n_max);
        NgramTable {
            n_max,
            layout,
            totals: vec![0; n_max],
            maps: (0..n_max).map(|_| layout.empty_map()).collect(),
            vocab,
            pruned_below: None,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn granularity(&self) -> Granularity {
        self.vocab.granularity()
    }

    /// Count threshold used in memory-budget mode, if the table was pruned.
    pub fn pruned_below(&self) -> Option<u64> {
        self.pruned_below
    }

    fn check_order(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n_max {
            Err(Error::OrderOutOfRange {
                n: k,
                n_max: self.n_max,
            })
        } else {
            Ok(())
        }
    }

    /// Number of k-gram positions, `len − k + 1`.
    pub fn total(&self, k: usize) -> Result<u64> {
        self.check_order(k)?;
        Ok(self.totals[k - 1])
    }

    /// Number of distinct stored k-grams.
    pub fn distinct(&self, k: usize) -> Result<usize> {
        self.check_order(k)?;
        Ok(match &self.maps[k - 1] {
            GramMap::Narrow(m) => m.len(),
            GramMap::Wide(m) => m.len(),
            GramMap::Slices(m) => m.len(),
        })
    }

    /// Occurrence count of `gram`; zero when unseen or longer than `n_max`.
    pub fn count(&self, gram: &[u32]) -> u64 {
        let k = gram.len();
        if k == 0 || k > self.n_max || gram.iter().any(|&t| t as usize >= self.vocab.len()) {
            return 0;
        }
        match (&self.maps[k - 1], self.layout) {
            (GramMap::Narrow(m), Layout::Narrow { bits }) => m.get(&u64::pack(gram, bits)).copied().unwrap_or(0),
            (GramMap::Wide(m), Layout::Wide { bits }) => m.get(&u128::pack(gram, bits)).copied().unwrap_or(0),
            (GramMap::Slices(m), _) => m.get(gram).copied().unwrap_or(0),
            _ => unreachable!("map matches layout"),
        }
    }

    /// All stored k-grams with counts, sorted lexicographically by token IDs.
    pub fn sorted_grams(&self, k: usize) -> Result<Vec<(Vec<u32>, u64)>> {
        self.check_order(k)?;
        let mut out: Vec<(Vec<u32>, u64)> = match (&self.maps[k - 1], self.layout) {
            (GramMap::Narrow(m), Layout::Narrow { bits }) => {
                m.iter().map(|(key, &c)| (key.unpack(k, bits), c)).collect()
            }
            (GramMap::Wide(m), Layout::Wide { bits }) => m.iter().map(|(key, &c)| (key.unpack(k, bits), c)).collect(),
            (GramMap::Slices(m), _) => m.iter().map(|(key, &c)| (key.to_vec(), c)).collect(),
            _ => unreachable!("map matches layout"),
        };
        out.sort_unstable();
        Ok(out)
    }

    /// Calls `f` once per distinct (k−1)-context with the counts of all
    /// k-grams extending it. Contexts are visited in lexicographic order, so
    /// the visiting sequence depends only on the table contents.
    pub fn for_each_context<F: FnMut(&[u64])>(&self, k: usize, mut f: F) -> Result<()> {
        self.check_order(k)?;
        let mut group: Vec<u64> = Vec::new();
        match (&self.maps[k - 1], self.layout) {
            (GramMap::Narrow(m), Layout::Narrow { bits }) => grouped_packed(m, bits, &mut group, &mut f),
            (GramMap::Wide(m), Layout::Wide { bits }) => grouped_packed(m, bits, &mut group, &mut f),
            (GramMap::Slices(m), _) => {
                let mut entries: Vec<(&[u32], u64)> = m.iter().map(|(key, &c)| (&key[..], c)).collect();
                entries.sort_unstable();
                let mut current: Option<&[u32]> = None;
                for (key, c) in entries {
                    let ctx = &key[..k - 1];
                    if current.is_some_and(|p| p != ctx) {
                        f(&group);
                        group.clear();
                    }
                    current = Some(ctx);
                    group.push(c);
                }
                if !group.is_empty() {
                    f(&group);
                }
            }
            _ => unreachable!("map matches layout"),
        }
        Ok(())
    }

    /// Number of k-grams observed exactly `times` times.
    pub fn count_of_counts(&self, k: usize, times: u64) -> Result<u64> {
        self.check_order(k)?;
        fn tally<K>(m: &FxHashMap<K, u64>, times: u64) -> u64 {
            m.values().filter(|&&c| c == times).count() as u64
        }
        Ok(match &self.maps[k - 1] {
            GramMap::Narrow(m) => tally(m, times),
            GramMap::Wide(m) => tally(m, times),
            GramMap::Slices(m) => tally(m, times),
        })
    }

    /// Sum of stored counts for order k (equals `total(k)` unless pruned).
    pub fn stored_mass(&self, k: usize) -> Result<u64> {
        self.check_order(k)?;
        fn sum<K>(m: &FxHashMap<K, u64>) -> u64 {
            m.values().sum()
        }
        Ok(match &self.maps[k - 1] {
            GramMap::Narrow(m) => sum(m),
            GramMap::Wide(m) => sum(m),
            GramMap::Slices(m) => sum(m),
        })
    }

    /// Writes the table as sorted TSV.
    ///
    /// ```text
    /// #entrate-ngram-table v1
    /// n_max       <n>
    /// granularity word|letter
    /// pruned_below <count>|-
    /// vocab       <id>  <surface>     one line per entry, ID order
    /// total       <k>   <positions>   one line per order
    /// gram        <k>   <id id ...>   <count>
    /// ```
    ///
    /// Gram lines are ordered by k, then lexicographically by ID tuple. Lines
    /// starting with `#` after the header are comments.
    pub fn write_tsv<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.write_tsv_annotated(w, &[])
    }

    /// As [`NgramTable::write_tsv`], with `# ` comment lines after the header.
    pub fn write_tsv_annotated<W: Write>(&self, mut w: W, comments: &[String]) -> std::io::Result<()> {
        writeln!(w, "{DUMP_MAGIC}")?;
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "n_max\t{}", self.n_max)?;
        writeln!(w, "granularity\t{}", self.vocab.granularity())?;
        match self.pruned_below {
            Some(p) => writeln!(w, "pruned_below\t{p}")?,
            None => writeln!(w, "pruned_below\t-")?,
        }
        for (id, surface) in self.vocab.entries().iter().enumerate() {
            writeln!(w, "vocab\t{id}\t{}", escape(surface))?;
        }
        for (k, t) in self.totals.iter().enumerate() {
            writeln!(w, "total\t{}\t{t}", k + 1)?;
        }
        let mut line = String::new();
        for k in 1..=self.n_max {
            for (gram, c) in self.sorted_grams(k).expect("k in range") {
                line.clear();
                let _ = write!(line, "gram\t{k}\t");
                for (i, t) in gram.iter().enumerate() {
                    if i > 0 {
                        line.push(' ');
                    }
                    let _ = write!(line, "{t}");
                }
                let _ = write!(line, "\t{c}");
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.save_annotated(path, &[])
    }

    pub fn save_annotated(&self, path: &Path, comments: &[String]) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_tsv_annotated(&mut w, comments)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<NgramTable> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(std::io::BufReader::new(file), path)
    }

    /// Parses the format written by [`NgramTable::write_tsv`]. `origin` is
    /// only used in error messages.
    pub fn read_tsv<R: BufRead>(r: R, origin: &Path) -> Result<NgramTable> {
        let perr = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut n_max: Option<usize> = None;
        let mut granularity = Granularity::Word;
        let mut pruned_below = None;
        let mut vocab_entries: BTreeMap<u32, String> = BTreeMap::new();
        let mut totals: BTreeMap<usize, u64> = BTreeMap::new();
        let mut grams: Vec<(Vec<u32>, u64)> = Vec::new();
        let mut saw_magic = false;

        for (i, line) in r.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            if !saw_magic {
                if line.trim_end() != DUMP_MAGIC {
                    return Err(perr(lineno, "missing table header".into()));
                }
                saw_magic = true;
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| -> Result<u64> {
                s.parse::<u64>()
                    .map_err(|e| perr(lineno, format!("bad number {s:?}: {e}")))
            };
            match fields.as_slice() {
                ["n_max", v] => n_max = Some(num(v)? as usize),
                ["granularity", v] => granularity = v.parse().map_err(|e: String| perr(lineno, e))?,
                ["pruned_below", "-"] => pruned_below = None,
                ["pruned_below", v] => pruned_below = Some(num(v)?),
                ["vocab", id, surface] => {
                    vocab_entries.insert(num(id)? as u32, unescape(surface));
                }
                ["total", k, t] => {
                    totals.insert(num(k)? as usize, num(t)?);
                }
                ["gram", _k, ids, c] => {
                    let gram = ids
                        .split(' ')
                        .map(|s| num(s).map(|v| v as u32))
                        .collect::<Result<Vec<u32>>>()?;
                    grams.push((gram, num(c)?));
                }
                _ => return Err(perr(lineno, format!("unrecognized line {line:?}"))),
            }
        }
        let n_max = n_max.ok_or_else(|| perr(0, "missing n_max".into()))?;
        if n_max == 0 {
            return Err(Error::ZeroOrder);
        }
        for (expect, (&id, _)) in vocab_entries.iter().enumerate() {
            if id as usize != expect {
                return Err(perr(0, format!("vocabulary IDs not contiguous at {id}")));
            }
        }
        let vocab = Vocabulary::from_entries(granularity, vocab_entries.into_values()).map_err(|e| perr(0, e))?;
        let mut table = NgramTable::empty(n_max, vocab);
        table.pruned_below = pruned_below;
        for (k, t) in totals {
            table.check_order(k)?;
            table.totals[k - 1] = t;
        }
        for (gram, c) in grams {
            table.insert(&gram, c).map_err(|e| perr(0, e))?;
        }
        Ok(table)
    }

    fn insert(&mut self, gram: &[u32], count: u64) -> std::result::Result<(), String> {
        let k = gram.len();
        if k == 0 || k > self.n_max {
            return Err(format!("gram of order {k} outside 1..={}", self.n_max));
        }
        if let Some(t) = gram.iter().find(|&&t| t as usize >= self.vocab.len()) {
            return Err(format!("token ID {t} outside vocabulary"));
        }
        if count == 0 {
            return Err("zero counts are not stored".into());
        }
        match (&mut self.maps[k - 1], self.layout) {
            (GramMap::Narrow(m), Layout::Narrow { bits }) => *m.entry(u64::pack(gram, bits)).or_insert(0) += count,
            (GramMap::Wide(m), Layout::Wide { bits }) => *m.entry(u128::pack(gram, bits)).or_insert(0) += count,
            (GramMap::Slices(m), _) => *m.entry(gram.into()).or_insert(0) += count,
            _ => unreachable!("map matches layout"),
        }
        Ok(())
    }
}

fn grouped_packed<K: PackedKey, F: FnMut(&[u64])>(map: &FxHashMap<K, u64>, bits: u32, group: &mut Vec<u64>, f: &mut F) {
    let mut entries: Vec<(K, u64)> = map.iter().map(|(&k, &c)| (k, c)).collect();
    entries.par_sort_unstable_by_key(|e| e.0);
    let mut current: Option<K> = None;
    for (key, c) in entries {
        let ctx = key.context(bits);
        if current.is_some_and(|p| p != ctx) {
            f(group);
            group.clear();
        }
        current = Some(ctx);
        group.push(c);
    }
    if !group.is_empty() {
        f(group);
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}
