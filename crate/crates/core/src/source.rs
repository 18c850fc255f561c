//! Synthetic symbol sources with known entropy rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tokenize::{Granularity, TokenStream, Vocabulary};

/// Surface form of symbol `i`: `a`–`z` for alphabets up to 26, `s0`, `s1`, …
/// beyond that.
pub fn symbol_name(i: u32, alphabet: usize) -> String {
    if alphabet <= 26 {
        char::from(b'a' + i as u8).to_string()
    } else {
        format!("s{i}")
    }
}

/// Wraps raw symbols in a word-granularity stream whose vocabulary lists all
/// `alphabet` symbols in order.
pub fn to_stream(symbols: Vec<u32>, alphabet: usize) -> TokenStream {
    let vocab = Vocabulary::from_entries(
        Granularity::Word,
        (0..alphabet as u32).map(|i| symbol_name(i, alphabet)),
    )
    .expect("symbol names are distinct");
    TokenStream {
        tokens: symbols,
        vocab,
        source_meta: Default::default(),
    }
}

/// Space-separated text of the symbols, readable by the word tokenizer.
pub fn to_text(symbols: &[u32], alphabet: usize) -> String {
    let mut out = String::with_capacity(symbols.len() * 2);
    for (i, &s) in symbols.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&symbol_name(s, alphabet));
    }
    out
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    let mut acc = 0.0;
    row.iter()
        .map(|p| {
            acc += p / total;
            acc
        })
        .collect()
}

fn draw(cdf: &[f64], rng: &mut ChaCha8Rng) -> u32 {
    let u: f64 = rng.gen();
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u32
}

fn row_entropy(row: &[f64]) -> f64 {
    row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

fn validate_row(row: &[f64], alphabet: usize) -> Result<(), String> {
    if row.len() != alphabet {
        return Err(format!("row has {} entries, expected {alphabet}", row.len()));
    }
    if row.iter().any(|p| !(*p >= 0.0)) {
        return Err("probabilities must be non-negative".into());
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(format!("row sums to {sum}"));
    }
    Ok(())
}

/// Independent draws from a fixed distribution.
#[derive(Debug, Clone)]
pub struct IidSource {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl IidSource {
    pub fn new(probs: Vec<f64>) -> Result<Self, String> {
        if probs.is_empty() {
            return Err("empty distribution".into());
        }
        validate_row(&probs, probs.len())?;
        let cdf = cumulative(&probs);
        Ok(IidSource { probs, cdf })
    }

    pub fn uniform(alphabet: usize) -> Self {
        IidSource::new(vec![1.0 / alphabet as f64; alphabet]).expect("uniform is valid")
    }

    pub fn alphabet(&self) -> usize {
        self.probs.len()
    }

    pub fn entropy_rate(&self) -> f64 {
        row_entropy(&self.probs)
    }

    pub fn sample(&self, len: usize, seed: u64) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| draw(&self.cdf, &mut rng)).collect()
    }
}

/// Markov chain of order `k` over `alphabet` symbols. The state is the last
/// `k` symbols, encoded base-`alphabet` with the oldest symbol most
/// significant; `transitions[state]` is the next-symbol distribution.
#[derive(Debug, Clone)]
pub struct MarkovSource {
    order: usize,
    alphabet: usize,
    transitions: Vec<Vec<f64>>,
    cdfs: Vec<Vec<f64>>,
}

impl MarkovSource {
    pub fn new(order: usize, alphabet: usize, transitions: Vec<Vec<f64>>) -> Result<Self, String> {
        if order == 0 || alphabet == 0 {
            return Err("order and alphabet must be positive".into());
        }
        let states = alphabet
            .checked_pow(order as u32)
            .filter(|&s| s <= 1 << 24)
            .ok_or("state space too large")?;
        if transitions.len() != states {
            return Err(format!("{} rows given, expected {states}", transitions.len()));
        }
        for row in &transitions {
            validate_row(row, alphabet)?;
        }
        let cdfs = transitions.iter().map(|r| cumulative(r)).collect();
        Ok(MarkovSource {
            order,
            alphabet,
            transitions,
            cdfs,
        })
    }

    /// First-order chain from a row-stochastic matrix.
    pub fn from_matrix(matrix: Vec<Vec<f64>>) -> Result<Self, String> {
        let alphabet = matrix.len();
        MarkovSource::new(1, alphabet, matrix)
    }

    /// Rows drawn from a symmetric Dirichlet with the given concentration
    /// (smaller values give more predictable chains).
    pub fn random(order: usize, alphabet: usize, concentration: f64, seed: u64) -> Result<Self, String> {
        let states = alphabet.checked_pow(order as u32).ok_or("state space too large")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = rand_gamma(concentration)?;
        let transitions = (0..states)
            .map(|_| {
                let raw: Vec<f64> = (0..alphabet).map(|_| gamma(&mut rng).max(1e-300)).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|g| g / sum).collect()
            })
            .collect();
        MarkovSource::new(order, alphabet, transitions)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn transitions(&self) -> &[Vec<f64>] {
        &self.transitions
    }

    fn next_state(&self, state: usize, symbol: u32) -> usize {
        let states = self.transitions.len();
        (state * self.alphabet + symbol as usize) % states
    }

    /// Stationary distribution over states by power iteration from uniform.
    pub fn stationary(&self) -> Vec<f64> {
        let states = self.transitions.len();
        let mut pi = vec![1.0 / states as f64; states];
        for _ in 0..100_000 {
            let mut next = vec![0.0; states];
            for (s, &mass) in pi.iter().enumerate() {
                for (x, &p) in self.transitions[s].iter().enumerate() {
                    next[self.next_state(s, x as u32)] += mass * p;
                }
            }
            // lazy averaging keeps periodic chains from oscillating
            let delta: f64 = pi
                .iter_mut()
                .zip(&next)
                .map(|(p, n)| {
                    let new = 0.5 * (*p + n);
                    let d = (new - *p).abs();
                    *p = new;
                    d
                })
                .sum();
            if delta < 1e-15 {
                break;
            }
        }
        pi
    }

    /// `Σ_s π_s · H(transitions[s])`.
    pub fn entropy_rate(&self) -> f64 {
        self.stationary()
            .iter()
            .zip(&self.transitions)
            .map(|(p, row)| p * row_entropy(row))
            .sum()
    }

    /// `len` symbols after a burn-in of 1000 steps from a uniformly drawn state.
    pub fn sample(&self, len: usize, seed: u64) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = rng.gen_range(0..self.transitions.len());
        for _ in 0..1000 {
            let x = draw(&self.cdfs[state], &mut rng);
            state = self.next_state(state, x);
        }
        (0..len)
            .map(|_| {
                let x = draw(&self.cdfs[state], &mut rng);
                state = self.next_state(state, x);
                x
            })
            .collect()
    }
}

/// Marsaglia–Tsang gamma sampler with unit scale.
fn rand_gamma(shape: f64) -> Result<impl Fn(&mut ChaCha8Rng) -> f64, String> {
    if !(shape > 0.0) {
        return Err("concentration must be positive".into());
    }
    let boost = shape < 1.0;
    let k = if boost { shape + 1.0 } else { shape };
    let d = k - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    Ok(move |rng: &mut ChaCha8Rng| {
        let g = loop {
            let x = standard_normal(rng);
            let v = (1.0 + c * x).powi(3);
            if v <= 0.0 {
                continue;
            }
            let u: f64 = rng.gen();
            if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
                break d * v;
            }
        };
        if boost {
            let u: f64 = rng.gen();
            g * u.powf(1.0 / shape)
        } else {
            g
        }
    })
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_rate() {
        let m = MarkovSource::from_matrix(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let pi = m.stationary();
        assert!((pi[0] - 5.0 / 6.0).abs() < 1e-12);
        let h = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        let expected = 5.0 / 6.0 * h(0.9) + 1.0 / 6.0 * h(0.5);
        assert!((m.entropy_rate() - expected).abs() < 1e-12);
        assert!((expected - 0.5574).abs() < 1e-4);
    }

    #[test]
    fn sampling_is_seeded() {
        let m = MarkovSource::random(2, 3, 0.5, 7).unwrap();
        assert_eq!(m.sample(100, 1), m.sample(100, 1));
        assert_ne!(m.sample(100, 1), m.sample(100, 2));
        assert!(m.sample(1000, 3).iter().all(|&s| s < 3));
    }

    #[test]
    fn empirical_frequencies() {
        let m = MarkovSource::from_matrix(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let xs = m.sample(200_000, 11);
        let ones = xs.iter().filter(|&&x| x == 1).count() as f64 / xs.len() as f64;
        assert!((ones - 1.0 / 6.0).abs() < 0.005, "{ones}");
    }

    #[test]
    fn iid_uniform_rate() {
        assert!((IidSource::uniform(8).entropy_rate() - 3.0).abs() < 1e-12);
        assert!(IidSource::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn random_rows_are_distributions() {
        let m = MarkovSource::random(1, 5, 0.3, 42).unwrap();
        for row in m.transitions() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(m.entropy_rate() < 5f64.log2());
    }

    #[test]
    fn higher_order_state_encoding() {
        // order 2 over {0,1}: next symbol = previous-but-one symbol (period 2 copy)
        let rows = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let m = MarkovSource::new(2, 2, rows).unwrap();
        let xs = m.sample(50, 5);
        for w in xs.windows(3) {
            assert_eq!(w[2], w[0]);
        }
        assert!(m.entropy_rate().abs() < 1e-12);
    }

    #[test]
    fn text_rendering() {
        assert_eq!(to_text(&[0, 1, 2], 3), "a b c");
        assert_eq!(to_text(&[0, 30], 40), "s0 s30");
        let s = to_stream(vec![1, 0], 2);
        assert_eq!(s.detokenize(), "b a");
    }
}
