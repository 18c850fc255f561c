//! Entropy-rate estimation for text sources.
//!
//! The pipeline turns raw text into a token stream ([`tokenize`]), counts every
//! k-gram up to a maximum order ([`ngram`]), evaluates plug-in conditional
//! entropies per context length ([`entropy`]), labels orders that are
//! undersampled ([`diagnose`]) and extrapolates the curve to infinite context
//! with an exponential least-squares fit ([`fit`]). [`ingest`] loads corpus
//! trees and generation JSONL files; [`source`] provides synthetic sources with
//! closed-form entropy rates for testing.
//!
//! Numeric code is generic over the floating-point type via [`Scalar`]; the
//! aliases below fix it to `f64` (the default everywhere in the CLI) or `f32`.

pub mod diagnose;
pub mod entropy;
mod error;
pub mod fit;
pub mod ingest;
pub mod ngram;
mod scalar;
pub mod source;
pub mod tokenize;

pub use diagnose::{coverage_report, undersampled, CoverageReport, OrderCoverage, Thresholds};
pub use entropy::{conditional_entropy, entropy_curve, shannon_entropy, CurvePoint, EntropyCurve};
pub use error::{Error, Result};
pub use fit::{estimate_rate, fit_exponential, initial_guess, ExpFit, FitFlag, FitOptions};
pub use ingest::{load_stream, scan_corpus, CorpusManifest, Partition};
pub use ngram::{count_ngrams, count_ngrams_chunked, count_ngrams_with, merge_tables, CountOptions, NgramTable};
pub use scalar::Scalar;
pub use tokenize::{tokenize, tokenize_letters, tokenize_words, Granularity, TokenStream, Vocabulary};

/// Default maximum context length.
pub const DEFAULT_N_MAX: usize = 6;

pub type EntropyCurve64 = EntropyCurve<f64>;
pub type EntropyCurve32 = EntropyCurve<f32>;
pub type ExpFit64 = ExpFit<f64>;
pub type ExpFit32 = ExpFit<f32>;
pub type CoverageReport64 = CoverageReport<f64>;
pub type CoverageReport32 = CoverageReport<f32>;
pub type FitOptions64 = FitOptions<f64>;
pub type Thresholds64 = Thresholds<f64>;
