//! Corpus BLEU-4 with the `13a` tokenizer used by SacreBLEU.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::MetricsError;

pub const MAX_NGRAM_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    /// Zero matches at any order yields a zero score.
    #[default]
    None,
    /// SacreBLEU's `exp` method: the k-th zero-match order gets precision 1 / (2^k * total).
    Exp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    /// In [0, 100].
    pub score: f64,
    /// Clipped n-gram precisions for orders 1..=4, as fractions in [0, 1].
    pub ngram_precisions: [f64; MAX_NGRAM_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub matches: [usize; MAX_NGRAM_ORDER],
    pub totals: [usize; MAX_NGRAM_ORDER],
}

fn regexes() -> &'static [(Regex, &'static str); 4] {
    static RES: OnceLock<[(Regex, &'static str); 4]> = OnceLock::new();
    RES.get_or_init(|| {
        [
            // punctuation and symbols (ASCII ranges {-~ [-` space-& (-+ :-@ and /)
            (Regex::new(r"([{-~\[-\x60 -&(-+:-@/])").unwrap(), " $1 "),
            // period and comma unless preceded by a digit
            (Regex::new(r"([^0-9])([.,])").unwrap(), "$1 $2 "),
            // period and comma unless followed by a digit
            (Regex::new(r"([.,])([^0-9])").unwrap(), " $1 $2"),
            // dash preceded by a digit
            (Regex::new(r"([0-9])(-)").unwrap(), "$1 $2 "),
        ]
    })
}

/// SacreBLEU `13a` tokenization (mteval-v13a compatible).
pub fn tokenize_13a(line: &str) -> String {
    let mut line = line.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = line.replace("&quot;", "\"").replace("&amp;", "&").replace("&lt;", "<").replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for (re, rep) in regexes() {
        line = re.replace_all(&line, *rep).into_owned();
    }
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn ngram_counts(tokens: &[&str], n: usize) -> HashMap<Vec<String>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(|s| s.to_string()).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-4, case-sensitive, `13a` tokenization, no smoothing.
pub fn corpus_bleu(hypotheses: &[impl AsRef<str>], references: &[impl AsRef<str>]) -> Result<BleuScore, MetricsError> {
    corpus_bleu_with(hypotheses, references, Smoothing::None)
}

pub fn corpus_bleu_with(
    hypotheses: &[impl AsRef<str>],
    references: &[impl AsRef<str>],
    smoothing: Smoothing,
) -> Result<BleuScore, MetricsError> {
    if hypotheses.len() != references.len() {
        return Err(MetricsError::LengthMismatch { hypotheses: hypotheses.len(), references: references.len() });
    }
    if hypotheses.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }

    let mut matches = [0usize; MAX_NGRAM_ORDER];
    let mut totals = [0usize; MAX_NGRAM_ORDER];
    let mut hyp_len = 0;
    let mut ref_len = 0;

    for (hyp, reference) in hypotheses.iter().zip(references) {
        let hyp = tokenize_13a(hyp.as_ref());
        let reference = tokenize_13a(reference.as_ref());
        let hyp_tokens: Vec<&str> = hyp.split(' ').filter(|t| !t.is_empty()).collect();
        let ref_tokens: Vec<&str> = reference.split(' ').filter(|t| !t.is_empty()).collect();
        hyp_len += hyp_tokens.len();
        ref_len += ref_tokens.len();
        for n in 1..=MAX_NGRAM_ORDER {
            let ref_counts = ngram_counts(&ref_tokens, n);
            for (gram, count) in ngram_counts(&hyp_tokens, n) {
                totals[n - 1] += count;
                matches[n - 1] += count.min(ref_counts.get(&gram).copied().unwrap_or(0));
            }
        }
    }

    let brevity_penalty = if hyp_len >= ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };

    let mut precisions = [0.0; MAX_NGRAM_ORDER];
    let mut smooth_denominator = 1.0;
    for n in 0..MAX_NGRAM_ORDER {
        if totals[n] == 0 {
            break;
        }
        precisions[n] = if matches[n] > 0 {
            matches[n] as f64 / totals[n] as f64
        } else {
            match smoothing {
                Smoothing::None => 0.0,
                Smoothing::Exp => {
                    smooth_denominator *= 2.0;
                    1.0 / (smooth_denominator * totals[n] as f64)
                }
            }
        };
    }

    let score = if matches[0] == 0 || precisions.iter().any(|&p| p <= 0.0) {
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_NGRAM_ORDER as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };

    Ok(BleuScore { score, ngram_precisions: precisions, brevity_penalty, hyp_len, ref_len, matches, totals })
}
