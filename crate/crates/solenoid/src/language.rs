//! The factor language of a primitive substitution.
//!
//! Legal words of a fixed length are computed by a closure iteration: seed
//! with the factors of a long enough image of the fixed point's first
//! letter, then repeatedly substitute every known word and harvest factors
//! until nothing new appears. Every window of length ℓ in an image spans
//! images of at most ℓ consecutive letters, so iterating on ℓ-words is
//! complete; soundness holds because the fixed point is invariant under
//! the (prepared) rule.

use crate::error::{Error, Result};
use crate::substitution::{Letter, SubstitutionRule};
use std::collections::{BTreeMap, BTreeSet};

/// All length-`len` factors of `word`.
pub fn factors(word: &[Letter], len: usize) -> BTreeSet<Vec<Letter>> {
    word.windows(len).map(|w| w.to_vec()).collect()
}

/// Occurrence counts of every length-`len` factor of `text` (overlaps
/// counted), in one pass.
pub fn factor_counts(text: &[Letter], len: usize) -> BTreeMap<Vec<Letter>, usize> {
    let mut out = BTreeMap::new();
    for w in text.windows(len) {
        *out.entry(w.to_vec()).or_insert(0) += 1;
    }
    out
}

/// All legal words of length `len` of the substitution's subshift, sorted
/// lexicographically. Requires a primitive rule (the language is then the
/// factor set of the unique minimal subshift).
pub fn legal_words(rule: &SubstitutionRule, len: usize) -> Result<Vec<Vec<Letter>>> {
    assert!(len >= 1, "words of length zero are not meaningful");
    rule.primitivity_check()?;
    let (prep, _, seed) = rule.prepared();
    let mut w = vec![seed];
    for _ in 0..4096 {
        if w.len() >= len {
            break;
        }
        let next = prep.apply(&w);
        if next.len() == w.len() {
            return Err(Error::Precondition {
                msg: format!(
                    "substitution does not expand; cannot reach words of length {}",
                    len
                ),
            });
        }
        w = next;
    }
    if w.len() < len {
        return Err(Error::Precondition {
            msg: format!("length {} unreachable within iteration budget", len),
        });
    }
    let mut words: BTreeSet<Vec<Letter>> = factors(&w, len);
    loop {
        let mut fresh: Vec<Vec<Letter>> = Vec::new();
        for u in &words {
            for f in factors(&prep.apply(u), len) {
                if !words.contains(&f) {
                    fresh.push(f);
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        words.extend(fresh);
    }
    Ok(words.into_iter().collect())
}

/// Whether `word` is a factor of the subshift.
pub fn is_legal(rule: &SubstitutionRule, word: &[Letter]) -> Result<bool> {
    Ok(legal_words(rule, word.len())?.iter().any(|w| w == word))
}
