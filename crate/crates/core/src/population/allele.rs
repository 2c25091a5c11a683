use std::fmt;

use serde::{Deserialize, Serialize};

pub const DEFAULT_ALLELE_CHARS: usize = 4;

/// Marker used when an allele is displayed; never stored inside `text`.
pub const EOS_MARKER: &str = "⟨EOS⟩";

/// The first few characters of a completion.
///
/// A completion shorter than the allele width keeps all of its characters and
/// is marked `eos`, so `"ab"` followed by end-of-sequence differs from any
/// longer completion starting with `"ab"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AlleleKey {
    pub text: String,
    pub eos: bool,
}

impl AlleleKey {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

impl fmt::Display for AlleleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)?;
        if self.eos {
            f.write_str(EOS_MARKER)?;
        }
        Ok(())
    }
}

/// Takes the first `allele_chars` Unicode scalar values of `completion`.
pub fn extract_allele(completion: &str, allele_chars: usize) -> AlleleKey {
    match completion.char_indices().nth(allele_chars) {
        Some((byte, _)) => AlleleKey {
            text: completion[..byte].to_string(),
            eos: false,
        },
        None => {
            let eos = completion.chars().count() < allele_chars;
            AlleleKey {
                text: completion.to_string(),
                eos,
            }
        }
    }
}
