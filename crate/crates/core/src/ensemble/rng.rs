//! Splittable, counter-based random streams.
//!
//! A stream is addressed by a 64-bit seed plus a path of labels. The path is
//! hashed with SHA-256 into a 256-bit ChaCha8 key; the ChaCha block counter then
//! supplies the sequence. Streams with the same address produce identical output,
//! and streams with different addresses use unrelated keys.
//!
//! Reproducibility is promised within this implementation only. Key derivation
//! is versioned by the `DOMAIN` prefix below; bump it if the layout changes.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"signed-rmt/stream/v1";

/// One component of a stream path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Label {
    Name(String),
    Index(u64),
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Name(s.to_owned())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label::Name(s)
    }
}

impl From<u64> for Label {
    fn from(i: u64) -> Self {
        Label::Index(i)
    }
}

impl From<usize> for Label {
    fn from(i: usize) -> Self {
        Label::Index(i as u64)
    }
}

impl From<u32> for Label {
    fn from(i: u32) -> Self {
        Label::Index(i as u64)
    }
}

impl From<i32> for Label {
    fn from(i: i32) -> Self {
        Label::Index(i as u64)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Name(s) => f.write_str(s),
            Label::Index(i) => write!(f, "{i}"),
        }
    }
}

/// A deterministic random stream identified by `(seed, path)`.
#[derive(Clone)]
pub struct RngStream {
    seed: u64,
    path: Vec<Label>,
    inner: ChaCha8Rng,
}

impl fmt::Debug for RngStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RngStream")
            .field("seed", &self.seed)
            .field("path", &self.path)
            .field("word_pos", &self.inner.get_word_pos())
            .finish()
    }
}

fn derive_key(seed: u64, path: &[Label]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(seed.to_le_bytes());
    for label in path {
        match label {
            Label::Name(s) => {
                h.update([1u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Label::Index(i) => {
                h.update([2u8]);
                h.update(i.to_le_bytes());
            }
        }
    }
    h.finalize().into()
}

/// Build the stream addressed by `(seed, path)`.
pub fn derive_stream(seed: u64, path: &[Label]) -> RngStream {
    RngStream {
        seed,
        path: path.to_vec(),
        inner: ChaCha8Rng::from_seed(derive_key(seed, path)),
    }
}

impl RngStream {
    /// Root stream for `seed` (empty path).
    pub fn new(seed: u64) -> Self {
        derive_stream(seed, &[])
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[Label] {
        &self.path
    }

    /// Substream at `path ++ [label]`. Independent of how much of `self` has
    /// been consumed.
    pub fn child(&self, label: impl Into<Label>) -> RngStream {
        let mut path = self.path.clone();
        path.push(label.into());
        derive_stream(self.seed, &path)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
