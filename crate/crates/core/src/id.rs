//! Engine-generated object identity.
//!
//! Ids look like `clip_a1b2c3d4`: a kind prefix, an underscore and eight
//! lowercase Crockford base32 characters drawn from a seeded ChaCha stream,
//! so two projects created with the same seed allocate the same ids.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const ALPHABET: &[u8; 32] = b"0123456789abcdefghjkmnpqrstvwxyz";
const SUFFIX_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdKind {
    Proj,
    Asset,
    Track,
    Clip,
    Anim,
    Sugg,
    Sess,
    Step,
    Prompt,
}

impl IdKind {
    pub const ALL: [IdKind; 9] = [
        IdKind::Proj,
        IdKind::Asset,
        IdKind::Track,
        IdKind::Clip,
        IdKind::Anim,
        IdKind::Sugg,
        IdKind::Sess,
        IdKind::Step,
        IdKind::Prompt,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            IdKind::Proj => "proj",
            IdKind::Asset => "asset",
            IdKind::Track => "track",
            IdKind::Clip => "clip",
            IdKind::Anim => "anim",
            IdKind::Sugg => "sugg",
            IdKind::Sess => "sess",
            IdKind::Step => "step",
            IdKind::Prompt => "prompt",
        }
    }

    pub fn from_prefix(prefix: &str) -> Option<IdKind> {
        IdKind::ALL.into_iter().find(|k| k.prefix() == prefix)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed object id `{0}`")]
pub struct ParseIdError(pub String);

impl ObjectId {
    fn from_parts(kind: IdKind, suffix: &str) -> Self {
        ObjectId(format!("{}_{}", kind.prefix(), suffix))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn kind(&self) -> IdKind {
        let prefix = self.0.split('_').next().unwrap_or_default();
        IdKind::from_prefix(prefix).expect("validated at construction")
    }

    pub fn is_kind(&self, kind: IdKind) -> bool {
        self.kind() == kind
    }

    /// Regex fragment matching any id of `kind`; used in tool schemas.
    pub fn pattern(kind: IdKind) -> String {
        format!("^{}_[0-9a-hjkmnp-tv-z]{{{SUFFIX_LEN}}}$", kind.prefix())
    }
}

impl FromStr for ObjectId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseIdError(s.to_string());
        let (prefix, suffix) = s.split_once('_').ok_or_else(bad)?;
        let kind = IdKind::from_prefix(prefix).ok_or_else(bad)?;
        if suffix.len() != SUFFIX_LEN || !suffix.bytes().all(|b| ALPHABET.contains(&b)) {
            return Err(bad());
        }
        Ok(ObjectId::from_parts(kind, suffix))
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for ObjectId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ObjectId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Deterministic id allocator. Each allocation draws from its own ChaCha
/// stream indexed by `counter`, so the generator state is just two integers
/// and survives serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdGen {
    pub seed: u64,
    pub counter: u64,
}

impl IdGen {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Allocate a fresh id of `kind` for which `taken` returns false.
    pub fn next(&mut self, kind: IdKind, taken: impl Fn(&ObjectId) -> bool) -> ObjectId {
        loop {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(self.counter);
            self.counter += 1;
            let bits = rng.next_u64();
            let suffix: String = (0..SUFFIX_LEN)
                .map(|i| ALPHABET[((bits >> (i * 5)) & 31) as usize] as char)
                .collect();
            let id = ObjectId::from_parts(kind, &suffix);
            if !taken(&id) {
                return id;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_ids_parse_and_carry_kind() {
        let mut gen = IdGen::new(7);
        for kind in IdKind::ALL {
            let id = gen.next(kind, |_| false);
            let parsed: ObjectId = id.as_str().parse().unwrap();
            assert_eq!(parsed, id);
            assert_eq!(parsed.kind(), kind);
            assert!(regex::Regex::new(&ObjectId::pattern(kind)).unwrap().is_match(id.as_str()));
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = IdGen::new(42);
        let mut b = IdGen::new(42);
        for _ in 0..20 {
            assert_eq!(a.next(IdKind::Clip, |_| false), b.next(IdKind::Clip, |_| false));
        }
    }

    #[test]
    fn skips_taken_ids() {
        let mut probe = IdGen::new(3);
        let first = probe.next(IdKind::Clip, |_| false);
        let mut gen = IdGen::new(3);
        let id = gen.next(IdKind::Clip, |c| *c == first);
        assert_ne!(id, first);
        assert_eq!(gen.counter, 2);
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["clip", "clip_123", "clip_ABCDEFGH", "blob_abcdefgh", "clip_abcdefgi", "_abcdefgh"] {
            assert!(bad.parse::<ObjectId>().is_err(), "{bad}");
        }
    }
}
