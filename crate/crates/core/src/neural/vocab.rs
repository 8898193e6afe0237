use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub const UNK: usize = 0;
pub const UNK_TOKEN: &str = "<unk>";

/// Token vocabulary; index 0 is the unknown token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Tokens seen at least `min_freq` times, sorted.
    pub fn build<'a, I, S>(messages: I, min_freq: usize) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for m in messages {
            for t in m {
                *counts.entry(t.as_ref()).or_default() += 1;
            }
        }
        let mut tokens = vec![UNK_TOKEN.to_owned()];
        tokens.extend(counts.into_iter().filter(|&(t, c)| c >= min_freq && t != UNK_TOKEN).map(|(t, _)| t.to_owned()));
        Vocab::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Ids for a message; an empty message encodes as a lone UNK.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        if tokens.is_empty() {
            return vec![UNK];
        }
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_frequency_and_unk() {
        let a = ["the", "sun", "left"];
        let b = ["the", "sun", "right"];
        let v = Vocab::build([&a[..], &b[..]], 2);
        assert_eq!(v.len(), 3);
        assert_eq!(v.token(0), UNK_TOKEN);
        assert_eq!(v.encode(&["sun", "left", "the"]), vec![v.id("sun"), UNK, v.id("the")]);
        assert_eq!(v.encode::<&str>(&[]), vec![UNK]);
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocab::from(vec![UNK_TOKEN.to_owned(), "a".into()]);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"["<unk>","a"]"#);
        assert_eq!(serde_json::from_str::<Vocab>(&s).unwrap(), v);
    }
}
