//! Geolocated articles and text normalisation.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// One geolocated document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoArticle {
    pub id: String,
    pub title: String,
    pub location: GeoPoint,
    pub body: String,
    /// Coarse topic label such as `"school"` or `"settlement"`.
    pub category: Option<String>,
}

impl GeoArticle {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidArticle(String::from("empty id")));
        }
        if !self.location.is_valid() {
            return Err(Error::InvalidCoordinate { lat: self.location.lat, lon: self.location.lon });
        }
        Ok(())
    }

    pub fn tokenize(&self) -> TokenizedDoc {
        TokenizedDoc { id: self.id.clone(), tokens: preprocess(&self.body) }
    }
}

/// Preprocessed article body as consumed by [`crate::embed`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub id: String,
    pub tokens: Vec<String>,
}

/// ASCII punctuation is removed except the word-internal `'` and `-`.
pub fn is_stripped(c: char) -> bool {
    c.is_ascii_punctuation() && c != '\'' && c != '-'
}

/// Lowercase, strip punctuation, split on whitespace.
///
/// Characters that stay uppercase after lowercasing (a few symbol-like
/// letters have no lowercase form) are dropped along with the strip set.
pub fn preprocess(body: &str) -> Vec<String> {
    let cleaned: String = body
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| !is_stripped(*c) && !c.is_uppercase())
        .collect();
    cleaned.split_whitespace().map(String::from).collect()
}
