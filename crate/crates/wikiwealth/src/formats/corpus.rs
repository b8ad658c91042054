//! Line-delimited JSON corpus: one article object per line.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use wikiwealth_core::corpus::GeoArticle;
use wikiwealth_core::geo::GeoPoint;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Record {
    id: String,
    title: String,
    lat: f64,
    lon: f64,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<String>,
}

/// Articles kept from a corpus stream, plus what was dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusLoad {
    pub articles: Vec<GeoArticle>,
    pub skipped: usize,
    /// `line N: reason` for every skipped record.
    pub diagnostics: Vec<String>,
}

/// Reads records in file order. Blank lines are ignored; malformed,
/// out-of-range and duplicate-id records are skipped and counted. Stops
/// once `limit` articles are kept.
pub fn parse_corpus<R: BufRead>(mut reader: R, limit: Option<usize>, source: &Path) -> Result<CorpusLoad> {
    let mut out = CorpusLoad::default();
    let mut seen = HashSet::new();
    let mut line = Vec::new();
    let mut lineno = 0u64;
    loop {
        if limit.is_some_and(|n| out.articles.len() >= n) {
            break;
        }
        line.clear();
        let n = reader.read_until(b'\n', &mut line).map_err(|e| Error::io(source, e))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let mut skip = |why: String| {
            out.skipped += 1;
            out.diagnostics.push(format!("line {lineno}: {why}"));
        };
        let rec: Record = match serde_json::from_slice(&line) {
            Ok(r) => r,
            Err(e) => {
                skip(e.to_string());
                continue;
            }
        };
        let article = GeoArticle {
            id: rec.id,
            title: rec.title,
            location: GeoPoint { lat: rec.lat, lon: rec.lon },
            body: rec.text,
            category: rec.category,
        };
        if let Err(e) = article.validate() {
            skip(e.to_string());
            continue;
        }
        if !seen.insert(article.id.clone()) {
            skip(format!("duplicate id {:?}", article.id));
            continue;
        }
        out.articles.push(article);
    }
    Ok(out)
}

pub fn read_corpus(path: &Path, limit: Option<usize>) -> Result<CorpusLoad> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(std::io::BufReader::new(file), limit, path)
}

pub fn write_corpus<W: Write>(mut w: W, articles: &[GeoArticle]) -> std::io::Result<()> {
    for a in articles {
        let rec = Record {
            id: a.id.clone(),
            title: a.title.clone(),
            lat: a.location.lat,
            lon: a.location.lon,
            text: a.body.clone(),
            category: a.category.clone(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
