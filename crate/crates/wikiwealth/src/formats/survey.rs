//! Survey CSV in outcome mode (`...,urban,outcome`) or raw asset mode
//! (`...,urban,asset_1,...,asset_k`).

use std::io::{Read, Write};
use std::path::Path;

use wikiwealth_core::geo::GeoPoint;
use wikiwealth_core::survey::{
    aggregate_clusters, compute_awi, load_education, AssetMatrix, EducationLoad, EducationRecord, Household,
    SurveyPoint,
};

use crate::error::{Error, Result};

const KEY_COLUMNS: [&str; 5] = ["country", "cluster_id", "lat", "lon", "urban"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutcomeLoad {
    pub points: Vec<SurveyPoint>,
    pub rejected: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurveyTable {
    Outcomes(OutcomeLoad),
    Assets(AssetMatrix),
}

fn parse_err(source: &Path, line: u64, reason: impl Into<String>) -> Error {
    Error::Parse { code: "survey.bad_file", path: source.to_path_buf(), line, reason: reason.into() }
}

fn csv_err(source: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(source, io),
        kind => parse_err(source, line, format!("{kind:?}")),
    }
}

fn parse_urban(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

fn parse_num(s: &str, what: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("{what} {s:?} is not a number"))
}

struct Keys {
    country: String,
    cluster_id: String,
    location: GeoPoint,
    urban: bool,
}

fn parse_keys(rec: &csv::StringRecord) -> std::result::Result<Keys, String> {
    let location = GeoPoint::new(parse_num(&rec[2], "lat")?, parse_num(&rec[3], "lon")?).map_err(|e| e.to_string())?;
    let urban = parse_urban(&rec[4]).ok_or_else(|| format!("urban flag {:?} is not 0/1/true/false", &rec[4]))?;
    if rec[0].is_empty() || rec[1].is_empty() {
        return Err(String::from("empty country or cluster id"));
    }
    Ok(Keys { country: rec[0].to_string(), cluster_id: rec[1].to_string(), location, urban })
}

/// Parses either layout, chosen by the header.
pub fn parse_survey<R: Read>(reader: R, source: &Path) -> Result<SurveyTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 6 || names[..5] != KEY_COLUMNS {
        return Err(parse_err(source, 1, format!("header must start with {}", KEY_COLUMNS.join(","))));
    }
    if names[5..] == ["outcome"] {
        return parse_outcomes(rdr, source).map(SurveyTable::Outcomes);
    }
    for (k, name) in names[5..].iter().enumerate() {
        if *name != format!("asset_{}", k + 1) {
            return Err(parse_err(source, 1, format!("expected asset_{} at column {}, found {name:?}", k + 1, k + 6)));
        }
    }
    parse_assets(rdr, names.len() - 5, source).map(SurveyTable::Assets)
}

fn parse_outcomes<R: Read>(mut rdr: csv::Reader<R>, source: &Path) -> Result<OutcomeLoad> {
    let mut out = OutcomeLoad::default();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(csv_err(source, e)),
            Err(e) => {
                out.rejected += 1;
                out.diagnostics.push(e.to_string());
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        let parsed = (|| {
            if rec.len() != 6 {
                return Err(format!("expected 6 fields, found {}", rec.len()));
            }
            let k = parse_keys(&rec)?;
            let point = SurveyPoint {
                cluster_id: k.cluster_id,
                country: k.country,
                location: k.location,
                outcome: parse_num(&rec[5], "outcome")?,
                urban: k.urban,
            };
            point.validate().map_err(|e| e.to_string())?;
            Ok(point)
        })();
        match parsed {
            Ok(p) => out.points.push(p),
            Err(why) => {
                out.rejected += 1;
                out.diagnostics.push(format!("line {line}: {why}"));
            }
        }
    }
    Ok(out)
}

/// Asset rows must be complete: any bad cell aborts the load.
fn parse_assets<R: Read>(mut rdr: csv::Reader<R>, cols: usize, source: &Path) -> Result<AssetMatrix> {
    let mut households = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(source, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != cols + 5 {
            return Err(parse_err(source, line, format!("expected {} fields, found {}", cols + 5, rec.len())));
        }
        let k = parse_keys(&rec).map_err(|why| parse_err(source, line, why))?;
        for (j, cell) in rec.iter().skip(5).enumerate() {
            let v = parse_num(cell, &format!("asset_{}", j + 1)).map_err(|why| parse_err(source, line, why))?;
            values.push(v);
        }
        households.push(Household { country: k.country, cluster_id: k.cluster_id, location: k.location, urban: k.urban });
    }
    Ok(AssetMatrix::new(households, values, cols)?)
}

pub fn read_survey(path: &Path) -> Result<SurveyTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_survey(std::io::BufReader::new(file), path)
}

/// Cluster points from every file. Asset tables are pooled across files
/// before the wealth index is computed; outcome tables are taken as is.
pub fn load_survey_points(paths: &[&Path]) -> Result<OutcomeLoad> {
    let mut out = OutcomeLoad::default();
    let mut assets = Vec::new();
    for path in paths {
        match read_survey(path)? {
            SurveyTable::Outcomes(load) => {
                out.points.extend(load.points);
                out.rejected += load.rejected;
                out.diagnostics.extend(load.diagnostics);
            }
            SurveyTable::Assets(m) => assets.push(m),
        }
    }
    if !assets.is_empty() {
        let pooled = AssetMatrix::pool(&assets)?;
        let scores = compute_awi(&pooled)?;
        out.points.extend(aggregate_clusters(&scores, pooled.households())?);
    }
    Ok(out)
}

/// Education levels from an outcome-mode file. Unparseable rows count as
/// rejected alongside out-of-range levels.
pub fn read_education(path: &Path, cap: Option<usize>) -> Result<EducationLoad> {
    let load = match read_survey(path)? {
        SurveyTable::Outcomes(l) => l,
        SurveyTable::Assets(_) => return Err(parse_err(path, 1, "education file must use the outcome layout")),
    };
    let records = load.points.into_iter().map(|p| EducationRecord {
        country: p.country,
        cluster_id: p.cluster_id,
        location: p.location,
        urban: p.urban,
        level: p.outcome,
    });
    let mut edu = load_education(records, cap);
    edu.rejected += load.rejected;
    Ok(edu)
}

pub fn write_outcomes<W: Write>(w: W, points: &[SurveyPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let sink = Path::new("<survey>");
    wtr.write_record(KEY_COLUMNS.iter().chain(&["outcome"])).map_err(|e| csv_err(sink, e))?;
    for p in points {
        wtr.write_record([
            p.country.clone(),
            p.cluster_id.clone(),
            p.location.lat.to_string(),
            p.location.lon.to_string(),
            u8::from(p.urban).to_string(),
            p.outcome.to_string(),
        ])
        .map_err(|e| csv_err(sink, e))?;
    }
    wtr.flush().map_err(|e| Error::io(sink, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<SurveyTable> {
        parse_survey(s.as_bytes(), Path::new("<test>"))
    }

    #[test]
    fn outcome_rows_and_rejections() {
        let text = "country,cluster_id,lat,lon,urban,outcome\n\
                    A,1,0.5,30.5,1,0.25\n\
                    A,2,95,30.5,0,0.1\n\
                    A,3,0.5,30.5,maybe,0.1\n\
                    A,4,0.5,30.5,false,nan\n\
                    A,5,0.5\n\
                    B,6,-1,36,true,-1.5\n";
        let SurveyTable::Outcomes(load) = parse(text).unwrap() else { panic!("wrong layout") };
        assert_eq!(load.points.len(), 2);
        assert_eq!(load.rejected, 4);
        assert!(load.points[0].urban && load.points[1].urban);
        assert_eq!(load.points[1].outcome, -1.5);
    }

    #[test]
    fn write_then_read() {
        let SurveyTable::Outcomes(load) = parse("country,cluster_id,lat,lon,urban,outcome\nA,1,0.1,0.2,0,0.30000000000000004\n").unwrap()
        else {
            panic!()
        };
        let mut buf = Vec::new();
        write_outcomes(&mut buf, &load.points).unwrap();
        let SurveyTable::Outcomes(back) = parse_survey(&buf[..], Path::new("<test>")).unwrap() else { panic!() };
        assert_eq!(back.points, load.points);
    }

    #[test]
    fn asset_layout() {
        let text = "country,cluster_id,lat,lon,urban,asset_1,asset_2,asset_3\n\
                    A,1,0,0,1,1,0,2\n\
                    A,1,0,0,1,0,1,1\n\
                    A,2,0,1,0,1,1,0\n";
        let SurveyTable::Assets(m) = parse(text).unwrap() else { panic!("wrong layout") };
        assert_eq!((m.rows(), m.cols()), (3, 3));
        assert_eq!(m.row(2), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn asset_errors_are_fatal() {
        let missing = "country,cluster_id,lat,lon,urban,asset_1,asset_2\nA,1,0,0,1,1,\n";
        assert!(matches!(parse(missing), Err(Error::Parse { line: 2, .. })));
        let misnamed = "country,cluster_id,lat,lon,urban,asset_1,asset_3\n";
        assert!(matches!(parse(misnamed), Err(Error::Parse { line: 1, .. })));
        let bad_header = "country,lat,lon\n";
        assert!(parse(bad_header).is_err());
    }
}
