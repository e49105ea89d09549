//! CSV ingestion and export for voter rolls and site lists.
//!
//! Column names are configurable because roll formats differ between
//! states. Rows whose coordinates fail to parse are dropped and counted per
//! group, never imputed.

use super::{DatasetError, Site, SiteKind, VoterRecord};
use crate::geo::GeoPoint;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

/// Column-name configuration for voter files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub id: String,
    pub group: String,
    pub lat: String,
    pub lon: String,
    pub precinct: Option<String>,
    pub site_id: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            id: "id".into(),
            group: "group".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            precinct: Some("precinct".into()),
            site_id: Some("site_id".into()),
        }
    }
}

/// Records kept plus the rows dropped for unparseable coordinates, keyed by
/// the raw group string of the dropped row.
#[derive(Debug, Clone, Serialize)]
pub struct LoadOutcome {
    pub voters: Vec<VoterRecord>,
    pub dropped_by_group: BTreeMap<String, usize>,
}

impl LoadOutcome {
    pub fn total_dropped(&self) -> usize {
        self.dropped_by_group.values().sum()
    }
}

fn required_column(
    headers: &csv::StringRecord,
    name: &str,
) -> Result<usize, DatasetError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| DatasetError::Schema(format!("missing required column `{name}`")))
}

fn optional_column(headers: &csv::StringRecord, name: &Option<String>) -> Option<usize> {
    name.as_ref()
        .and_then(|n| headers.iter().position(|h| h == n))
}

pub fn load_voters<P: AsRef<Path>>(
    path: P,
    schema: &CsvSchema,
) -> Result<LoadOutcome, DatasetError> {
    let file = std::fs::File::open(path.as_ref())?;
    load_voters_from_reader(file, schema)
}

pub fn load_voters_from_reader<R: Read>(
    reader: R,
    schema: &CsvSchema,
) -> Result<LoadOutcome, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|_| DatasetError::InvalidInput("empty voter file".into()))?
        .clone();
    if headers.is_empty() {
        return Err(DatasetError::InvalidInput("empty voter file".into()));
    }
    let id_col = required_column(&headers, &schema.id)?;
    let group_col = required_column(&headers, &schema.group)?;
    let lat_col = required_column(&headers, &schema.lat)?;
    let lon_col = required_column(&headers, &schema.lon)?;
    let precinct_col = optional_column(&headers, &schema.precinct);
    let site_col = optional_column(&headers, &schema.site_id);

    let mut voters = Vec::new();
    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for row in rdr.records() {
        let row = row?;
        let group = row.get(group_col).unwrap_or("").trim().to_string();
        let lat = row.get(lat_col).unwrap_or("").trim().parse::<f64>();
        let lon = row.get(lon_col).unwrap_or("").trim().parse::<f64>();
        let location = match (lat, lon) {
            (Ok(la), Ok(lo)) => GeoPoint::new(la, lo).ok(),
            _ => None,
        };
        let Some(location) = location else {
            *dropped.entry(group).or_insert(0) += 1;
            continue;
        };
        if group.is_empty() {
            *dropped.entry(group).or_insert(0) += 1;
            continue;
        }
        let id = row.get(id_col).unwrap_or("").trim().to_string();
        if !seen_ids.insert(id.clone()) {
            return Err(DatasetError::DuplicateId(id));
        }
        let opt = |c: Option<usize>| {
            c.and_then(|i| row.get(i))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
        };
        voters.push(VoterRecord {
            id,
            group,
            location,
            precinct: opt(precinct_col),
            assigned_site: opt(site_col),
        });
    }
    if voters.is_empty() && dropped.is_empty() {
        return Err(DatasetError::InvalidInput("voter file has no data rows".into()));
    }
    Ok(LoadOutcome {
        voters,
        dropped_by_group: dropped,
    })
}

pub fn write_voters<P: AsRef<Path>>(
    path: P,
    voters: &[VoterRecord],
    schema: &CsvSchema,
) -> Result<(), DatasetError> {
    let file = std::fs::File::create(path.as_ref())?;
    write_voters_to_writer(file, voters, schema)
}

pub fn write_voters_to_writer<W: Write>(
    writer: W,
    voters: &[VoterRecord],
    schema: &CsvSchema,
) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![
        schema.id.as_str(),
        schema.group.as_str(),
        schema.lat.as_str(),
        schema.lon.as_str(),
    ];
    if let Some(p) = &schema.precinct {
        header.push(p);
    }
    if let Some(s) = &schema.site_id {
        header.push(s);
    }
    wtr.write_record(&header)?;
    for v in voters {
        let mut row = vec![
            v.id.clone(),
            v.group.clone(),
            format_coord(v.location.lat()),
            format_coord(v.location.lon()),
        ];
        if schema.precinct.is_some() {
            row.push(v.precinct.clone().unwrap_or_default());
        }
        if schema.site_id.is_some() {
            row.push(v.assigned_site.clone().unwrap_or_default());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Shortest decimal that round-trips, so write/load cycles are bit-exact.
fn format_coord(x: f64) -> String {
    let mut buf = ryu_like(x);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("nan") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_like(x: f64) -> String {
    // `{}` on f64 already produces the shortest representation that parses
    // back to the same bits.
    format!("{x}")
}

pub fn load_sites<P: AsRef<Path>>(path: P) -> Result<Vec<Site>, DatasetError> {
    let file = std::fs::File::open(path.as_ref())?;
    load_sites_from_reader(file)
}

pub fn load_sites_from_reader<R: Read>(reader: R) -> Result<Vec<Site>, DatasetError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|_| DatasetError::InvalidInput("empty site file".into()))?
        .clone();
    let id_col = required_column(&headers, "id")?;
    let kind_col = required_column(&headers, "kind")?;
    let lat_col = required_column(&headers, "lat")?;
    let lon_col = required_column(&headers, "lon")?;
    let mut sites = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for row in rdr.records() {
        let row = row?;
        let id = row.get(id_col).unwrap_or("").trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(DatasetError::DuplicateId(id));
        }
        let kind_raw = row.get(kind_col).unwrap_or("");
        let kind = SiteKind::parse(kind_raw).ok_or_else(|| {
            DatasetError::Schema(format!("unknown site kind `{kind_raw}` for site `{id}`"))
        })?;
        let lat: f64 = row
            .get(lat_col)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| DatasetError::Schema(format!("bad lat for site `{id}`")))?;
        let lon: f64 = row
            .get(lon_col)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| DatasetError::Schema(format!("bad lon for site `{id}`")))?;
        sites.push(Site {
            id,
            kind,
            location: GeoPoint::new(lat, lon)?,
        });
    }
    if sites.is_empty() {
        return Err(DatasetError::InvalidInput("site file has no data rows".into()));
    }
    Ok(sites)
}

pub fn write_sites<P: AsRef<Path>>(path: P, sites: &[Site]) -> Result<(), DatasetError> {
    let file = std::fs::File::create(path.as_ref())?;
    write_sites_to_writer(file, sites)
}

pub fn write_sites_to_writer<W: Write>(writer: W, sites: &[Site]) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["id", "kind", "lat", "lon"])?;
    for s in sites {
        wtr.write_record(&[
            s.id.clone(),
            s.kind.as_str().to_string(),
            format_coord(s.location.lat()),
            format_coord(s.location.lon()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
