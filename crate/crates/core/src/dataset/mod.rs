//! Data model shared by the measurement and planning pipelines: voter and
//! site records, the grouped point set the clustering algorithms consume,
//! and generators for synthetic states and adversarial instances.

mod csvio;
mod instances;
mod synth;

pub use csvio::{
    load_sites, load_sites_from_reader, load_voters, load_voters_from_reader, write_sites,
    write_sites_to_writer, write_voters, write_voters_to_writer, CsvSchema, LoadOutcome,
};
pub use instances::{integrality_gap_instance, local_search_trap_instance, TrapInstance};
pub use synth::{synth_state, RegionSpec, SynthConfig};

use crate::geo::{GeoPoint, MetricKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geo(#[from] crate::geo::GeoError),
}

/// One registered voter, as read from a roll file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterRecord {
    pub id: String,
    pub group: String,
    pub location: GeoPoint,
    pub precinct: Option<String>,
    pub assigned_site: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteKind {
    Polling,
    School,
    Library,
}

impl SiteKind {
    pub fn parse(s: &str) -> Option<SiteKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "polling" => Some(SiteKind::Polling),
            "school" => Some(SiteKind::School),
            "library" => Some(SiteKind::Library),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SiteKind::Polling => "polling",
            SiteKind::School => "school",
            SiteKind::Library => "library",
        }
    }
}

/// A facility that is or could become a polling location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub kind: SiteKind,
    pub location: GeoPoint,
}

/// A weighted point in a grouped instance. `entity` is the point's row in an
/// explicit distance matrix when one is attached; for kernel metrics it is
/// simply the point's own index.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub coords: Vec<f64>,
    pub weight: f64,
    pub group: usize,
    pub entity: usize,
}

/// Where distances come from: a coordinate kernel or an explicit matrix.
#[derive(Debug, Clone)]
pub enum MetricSource {
    Kernel(MetricKind),
    /// Square matrix over `n` entities, row-major. Points and facilities
    /// address rows through their entity ids.
    Matrix { n: usize, dist: Vec<f64> },
}

impl MetricSource {
    pub fn is_metric(&self) -> bool {
        match self {
            MetricSource::Kernel(k) => k.is_metric(),
            MetricSource::Matrix { .. } => true,
        }
    }
}

/// Candidate facility locations. Kernel-metric instances place facilities by
/// coordinates; matrix instances reference matrix rows.
#[derive(Debug, Clone)]
pub enum Facilities {
    Coords(Vec<Vec<f64>>),
    Entities(Vec<usize>),
}

impl Facilities {
    pub fn len(&self) -> usize {
        match self {
            Facilities::Coords(c) => c.len(),
            Facilities::Entities(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Points partitioned into disjoint groups plus the facility candidates and
/// the distance source. Immutable once built; shared freely across threads.
#[derive(Debug, Clone)]
pub struct GroupedDataset {
    points: Vec<DataPoint>,
    group_labels: Vec<String>,
    facilities: Facilities,
    metric: MetricSource,
}

impl GroupedDataset {
    pub fn new(
        points: Vec<DataPoint>,
        group_labels: Vec<String>,
        facilities: Facilities,
        metric: MetricSource,
    ) -> Result<Self, DatasetError> {
        if group_labels.is_empty() {
            return Err(DatasetError::InvalidInput("need at least one group".into()));
        }
        let m = group_labels.len();
        for (i, p) in points.iter().enumerate() {
            if p.group >= m {
                return Err(DatasetError::InvalidInput(format!(
                    "point {i} assigned to group {} but only {m} groups exist",
                    p.group
                )));
            }
            if !(p.weight > 0.0) {
                return Err(DatasetError::InvalidInput(format!(
                    "point {i} has non-positive weight {}",
                    p.weight
                )));
            }
        }
        match &metric {
            MetricSource::Kernel(k) => {
                k.validate()?;
                let dim = k.dim();
                for (i, p) in points.iter().enumerate() {
                    if p.coords.len() != dim {
                        return Err(DatasetError::InvalidInput(format!(
                            "point {i} has {} coords, metric needs {dim}",
                            p.coords.len()
                        )));
                    }
                }
                if let Facilities::Entities(_) = facilities {
                    return Err(DatasetError::InvalidInput(
                        "kernel metrics require coordinate facilities".into(),
                    ));
                }
                if let Facilities::Coords(cs) = &facilities {
                    for (j, c) in cs.iter().enumerate() {
                        if c.len() != dim {
                            return Err(DatasetError::InvalidInput(format!(
                                "facility {j} has {} coords, metric needs {dim}",
                                c.len()
                            )));
                        }
                    }
                }
            }
            MetricSource::Matrix { n, dist } => {
                if dist.len() != n * n {
                    return Err(DatasetError::InvalidInput(format!(
                        "distance matrix must be {n}x{n}"
                    )));
                }
                for p in &points {
                    if p.entity >= *n {
                        return Err(DatasetError::InvalidInput(format!(
                            "point entity {} outside matrix of size {n}",
                            p.entity
                        )));
                    }
                }
                match &facilities {
                    Facilities::Entities(es) => {
                        for e in es {
                            if *e >= *n {
                                return Err(DatasetError::InvalidInput(format!(
                                    "facility entity {e} outside matrix of size {n}"
                                )));
                            }
                        }
                    }
                    Facilities::Coords(_) => {
                        return Err(DatasetError::InvalidInput(
                            "matrix metrics require entity facilities".into(),
                        ));
                    }
                }
            }
        }
        Ok(GroupedDataset {
            points,
            group_labels,
            facilities,
            metric,
        })
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_groups(&self) -> usize {
        self.group_labels.len()
    }

    pub fn group_labels(&self) -> &[String] {
        &self.group_labels
    }

    pub fn facilities(&self) -> &Facilities {
        &self.facilities
    }

    pub fn n_facilities(&self) -> usize {
        self.facilities.len()
    }

    pub fn metric(&self) -> &MetricSource {
        &self.metric
    }

    /// Total weight per group.
    pub fn group_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_groups()];
        for p in &self.points {
            w[p.group] += p.weight;
        }
        w
    }

    /// Member indices per group.
    pub fn group_members(&self) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); self.n_groups()];
        for (i, p) in self.points.iter().enumerate() {
            g[p.group].push(i);
        }
        g
    }

    /// Point-to-point distance.
    pub fn d_pp(&self, i: usize, j: usize) -> f64 {
        match &self.metric {
            MetricSource::Kernel(k) => {
                crate::geo::distance_unchecked(&self.points[i].coords, &self.points[j].coords, k)
            }
            MetricSource::Matrix { n, dist } => {
                dist[self.points[i].entity * n + self.points[j].entity]
            }
        }
    }

    /// Point-to-facility distance.
    pub fn d_pf(&self, i: usize, f: usize) -> f64 {
        match (&self.metric, &self.facilities) {
            (MetricSource::Kernel(k), Facilities::Coords(cs)) => {
                crate::geo::distance_unchecked(&self.points[i].coords, &cs[f], k)
            }
            (MetricSource::Matrix { n, dist }, Facilities::Entities(es)) => {
                dist[self.points[i].entity * n + es[f]]
            }
            _ => unreachable!("facility kind validated against metric at construction"),
        }
    }

    /// Facility-to-facility distance.
    pub fn d_ff(&self, f: usize, g: usize) -> f64 {
        match (&self.metric, &self.facilities) {
            (MetricSource::Kernel(k), Facilities::Coords(cs)) => {
                crate::geo::distance_unchecked(&cs[f], &cs[g], k)
            }
            (MetricSource::Matrix { n, dist }, Facilities::Entities(es)) => {
                dist[es[f] * n + es[g]]
            }
            _ => unreachable!(),
        }
    }

    /// Facility index of the nearest facility to point `i`, with its
    /// distance. Ties break to the lowest facility index.
    pub fn nearest_facility(&self, i: usize) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for f in 0..self.n_facilities() {
            let d = self.d_pf(i, f);
            if d < best.1 {
                best = (f, d);
            }
        }
        best
    }

    /// New dataset with the same points but a different facility list.
    pub fn with_facilities(&self, facilities: Facilities) -> Result<Self, DatasetError> {
        GroupedDataset::new(
            self.points.clone(),
            self.group_labels.clone(),
            facilities,
            self.metric.clone(),
        )
    }
}


/// Build a grouped dataset from voter and site records under a kernel metric.
/// Group indices follow first-appearance order of group labels; facilities
/// are the sites, in input order.
pub fn dataset_from_voters(
    voters: &[VoterRecord],
    sites: &[Site],
    metric: MetricKind,
) -> Result<GroupedDataset, DatasetError> {
    if voters.is_empty() {
        return Err(DatasetError::InvalidInput("no voters".into()));
    }
    let mut label_index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut labels: Vec<String> = Vec::new();
    for v in voters {
        if !label_index.contains_key(v.group.as_str()) {
            label_index.insert(v.group.as_str(), labels.len());
            labels.push(v.group.clone());
        }
    }
    let points = voters
        .iter()
        .enumerate()
        .map(|(i, v)| DataPoint {
            coords: v.location.coords().to_vec(),
            weight: 1.0,
            group: label_index[v.group.as_str()],
            entity: i,
        })
        .collect();
    let coords = sites.iter().map(|s| s.location.coords().to_vec()).collect();
    GroupedDataset::new(points, labels, Facilities::Coords(coords), MetricSource::Kernel(metric))
}
