//! Density clustering of the `[a, c, omega]` space and polarity labeling.
//!
//! DBSCAN with Euclidean distance over the 3-D feature vectors, backed by
//! a uniform grid whose cell size equals `eps`, so a neighborhood query
//! only inspects the 27 cells around a point. Tie-breaking is pinned down
//! for reproducibility: cluster ids are numbered by the input order of the
//! first core point reached, and a border point joins the cluster of its
//! lowest-index core neighbor.
//!
//! Polarity labels are assigned without ever looking at ratings: among
//! clusters holding at least a configurable share of the points, the one
//! with the highest mean `pos - neg` is positive and the lowest is
//! negative. Ratings enter only in [`evaluate_against_ratings`], which
//! reports how clean the split actually was.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{FeatureRecord, FeatureVector};

/// DBSCAN parameters. Defaults are the neighborhood radius 0.09 and
/// minimum neighborhood size 7 (the point itself included), with no
/// feature scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
    pub scaling: Scaling,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams {
            eps: 0.09,
            min_pts: 7,
            scaling: Scaling::None,
        }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if self.eps <= 0.0 || !self.eps.is_finite() {
            return Err(Error::config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.min_pts < 1 {
            return Err(Error::config("min-pts must be at least 1"));
        }
        Ok(())
    }
}

/// Optional per-dimension affine rescaling applied before distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    #[default]
    None,
    MinMax,
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scaling::None => write!(f, "none"),
            Scaling::MinMax => write!(f, "minmax"),
        }
    }
}

impl FromStr for Scaling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(Scaling::None),
            "minmax" => Ok(Scaling::MinMax),
            other => Err(format!("unknown scaling {other:?} (expected none or minmax)")),
        }
    }
}

/// DBSCAN role of a single point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointRole {
    Core,
    Border,
    Noise,
}

impl fmt::Display for PointRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointRole::Core => write!(f, "core"),
            PointRole::Border => write!(f, "border"),
            PointRole::Noise => write!(f, "noise"),
        }
    }
}

impl FromStr for PointRole {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "core" => Ok(PointRole::Core),
            "border" => Ok(PointRole::Border),
            "noise" => Ok(PointRole::Noise),
            other => Err(format!("unknown point role {other:?}")),
        }
    }
}

/// Positional clustering outcome: cluster index (`None` = noise) and role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub cluster: Option<usize>,
    pub role: PointRole,
}

/// Rating-polarity label of a cluster, derived without ratings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
    ExtremePositive,
    ExtremeNegative,
    Unlabeled,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::ExtremePositive => "extreme_positive",
            Polarity::ExtremeNegative => "extreme_negative",
            Polarity::Unlabeled => "unlabeled",
        };
        write!(f, "{s}")
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            "extreme_positive" => Ok(Polarity::ExtremePositive),
            "extreme_negative" => Ok(Polarity::ExtremeNegative),
            "unlabeled" => Ok(Polarity::Unlabeled),
            other => Err(format!("unknown polarity {other:?}")),
        }
    }
}

/// One output row of the clustering stage: review id, cluster id
/// (`None` = noise, serialized as -1), role and polarity.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub id: String,
    pub cluster: Option<usize>,
    pub role: PointRole,
    pub polarity: Polarity,
}

/// Uniform grid over the 3-D feature box with cell size `eps`; any point
/// within `eps` of a query point lives in one of the 27 cells around it.
struct GridIndex<'a> {
    points: &'a [[f64; 3]],
    eps: f64,
    origin: [f64; 3],
    cells: HashMap<[i64; 3], Vec<u32>>,
}

impl<'a> GridIndex<'a> {
    fn build(points: &'a [[f64; 3]], eps: f64) -> Self {
        let mut origin = [f64::INFINITY; 3];
        for p in points {
            for d in 0..3 {
                origin[d] = origin[d].min(p[d]);
            }
        }
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, &origin, eps)).or_default().push(i as u32);
        }
        GridIndex { points, eps, origin, cells }
    }

    fn key(p: &[f64; 3], origin: &[f64; 3], eps: f64) -> [i64; 3] {
        let mut k = [0i64; 3];
        for d in 0..3 {
            k[d] = ((p[d] - origin[d]) / eps).floor() as i64;
        }
        k
    }

    /// Indices of all points within `eps` of point `i`, `i` itself
    /// included. The order is deterministic (fixed 27-cell scan, buckets
    /// in input order) but not sorted.
    #[cfg(test)]
    fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_neighbor(i, |j| out.push(j));
        out
    }

    fn for_each_neighbor(&self, i: usize, mut visit: impl FnMut(usize)) {
        let p = &self.points[i];
        let center = Self::key(p, &self.origin, self.eps);
        let eps2 = self.eps * self.eps;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let key = [center[0] + dx, center[1] + dy, center[2] + dz];
                    if let Some(bucket) = self.cells.get(&key) {
                        for &j in bucket {
                            let q = &self.points[j as usize];
                            let d2 = (p[0] - q[0]).powi(2)
                                + (p[1] - q[1]).powi(2)
                                + (p[2] - q[2]).powi(2);
                            if d2 <= eps2 {
                                visit(j as usize);
                            }
                        }
                    }
                }
            }
        }
    }

    fn neighbor_count(&self, i: usize) -> usize {
        let mut n = 0;
        self.for_each_neighbor(i, |_| n += 1);
        n
    }

    /// Lowest-index neighbor satisfying `pred`.
    fn min_neighbor_where(&self, i: usize, pred: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<usize> = None;
        self.for_each_neighbor(i, |j| {
            if pred(j) && best.is_none_or(|b| j < b) {
                best = Some(j);
            }
        });
        best
    }
}

fn minmax_scale(points: &mut [[f64; 3]]) {
    if points.is_empty() {
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points.iter() {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    for p in points.iter_mut() {
        for d in 0..3 {
            let range = hi[d] - lo[d];
            // constant dimensions map to 0
            p[d] = if range > 0.0 { (p[d] - lo[d]) / range } else { 0.0 };
        }
    }
}

/// Grid-indexed DBSCAN over feature vectors.
///
/// Core points have at least `min_pts` neighbors within `eps` (themselves
/// included); clusters are the connected components of the core points,
/// numbered by the input order of their first core point; a border point
/// joins the cluster of its lowest-index core neighbor; everything else
/// is noise. Empty input yields an empty assignment list.
pub fn dbscan(points: &[FeatureVector], params: &DbscanParams) -> Result<Vec<Assignment>> {
    params.validate()?;
    let mut coords: Vec<[f64; 3]> = points.iter().map(|v| [v.a, v.c, v.omega]).collect();
    for (i, p) in coords.iter().enumerate() {
        if !p.iter().all(|x| x.is_finite()) {
            return Err(Error::internal(format!(
                "non-finite feature vector at index {i}: {p:?}"
            )));
        }
    }
    if params.scaling == Scaling::MinMax {
        minmax_scale(&mut coords);
    }

    let n = coords.len();
    let grid = GridIndex::build(&coords, params.eps);

    // neighborhood queries are read-only and run in parallel; the
    // expansion phase below stays sequential to keep ids deterministic
    let core: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|i| grid.neighbor_count(i) >= params.min_pts)
        .collect();

    // connected components of the core graph, discovered in input order
    let mut cluster: Vec<Option<usize>> = vec![None; n];
    let mut next_id = 0usize;
    let mut queue = Vec::new();
    for i in 0..n {
        if !core[i] || cluster[i].is_some() {
            continue;
        }
        cluster[i] = Some(next_id);
        queue.push(i);
        while let Some(q) = queue.pop() {
            grid.for_each_neighbor(q, |j| {
                if core[j] && cluster[j].is_none() {
                    cluster[j] = Some(next_id);
                    queue.push(j);
                }
            });
        }
        next_id += 1;
    }

    let out: Vec<Assignment> = (0..n)
        .into_par_iter()
        .map(|i| {
            if core[i] {
                return Assignment {
                    cluster: cluster[i],
                    role: PointRole::Core,
                };
            }
            // lowest-index core neighbor claims the border point
            match grid.min_neighbor_where(i, |j| core[j]) {
                Some(j) => Assignment {
                    cluster: cluster[j],
                    role: PointRole::Border,
                },
                None => Assignment {
                    cluster: None,
                    role: PointRole::Noise,
                },
            }
        })
        .collect();
    Ok(out)
}

/// Per-cluster aggregates consumed by the polarity rule.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClusterStats {
    pub cluster: usize,
    pub size: usize,
    /// Mean of `pos - neg` over members.
    pub mean_lean: f64,
    /// Mean of `|pos - neg|` over members.
    pub mean_abs_lean: f64,
    pub mean_omega: f64,
}

/// Polarity labeling configuration: clusters must hold at least
/// `mass_threshold` of all points to compete for the positive/negative
/// labels (filters micro-clusters out of the competition).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarityConfig {
    pub mass_threshold: f64,
}

impl Default for PolarityConfig {
    fn default() -> Self {
        PolarityConfig { mass_threshold: 0.05 }
    }
}

/// Outcome of polarity labeling: one label per cluster id, the stats the
/// rule was based on, and a warning when fewer than two clusters qualified.
#[derive(Debug, Clone)]
pub struct PolarityLabels {
    pub per_cluster: Vec<Polarity>,
    pub stats: Vec<ClusterStats>,
    pub warning: Option<String>,
}

impl PolarityLabels {
    /// Label for a point-level assignment (noise points are unlabeled).
    pub fn for_assignment(&self, assignment: &Assignment) -> Polarity {
        match assignment.cluster {
            Some(k) => self.per_cluster[k],
            None => Polarity::Unlabeled,
        }
    }
}

/// Labels cluster polarity from sentiment means alone.
///
/// Among clusters holding at least the configured share of all points, the
/// highest mean `pos - neg` becomes positive and the lowest negative. A
/// remaining cluster with an even stronger mean absolute lean that sits
/// above the positive cluster in omega is extreme positive; mirrored below
/// the negative cluster for extreme negative. Everything else stays
/// unlabeled. With fewer than two qualifying clusters no labels are
/// assigned and a warning is returned.
///
/// `assignments` and `records` run parallel to the clustered points.
pub fn label_polarity(
    assignments: &[Assignment],
    records: &[FeatureRecord],
    cfg: &PolarityConfig,
) -> PolarityLabels {
    assert_eq!(
        assignments.len(),
        records.len(),
        "assignments and feature records must align"
    );
    let n_clusters = assignments
        .iter()
        .filter_map(|a| a.cluster)
        .max()
        .map_or(0, |m| m + 1);

    let mut size = vec![0usize; n_clusters];
    let mut sum_lean = vec![0.0f64; n_clusters];
    let mut sum_abs_lean = vec![0.0f64; n_clusters];
    let mut sum_omega = vec![0.0f64; n_clusters];
    for (a, r) in assignments.iter().zip(records) {
        if let Some(k) = a.cluster {
            size[k] += 1;
            sum_lean[k] += r.triple.lean();
            sum_abs_lean[k] += r.triple.lean().abs();
            sum_omega[k] += r.omega;
        }
    }
    let stats: Vec<ClusterStats> = (0..n_clusters)
        .map(|k| ClusterStats {
            cluster: k,
            size: size[k],
            mean_lean: sum_lean[k] / size[k] as f64,
            mean_abs_lean: sum_abs_lean[k] / size[k] as f64,
            mean_omega: sum_omega[k] / size[k] as f64,
        })
        .collect();

    let mut labels = vec![Polarity::Unlabeled; n_clusters];
    let total = assignments.len();
    let qualifying: Vec<ClusterStats> = stats
        .iter()
        .filter(|s| (s.size as f64) >= cfg.mass_threshold * total as f64)
        .copied()
        .collect();

    if qualifying.len() < 2 {
        return PolarityLabels {
            per_cluster: labels,
            stats,
            warning: Some(format!(
                "polarity labeling needs at least 2 clusters holding >= {:.1}% of points, found {}",
                cfg.mass_threshold * 100.0,
                qualifying.len()
            )),
        };
    }

    // ties break toward the lower cluster id (strict comparison on a scan
    // in ascending id order)
    let mut positive = qualifying[0].cluster;
    let mut pos_lean = qualifying[0].mean_lean;
    let mut negative = qualifying[0].cluster;
    let mut neg_lean = qualifying[0].mean_lean;
    for s in &qualifying[1..] {
        if s.mean_lean > pos_lean {
            pos_lean = s.mean_lean;
            positive = s.cluster;
        }
        if s.mean_lean < neg_lean {
            neg_lean = s.mean_lean;
            negative = s.cluster;
        }
    }
    if positive == negative {
        return PolarityLabels {
            per_cluster: labels,
            stats,
            warning: Some("all qualifying clusters have identical mean lean".into()),
        };
    }
    labels[positive] = Polarity::Positive;
    labels[negative] = Polarity::Negative;

    for s in &stats {
        if s.cluster == positive || s.cluster == negative || s.size == 0 {
            continue;
        }
        if s.mean_lean > 0.0
            && s.mean_abs_lean > stats[positive].mean_abs_lean
            && s.mean_omega > stats[positive].mean_omega
        {
            labels[s.cluster] = Polarity::ExtremePositive;
        } else if s.mean_lean < 0.0
            && s.mean_abs_lean > stats[negative].mean_abs_lean
            && s.mean_omega < stats[negative].mean_omega
        {
            labels[s.cluster] = Polarity::ExtremeNegative;
        }
    }

    PolarityLabels {
        per_cluster: labels,
        stats,
        warning: None,
    }
}

/// Rating mix of one cluster. Fractions are over rated members only; the
/// boundary rating is the 3-star midpoint of the 5-star convention.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterRatingReport {
    pub cluster: usize,
    pub polarity: Polarity,
    pub members: usize,
    pub rated: usize,
    /// Count of members per rating 1..=R.
    pub histogram: Vec<u64>,
    pub frac_above_3: Option<f64>,
    pub frac_below_3: Option<f64>,
}

/// Held-out rating evaluation of a clustering. Ratings influence nothing
/// upstream; this report is the only place they meet cluster labels.
#[derive(Debug, Clone, Serialize)]
pub struct PurityReport {
    pub available: bool,
    pub rating_scale: u32,
    pub clusters: Vec<ClusterRatingReport>,
}

/// Cross-tabulates cluster assignments against held-out ratings.
/// When no record carries a rating the report is marked unavailable.
pub fn evaluate_against_ratings(
    assignments: &[Assignment],
    labels: &PolarityLabels,
    ratings: &[Option<u32>],
    rating_scale: u32,
) -> PurityReport {
    assert_eq!(assignments.len(), ratings.len(), "assignments and ratings must align");
    let n_clusters = labels.per_cluster.len();
    if n_clusters == 0 || ratings.iter().all(|r| r.is_none()) {
        return PurityReport {
            available: false,
            rating_scale,
            clusters: Vec::new(),
        };
    }

    let mut reports: Vec<ClusterRatingReport> = (0..n_clusters)
        .map(|k| ClusterRatingReport {
            cluster: k,
            polarity: labels.per_cluster[k],
            members: 0,
            rated: 0,
            histogram: vec![0; rating_scale as usize],
            frac_above_3: None,
            frac_below_3: None,
        })
        .collect();

    for (a, rating) in assignments.iter().zip(ratings) {
        let Some(k) = a.cluster else { continue };
        reports[k].members += 1;
        if let Some(r) = rating {
            reports[k].rated += 1;
            reports[k].histogram[(*r - 1) as usize] += 1;
        }
    }

    for rep in &mut reports {
        if rep.rated == 0 {
            continue;
        }
        let above: u64 = rep
            .histogram
            .iter()
            .enumerate()
            .filter(|(i, _)| (i + 1) as u32 > 3)
            .map(|(_, c)| *c)
            .sum();
        let below: u64 = rep
            .histogram
            .iter()
            .enumerate()
            .filter(|(i, _)| ((i + 1) as u32) < 3)
            .map(|(_, c)| *c)
            .sum();
        rep.frac_above_3 = Some(above as f64 / rep.rated as f64);
        rep.frac_below_3 = Some(below as f64 / rep.rated as f64);
    }

    PurityReport {
        available: true,
        rating_scale,
        clusters: reports,
    }
}
