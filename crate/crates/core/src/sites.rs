//! Evaluation sites and the duplicate-site equivalence classes.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// `n` points in `R^d`, stored row-major, with bitwise-equal points merged
/// into one representative.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSet {
    dim: usize,
    coords: Vec<f64>,
    /// Raw index of each representative, in first-occurrence order.
    reps: Vec<usize>,
    /// Raw index -> position in `reps`.
    dedup_map: Vec<usize>,
}

impl SiteSet {
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().ok_or(Error::Empty("site set"))?.len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::usage(format!(
                    "site {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(coords, dim)
    }

    pub fn from_flat(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("site dimension must be at least 1"));
        }
        if coords.is_empty() {
            return Err(Error::Empty("site set"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::usage(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(x) = coords.iter().find(|x| !x.is_finite()) {
            return Err(Error::usage(format!("non-finite site coordinate {x}")));
        }
        // Fold -0.0 into 0.0 so that the two compare equal bitwise.
        let coords: Vec<f64> = coords.into_iter().map(|x| x + 0.0).collect();
        let n = coords.len() / dim;
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(n);
        let mut reps = Vec::new();
        let mut dedup_map = Vec::with_capacity(n);
        for i in 0..n {
            let key: Vec<u64> = coords[i * dim..(i + 1) * dim]
                .iter()
                .map(|x| x.to_bits())
                .collect();
            let slot = *seen.entry(key).or_insert_with(|| {
                reps.push(i);
                reps.len() - 1
            });
            dedup_map.push(slot);
        }
        Ok(Self {
            dim,
            coords,
            reps,
            dedup_map,
        })
    }

    /// Sites along one axis: `start, start + mesh, ..., end` (inclusive).
    pub fn line(start: f64, end: f64, mesh: f64) -> Result<Self> {
        let axis = axis_points(start, end, mesh)?;
        Self::from_flat(axis, 1)
    }

    /// Parses a grid expression `a:b:mesh[,a:b:mesh...]`, one term per
    /// dimension, inclusive endpoints. The last dimension varies fastest.
    pub fn grid(expr: &str) -> Result<Self> {
        let axes = expr
            .split(',')
            .map(|term| {
                let parts: Vec<&str> = term.trim().split(':').collect();
                if parts.len() != 3 {
                    return Err(Error::usage(format!(
                        "grid term `{term}` is not of the form a:b:mesh"
                    )));
                }
                let num = |s: &str| {
                    let bad = || Error::usage(format!("bad number `{s}` in grid `{term}`"));
                    let parse = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
                    match s.split_once('/') {
                        Some((a, b)) => Ok(parse(a)? / parse(b)?),
                        None => parse(s),
                    }
                };
                axis_points(num(parts[0])?, num(parts[1])?, num(parts[2])?)
            })
            .collect::<Result<Vec<_>>>()?;
        let dim = axes.len();
        let total: usize = axes.iter().map(Vec::len).product();
        let mut coords = Vec::with_capacity(total * dim);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            for (d, &i) in idx.iter().enumerate() {
                coords.push(axes[d][i]);
            }
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        Self::from_flat(coords, dim)
    }

    /// Reads a CSV file with one site per row and `d` numeric columns.
    pub fn from_csv(path: &Path, has_header: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut points = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            let p = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| {
                        Error::usage(format!(
                            "{}: row {}: `{f}` is not a number",
                            path.display(),
                            row + 1
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            points.push(p);
        }
        Self::from_points(points)
    }

    pub fn len(&self) -> usize {
        self.dedup_map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dedup_map.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Raw indices of the representative sites.
    pub fn representatives(&self) -> &[usize] {
        &self.reps
    }

    pub fn num_representatives(&self) -> usize {
        self.reps.len()
    }

    /// Position (in [`Self::representatives`]) of the class containing raw site `i`.
    pub fn class_of(&self, i: usize) -> usize {
        self.dedup_map[i]
    }

    pub fn dedup_map(&self) -> &[usize] {
        &self.dedup_map
    }

    pub fn is_origin(&self, i: usize) -> bool {
        self.point(i).iter().all(|&x| x == 0.0)
    }

    /// Largest Euclidean distance between two sites.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (a, &i) in self.reps.iter().enumerate() {
            for &j in &self.reps[a + 1..] {
                let d: f64 = self
                    .point(i)
                    .iter()
                    .zip(self.point(j))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                best = best.max(d);
            }
        }
        best.sqrt()
    }

    /// Every site shifted by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(Error::usage(format!(
                "offset has dimension {}, sites have {}",
                offset.len(),
                self.dim
            )));
        }
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(offset).map(|(x, o)| x + o))
            .collect();
        Self::from_flat(coords, self.dim)
    }

    /// The sites listed by raw index, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.len(),
                });
            }
            coords.extend_from_slice(self.point(i));
        }
        Self::from_flat(coords, self.dim)
    }
}

fn axis_points(start: f64, end: f64, mesh: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && end.is_finite()) || !(mesh > 0.0 && mesh.is_finite()) {
        return Err(Error::usage(format!(
            "invalid grid axis {start}:{end}:{mesh} (need finite endpoints and mesh > 0)"
        )));
    }
    if end < start {
        return Err(Error::usage(format!(
            "grid axis end {end} is below start {start}"
        )));
    }
    let steps = (end - start) / mesh;
    let k = steps.round();
    if (steps - k).abs() > 1e-9 * k.max(1.0) {
        return Err(Error::usage(format!(
            "mesh {mesh} does not divide the interval [{start}, {end}]"
        )));
    }
    let k = k as usize;
    Ok((0..=k)
        .map(|i| if i == k { end } else { start + i as f64 * mesh })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_share_a_representative() {
        let s = SiteSet::from_points(vec![vec![0.3], vec![0.3], vec![1.0], vec![0.3]]).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.representatives(), &[0, 2]);
        assert_eq!(s.dedup_map(), &[0, 0, 1, 0]);
    }

    #[test]
    fn negative_zero_is_origin_duplicate() {
        let s = SiteSet::from_points(vec![vec![0.0, 0.0], vec![-0.0, 0.0]]).unwrap();
        assert_eq!(s.num_representatives(), 1);
        assert!(s.is_origin(1));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(SiteSet::from_points(vec![]), Err(Error::Empty(_))));
        assert!(SiteSet::from_points(vec![vec![0.0], vec![1.0, 2.0]]).is_err());
        assert!(SiteSet::from_points(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn grid_expression_one_dim() {
        let s = SiteSet::grid("0:0.9990234375:0.0009765625").unwrap();
        assert_eq!(s.len(), 1024);
        assert_eq!(s.point(0), &[0.0]);
        assert_eq!(s.point(1), &[1.0 / 1024.0]);
        assert_eq!(s.point(1023), &[1.0 - 1.0 / 1024.0]);
    }

    #[test]
    fn grid_expression_two_dim() {
        let s = SiteSet::grid("0:5:0.1, 0:5:0.1").unwrap();
        assert_eq!(s.len(), 51 * 51);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.point(1), &[0.0, 0.1]);
        assert_eq!(s.point(51), &[0.1, 0.0]);
        assert_eq!(s.point(51 * 51 - 1), &[5.0, 5.0]);
        assert_eq!(s.num_representatives(), 51 * 51);
    }

    #[test]
    fn grid_accepts_fraction_mesh() {
        let g = SiteSet::grid("0:1:1/1024").unwrap();
        assert_eq!(g.len(), 1025);
        assert_eq!(g.point(1)[0], 1.0 / 1024.0);
    }

    #[test]
    fn grid_rejects_malformed() {
        assert!(SiteSet::grid("0:1").is_err());
        assert!(SiteSet::grid("0:1:0.3").is_err());
        assert!(SiteSet::grid("1:0:0.1").is_err());
        assert!(SiteSet::grid("0:1:0").is_err());
        assert!(SiteSet::grid("a:1:0.5").is_err());
    }

    #[test]
    fn csv_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "x,y\n0,0\n1.5,2\n").unwrap();
        let s = SiteSet::from_csv(&p, true).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.point(1), &[1.5, 2.0]);
        std::fs::write(&p, "0.5\n0.25\n").unwrap();
        let s = SiteSet::from_csv(&p, false).unwrap();
        assert_eq!(s.dim(), 1);
        assert_eq!(s.point(1), &[0.25]);
        std::fs::write(&p, "0.5\nfoo\n").unwrap();
        assert!(SiteSet::from_csv(&p, false).is_err());
    }

    #[test]
    fn translation_and_diameter() {
        let s = SiteSet::from_points(vec![vec![0.0], vec![1.0]]).unwrap();
        let t = s.translated(&[10.0]).unwrap();
        assert_eq!(t.point(1), &[11.0]);
        assert_eq!(t.diameter(), 1.0);
    }
}
