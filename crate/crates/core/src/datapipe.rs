//! Scaling transforms, stratified splitting and shuffled batching.
//!
//! Scaled data is in-memory only; everything on disk stays in the channel's
//! own units.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::channel::{Dataset, Sample};
use crate::rng::substream;
use crate::{Error, Result};

/// `log10(x + coef)`.
pub fn log_scale(x: f64, coef: f64) -> Result<f64> {
    let shifted = x + coef;
    if shifted > 0.0 && shifted.is_finite() {
        Ok(shifted.log10())
    } else {
        Err(Error::Domain(format!("log scaling needs x + coef > 0, got {x} + {coef}")))
    }
}

/// `10^s - coef`.
pub fn inverse_scale(s: f64, coef: f64) -> f64 {
    10f64.powf(s) - coef
}

pub fn normalize_distance(d: f64, d_max: f64) -> Result<f64> {
    if d > 0.0 && d <= d_max && d_max.is_finite() {
        Ok(d / d_max)
    } else {
        Err(Error::Domain(format!("distance {d} outside (0, {d_max}]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSample {
    pub d_norm: f64,
    pub s: f64,
}

/// A dataset mapped into network units, grouped by grid distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledDataset {
    pub samples: Vec<ScaledSample>,
    pub scaling_coef: f64,
    pub d_max: f64,
    pub distance_grid: Vec<f64>,
}

impl ScaledDataset {
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let coef = ds.scenario.scaling_coef;
        let d_max = ds.scenario.d_max();
        let samples = ds
            .samples
            .iter()
            .map(|s| {
                Ok(ScaledSample {
                    d_norm: normalize_distance(s.d, d_max)?,
                    s: log_scale(s.p_r, coef)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples,
            scaling_coef: coef,
            d_max,
            distance_grid: ds.scenario.distance_grid.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(d, d_norm, scaled values)` per grid distance that has samples.
    pub fn by_distance(&self) -> Vec<DistanceGroup> {
        let mut groups: Vec<DistanceGroup> = self
            .distance_grid
            .iter()
            .map(|&d| DistanceGroup {
                d,
                d_norm: d / self.d_max,
                values: Vec::new(),
            })
            .collect();
        for s in &self.samples {
            if let Some(g) = groups.iter_mut().find(|g| g.d_norm == s.d_norm) {
                g.values.push(s.s);
            }
        }
        groups.retain(|g| !g.values.is_empty());
        groups
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceGroup {
    pub d: f64,
    pub d_norm: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl SplitSpec {
    /// Train/val/test in the ratio 2:1:1 over `n` samples.
    pub fn proportional(n: usize, seed: u64) -> Self {
        let n_train = n / 2;
        let n_val = n / 4;
        Self {
            n_train,
            n_val,
            n_test: n - n_train - n_val,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }
}

/// Per-distance allocation of `target` items over `groups` groups, with the
/// remainder placed cyclically starting at `offset`.
fn allocate(target: usize, groups: usize, offset: usize) -> Vec<usize> {
    let mut out = vec![target / groups; groups];
    for j in 0..target % groups {
        out[(offset + j) % groups] += 1;
    }
    out
}

/// Stratified seeded partition into disjoint train, validation and test sets.
///
/// Each distance group is shuffled with its own substream of `spec.seed`;
/// every split receives `n_split / groups` samples per distance, give or take
/// one.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    if spec.total() > ds.len() {
        return Err(Error::Size(format!(
            "split needs {} samples, dataset has {}",
            spec.total(),
            ds.len()
        )));
    }
    let grid = &ds.scenario.distance_grid;
    let mut groups: Vec<Vec<Sample>> = vec![Vec::new(); grid.len()];
    for s in &ds.samples {
        let i = ds
            .scenario
            .grid_index(s.d)
            .ok_or_else(|| Error::Domain(format!("sample distance {} is off-grid", s.d)))?;
        groups[i].push(*s);
    }
    let g = groups.len();
    let train_alloc = allocate(spec.n_train, g, 0);
    let val_alloc = allocate(spec.n_val, g, spec.n_train % g);
    let test_alloc = allocate(spec.n_test, g, (spec.n_train + spec.n_val) % g);

    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (i, group) in groups.iter_mut().enumerate() {
        let need = train_alloc[i] + val_alloc[i] + test_alloc[i];
        if need > group.len() {
            return Err(Error::Size(format!(
                "distance {} has {} samples, split needs {need}",
                grid[i],
                group.len()
            )));
        }
        group.shuffle(&mut substream(spec.seed, i as u64));
        let (a, rest) = group.split_at(train_alloc[i]);
        let (b, rest) = rest.split_at(val_alloc[i]);
        train.extend_from_slice(a);
        val.extend_from_slice(b);
        test.extend_from_slice(&rest[..test_alloc[i]]);
    }
    Ok((ds.with_samples(train), ds.with_samples(val), ds.with_samples(test)))
}

/// One epoch's shuffled copy of the training set, consumed in chunks.
#[derive(Debug, Clone)]
pub struct Batches {
    shuffled: Vec<ScaledSample>,
    batch_size: usize,
}

impl Batches {
    pub fn len(&self) -> usize {
        self.shuffled.len().div_ceil(self.batch_size)
    }

    pub fn is_empty(&self) -> bool {
        self.shuffled.is_empty()
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, ScaledSample> {
        self.shuffled.chunks(self.batch_size)
    }
}

/// Full per-epoch shuffle; the final partial batch is kept.
pub fn batches(train: &[ScaledSample], batch_size: usize, epoch_seed: u64) -> Result<Batches> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be > 0".into()));
    }
    let mut shuffled = train.to_vec();
    shuffled.shuffle(&mut crate::rng::rng_from_seed(epoch_seed));
    Ok(Batches { shuffled, batch_size })
}
