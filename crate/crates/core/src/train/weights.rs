use crate::lattice::WeightLookup;

/// Dense weights stored as `scale * raw`, so multiplicative decay of the whole
/// vector costs O(1). The scale is folded back into `raw` when it gets small.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStore {
    raw: Vec<f64>,
    scale: f64,
}

const MIN_SCALE: f64 = 1e-9;

impl WeightStore {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { raw: weights, scale: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    #[inline]
    pub fn get(&self, id: usize) -> f64 {
        self.raw[id] * self.scale
    }

    /// `w[id] += delta`.
    #[inline]
    pub fn add(&mut self, id: usize, delta: f64) {
        self.raw[id] += delta / self.scale;
    }

    /// `w *= factor`.
    pub fn scale_by(&mut self, factor: f64) {
        if factor == 1.0 {
            return;
        }
        self.scale *= factor;
        if self.scale.abs() < MIN_SCALE {
            self.materialize();
        }
    }

    fn materialize(&mut self) {
        let s = self.scale;
        self.raw.iter_mut().for_each(|w| *w *= s);
        self.scale = 1.0;
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.raw.iter().map(|w| w * self.scale).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.scale.is_finite() && self.raw.iter().all(|w| w.is_finite())
    }

    pub fn dot(&self, v: &crate::features::SparseVector) -> f64 {
        v.entries().iter().map(|&(id, x)| x * self.get(id)).sum()
    }
}

impl WeightLookup for WeightStore {
    #[inline]
    fn weight(&self, id: usize) -> f64 {
        self.get(id)
    }
}

/// Running average of the weight vector over every per-sample step.
///
/// A change `d` made during step `s` (1-based) adds `s * d` to the
/// accumulator; after `U` steps the average of the `U` snapshots is
/// `((U + 1) w - acc) / U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Averager {
    acc: Vec<f64>,
    steps: u64,
}

impl Averager {
    pub fn new(len: usize) -> Self {
        Self {
            acc: vec![0.0; len],
            steps: 0,
        }
    }

    /// Records `w[id] += delta` made during the current step.
    #[inline]
    pub fn add(&mut self, id: usize, delta: f64) {
        self.acc[id] += (self.steps + 1) as f64 * delta;
    }

    /// Closes the current step.
    pub fn tick(&mut self) {
        self.steps += 1;
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Average of all post-step snapshots; `current` itself before any step.
    pub fn average(&self, current: &[f64]) -> Vec<f64> {
        if self.steps == 0 {
            return current.to_vec();
        }
        let u = self.steps as f64;
        current
            .iter()
            .zip(&self.acc)
            .map(|(w, a)| ((u + 1.0) * w - a) / u)
            .collect()
    }
}
