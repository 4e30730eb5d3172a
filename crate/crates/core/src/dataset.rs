//! Feature-space description and row-major sample storage.
//!
//! Feature vectors have `continuous` real-valued components first, followed by
//! `binary` components restricted to `{0, 1}`.

use crate::error::{check_finite, Error, Result};
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Schema {
    pub continuous: usize,
    pub binary: usize,
}

impl Schema {
    pub fn new(continuous: usize, binary: usize) -> Self {
        Self { continuous, binary }
    }

    pub fn binary_only(binary: usize) -> Self {
        Self { continuous: 0, binary }
    }

    pub fn n_features(&self) -> usize {
        self.continuous + self.binary
    }

    pub fn is_binary(&self, feature: usize) -> bool {
        feature >= self.continuous && feature < self.n_features()
    }

    pub fn validate(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::Arity { expected: self.n_features(), got: x.len() });
        }
        for (j, &v) in x.iter().enumerate() {
            if j < self.continuous {
                check_finite("feature value", v)?;
            } else if v != 0.0 && v != 1.0 {
                return Err(Error::NonBinary { feature: j, value: v });
            }
        }
        Ok(())
    }
}

/// Dense row-major matrix of validated feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema: Schema,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(schema: Schema) -> Self {
        Self { schema, values: Vec::new() }
    }

    pub fn from_rows<'a, I>(schema: Schema, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut m = Self::new(schema);
        for row in rows {
            m.push_row(row)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, x: &[f64]) -> Result<()> {
        self.schema.validate(x)?;
        self.values.extend_from_slice(x);
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        self.schema
    }

    pub fn n_rows(&self) -> usize {
        match self.schema.n_features() {
            0 => 0,
            k => self.values.len() / k,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.schema.n_features();
        &self.values[i * k..(i + 1) * k]
    }

    #[inline]
    pub fn get(&self, i: usize, feature: usize) -> f64 {
        self.values[i * self.schema.n_features() + feature]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        let k = self.schema.n_features().max(1);
        self.values.chunks_exact(k)
    }

    /// Copy of the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.schema.n_features());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self { schema: self.schema, values }
    }
}

/// Features paired with a real-valued target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(features: FeatureMatrix, targets: Vec<f64>) -> Result<Self> {
        if features.n_rows() != targets.len() {
            return Err(Error::InvalidParameter(alloc::format!(
                "{} feature rows but {} targets",
                features.n_rows(),
                targets.len()
            )));
        }
        for &y in &targets {
            check_finite("target", y)?;
        }
        Ok(Self { features, targets })
    }

    pub fn schema(&self) -> Schema {
        self.features.schema()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }
}
