//! Named feature vectors with a canonical (name-sorted) layout.
//!
//! A [`FeatureSpace`] is the sorted set of feature names shared by every
//! hypothesis of a dataset and by the weight vector. Values are stored densely
//! in that order, so dot products always sum in sorted-name order and give
//! bit-identical results regardless of the order names appeared in the input.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct FeatureSpace(Arc<[String]>);

impl FeatureSpace {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = names.into_iter().map(Into::into).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateFeature(w[0].clone()));
        }
        Ok(FeatureSpace(names.into()))
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub(crate) fn ensure_same(&self, other: &FeatureSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::FeatureMismatch {
                expected: self.0.join(" "),
                found: other.0.join(" "),
            })
        }
    }
}

impl PartialEq for FeatureSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for FeatureSpace {}

impl fmt::Debug for FeatureSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Feature values keyed by name. Also used for model weights.
#[derive(Clone, PartialEq)]
pub struct FeatureVector {
    space: FeatureSpace,
    values: Vec<f64>,
}

pub type WeightVector = FeatureVector;

impl FeatureVector {
    /// Builds a vector from `(name, value)` pairs in any order.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut pairs: Vec<(String, f64)> =
            pairs.into_iter().map(|(n, v)| (n.into(), v)).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let space = FeatureSpace::new(pairs.iter().map(|(n, _)| n.clone()))?;
        FeatureVector::new(space, pairs.into_iter().map(|(_, v)| v).collect())
    }

    /// Values must be given in the space's sorted-name order.
    pub fn new(space: FeatureSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Misaligned {
                expected: space.len(),
                found: values.len(),
            });
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                name: space.names()[i].clone(),
                value: v,
            });
        }
        Ok(FeatureVector { space, values })
    }

    /// Builds a vector over `space` from pairs that must cover exactly its names.
    pub fn from_pairs_in<I, S>(space: &FeatureSpace, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let v = FeatureVector::from_pairs(pairs.into_iter().map(|(n, v)| (n.as_ref().to_owned(), v)))?;
        space.ensure_same(&v.space)?;
        Ok(FeatureVector {
            space: space.clone(),
            values: v.values,
        })
    }

    pub fn zeros(space: &FeatureSpace) -> Self {
        FeatureVector {
            space: space.clone(),
            values: vec![0.0; space.len()],
        }
    }

    /// Unit vector along `name`.
    pub fn axis(space: &FeatureSpace, name: &str) -> Option<Self> {
        let i = space.index_of(name)?;
        let mut v = FeatureVector::zeros(space);
        v.values[i] = 1.0;
        Some(v)
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.space.index_of(name).map(|i| self.values[i])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                name: name.to_owned(),
                value,
            });
        }
        let i = self.space.index_of(name).ok_or_else(|| Error::FeatureMismatch {
            expected: self.space.names().join(" "),
            found: name.to_owned(),
        })?;
        self.values[i] = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.space
            .names()
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
    }

    /// Dot product in canonical order; fails if the name sets differ.
    pub fn dot(&self, other: &FeatureVector) -> Result<f64> {
        self.space.ensure_same(&other.space)?;
        Ok(dot_values(&self.values, &other.values))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        FeatureVector {
            space: self.space.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self + step * direction`.
    pub fn add_scaled(&self, direction: &FeatureVector, step: f64) -> Result<Self> {
        self.space.ensure_same(&direction.space)?;
        Ok(FeatureVector {
            space: self.space.clone(),
            values: self
                .values
                .iter()
                .zip(&direction.values)
                .map(|(a, b)| a + step * b)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &FeatureVector) -> Result<f64> {
        self.space.ensure_same(&other.space)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// Rescales to unit L1 norm. The zero vector is returned unchanged.
    pub fn l1_normalized(&self) -> Self {
        let norm = self.l1_norm();
        if norm > 0.0 {
            self.scaled(1.0 / norm)
        } else {
            self.clone()
        }
    }
}

impl fmt::Debug for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

pub(crate) fn dot_values(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
