use std::fmt;
use std::sync::Arc;

use super::Hypothesis;
use crate::error::{Error, Result};

/// A countable model family enumerated on demand.
///
/// Priors must be positive and non-increasing in index, and `tail_mass(n)`
/// must return the exact prior mass of all entries with index `>= n`.
pub trait LazyFamily<M: ?Sized>: Send + Sync {
    fn model(&self, index: usize) -> Option<Arc<M>>;
    fn prior(&self, index: usize) -> Option<f64>;
    fn tail_mass(&self, checked: usize) -> f64;
}

enum Inner<M: ?Sized> {
    Finite {
        models: Vec<Arc<M>>,
        priors: Vec<f64>,
        /// `tails[n]` = prior mass of entries `n..`; `tails[len] == 0`.
        tails: Vec<f64>,
    },
    Lazy(Arc<dyn LazyFamily<M>>),
}

/// Ordered prior over models, weights non-increasing in enumeration order.
pub struct ModelClass<M: ?Sized> {
    inner: Inner<M>,
}

impl<M: ?Sized> Clone for ModelClass<M> {
    fn clone(&self) -> Self {
        let inner = match &self.inner {
            Inner::Finite {
                models,
                priors,
                tails,
            } => Inner::Finite {
                models: models.clone(),
                priors: priors.clone(),
                tails: tails.clone(),
            },
            Inner::Lazy(f) => Inner::Lazy(Arc::clone(f)),
        };
        Self { inner }
    }
}

impl<M: ?Sized + Hypothesis> fmt::Debug for ModelClass<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.inner {
            Inner::Finite { models, priors, .. } => f
                .debug_map()
                .entries(models.iter().map(|m| m.label()).zip(priors))
                .finish(),
            Inner::Lazy(_) => f.write_str("ModelClass(lazy)"),
        }
    }
}

impl<M: ?Sized> ModelClass<M> {
    /// Finite class from `(model, weight)` pairs. Weights are normalized to sum
    /// to one and entries are stably sorted by descending weight.
    pub fn finite(entries: Vec<(Arc<M>, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidClass("class is empty".into()));
        }
        if entries.iter().any(|(_, w)| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidClass("prior weights must be positive".into()));
        }
        let mut entries = entries;
        entries.sort_by(|a, b| b.1.total_cmp(&a.1));
        let total: f64 = entries.iter().map(|(_, w)| w).sum();
        let (models, priors): (Vec<_>, Vec<_>) =
            entries.into_iter().map(|(m, w)| (m, w / total)).unzip();
        let mut tails = vec![0.0; priors.len() + 1];
        for i in (0..priors.len()).rev() {
            tails[i] = tails[i + 1] + priors[i];
        }
        Ok(Self {
            inner: Inner::Finite {
                models,
                priors,
                tails,
            },
        })
    }

    pub fn uniform(models: Vec<Arc<M>>) -> Result<Self> {
        Self::finite(models.into_iter().map(|m| (m, 1.0)).collect())
    }

    pub fn lazy(family: Arc<dyn LazyFamily<M>>) -> Self {
        Self {
            inner: Inner::Lazy(family),
        }
    }

    /// Number of models, or `None` for a lazy class.
    #[allow(clippy::len_without_is_empty)] // classes may be lazy, and are never empty
    pub fn len(&self) -> Option<usize> {
        match &self.inner {
            Inner::Finite { models, .. } => Some(models.len()),
            Inner::Lazy(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.inner, Inner::Finite { .. })
    }

    pub fn model(&self, index: usize) -> Option<Arc<M>> {
        match &self.inner {
            Inner::Finite { models, .. } => models.get(index).cloned(),
            Inner::Lazy(f) => f.model(index),
        }
    }

    pub fn prior(&self, index: usize) -> Option<f64> {
        match &self.inner {
            Inner::Finite { priors, .. } => priors.get(index).copied(),
            Inner::Lazy(f) => f.prior(index),
        }
    }

    /// Exact prior mass of every model with index `>= checked`.
    pub fn tail_mass(&self, checked: usize) -> f64 {
        match &self.inner {
            Inner::Finite { tails, .. } => tails[checked.min(tails.len() - 1)],
            Inner::Lazy(f) => f.tail_mass(checked),
        }
    }

    /// All entries of a finite class.
    pub fn entries(&self) -> Result<Vec<(Arc<M>, f64)>> {
        match &self.inner {
            Inner::Finite { models, priors, .. } => {
                Ok(models.iter().cloned().zip(priors.iter().copied()).collect())
            }
            Inner::Lazy(_) => Err(Error::LazyClassUnsupported),
        }
    }
}

impl<M: ?Sized + Hypothesis> ModelClass<M> {
    /// Index of the first model named `name` in a finite class.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        match &self.inner {
            Inner::Finite { models, .. } => models.iter().position(|m| m.label() == name),
            Inner::Lazy(_) => None,
        }
    }

    pub fn prior_of(&self, name: &str) -> Option<f64> {
        self.index_of(name).and_then(|i| self.prior(i))
    }

    /// Rejects finite classes with repeated model names.
    pub fn check_unique_names(&self) -> Result<()> {
        if let Inner::Finite { models, .. } = &self.inner {
            let mut seen = std::collections::HashSet::new();
            for m in models {
                if !seen.insert(m.label()) {
                    return Err(Error::InvalidClass(format!(
                        "duplicate model name `{}`",
                        m.label()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Countable family with prior `2^-(i+1)` on the `i`-th model.
pub struct GeometricFamily<M: ?Sized> {
    build: Box<dyn Fn(usize) -> Arc<M> + Send + Sync>,
}

impl<M: ?Sized> GeometricFamily<M> {
    pub fn new(build: impl Fn(usize) -> Arc<M> + Send + Sync + 'static) -> Self {
        Self {
            build: Box::new(build),
        }
    }
}

impl<M: ?Sized> LazyFamily<M> for GeometricFamily<M> {
    fn model(&self, index: usize) -> Option<Arc<M>> {
        Some((self.build)(index))
    }

    fn prior(&self, index: usize) -> Option<f64> {
        Some(0.5f64.powi(index as i32 + 1))
    }

    fn tail_mass(&self, checked: usize) -> f64 {
        0.5f64.powi(checked as i32)
    }
}
