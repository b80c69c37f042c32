//! Exact Bayesian posteriors over world- and mentor-model classes.
//!
//! One engine serves both kinds; the only difference is which steps count as
//! evidence (every step for world-models, queried steps for mentor-models),
//! which [`Hypothesis::evidence`] decides.
//!
//! Models are "checked" lazily in enumeration order. A checked model carries
//! its accumulated log-likelihood and its folded state; unchecked models are
//! accounted for only through the class's exact tail prior mass.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{History, Step};
use crate::models::{Hypothesis, ModelClass, ModelKind, ModelState};

/// Default cap on how many models a lazy class may have checked.
pub const DEFAULT_MAX_CHECKED: usize = 4096;

struct Checked<M: ?Sized> {
    model: Arc<M>,
    log_prior: f64,
    log_lik: f64,
    state: ModelState,
    dead: bool,
}

impl<M: ?Sized> Checked<M> {
    fn log_weight(&self) -> f64 {
        if self.dead {
            f64::NEG_INFINITY
        } else {
            self.log_prior + self.log_lik
        }
    }
}

impl<M: ?Sized> Clone for Checked<M> {
    fn clone(&self) -> Self {
        Self {
            model: Arc::clone(&self.model),
            log_prior: self.log_prior,
            log_lik: self.log_lik,
            state: self.state.clone(),
            dead: self.dead,
        }
    }
}

/// The minimal top-posterior set whose mass exceeds a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSet {
    /// Class indices in descending posterior order.
    pub members: Vec<usize>,
    /// The final member admitted.
    pub last_model: usize,
    /// Posterior of each member. Exact for finite classes; for lazy classes
    /// normalized over the checked models only.
    pub posterior: Vec<f64>,
}

/// One row of a posterior snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEntry {
    pub name: String,
    pub weight: f64,
}

pub struct BeliefState<M: ?Sized + Hypothesis> {
    class: ModelClass<M>,
    checked: Vec<Checked<M>>,
    history: History,
    max_checked: usize,
}

impl<M: ?Sized + Hypothesis> Clone for BeliefState<M> {
    fn clone(&self) -> Self {
        Self {
            class: self.class.clone(),
            checked: self.checked.clone(),
            history: self.history.clone(),
            max_checked: self.max_checked,
        }
    }
}

impl<M: ?Sized + Hypothesis> BeliefState<M> {
    pub fn new(class: ModelClass<M>) -> Self {
        Self {
            class,
            checked: Vec::new(),
            history: History::new(),
            max_checked: DEFAULT_MAX_CHECKED,
        }
    }

    pub fn with_max_checked(mut self, max_checked: usize) -> Self {
        self.max_checked = max_checked.max(1);
        self
    }

    pub fn kind(&self) -> ModelKind {
        M::KIND
    }

    pub fn class(&self) -> &ModelClass<M> {
        &self.class
    }

    /// Steps consumed so far.
    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn steps_consumed(&self) -> usize {
        self.history.len()
    }

    pub fn checked_count(&self) -> usize {
        self.checked.len()
    }

    /// Exact prior mass of the models not yet checked.
    pub fn tail_mass(&self) -> f64 {
        self.class.tail_mass(self.checked.len())
    }

    pub fn model(&self, index: usize) -> &Arc<M> {
        &self.checked[index].model
    }

    /// Folded state of a checked model at the current history.
    pub fn state(&self, index: usize) -> &ModelState {
        &self.checked[index].state
    }

    pub fn is_dead(&self, index: usize) -> bool {
        self.checked[index].dead
    }

    /// Accumulated log-likelihood of a checked model (`-inf` once dead).
    pub fn log_likelihood(&self, index: usize) -> f64 {
        let c = &self.checked[index];
        if c.dead {
            f64::NEG_INFINITY
        } else {
            c.log_lik
        }
    }

    /// Consumes one completed step. `context` is the history the step extends.
    pub fn observe(&mut self, context: &History, step: Step) -> Result<()> {
        if context.len() != self.history.len() {
            return Err(Error::HistoryDesync {
                consumed: self.history.len(),
                got: context.len(),
            });
        }
        for c in &mut self.checked {
            Self::absorb(c, &step);
        }
        self.history.push(step);
        Ok(())
    }

    fn absorb(c: &mut Checked<M>, step: &Step) {
        if !c.dead {
            if let Some(p) = c.model.evidence(&c.state, step) {
                if p > 0.0 {
                    c.log_lik += p.ln();
                } else {
                    c.dead = true;
                }
            }
        }
        c.state = c.model.fold(&c.state, step);
    }

    /// Checks the next unchecked model by replaying the history. Returns
    /// `false` when the class is exhausted or the check budget is spent.
    fn check_next(&mut self) -> bool {
        let i = self.checked.len();
        if i >= self.max_checked {
            return false;
        }
        let (Some(model), Some(prior)) = (self.class.model(i), self.class.prior(i)) else {
            return false;
        };
        let mut c = Checked {
            state: model.start(),
            model,
            log_prior: prior.ln(),
            log_lik: 0.0,
            dead: false,
        };
        for step in self.history.steps() {
            Self::absorb(&mut c, step);
        }
        self.checked.push(c);
        true
    }

    /// Checks every model of a finite class.
    pub fn check_all(&mut self) -> Result<()> {
        let n = self.class.len().ok_or(Error::LazyClassUnsupported)?;
        while self.checked.len() < n {
            if !self.check_next() {
                return Err(Error::EnumerationBudgetExhausted {
                    alpha: 1.0,
                    checked: self.checked.len(),
                });
            }
        }
        Ok(())
    }

    /// Checked indices sorted by descending posterior, ties by index.
    fn sorted_checked(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.checked.len()).collect();
        order.sort_by(|&a, &b| {
            self.checked[b]
                .log_weight()
                .total_cmp(&self.checked[a].log_weight())
                .then(a.cmp(&b))
        });
        order
    }

    /// Smallest top-posterior set with mass `> alpha`, resolving the posterior
    /// only as far as needed.
    ///
    /// Un-normalized weights are compared against the two bounds
    /// `sum_W <= Z <= sum_W + tail` on the normalizer `Z`: the admitted set
    /// provably covers more than `alpha`, and removing the last member
    /// provably drops it to at most `alpha`. Models whose weight is below the
    /// prior of the next unchecked model cannot yet be ranked and stop the
    /// scan. Weights are exponentiated relative to the largest log-weight.
    pub fn posterior_up_to_threshold(&mut self, alpha: f64) -> Result<ThresholdSet> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!("threshold {alpha} not in (0, 1)")));
        }
        if self.checked.is_empty() && !self.check_next() {
            return Err(Error::ThresholdUnreachable { alpha });
        }
        loop {
            if let Some(mut set) = self.try_threshold(alpha) {
                // The set is settled; for a finite class finish the
                // normalizer so the reported weights are exact.
                if self.class.len().is_some_and(|n| n > self.checked.len()) && self.check_all().is_ok() {
                    let post = self.normalized_checked();
                    set.posterior = set.members.iter().map(|&m| post[m]).collect();
                }
                return Ok(set);
            }
            if !self.check_next() {
                return Err(if self.class.len() == Some(self.checked.len()) {
                    Error::ThresholdUnreachable { alpha }
                } else {
                    Error::EnumerationBudgetExhausted {
                        alpha,
                        checked: self.checked.len(),
                    }
                });
            }
        }
    }

    fn try_threshold(&self, alpha: f64) -> Option<ThresholdSet> {
        let n = self.checked.len();
        let tail = self.class.tail_mass(n);
        let cutoff = self.class.prior(n).unwrap_or(0.0);
        let order = self.sorted_checked();
        let max_log = self
            .checked
            .iter()
            .map(Checked::log_weight)
            .fold(tail.ln(), f64::max);
        if max_log == f64::NEG_INFINITY {
            return None;
        }
        let scaled = |log_w: f64| (log_w - max_log).exp();
        let weights: Vec<f64> = order
            .iter()
            .map(|&j| scaled(self.checked[j].log_weight()))
            .collect();
        // Summed in sorted order so a full prefix equals sum_w exactly.
        let sum_w: f64 = weights.iter().sum();
        let tail_s = scaled(tail.ln());
        let cutoff_s = scaled(cutoff.ln());

        let mut weight_sum = 0.0;
        let mut members = Vec::new();
        for (&j, &w) in order.iter().zip(&weights) {
            if w < cutoff_s {
                break;
            }
            let before = weight_sum;
            weight_sum += w;
            members.push(j);
            if weight_sum / (sum_w + tail_s) > alpha {
                if before / sum_w <= alpha {
                    let posterior = members
                        .iter()
                        .map(|&m| scaled(self.checked[m].log_weight()) / sum_w)
                        .collect();
                    return Some(ThresholdSet {
                        last_model: j,
                        members,
                        posterior,
                    });
                }
                break;
            }
        }
        None
    }

    /// Posterior sample: `theta ~ Uniform(0,1)` and the last model of the
    /// threshold set at `theta`, i.e. inverse CDF over posterior-sorted order.
    pub fn sample_index<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        let theta: f64 = rng.gen();
        self.sample_at(theta)
    }

    pub fn sample_at(&mut self, theta: f64) -> Result<usize> {
        Ok(self.posterior_up_to_threshold(theta)?.last_model)
    }

    pub fn sample_model<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Arc<M>> {
        let i = self.sample_index(rng)?;
        Ok(Arc::clone(&self.checked[i].model))
    }

    /// Fully normalized posterior over a finite class, by class index.
    pub fn exact_posterior(&mut self) -> Result<Vec<f64>> {
        self.check_all()?;
        Ok(self.normalized_checked())
    }

    fn normalized_checked(&self) -> Vec<f64> {
        let max_log = self
            .checked
            .iter()
            .map(Checked::log_weight)
            .fold(f64::NEG_INFINITY, f64::max);
        if max_log == f64::NEG_INFINITY {
            return vec![0.0; self.checked.len()];
        }
        let w: Vec<f64> = self
            .checked
            .iter()
            .map(|c| (c.log_weight() - max_log).exp())
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    /// Posterior over checked models as `(name, weight)`, all entries.
    pub fn snapshot(&self) -> Vec<PosteriorEntry> {
        self.checked
            .iter()
            .zip(self.normalized_checked())
            .map(|(c, weight)| PosteriorEntry {
                name: c.model.label().to_string(),
                weight,
            })
            .collect()
    }

    /// The `n` highest-posterior checked models.
    pub fn top(&self, n: usize) -> Vec<PosteriorEntry> {
        let post = self.normalized_checked();
        self.sorted_checked()
            .into_iter()
            .take(n)
            .map(|i| PosteriorEntry {
                name: self.checked[i].model.label().to_string(),
                weight: post[i],
            })
            .collect()
    }
}
