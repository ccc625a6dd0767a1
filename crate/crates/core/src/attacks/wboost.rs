//! Random window boosting.
//!
//! The attacker keeps a belief `b[m]` that test label `m` is 1. Odd queries
//! are drawn from the belief. Each even query copies a random window of the
//! previous query, set to that window's minority bit, and redraws every other
//! position from the belief. The change in reported risk across the pair
//! estimates the positive rate inside the window:
//!
//! `B* = (1 - n * (R_t - R_{t-1}) / sum_W (v_t - v_{t-1})) / 2`
//!
//! and the window's beliefs move toward the clipped estimate at rate `alpha`.

use rand::Rng;

use super::{Attacker, AttackerKind, Submission};
use crate::error::{Error, Result};
use crate::evaluators::Oracle;
use crate::rng::StreamRng;
use crate::types::LabelVector;

#[derive(Debug, Clone)]
pub struct WBoost {
    belief: Vec<f64>,
    window: usize,
    alpha: f64,
    t: u64,
    last: Option<(LabelVector, f64)>,
    skipped: u64,
}

/// Window positions and their minority value, for inspection in tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl WBoost {
    pub fn new(n_test: usize, window: usize, alpha: f64) -> Result<Self> {
        if n_test == 0 {
            return Err(Error::InvalidArgument("empty test set".into()));
        }
        if window == 0 {
            return Err(Error::InvalidArgument("window length must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1]")));
        }
        Ok(Self {
            belief: vec![0.5; n_test],
            window: window.min(n_test),
            alpha,
            t: 0,
            last: None,
            skipped: 0,
        })
    }

    pub fn belief(&self) -> &[f64] {
        &self.belief
    }

    /// Pairs whose window difference was zero, so no update was possible.
    pub fn skipped_updates(&self) -> u64 {
        self.skipped
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        self.belief.iter().map(|&p| rng.gen::<f64>() < p).collect()
    }

    /// Builds the even-step query from the previous one.
    pub fn perturb<R: Rng + ?Sized>(&self, previous: &LabelVector, rng: &mut R) -> (LabelVector, Window) {
        let n = self.belief.len();
        let start = rng.gen_range(0..=n - self.window);
        let w = Window {
            start,
            len: self.window,
        };
        let mut v = self.draw(rng);
        let fill = window_minority(&previous.as_slice()[start..start + self.window]);
        v[start..start + self.window].fill(fill);
        (v.into(), w)
    }

    /// Applies the pair update. Returns the clipped estimate, or `None` when
    /// the window did not change.
    pub fn update(
        &mut self,
        window: Window,
        previous: &LabelVector,
        previous_risk: f64,
        current: &LabelVector,
        current_risk: f64,
    ) -> Option<f64> {
        let range = window.start..window.start + window.len;
        let diff: i64 = range
            .clone()
            .map(|m| current[m] as i64 - previous[m] as i64)
            .sum();
        if diff == 0 {
            self.skipped += 1;
            return None;
        }
        let n = self.belief.len() as f64;
        let estimate = (0.5 * (1.0 - n * (current_risk - previous_risk) / diff as f64)).clamp(0.0, 1.0);
        for b in &mut self.belief[range] {
            *b = (1.0 - self.alpha) * *b + self.alpha * estimate;
        }
        Some(estimate)
    }
}

/// Minority bit of a window; on an exact tie, 0 (the complement of the
/// majority tie rule).
pub fn window_minority(bits: &[bool]) -> bool {
    let ones = bits.iter().filter(|&&b| b).count();
    2 * ones < bits.len()
}

impl Attacker for WBoost {
    fn kind(&self) -> AttackerKind {
        AttackerKind::WBoost
    }

    fn step(&mut self, oracle: &mut dyn Oracle, rng: &mut StreamRng) -> Result<Submission> {
        self.t += 1;
        let odd = self.t % 2 == 1;
        match (odd, self.last.take()) {
            (false, Some((previous, previous_risk))) => {
                let (query, window) = self.perturb(&previous, rng);
                let reported = oracle.submit(&query)?;
                self.update(window, &previous, previous_risk, &query, reported);
                Ok(Submission { query, reported })
            }
            _ => {
                let query: LabelVector = self.draw(rng).into();
                let reported = oracle.submit(&query)?;
                self.last = Some((query.clone(), reported));
                Ok(Submission { query, reported })
            }
        }
    }

    /// 1 wherever the belief is at least one half.
    fn prediction(&self, _rng: &mut StreamRng) -> LabelVector {
        self.belief.iter().map(|&b| b >= 0.5).collect()
    }
}
