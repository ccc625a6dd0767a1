//! Sealed holdout evaluators.
//!
//! An evaluator owns the hidden test labels and answers each submitted
//! label vector with one scalar. Attackers only ever see that scalar through
//! the [`Oracle`] trait; the audit log of true risks is reachable only from
//! the concrete evaluator types, which the harness keeps to itself.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::risk::empirical_risk;
use crate::types::LabelVector;

/// Default reporting precision of the Kaggle mechanism.
pub const KAGGLE_PRECISION: f64 = 1e-5;

/// Relative slack used to recognise half-way cases despite division error.
const HALF_WAY_SLACK: f64 = 1e-9;

/// The attacker-facing side of an evaluator.
pub trait Oracle {
    /// Submits a label vector and returns the mechanism's report.
    fn submit(&mut self, query: &LabelVector) -> Result<f64>;

    fn n_test(&self) -> usize;
}

/// Rounds `x` to the nearest integer multiple of `eta`, breaking half-way
/// ties toward the even multiple.
pub fn round_to_multiple(x: f64, eta: f64) -> f64 {
    assert!(eta > 0.0, "rounding step must be positive");
    let q = x / eta;
    let lower = q.floor();
    let frac = q - lower;
    let index = if (frac - 0.5).abs() <= HALF_WAY_SLACK {
        if lower.rem_euclid(2.0) == 0.0 {
            lower
        } else {
            lower + 1.0
        }
    } else {
        q.round()
    };
    index * eta
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditEntry {
    pub t: u64,
    pub empirical_risk: f64,
    pub reported: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MechanismKind {
    Kaggle,
    Ladder,
}

impl MechanismKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MechanismKind::Kaggle => "kaggle",
            MechanismKind::Ladder => "ladder",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kaggle" => Ok(Self::Kaggle),
            "ladder" => Ok(Self::Ladder),
            other => Err(Error::InvalidArgument(format!("unknown mechanism {other:?}"))),
        }
    }
}

fn check_len(query: &LabelVector, hidden: &LabelVector) -> Result<()> {
    if query.len() != hidden.len() {
        return Err(Error::LengthMismatch {
            expected: hidden.len(),
            actual: query.len(),
        });
    }
    Ok(())
}

/// Reports the empirical risk of every submission, rounded to `precision`.
#[derive(Debug, Clone)]
pub struct KaggleEvaluator {
    hidden: LabelVector,
    precision: f64,
    t: u64,
    log: Vec<AuditEntry>,
}

impl KaggleEvaluator {
    pub fn new(hidden: LabelVector, precision: f64) -> Result<Self> {
        if !(precision > 0.0) {
            return Err(Error::InvalidArgument("Kaggle precision must be positive".into()));
        }
        if hidden.is_empty() {
            return Err(Error::InvalidArgument("empty holdout".into()));
        }
        Ok(Self {
            hidden,
            precision,
            t: 0,
            log: Vec::new(),
        })
    }

    pub fn queries(&self) -> u64 {
        self.t
    }

    pub fn audit_log(&self) -> &[AuditEntry] {
        &self.log
    }
}

impl Oracle for KaggleEvaluator {
    fn submit(&mut self, query: &LabelVector) -> Result<f64> {
        check_len(query, &self.hidden)?;
        let risk = empirical_risk(query, &self.hidden)?;
        let reported = round_to_multiple(risk, self.precision);
        self.t += 1;
        self.log.push(AuditEntry {
            t: self.t,
            empirical_risk: risk,
            reported,
        });
        Ok(reported)
    }

    fn n_test(&self) -> usize {
        self.hidden.len()
    }
}

/// Reports a new rounded risk only when it beats the best so far by more
/// than `step`; otherwise repeats the previous report.
#[derive(Debug, Clone)]
pub struct LadderEvaluator {
    hidden: LabelVector,
    step: f64,
    best: f64,
    t: u64,
    log: Vec<AuditEntry>,
}

impl LadderEvaluator {
    pub fn new(hidden: LabelVector, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidArgument("Ladder step must be positive".into()));
        }
        if hidden.is_empty() {
            return Err(Error::InvalidArgument("empty holdout".into()));
        }
        Ok(Self {
            hidden,
            step,
            best: f64::INFINITY,
            t: 0,
            log: Vec::new(),
        })
    }

    pub fn queries(&self) -> u64 {
        self.t
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn audit_log(&self) -> &[AuditEntry] {
        &self.log
    }
}

impl Oracle for LadderEvaluator {
    fn submit(&mut self, query: &LabelVector) -> Result<f64> {
        check_len(query, &self.hidden)?;
        let risk = empirical_risk(query, &self.hidden)?;
        if risk < self.best - self.step {
            self.best = round_to_multiple(risk, self.step);
        }
        self.t += 1;
        self.log.push(AuditEntry {
            t: self.t,
            empirical_risk: risk,
            reported: self.best,
        });
        Ok(self.best)
    }

    fn n_test(&self) -> usize {
        self.hidden.len()
    }
}

/// Either mechanism, chosen at run time.
#[derive(Debug, Clone)]
pub enum Evaluator {
    Kaggle(KaggleEvaluator),
    Ladder(LadderEvaluator),
}

impl Evaluator {
    pub fn new(kind: MechanismKind, hidden: LabelVector, eta: f64) -> Result<Self> {
        Ok(match kind {
            MechanismKind::Kaggle => Self::Kaggle(KaggleEvaluator::new(hidden, eta)?),
            MechanismKind::Ladder => Self::Ladder(LadderEvaluator::new(hidden, eta)?),
        })
    }

    pub fn kind(&self) -> MechanismKind {
        match self {
            Self::Kaggle(_) => MechanismKind::Kaggle,
            Self::Ladder(_) => MechanismKind::Ladder,
        }
    }

    pub fn audit_log(&self) -> &[AuditEntry] {
        match self {
            Self::Kaggle(e) => e.audit_log(),
            Self::Ladder(e) => e.audit_log(),
        }
    }
}

impl Oracle for Evaluator {
    fn submit(&mut self, query: &LabelVector) -> Result<f64> {
        match self {
            Self::Kaggle(e) => e.submit(query),
            Self::Ladder(e) => e.submit(query),
        }
    }

    fn n_test(&self) -> usize {
        match self {
            Self::Kaggle(e) => e.n_test(),
            Self::Ladder(e) => e.n_test(),
        }
    }
}

pub const AUDIT_CSV_HEADER: &str = "trial,mechanism,t,empirical_risk,reported";

/// Writes audit rows (`trial,mechanism,t,empirical_risk,reported`) without a header.
pub fn write_audit_rows<W: Write>(
    out: &mut W,
    trial: u64,
    mechanism: MechanismKind,
    log: &[AuditEntry],
) -> std::io::Result<()> {
    for e in log {
        writeln!(
            out,
            "{},{},{},{},{}",
            trial, mechanism, e.t, e.empirical_risk, e.reported
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use rand::Rng;

    fn lv(bits: &[u8]) -> LabelVector {
        LabelVector::from_bits(bits)
    }

    /// A query with exactly `wrong` mismatches against all-ones labels of length `n`.
    fn query_with_errors(n: usize, wrong: usize) -> LabelVector {
        (0..n).map(|i| i >= wrong).collect()
    }

    #[test]
    fn rounding_examples() {
        assert!((round_to_multiple(0.123456, 1e-5) - 0.12346).abs() < 1e-12);
        assert!((round_to_multiple(0.4, 0.01) - 0.40).abs() < 1e-12);
        // 1.5 steps: half-way, even index is 2.
        assert!((round_to_multiple(0.015, 0.01) - 0.02).abs() < 1e-12);
        // 2.5 steps: half-way, even index is 2.
        assert!((round_to_multiple(0.025, 0.01) - 0.02).abs() < 1e-12);
        assert_eq!(round_to_multiple(0.0, 0.1), 0.0);
    }

    #[test]
    fn kaggle_examples() {
        let mut ev = KaggleEvaluator::new(lv(&[1, 0]), KAGGLE_PRECISION).unwrap();
        assert_eq!(ev.submit(&lv(&[1, 0])).unwrap(), 0.0);
        assert!((ev.submit(&lv(&[0, 1])).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ev.queries(), 2);

        let mut ev = KaggleEvaluator::new(lv(&[1, 0, 1]), KAGGLE_PRECISION).unwrap();
        assert!((ev.submit(&lv(&[1, 1, 1])).unwrap() - 0.33333).abs() < 1e-12);
    }

    #[test]
    fn rejects_wrong_length() {
        let mut k = KaggleEvaluator::new(lv(&[1, 0]), 1e-5).unwrap();
        assert!(k.submit(&lv(&[1])).is_err());
        let mut l = LadderEvaluator::new(lv(&[1, 0]), 0.01).unwrap();
        assert!(l.submit(&lv(&[1, 0, 0])).is_err());
        assert_eq!(l.queries(), 0);
    }

    #[test]
    fn ladder_trace() {
        // Labels all ones, n=200: 100, 80 and 90 errors give risks 0.5, 0.4, 0.45.
        let n = 200;
        let mut ev = LadderEvaluator::new(LabelVector::constant(n, true), 0.01).unwrap();
        let reports: Vec<f64> = [100, 80, 90]
            .iter()
            .map(|&w| ev.submit(&query_with_errors(n, w)).unwrap())
            .collect();
        for (got, want) in reports.iter().zip([0.5, 0.4, 0.4]) {
            assert!((got - want).abs() < 1e-12, "{reports:?}");
        }
        // 0.395 is not below 0.4 - 0.01.
        assert!((ev.submit(&query_with_errors(n, 79)).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ladder_first_submission_always_reported() {
        let mut ev = LadderEvaluator::new(lv(&[1, 1, 0, 0]), 0.5).unwrap();
        assert_eq!(ev.best(), f64::INFINITY);
        let r = ev.submit(&lv(&[0, 0, 1, 1])).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn audit_log_csv() {
        let mut ev = Evaluator::new(MechanismKind::Kaggle, lv(&[1, 0]), 1e-5).unwrap();
        ev.submit(&lv(&[1, 1])).unwrap();
        let mut buf = Vec::new();
        write_audit_rows(&mut buf, 3, ev.kind(), ev.audit_log()).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3,kaggle,1,0.5,0.5\n");
    }

    #[test]
    fn hoeffding_sanity() {
        // i.i.d. labels, non-adaptive random queries. The union bound gives
        // sqrt(ln(2T/delta)/(2n)) ~ 0.073 for T=n=1000, delta=0.05; the test
        // uses the tighter 0.06 (about 3.8 sigma) and still expects rare misses.
        let (n, t) = (1000, 1000);
        let eps = ((2.0 * t as f64 / 0.05).ln() / (2.0 * n as f64)).sqrt();
        assert!(eps > 0.06);
        let mut rng = RngStream::new(11, 0).rng();
        let hidden: LabelVector = (0..n).map(|_| rng.gen()).collect();
        let mut ev = KaggleEvaluator::new(hidden, KAGGLE_PRECISION).unwrap();
        let far = (0..t)
            .filter(|_| {
                let q: LabelVector = (0..n).map(|_| rng.gen()).collect();
                (ev.submit(&q).unwrap() - 0.5).abs() > 0.06
            })
            .count();
        assert!((far as f64) / (t as f64) < 0.05, "{far} of {t} deviated");
    }

    proptest! {
        #[test]
        fn kaggle_within_half_step(bits in prop::collection::vec(any::<(bool, bool)>(), 1..300), eta in 1e-6f64..0.2) {
            let hidden: LabelVector = bits.iter().map(|b| b.0).collect();
            let q: LabelVector = bits.iter().map(|b| b.1).collect();
            let truth = empirical_risk(&q, &hidden).unwrap();
            let mut ev = KaggleEvaluator::new(hidden, eta).unwrap();
            let r = ev.submit(&q).unwrap();
            prop_assert!((r - truth).abs() <= eta / 2.0 + 1e-12);
        }

        #[test]
        fn ladder_monotone(seed in any::<u64>(), eta in 0.001f64..0.2) {
            let mut rng = RngStream::new(seed, 0).rng();
            let n = 50;
            let hidden: LabelVector = (0..n).map(|_| rng.gen()).collect();
            let mut ev = LadderEvaluator::new(hidden, eta).unwrap();
            let mut prev = f64::INFINITY;
            for _ in 0..40 {
                let q: LabelVector = (0..n).map(|_| rng.gen()).collect();
                let r = ev.submit(&q).unwrap();
                prop_assert!(r <= prev);
                let idx = r / eta;
                prop_assert!((idx - idx.round()).abs() < 1e-6);
                prev = r;
            }
        }
    }
}
