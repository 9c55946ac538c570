//! Ranking metrics for link prediction and confusion counts for isomorphism tests.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expressive::Verdict;

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Validation(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Validation(format!("need both classes, got {pos} positives and {neg} negatives")));
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Average precision: Σ_n (R_n − R_{n−1}) · P_n over distinct score thresholds, high to low.
/// Tied scores enter together, so the value does not depend on input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    let idx = ranked(scores);
    let (mut tp, mut seen, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            tp += labels[idx[i]] as usize;
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    Ok(ap)
}

/// ROC AUC: probability that a random positive outranks a random negative, ties counting ½.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let idx = ranked(scores);
    // Walk from the top; each negative group is outranked by every positive seen so far.
    let (mut pos_above, mut wins) = (0usize, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        let (mut gp, mut gn) = (0usize, 0usize);
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] {
                gp += 1
            } else {
                gn += 1
            }
            i += 1;
        }
        wins += gn as f64 * (pos_above as f64 + 0.5 * gp as f64);
        pos_above += gp;
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// A percentage that may be undefined (zero denominator), serialized as `"0/0"` then.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rate {
    Percent(f64),
    Undefined,
}

impl Rate {
    pub fn of(num: usize, den: usize) -> Self {
        if den == 0 {
            Rate::Undefined
        } else {
            Rate::Percent(100.0 * num as f64 / den as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Rate::Percent(v) => Some(v),
            Rate::Undefined => None,
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Rate::Percent(v) => s.serialize_f64(*v),
            Rate::Undefined => s.serialize_str("0/0"),
        }
    }
}

/// Confusion counts with "non-isomorphic" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsoConfusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Pairs the engine refused (over budget); not part of the rates.
    pub skipped: usize,
}

impl IsoConfusion {
    pub fn record(&mut self, label: Verdict, verdict: Verdict) {
        match (label, verdict) {
            (Verdict::NonIsomorphic, Verdict::NonIsomorphic) => self.tp += 1,
            (Verdict::NonIsomorphic, Verdict::Isomorphic) => self.fn_ += 1,
            (Verdict::Isomorphic, Verdict::Isomorphic) => self.tn += 1,
            (Verdict::Isomorphic, Verdict::NonIsomorphic) => self.fp += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_ + self.skipped
    }

    pub fn precision(&self) -> Rate {
        Rate::of(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Rate {
        Rate::of(self.tp, self.tp + self.fn_)
    }

    pub fn tnr(&self) -> Rate {
        Rate::of(self.tn, self.tn + self.fp)
    }

    pub fn accuracy(&self) -> Rate {
        Rate::of(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }

    /// AUC of the hard verdict used as a score: the mean of recall and TNR when both exist.
    pub fn auc(&self) -> Rate {
        match (self.recall(), self.tnr()) {
            (Rate::Percent(r), Rate::Percent(t)) => Rate::Percent((r + t) / 2.0),
            _ => Rate::Undefined,
        }
    }

    pub fn summary(&self) -> IsoRates {
        IsoRates { precision: self.precision(), recall: self.recall(), tnr: self.tnr(), accuracy: self.accuracy(), auc: self.auc() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IsoRates {
    pub precision: Rate,
    pub recall: Rate,
    pub tnr: Rate,
    pub accuracy: Rate,
    pub auc: Rate,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// O(n²) pairwise AUC.
    fn brute_auc(s: &[f64], l: &[bool]) -> f64 {
        let (mut w, mut n) = (0.0, 0.0);
        for i in (0..s.len()).filter(|&i| l[i]) {
            for j in (0..s.len()).filter(|&j| !l[j]) {
                n += 1.0;
                w += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
        w / n
    }

    /// AP from the definition: for each distinct threshold, precision and recall of `score >= thr`.
    fn brute_ap(s: &[f64], l: &[bool]) -> f64 {
        let pos = l.iter().filter(|&&x| x).count() as f64;
        let mut thr: Vec<f64> = s.to_vec();
        thr.sort_by(|a, b| b.total_cmp(a));
        thr.dedup();
        let (mut ap, mut prev) = (0.0, 0.0);
        for t in thr {
            let sel: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= t).collect();
            let tp = sel.iter().filter(|&&i| l[i]).count() as f64;
            let r = tp / pos;
            ap += (r - prev) * tp / sel.len() as f64;
            prev = r;
        }
        ap
    }

    #[test]
    fn perfect_separation() {
        let (s, l) = ([0.9, 0.8, 0.2, 0.1], [true, true, false, false]);
        assert_eq!(average_precision(&s, &l).unwrap(), 1.0);
        assert_eq!(roc_auc(&s, &l).unwrap(), 1.0);
    }

    #[test]
    fn all_ties() {
        let (s, l) = ([0.5; 6], [true, false, true, false, true, false]);
        assert_eq!(roc_auc(&s, &l).unwrap(), 0.5);
        assert_eq!(average_precision(&s, &l).unwrap(), 0.5);
    }

    #[test]
    fn hand_computed_ap() {
        // ranks: + − + −  → (1/2)·1 + (1/2)·(2/3)
        let ap = average_precision(&[4.0, 3.0, 2.0, 1.0], &[true, false, true, false]).unwrap();
        assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs_are_errors() {
        assert!(roc_auc(&[1.0], &[true]).is_err());
        assert!(average_precision(&[1.0, 2.0], &[true]).is_err());
        assert!(roc_auc(&[f64::NAN, 1.0], &[true, false]).is_err());
    }

    #[test]
    fn random_scores_give_half() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let s: Vec<f64> = (0..n).map(|_| r.random()).collect();
        let l: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let ap = average_precision(&s, &l).unwrap();
        assert!((ap - 0.5).abs() < 0.02, "{ap}");
    }

    #[test]
    fn confusion_rates_and_sentinel() {
        let mut c = IsoConfusion::default();
        for _ in 0..3 {
            c.record(Verdict::Isomorphic, Verdict::Isomorphic);
        }
        assert_eq!(c.tnr(), Rate::Percent(100.0));
        assert_eq!(c.recall(), Rate::Undefined);
        assert_eq!(serde_json::to_string(&c.summary().recall).unwrap(), "\"0/0\"");
        c.record(Verdict::NonIsomorphic, Verdict::NonIsomorphic);
        c.record(Verdict::NonIsomorphic, Verdict::Isomorphic);
        assert_eq!(c.recall(), Rate::Percent(50.0));
        assert_eq!(c.auc(), Rate::Percent(75.0));
        assert_eq!(c.total(), 5);
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(v in prop::collection::vec((0u8..6, any::<bool>()), 2..200)) {
            let s: Vec<f64> = v.iter().map(|x| x.0 as f64).collect();
            let mut l: Vec<bool> = v.iter().map(|x| x.1).collect();
            l[0] = true;
            l[1] = false;
            let auc = roc_auc(&s, &l).unwrap();
            prop_assert!((auc - brute_auc(&s, &l)).abs() < 1e-12);
            let ap = average_precision(&s, &l).unwrap();
            prop_assert!((ap - brute_ap(&s, &l)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ap) && (0.0..=1.0).contains(&auc));
        }
    }
}
