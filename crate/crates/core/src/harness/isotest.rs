use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expressive::{rp_oracle, Engine, EngineKind, Verdict};
use crate::harness::metrics::{IsoConfusion, IsoRates};
use crate::synth::LabeledPair;

/// Anything that can decide a pair: an interning engine or the brute-force oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Checker {
    Engine(EngineKind),
    Oracle,
}

impl fmt::Display for Checker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Checker::Engine(k) => k.fmt(f),
            Checker::Oracle => f.write_str("oracle"),
        }
    }
}

impl FromStr for Checker {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "oracle" {
            Ok(Checker::Oracle)
        } else {
            s.parse().map(Checker::Engine)
        }
    }
}

/// Parse a comma-separated engine list such as `t1wl,rtr-hetero,pint-pos`.
pub fn parse_checkers(list: &str) -> Result<Vec<Checker>> {
    let out: Vec<Checker> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Config("empty engine list".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct EngineReport {
    pub confusion: IsoConfusion,
    pub rates: IsoRates,
    /// Pairs whose verdict disagrees with the label.
    pub errors: Vec<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IsoReport {
    pub pairs: usize,
    pub depth: usize,
    pub engines: BTreeMap<String, EngineReport>,
}

impl IsoReport {
    pub fn engine(&self, c: Checker) -> Option<&EngineReport> {
        self.engines.get(&c.to_string())
    }
}

/// Verdict of one checker on one pair; `Ok(None)` when the oracle refuses the size.
pub fn decide(c: Checker, depth: usize, p: &LabeledPair) -> Result<Option<Verdict>> {
    match c {
        Checker::Engine(k) => Engine::new(k, depth)?.compare(&p.a, &p.b).map(Some),
        Checker::Oracle => match rp_oracle(&p.a, &p.b) {
            Ok(v) => Ok(Some(v)),
            Err(Error::OverBudget(_)) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

/// Run every checker over every pair and tabulate confusion counts against the labels.
pub fn run_isotest(pairs: &[LabeledPair], checkers: &[Checker], depth: usize) -> Result<IsoReport> {
    let mut engines = BTreeMap::new();
    for &c in checkers {
        let start = Instant::now();
        let mut confusion = IsoConfusion::default();
        let mut errors = Vec::new();
        for p in pairs {
            match decide(c, depth, p)? {
                Some(v) => {
                    confusion.record(p.record.label, v);
                    if v != p.record.label {
                        errors.push(p.record.pair_id.clone());
                    }
                }
                None => confusion.skipped += 1,
            }
        }
        let report = EngineReport { confusion, rates: confusion.summary(), errors, seconds: start.elapsed().as_secs_f64() };
        engines.insert(c.to_string(), report);
    }
    Ok(IsoReport { pairs: pairs.len(), depth, engines })
}
