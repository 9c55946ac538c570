use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expressive::Verdict;
use crate::graph::{ingest_csv, IngestOptions, TemporalGraph};
use crate::harness::rng;
use crate::synth::csl::{gen_oscillating_csl, OscillationSpec};
use crate::synth::cuneiform::{gen_cuneiform_like, shuffled_graph, CuneiformConfig};

/// Manifest entry for one labeled pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair_id: String,
    pub generator: String,
    pub params: serde_json::Value,
    pub label: Verdict,
    pub num_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct LabeledPair {
    pub record: PairRecord,
    pub a: TemporalGraph,
    pub b: TemporalGraph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatingConfig {
    pub n: usize,
    pub skips: Vec<usize>,
    pub length: usize,
    pub non_isomorphic: usize,
    pub isomorphic: usize,
}

impl Default for OscillatingConfig {
    fn default() -> Self {
        OscillatingConfig { n: 11, skips: vec![2, 3, 4, 5], length: 6, non_isomorphic: 50, isomorphic: 10 }
    }
}

fn label(non_isomorphic: bool) -> Verdict {
    if non_isomorphic {
        Verdict::NonIsomorphic
    } else {
        Verdict::Isomorphic
    }
}

pub fn oscillating_corpus(cfg: &OscillatingConfig, seed: u64) -> Result<Vec<LabeledPair>> {
    if cfg.skips.len() < 2 && cfg.non_isomorphic > 0 {
        return Err(Error::Config("oscillating corpus needs at least two skips for non-isomorphic pairs".into()));
    }
    let mut r = rng(seed);
    let ordered: Vec<(usize, usize)> = cfg.skips.iter().flat_map(|&a| cfg.skips.iter().filter(move |&&b| b != a).map(move |&b| (a, b))).collect();
    let mut out = Vec::with_capacity(cfg.non_isomorphic + cfg.isomorphic);
    for i in 0..cfg.non_isomorphic + cfg.isomorphic {
        let skips = if i < cfg.non_isomorphic {
            *ordered.choose(&mut r).expect("non-empty")
        } else {
            let s = *cfg.skips.choose(&mut r).ok_or_else(|| Error::Config("no skips".into()))?;
            (s, s)
        };
        let spec = OscillationSpec { n: cfg.n, skips, length: cfg.length };
        let (a, b, non) = gen_oscillating_csl(spec, &mut r)?;
        let record = PairRecord {
            pair_id: format!("osc-{i:04}"),
            generator: "oscillating-csl".into(),
            params: serde_json::to_value(spec)?,
            label: label(non),
            num_nodes: cfg.n,
        };
        out.push(LabeledPair { record, a, b });
    }
    Ok(out)
}

pub fn cuneiform_corpus(cfg: &CuneiformConfig, seed: u64) -> Result<Vec<LabeledPair>> {
    let mut r = rng(seed);
    let pairs = gen_cuneiform_like(cfg, &mut r)?;
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let (a, b) = (shuffled_graph(&p.a, &mut r), shuffled_graph(&p.b, &mut r));
            let record = PairRecord {
                pair_id: format!("cun-{i:04}"),
                generator: "cuneiform-like".into(),
                params: serde_json::json!({ "kind": p.kind, "a": p.a, "b": p.b }),
                label: label(p.non_isomorphic),
                num_nodes: p.a.num_nodes(),
            };
            LabeledPair { record, a, b }
        })
        .collect())
}

/// Write `manifest.json` plus `<pair_id>.a.csv` / `<pair_id>.b.csv` into `dir`.
pub fn write_corpus(dir: &Path, pairs: &[LabeledPair]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for p in pairs {
        p.a.write_csv(BufWriter::new(File::create(dir.join(format!("{}.a.csv", p.record.pair_id)))?))?;
        p.b.write_csv(BufWriter::new(File::create(dir.join(format!("{}.b.csv", p.record.pair_id)))?))?;
    }
    let records: Vec<&PairRecord> = pairs.iter().map(|p| &p.record).collect();
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("manifest.json"))?), &records)?;
    Ok(())
}

pub fn read_corpus(dir: &Path) -> Result<Vec<LabeledPair>> {
    let records: Vec<PairRecord> = serde_json::from_reader(BufReader::new(File::open(dir.join("manifest.json"))?))?;
    records
        .into_iter()
        .map(|record| {
            let opts = IngestOptions { dense_ids: true, num_nodes: Some(record.num_nodes), ..Default::default() };
            let load = |side: &str| ingest_csv(BufReader::new(File::open(dir.join(format!("{}.{side}.csv", record.pair_id)))?), &opts);
            let (a, b) = (load("a")?, load("b")?);
            Ok(LabeledPair { record, a, b })
        })
        .collect()
}
