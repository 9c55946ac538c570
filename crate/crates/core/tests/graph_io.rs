use std::collections::BTreeSet;

use proptest::prelude::*;
use rtr_core::graph::{candidate_pool, chronological_split, ingest_csv, sample_negatives, EvalMode, GraphOptions, IngestOptions, RawEvent};
use rtr_core::harness;
use rtr_core::{NodeId, TemporalGraph};

fn graph(directed: bool) -> impl Strategy<Value = TemporalGraph> {
    (3usize..=20).prop_flat_map(move |n| {
        prop::collection::vec((0..n as NodeId, 1..n as NodeId, 0u16..50, prop::collection::vec(-1e3f64..1e3, 2)), 20..=120).prop_map(move |evs| {
            let raw = evs.into_iter().map(|(u, off, t, f)| RawEvent { src: u, dst: (u + off) % n as NodeId, time: f64::from(t) * 0.5, edge_feat: f }).collect();
            TemporalGraph::from_records(n, raw, GraphOptions { directed, allow_self_loops: false }).expect("valid")
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_preserves_events(g in graph(true)) {
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let opts = IngestOptions { dense_ids: true, num_nodes: Some(g.num_nodes()), graph: g.options() };
        let back = ingest_csv(buf.as_slice(), &opts).unwrap();
        prop_assert_eq!(back.events(), g.events());
    }

    #[test]
    fn events_are_strictly_ordered(g in graph(false)) {
        for w in g.events().windows(2) {
            prop_assert!((w[0].time, w[0].seq) < (w[1].time, w[1].seq));
        }
    }

    #[test]
    fn split_partitions_the_stream(g in graph(false), mask in 0.0f64..0.5, seed in any::<u64>()) {
        let s = chronological_split(&g, (0.7, 0.15, 0.15), mask, seed).unwrap();
        prop_assert_eq!(s.train.start, 0);
        prop_assert_eq!(s.train.end, s.val.start);
        prop_assert_eq!(s.val.end, s.test.start);
        prop_assert_eq!(s.test.end, g.num_events());
        prop_assert!(!s.train.is_empty() && !s.val.is_empty() && !s.test.is_empty());
        prop_assert_eq!(s.masked_nodes.len(), (mask * g.num_nodes() as f64).floor() as usize);
        for e in s.train_events(&g).into_iter().chain(s.val_events(&g)) {
            prop_assert!(!s.is_masked(e.src) && !s.is_masked(e.dst));
        }
        prop_assert_eq!(&s, &chronological_split(&g, (0.7, 0.15, 0.15), mask, seed).unwrap());
    }

    #[test]
    fn negatives_come_from_the_mode_pool(g in graph(true), seed in any::<u64>()) {
        let s = chronological_split(&g, (0.7, 0.15, 0.15), 0.2, seed).unwrap();
        for mode in [EvalMode::Transductive, EvalMode::Inductive] {
            let pool = candidate_pool(&g, &s, mode);
            if pool.len() < 2 {
                continue;
            }
            let allowed: BTreeSet<NodeId> = pool.iter().copied().collect();
            let batch = s.test_events(&g);
            let negs = sample_negatives(&batch, &pool, &mut harness::rng(seed)).unwrap();
            prop_assert_eq!(negs.len(), batch.len());
            prop_assert!(negs.iter().all(|v| allowed.contains(v)));
            prop_assert!(negs.iter().zip(&batch).all(|(v, e)| *v != e.dst));
        }
    }
}

#[test]
fn split_is_by_event_count() {
    let raw = (0..100).map(|i| RawEvent::new(i % 5, (i + 1) % 5, f64::from(i / 10))).collect();
    let g = TemporalGraph::from_records(5, raw, GraphOptions::default()).unwrap();
    let s = chronological_split(&g, (0.7, 0.15, 0.15), 0.0, 0).unwrap();
    assert_eq!((s.train, s.val, s.test), (0..70, 70..85, 85..100));
}

#[test]
fn malformed_rows_report_their_line() {
    let csv = "src,dst,time\n0,1,1\n1,2,x\n";
    let err = ingest_csv(csv.as_bytes(), &IngestOptions::default()).unwrap_err();
    assert!(matches!(err, rtr_core::Error::Parse { line: 3, .. }), "{err}");
    let csv = "src,dst,time\n0,1,1\n1,2,nan\n";
    assert!(ingest_csv(csv.as_bytes(), &IngestOptions::default()).is_err());
    let csv = "src,dst,time\n0,0,1\n";
    assert!(ingest_csv(csv.as_bytes(), &IngestOptions::default()).is_err());
}
