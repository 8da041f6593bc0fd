use std::collections::{BTreeMap, BTreeSet};

use crossview_core::batch::{build_epoch_plan, CurriculumConfig, EpochPlan, SamplerConfig, SyntheticPoolState};
use crossview_core::{DatasetManifest, Domain, SampleRecord};

fn manifest(real_counts: &[usize], syn: usize) -> DatasetManifest {
    let mut rows = Vec::new();
    for (i, &real) in real_counts.iter().enumerate() {
        for j in 0..real {
            rows.push(SampleRecord::real(format!("id{i}"), format!("real/{i}_{j}.png")));
        }
        for j in 0..syn {
            let dt = (j as f64 * 4.0) % 30.0;
            rows.push(SampleRecord::synthetic(format!("id{i}"), format!("syn/{i}_{j}.png"), dt, 0.0));
        }
    }
    DatasetManifest::new(rows, 30.0).unwrap()
}

fn sampler(seed: u64) -> SamplerConfig {
    SamplerConfig {
        identities_per_batch: 2,
        instances_per_identity: 4,
        real_per_identity: 2,
        synthetic_per_identity: 2,
        seed,
    }
}

fn plan(m: &DatasetManifest, epoch: u32, state: &SyntheticPoolState) -> (EpochPlan, SyntheticPoolState) {
    build_epoch_plan(m, &sampler(3), &CurriculumConfig::default(), epoch, state).unwrap()
}

#[test]
fn four_identities_fill_four_batches() {
    let m = manifest(&[4, 4, 4, 4], 8);
    let (p, _) = plan(&m, 20, &SyntheticPoolState::default());
    assert_eq!(p.batches.len(), 4);

    let mut batches_per_id: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    let mut real_uses: BTreeMap<&str, usize> = BTreeMap::new();
    for b in &p.batches {
        assert_eq!(b.entries.len(), 8);
        let ids: BTreeSet<&str> = b.entries.iter().map(|e| e.identity.as_str()).collect();
        assert_eq!(ids.len(), 2, "batch {} mixes {ids:?}", b.batch);
        for g in b.entries.chunks(4) {
            let domains: Vec<Domain> = g.iter().map(|e| e.domain).collect();
            assert_eq!(domains, [Domain::Real, Domain::Real, Domain::Synthetic, Domain::Synthetic]);
        }
        for e in &b.entries {
            batches_per_id.entry(&e.identity).or_default().insert(b.batch);
            if e.domain == Domain::Real {
                *real_uses.entry(&e.record).or_default() += 1;
            }
        }
    }
    assert!(batches_per_id.values().all(|s| s.len() == 2));
    assert_eq!(real_uses.len(), 16);
    assert!(real_uses.values().all(|&n| n == 1));
}

#[test]
fn single_real_image_fills_its_group_twice() {
    let m = manifest(&[1, 2], 2);
    let (p, _) = plan(&m, 20, &SyntheticPoolState::default());
    let group: Vec<&str> = p
        .entries()
        .filter(|e| e.identity == "id0" && e.domain == Domain::Real)
        .map(|e| e.record.as_str())
        .collect();
    assert_eq!(group, ["real/0_0.png", "real/0_0.png"]);
}

#[test]
fn synthetic_pools_are_exhausted_before_reuse() {
    let m = manifest(&[4, 4, 4, 4], 8);
    let mut state = SyntheticPoolState::default();
    let mut draws: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for epoch in 20..24 {
        let (p, next) = plan(&m, epoch, &state);
        for e in p.entries().filter(|e| e.domain == Domain::Synthetic) {
            draws.entry(e.identity.clone()).or_default().push(e.record.clone());
        }
        state = next;
    }
    for (id, seq) in &draws {
        assert_eq!(seq.len(), 16, "{id}");
        for pass in seq.chunks(8) {
            let distinct: BTreeSet<&String> = pass.iter().collect();
            assert_eq!(distinct.len(), 8, "{id} reused a view early: {pass:?}");
        }
    }
}

#[test]
fn plans_are_pure_functions_of_their_inputs() {
    let m = manifest(&[3, 5, 1, 4, 2], 6);
    let (a, sa) = plan(&m, 4, &SyntheticPoolState::default());
    let (b, sb) = plan(&m, 4, &SyntheticPoolState::default());
    assert_eq!(a.to_jsonl(), b.to_jsonl());
    assert_eq!(sa.to_json(), sb.to_json());
    let (c, _) = plan(&m, 5, &sa);
    let (d, _) = plan(&m, 5, &SyntheticPoolState::from_json(&sb.to_json()).unwrap());
    assert_eq!(c.to_jsonl(), d.to_jsonl());
    assert_eq!(EpochPlan::from_jsonl(&c.to_jsonl()).unwrap(), c);
}
