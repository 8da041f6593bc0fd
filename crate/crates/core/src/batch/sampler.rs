//! Balanced real/synthetic P×K epoch planning.
//!
//! Every real record is used once per epoch in identity groups of `K_real`.
//! Groups are shuffled and packed `P` per batch, and each group receives
//! `K_syn` synthetic views drawn from a per-identity pool that persists
//! across epochs, so unused views are preferred until the pool is exhausted.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curriculum::{accept_sample, CurriculumConfig};
use super::BatchError;
use crate::assets::{DatasetManifest, Domain, SampleRecord};
use crate::rng::stream;

/// Consecutive curriculum rejections after which a slot takes the pool's
/// smallest-shift view unconditionally.
pub const MAX_REJECTIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub identities_per_batch: usize,
    pub instances_per_identity: usize,
    pub real_per_identity: usize,
    pub synthetic_per_identity: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            identities_per_batch: 32,
            instances_per_identity: 4,
            real_per_identity: 2,
            synthetic_per_identity: 2,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), BatchError> {
        let bad = |m: String| Err(BatchError::InvalidConfig(m));
        if self.identities_per_batch == 0 {
            return bad("identities_per_batch must be at least 1".into());
        }
        if self.real_per_identity == 0 {
            return bad("real_per_identity must be at least 1".into());
        }
        if self.instances_per_identity != self.real_per_identity + self.synthetic_per_identity {
            return bad(format!(
                "instances_per_identity ({}) must equal real_per_identity + synthetic_per_identity ({} + {})",
                self.instances_per_identity, self.real_per_identity, self.synthetic_per_identity
            ));
        }
        Ok(())
    }

    /// Fraction of each identity group drawn from real images.
    pub fn real_ratio(&self) -> f64 {
        self.real_per_identity as f64 / self.instances_per_identity as f64
    }
}

/// Not-yet-used synthetic record ids per identity, carried between epochs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPoolState {
    pub pools: BTreeMap<String, Vec<String>>,
}

impl SyntheticPoolState {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pool state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BatchError> {
        serde_json::from_str(text).map_err(|e| BatchError::InconsistentState(e.to_string()))
    }

    /// Every pooled id must be a synthetic record of that identity, at most once.
    pub fn validate(&self, manifest: &DatasetManifest) -> Result<(), BatchError> {
        for (identity, pool) in &self.pools {
            let mut seen = BTreeSet::new();
            for id in pool {
                let rec = manifest.find(id).ok_or_else(|| {
                    BatchError::InconsistentState(format!("pooled record {id:?} is not in the manifest"))
                })?;
                if rec.is_real() || rec.identity != *identity {
                    return Err(BatchError::InconsistentState(format!(
                        "pooled record {id:?} is not a synthetic view of identity {identity:?}"
                    )));
                }
                if !seen.insert(id) {
                    return Err(BatchError::InconsistentState(format!(
                        "record {id:?} appears twice in the pool of {identity:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub identity: String,
    pub record: String,
    pub domain: Domain,
    pub delta_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanBatch {
    pub epoch: u32,
    pub batch: usize,
    /// Identity groups in order; each group lists its real slots first.
    pub entries: Vec<PlanEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan {
    pub epoch: u32,
    pub batches: Vec<PlanBatch>,
}

impl EpochPlan {
    /// One JSON object per batch, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for b in &self.batches {
            out.push_str(&serde_json::to_string(b).expect("plan serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, BatchError> {
        let batches: Vec<PlanBatch> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()
            .map_err(|e| BatchError::InvalidPlan(e.to_string()))?;
        let epoch = batches.first().map_or(0, |b| b.epoch);
        Ok(Self { epoch, batches })
    }

    pub fn entries(&self) -> impl Iterator<Item = &PlanEntry> {
        self.batches.iter().flat_map(|b| &b.entries)
    }
}

struct Group<'a> {
    position: usize,
    identity: &'a str,
    reals: Vec<&'a str>,
}

/// Pack shuffled groups `p` per batch, preferring distinct identities and,
/// among those, identities with the most groups left; shuffled position
/// breaks ties. This spreads each identity's groups over as many batches as
/// possible, and an identity repeats within a batch only when no other
/// identity has groups left.
fn pack(groups: Vec<Group<'_>>, p: usize) -> Vec<Vec<Group<'_>>> {
    let mut queues: BTreeMap<&str, VecDeque<Group<'_>>> = BTreeMap::new();
    for g in groups {
        queues.entry(g.identity).or_default().push_back(g);
    }
    let key = |id: &str, q: &VecDeque<Group<'_>>| (Reverse(q.len()), q[0].position, id.to_owned());
    let mut ready: BTreeSet<(Reverse<usize>, usize, String)> =
        queues.iter().map(|(id, q)| key(id, q)).collect();
    let mut remaining: usize = queues.values().map(VecDeque::len).sum();
    let mut batches = Vec::new();
    while remaining > 0 {
        let mut batch = Vec::with_capacity(p);
        let mut taken: Vec<String> = Vec::new();
        while batch.len() < p && remaining > 0 {
            if ready.is_empty() {
                // Every identity with groups left is already in this batch.
                for id in taken.drain(..) {
                    if let Some(q) = queues.get(id.as_str()).filter(|q| !q.is_empty()) {
                        ready.insert(key(&id, q));
                    }
                }
            }
            let (_, _, id) = ready.pop_first().expect("groups remain");
            let group = queues.get_mut(id.as_str()).and_then(VecDeque::pop_front).expect("queued");
            batch.push(group);
            taken.push(id);
            remaining -= 1;
        }
        for id in taken {
            if let Some(q) = queues.get(id.as_str()).filter(|q| !q.is_empty()) {
                ready.insert(key(&id, q));
            }
        }
        batch.sort_by_key(|g| g.position);
        batches.push(batch);
    }
    batches
}

struct SyntheticDraws<'a> {
    by_id: HashMap<&'a str, &'a SampleRecord>,
    views: BTreeMap<&'a str, Vec<&'a str>>,
    pools: BTreeMap<String, VecDeque<String>>,
    refill_rngs: BTreeMap<&'a str, ChaCha8Rng>,
    accept_rng: ChaCha8Rng,
    seed: u64,
    epoch: u32,
}

impl<'a> SyntheticDraws<'a> {
    fn refill(&mut self, identity: &'a str) {
        let (seed, epoch) = (self.seed, self.epoch);
        let rng = self
            .refill_rngs
            .entry(identity)
            .or_insert_with(|| stream(seed, &["refill".into(), epoch.into(), identity.into()]));
        let mut ids = self.views[identity].clone();
        ids.shuffle(rng);
        self.pools
            .entry(identity.to_owned())
            .or_default()
            .extend(ids.into_iter().map(str::to_owned));
    }

    fn shift(&self, id: &str) -> f64 {
        self.by_id[id].delta_theta
    }

    fn draw(&mut self, identity: &'a str, curriculum: &CurriculumConfig) -> Result<String, BatchError> {
        let mut rejections = 0;
        loop {
            if self.pools.get(identity).is_none_or(VecDeque::is_empty) {
                self.refill(identity);
            }
            let candidate = self.pools.get_mut(identity).and_then(VecDeque::pop_front).expect("refilled");
            let dt = self.shift(&candidate);
            if accept_sample(&mut self.accept_rng, dt, self.epoch, curriculum)? {
                return Ok(candidate);
            }
            rejections += 1;
            let pool = self.pools.get_mut(identity).expect("pool exists");
            pool.push_back(candidate);
            if rejections >= MAX_REJECTIONS {
                let mut best = 0;
                for i in 1..pool.len() {
                    if self.by_id[pool[i].as_str()].delta_theta.abs()
                        < self.by_id[pool[best].as_str()].delta_theta.abs()
                    {
                        best = i;
                    }
                }
                return Ok(pool.remove(best).expect("index in range"));
            }
        }
    }
}

/// Plan one epoch and return it with the pool state for the next epoch.
///
/// The result depends only on the manifest contents (not their order), the
/// configs, the epoch and the incoming state.
pub fn build_epoch_plan(
    manifest: &DatasetManifest,
    sampler: &SamplerConfig,
    curriculum: &CurriculumConfig,
    epoch: u32,
    state: &SyntheticPoolState,
) -> Result<(EpochPlan, SyntheticPoolState), BatchError> {
    sampler.validate()?;
    curriculum.validate()?;
    state.validate(manifest)?;
    let seed = sampler.seed;

    let mut reals: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut views: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut by_id = HashMap::new();
    for r in manifest.records() {
        by_id.insert(r.record_id(), r);
        let bucket = if r.is_real() { &mut reals } else { &mut views };
        bucket.entry(r.identity.as_str()).or_default().push(r.record_id());
    }
    if reals.is_empty() {
        return Err(BatchError::NoRealRecords);
    }
    for ids in reals.values_mut().chain(views.values_mut()) {
        ids.sort_unstable();
    }

    let k_real = sampler.real_per_identity;
    let mut identity_rngs: BTreeMap<&str, ChaCha8Rng> = BTreeMap::new();
    let mut groups = Vec::new();
    for (&identity, recs) in &reals {
        let rng = identity_rngs
            .entry(identity)
            .or_insert_with(|| stream(seed, &["real".into(), epoch.into(), identity.into()]));
        let mut order = recs.clone();
        order.shuffle(rng);
        for chunk in order.chunks(k_real) {
            let mut members = chunk.to_vec();
            while members.len() < k_real {
                let unused: Vec<&str> = recs.iter().copied().filter(|r| !members.contains(r)).collect();
                let pick = if unused.is_empty() { recs.choose(rng) } else { unused.choose(rng) };
                members.push(pick.copied().expect("identity has real records"));
            }
            groups.push(Group {
                position: 0,
                identity,
                reals: members,
            });
        }
    }
    groups.shuffle(&mut stream(seed, &["groups".into(), epoch.into()]));
    for (i, g) in groups.iter_mut().enumerate() {
        g.position = i;
    }

    let mut draws = SyntheticDraws {
        by_id,
        views,
        pools: state
            .pools
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().cloned().collect()))
            .collect(),
        refill_rngs: BTreeMap::new(),
        accept_rng: stream(seed, &["accept".into(), epoch.into()]),
        seed,
        epoch,
    };

    let entry = |identity: &str, id: &str, draws: &SyntheticDraws<'_>| {
        let rec = draws.by_id[id];
        PlanEntry {
            identity: identity.to_owned(),
            record: id.to_owned(),
            domain: rec.domain,
            delta_theta: rec.delta_theta,
        }
    };

    let mut batches = Vec::new();
    for (index, packed) in pack(groups, sampler.identities_per_batch).into_iter().enumerate() {
        let mut entries = Vec::with_capacity(packed.len() * sampler.instances_per_identity);
        for g in packed {
            for id in &g.reals {
                entries.push(entry(g.identity, id, &draws));
            }
            for _ in 0..sampler.synthetic_per_identity {
                let id = if draws.views.contains_key(g.identity) {
                    draws.draw(g.identity, curriculum)?
                } else {
                    let rng = identity_rngs.get_mut(g.identity).expect("identity rng");
                    reals[g.identity].choose(rng).expect("non-empty").to_string()
                };
                entries.push(entry(g.identity, &id, &draws));
            }
        }
        batches.push(PlanBatch {
            epoch,
            batch: index,
            entries,
        });
    }

    let next = SyntheticPoolState {
        pools: draws
            .pools
            .into_iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(k, q)| (k, q.into_iter().collect()))
            .collect(),
    };
    Ok((EpochPlan { epoch, batches }, next))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(ids: usize, real: usize, syn: usize) -> DatasetManifest {
        let mut rows = Vec::new();
        for i in 0..ids {
            for j in 0..real {
                rows.push(SampleRecord::real(format!("id{i}"), format!("real/{i}_{j}.png")));
            }
            for j in 0..syn {
                let dt = (j as f64 * 7.0) % 30.0;
                rows.push(SampleRecord::synthetic(format!("id{i}"), format!("syn/{i}_{j}.png"), dt, 0.0));
            }
        }
        DatasetManifest::new(rows, 30.0).unwrap()
    }

    fn small_sampler() -> SamplerConfig {
        SamplerConfig {
            identities_per_batch: 2,
            seed: 7,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        assert_eq!(SamplerConfig::default().real_ratio(), 0.5);
        let bad = SamplerConfig {
            real_per_identity: 0,
            instances_per_identity: 2,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
        let mismatch = SamplerConfig {
            instances_per_identity: 5,
            ..SamplerConfig::default()
        };
        assert!(mismatch.validate().is_err());
    }

    #[test]
    fn pack_spreads_identities() {
        let m = fixture(4, 4, 8);
        let (plan, _) =
            build_epoch_plan(&m, &small_sampler(), &CurriculumConfig::default(), 20, &Default::default()).unwrap();
        assert_eq!(plan.batches.len(), 4);
        for b in &plan.batches {
            let ids: BTreeSet<&str> = b.entries.iter().map(|e| e.identity.as_str()).collect();
            assert_eq!(ids.len(), 2);
            assert_eq!(b.entries.len(), 8);
        }
    }

    #[test]
    fn no_real_records_is_an_error() {
        let m = DatasetManifest::new(vec![SampleRecord::synthetic("a", "s.png", 1.0, 0.0)], 30.0).unwrap();
        let r = build_epoch_plan(&m, &small_sampler(), &CurriculumConfig::default(), 0, &Default::default());
        assert!(matches!(r, Err(BatchError::NoRealRecords)));
    }

    #[test]
    fn inconsistent_state_rejected() {
        let m = fixture(2, 2, 2);
        let mut state = SyntheticPoolState::default();
        state.pools.insert("id0".into(), vec!["real/0_0.png".into()]);
        assert!(state.validate(&m).is_err());
        state.pools.insert("id0".into(), vec!["syn/1_0.png".into()]);
        assert!(state.validate(&m).is_err());
        state.pools.insert("id0".into(), vec!["syn/0_0.png".into(), "syn/0_0.png".into()]);
        assert!(state.validate(&m).is_err());
        state.pools.insert("id0".into(), vec!["nope".into()]);
        assert!(state.validate(&m).is_err());
        state.pools.insert("id0".into(), vec!["syn/0_1.png".into()]);
        assert!(state.validate(&m).is_ok());
    }

    #[test]
    fn state_json_round_trip() {
        let mut state = SyntheticPoolState::default();
        state.pools.insert("b".into(), vec!["x".into(), "y".into()]);
        assert_eq!(SyntheticPoolState::from_json(&state.to_json()).unwrap(), state);
        assert!(SyntheticPoolState::from_json("{\"pools\": 3}").is_err());
    }

    #[test]
    fn plan_jsonl_round_trip() {
        let m = fixture(3, 3, 2);
        let (plan, _) =
            build_epoch_plan(&m, &small_sampler(), &CurriculumConfig::default(), 0, &Default::default()).unwrap();
        let text = plan.to_jsonl();
        assert_eq!(EpochPlan::from_jsonl(&text).unwrap(), plan);
        assert!(text.starts_with("{\"epoch\":0,\"batch\":0,\"entries\":[{\"identity\":"));
    }
}
