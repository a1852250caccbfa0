use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendFailure, CompletionBackend, CompletionRequest, GatewayError};
use crate::profile::QuestionBank;
use crate::survey::CategoricalDistribution;

/// Configured answer distribution per question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubSpec {
    pub per_question: BTreeMap<String, CategoricalDistribution>,
    pub seed: u64,
}

impl StubSpec {
    /// Each distribution must be valid and supported on its question's scale.
    pub fn validate(&self, bank: &QuestionBank) -> Result<(), GatewayError> {
        for (qid, dist) in &self.per_question {
            let question = bank
                .get(qid)
                .ok_or_else(|| GatewayError::InvalidStub(format!("unknown question `{qid}`")))?;
            dist.validate()
                .map_err(|e| GatewayError::InvalidStub(format!("`{qid}`: {e}")))?;
            if let Some(c) = dist.mass.keys().find(|c| !question.scale.contains(c)) {
                return Err(GatewayError::InvalidStub(format!(
                    "`{qid}` emits `{c}`, which is not on its scale"
                )));
            }
        }
        Ok(())
    }
}

/// Offline backend replaying configured distributions.
///
/// Each request draws from a generator seeded by (spec seed, prompt
/// fingerprint, bundle ordinal), so answers do not depend on arrival order
/// and concurrent use stays deterministic.
pub struct StubBackend {
    spec: StubSpec,
    samplers: BTreeMap<String, WeightedIndex<f64>>,
}

impl StubBackend {
    pub fn new(spec: StubSpec) -> Result<Self, GatewayError> {
        let samplers = spec
            .per_question
            .iter()
            .map(|(qid, d)| {
                d.validate()
                    .map_err(|e| GatewayError::InvalidStub(format!("`{qid}`: {e}")))?;
                WeightedIndex::new(d.mass.values().copied())
                    .map(|w| (qid.clone(), w))
                    .map_err(|e| GatewayError::InvalidStub(format!("`{qid}`: {e}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { spec, samplers })
    }

    pub fn spec(&self) -> &StubSpec {
        &self.spec
    }

    fn rng_for(&self, request: &CompletionRequest) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.spec.seed.to_le_bytes());
        h.update(request.bundle.rendered.as_bytes());
        h.update(request.bundle.provenance.ordinal.to_le_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }
}

impl CompletionBackend for StubBackend {
    fn backend_id(&self) -> &str {
        "stub"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendFailure> {
        let qid = &request.bundle.question.id;
        let (dist, sampler) = self
            .spec
            .per_question
            .get(qid)
            .zip(self.samplers.get(qid))
            .ok_or_else(|| BackendFailure::Rejected(format!("stub has no distribution for `{qid}`")))?;
        let idx = sampler.sample(&mut self.rng_for(request));
        let (label, _) = dist.mass.get_index(idx).expect("sampler index in range");
        Ok(label.clone())
    }
}
