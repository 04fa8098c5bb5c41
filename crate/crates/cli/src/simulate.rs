//! A deterministic stand-in for a chat-completion provider, used to record
//! the demo replay cache and test fixtures.
//!
//! Classification answers follow the ground truth with a per-strategy
//! accuracy; a small share of answers drift from the schema or are
//! unparseable. Score answers are derived from the verdict table in the
//! prompt. Every answer depends only on the seed and the prompt, never on
//! request order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use trustlens_core::corpus::{AdherenceLabel, GroundTruthMatrix};
use trustlens_core::gateway::{HttpRequest, HttpResponse, ModelProfile, ProviderKind, Transport, TransportError};
use trustlens_core::practices::PracticeId;
use trustlens_core::prompting::{extract_fenced_blocks, sha256_hex, PromptStrategy, FENCE};

pub const SIM_ENDPOINT: &str = "http://simulated.invalid/v1/chat/completions";
pub const SIM_CREDENTIAL_VAR: &str = "TRUSTLENS_SIMULATED_KEY";

/// Online profile that routes to the simulator under the given model id.
pub fn simulated_profile(model_id: &str) -> ModelProfile {
    ModelProfile {
        provider_kind: ProviderKind::OpenaiCompatible,
        endpoint_url: Some(SIM_ENDPOINT.into()),
        credential_env_var: Some(SIM_CREDENTIAL_VAR.into()),
        ..ModelProfile::replay(model_id)
    }
}

pub struct SimulatedProvider {
    seed: u64,
    truth: BTreeMap<(String, PracticeId), AdherenceLabel>,
}

fn accuracy(strategy: PromptStrategy) -> f64 {
    match strategy {
        PromptStrategy::Baseline => 0.74,
        PromptStrategy::CweAndBadExamples => 0.80,
        PromptStrategy::CallContext => 0.77,
        PromptStrategy::RuleBased => 0.88,
        PromptStrategy::ScoreEstimation => 0.0,
    }
}

impl SimulatedProvider {
    pub fn new(seed: u64, truth: &GroundTruthMatrix) -> Self {
        SimulatedProvider {
            seed,
            truth: truth.entries().clone(),
        }
    }

    fn rng(&self, prompt: &str) -> ChaCha8Rng {
        let digest = sha256_hex(&format!("{}\0{}", self.seed, prompt));
        let seed = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn answer(&self, prompt: &str) -> String {
        let mut rng = self.rng(prompt);
        let function_id = extract_fenced_blocks(prompt)
            .into_iter()
            .next()
            .map(|(label, _)| label)
            .unwrap_or_default();
        match practice_of(prompt) {
            Some(p) => self.classify(&mut rng, strategy_of(prompt), &function_id, p),
            None => estimate(&mut rng, prompt),
        }
    }

    fn classify(&self, rng: &mut ChaCha8Rng, strategy: PromptStrategy, function_id: &str, practice: PracticeId) -> String {
        let Some(&truth) = self.truth.get(&(function_id.to_string(), practice)) else {
            return "I cannot see the function you are referring to.".into();
        };
        let label = if rng.gen_bool(accuracy(strategy)) {
            truth
        } else {
            let others: Vec<AdherenceLabel> = AdherenceLabel::ALL.into_iter().filter(|l| *l != truth).collect();
            others[rng.gen_range(0..others.len())]
        };
        let style: f64 = rng.gen();
        let (applicable, adherence) = match label {
            AdherenceLabel::NotApplicable => ("No", None),
            AdherenceLabel::Followed => ("Yes", Some("Yes")),
            AdherenceLabel::NotFollowed => ("Yes", Some("No")),
        };
        if style < 0.04 {
            return "The snippet alone does not give me enough context to judge this practice.".into();
        }
        if style < 0.12 {
            let mut s = format!("**Applicability:** {} - the handler receives request data.\n", applicable.to_lowercase());
            if let Some(a) = adherence {
                s.push_str(&format!("**Adherence:** {}", a.to_lowercase()));
            }
            return s;
        }
        match adherence {
            Some(a) => format!("Applicability: {applicable}\nAdherence: {a}"),
            None => format!("Applicability: {applicable}"),
        }
    }
}

/// Section headings outside fenced source blocks identify the strategy.
fn strategy_of(prompt: &str) -> PromptStrategy {
    let mut fenced = false;
    let mut strategy = PromptStrategy::Baseline;
    for line in prompt.lines() {
        if line.starts_with(FENCE) && !line.starts_with(&FENCE.repeat(2)) {
            fenced = line != FENCE;
            continue;
        }
        if fenced {
            continue;
        }
        match line {
            "RELATED WEAKNESSES" => strategy = PromptStrategy::CweAndBadExamples,
            "CALLED FUNCTIONS" => strategy = PromptStrategy::CallContext,
            "INSTRUCTIONS" => strategy = PromptStrategy::RuleBased,
            "PER-PRACTICE ASSESSMENT" => strategy = PromptStrategy::ScoreEstimation,
            _ => {}
        }
    }
    strategy
}

fn practice_of(prompt: &str) -> Option<PracticeId> {
    let line = prompt.lines().find(|l| l.starts_with("PRACTICE "))?;
    line["PRACTICE ".len()..].split(':').next()?.trim().parse().ok()
}

fn estimate(rng: &mut ChaCha8Rng, prompt: &str) -> String {
    let mut followed = 0usize;
    let mut applicable = 0usize;
    for line in prompt.lines().filter(|l| l.starts_with("Practice ")) {
        match line.rsplit(": ").next() {
            Some("Followed") => {
                followed += 1;
                applicable += 1;
            }
            Some("NotFollowed") => applicable += 1,
            _ => {}
        }
    }
    let share = if applicable == 0 { 1.0 } else { followed as f64 / applicable as f64 };
    let noise: f64 = rng.gen_range(-0.1..0.1);
    let score = ((0.55 + 0.2 * share + noise).clamp(0.0, 1.0) * 100.0).round() / 100.0;
    if rng.gen_bool(0.1) {
        format!("Most applicable practices are handled, with some gaps. Overall I would put it at {score:.2}.")
    } else {
        format!("SCORE: {score:.2}\nJUSTIFICATION: Weighed the followed practices against the violated ones.")
    }
}

impl Transport for SimulatedProvider {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let body: serde_json::Value =
            serde_json::from_str(&request.body).map_err(|e| TransportError(e.to_string()))?;
        let prompt = body["messages"][0]["content"].as_str().unwrap_or_default();
        let reply = json!({
            "model": body["model"],
            "choices": [{"index": 0, "message": {"role": "assistant", "content": self.answer(prompt)}, "finish_reason": "stop"}],
        });
        Ok(HttpResponse { status: 200, body: reply.to_string() })
    }
}
