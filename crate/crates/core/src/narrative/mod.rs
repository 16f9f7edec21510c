//! Narratives (LLM-written, cause-and-effect) and descriptions (templated,
//! fact-listing) for a single explained prediction.

mod format;
mod prompt;
mod provider;

use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use format::{fmt_num, numeric_token_set, numeric_tokens, SIGNIFICANT_DIGITS};
pub use prompt::{
    build_prompt, template_hash, NodeFeatures, Prediction, PromptBundle, PROMPT_TEMPLATE, PROMPT_TEMPLATE_VERSION,
    SYSTEM_MESSAGE,
};
pub use provider::{
    ChatMessage, ChatRequest, ChatTransport, Completion, HttpProvider, HttpResponse, MockProvider, Provider,
    ProviderConfig, ReqwestTransport, DEFAULT_API_KEY_ENV, MOCK_MODEL_NAME,
};

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NarrativeKind {
    Narrative,
    Description,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub total_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrativeResult {
    pub text: String,
    pub kind: NarrativeKind,
    pub provider: String,
    pub model_name: String,
    /// SHA-256 of the exact prompt bytes sent; for descriptions, of the
    /// rendered text.
    pub prompt_hash: String,
    /// SHA-256 of the prompt template (narratives only).
    pub template_hash: Option<String>,
    pub template_version: Option<String>,
    /// RFC 3339, UTC.
    pub created_at: String,
    pub token_usage: Option<TokenUsage>,
    pub retry_count: u32,
}

impl NarrativeResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("narrative result", e))
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Send `prompt` as the user message of one chat-completion request.
pub fn generate_narrative(prompt: &str, provider: &dyn Provider, temperature: f64) -> Result<NarrativeResult> {
    let request = ChatRequest::new(provider.model_name(), SYSTEM_MESSAGE, prompt, temperature);
    let completion = provider.complete(&request)?;
    if completion.text.trim().is_empty() {
        return Err(Error::Provider("empty completion".into()));
    }
    Ok(NarrativeResult {
        text: completion.text,
        kind: NarrativeKind::Narrative,
        provider: provider.name().to_string(),
        model_name: provider.model_name().to_string(),
        prompt_hash: sha256_hex(prompt.as_bytes()),
        template_hash: Some(template_hash()),
        template_version: Some(PROMPT_TEMPLATE_VERSION.to_string()),
        created_at: now(),
        token_usage: completion.usage,
        retry_count: completion.retry_count,
    })
}

/// Words and phrases that frame one fact as the cause of another.
/// Descriptions must never contain them; the prompt asks for them.
pub const CAUSAL_CONNECTIVES: &[&str] = &[
    "because",
    "cause",
    "caused",
    "causes",
    "cause-and-effect",
    "consequently",
    "due to",
    "hence",
    "lead to",
    "leading to",
    "leads to",
    "led to",
    "as a result",
    "results in",
    "resulting in",
    "since",
    "so that",
    "therefore",
    "thus",
    "drives",
    "driven by",
];

static CAUSAL: LazyLock<Regex> = LazyLock::new(|| {
    let alts: Vec<String> = CAUSAL_CONNECTIVES
        .iter()
        .map(|w| regex::escape(w).replace(' ', r"\s+"))
        .collect();
    Regex::new(&format!(r"(?i)\b(?:{})\b", alts.join("|"))).expect("static regex")
});

/// Denylisted connectives found in `text`, lowercased, in order.
pub fn causal_connectives(text: &str) -> Vec<String> {
    CAUSAL.find_iter(text).map(|m| m.as_str().to_lowercase()).collect()
}

/// Deterministic fact list: a prediction sentence, the top features with
/// values and importances, and the view's connections with weights
/// (omitted when the view holds no edges).
pub fn generate_description(bundle: &PromptBundle) -> NarrativeResult {
    let text = description_text(bundle);
    NarrativeResult {
        prompt_hash: sha256_hex(text.as_bytes()),
        text,
        kind: NarrativeKind::Description,
        provider: "template".into(),
        model_name: "description_v1".into(),
        template_hash: None,
        template_version: None,
        created_at: now(),
        token_usage: None,
        retry_count: 0,
    }
}

pub fn description_text(bundle: &PromptBundle) -> String {
    let mut out = format!(
        "Node {} is predicted as {} with probability {}.\n",
        bundle.target_id,
        bundle.prediction.label,
        fmt_num(bundle.prediction.probability)
    );
    if !bundle.feature_importances.is_empty() {
        out.push_str("\nTop features:\n");
        for (i, (name, imp)) in bundle.feature_importances.iter().enumerate() {
            let value = bundle.target_features.iter().find(|(n, _)| n == name).map(|(_, v)| *v);
            let _ = match value {
                Some(v) => writeln!(
                    out,
                    "{}. {name}: value {}, importance {}",
                    i + 1,
                    fmt_num(v),
                    fmt_num(*imp)
                ),
                None => writeln!(out, "{}. {name}: importance {}", i + 1, fmt_num(*imp)),
            };
        }
    }
    let edges = bundle.weighted_edges();
    if !edges.is_empty() {
        out.push_str("\nTop connections:\n");
        for (i, (u, v, w)) in edges.iter().enumerate() {
            let _ = writeln!(out, "{}. {u} - {v}: weight {}", i + 1, fmt_num(*w));
        }
    }
    out
}

/// Heuristic structure checks on a narrative. A report, not a gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub paragraphs: usize,
    pub mentions_target: bool,
    pub mentions_feature: bool,
    pub mentions_neighbor: bool,
    /// Numbers in the text that the prompt does not contain verbatim.
    pub unsupported_numbers: Vec<String>,
}

impl StructureReport {
    pub fn enough_paragraphs(&self) -> bool {
        self.paragraphs >= 2
    }

    pub fn passed(&self) -> bool {
        self.enough_paragraphs()
            && self.mentions_target
            && self.mentions_feature
            && self.mentions_neighbor
            && self.unsupported_numbers.is_empty()
    }
}

fn mentions(text: &str, word: &str) -> bool {
    Regex::new(&format!(r"(?:^|[^\w]){}(?:[^\w]|$)", regex::escape(word))).is_ok_and(|r| r.is_match(text))
}

pub fn validate_narrative_structure(text: &str, bundle: &PromptBundle, prompt: &str) -> StructureReport {
    let paragraphs = text.split("\n\n").filter(|p| !p.trim().is_empty()).count();
    let allowed = numeric_token_set(prompt);
    let mut unsupported: Vec<String> = Vec::new();
    for t in numeric_tokens(text) {
        if !allowed.contains(t) && !unsupported.iter().any(|u| u == t) {
            unsupported.push(t.to_string());
        }
    }
    StructureReport {
        paragraphs,
        mentions_target: mentions(text, &bundle.target_id),
        mentions_feature: bundle.feature_importances.iter().any(|(n, _)| mentions(text, n)),
        mentions_neighbor: bundle.neighbor_ids().iter().any(|id| mentions(text, id)),
        unsupported_numbers: unsupported,
    }
}
