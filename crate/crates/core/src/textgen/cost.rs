use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::GenerationRequest;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("no price for model `{0}`")]
    UnknownModel(String),
    #[error("cannot read pricing table {}: {message}", path.display())]
    Load { path: std::path::PathBuf, message: String },
}

/// Prices in currency units per 1000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrice {
    pub prompt_per_1k: f64,
    pub completion_per_1k: f64,
}

/// Per-model pricing, loaded from TOML or JSON:
///
/// ```toml
/// [models."gpt-3.5-turbo-instruct"]
/// prompt_per_1k = 0.0015
/// completion_per_1k = 0.002
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pricing {
    pub models: BTreeMap<String, ModelPrice>,
}

impl Pricing {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CostError> {
        let path = path.as_ref();
        let load_err = |message: String| CostError::Load { path: path.to_owned(), message };
        let raw = std::fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&raw).map_err(|e| load_err(e.to_string()))
        } else {
            toml::from_str(&raw).map_err(|e| load_err(e.to_string()))
        }
    }

    pub fn price(&self, model: &str) -> Result<ModelPrice, CostError> {
        self.models.get(model).copied().ok_or_else(|| CostError::UnknownModel(model.to_owned()))
    }
}

/// Approximate token count: words (alphanumeric runs) plus individual
/// punctuation marks, times 1.3, rounded up. Only meant for cost estimates.
pub fn approx_token_count(text: &str) -> u64 {
    let mut pieces = 0u64;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_alphanumeric() {
            if !in_word {
                pieces += 1;
                in_word = true;
            }
        } else {
            in_word = false;
            if !c.is_whitespace() {
                pieces += 1;
            }
        }
    }
    (pieces * 13).div_ceil(10)
}

/// `prompt_tokens / 1000 * p_in + max_completion_tokens / 1000 * p_out`.
pub fn cost_upper_bound(prompt_tokens: u64, max_completion_tokens: u64, price: ModelPrice) -> f64 {
    prompt_tokens as f64 / 1000.0 * price.prompt_per_1k
        + max_completion_tokens as f64 / 1000.0 * price.completion_per_1k
}

/// Upper bound on the cost of `request`, assuming the completion uses all
/// of `max_tokens`.
pub fn estimate_cost(request: &GenerationRequest, pricing: &Pricing) -> Result<f64, CostError> {
    let price = pricing.price(&request.decoding.model_name)?;
    let prompt_tokens = approx_token_count(&request.prompt_text());
    Ok(cost_upper_bound(prompt_tokens, u64::from(request.decoding.max_tokens), price))
}
