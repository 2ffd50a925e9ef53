//! Report payloads, prompt rendering and the chat-completions call that turns
//! them into a prose XAI report.

use std::time::Duration;

use serde_json::{json, Map, Value};

use crate::aggregate::{part_order, CategoryStats};
use crate::error::{Error, LlmError, Result};
use crate::metric::BACKGROUND;

pub const PAYLOAD_PLACEHOLDER: &str = "{payload}";
pub const DEFAULT_DIGITS: u32 = 2;
pub const DEFAULT_TOKEN_ENV: &str = "PQAH_LLM_TOKEN";

const DEFAULT_PROMPT: &str = "\
Act as an AI expert specialized in creating user-friendly reports, and generate a brief report summarizing the main advantages and disadvantages of a network, and offer technical suggestions on how to improve it.  This report will be based on a part-based quantitative analysis of heatmaps (PQAH) data presented in JSON format. The PQAH data specifically pertains to part-based heatmap analysis, with these heatmaps being derived from a Deep Neural Network (DNN).

The provided data is structured as follows:

- Top-level keys in the JSON file represent different categories.
- Sub-level keys within each category represent individual parts.
- For each part in each category, we have access to three key performance metrics: Q1, Median, and Q3 F1 scores.
- 'Bg' represents background

It's important to note that the F1 score for each part is calculated based on a comparison between the heatmap generated by the network and the ground truth part annotation.  High F1 scores indicate a strong overlap between the heatmap and the ground-truth part annotation. Heatmap highlights the regions of an input image responsible for a network's classification result.

Now, based on the PQAH data provided in the following chat, proceed to analyze the main pros and cons of the network and provide technical suggestions with references (high-rank conferences and journal papers) to improve the network.

{payload}
";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Category → part → quartiles, in emission order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportPayload {
    pub categories: Vec<(String, Vec<(String, Quartiles)>)>,
}

impl ReportPayload {
    pub fn to_value(&self) -> Value {
        let mut root = Map::new();
        for (cat, parts) in &self.categories {
            let mut m = Map::new();
            for (part, q) in parts {
                m.insert(
                    part.clone(),
                    json!({ "Q1": q.q1, "Median": q.median, "Q3": q.q3 }),
                );
            }
            root.insert(cat.clone(), Value::Object(m));
        }
        Value::Object(root)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("payload serialize")
    }
}

/// Rounds half-to-even at `digits` decimals, clamped to `[0, 1]`.
pub fn round_leaf(v: f64, digits: u32) -> f64 {
    let scale = 10f64.powi(digits as i32);
    ((v * scale).round_ties_even() / scale).clamp(0.0, 1.0)
}

/// Builds the payload. Categories are alphabetical; parts follow `part_hint`
/// (e.g. manifest label order) when given, then any remaining parts
/// alphabetically, with `Bg` always last.
pub fn build_report_payload(
    stats: &CategoryStats,
    digits: u32,
    part_hint: Option<&[String]>,
) -> Result<ReportPayload> {
    if stats.is_empty() {
        return Err(Error::EmptyInput("nothing to report"));
    }
    let hint_rank = |part: &str| {
        part_hint
            .and_then(|h| h.iter().position(|p| p == part))
            .unwrap_or(usize::MAX)
    };
    let mut categories: Vec<&str> = stats.groups.iter().map(|g| g.category.as_str()).collect();
    categories.sort_unstable();
    categories.dedup();
    let categories = categories
        .into_iter()
        .map(|cat| {
            let mut groups: Vec<_> = stats.category(cat).collect();
            groups.sort_by(|a, b| {
                let bg = (a.part == BACKGROUND).cmp(&(b.part == BACKGROUND));
                bg.then_with(|| hint_rank(&a.part).cmp(&hint_rank(&b.part)))
                    .then_with(|| part_order(&a.part, &b.part))
            });
            let parts = groups
                .into_iter()
                .map(|g| {
                    (
                        g.part.clone(),
                        Quartiles {
                            q1: round_leaf(g.q1, digits),
                            median: round_leaf(g.q2, digits),
                            q3: round_leaf(g.q3, digits),
                        },
                    )
                })
                .collect();
            (cat.to_owned(), parts)
        })
        .collect();
    Ok(ReportPayload { categories })
}

/// Prompt text containing [`PAYLOAD_PLACEHOLDER`] exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate(String);

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let count = text.matches(PAYLOAD_PLACEHOLDER).count();
        if count != 1 {
            return Err(Error::Template {
                placeholder: PAYLOAD_PLACEHOLDER,
                count,
            });
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self(DEFAULT_PROMPT.to_owned())
    }
}

pub fn build_prompt(payload: &ReportPayload, template: &PromptTemplate) -> String {
    template
        .0
        .replacen(PAYLOAD_PLACEHOLDER, &payload.to_json_pretty(), 1)
}

/// Where and how to request the report.
#[derive(Debug, Clone)]
pub struct LlmConfig {
    /// Full URL of a chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    pub timeout: Duration,
}

impl LlmConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            token_env: DEFAULT_TOKEN_ENV.to_owned(),
            timeout: Duration::from_secs(120),
        }
    }
}

const EXCERPT_CHARS: usize = 200;

/// Sends `prompt` as a single user message and returns the assistant text.
/// Makes exactly one attempt.
pub fn request_report(prompt: &str, config: &LlmConfig) -> std::result::Result<String, LlmError> {
    let token = match std::env::var(&config.token_env) {
        Ok(t) if !t.is_empty() => t,
        _ => {
            return Err(LlmError::Config(format!(
                "environment variable {} is not set",
                config.token_env
            )))
        }
    };
    if config.endpoint.is_empty() {
        return Err(LlmError::Config("no endpoint configured".into()));
    }
    let body = json!({
        "model": config.model,
        "messages": [{ "role": "user", "content": prompt }],
    })
    .to_string();

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(config.timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut response = agent
        .post(&config.endpoint)
        .header("Authorization", &format!("Bearer {token}"))
        .content_type("application/json")
        .send(body)
        .map_err(transport_error)?;

    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(transport_error)?;
    if !(200..300).contains(&status) {
        return Err(LlmError::Transport {
            status,
            body: text.chars().take(EXCERPT_CHARS).collect(),
        });
    }
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| LlmError::Protocol(format!("response is not JSON: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| LlmError::Protocol("missing choices[0].message.content".into()))
}

fn transport_error(e: ureq::Error) -> LlmError {
    match e {
        ureq::Error::Timeout(_) => LlmError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => LlmError::Timeout,
        other => LlmError::Network(other.to_string()),
    }
}
