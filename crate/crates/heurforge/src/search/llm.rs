//! HTTP-backed generator speaking the common chat-completions JSON shape.
//! Endpoint, model, and key come from the environment; the prompt is a
//! plain-text template with named placeholders. Replies are mined for their
//! first fenced code block; transport failures retry with exponential
//! backoff before surfacing as a generator-unavailable error.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::dsl::check::{kernel_scalars, CACHE_SCALARS, CACHE_SERIES};
use crate::dsl::{Diagnostic, Mode};

use super::{Generator, GeneratorError};

pub const ENV_URL: &str = "HEURFORGE_LLM_URL";
pub const ENV_MODEL: &str = "HEURFORGE_LLM_MODEL";
pub const ENV_KEY: &str = "HEURFORGE_LLM_KEY";
/// Optional: path to a custom prompt template file.
pub const ENV_PROMPT: &str = "HEURFORGE_LLM_PROMPT";

pub const DEFAULT_PROMPT_TEMPLATE: &str = "\
You write scoring heuristics in a tiny expression language.

Interface:
{interface_description}

Write one function body for this signature:
{signature}

The language allows: let bindings, assignments (=, +=, -=), if/else,
arithmetic (+ - * / %), comparisons, && || !, ternary cond ? a : b, and the
calls min(a,b), max(a,b), abs(a). End with `return <expr>;`.

High-scoring examples so far (score in comment):
{exemplars}

{feedback}
Reply with exactly one fenced code block containing only the program.
";

#[derive(Debug, Clone)]
pub struct LlmConfig {
    /// Full completions URL, e.g. https://host/v1/chat/completions
    pub url: String,
    pub model: String,
    pub api_key: String,
    pub prompt_template: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub timeout_s: u64,
}

/// Read endpoint configuration from the environment. Errors name the first
/// missing variable so misconfiguration is caught before any round starts.
pub fn llm_config_from_env() -> Result<LlmConfig, String> {
    let get = |k: &str| std::env::var(k).map_err(|_| format!("missing environment variable {k}"));
    let prompt_template = match std::env::var(ENV_PROMPT) {
        Ok(path) => std::fs::read_to_string(&path)
            .map_err(|e| format!("cannot read prompt template {path}: {e}"))?,
        Err(_) => DEFAULT_PROMPT_TEMPLATE.to_string(),
    };
    Ok(LlmConfig {
        url: get(ENV_URL)?,
        model: get(ENV_MODEL)?,
        api_key: get(ENV_KEY)?,
        prompt_template,
        max_retries: 3,
        initial_backoff_ms: 250,
        timeout_s: 60,
    })
}

pub struct LlmGenerator {
    config: LlmConfig,
    mode: Mode,
    client: reqwest::blocking::Client,
    // (input, output) tokens accumulated since the last take_usage call
    pending_usage: (u64, u64),
}

impl LlmGenerator {
    pub fn new(config: LlmConfig, mode: Mode) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .expect("client builds");
        LlmGenerator {
            config,
            mode,
            client,
            pending_usage: (0, 0),
        }
    }

    fn interface_description(&self) -> String {
        match self.mode {
            Mode::Cache => format!(
                "Scalars: {}. Series (via percentile(series, p) with a literal \
                 p in [0,1]): {}. History of recent evictions: \
                 history_contains(obj_id), history_count(obj_id), \
                 history_age_at_eviction(obj_id). Arithmetic is real-valued; \
                 division by zero yields 0. Lower score = evicted sooner.",
                CACHE_SCALARS.join(", "),
                CACHE_SERIES.join(", ")
            ),
            Mode::Kernel => format!(
                "Scalars: {}. Integer arithmetic only: no fractional literals, \
                 and every division needs a provably nonzero divisor \
                 (a nonzero literal, max(1, x), or an enclosing x != 0 guard). \
                 Return the new congestion window in bytes.",
                kernel_scalars().join(", ")
            ),
        }
    }

    fn signature(&self) -> &'static str {
        match self.mode {
            Mode::Cache => "priority(now, obj_id, obj_info, counts, ages, sizes, history) -> score",
            Mode::Kernel => "cong_control(flow state, ack info, history arrays) -> cwnd_bytes",
        }
    }

    fn render_prompt(&self, exemplars: &[(String, f64)], feedback: &str) -> String {
        let ex_text = exemplars
            .iter()
            .map(|(src, fit)| format!("// fitness {fit:.4}\n{src}"))
            .collect::<Vec<_>>()
            .join("\n\n");
        self.config
            .prompt_template
            .replace("{interface_description}", &self.interface_description())
            .replace("{signature}", self.signature())
            .replace("{exemplars}", &ex_text)
            .replace("{feedback}", feedback)
    }

    fn complete(&mut self, prompt: &str) -> Result<String, GeneratorError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut last_err = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let backoff = self.config.initial_backoff_ms << (attempt - 1);
                std::thread::sleep(Duration::from_millis(backoff));
            }
            let resp = self
                .client
                .post(&self.config.url)
                .bearer_auth(&self.config.api_key)
                .json(&body)
                .send();
            match resp {
                Ok(r) if r.status().is_success() => {
                    let parsed: ChatResponse = r
                        .json()
                        .map_err(|e| GeneratorError::Unavailable(format!("bad response: {e}")))?;
                    if let Some(u) = parsed.usage {
                        self.pending_usage.0 += u.prompt_tokens;
                        self.pending_usage.1 += u.completion_tokens;
                    }
                    let content = parsed
                        .choices
                        .into_iter()
                        .next()
                        .map(|c| c.message.content)
                        .unwrap_or_default();
                    return Ok(content);
                }
                Ok(r) => last_err = format!("http status {}", r.status()),
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(GeneratorError::Unavailable(format!(
            "{} after {} retries: {last_err}",
            self.config.url, self.config.max_retries
        )))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// First fenced code block, tolerating a language tag after the opening
/// fence. Without any fence the whole reply is returned trimmed, so that
/// the checker produces a useful diagnostic for the repair loop.
pub fn extract_code_block(reply: &str) -> String {
    if let Some(start) = reply.find("```") {
        let after_fence = &reply[start + 3..];
        let body_start = after_fence.find('\n').map(|i| i + 1).unwrap_or(0);
        let body = &after_fence[body_start..];
        if let Some(end) = body.find("```") {
            return body[..end].trim().to_string();
        }
        return body.trim().to_string();
    }
    reply.trim().to_string()
}

impl Generator for LlmGenerator {
    fn label(&self) -> &str {
        "llm"
    }

    fn generate(
        &mut self,
        exemplars: &[(String, f64)],
        k: usize,
        _round: u32,
    ) -> Result<Vec<String>, GeneratorError> {
        let prompt = self.render_prompt(exemplars, "");
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            let reply = self.complete(&prompt)?;
            out.push(extract_code_block(&reply));
        }
        Ok(out)
    }

    fn repair(
        &mut self,
        source: &str,
        diagnostics: &[Diagnostic],
        exemplars: &[(String, f64)],
        _attempt_seed: u64,
    ) -> Result<String, GeneratorError> {
        let diag_text = diagnostics
            .iter()
            .map(|d| format!("- {d}"))
            .collect::<Vec<_>>()
            .join("\n");
        let feedback = format!(
            "Your previous attempt was rejected. Program:\n{source}\nDiagnostics:\n{diag_text}\nFix these problems.\n"
        );
        let prompt = self.render_prompt(exemplars, &feedback);
        let reply = self.complete(&prompt)?;
        Ok(extract_code_block(&reply))
    }

    fn take_usage(&mut self) -> Option<(u64, u64)> {
        let u = self.pending_usage;
        self.pending_usage = (0, 0);
        Some(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// One-shot HTTP stub: serves canned JSON bodies in order, then closes.
    fn stub_server(responses: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut sock, _) = match listener.accept() {
                    Ok(s) => s,
                    Err(_) => return,
                };
                let mut buf = [0u8; 65536];
                let mut req = Vec::new();
                loop {
                    let n = sock.read(&mut buf).unwrap_or(0);
                    if n == 0 {
                        break;
                    }
                    req.extend_from_slice(&buf[..n]);
                    let text = String::from_utf8_lossy(&req);
                    if let Some(head_end) = text.find("\r\n\r\n") {
                        let cl = text
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap_or(0)))
                            .unwrap_or(0);
                        if req.len() >= head_end + 4 + cl {
                            break;
                        }
                    }
                }
                let reason = if status == 200 { "OK" } else { "Server Error" };
                let resp = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = sock.write_all(resp.as_bytes());
            }
        });
        format!("http://{addr}/v1/chat/completions")
    }

    fn chat_body(content: &str, in_tok: u64, out_tok: u64) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": in_tok, "completion_tokens": out_tok}
        })
        .to_string()
    }

    fn config(url: String) -> LlmConfig {
        LlmConfig {
            url,
            model: "test-model".to_string(),
            api_key: "test-key".to_string(),
            prompt_template: DEFAULT_PROMPT_TEMPLATE.to_string(),
            max_retries: 2,
            initial_backoff_ms: 1,
            timeout_s: 5,
        }
    }

    #[test]
    fn extracts_fenced_blocks() {
        assert_eq!(extract_code_block("```\nreturn count;\n```"), "return count;");
        assert_eq!(
            extract_code_block("Here:\n```c\nreturn count;\n```\nbye"),
            "return count;"
        );
        assert_eq!(extract_code_block("no fence here"), "no fence here");
    }

    #[test]
    fn fixed_reply_yields_k_candidates_and_usage() {
        let reply = chat_body("```\nreturn count;\n```", 100, 10);
        let url = stub_server(vec![(200, reply.clone()), (200, reply.clone()), (200, reply)]);
        let mut g = LlmGenerator::new(config(url), Mode::Cache);
        let out = g
            .generate(&[("return count;".to_string(), 0.7)], 3, 1)
            .unwrap();
        assert_eq!(out, vec!["return count;"; 3]);
        assert_eq!(g.take_usage(), Some((300, 30)));
        assert_eq!(g.take_usage(), Some((0, 0)));
    }

    #[test]
    fn retries_after_server_error() {
        let url = stub_server(vec![
            (500, "{}".to_string()),
            (200, chat_body("```\nreturn count;\n```", 1, 1)),
        ]);
        let mut g = LlmGenerator::new(config(url), Mode::Cache);
        let out = g.generate(&[("return count;".to_string(), 0.7)], 1, 1).unwrap();
        assert_eq!(out, vec!["return count;"]);
    }

    #[test]
    fn exhausted_retries_surface_unavailable() {
        let url = stub_server(vec![
            (500, "{}".to_string()),
            (500, "{}".to_string()),
            (500, "{}".to_string()),
        ]);
        let mut g = LlmGenerator::new(config(url), Mode::Cache);
        let err = g
            .generate(&[("return count;".to_string(), 0.7)], 1, 1)
            .unwrap_err();
        assert!(matches!(err, GeneratorError::Unavailable(_)));
    }

    #[test]
    fn prompt_contains_interface_and_exemplars() {
        let url = stub_server(vec![]);
        let g = LlmGenerator::new(config(url), Mode::Cache);
        let prompt = g.render_prompt(&[("return count;".to_string(), 0.75)], "");
        assert!(prompt.contains("last_access_time"));
        assert!(prompt.contains("percentile"));
        assert!(prompt.contains("// fitness 0.7500"));
        assert!(!prompt.contains("{interface_description}"));
        assert!(!prompt.contains("{exemplars}"));
    }
}
