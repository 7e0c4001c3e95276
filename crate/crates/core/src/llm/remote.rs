// SPDX-License-Identifier: Apache-2.0

//! Clients for OpenAI-compatible chat-completion and embedding endpoints.
//!
//! Configuration comes from the environment: `RTLOPT_LLM_URL`,
//! `RTLOPT_LLM_API_KEY`, `RTLOPT_LLM_MODEL` and the matching
//! `RTLOPT_EMBED_*` variables.

use std::env;
use std::time::Duration;

use serde_json::{json, Value};

use super::{LlmAdapter, Prompt};
use crate::error::{Error, Result};
use crate::library::Embedder;

fn var(name: &str) -> Result<String> {
    env::var(name).map_err(|_| Error::Environment(format!("environment variable {name} is not set")))
}

fn endpoint(base: &str, path: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with(path) {
        base.to_string()
    } else {
        format!("{base}{path}")
    }
}

struct Client {
    http: reqwest::blocking::Client,
    url: String,
    key: Option<String>,
    model: String,
}

impl Client {
    fn new(url: String, key: Option<String>, model: String) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| Error::Environment(format!("http client: {e}")))?;
        Ok(Client { http, url, key, model })
    }

    fn post(&self, body: &Value) -> Result<Value> {
        let mut req = self.http.post(&self.url).json(body);
        if let Some(k) = &self.key {
            req = req.bearer_auth(k);
        }
        let resp = req
            .send()
            .map_err(|e| Error::Environment(format!("request to {} failed: {e}", self.url)))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| Error::Environment(format!("reading response from {}: {e}", self.url)))?;
        if !status.is_success() {
            let snippet: String = text.chars().take(300).collect();
            return Err(Error::Environment(format!("{} returned {status}: {snippet}", self.url)));
        }
        serde_json::from_str(&text).map_err(|e| Error::Environment(format!("malformed response: {e}")))
    }
}

pub struct RemoteLlm {
    client: Client,
}

impl RemoteLlm {
    pub fn new(url: &str, key: Option<String>, model: &str) -> Result<Self> {
        Ok(RemoteLlm {
            client: Client::new(endpoint(url, "/chat/completions"), key, model.to_string())?,
        })
    }

    pub fn from_env() -> Result<Self> {
        Self::new(
            &var("RTLOPT_LLM_URL")?,
            env::var("RTLOPT_LLM_API_KEY").ok(),
            &var("RTLOPT_LLM_MODEL")?,
        )
    }
}

impl LlmAdapter for RemoteLlm {
    fn model(&self) -> String {
        self.client.model.clone()
    }

    fn complete(&self, prompt: &Prompt) -> Result<String> {
        let body = json!({
            "model": self.client.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": prompt.temperature,
            "n": 1,
        });
        let v = self.client.post(&body)?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Environment("completion response has no message content".into()))
    }
}

pub struct RemoteEmbedder {
    client: Client,
    dim: usize,
}

impl RemoteEmbedder {
    /// Connects and probes the embedding dimension with one request.
    pub fn new(url: &str, key: Option<String>, model: &str) -> Result<Self> {
        let mut e = RemoteEmbedder {
            client: Client::new(endpoint(url, "/embeddings"), key, model.to_string())?,
            dim: 0,
        };
        e.dim = e.request("dimension probe")?.len();
        Ok(e)
    }

    pub fn from_env() -> Result<Self> {
        Self::new(
            &var("RTLOPT_EMBED_URL")?,
            env::var("RTLOPT_EMBED_API_KEY").ok(),
            &var("RTLOPT_EMBED_MODEL")?,
        )
    }

    fn request(&self, text: &str) -> Result<Vec<f64>> {
        let v = self.client.post(&json!({"model": self.client.model, "input": text}))?;
        let arr = v["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| Error::Environment("embedding response has no vector".into()))?;
        arr.iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| Error::Environment("non-numeric embedding entry".into()))
            })
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn fingerprint(&self) -> String {
        format!("remote:{}", self.client.model)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        if text.trim().is_empty() {
            return Ok(vec![0.0; self.dim]);
        }
        let v = self.request(text)?;
        if v.len() != self.dim {
            return Err(Error::Environment(format!(
                "embedding dimension changed from {} to {}",
                self.dim,
                v.len()
            )));
        }
        Ok(v)
    }
}
