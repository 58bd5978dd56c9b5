//! HTTP chat-completion backend.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{BackendError, ChatBackend, DecodingParams};

pub const API_KEY_ENV: &str = "HINSEARCH_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_key_env() -> String {
    API_KEY_ENV.to_string()
}

fn default_timeout() -> u64 {
    120
}

pub struct LiveBackend {
    config: LiveConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl LiveBackend {
    /// Reads the API key from the configured environment variable; a
    /// missing key is allowed for endpoints that need none.
    pub fn new(config: LiveConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: LiveConfig, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, api_key, agent }
    }
}

pub fn first_choice_content(body: &Value) -> Result<String, BackendError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Format("response has no choices[0].message.content".into()))
}

impl ChatBackend for LiveBackend {
    fn complete(&self, system: &str, user: &str, params: &DecodingParams) -> Result<String, BackendError> {
        let request = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": params.temperature,
        });
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(&request)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Http { status, body: text });
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| BackendError::Format(e.to_string()))?;
        first_choice_content(&body)
    }

    fn identity(&self) -> String {
        self.config.model.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves one canned HTTP response and hands back the raw request.
    fn one_shot_server(status: &str, body: &str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let response = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut head = String::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            reader.get_mut().write_all(response.as_bytes()).unwrap();
            head + &String::from_utf8(body).unwrap()
        });
        (url, handle)
    }

    fn config(endpoint: String) -> LiveConfig {
        LiveConfig {
            endpoint,
            model: "test-model".into(),
            api_key_env: default_key_env(),
            timeout_secs: 10,
        }
    }

    #[test]
    fn speaks_chat_completion_protocol() {
        let (url, server) = one_shot_server("200 OK", r#"{"choices":[{"message":{"role":"assistant","content":"CHOICE: 1"}}]}"#);
        let backend = LiveBackend::with_key(config(url), Some("secret".into()));
        let reply = backend
            .complete("sys", "pick", &DecodingParams { temperature: 0.0 })
            .unwrap();
        assert_eq!(reply, "CHOICE: 1");
        let request = server.join().unwrap();
        assert!(request.to_ascii_lowercase().contains("authorization: bearer secret"));
        let body: Value = serde_json::from_str(request.split("\r\n\r\n").nth(1).unwrap()).unwrap();
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "pick");
        assert_eq!(body["temperature"], 0.0);
    }

    #[test]
    fn server_errors_surface_with_status() {
        let (url, server) = one_shot_server("503 Service Unavailable", r#"{"error":"busy"}"#);
        let backend = LiveBackend::with_key(config(url), None);
        let err = backend.complete("s", "u", &DecodingParams::default()).unwrap_err();
        assert!(matches!(err, BackendError::Http { status: 503, .. }));
        assert!(err.is_retryable());
        server.join().unwrap();
    }

    #[test]
    fn missing_content_is_a_format_error() {
        let (url, server) = one_shot_server("200 OK", r#"{"choices":[]}"#);
        let backend = LiveBackend::with_key(config(url), None);
        assert!(matches!(
            backend.complete("s", "u", &DecodingParams::default()),
            Err(BackendError::Format(_))
        ));
        server.join().unwrap();
    }
}
