use std::time::Duration;

use serde_json::{json, Value};

use super::{AttemptError, ChatRequest, EndpointConfig, FinishReason, GatewayError, Usage};

pub(crate) fn auth_token(endpoint: &EndpointConfig) -> Result<Option<String>, GatewayError> {
    match endpoint.auth_env.as_deref() {
        None => Ok(None),
        Some(var) => match std::env::var(var) {
            Ok(v) if !v.is_empty() => Ok(Some(v)),
            _ => Err(GatewayError::MissingAuth {
                endpoint_id: endpoint.endpoint_id.clone(),
                variable: var.to_string(),
            }),
        },
    }
}

pub(crate) fn request_body(request: &ChatRequest, endpoint: &EndpointConfig) -> Value {
    let messages: Vec<Value> = request
        .messages
        .iter()
        .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
        .collect();
    let mut body = json!({
        "model": endpoint.model_name,
        "messages": messages,
        "temperature": request.temperature,
        "max_tokens": request.max_output_tokens,
        "stream": false,
    });
    if let Some(stop) = &request.stop {
        body["stop"] = json!(stop);
    }
    body
}

pub(crate) fn attempt(
    request: &ChatRequest,
    endpoint: &EndpointConfig,
) -> Result<(String, FinishReason, Usage), AttemptError> {
    let token = auth_token(endpoint).map_err(|e| AttemptError::Permanent { status: None, message: e.to_string() })?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_millis(endpoint.timeout_ms.max(1))))
        .build()
        .into();
    let url = format!("{}/chat/completions", endpoint.base_url.trim_end_matches('/'));
    let mut call = agent.post(&url).header("Content-Type", "application/json");
    if let Some(token) = token {
        call = call.header("Authorization", &format!("Bearer {token}"));
    }
    let mut response = call
        .send_json(request_body(request, endpoint))
        .map_err(|e| AttemptError::Transient { status: None, message: e.to_string() })?;
    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| AttemptError::Transient { status: Some(status), message: e.to_string() })?;
    if status == 429 || status >= 500 {
        return Err(AttemptError::Transient { status: Some(status), message: truncate(&text) });
    }
    if !(200..300).contains(&status) {
        return Err(AttemptError::Permanent { status: Some(status), message: truncate(&text) });
    }
    parse_completion(&text).map_err(|message| AttemptError::Permanent { status: Some(status), message })
}

pub(crate) fn parse_completion(body: &str) -> Result<(String, FinishReason, Usage), String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("response is not JSON: {e}"))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| "response has no choices".to_string())?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    let reason = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("length") => FinishReason::Length,
        Some("stop") | None => FinishReason::Stop,
        Some(_) => FinishReason::Stop,
    };
    let usage = Usage {
        prompt_tokens: v.pointer("/usage/prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
        completion_tokens: v.pointer("/usage/completion_tokens").and_then(Value::as_u64).unwrap_or(0),
    };
    Ok((text, reason, usage))
}

fn truncate(text: &str) -> String {
    text.chars().take(300).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;

    #[test]
    fn body_follows_openai_schema() {
        let ep = EndpointConfig::remote("e", "http://x/v1", "qwen");
        let mut req = ChatRequest::new(vec![ChatMessage::system("s"), ChatMessage::user("u")], 64);
        req.stop = Some(vec!["\n".into()]);
        let body = request_body(&req, &ep);
        assert_eq!(body["model"], "qwen");
        assert_eq!(body["messages"][1]["role"], "user");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["max_tokens"], 64);
        assert_eq!(body["stop"][0], "\n");
    }

    #[test]
    fn parses_completion() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"B"},"finish_reason":"length"}],"usage":{"prompt_tokens":10,"completion_tokens":1}}"#;
        let (text, reason, usage) = parse_completion(body).unwrap();
        assert_eq!(text, "B");
        assert_eq!(reason, FinishReason::Length);
        assert_eq!(usage.prompt_tokens, 10);
        assert!(parse_completion("{}").is_err());
    }
}
