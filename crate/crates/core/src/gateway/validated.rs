use super::{ChatRequest, ChatResponse, EndpointConfig, Gateway, GatewayError};

/// Why an item was given up on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejected {
    pub reason: String,
    /// Last completion text received, when there was one.
    pub output: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Validated<T> {
    pub outcome: Result<T, Rejected>,
    /// LLM calls spent on this item.
    pub attempts: u32,
    /// Fingerprint of the request whose response was accepted (or of the
    /// last request sent).
    pub fingerprint: String,
}

/// Generate-and-check loop over many independent items.
///
/// Round `r` (1-based) sends `build(i, r)` for every item still pending,
/// through [`Gateway::complete_batch`]. Responses failing `check` (or
/// transport failures) stay pending until `max_rounds` is reached. Only
/// configuration errors abort the whole loop.
pub fn validated_batch<T, B, C>(
    gateway: &Gateway,
    endpoint: &EndpointConfig,
    max_parallel: usize,
    n_items: usize,
    max_rounds: u32,
    build: B,
    check: C,
) -> Result<Vec<Validated<T>>, GatewayError>
where
    B: Fn(usize, u32) -> ChatRequest,
    C: Fn(usize, &ChatResponse) -> Result<T, String>,
{
    let mut slots: Vec<Validated<T>> = (0..n_items)
        .map(|_| Validated {
            outcome: Err(Rejected { reason: "not attempted".into(), output: None }),
            attempts: 0,
            fingerprint: String::new(),
        })
        .collect();
    let mut pending: Vec<usize> = (0..n_items).collect();
    for round in 1..=max_rounds.max(1) {
        if pending.is_empty() {
            break;
        }
        let requests: Vec<ChatRequest> = pending.iter().map(|&i| build(i, round)).collect();
        let results = match gateway.complete_batch(&requests, endpoint, max_parallel) {
            Ok(r) => r,
            Err(e) if e.is_configuration() => return Err(e),
            Err(GatewayError::BatchFailed { failures }) => failures
                .into_iter()
                .map(|(_, msg)| Err(GatewayError::InvalidRequest(msg)))
                .collect(),
            Err(e) => return Err(e),
        };
        let mut still = Vec::new();
        for ((&i, request), result) in pending.iter().zip(&requests).zip(results) {
            let slot = &mut slots[i];
            slot.attempts += 1;
            slot.fingerprint = request.fingerprint();
            match result {
                Ok(response) => match check(i, &response) {
                    Ok(value) => slot.outcome = Ok(value),
                    Err(reason) => {
                        slot.outcome = Err(Rejected { reason, output: Some(response.text) });
                        still.push(i);
                    }
                },
                Err(e) => {
                    if e.is_configuration() {
                        return Err(e);
                    }
                    slot.outcome = Err(Rejected { reason: e.to_string(), output: None });
                    still.push(i);
                }
            }
        }
        pending = still;
    }
    Ok(slots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ChatMessage, MockReply, MockScript};

    #[test]
    fn retries_until_valid_then_gives_up() {
        let gw = Gateway::new();
        let ep = gw.configure_mock(
            "m",
            MockScript::responder(|r, _| {
                let c = r.last_user_content();
                // item 0 becomes valid on round 2; item 1 never does
                if c.starts_with("0|2") {
                    MockReply::Text("ok".into())
                } else {
                    MockReply::Text("bad".into())
                }
            }),
        );
        let out = validated_batch(
            &gw,
            &ep,
            2,
            2,
            3,
            |i, r| ChatRequest::new(vec![ChatMessage::user(format!("{i}|{r}"))], 8),
            |_, resp| if resp.text == "ok" { Ok(()) } else { Err("bad".into()) },
        )
        .unwrap();
        assert!(out[0].outcome.is_ok());
        assert_eq!(out[0].attempts, 2);
        assert_eq!(out[1].attempts, 3);
        assert_eq!(out[1].outcome.as_ref().unwrap_err().output.as_deref(), Some("bad"));
        assert_eq!(gw.total_requests(), 5);
    }
}
