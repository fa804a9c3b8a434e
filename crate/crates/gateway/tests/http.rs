use std::path::Path;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use reqwest::StatusCode;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;
use vishsim::domain::CallRecord;
use vishsim::log::{read_records, RecordLog};
use vishsim::Config;
use vishsim_gateway::runtime::{Runtime, RuntimeOptions};
use vishsim_gateway::server::{router, AppState};

struct Server {
    base: String,
    ws: String,
    http: reqwest::Client,
}

async fn start(workers: usize, log: Option<&Path>) -> Server {
    let config = Config::bundled("innovatech").unwrap();
    let options = RuntimeOptions {
        workers,
        poll_interval: Duration::from_millis(20),
        offline_after_polls: 50,
        victim_wait: Duration::from_secs(10),
    };
    let log = log.map(|p| RecordLog::create(p).unwrap());
    let runtime = Runtime::start(config, options, log);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(AppState::new(runtime))).await });
    Server {
        base: format!("http://{addr}"),
        ws: format!("ws://{addr}"),
        http: reqwest::Client::new(),
    }
}

impl Server {
    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self
            .http
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    /// Polls until the call has a record.
    async fn record(&self, id: &str) -> Value {
        for _ in 0..500 {
            let (status, body) = self.get(&format!("/calls/{id}")).await;
            match status {
                StatusCode::OK => return body,
                StatusCode::ACCEPTED => tokio::time::sleep(Duration::from_millis(20)).await,
                other => panic!("GET /calls/{id} gave {other}"),
            }
        }
        panic!("call {id} never finished");
    }

    async fn events(&self, id: &str) -> Vec<Value> {
        let (mut ws, _) = tokio_tungstenite::connect_async(format!("{}/ws/calls/{id}", self.ws))
            .await
            .unwrap();
        let mut out = Vec::new();
        while let Some(Ok(m)) = ws.next().await {
            match m {
                Message::Text(t) => out.push(serde_json::from_str(&t).unwrap()),
                Message::Close(_) => break,
                _ => {}
            }
        }
        out
    }
}

fn call_body(id: &str, persona: &str, interactive: bool) -> Value {
    json!({
        "request": {
            "id": id,
            "persona_id": persona,
            "victim": { "name": "Tomas", "phone": "sim:1", "discretion_level": 2 },
            "scenario_id": "innovatech",
            "max_duration_s": 600,
            "seed": 9
        },
        "interactive": interactive
    })
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn campaign_runs_to_completion_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("calls.log");
    let s = start(3, Some(&log)).await;
    let (status, body) = s
        .post(
            "/campaigns",
            json!({"scenario_id": "innovatech", "persona_id": "sophia", "levels": [1, 2, 3, 4], "per_level": 2, "seed": 7}),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let campaign = body["campaign_id"].as_str().unwrap().to_string();
    let ids: Vec<String> = body["call_ids"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().into())
        .collect();
    assert_eq!(ids.len(), 8);

    let mut records = Vec::new();
    for id in &ids {
        let r: CallRecord = serde_json::from_value(s.record(id).await).unwrap();
        assert_eq!(&r.request.id, id);
        assert_eq!(r.request.persona_id, "sophia");
        records.push(r);
    }

    let (status, report) = s.get(&format!("/campaigns/{campaign}/report")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["calls"], 8);
    assert_eq!(report["completed"], 8);
    assert_eq!(report["costs"]["columns"][0]["calls"], 8);
    assert_eq!(report["outcomes"]["calls"], 8);
    let disclosed = records
        .iter()
        .filter(|r| r.outcome.class == vishsim::OutcomeClass::Disclosed)
        .count();
    assert_eq!(report["costs"]["columns"][2]["calls"], disclosed);

    // Every persisted record comes back unchanged.
    let persisted = read_records(&log).unwrap();
    assert_eq!(persisted.len(), 8);
    for p in &persisted {
        let served: CallRecord = serde_json::from_value(s.record(&p.request.id).await).unwrap();
        assert_eq!(&served, p);
    }

    let (_, fleet) = s.get("/fleet").await;
    assert_eq!(fleet["completed"], 8);
    assert!(fleet["peak_inflight"].as_u64().unwrap() <= 3);
    assert_eq!(fleet["pending"], 0);

    // The same campaign again gets a fresh id and fresh call ids.
    let (status, again) = s
        .post(
            "/campaigns",
            json!({"scenario_id": "innovatech", "levels": [1], "per_level": 1, "seed": 7}),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_ne!(again["campaign_id"], body["campaign_id"]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn large_campaign_respects_worker_capacity() {
    let s = start(4, None).await;
    let (status, body) = s
        .post(
            "/campaigns",
            json!({"scenario_id": "innovatech", "levels": [1, 2, 3, 4], "per_level": 60, "seed": 7}),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["call_ids"].as_array().unwrap().len(), 240);
    let campaign = body["campaign_id"].as_str().unwrap();
    for _ in 0..1000 {
        let (_, fleet) = s.get("/fleet").await;
        let busy = fleet["workers"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|w| w["status"] == "busy")
            .count();
        assert!(busy <= 4);
        assert!(fleet["inflight"].as_u64().unwrap() <= 4);
        if fleet["completed"] == 240 {
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    let (_, report) = s.get(&format!("/campaigns/{campaign}/report")).await;
    assert_eq!(report["completed"], 240);
    let (_, fleet) = s.get("/fleet").await;
    assert!(fleet["peak_inflight"].as_u64().unwrap() <= 4);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn errors_map_to_status_codes() {
    let s = start(1, None).await;
    assert_eq!(s.get("/calls/nope").await.0, StatusCode::NOT_FOUND);
    assert_eq!(
        s.get("/campaigns/nope/report").await.0,
        StatusCode::NOT_FOUND
    );

    assert_eq!(
        s.post("/calls", json!({"request": {"id": 3}})).await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        s.post("/calls", call_body("x", "nobody", false)).await.0,
        StatusCode::BAD_REQUEST
    );
    let bad_level = json!({"scenario_id": "innovatech", "levels": [5], "per_level": 2, "seed": 1});
    assert_eq!(
        s.post("/campaigns", bad_level).await.0,
        StatusCode::BAD_REQUEST
    );
    let wrong_scenario = json!({"scenario_id": "acme", "levels": [1], "per_level": 2, "seed": 1});
    assert_eq!(
        s.post("/campaigns", wrong_scenario).await.0,
        StatusCode::BAD_REQUEST
    );
    let raw = s
        .http
        .post(format!("{}/calls", s.base))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .await
        .unwrap();
    assert_eq!(raw.status(), StatusCode::BAD_REQUEST);

    let (status, body) = s.post("/calls", call_body("solo", "michael", false)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["call_id"], "solo");
    assert_eq!(
        s.post("/calls", call_body("solo", "michael", false))
            .await
            .0,
        StatusCode::CONFLICT
    );

    let ws = tokio_tungstenite::connect_async(format!("{}/ws/calls/nope", s.ws)).await;
    assert!(ws.is_err());
    let ws = tokio_tungstenite::connect_async(format!("{}/ws/victim/solo", s.ws)).await;
    match ws {
        Err(tokio_tungstenite::tungstenite::Error::Http(r)) => assert_eq!(r.status(), 409),
        other => panic!("expected 409, got {other:?}"),
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn event_stream_is_ordered_and_matches_the_record() {
    let s = start(2, None).await;
    assert_eq!(
        s.post("/calls", call_body("watched", "sophia", false))
            .await
            .0,
        StatusCode::CREATED
    );
    let (a, b) = tokio::join!(s.events("watched"), s.events("watched"));
    assert_eq!(a, b, "two monitors see the same stream");
    // Subscribing after the end replays everything.
    let record: CallRecord = serde_json::from_value(s.record("watched").await).unwrap();
    let late = s.events("watched").await;
    assert_eq!(late, a);

    assert!(a.iter().all(|e| e["call_id"] == "watched"));
    let times: Vec<u64> = a.iter().map(|e| e["t_ms"].as_u64().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]), "{times:?}");
    let outcomes: Vec<&Value> = a.iter().filter(|e| e["type"] == "outcome").collect();
    assert_eq!(outcomes.len(), 1);
    assert_eq!(a.last().unwrap()["type"], "outcome");
    assert_eq!(outcomes[0]["class"], json!(record.outcome.class));

    let transcript: Vec<&Value> = a.iter().filter(|e| e["type"] == "transcript").collect();
    assert_eq!(transcript.len(), record.transcript.len());
    for (e, entry) in transcript.iter().zip(&record.transcript) {
        assert_eq!(e["text"], entry.text.as_str());
        assert_eq!(e["t_ms"], entry.t_ms);
    }
    let first = transcript[0].as_object().unwrap();
    for key in ["type", "call_id", "t_ms", "speaker", "text"] {
        assert!(first.contains_key(key), "missing {key}");
    }
    assert_eq!(first["speaker"], "bot");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn human_victim_over_websocket_can_disclose() {
    let s = start(1, None).await;
    assert_eq!(
        s.post("/calls", call_body("human", "sophia", true)).await.0,
        StatusCode::CREATED
    );
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("{}/ws/victim/human", s.ws))
        .await
        .unwrap();
    let second = tokio_tungstenite::connect_async(format!("{}/ws/victim/human", s.ws)).await;
    assert!(
        matches!(second, Err(tokio_tungstenite::tungstenite::Error::Http(r)) if r.status() == 409)
    );

    let mut heard = Vec::new();
    let mut outcome = None;
    while let Some(Ok(m)) = ws.next().await {
        let Message::Text(t) = m else { continue };
        let frame: Value = serde_json::from_str(&t).unwrap();
        match frame["type"].as_str().unwrap() {
            "transcript" => {
                assert_eq!(frame["speaker"], "bot");
                assert!(frame["playback_ms"].as_u64().unwrap() > 0);
                heard.push(frame["text"].as_str().unwrap().to_string());
                let reply = if heard.len() == 1 {
                    "Hello?"
                } else {
                    "Fine, my password is Inn0V4t3CH"
                };
                ws.send(Message::text(
                    json!({"type": "utterance", "text": reply}).to_string(),
                ))
                .await
                .unwrap();
            }
            "outcome" => {
                outcome = Some(frame["class"].as_str().unwrap().to_string());
                break;
            }
            other => panic!("unexpected frame {other}"),
        }
    }
    assert!(heard[0].starts_with("Hi, this is Sophia"));
    assert_eq!(outcome.as_deref(), Some("Disclosed"));
    let record = s.record("human").await;
    assert_eq!(record["outcome"]["class"], "Disclosed");
}
