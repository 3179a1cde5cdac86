use std::collections::HashSet;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use red10_cli::service::{router, AppState};
use red10_core::agents::Models;
use red10_core::evaluation::curve_deck;
use red10_core::identify::Identifier;
use red10_core::policy::PolicyBank;

fn models() -> Models {
    Models { bank: PolicyBank::init(2, 8, 1).unwrap(), identifier: Identifier::init(2, 8, 2).unwrap() }
}

async fn call(app: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn sse_frames(app: &Arc<AppState>, id: u64) -> Vec<Value> {
    let req = Request::builder().uri(format!("/v1/games/{id}/events")).body(Body::empty()).unwrap();
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    text.lines().filter_map(|l| l.strip_prefix("data:")).map(|d| serde_json::from_str(d.trim()).unwrap()).collect()
}

async fn create(app: &Arc<AppState>, body: Value) -> u64 {
    let (status, v) = call(app, "POST", "/v1/games", Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v["game_id"].as_u64().unwrap()
}

/// Plays the human seat with a random legal move until the deck ends.
async fn play_out(app: &Arc<AppState>, id: u64, rng: &mut ChaCha8Rng) -> Value {
    loop {
        let (status, view) = call(app, "GET", &format!("/v1/games/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if !view["terminal"].is_null() {
            return view;
        }
        let legal = view["legal_moves"].as_array().expect("human to move");
        let pick = legal[rng.gen_range(0..legal.len())].as_str().unwrap().to_string();
        let body = if pick == "pass" {
            json!({ "cards": "pass", "revision": view["revision"] })
        } else {
            json!({ "cards": pick.split(' ').collect::<Vec<_>>(), "revision": view["revision"] })
        };
        let (status, r) = call(app, "POST", &format!("/v1/games/{id}/moves"), Some(body)).await;
        assert_eq!(status, StatusCode::OK, "{r}");
        assert_eq!(r["accepted"], true);
    }
}

#[tokio::test]
async fn scripted_client_completes_a_deck_against_three_agents() {
    let app = AppState::new(Some(models()), false);
    let id = create(&app, json!({ "agents": "idrl", "human_seat": 2, "seed": 17 })).await;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let view = play_out(&app, id, &mut rng).await;
    let state = app.game_state(id).unwrap();
    assert!(state.is_terminal());
    assert_eq!(view["history"].as_array().unwrap().len(), state.history.len());
    assert_eq!(view["revision"].as_u64().unwrap() as usize, state.history.len());

    let frames = sse_frames(&app, id).await;
    assert_eq!(frames.len(), state.history.len());
    for (i, f) in frames.iter().enumerate() {
        assert_eq!(f["revision"].as_u64().unwrap(), i as u64 + 1);
        assert_eq!(f["terminal"].is_null(), i + 1 < frames.len());
    }
    let last = frames.last().unwrap();
    assert_eq!(last["terminal"]["winner"].as_u64().unwrap() as usize, state.winner.unwrap());
}

#[tokio::test]
async fn human_winning_ends_the_game_for_their_team() {
    let app = AppState::new(None, false);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..300 {
        let id = create(&app, json!({ "agents": "random", "human_seat": 0, "seed": seed })).await;
        let view = play_out(&app, id, &mut rng).await;
        if view["terminal"]["winner"] == 0 {
            let state = app.game_state(id).unwrap();
            let team = serde_json::to_value(state.pattern.team_of(0)).unwrap();
            assert_eq!(view["terminal"]["winning_team"], team);
            assert_eq!(view["hand"].as_array().unwrap().len(), 0);
            let frames = sse_frames(&app, id).await;
            assert_eq!(frames.last().unwrap()["seat"], 0);
            return;
        }
    }
    panic!("the human never went out first in 300 decks");
}

#[tokio::test]
async fn illegal_moves_are_rejected_without_changing_state() {
    let app = AppState::new(None, false);
    let id = create(&app, json!({ "agents": ["rule", "random", "rule"], "human_seat": 1, "seed": 3 })).await;
    let (_, before) = call(&app, "GET", &format!("/v1/games/{id}"), None).await;
    let state = app.game_state(id).unwrap();
    let foreign = state.hands[(1 + 1) % 4].iter().next().unwrap().code();
    for body in [
        json!({ "cards": [foreign] }),
        json!({ "cards": "fold" }),
        json!({ "cards": ["ZZ"] }),
    ] {
        let (status, r) = call(&app, "POST", &format!("/v1/games/{id}/moves"), Some(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(r["accepted"], false);
    }
    let (status, r) = call(&app, "POST", &format!("/v1/games/{id}/moves"), Some(json!({ "cards": [foreign] }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(r["reason"], "not in legal set");
    let (_, after) = call(&app, "GET", &format!("/v1/games/{id}"), None).await;
    assert_eq!(before, after);
    assert_eq!(app.game_state(id).unwrap(), state);

    let stale = json!({ "cards": "pass", "revision": 999 });
    let (status, _) = call(&app, "POST", &format!("/v1/games/{id}/moves"), Some(stale)).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn status_codes_for_unknown_games_and_wrong_turns() {
    let app = AppState::new(None, false);
    let (status, _) = call(&app, "GET", "/v1/games/42", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/v1/games/42/moves", Some(json!({ "cards": "pass" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    // No human seat: the agents finish the deck and no one may move.
    let id = create(&app, json!({ "agents": "rule", "seed": 4 })).await;
    assert!(app.game_state(id).unwrap().is_terminal());
    let (status, r) = call(&app, "POST", &format!("/v1/games/{id}/moves"), Some(json!({ "cards": "pass" }))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{r}");

    for bad in [
        json!({ "agents": "idrl", "human_seat": 0 }),
        json!({ "agents": "dqn" }),
        json!({ "agents": ["rule", "rule"], "human_seat": 0 }),
        json!({ "agents": "rule", "human_seat": 4 }),
    ] {
        let (status, _) = call(&app, "POST", "/v1/games", Some(bad)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
    }
}

#[tokio::test]
async fn insight_is_hidden_unless_enabled() {
    let app = AppState::new(Some(models()), false);
    let id = create(&app, json!({ "agents": "idrl", "seed": 5 })).await;
    let (status, _) = call(&app, "GET", &format!("/v1/games/{id}/insight"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn insight_matches_the_curve_export() {
    let m = models();
    let app = AppState::new(Some(m.clone()), true);
    for seed in [5u64, 6, 7] {
        let id = create(&app, json!({ "agents": "idrl", "seed": seed })).await;
        let (status, v) = call(&app, "GET", &format!("/v1/games/{id}/insight"), None).await;
        assert_eq!(status, StatusCode::OK);
        let served: Vec<red10_core::evaluation::CurveRow> = serde_json::from_value(v["rows"].clone()).unwrap();
        let exported = curve_deck(&m, 0, seed).unwrap();
        assert_eq!(served.len(), exported.len());
        for (a, b) in served.iter().zip(&exported) {
            assert_eq!(a.to_csv(), b.to_csv());
        }
    }
}

/// Every whitespace-separated token of every string in a JSON value.
fn tokens(v: &Value, out: &mut HashSet<String>) {
    match v {
        Value::String(s) => out.extend(s.split_whitespace().map(str::to_string)),
        Value::Array(a) => a.iter().for_each(|x| tokens(x, out)),
        Value::Object(o) => o.iter().for_each(|(k, x)| {
            out.insert(k.clone());
            tokens(x, out)
        }),
        _ => {}
    }
}

#[tokio::test]
async fn views_never_leak_hidden_hands() {
    let app = AppState::new(None, false);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut views = 0;
    let mut game = None;
    while views < 1000 {
        let id = match game {
            Some(id) => id,
            None => {
                let human = rng.gen_range(0..4);
                let id = create(&app, json!({ "agents": "random", "human_seat": human, "seed": rng.gen::<u32>() })).await;
                game = Some(id);
                id
            }
        };
        let (_, view) = call(&app, "GET", &format!("/v1/games/{id}"), None).await;
        views += 1;
        let state = app.game_state(id).unwrap();
        let human = view["seat"].as_u64().unwrap() as usize;
        let mut seen = HashSet::new();
        tokens(&view, &mut seen);
        for seat in (0..4).filter(|&s| s != human) {
            for card in state.hands[seat].iter() {
                assert!(!seen.contains(&card.code()), "seat {seat}'s {} leaked to seat {human}", card.code());
            }
        }
        let own: HashSet<String> = state.hands[human].iter().map(|c| c.code()).collect();
        let shown: HashSet<String> = view["hand"].as_array().unwrap().iter().map(|c| c.as_str().unwrap().to_string()).collect();
        assert_eq!(own, shown);
        if !view["terminal"].is_null() {
            game = None;
            continue;
        }
        let legal = view["legal_moves"].as_array().unwrap();
        let pick = legal[rng.gen_range(0..legal.len())].as_str().unwrap().to_string();
        let cards = if pick == "pass" { json!("pass") } else { json!(pick.split(' ').collect::<Vec<_>>()) };
        let (status, _) = call(&app, "POST", &format!("/v1/games/{id}/moves"), Some(json!({ "move": cards }))).await;
        assert_eq!(status, StatusCode::OK);
    }
}
