//! Rendering checks over HTTP: stable digests and verbatim field text.

use axum::http::StatusCode;
use recuerdame_server::handlers::DIGEST_HEADER;
use recuerdame_testkit::pdf::{self, normalize_ws};
use serde_json::json;

use super::{id, memory, Harness, Reply};

/// Panics unless every needle occurs in `text`, each after the previous.
#[track_caller]
pub fn assert_in_order(text: &str, needles: &[&str]) {
    let mut from = 0;
    for n in needles {
        let n = normalize_ws(n);
        match text[from..].find(&n) {
            Some(at) => from += at + n.len(),
            None => panic!("{n:?} missing or out of order in:\n{text}"),
        }
    }
}

/// Fetches a PDF `times` times and checks the digest header agrees each
/// time. Returns the flattened text of the last copy.
async fn stable(h: &Harness, tok: &str, times: usize, fetch: impl AsyncFn(&Harness, &str) -> Reply) -> String {
    let first = fetch(h, tok).await.expect(StatusCode::OK);
    let digest = first.header(DIGEST_HEADER).to_string();
    assert_eq!(digest.len(), 64, "digest header missing");
    for _ in 1..times {
        let again = fetch(h, tok).await.expect(StatusCode::OK);
        assert_eq!(again.header(DIGEST_HEADER), digest);
        assert_eq!(again.body, first.body);
    }
    let parsed = pdf::read(&first.body).unwrap();
    assert_eq!(parsed.declared_page_count as usize, parsed.pages.len());
    parsed.flat_text()
}

/// Session report, assessment and life-story book for one patient, each
/// rendered `times` times.
pub async fn documents(h: &Harness, times: usize) -> usize {
    let (_, tok) = h.therapist("Ana Ruiz", "ana@clinic.example");
    let pid = id(&h
        .post(
            "/patients",
            &tok,
            json!({ "display_name": "Rosa Castro", "file_number": "H-2001" }),
        )
        .await
        .expect(StatusCode::CREATED)
        .json());

    let mut ids = Vec::new();
    for (d, stage, y, place) in [
        ("Opening the bakery", "adult", 1975, "Bilbao"),
        ("Goats on grandfather's farm", "childhood", 1946, "Lugo"),
        ("Trip to Lourdes", "older adult", 2001, "Lourdes"),
        ("Dancing at the romería", "adolescence", 1957, "Ourense"),
        ("Moving to Bilbao", "young adult", 1963, "Bilbao"),
    ] {
        let mut m = memory(d, stage, y);
        m["location"] = json!(place);
        ids.push(
            h.post(&format!("/patients/{pid}/memories"), &tok, m)
                .await
                .expect(StatusCode::CREATED)
                .json()["id"]
                .clone(),
        );
    }

    let s = h
        .post(
            &format!("/patients/{pid}/sessions"),
            &tok,
            json!({ "scheduled_at": "2024-03-05T10:00:00+01:00", "objectives": "Recall the farm years",
                    "description": "Photos from Lugo", "barriers": "tired after lunch", "facilitators": "son present",
                    "activity_sequence": ["Greeting", "Photo review", "Song"], "session_location": "Day centre, room 2",
                    "planned_memory_ids": [ids[1], ids[3]] }),
        )
        .await
        .expect(StatusCode::CREATED);
    let sid = id(&s.json());
    let live = h
        .post_if(&format!("/sessions/{sid}/start"), &tok, s.version(), json!({}))
        .await
        .expect(StatusCode::OK);
    h.post_if(
        &format!("/sessions/{sid}/end"),
        &tok,
        live.version(),
        json!({ "overall_impression": "Relaxed, laughed at the goats", "participation_score": 8, "repeat_recommended": false,
                "future_proposals": "Bring the accordion",
                "memory_outcomes": [
                    { "memory_id": ids[1], "observed_preservation": "preserved", "emotional_reaction": "positive", "notes": "named every goat" },
                    { "memory_id": ids[3], "observed_preservation": "at risk of loss", "emotional_reaction": "neutral", "notes": "unsure of the year" } ] }),
    )
    .await
    .expect(StatusCode::OK);
    let text = stable(h, &tok, times, async |h, tok| {
        h.get(&format!("/sessions/{sid}/report.pdf"), tok).await
    })
    .await;
    assert_in_order(
        &text,
        &[
            "Patient: Rosa Castro",
            "File number: H-2001",
            "2024-03-05 10:00 (UTC+01:00)",
            "Recall the farm years",
            "Photos from Lugo",
            "tired after lunch",
            "son present",
            "1. Greeting",
            "2. Photo review",
            "3. Song",
            "Day centre, room 2",
            "Goats on grandfather's farm Preserved Positive named every goat",
            "Dancing at the romería At risk of loss Neutral unsure of the year",
            "Relaxed, laughed at the goats",
            "Participation 8 / 10",
            "Repeat recommended No",
            "Bring the accordion",
            "Therapist: Ana Ruiz <ana@clinic.example>",
        ],
    );

    let a = h
        .post(
            &format!("/patients/{pid}/assessments"),
            &tok,
            json!({ "assessed_at": "2024-02-20", "diagnosis_type": "Alzheimer's disease", "diagnosis_date": { "year": 2021, "month": 4 },
                    "gds_stage": 4,
                    "instrument_results": [
                        { "instrument_name": "MMSE", "score": 24, "range_min": 0, "range_max": 30 },
                        { "instrument_name": "GDS-15", "score": 6.5, "range_min": 0, "range_max": 15 } ],
                    "nonstandard_instruments": "Clock drawing, informal", "observations": "Needs prompting for recent events",
                    "overall_impression": "worsened" }),
        )
        .await
        .expect(StatusCode::CREATED)
        .json();
    let aid = id(&a);
    let signed_at: chrono::DateTime<chrono::Utc> = a["signature"]["signed_at"].as_str().unwrap().parse().unwrap();
    let signature = format!("Signed: Ana Ruiz, {}", signed_at.format("%Y-%m-%d %H:%M UTC"));
    let text = stable(h, &tok, times, async |h, tok| {
        h.get(&format!("/assessments/{aid}.pdf"), tok).await
    })
    .await;
    assert_in_order(
        &text,
        &[
            "Rosa Castro",
            "2024-02-20",
            "Alzheimer's disease",
            "2021-04",
            "GDS stage 4",
            "MMSE 24 (range 0\u{2013}30)",
            "GDS-15 6.5 (range 0\u{2013}15)",
            "Clock drawing, informal",
            "Needs prompting for recent events",
            "Worsened",
            &signature,
        ],
    );

    let text = stable(h, &tok, times, async |h, tok| {
        h.post(&format!("/patients/{pid}/life-story/book.pdf"), tok, json!({}))
            .await
    })
    .await;
    assert_in_order(
        &text,
        &[
            "Rosa Castro",
            "5 memories",
            "Childhood",
            "Goats on grandfather's farm",
            "Date: 1946",
            "Location: Lugo",
            "Adolescence",
            "Dancing at the romería",
            "Date: 1957",
            "Location: Ourense",
            "Young adult",
            "Moving to Bilbao",
            "Date: 1963",
            "Adult",
            "Opening the bakery",
            "Date: 1975",
            "Older adult",
            "Trip to Lourdes",
            "Date: 2001",
            "Location: Lourdes",
        ],
    );
    3
}
