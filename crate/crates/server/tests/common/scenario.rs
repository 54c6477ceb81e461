//! The eleven evaluation tasks, driven through the HTTP API the way the
//! therapist console would. Each step asserts its own post-conditions.

use std::time::{Duration, Instant};

use axum::http::StatusCode;
use recuerdame_testkit::{gen, pdf};
use serde_json::{json, Value};

use super::{id, memory, Harness};

pub const TASKS: [&str; 11] = [
    "review sessions and completion status",
    "browse session reports and export PDF",
    "browse assessment reports and export PDF",
    "life story by stage and interval, book PDF, storyboard",
    "edit a memory and attach an image",
    "list related persons sorted by relationship",
    "calendar review, modify and create",
    "create, conduct and end a session with its report",
    "create and edit an assessment",
    "register a patient",
    "register a caregiver and link them",
];

fn array(v: &Value) -> &Vec<Value> {
    v.as_array().expect("JSON array")
}

struct Ctx<'a> {
    h: &'a Harness,
    tok: String,
    pid: String,
    memories: Vec<Value>,
    completed: String,
    planned: String,
    assessment: String,
}

/// Existing caseload the tasks start from: a patient with memories across
/// life stages, a finished and a planned session, an assessment and two
/// relatives.
async fn caseload(h: &Harness) -> Ctx<'_> {
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
    for (name, rel) in [("Pablo Castro", "son"), ("Elena Mora", "neighbour")] {
        h.post(
            &format!("/patients/{pid}/related-persons"),
            &tok,
            json!({ "display_name": name, "relationship_type": rel }),
        )
        .await
        .expect(StatusCode::CREATED);
    }
    let mut memories = Vec::new();
    for (d, stage, y) in [
        ("Goats on grandfather's farm", "childhood", 1946),
        ("Dancing at the romería", "adolescence", 1957),
        ("Moving to Bilbao", "young adult", 1963),
        ("Opening the bakery", "adult", 1975),
        ("Trip to Lourdes", "older adult", 2001),
    ] {
        memories.push(
            h.post(&format!("/patients/{pid}/memories"), &tok, memory(d, stage, y))
                .await
                .expect(StatusCode::CREATED)
                .json(),
        );
    }
    let plan = |day: u32, m: &Value| json!({ "scheduled_at": format!("2024-03-{day:02}T11:00:00+01:00"), "objectives": "Farm and family", "planned_memory_ids": [m["id"]] });
    let done = h
        .post(&format!("/patients/{pid}/sessions"), &tok, plan(2, &memories[0]))
        .await
        .expect(StatusCode::CREATED)
        .json();
    let completed = id(&done);
    let s = h
        .post_if(&format!("/sessions/{completed}/start"), &tok, 1, json!({}))
        .await
        .expect(StatusCode::OK);
    h.post_if(
        &format!("/sessions/{completed}/end"),
        &tok,
        s.version(),
        json!({ "overall_impression": "Smiled at the farm photos", "participation_score": 7,
                "memory_outcomes": [{ "memory_id": memories[0]["id"], "observed_preservation": "preserved", "emotional_reaction": "positive" }] }),
    )
    .await
    .expect(StatusCode::OK);
    let planned = id(&h
        .post(&format!("/patients/{pid}/sessions"), &tok, plan(14, &memories[1]))
        .await
        .expect(StatusCode::CREATED)
        .json());
    let assessment = id(&h
        .post(
            &format!("/patients/{pid}/assessments"),
            &tok,
            json!({ "assessed_at": "2024-01-15", "diagnosis_type": "Alzheimer's disease", "gds_stage": 3,
                    "instrument_results": [{ "instrument_name": "MMSE", "score": 24, "range_min": 0, "range_max": 30 }],
                    "overall_impression": "stable" }),
        )
        .await
        .expect(StatusCode::CREATED)
        .json());
    Ctx {
        h,
        tok,
        pid,
        memories,
        completed,
        planned,
        assessment,
    }
}

async fn task(n: usize, cx: &mut Ctx<'_>) {
    let (h, tok, pid) = (cx.h, cx.tok.clone(), cx.pid.clone());
    match n {
        0 => {
            let sessions = h
                .get(&format!("/patients/{pid}/sessions"), &tok)
                .await
                .expect(StatusCode::OK)
                .json();
            let status = |sid: &str| array(&sessions).iter().find(|s| s["id"] == sid).unwrap()["status"].clone();
            assert_eq!(array(&sessions).len(), 2);
            assert_eq!(status(&cx.completed), "completed");
            assert_eq!(status(&cx.planned), "planned");
        }
        1 => {
            let report = h
                .get(&format!("/sessions/{}/report", cx.completed), &tok)
                .await
                .expect(StatusCode::OK)
                .json();
            assert_eq!(report["overall_impression"], "Smiled at the farm photos");
            let doc = h
                .get(&format!("/sessions/{}/report.pdf", cx.completed), &tok)
                .await
                .expect(StatusCode::OK);
            let text = pdf::read(&doc.body).unwrap().flat_text();
            assert!(
                text.contains("Smiled at the farm photos") && text.contains("Rosa Castro"),
                "{text}"
            );
        }
        2 => {
            let list = h
                .get(&format!("/patients/{pid}/assessments"), &tok)
                .await
                .expect(StatusCode::OK)
                .json();
            assert_eq!(array(&list).len(), 1);
            let doc = h
                .get(&format!("/assessments/{}.pdf", cx.assessment), &tok)
                .await
                .expect(StatusCode::OK);
            let text = pdf::read(&doc.body).unwrap().flat_text();
            assert!(text.contains("MMSE 24 (range 0\u{2013}30)"), "{text}");
            assert!(text.contains("Signed: Ana Ruiz"), "{text}");
        }
        3 => {
            let q = json!({ "life_stages": ["adolescence", "young_adult"], "date_from": { "year": 1955 }, "date_to": { "year": 1960 } });
            let preview = h
                .post(&format!("/patients/{pid}/life-story/preview"), &tok, q.clone())
                .await
                .expect(StatusCode::OK)
                .json();
            let captions: Vec<_> = array(&preview["entries"])
                .iter()
                .map(|e| e["caption"].as_str().unwrap().to_string())
                .collect();
            assert_eq!(captions, ["Dancing at the romería"]);
            let book = h
                .post(&format!("/patients/{pid}/life-story/book.pdf"), &tok, q.clone())
                .await
                .expect(StatusCode::OK);
            let text = pdf::read(&book.body).unwrap().flat_text();
            assert!(
                text.contains("Dancing at the romería") && !text.contains("Moving to Bilbao"),
                "{text}"
            );
            let sb = h
                .post(&format!("/patients/{pid}/life-story/storyboard"), &tok, q)
                .await
                .expect(StatusCode::OK)
                .json();
            assert_eq!(array(&sb["slides"]).len(), 2, "title card plus one memory card");
        }
        4 => {
            let m = &cx.memories[3];
            let mid = id(m);
            let edited = h
                .patch(
                    &format!("/memories/{mid}"),
                    &tok,
                    1,
                    json!({ "location": "Bilbao, Calle Ledesma", "categories": ["work", "family"] }),
                )
                .await
                .expect(StatusCode::OK);
            let photo = gen::png(16, 12, [180, 140, 90]);
            let up = h
                .upload(
                    &format!("/memories/{mid}/media"),
                    &tok,
                    edited.version(),
                    "image/png",
                    &photo,
                    &[("description", "Shop front")],
                )
                .await
                .expect(StatusCode::CREATED);
            let after = h.get(&format!("/memories/{mid}"), &tok).await.expect(StatusCode::OK);
            assert_eq!(after.version(), up.version());
            let body = after.json();
            assert_eq!(body["location"], "Bilbao, Calle Ledesma");
            assert_eq!(array(&body["media"]).len(), 1);
            let blob = h
                .get(&format!("/media/{}", body["media"][0].as_str().unwrap()), &tok)
                .await
                .expect(StatusCode::OK);
            assert_eq!(&blob.body[..], &photo[..]);
        }
        5 => {
            let list = h
                .get(&format!("/patients/{pid}/related-persons?sort=relationship_type"), &tok)
                .await
                .expect(StatusCode::OK)
                .json();
            let rels: Vec<_> = array(&list)
                .iter()
                .map(|r| r["relationship_type"].as_str().unwrap().to_string())
                .collect();
            let mut sorted = rels.clone();
            sorted.sort();
            assert_eq!(rels, sorted);
            assert_eq!(rels.len(), 2);
        }
        6 => {
            let march = h
                .get(&format!("/patients/{pid}/calendar?month=2024-03"), &tok)
                .await
                .expect(StatusCode::OK)
                .json();
            assert_eq!(array(&march).len(), 2);
            let moved = h
                .patch(
                    &format!("/sessions/{}", cx.planned),
                    &tok,
                    1,
                    json!({ "scheduled_at": "2024-03-21T16:00:00+01:00" }),
                )
                .await
                .expect(StatusCode::OK)
                .json();
            assert_eq!(moved["scheduled_at"], "2024-03-21T16:00:00+01:00");
            h.post(
                &format!("/patients/{pid}/sessions"),
                &tok,
                json!({ "scheduled_at": "2024-03-28T11:00:00+01:00", "objectives": "Bakery years", "planned_memory_ids": [cx.memories[3]["id"]] }),
            )
            .await
            .expect(StatusCode::CREATED);
            let march = h
                .get(&format!("/patients/{pid}/calendar?month=2024-03"), &tok)
                .await
                .expect(StatusCode::OK)
                .json();
            let days: Vec<_> = array(&march)
                .iter()
                .map(|e| e["scheduled_at"].as_str().unwrap()[..10].to_string())
                .collect();
            assert_eq!(days, ["2024-03-02", "2024-03-21", "2024-03-28"]);
        }
        7 => {
            let s = h
                .post(
                    &format!("/patients/{pid}/sessions"),
                    &tok,
                    json!({ "scheduled_at": "2024-03-01T12:00:00+01:00", "objectives": "Lourdes trip",
                            "activity_sequence": ["Welcome", "Postcards", "Song"], "session_location": "Room 1",
                            "barriers": "hearing aid battery", "facilitators": "sister present",
                            "planned_memory_ids": [cx.memories[4]["id"]] }),
                )
                .await
                .expect(StatusCode::CREATED);
            let sid = id(&s.json());
            let live = h
                .post_if(&format!("/sessions/{sid}/start"), &tok, s.version(), json!({}))
                .await
                .expect(StatusCode::OK);
            let added = h
                .post_if(
                    &format!("/sessions/{sid}/amendments"),
                    &tok,
                    live.version(),
                    json!({ "action": "add_memory", "memory": memory("Singing in the choir", "older adult", 1998) }),
                )
                .await
                .expect(StatusCode::OK);
            let new_memory = added.json()["memory"]["id"].clone();
            let ended = h
                .post_if(
                    &format!("/sessions/{sid}/end"),
                    &tok,
                    added.version(),
                    json!({ "overall_impression": "Sang along", "participation_score": 9, "repeat_recommended": true,
                            "memory_outcomes": [
                                { "memory_id": cx.memories[4]["id"], "observed_preservation": "at risk", "emotional_reaction": "positive" },
                                { "memory_id": new_memory, "observed_preservation": "preserved", "emotional_reaction": "positive" } ] }),
                )
                .await
                .expect(StatusCode::OK)
                .json();
            assert_eq!(ended["session"]["status"], "completed");
            assert_eq!(array(&ended["session"]["amendment_log"]).len(), 1);
            assert_eq!(array(&ended["report"]["memory_outcomes"]).len(), 2);
            let catalog = h.get(&format!("/patients/{pid}/memories"), &tok).await.json();
            assert!(array(&catalog)
                .iter()
                .any(|m| m["description"] == "Singing in the choir"));
        }
        8 => {
            let a = h
                .post(
                    &format!("/patients/{pid}/assessments"),
                    &tok,
                    json!({ "assessed_at": "2024-03-01", "diagnosis_type": "Alzheimer's disease", "gds_stage": 4,
                            "instrument_results": [{ "instrument_name": "MMSE", "score": 22, "range_min": 0, "range_max": 30 }],
                            "nonstandard_instruments": "Clock drawing", "overall_impression": "worsened" }),
                )
                .await
                .expect(StatusCode::CREATED);
            let aid = id(&a.json());
            let e = h
                .patch(
                    &format!("/assessments/{aid}"),
                    &tok,
                    a.version(),
                    json!({ "observations": "More disoriented in the evenings" }),
                )
                .await
                .expect(StatusCode::OK)
                .json();
            assert_eq!(e["observations"], "More disoriented in the evenings");
            let series = h
                .get(&format!("/patients/{pid}/evolution?instrument=MMSE"), &tok)
                .await
                .expect(StatusCode::OK)
                .json();
            let scores: Vec<_> = array(&series).iter().map(|p| p["score"].as_f64().unwrap()).collect();
            assert_eq!(scores, [24.0, 22.0]);
        }
        9 => {
            let p = h
                .post(
                    "/patients",
                    &tok,
                    json!({ "display_name": "Manuel Otero", "file_number": "H-2002", "marital_status": "married",
                            "employment_history": "Fisherman", "leisure_interests": ["cards"] }),
                )
                .await
                .expect(StatusCode::CREATED)
                .json();
            let mine = h.get("/patients", &tok).await.json();
            assert!(array(&mine).iter().any(|x| x["id"] == p["id"]));
            cx.pid = id(&p);
        }
        10 => {
            let rp = h
                .post(
                    &format!("/patients/{pid}/related-persons"),
                    &tok,
                    json!({ "display_name": "Carmen Otero", "relationship_type": "wife", "is_caregiver": true,
                            "contact_email": "carmen@family.example", "remarks": "Main caregiver, visits daily" }),
                )
                .await
                .expect(StatusCode::CREATED)
                .json();
            let mut m = memory("Wedding in Muros", "young adult", 1966);
            m["related_person_ids"] = json!([rp["id"]]);
            h.post(&format!("/patients/{pid}/memories"), &tok, m)
                .await
                .expect(StatusCode::CREATED);
            let linked = h
                .get(
                    &format!(
                        "/patients/{pid}/memories?related_persons={}",
                        rp["id"].as_str().unwrap()
                    ),
                    &tok,
                )
                .await
                .expect(StatusCode::OK)
                .json();
            assert_eq!(array(&linked).len(), 1);
            assert_eq!(rp["is_caregiver"], true);
        }
        _ => unreachable!(),
    }
}

/// Runs all eleven tasks in order. Returns each task's name and duration.
pub async fn run(h: &Harness) -> Vec<(&'static str, Duration)> {
    let mut cx = caseload(h).await;
    let mut timings = Vec::new();
    for (n, name) in TASKS.iter().enumerate() {
        let t = Instant::now();
        task(n, &mut cx).await;
        timings.push((*name, t.elapsed()));
    }
    timings
}
