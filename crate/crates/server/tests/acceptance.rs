//! Acceptance suite. Runs each criterion at its stated size and tolerance
//! and prints one PASS/FAIL line per criterion. Exits non-zero if any fail.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{authz, delivery, rendering, scenario, Harness};
use recuerdame_server::routes::{Scope, ROUTES};
use recuerdame_testkit::checks;

const SEED: u64 = 0x5EED_2024;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn(&tokio::runtime::Runtime) -> Outcome,
}

fn scenario_script(rt: &tokio::runtime::Runtime) -> Outcome {
    rt.block_on(async {
        let h = Harness::new();
        let timings = scenario::run(&h).await;
        if timings.len() != 11 {
            return Err(format!("{} of 11 tasks ran", timings.len()));
        }
        let slowest = timings.iter().max_by_key(|t| t.1).unwrap();
        Ok(format!("11/11 tasks, slowest \"{}\" {:?}", slowest.0, slowest.1))
    })
}

fn filter_oracle(_: &tokio::runtime::Runtime) -> Outcome {
    let s = checks::filter_equivalence(SEED, 1000)?;
    Ok(format!(
        "{} trials, 0 mismatches, {} memories scanned",
        s.trials, s.memories_scanned
    ))
}

fn session_machine(_: &tokio::runtime::Runtime) -> Outcome {
    let s = checks::session_machine(SEED, 10_000)?;
    if s.faults_injected == 0 {
        return Err("no end_session fault was injected".into());
    }
    Ok(format!(
        "{} sequences, {} events ({} accepted, {} rejected), {} injected end_session faults",
        s.sequences, s.events, s.accepted, s.rejected, s.faults_injected
    ))
}

fn archive_round_trip(_: &tokio::runtime::Runtime) -> Outcome {
    let s = checks::archive_round_trips(SEED, 100)?;
    if s.datasets != 100 {
        return Err(format!("{} of 100 datasets", s.datasets));
    }
    if s.corruptions_rejected != 100 {
        return Err(format!("only {} of 100 corruption trials ran", s.corruptions_rejected));
    }
    Ok(format!(
        "100 datasets deep-equal ({} entities, {} blobs); {} corrupted archives rejected with HASH_MISMATCH, nothing imported",
        s.entities, s.blobs, s.corruptions_rejected
    ))
}

fn rendering_checks(rt: &tokio::runtime::Runtime) -> Outcome {
    let docs = rt.block_on(async { rendering::documents(&Harness::new(), 5).await });
    let boards = checks::storyboard_identity(SEED, 200)?;
    Ok(format!("{docs} document kinds stable over 5 renders with every field present; {boards} storyboards hold the slide identity"))
}

fn authorization(rt: &tokio::runtime::Runtime) -> Outcome {
    let problems = authz::route_table_problems();
    if !problems.is_empty() {
        return Err(problems.join("; "));
    }
    let walked = rt.block_on(async {
        let h = Harness::new();
        let w = authz::world(&h);
        authz::forbidden_walk(&h, &w).await
    })?;
    let guarded = ROUTES.iter().filter(|r| matches!(r.scope, Scope::Patient(_))).count();
    if walked != guarded {
        return Err(format!("walked {walked} of {guarded} patient-scoped routes"));
    }
    Ok(format!(
        "0 unguarded routes; {walked} patient-scoped routes give an empty 403 to an unassigned therapist"
    ))
}

fn outbox(_: &tokio::runtime::Runtime) -> Outcome {
    let s = delivery::at_least_once(SEED, 100, 0.5, 25)?;
    Ok(format!(
        "100/100 Sent after {} rounds, {} transport calls, at most {} attempts each; all .eml files parse",
        s.rounds, s.transport_calls, s.max_attempts_used
    ))
}

fn main() {
    let criteria = [
        Criterion {
            name: "eleven-task API scenario",
            limit: Some(Duration::from_secs(60)),
            run: scenario_script,
        },
        Criterion {
            name: "filter oracle equivalence",
            limit: Some(Duration::from_secs(30)),
            run: filter_oracle,
        },
        Criterion {
            name: "session state machine",
            limit: None,
            run: session_machine,
        },
        Criterion {
            name: "archive round trip",
            limit: None,
            run: archive_round_trip,
        },
        Criterion {
            name: "rendering",
            limit: None,
            run: rendering_checks,
        },
        Criterion {
            name: "authorization completeness",
            limit: None,
            run: authorization,
        },
        Criterion {
            name: "outbox at-least-once",
            limit: None,
            run: outbox,
        },
    ];
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, c) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(|| (c.run)(&rt))) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let took = started.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if took >= limit => Err(format!("took {took:.2?}, limit {limit:?}")),
            (o, _) => o,
        };
        let limit = c.limit.map(|l| format!(" (limit {l:?})")).unwrap_or_default();
        match outcome {
            Ok(detail) => println!("criterion {} PASS {} [{took:.2?}{limit}]: {detail}", n + 1, c.name),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {} [{took:.2?}{limit}]: {why}", n + 1, c.name);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
