mod common;

use common::{scenario, Harness};

#[tokio::test]
async fn eleven_console_tasks_succeed() {
    let h = Harness::new();
    let timings = scenario::run(&h).await;
    assert_eq!(timings.len(), scenario::TASKS.len());
}
