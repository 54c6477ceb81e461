mod common;

use common::{rendering, Harness};
use recuerdame_testkit::checks;

#[tokio::test]
async fn pdfs_are_stable_and_carry_their_fields() {
    let h = Harness::new();
    assert_eq!(rendering::documents(&h, 3).await, 3);
}

#[test]
fn storyboards_have_one_slide_per_card() {
    assert_eq!(checks::storyboard_identity(0x5B0A, 50).unwrap(), 50);
}
