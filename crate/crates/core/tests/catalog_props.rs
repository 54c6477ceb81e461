use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use recuerdame_core::catalog::{
    filter_memories, search_memories, sort_memories, sort_related_persons, MemoryFilter, RelatedPersonSort, SortField,
    SortKey,
};
use recuerdame_core::domain::{LifeStage, PartialDate, RelatedPerson, RelatedPersonDraft};
use recuerdame_core::error::Error;
use recuerdame_core::ids::{PatientId, RelatedPersonId};
use recuerdame_testkit::checks;
use recuerdame_testkit::fixture::Fixture;
use recuerdame_testkit::{gen, oracle};

#[test]
fn filter_sort_search_and_selection_match_oracles() {
    let stats = checks::filter_equivalence(0xF17E, 300).unwrap();
    assert_eq!(stats.trials, 300);
    assert!(stats.matches > 0, "generator never produced a hit");
}

#[test]
fn empty_filter_is_identity_in_date_order() {
    let mut rng = StdRng::seed_from_u64(3);
    let cat = gen::catalog(&mut rng, 200);
    let all = filter_memories(&cat.memories, &MemoryFilter::default()).unwrap();
    assert_eq!(all.len(), cat.memories.len());
    assert_eq!(all, oracle::sort_oracle(&cat.memories, SortKey::DATE_ASC));
}

#[test]
fn reversed_bounds_are_invalid() {
    let f = MemoryFilter {
        date_from: Some(PartialDate::year(1950).unwrap()),
        date_to: Some(PartialDate::year(1940).unwrap()),
        ..MemoryFilter::default()
    };
    assert!(matches!(filter_memories(&[], &f), Err(Error::InvalidFilter(_))));
}

#[test]
fn blank_search_is_rejected() {
    assert!(matches!(search_memories(&[], "  "), Err(Error::EmptyQuery)));
}

#[test]
fn search_misses_and_self_matches() {
    let mut rng = StdRng::seed_from_u64(11);
    let cat = gen::catalog(&mut rng, 50);
    assert!(search_memories(&cat.memories, "ZZZ-no-match").unwrap().is_empty());
    for m in &cat.memories {
        assert!(search_memories(&cat.memories, &m.description).unwrap().contains(m));
    }
}

#[test]
fn childhood_family_on_a_200_memory_catalog() {
    let mut rng = StdRng::seed_from_u64(200);
    let mut cat = gen::catalog(&mut rng, 200);
    while cat.memories.len() < 200 {
        cat = gen::catalog(&mut rng, 200);
    }
    let f = MemoryFilter {
        life_stages: [LifeStage::Childhood].into(),
        categories: ["family".to_string()].into(),
        ..MemoryFilter::default()
    };
    let got = filter_memories(&cat.memories, &f).unwrap();
    let want: Vec<_> = oracle::filter_oracle(&cat.memories, &f, SortKey::DATE_ASC);
    assert_eq!(got, want);
    assert!(got
        .iter()
        .all(|m| m.life_stage == LifeStage::Childhood && m.categories.contains("family")));
}

#[test]
fn preservation_sort_on_100_memories_matches_comparator() {
    let mut rng = StdRng::seed_from_u64(100);
    let cat = gen::catalog(&mut rng, 100);
    let key = SortKey::asc(SortField::PreservationStatus);
    assert_eq!(
        sort_memories(cat.memories.clone(), key),
        oracle::sort_oracle(&cat.memories, key)
    );
}

#[test]
fn missing_locations_sort_last_both_ways() {
    let mut rng = StdRng::seed_from_u64(5);
    let cat = gen::catalog(&mut rng, 80);
    for key in [SortKey::asc(SortField::Location), SortKey::desc(SortField::Location)] {
        let sorted = sort_memories(cat.memories.clone(), key);
        let first_none = sorted.iter().position(|m| m.location.is_none()).unwrap_or(sorted.len());
        assert!(sorted[first_none..].iter().all(|m| m.location.is_none()));
    }
}

fn person(name: &str, rel: &str, id: u128) -> RelatedPerson {
    RelatedPerson {
        id: RelatedPersonId::from_u128(id),
        patient_id: PatientId::from_u128(1),
        display_name: name.to_string(),
        relationship_type: rel.to_string(),
        contact_email: None,
        profession: None,
        remarks: None,
        is_caregiver: false,
        record_version: 1,
    }
}

#[test]
fn relationship_sort_groups_children_before_spouse() {
    let people = vec![
        person("Ana", "child", 3),
        person("Juan", "spouse", 1),
        person("Bea", "Child", 2),
    ];
    let sorted = sort_related_persons(people, RelatedPersonSort::RelationshipType);
    let rels: Vec<_> = sorted.iter().map(|p| p.relationship_type.to_lowercase()).collect();
    assert_eq!(rels, ["child", "child", "spouse"]);
    assert_eq!(sorted[0].id, RelatedPersonId::from_u128(2));
}

#[test]
fn caregiver_registration_shows_up_in_listing() {
    let fx = Fixture::new();
    assert!(fx
        .clinic
        .list_related_persons(fx.patient.id, RelatedPersonSort::Name)
        .unwrap()
        .is_empty());
    let rp = fx
        .clinic
        .create_related_person(
            fx.patient.id,
            RelatedPersonDraft {
                display_name: "Lucía".to_string(),
                relationship_type: "professional-caregiver".to_string(),
                is_caregiver: true,
                ..RelatedPersonDraft::default()
            },
        )
        .unwrap();
    let listed = fx
        .clinic
        .list_related_persons(fx.patient.id, RelatedPersonSort::RelationshipType)
        .unwrap();
    assert_eq!(listed, vec![rp]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adding_a_clause_never_enlarges_the_result(seed in any::<u64>(), extra in 0usize..4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let cat = gen::catalog(&mut rng, 80);
        let base = gen::filter(&mut rng, &cat);
        let other = gen::filter(&mut rng, &cat);
        let mut narrowed = base.clone();
        match extra {
            0 if !other.life_stages.is_empty() && base.life_stages.is_empty() => narrowed.life_stages = other.life_stages,
            1 if base.location_contains.is_none() => narrowed.location_contains = other.location_contains,
            2 if base.preservation_statuses.is_empty() => narrowed.preservation_statuses = other.preservation_statuses,
            3 if base.emotion_valences.is_empty() => narrowed.emotion_valences = other.emotion_valences,
            _ => {}
        }
        let wide = filter_memories(&cat.memories, &base).unwrap();
        let narrow = filter_memories(&cat.memories, &narrowed).unwrap();
        prop_assert!(narrow.iter().all(|m| wide.contains(m)));
    }

    #[test]
    fn sorting_is_an_idempotent_permutation(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let cat = gen::catalog(&mut rng, 60);
        let key = gen::sort_key(&mut rng);
        let once = sort_memories(cat.memories.clone(), key);
        let twice = sort_memories(once.clone(), key);
        prop_assert_eq!(&once, &twice);
        let mut a: Vec<_> = once.iter().map(|m| m.id).collect();
        let mut b: Vec<_> = cat.memories.iter().map(|m| m.id).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn filtering_does_not_touch_the_catalog(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let cat = gen::catalog(&mut rng, 60);
        let before = cat.memories.clone();
        let f = gen::filter(&mut rng, &cat);
        let _ = filter_memories(&cat.memories, &f).unwrap();
        prop_assert_eq!(before, cat.memories);
    }
}
