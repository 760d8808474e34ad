mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use proptest::prelude::*;
use talechat_core::clock::ManualClock;
use talechat_core::monitor::{
    emotion_stats, parse_conversation, parse_interactions, timeline, valence_split, AgeBucket, ConversationLog,
    Gender, Interaction, Monitor, MonitorError, RiskCategory, RiskLexicon, Segment, SelectionContext,
    SelectionEvent, UserProfile,
};
use talechat_core::taxonomy::{Emotion, Valence};
use talechat_core::xml::representable;

fn risk() -> RiskLexicon {
    RiskLexicon::load(&common::fixtures_dir().join("risk.toml")).unwrap()
}

fn monitor(dir: &std::path::Path) -> Monitor {
    let clock = Arc::new(ManualClock::new(common::start_time(), Duration::seconds(1)));
    Monitor::open(dir, risk(), clock).unwrap()
}

// ---- conversation logs ---------------------------------------------------

#[test]
fn exemplar_interaction_is_bit_exact() {
    let i = Interaction {
        date: Utc.with_ymd_and_hms(2023, 5, 25, 14, 41, 0).unwrap(),
        user: "atg9".into(),
        prompt: "Tell me if you would have done the same or something similar".into(),
        answer: "Yes, sometimes it is hard for me to ignore hurtful comments".into(),
    };
    assert_eq!(
        i.to_xml(),
        "<interaction><date>25/05/2023 14:41:00</date><user>atg9</user>\
         <CuentosIE>Tell me if you would have done the same or something similar</CuentosIE>\
         <answer>Yes, sometimes it is hard for me to ignore hurtful comments</answer></interaction>"
    );
    assert_eq!(parse_interactions(&i.to_xml()).unwrap(), vec![i]);
}

#[test]
fn special_characters_are_escaped() {
    let i = Interaction {
        date: common::start_time(),
        user: "u0001".into(),
        prompt: "a < b & c > d".into(),
        answer: "\"quoted\" 'single'".into(),
    };
    let xml = i.to_xml();
    assert!(xml.contains("<CuentosIE>a &lt; b &amp; c &gt; d</CuentosIE>"), "{xml}");
    assert_eq!(parse_interactions(&xml).unwrap(), vec![i]);
}

#[test]
fn two_appends_parse_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut log = ConversationLog::create(dir.path(), "u0001", "s000001").unwrap();
    let a = Interaction {
        date: common::start_time(),
        user: "u0001".into(),
        prompt: "first".into(),
        answer: "one".into(),
    };
    let b = Interaction {
        date: common::start_time() + Duration::seconds(5),
        prompt: "second".into(),
        answer: "two".into(),
        ..a.clone()
    };
    log.append(&a).unwrap();
    log.append(&b).unwrap();
    let src = std::fs::read_to_string(log.path()).unwrap();
    let conv = parse_conversation(&src).unwrap();
    assert_eq!(conv.interactions, vec![a, b]);
    assert!(!conv.closed);
    log.close().unwrap();
    let conv = parse_conversation(&std::fs::read_to_string(log.path()).unwrap()).unwrap();
    assert!(conv.closed);
    assert_eq!(conv.user, "u0001");
    assert_eq!(conv.session, "s000001");
    assert!(log.append(&conv.interactions[0]).is_err(), "closed logs reject appends");
}

fn text_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        "\\PC{0,40}",
        "[<>&\"' \\n\\ta-z]{0,40}",
        prop::collection::vec(any::<char>(), 0..40).prop_map(|cs| cs.into_iter().collect()),
    ]
    .prop_map(|s| representable(&s))
}

fn interaction_strategy() -> impl Strategy<Value = Interaction> {
    (0i64..4_000_000_000, "[a-z0-9 _-]{1,12}", text_strategy(), text_strategy()).prop_map(|(secs, user, prompt, answer)| {
        Interaction {
            date: Utc.timestamp_opt(secs, 0).unwrap(),
            user,
            prompt,
            answer,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn interactions_round_trip(i in interaction_strategy()) {
        prop_assert_eq!(parse_interactions(&i.to_xml()).unwrap(), vec![i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn logs_only_grow(items in prop::collection::vec(interaction_strategy(), 1..12)) {
        let dir = tempfile::tempdir().unwrap();
        let mut log = ConversationLog::create(dir.path(), "user one", "s000001").unwrap();
        let mut previous = std::fs::read(log.path()).unwrap();
        for i in &items {
            log.append(i).unwrap();
            let now = std::fs::read(log.path()).unwrap();
            prop_assert!(now.len() > previous.len());
            prop_assert!(now.starts_with(&previous), "earlier bytes were rewritten");
            previous = now;
        }
        log.close().unwrap();
        let now = std::fs::read(log.path()).unwrap();
        prop_assert!(now.starts_with(&previous));
        let conv = parse_conversation(&String::from_utf8(now).unwrap()).unwrap();
        prop_assert_eq!(conv.interactions, items);
    }
}

// ---- risk -------------------------------------------------------------------

const RISK_ROWS: [&str; 3] = [
    "I'm tired of living",
    "Every day it is harder to continue",
    "There are times I would like to end it all",
];
const BENIGN: &str = "No no there is nothing that worries me, for the moment the day is going well for me";

#[test]
fn documented_excerpts_are_flagged() {
    let lex = risk();
    for row in RISK_ROWS {
        assert_eq!(lex.detect(row).map(|(c, _)| c), Some(RiskCategory::SuicideSelfHarm), "{row}");
    }
    assert_eq!(lex.detect(BENIGN), None);
}

#[test]
fn highest_severity_wins() {
    let lex = risk();
    let (cat, phrase) = lex.detect("they laugh at me and I feel empty inside, I want to die").unwrap();
    assert_eq!(cat, RiskCategory::SuicideSelfHarm);
    assert_eq!(phrase, "want to die");
    assert_eq!(lex.detect("they laugh at me").unwrap().0, RiskCategory::Bullying);
    assert_eq!(lex.detect("I feel empty inside").unwrap().0, RiskCategory::Depression);
}

#[test]
fn empty_risk_lexicon_is_a_configuration_error() {
    assert!(RiskLexicon::parse("# nothing here\n[depression]\n").is_err());
}

#[test]
fn alarm_shows_at_next_login_until_acknowledged() {
    let ws = common::Workspace::new();
    let (engine, _) = ws.engine();
    let user = engine.monitor().register(16, Gender::Female, true).unwrap().id;

    let first = engine.open_session(Some(&user)).unwrap();
    assert!(first.alarm.is_none());
    let o = engine.handle_message(&first.session, RISK_ROWS[0]).unwrap();
    assert!(o.storage_errors.is_empty());
    // the reply to the user is unaffected by the flag
    assert!(!o.replies.iter().any(|r| r.text.to_lowercase().contains("alarm")));
    engine.handle_message(&first.session, "bye").unwrap();

    let second = engine.open_session(Some(&user)).unwrap();
    let alarm = second.alarm.clone().expect("pending alarm at next login");
    assert_eq!(alarm.category, RiskCategory::SuicideSelfHarm);
    assert_eq!(serde_json::to_string(&second).unwrap().matches("suicide_self_harm").count(), 1);
    assert_eq!(engine.monitor().alerts().len(), 1);

    assert_eq!(engine.monitor().acknowledge_alarms(&user).unwrap(), 1);
    assert!(engine.open_session(Some(&user)).unwrap().alarm.is_none());
    assert!(engine.monitor().alerts().is_empty());
    // history is kept
    assert_eq!(engine.monitor().profile(&user).unwrap().flags.len(), 1);
}

#[test]
fn anonymous_users_get_no_stored_flags() {
    let dir = tempfile::tempdir().unwrap();
    let m = monitor(dir.path());
    let f = m.scan_risk("non-registered user", RISK_ROWS[2]).unwrap();
    assert!(f.is_some());
    assert!(m.check_alarm("non-registered user").is_none());
    assert!(m.profiles().is_empty());
}

#[test]
fn hidden_users_are_not_in_supervisor_alerts() {
    let dir = tempfile::tempdir().unwrap();
    let m = monitor(dir.path());
    let hidden = m.register(30, Gender::Male, false).unwrap().id;
    m.scan_risk(&hidden, RISK_ROWS[1]).unwrap();
    assert!(m.check_alarm(&hidden).is_some());
    assert!(m.alerts().is_empty());
}

fn vary_case_and_accents(text: &str, mask: &[u8]) -> String {
    text.chars()
        .zip(mask.iter().cycle())
        .map(|(c, m)| {
            let c = if m & 1 == 1 { c.to_ascii_uppercase() } else { c };
            match (m & 2 == 2, c) {
                (true, 'a') => "á".to_string(),
                (true, 'e') => "é".to_string(),
                (true, 'i') => "í".to_string(),
                (true, 'o') => "ó".to_string(),
                (true, 'u') => "ü".to_string(),
                (true, 'E') => "É".to_string(),
                (true, 'A') => "À".to_string(),
                (true, 'n') => "n\u{0303}".to_string(),
                _ => c.to_string(),
            }
        })
        .collect()
}

proptest! {
    #[test]
    fn risk_detection_ignores_case_and_diacritics(
        row in prop::sample::select(vec![RISK_ROWS[0], RISK_ROWS[1], RISK_ROWS[2], BENIGN, "they make fun of me", "nothing makes sense"]),
        mask in prop::collection::vec(0u8..4, 1..16),
    ) {
        let lex = risk();
        let varied = vary_case_and_accents(row, &mask);
        prop_assert_eq!(
            lex.detect(row).map(|(c, p)| (c, p.to_string())),
            lex.detect(&varied).map(|(c, p)| (c, p.to_string()))
        );
    }
}

// ---- selection events and statistics --------------------------------------

fn ev(user: &str, e: Emotion, minute: i64) -> SelectionEvent {
    SelectionEvent::new(
        common::start_time() + Duration::minutes(minute),
        user,
        e.id(),
        SelectionContext::SearchFilter,
    )
    .unwrap()
}

fn no_profiles(_: &str) -> Option<&'static UserProfile> {
    None
}

#[test]
fn four_events_hand_count() {
    let events = vec![
        ev("u1", Emotion::Joy, 0),
        ev("u1", Emotion::Joy, 1),
        ev("u1", Emotion::Calm, 2),
        ev("u1", Emotion::Fear, 3),
    ];
    let s = emotion_stats(&events, no_profiles, Segment::all());
    assert_eq!(s.percentage(Emotion::Joy), 50.0);
    assert_eq!(s.percentage(Emotion::Calm), 25.0);
    assert_eq!(s.percentage(Emotion::Fear), 25.0);
    assert_eq!(s.percentages.len(), 30);

    let one = emotion_stats(&events[..1], no_profiles, Segment::all());
    assert_eq!(one.percentage(Emotion::Joy), 100.0);
}

#[test]
fn engineered_log_gives_56_44() {
    let positives: Vec<Emotion> = Emotion::ALL.iter().copied().filter(|e| e.valence() == Valence::Positive).collect();
    let negatives: Vec<Emotion> = Emotion::ALL.iter().copied().filter(|e| e.valence() == Valence::Negative).collect();
    let mut events = Vec::new();
    for i in 0..14 {
        events.push(ev("u1", positives[i % positives.len()], i as i64));
    }
    for i in 0..11 {
        events.push(ev("u1", negatives[i % negatives.len()], 100 + i as i64));
    }
    let s = emotion_stats(&events, no_profiles, Segment::all());
    let v = valence_split(&s);
    assert!((v.positive - 56.0).abs() < 1e-9, "{v:?}");
    assert!((v.negative - 44.0).abs() < 1e-9, "{v:?}");
}

#[test]
fn valence_symmetry_and_single_class() {
    let joy_only = vec![ev("u", Emotion::Joy, 0), ev("u", Emotion::Joy, 1)];
    let v = valence_split(&emotion_stats(&joy_only, no_profiles, Segment::all()));
    assert_eq!((v.positive, v.negative), (100.0, 0.0));
    let even = vec![ev("u", Emotion::Calm, 0), ev("u", Emotion::Anger, 1)];
    let v = valence_split(&emotion_stats(&even, no_profiles, Segment::all()));
    assert_eq!((v.positive, v.negative), (50.0, 50.0));
}

#[test]
fn age_bucket_boundaries() {
    assert_eq!(AgeBucket::of(17), AgeBucket::Under18);
    assert_eq!(AgeBucket::of(18), AgeBucket::From18To23);
    assert_eq!(AgeBucket::of(23), AgeBucket::From18To23);
    assert_eq!(AgeBucket::of(24), AgeBucket::Over23);
}

#[test]
fn segments_filter_by_gender_and_age() {
    let dir = tempfile::tempdir().unwrap();
    let m = monitor(dir.path());
    let f20 = m.register(20, Gender::Female, false).unwrap().id;
    let f30 = m.register(30, Gender::Female, false).unwrap().id;
    let m17 = m.register(17, Gender::Male, false).unwrap().id;
    m.select(&f20, Emotion::Tension, SelectionContext::SearchFilter).unwrap();
    m.select(&f20, Emotion::Doubt, SelectionContext::SearchFilter).unwrap();
    m.select(&f30, Emotion::Joy, SelectionContext::SearchFilter).unwrap();
    m.select(&m17, Emotion::Calm, SelectionContext::SearchFilter).unwrap();

    let s = m.emotion_stats("female:18-23".parse().unwrap());
    assert_eq!(s.total, 2);
    assert_eq!(s.percentage(Emotion::Tension), 50.0);
    assert_eq!(m.emotion_stats("female".parse().unwrap()).total, 3);
    assert_eq!(m.emotion_stats("under_18".parse().unwrap()).total, 1);
    let empty = m.emotion_stats("male:over_23".parse().unwrap());
    assert!(empty.empty);
    assert!(empty.percentages.iter().all(|(_, p)| *p == 0.0));
    assert!("robot:18-23".parse::<Segment>().is_err());
}

#[test]
fn selection_events_validate_and_count() {
    let dir = tempfile::tempdir().unwrap();
    let m = monitor(dir.path());
    let u = m.register(20, Gender::Female, false).unwrap().id;
    for _ in 0..3 {
        let e = SelectionEvent::new(m.now(), &u, "joy", SelectionContext::SearchFilter).unwrap();
        assert!(m.record_selection(e).unwrap());
    }
    assert_eq!(m.emotion_stats(Segment::all()).count(Emotion::Joy), 3);
    assert!(matches!(
        SelectionEvent::new(m.now(), &u, "schadenfreude", SelectionContext::SearchFilter),
        Err(MonitorError::BadEvent(_))
    ));
    let times: Vec<_> = m.selections().iter().map(|e| e.timestamp).collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]));

    // the log survives a reopen
    drop(m);
    let m = monitor(dir.path());
    assert_eq!(m.selections().len(), 3);
}

#[test]
fn timeline_buckets_by_window() {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::fixed(common::start_time()));
    let m = Monitor::open(dir.path(), risk(), clock.clone()).unwrap();
    let u = m.register(20, Gender::Female, false).unwrap().id;
    m.select(&u, Emotion::Joy, SelectionContext::SearchFilter).unwrap();
    clock.advance(Duration::days(1));
    m.select(&u, Emotion::Fear, SelectionContext::SearchFilter).unwrap();

    let buckets = m.timeline(&u, Duration::days(1)).unwrap();
    assert_eq!(buckets.len(), 2);
    assert!(buckets.iter().all(|b| b.total == 1));
    assert!(buckets[0].start < buckets[1].start);
    assert!(matches!(m.timeline("non-registered user", Duration::days(1)), Err(MonitorError::NotRegistered(_))));
}

#[test]
fn registry_persists_only_the_anonymous_profile() {
    let dir = tempfile::tempdir().unwrap();
    let m = monitor(dir.path());
    let u = m.register(21, Gender::Female, true).unwrap().id;
    m.mark_read(&u, "sponge-cake").unwrap();
    m.scan_risk(&u, RISK_ROWS[0]).unwrap();
    let allowed: BTreeSet<&str> = ["id", "age", "gender", "visible_to_supervisor", "read_tales", "flags"].into();
    for entry in std::fs::read_dir(dir.path().join("users")).unwrap() {
        let raw = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&raw).unwrap();
        let keys: BTreeSet<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        assert!(keys.is_subset(&allowed), "unexpected profile fields {keys:?}");
    }
    assert!(matches!(m.register(4, Gender::Male, false), Err(MonitorError::BadAge(4))));
    assert!(matches!(m.register(121, Gender::Male, false), Err(MonitorError::BadAge(121))));
}

proptest! {
    #[test]
    fn percentages_sum_to_100_and_valence_partitions(
        picks in prop::collection::vec((0usize..30, 0usize..3), 1..200),
        segment_gender in prop::option::of(prop::sample::select(vec![Gender::Female, Gender::Male, Gender::Unspecified])),
        segment_age in prop::option::of(prop::sample::select(AgeBucket::ALL.to_vec())),
    ) {
        let profiles = [
            UserProfile { id: "a".into(), age: 15, gender: Gender::Female, visible_to_supervisor: false, read_tales: Default::default(), flags: vec![] },
            UserProfile { id: "b".into(), age: 20, gender: Gender::Male, visible_to_supervisor: false, read_tales: Default::default(), flags: vec![] },
            UserProfile { id: "c".into(), age: 40, gender: Gender::Unspecified, visible_to_supervisor: false, read_tales: Default::default(), flags: vec![] },
        ];
        let events: Vec<SelectionEvent> = picks
            .iter()
            .enumerate()
            .map(|(i, (e, u))| ev(&profiles[*u].id, Emotion::ALL[*e], i as i64))
            .collect();
        let segment = Segment { gender: segment_gender, age_bucket: segment_age };
        let s = emotion_stats(&events, |id| profiles.iter().find(|p| p.id == id), segment);
        let sum: f64 = s.percentages.iter().map(|(_, p)| p).sum();
        if s.empty {
            prop_assert_eq!(sum, 0.0);
        } else {
            prop_assert!((sum - 100.0).abs() <= 1e-9, "sum {}", sum);
            let v = valence_split(&s);
            prop_assert!((v.positive + v.negative - 100.0).abs() <= 1e-9);
        }
        let counted: usize = s.counts.iter().map(|(_, c)| c).sum();
        prop_assert_eq!(counted, s.total);

        let buckets = timeline(&events, "a", Duration::hours(1));
        let own = events.iter().filter(|e| e.user == "a").count();
        prop_assert_eq!(buckets.iter().map(|b| b.total).sum::<usize>(), own);
    }
}
