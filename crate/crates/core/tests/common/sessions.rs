//! Randomized end-to-end sessions used by the recommendation safety checks.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use talechat_core::classify::{parse_lexicon, Source};
use talechat_core::dialogue::{Engine, Mode};
use talechat_core::monitor::Gender;
use talechat_core::taxonomy::Emotion;

/// Hand-written example posts from the fixture emotion lexicons, plus a
/// neutral one.
pub fn chat_lines() -> Vec<String> {
    let dir = super::fixtures_dir().join("lexicons/emotions");
    let mut lines = Vec::new();
    for e in Emotion::ALL {
        let src = std::fs::read_to_string(dir.join(format!("{}.txt", e.id()))).unwrap();
        lines.extend(
            parse_lexicon(e.id(), &src)
                .unwrap()
                .into_iter()
                .filter(|d| d.source == Source::Manual)
                .map(|d| d.text),
        );
    }
    lines.push("the bus arrives at noon".into());
    lines
}

/// Runs `sessions` random sessions (random user age, random tale openings,
/// random chat posts, then `/recommend`) and checks every recommendation.
/// Returns how many sessions produced at least one recommendation.
pub fn recommendation_sessions(engine: &Engine, sessions: usize, seed: u64) -> Result<usize, String> {
    let lines = chat_lines();
    let tale_ids: Vec<String> = engine.knowledge().corpus.tales.keys().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut non_empty = 0;
    let err = |e: talechat_core::dialogue::EngineError| e.to_string();

    for _ in 0..sessions {
        let user = if rng.random_bool(0.75) {
            let gender = *[Gender::Female, Gender::Male, Gender::Unspecified].choose(&mut rng).unwrap();
            Some(engine.monitor().register(rng.random_range(5..=40), gender, false).map_err(|e| e.to_string())?)
        } else {
            None
        };
        let s = engine.open_session(user.as_ref().map(|u| u.id.as_str())).map_err(err)?.session;
        let mut opened = BTreeSet::new();
        engine.handle_command(&s, "/chat").map_err(err)?;
        for _ in 0..rng.random_range(0..8) {
            if rng.random_bool(0.3) {
                let id = tale_ids.choose(&mut rng).unwrap();
                let o = engine.handle_command(&s, &format!("/open {id}")).map_err(err)?;
                if let Mode::Reading { tale, .. } = o.mode {
                    opened.insert(tale);
                }
                if rng.random_bool(0.5) {
                    engine.handle_command(&s, "/chat").map_err(err)?;
                }
            } else {
                engine.handle_message(&s, lines.choose(&mut rng).unwrap()).map_err(err)?;
            }
        }
        let detected = engine.session_view(&s).map_err(err)?.detected;
        let o = engine.handle_command(&s, "/recommend").map_err(err)?;
        let recommended: Vec<String> = o.replies.iter().flat_map(|r| r.tales.iter().map(|t| t.id.clone())).collect();

        let mut read = opened;
        let age = user.as_ref().map(|u| u.age);
        if let Some(u) = &user {
            read.extend(engine.monitor().profile(&u.id).ok_or("profile vanished")?.read_tales);
        }
        if !recommended.is_empty() {
            non_empty += 1;
        }
        for id in &recommended {
            let tale = engine.tale(id).ok_or_else(|| format!("unknown tale {id}"))?;
            if read.contains(id) {
                return Err(format!("{id} was already read"));
            }
            if !tale.suitable_for(age) {
                return Err(format!("{id} is above age {age:?}"));
            }
            if !tale.is_approved() {
                return Err(format!("{id} is not approved"));
            }
            if !tale.emotions.iter().any(|e| detected.get(e).is_some_and(|c| *c > 0)) {
                return Err(format!("{id} shares no detected emotion with {detected:?}"));
            }
        }
        engine.handle_message(&s, "bye").map_err(err)?;
    }
    Ok(non_empty)
}
