//! Discourse management: intent routing, the tale question loop, the
//! emotion chat, active listening and recommendation.

mod engine;
pub mod generation;
mod questions;
mod recommend;
mod session;

pub use engine::{
    train_classifiers, Command, Engine, EngineError, EngineParts, Knowledge, SessionStart, Settings, TurnOutcome,
    ACK, ASK_BODY, ASK_EMOTIONS, ASK_QUERY, ASK_TITLE, CHAT_OPENING, CHAT_PROMPT, GOODBYE, HELP, NOTHING_DETECTED,
    NO_RESULTS, PICK_OR_REFINE, WELCOME,
};
pub use generation::{
    active_listen, extractive_summary, summarize_tale, DisabledGenerator, GenError, RecordingGenerator,
    StubBehavior, TextGenerator,
};
pub use questions::{
    closed_emotion_question, detect_names, entity_questions, generate_tale_questions, is_negative, FollowupRule,
    Question, QuestionKind,
};
pub use recommend::{recommend, Recommendation};
pub use session::{Mode, Reply, Session, SessionView, TaleHit};
