//! The discourse manager: owns the knowledge base, the classifiers and the
//! monitor, and turns each user post into replies.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;

use super::generation::{active_listen, summarize_tale, TextGenerator};
use super::questions::{generate_tale_questions, is_negative, FollowupRule};
use super::recommend::{recommend, Recommendation};
use super::session::{Mode, Reply, Session, SessionView, TaleHit};
use crate::classify::{build_training_set, ClassifyError, EmotionClassifier, Intent, IntentClassifier};
use crate::clock::Clock;
use crate::config::{Config, ConfigError, DEFAULT_OPEN_QUESTIONS};
use crate::corpus::{Corpus, CorpusError, ReviewDecision, Tale, TaleDraft, TALES_FILE};
use crate::monitor::{
    ConversationLog, Interaction, Monitor, MonitorError, RiskFlag, RiskLexicon, SelectionContext, ANONYMOUS_USER,
};
use crate::retrieval::{Query, QueryParser, RetrievalError, TaleIndex};
use crate::taxonomy::{join_display, Emotion, ThemeId};
use crate::textproc::{StopwordList, TextError};

pub const WELCOME: &str = "Hello! I can search tales for you, chat with you about emotions, or receive a tale of your own. What would you like to do?";
pub const HELP: &str = "I am not sure what you would like to do. You can ask me to search for tales, to chat about emotions, to add a tale, or say goodbye.";
pub const CHAT_OPENING: &str = "Hello, how are you today? Please, let's talk about whatever you want. The more we chat, the better I can recommend a tale that's right for you";
pub const CHAT_PROMPT: &str = "I see. Could you tell me a little more about how you feel?";
pub const ASK_EMOTIONS: &str = "OK, then tell me which emotions you think that tale deals with";
pub const GOODBYE: &str = "Goodbye! Thank you for talking with me. Come back whenever you want.";
pub const ASK_QUERY: &str = "What kind of tale are you looking for? You can mention emotions, psychological themes or words from the title or the content.";
pub const NO_RESULTS: &str = "I could not find any tale for that. Try other words, an emotion or a psychological theme.";
pub const PICK_OR_REFINE: &str = "Type the number of a tale to read it, or give me more words to narrow the search.";
pub const NOTHING_DETECTED: &str = "We have not talked enough yet for me to know which tales suit you. Tell me how you feel, or ask me to search for tales.";
pub const ACK: &str = "Thank you for your answer.";
pub const ASK_TITLE: &str = "Great! What is the title of your tale?";
pub const ASK_BODY: &str = "Now write or paste the text of the tale.";

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("{context}: {source}")]
    Classify {
        context: String,
        #[source]
        source: ClassifyError,
    },
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("session '{0}' is closed")]
    SessionClosed(String),
    #[error("unknown user '{0}'")]
    UnknownUser(String),
    #[error("unknown command '{0}' (expected /search, /chat, /exit, /recommend or /open <id>)")]
    BadCommand(String),
}

/// Tunables taken from the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub c: f64,
    pub max_results: usize,
    pub open_questions: Vec<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_results: 5,
            open_questions: DEFAULT_OPEN_QUESTIONS.iter().map(|q| q.to_string()).collect(),
        }
    }
}

/// Corpus plus the indexes built from it. Replaced wholesale on change.
#[derive(Debug)]
pub struct Knowledge {
    pub corpus: Corpus,
    pub tales: TaleIndex,
    pub quotes: TaleIndex,
    pub parser: QueryParser,
}

impl Knowledge {
    pub fn build(corpus: Corpus, stopwords: &StopwordList) -> Self {
        let tales = TaleIndex::from_tales(corpus.tales.values(), stopwords);
        let quotes = TaleIndex::from_quotes(corpus.quotes.values(), stopwords);
        let parser = QueryParser {
            stopwords: stopwords.clone(),
            themes: corpus.themes.clone(),
        };
        Self {
            corpus,
            tales,
            quotes,
            parser,
        }
    }
}

/// Everything an [`Engine`] is assembled from.
pub struct EngineParts {
    pub corpus: Corpus,
    /// Where corpus changes are written back; `None` keeps them in memory.
    pub corpus_dir: Option<PathBuf>,
    pub stopwords: StopwordList,
    pub emotions: EmotionClassifier,
    pub intents: IntentClassifier,
    pub monitor: Monitor,
    pub generator: Arc<dyn TextGenerator>,
    pub settings: Settings,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionStart {
    pub session: String,
    pub user: String,
    /// Pending risk alarm of a registered user, shown once at session open.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alarm: Option<RiskFlag>,
    pub replies: Vec<Reply>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TurnOutcome {
    pub session: String,
    /// Intent detected for a message; absent for commands.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intent: Option<Intent>,
    pub mode: Mode,
    pub replies: Vec<Reply>,
    pub closed: bool,
    /// Persistence failures during the turn. They never change the replies;
    /// callers report them to the operator.
    #[serde(skip)]
    pub storage_errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Search(Option<String>),
    Chat,
    Exit,
    Recommend,
    Open(String),
}

impl Command {
    pub fn parse(text: &str) -> Result<Self, EngineError> {
        let t = text.trim();
        let (head, rest) = t.split_once(char::is_whitespace).unwrap_or((t, ""));
        let rest = rest.trim();
        match head {
            "/search" => Ok(Command::Search((!rest.is_empty()).then(|| rest.to_string()))),
            "/chat" => Ok(Command::Chat),
            "/exit" => Ok(Command::Exit),
            "/recommend" => Ok(Command::Recommend),
            "/open" if !rest.is_empty() => Ok(Command::Open(rest.to_string())),
            _ => Err(EngineError::BadCommand(t.to_string())),
        }
    }
}

struct SessionSlot {
    session: Session,
    log: ConversationLog,
}

/// Mutable context of one turn.
struct Turn<'a> {
    engine: &'a Engine,
    knowledge: Arc<Knowledge>,
    session: &'a mut Session,
    replies: Vec<Reply>,
    errors: Vec<String>,
}

pub struct Engine {
    knowledge: RwLock<Arc<Knowledge>>,
    corpus_dir: Option<PathBuf>,
    stopwords: StopwordList,
    emotions: EmotionClassifier,
    intents: IntentClassifier,
    monitor: Monitor,
    generator: Arc<dyn TextGenerator>,
    settings: Settings,
    sessions: Mutex<HashMap<String, Arc<Mutex<SessionSlot>>>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("corpus_dir", &self.corpus_dir)
            .field("settings", &self.settings)
            .finish_non_exhaustive()
    }
}

fn classify_err(context: impl Into<String>) -> impl FnOnce(ClassifyError) -> EngineError {
    let context = context.into();
    move |source| EngineError::Classify { context, source }
}

impl Engine {
    pub fn new(parts: EngineParts) -> Self {
        let knowledge = Knowledge::build(parts.corpus, &parts.stopwords);
        Self {
            knowledge: RwLock::new(Arc::new(knowledge)),
            corpus_dir: parts.corpus_dir,
            stopwords: parts.stopwords,
            emotions: parts.emotions,
            intents: parts.intents,
            monitor: parts.monitor,
            generator: parts.generator,
            settings: parts.settings,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    /// Loads the corpus, trains both classifiers from their lexicons and
    /// opens the monitoring store. Any failure aborts startup.
    pub fn from_config(cfg: &Config, clock: Arc<dyn Clock>, generator: Arc<dyn TextGenerator>) -> Result<Self, EngineError> {
        cfg.validate()?;
        let corpus = Corpus::load(&cfg.corpus_dir)?;
        let stopwords = match &cfg.stopwords {
            Some(p) => StopwordList::load(p)?,
            None => StopwordList::empty(),
        };
        let (emotions, intents) = train_classifiers(cfg)?;
        let risk = RiskLexicon::load(&cfg.lexicons.risk)?;
        let monitor = Monitor::open(&cfg.data_dir, risk, clock)?;
        Ok(Self::new(EngineParts {
            corpus,
            corpus_dir: Some(cfg.corpus_dir.clone()),
            stopwords,
            emotions,
            intents,
            monitor,
            generator,
            settings: Settings {
                c: cfg.retrieval.c,
                max_results: cfg.dialogue.max_results,
                open_questions: cfg.dialogue.open_questions.clone(),
            },
        }))
    }

    pub fn knowledge(&self) -> Arc<Knowledge> {
        self.knowledge.read().expect("knowledge lock").clone()
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    pub fn emotion_classifier(&self) -> &EmotionClassifier {
        &self.emotions
    }

    pub fn intent_classifier(&self) -> &IntentClassifier {
        &self.intents
    }

    pub fn stopwords(&self) -> &StopwordList {
        &self.stopwords
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    // ---- sessions -------------------------------------------------------

    /// Opens a session for a registered user, or anonymously with `None`.
    pub fn open_session(&self, user: Option<&str>) -> Result<SessionStart, EngineError> {
        let (user, age, registered) = match user {
            Some(id) => {
                let p = self
                    .monitor
                    .profile(id)
                    .ok_or_else(|| EngineError::UnknownUser(id.to_string()))?;
                (p.id, Some(p.age), true)
            }
            None => (ANONYMOUS_USER.to_string(), None, false),
        };
        let id = self.monitor.next_session_id();
        let log = self.monitor.open_log(&user, &id)?;
        let mut session = Session::new(id.clone(), user.clone(), registered, age);
        session.pending_prompts.push(WELCOME.to_string());
        let alarm = if registered { self.monitor.check_alarm(&user) } else { None };
        self.sessions
            .lock()
            .expect("sessions lock")
            .insert(id.clone(), Arc::new(Mutex::new(SessionSlot { session, log })));
        Ok(SessionStart {
            session: id,
            user,
            alarm,
            replies: vec![Reply::text(WELCOME)],
        })
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<SessionSlot>>, EngineError> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownSession(id.to_string()))
    }

    pub fn session_view(&self, id: &str) -> Result<SessionView, EngineError> {
        let slot = self.slot(id)?;
        let guard = slot.lock().expect("session lock");
        Ok(guard.session.view())
    }

    pub fn transcript(&self, id: &str) -> Result<Vec<Interaction>, EngineError> {
        let slot = self.slot(id)?;
        let guard = slot.lock().expect("session lock");
        Ok(guard.session.transcript.clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.lock().expect("sessions lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Processes a user post. Text starting with `/` is run as a command.
    pub fn handle_message(&self, session_id: &str, text: &str) -> Result<TurnOutcome, EngineError> {
        if text.trim_start().starts_with('/') {
            let cmd = Command::parse(text)?;
            return self.run(session_id, text, None, |t| t.command(cmd));
        }
        let intent = self.intents.classify_intent(text);
        self.run(session_id, text, Some(intent), |t| {
            t.scan_risk(text);
            t.route(intent, text);
        })
    }

    pub fn handle_command(&self, session_id: &str, command: &str) -> Result<TurnOutcome, EngineError> {
        let cmd = Command::parse(command)?;
        self.run(session_id, command, None, |t| t.command(cmd))
    }

    /// Closes a session as if the user had left.
    pub fn close_session(&self, session_id: &str) -> Result<TurnOutcome, EngineError> {
        self.handle_command(session_id, "/exit")
    }

    /// Closes every open session, flushing their logs.
    pub fn close_all(&self) -> Vec<String> {
        let mut errors = Vec::new();
        for id in self.session_ids() {
            match self.close_session(&id) {
                Ok(o) => errors.extend(o.storage_errors),
                Err(EngineError::SessionClosed(_)) => {}
                Err(e) => errors.push(e.to_string()),
            }
        }
        errors
    }

    fn run(
        &self,
        session_id: &str,
        answer: &str,
        intent: Option<Intent>,
        f: impl FnOnce(&mut Turn<'_>),
    ) -> Result<TurnOutcome, EngineError> {
        let slot = self.slot(session_id)?;
        let mut guard = slot.lock().expect("session lock");
        let SessionSlot { session, log } = &mut *guard;
        if session.closed {
            return Err(EngineError::SessionClosed(session_id.to_string()));
        }
        let mut turn = Turn {
            engine: self,
            knowledge: self.knowledge(),
            session,
            replies: Vec::new(),
            errors: Vec::new(),
        };
        f(&mut turn);
        let Turn { replies, mut errors, .. } = turn;

        // The log pairs what the bot said last with what the user answered.
        let prompt = std::mem::take(&mut session.pending_prompts).join("\n");
        self.log_interaction(session, log, prompt, answer.to_string(), &mut errors);
        session.pending_prompts = replies.iter().map(|r| r.text.clone()).collect();
        if session.closed {
            if !session.pending_prompts.is_empty() {
                let prompt = std::mem::take(&mut session.pending_prompts).join("\n");
                self.log_interaction(session, log, prompt, String::new(), &mut errors);
            }
            if let Err(e) = log.close() {
                errors.push(e.to_string());
            }
        }
        Ok(TurnOutcome {
            session: session.id.clone(),
            intent,
            mode: session.mode.clone(),
            replies,
            closed: session.closed,
            storage_errors: errors,
        })
    }

    fn log_interaction(
        &self,
        session: &mut Session,
        log: &mut ConversationLog,
        prompt: String,
        answer: String,
        errors: &mut Vec<String>,
    ) {
        let interaction = Interaction {
            date: self.monitor.now(),
            user: session.user.clone(),
            prompt,
            answer,
        };
        if let Err(e) = log.append(&interaction) {
            errors.push(e.to_string());
        }
        session.transcript.push(interaction);
    }

    // ---- corpus operations ---------------------------------------------

    /// Ranked approved tales for free text plus optional explicit filters.
    pub fn search_tales(
        &self,
        text: &str,
        emotions: &BTreeSet<Emotion>,
        themes: &BTreeSet<ThemeId>,
    ) -> Result<Vec<TaleHit>, EngineError> {
        let k = self.knowledge();
        let query = k
            .parser
            .parse(text)
            .with_emotions(emotions.iter().copied())
            .with_themes(themes.iter().cloned());
        if query.is_empty() {
            return Ok(Vec::new());
        }
        let results = k.tales.search(&query, self.settings.c)?;
        Ok(results
            .iter()
            .map(|r| TaleHit::from_result(r, &k.corpus.tales[&r.id].title))
            .collect())
    }

    pub fn tale(&self, id: &str) -> Option<Tale> {
        self.knowledge().corpus.tale(id).cloned()
    }

    /// Stores a submission as pending and persists the corpus.
    pub fn submit_tale(&self, draft: TaleDraft, submitted_by: Option<&str>) -> Result<Tale, EngineError> {
        self.mutate_corpus(|c| {
            let id = c.submit_tale(draft, submitted_by)?;
            Ok(c.tales[&id].clone())
        })
    }

    /// Approves or rejects a pending tale; approval makes it searchable.
    pub fn review_tale(&self, id: &str, decision: ReviewDecision) -> Result<Tale, EngineError> {
        self.mutate_corpus(|c| Ok(c.review_tale(id, decision)?.clone()))
    }

    fn mutate_corpus<T>(&self, f: impl FnOnce(&mut Corpus) -> Result<T, EngineError>) -> Result<T, EngineError> {
        let mut guard = self.knowledge.write().expect("knowledge lock");
        let mut corpus = guard.corpus.clone();
        let out = f(&mut corpus)?;
        if let Some(dir) = &self.corpus_dir {
            write_atomically(&dir.join(TALES_FILE), &corpus.tales_xml())?;
        }
        *guard = Arc::new(Knowledge::build(corpus, &self.stopwords));
        Ok(out)
    }
}

fn write_atomically(path: &Path, content: &str) -> Result<(), EngineError> {
    let tmp = path.with_extension("xml.tmp");
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EngineError::Corpus(CorpusError::Io { path, source })
    };
    fs::write(&tmp, content).map_err(io(&tmp))?;
    fs::rename(&tmp, path).map_err(io(path))
}

/// Trains the emotion and intent classifiers from the configured lexicons.
pub fn train_classifiers(cfg: &Config) -> Result<(EmotionClassifier, IntentClassifier), EngineError> {
    let alpha = cfg.classifier.alpha;
    let docs = build_training_set(&EmotionClassifier::class_registry(), &cfg.lexicons.emotions)
        .map_err(classify_err("emotion lexicons"))?;
    let emotions = EmotionClassifier::train(&docs, alpha, cfg.classifier.emotion_threshold)
        .map_err(classify_err("emotion classifier"))?;
    let docs = build_training_set(&IntentClassifier::class_registry(), &cfg.lexicons.intents)
        .map_err(classify_err("intent lexicons"))?;
    let intents = IntentClassifier::train(&docs, alpha, Some(cfg.classifier.intent_threshold))
        .map_err(classify_err("intent classifier"))?;
    Ok((emotions, intents))
}

fn list_line(n: usize, hit: &TaleHit) -> String {
    let emotions = join_display(&hit.emotions);
    let themes: Vec<String> = hit.themes.iter().map(ThemeId::display_name).collect();
    let mut line = format!("{n}. {}", hit.title);
    if !emotions.is_empty() {
        line.push_str(&format!(" (emotions: {emotions}"));
        if !themes.is_empty() {
            line.push_str(&format!("; themes: {}", themes.join(", ")));
        }
        line.push(')');
    }
    line
}

impl Turn<'_> {
    fn say(&mut self, text: impl Into<String>) {
        self.replies.push(Reply::text(text));
    }

    fn record(&mut self, result: Result<bool, MonitorError>) {
        if let Err(e) = result {
            self.errors.push(e.to_string());
        }
    }

    fn scan_risk(&mut self, text: &str) {
        if let Err(e) = self.engine.monitor.scan_risk(&self.session.user, text) {
            self.errors.push(e.to_string());
        }
    }

    fn route(&mut self, intent: Intent, text: &str) {
        if intent == Intent::Exit {
            return self.close();
        }
        if let Mode::Adding { .. } = self.session.mode {
            // A submission in progress consumes the text; commands and
            // exit still leave.
            return self.continue_submission(text);
        }
        match (intent, &self.session.mode) {
            (Intent::SearchTales, Mode::Chatting) => self.end_chat_with_recommendation(Some(text)),
            (Intent::SearchTales, _) => self.new_search(text),
            (Intent::ChatEmotions, Mode::Chatting) => self.chat_turn(text),
            (Intent::ChatEmotions, _) => self.start_chat(),
            (Intent::AddTale, _) => self.start_submission(),
            (Intent::NoIntention, Mode::Idle) => self.say(HELP),
            (Intent::NoIntention, Mode::Searching) => self.searching_input(text),
            (Intent::NoIntention, Mode::Reading { .. }) => self.answer_followup(text),
            (Intent::NoIntention, Mode::Chatting) => self.chat_turn(text),
            (Intent::NoIntention, Mode::Adding { .. }) | (Intent::Exit, _) => unreachable!("handled above"),
        }
    }

    fn command(&mut self, cmd: Command) {
        match cmd {
            Command::Exit => self.close(),
            Command::Chat => self.start_chat(),
            Command::Search(None) => {
                self.session.mode = Mode::Searching;
                self.session.last_results.clear();
                self.say(ASK_QUERY);
            }
            Command::Search(Some(text)) => self.new_search(&text),
            Command::Recommend => self.end_chat_with_recommendation(None),
            Command::Open(id) => self.open_tale(&id),
        }
    }

    fn close(&mut self) {
        self.session.closed = true;
        self.say(GOODBYE);
    }

    // ---- searching ------------------------------------------------------

    fn new_search(&mut self, text: &str) {
        self.session.mode = Mode::Searching;
        self.session.last_results.clear();
        let query = self.knowledge.parser.parse(text);
        if query.is_empty() {
            return self.say(ASK_QUERY);
        }
        self.execute_search(query);
    }

    fn searching_input(&mut self, text: &str) {
        let trimmed = text.trim();
        if let Ok(n) = trimmed.parse::<usize>() {
            let shown = self.session.last_results.len().min(self.engine.settings.max_results);
            return match n.checked_sub(1).filter(|i| *i < shown) {
                Some(i) => {
                    let id = self.session.last_results[i].clone();
                    self.open_tale(&id)
                }
                None => self.say(format!("Please type a number between 1 and {shown}.")),
            };
        }
        if let Some(id) = self.result_by_title(trimmed) {
            return self.open_tale(&id);
        }
        let followup = self.knowledge.parser.parse(text);
        if followup.is_empty() {
            return self.say(if self.session.last_results.is_empty() { ASK_QUERY } else { PICK_OR_REFINE });
        }
        if self.session.last_results.is_empty() {
            return self.execute_search(followup);
        }
        let refined = Query::refine(self.session.last_results.iter().map(String::as_str), followup);
        self.execute_search(refined);
    }

    fn result_by_title(&self, text: &str) -> Option<String> {
        let wanted = crate::textproc::terms(text);
        if wanted.is_empty() {
            return None;
        }
        self.session
            .last_results
            .iter()
            .find(|id| {
                self.knowledge
                    .corpus
                    .tale(id)
                    .is_some_and(|t| crate::textproc::terms(&t.title) == wanted)
            })
            .cloned()
    }

    fn execute_search(&mut self, query: Query) {
        let results = match self.knowledge.tales.search(&query, self.engine.settings.c) {
            Ok(r) => r,
            Err(e) => {
                self.errors.push(e.to_string());
                Vec::new()
            }
        };
        if let Some(filter) = &query.emotion_filter {
            for e in filter {
                let r = self.engine.monitor.select(&self.session.user, *e, SelectionContext::SearchFilter);
                self.record(r);
            }
        }
        self.session.last_results = results.iter().map(|r| r.id.clone()).collect();
        if results.is_empty() {
            return self.say(NO_RESULTS);
        }
        let hits: Vec<TaleHit> = results
            .iter()
            .take(self.engine.settings.max_results)
            .map(|r| TaleHit::from_result(r, &self.knowledge.corpus.tales[&r.id].title))
            .collect();
        let header = if results.len() == 1 {
            "I found 1 tale. Type its number to read it:".to_string()
        } else if results.len() > hits.len() {
            format!("I found {} tales; these are the best {}. Type the number of the one you want to read:", results.len(), hits.len())
        } else {
            format!("I found {} tales. Type the number of the one you want to read:", results.len())
        };
        self.list_reply(header, hits);
    }

    fn list_reply(&mut self, header: String, hits: Vec<TaleHit>) {
        let mut text = header;
        for (i, h) in hits.iter().enumerate() {
            text.push('\n');
            text.push_str(&list_line(i + 1, h));
        }
        self.replies.push(Reply { text, tales: hits });
    }

    // ---- reading --------------------------------------------------------

    fn read_set(&self) -> BTreeSet<String> {
        let mut read = self.session.session_reads.clone();
        if self.session.registered {
            if let Some(p) = self.engine.monitor.profile(&self.session.user) {
                read.extend(p.read_tales);
            }
        }
        read
    }

    fn open_tale(&mut self, id: &str) {
        let Some(tale) = self.knowledge.corpus.tale(id).filter(|t| t.is_approved()).cloned() else {
            return self.say(format!("Sorry, the tale '{id}' is not available."));
        };
        if !tale.suitable_for(self.session.age) {
            return self.say(format!("Sorry, '{}' is not suitable for your age.", tale.title));
        }
        self.session.session_reads.insert(tale.id.clone());
        let r = self.engine.monitor.mark_read(&self.session.user, &tale.id);
        self.record(r);

        let mut text = format!("{}\n\n{}", tale.title, tale.body);
        if let Some(url) = &tale.source_url {
            text.push_str(&format!("\n\n{url}"));
        }
        self.say(text);
        self.session.questions =
            generate_tale_questions(&tale, &self.engine.settings.open_questions, &self.engine.stopwords);
        self.session.mode = Mode::Reading {
            tale: tale.id.clone(),
            cursor: 0,
            followup_pending: false,
        };
        match self.session.questions.first() {
            Some(q) => {
                let q = q.text.clone();
                self.say(q);
            }
            None => self.finish_reading(&tale),
        }
    }

    fn answer_followup(&mut self, text: &str) {
        let Mode::Reading {
            tale,
            cursor,
            followup_pending,
        } = self.session.mode.clone()
        else {
            return;
        };
        let Some(question) = self.session.questions.get(cursor).cloned() else {
            return self.advance(&tale, cursor);
        };
        if followup_pending {
            let named = named_emotions(text);
            if question.followup == FollowupRule::AskEmotionsIfNegative && !named.is_empty() {
                self.say(format!("Thank you. So for you this tale deals with '{}'.", join_display(&named)));
            } else {
                self.say(ACK);
            }
            return self.advance(&tale, cursor);
        }
        let generation = self.engine.generator.is_enabled();
        let followup = match question.followup {
            FollowupRule::AskEmotionsIfNegative if is_negative(text) => Some(ASK_EMOTIONS.to_string()),
            FollowupRule::AskEmotionsIfNegative => None,
            FollowupRule::ConfirmEmotion => match self.engine.emotions.classify(text).salient {
                Some(e) => Some(format!(
                    "I guess that your feelings are related to '{}', am I right?",
                    e.display_name()
                )),
                None if generation => Some(active_listen(self.engine.generator.as_ref(), text)),
                None => None,
            },
            FollowupRule::Reflect if generation => Some(active_listen(self.engine.generator.as_ref(), text)),
            FollowupRule::Reflect => None,
        };
        match followup {
            Some(f) => {
                self.say(f);
                self.session.mode = Mode::Reading {
                    tale,
                    cursor,
                    followup_pending: true,
                };
            }
            None => {
                self.say(ACK);
                self.advance(&tale, cursor);
            }
        }
    }

    fn advance(&mut self, tale_id: &str, cursor: usize) {
        let next = cursor + 1;
        if let Some(q) = self.session.questions.get(next) {
            let q = q.text.clone();
            self.say(q);
            self.session.mode = Mode::Reading {
                tale: tale_id.to_string(),
                cursor: next,
                followup_pending: false,
            };
            return;
        }
        match self.knowledge.corpus.tale(tale_id).cloned() {
            Some(t) => self.finish_reading(&t),
            None => self.session.mode = Mode::Idle,
        }
    }

    fn finish_reading(&mut self, tale: &Tale) {
        let summary = summarize_tale(self.engine.generator.as_ref(), tale);
        self.say(format!("To sum up, the tale says: '{summary}'"));
        self.say("That was my last question about this tale. Would you like to search for another tale or chat about emotions?");
        self.session.mode = Mode::Idle;
        self.session.questions.clear();
    }

    // ---- chatting -------------------------------------------------------

    fn start_chat(&mut self) {
        self.session.detected.clear();
        self.session.mode = Mode::Chatting;
        self.say(CHAT_OPENING);
    }

    fn chat_turn(&mut self, text: &str) {
        let Some(e) = self.engine.emotions.classify(text).salient else {
            return self.say(CHAT_PROMPT);
        };
        let count = {
            let c = self.session.detected.entry(e).or_default();
            *c += 1;
            *c
        };
        let r = self.engine.monitor.select(&self.session.user, e, SelectionContext::ChatDetection);
        self.record(r);
        let definition = self
            .knowledge
            .corpus
            .card(e)
            .map(|c| c.definition.clone())
            .unwrap_or_default();
        self.say(format!(
            "Do you know that the emotion '{}' is defined as: '{}'? Do you think that your current emotional state is identified with this emotion?",
            e.display_name(),
            definition
        ));
        let quotes = self.knowledge.quotes.tagged_with(e);
        if !quotes.is_empty() {
            let id = quotes[(count - 1) % quotes.len()];
            if let Some(q) = self.knowledge.corpus.quotes.get(id) {
                let text = q.text.clone();
                self.say(format!("An interesting quote to reflect on: '{text}'"));
            }
        }
    }

    fn end_chat_with_recommendation(&mut self, search_text: Option<&str>) {
        if self.session.detected.is_empty() {
            if let Some(text) = search_text {
                if !self.knowledge.parser.parse(text).is_empty() {
                    return self.new_search(text);
                }
            }
            return self.say(NOTHING_DETECTED);
        }
        let detected = self.session.detected.clone();
        let recs: Vec<Recommendation> = recommend(
            self.knowledge.corpus.approved_tales(),
            &detected,
            &self.read_set(),
            self.session.age,
        );
        let emotions: BTreeSet<Emotion> = detected.keys().copied().collect();
        self.session.mode = Mode::Searching;
        self.session.last_results = recs.iter().map(|r| r.tale.clone()).collect();
        if recs.is_empty() {
            return self.say(format!(
                "I have no new tales about '{}' for you right now. You can search for other tales whenever you want.",
                join_display(&emotions)
            ));
        }
        let shown: Vec<&Recommendation> = recs.iter().take(self.engine.settings.max_results).collect();
        for rec in &shown {
            for e in &rec.matched {
                let r = self.engine.monitor.select(&self.session.user, *e, SelectionContext::Recommendation);
                self.record(r);
            }
        }
        let hits: Vec<TaleHit> = shown
            .iter()
            .map(|r| {
                let t = &self.knowledge.corpus.tales[&r.tale];
                TaleHit {
                    id: t.id.clone(),
                    title: t.title.clone(),
                    score: r.score as f64,
                    emotions: t.emotions.clone(),
                    themes: t.themes.clone(),
                }
            })
            .collect();
        let header = format!(
            "From our conversation I noticed '{}'. These tales deal with those emotions; type the number of the one you want to read:",
            join_display(&emotions)
        );
        self.list_reply(header, hits);
    }

    // ---- submissions ----------------------------------------------------

    fn start_submission(&mut self) {
        self.session.mode = Mode::Adding { title: None };
        self.say(ASK_TITLE);
    }

    fn continue_submission(&mut self, text: &str) {
        let Mode::Adding { title } = self.session.mode.clone() else {
            return;
        };
        let text = text.trim();
        if text.is_empty() {
            return self.say(if title.is_none() { ASK_TITLE } else { ASK_BODY });
        }
        let Some(title) = title else {
            self.session.mode = Mode::Adding {
                title: Some(text.to_string()),
            };
            return self.say(ASK_BODY);
        };
        let draft = TaleDraft {
            title: title.clone(),
            body: text.to_string(),
            source_url: None,
            min_age: None,
        };
        let by = self.session.registered.then(|| self.session.user.clone());
        match self.engine.submit_tale(draft, by.as_deref()) {
            Ok(_) => {
                self.knowledge = self.engine.knowledge();
                self.say(format!(
                    "Thank you! Your tale '{title}' has been sent to our psychologists for review."
                ));
            }
            Err(e) => {
                self.errors.push(e.to_string());
                self.say("Sorry, I could not save your tale right now. Please try again later.");
            }
        }
        self.session.mode = Mode::Idle;
    }
}

/// Emotion names mentioned in free text.
fn named_emotions(text: &str) -> BTreeSet<Emotion> {
    let terms = crate::textproc::terms(text);
    let mut out: BTreeSet<Emotion> = terms.iter().filter_map(|t| t.parse().ok()).collect();
    for w in terms.windows(2) {
        if let Ok(e) = format!("{}_{}", w[0], w[1]).parse() {
            out.insert(e);
        }
    }
    out
}
