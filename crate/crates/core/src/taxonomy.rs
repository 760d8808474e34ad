//! The 30-emotion taxonomy, emotion cards and the psychological theme registry.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Valence {
    Positive,
    Negative,
}

macro_rules! emotions {
    ($($variant:ident => $id:literal, $display:literal, $valence:ident;)*) => {
        /// One of the 30 taxonomy emotions. Ordering follows the canonical id.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum Emotion {
            $($variant,)*
        }

        impl Emotion {
            /// Registry order: the 13 positive emotions, then the 17 negative ones.
            pub const ALL: [Emotion; 30] = [$(Emotion::$variant,)*];

            /// Canonical lowercase identifier.
            pub fn id(self) -> &'static str {
                match self {
                    $(Emotion::$variant => $id,)*
                }
            }

            /// English display name ("emotional dependency" for `emotional_dependency`).
            pub fn display_name(self) -> &'static str {
                match self {
                    $(Emotion::$variant => $display,)*
                }
            }

            pub fn valence(self) -> Valence {
                match self {
                    $(Emotion::$variant => Valence::$valence,)*
                }
            }
        }
    };
}

emotions! {
    Joy => "joy", "joy", Positive;
    Desire => "desire", "desire", Positive;
    Certainty => "certainty", "certainty", Positive;
    Strength => "strength", "strength", Positive;
    Enthusiasm => "enthusiasm", "enthusiasm", Positive;
    Calm => "calm", "calm", Positive;
    Pleasure => "pleasure", "pleasure", Positive;
    Love => "love", "love", Positive;
    Courage => "courage", "courage", Positive;
    Fun => "fun", "fun", Positive;
    Liking => "liking", "liking", Positive;
    Compassion => "compassion", "compassion", Positive;
    Satisfaction => "satisfaction", "satisfaction", Positive;
    Tension => "tension", "tension", Negative;
    Phobia => "phobia", "phobia", Negative;
    Boredom => "boredom", "boredom", Negative;
    Humiliation => "humiliation", "humiliation", Negative;
    Discomfort => "discomfort", "discomfort", Negative;
    Sadness => "sadness", "sadness", Negative;
    Apathy => "apathy", "apathy", Negative;
    Doubt => "doubt", "doubt", Negative;
    Pain => "pain", "pain", Negative;
    Frustration => "frustration", "frustration", Negative;
    Hatred => "hatred", "hatred", Negative;
    Exhaustion => "exhaustion", "exhaustion", Negative;
    EmotionalDependency => "emotional_dependency", "emotional dependency", Negative;
    Attachment => "attachment", "attachment", Negative;
    Fear => "fear", "fear", Negative;
    Arrogance => "arrogance", "arrogance", Negative;
    Anger => "anger", "anger", Negative;
}

impl Emotion {
    pub fn is_positive(self) -> bool {
        self.valence() == Valence::Positive
    }

    /// Index into [`Emotion::ALL`].
    pub fn index(self) -> usize {
        Emotion::ALL
            .iter()
            .position(|e| *e == self)
            .expect("every variant is listed in ALL")
    }
}

impl PartialOrd for Emotion {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Emotion {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.id().cmp(other.id())
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown emotion '{0}'")]
pub struct UnknownEmotion(pub String);

impl FromStr for Emotion {
    type Err = UnknownEmotion;

    /// Accepts the canonical id or the display name, case- and accent-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = crate::textproc::terms(s).join("_");
        Emotion::ALL
            .iter()
            .copied()
            .find(|e| e.id() == key)
            .ok_or_else(|| UnknownEmotion(s.to_string()))
    }
}

/// Joins display names as "a", "a and b", "a, b and c".
pub fn join_display(emotions: &BTreeSet<Emotion>) -> String {
    let names: Vec<&str> = emotions.iter().map(|e| e.display_name()).collect();
    match names.as_slice() {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// Definition, related terms and explanatory videos for one emotion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionCard {
    pub emotion: Emotion,
    pub definition: String,
    pub related_terms: Vec<String>,
    pub video_urls: Vec<String>,
}

/// A psychological theme identifier (canonical lowercase, `_` for spaces).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThemeId(String);

impl ThemeId {
    /// Canonicalizes a theme name; `None` when it holds no word characters.
    pub fn new(name: &str) -> Option<Self> {
        let key = crate::textproc::terms(name).join("_");
        (!key.is_empty()).then_some(ThemeId(key))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn display_name(&self) -> String {
        self.0.replace('_', " ")
    }
}

impl fmt::Display for ThemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub const DEFAULT_THEMES: [&str; 8] = [
    "depression",
    "resilience",
    "stress",
    "addiction",
    "abortion",
    "sex",
    "adolescence",
    "bullying",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThemeRegistry {
    themes: BTreeSet<ThemeId>,
}

impl Default for ThemeRegistry {
    fn default() -> Self {
        Self {
            themes: DEFAULT_THEMES.iter().filter_map(|t| ThemeId::new(t)).collect(),
        }
    }
}

impl ThemeRegistry {
    /// Parses `themes.txt`: one name per line, `#` comments, blank lines ignored.
    /// Returns `None` for an empty registry.
    pub fn parse(content: &str) -> Option<Self> {
        let themes: BTreeSet<ThemeId> = content
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter_map(ThemeId::new)
            .collect();
        (!themes.is_empty()).then_some(Self { themes })
    }

    pub fn from_ids(themes: impl IntoIterator<Item = ThemeId>) -> Self {
        Self {
            themes: themes.into_iter().collect(),
        }
    }

    pub fn contains(&self, theme: &ThemeId) -> bool {
        self.themes.contains(theme)
    }

    pub fn get(&self, name: &str) -> Option<&ThemeId> {
        ThemeId::new(name).and_then(|t| self.themes.get(&t))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ThemeId> {
        self.themes.iter()
    }

    pub fn len(&self) -> usize {
        self.themes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.themes.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.themes.iter().map(|t| format!("{t}\n")).collect()
    }
}
