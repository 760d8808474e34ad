//! Pseudonymous user registry. A profile holds only the pseudonym, age,
//! gender, the supervisor-visibility flag, the read set and risk flags;
//! each lives in `users/<id>.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::risk::RiskFlag;
use super::MonitorError;

/// Identity shared by every user who skipped registration.
pub const ANONYMOUS_USER: &str = "non-registered user";
pub const MIN_AGE: u32 = 5;
pub const MAX_AGE: u32 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Unspecified,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unspecified => "unspecified",
        }
    }
}

impl FromStr for Gender {
    type Err = MonitorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            "unspecified" | "other" | "" => Ok(Gender::Unspecified),
            other => Err(MonitorError::BadSegment(format!("unknown gender '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBucket {
    #[serde(rename = "under_18")]
    Under18,
    #[serde(rename = "18-23")]
    From18To23,
    #[serde(rename = "over_23")]
    Over23,
}

impl AgeBucket {
    pub const ALL: [AgeBucket; 3] = [AgeBucket::Under18, AgeBucket::From18To23, AgeBucket::Over23];

    pub fn of(age: u32) -> Self {
        match age {
            0..=17 => AgeBucket::Under18,
            18..=23 => AgeBucket::From18To23,
            _ => AgeBucket::Over23,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgeBucket::Under18 => "under_18",
            AgeBucket::From18To23 => "18-23",
            AgeBucket::Over23 => "over_23",
        }
    }
}

impl FromStr for AgeBucket {
    type Err = MonitorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['–', '_', ' '], "-").as_str() {
            "under-18" | "lt18" | "<18" => Ok(AgeBucket::Under18),
            "18-23" => Ok(AgeBucket::From18To23),
            "over-23" | "gt23" | ">23" => Ok(AgeBucket::Over23),
            other => Err(MonitorError::BadSegment(format!("unknown age bucket '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: String,
    pub age: u32,
    pub gender: Gender,
    pub visible_to_supervisor: bool,
    #[serde(default)]
    pub read_tales: BTreeSet<String>,
    /// Every risk flag raised for this user, acknowledged or not.
    #[serde(default)]
    pub flags: Vec<RiskFlag>,
}

impl UserProfile {
    /// Highest-severity unacknowledged flag (earliest on ties).
    pub fn pending_alarm(&self) -> Option<&RiskFlag> {
        self.flags
            .iter()
            .filter(|f| !f.acknowledged)
            .min_by(|a, b| b.category.cmp(&a.category).then(a.timestamp.cmp(&b.timestamp)))
    }

    pub fn age_bucket(&self) -> AgeBucket {
        AgeBucket::of(self.age)
    }
}

/// In-memory registry mirrored to one JSON file per user.
#[derive(Debug)]
pub struct UserRegistry {
    dir: PathBuf,
    users: BTreeMap<String, UserProfile>,
    next: u32,
}

fn id_number(id: &str) -> Option<u32> {
    id.strip_prefix('u')?.parse().ok()
}

impl UserRegistry {
    /// Loads every `*.json` profile under `dir`, creating the directory if needed.
    pub fn open(dir: &Path) -> Result<Self, MonitorError> {
        fs::create_dir_all(dir).map_err(|e| MonitorError::io(dir, e))?;
        let mut users = BTreeMap::new();
        let entries = fs::read_dir(dir).map_err(|e| MonitorError::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| MonitorError::io(dir, e))?.path();
            if path.extension().is_none_or(|x| x != "json") {
                continue;
            }
            let raw = fs::read_to_string(&path).map_err(|e| MonitorError::io(&path, e))?;
            let profile: UserProfile = serde_json::from_str(&raw).map_err(|e| MonitorError::Profile {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            users.insert(profile.id.clone(), profile);
        }
        let next = users.keys().filter_map(|id| id_number(id)).max().unwrap_or(0) + 1;
        Ok(Self {
            dir: dir.to_path_buf(),
            users,
            next,
        })
    }

    pub fn register(&mut self, age: u32, gender: Gender, visible_to_supervisor: bool) -> Result<UserProfile, MonitorError> {
        if !(MIN_AGE..=MAX_AGE).contains(&age) {
            return Err(MonitorError::BadAge(age));
        }
        let id = format!("u{:04}", self.next);
        let profile = UserProfile {
            id: id.clone(),
            age,
            gender,
            visible_to_supervisor,
            read_tales: BTreeSet::new(),
            flags: Vec::new(),
        };
        self.persist(&profile)?;
        self.next += 1;
        self.users.insert(id, profile.clone());
        Ok(profile)
    }

    pub fn get(&self, id: &str) -> Option<&UserProfile> {
        self.users.get(id)
    }

    pub fn is_registered(&self, id: &str) -> bool {
        self.users.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &UserProfile> {
        self.users.values()
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Applies `f` to a copy of the profile, persists it, then commits it in
    /// memory. A failed write leaves the registry unchanged.
    pub fn update<T>(&mut self, id: &str, f: impl FnOnce(&mut UserProfile) -> T) -> Result<T, MonitorError> {
        let mut profile = self
            .users
            .get(id)
            .cloned()
            .ok_or_else(|| MonitorError::UnknownUser(id.to_string()))?;
        let out = f(&mut profile);
        self.persist(&profile)?;
        self.users.insert(id.to_string(), profile);
        Ok(out)
    }

    fn persist(&self, profile: &UserProfile) -> Result<(), MonitorError> {
        let path = self.dir.join(format!("{}.json", profile.id));
        let tmp = self.dir.join(format!(".{}.json.tmp", profile.id));
        let body = serde_json::to_string_pretty(profile).expect("profiles serialize");
        fs::write(&tmp, body + "\n").map_err(|e| MonitorError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| MonitorError::io(&path, e))
    }
}
