#![allow(dead_code)]
pub mod oracles;
pub mod sessions;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Duration, TimeZone, Utc};
use talechat_core::clock::ManualClock;
use talechat_core::config::Config;
use talechat_core::dialogue::{DisabledGenerator, Engine, TextGenerator};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn start_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 5, 25, 14, 41, 0).unwrap()
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name();
        if name == "data" {
            continue;
        }
        let target = to.join(&name);
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}

/// A private copy of the fixture tree, so tests may write corpus and data.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        copy_tree(&fixtures_dir(), dir.path());
        Self { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn config(&self) -> Config {
        Config::load(&self.path().join("config.toml")).unwrap()
    }

    pub fn engine(&self) -> (Engine, Arc<ManualClock>) {
        self.engine_with(Arc::new(DisabledGenerator))
    }

    pub fn engine_with(&self, generator: Arc<dyn TextGenerator>) -> (Engine, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::new(start_time(), Duration::seconds(1)));
        let engine = Engine::from_config(&self.config(), clock.clone(), generator).unwrap();
        (engine, clock)
    }
}
