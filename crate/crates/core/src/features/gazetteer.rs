//! Gazetteer (dictionary) lookups for the four bundled dictionaries:
//! profession, city, country, state. Lookups are case-insensitive exact
//! matches on the lowercased token. Small fixture lists are bundled; a
//! loader accepts user-supplied files (one lowercased entry per line).

use std::collections::HashSet;
use std::path::Path;

use crate::errors::{DeidError, Result};

/// The four dictionary kinds, in canonical order (also the bit order of
/// the dictionary feature code).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GazetteerKind {
    Profession,
    City,
    Country,
    State,
}

impl GazetteerKind {
    pub const ALL: [GazetteerKind; 4] = [
        GazetteerKind::Profession,
        GazetteerKind::City,
        GazetteerKind::Country,
        GazetteerKind::State,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GazetteerKind::Profession => "profession",
            GazetteerKind::City => "city",
            GazetteerKind::Country => "country",
            GazetteerKind::State => "state",
        }
    }
}

/// One word set.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    pub kind: GazetteerKind,
    entries: HashSet<String>,
}

impl Gazetteer {
    pub fn from_text(kind: GazetteerKind, text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_lowercase())
            .collect();
        Gazetteer { kind, entries }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// All four gazetteers together.
#[derive(Debug, Clone)]
pub struct GazetteerSet {
    pub profession: Gazetteer,
    pub city: Gazetteer,
    pub country: Gazetteer,
    pub state: Gazetteer,
}

impl GazetteerSet {
    /// The bundled fixture lists.
    pub fn bundled() -> Self {
        GazetteerSet {
            profession: Gazetteer::from_text(
                GazetteerKind::Profession,
                include_str!("data/profession.txt"),
            ),
            city: Gazetteer::from_text(GazetteerKind::City, include_str!("data/city.txt")),
            country: Gazetteer::from_text(
                GazetteerKind::Country,
                include_str!("data/country.txt"),
            ),
            state: Gazetteer::from_text(GazetteerKind::State, include_str!("data/state.txt")),
        }
    }

    /// Loads `profession.txt`, `city.txt`, `country.txt`, `state.txt`
    /// from a directory, replacing the bundled lists.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |kind: GazetteerKind| -> Result<Gazetteer> {
            let path = dir.join(format!("{}.txt", kind.as_str()));
            let text = std::fs::read_to_string(&path)
                .map_err(|e| DeidError::io(path.display().to_string(), e))?;
            Ok(Gazetteer::from_text(kind, &text))
        };
        Ok(GazetteerSet {
            profession: read(GazetteerKind::Profession)?,
            city: read(GazetteerKind::City)?,
            country: read(GazetteerKind::Country)?,
            state: read(GazetteerKind::State)?,
        })
    }

    pub fn get(&self, kind: GazetteerKind) -> &Gazetteer {
        match kind {
            GazetteerKind::Profession => &self.profession,
            GazetteerKind::City => &self.city,
            GazetteerKind::Country => &self.country,
            GazetteerKind::State => &self.state,
        }
    }

    pub fn contains(&self, kind: GazetteerKind, token: &str) -> bool {
        self.get(kind).contains(token)
    }
}
