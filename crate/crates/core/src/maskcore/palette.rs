use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MaskError;

/// Class identifier stored in a [`Mask`](super::Mask).
pub type ClassId = u8;

/// 8-bit RGB triple.
pub type Rgb = [u8; 3];

/// Semantic role a palette class plays in the parked-car heuristic and the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Background,
    Road,
    Car,
    ParkedCar,
    Other,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Background => "background",
            Role::Road => "road",
            Role::Car => "car",
            Role::ParkedCar => "parked_car",
            Role::Other => "other",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub id: ClassId,
    pub name: String,
    pub color: Rgb,
    pub role: Role,
}

/// Ordered mapping between class ids, names, colors and roles.
///
/// Construction validates that ids and colors are unique, that exactly one
/// class is the background, and that road, car and parked car appear at most
/// once each. Three-class and four-class label schemes differ only in which
/// roles are present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    entries: Vec<PaletteEntry>,
    // class id -> position in `entries`
    index: [Option<u8>; 256],
}

/// On-disk form of one palette class, keyed by class name in the document.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct EntryDoc {
    id: ClassId,
    rgb: Rgb,
    role: Role,
}

impl Palette {
    pub fn new(entries: Vec<PaletteEntry>) -> Result<Self, MaskError> {
        if entries.is_empty() {
            return Err(MaskError::InvalidPalette("palette has no classes".into()));
        }
        let mut ids = HashSet::new();
        let mut colors = HashSet::new();
        for e in &entries {
            if !ids.insert(e.id) {
                return Err(MaskError::InvalidPalette(format!("duplicate class id {}", e.id)));
            }
            if !colors.insert(e.color) {
                return Err(MaskError::InvalidPalette(format!("duplicate color {:?} (class '{}')", e.color, e.name)));
            }
        }
        let count = |role: Role| entries.iter().filter(|e| e.role == role).count();
        if count(Role::Background) != 1 {
            return Err(MaskError::InvalidPalette(format!(
                "expected exactly one background class, found {}",
                count(Role::Background)
            )));
        }
        for role in [Role::Road, Role::Car, Role::ParkedCar] {
            if count(role) > 1 {
                return Err(MaskError::InvalidPalette(format!("role {role} assigned to more than one class")));
            }
        }
        if entries.len() > 256 {
            return Err(MaskError::InvalidPalette("more than 256 classes".into()));
        }
        let mut index = [None; 256];
        for (pos, e) in entries.iter().enumerate() {
            index[e.id as usize] = Some(pos as u8);
        }
        Ok(Palette { entries, index })
    }

    /// Four-class palette: black background, lilac road, blue car, yellow parked car.
    pub fn default_four_class() -> Self {
        Palette::new(vec![
            entry(0, "background", [0, 0, 0], Role::Background),
            entry(1, "road", [200, 162, 200], Role::Road),
            entry(2, "car", [0, 0, 255], Role::Car),
            entry(3, "parked_car", [255, 255, 0], Role::ParkedCar),
        ])
        .expect("built-in palette is valid")
    }

    /// The background/road/car scheme without a parked-car class.
    pub fn default_three_class() -> Self {
        Palette::new(vec![
            entry(0, "background", [0, 0, 0], Role::Background),
            entry(1, "road", [200, 162, 200], Role::Road),
            entry(2, "car", [0, 0, 255], Role::Car),
        ])
        .expect("built-in palette is valid")
    }

    /// Parses a JSON document mapping class name to `{ "id", "rgb", "role" }`.
    pub fn from_json(text: &str) -> Result<Self, MaskError> {
        let doc: BTreeMap<String, EntryDoc> =
            serde_json::from_str(text).map_err(|e| MaskError::InvalidPalette(e.to_string()))?;
        let mut entries: Vec<PaletteEntry> =
            doc.into_iter().map(|(name, d)| PaletteEntry { id: d.id, name, color: d.rgb, role: d.role }).collect();
        entries.sort_by_key(|e| e.id);
        Palette::new(entries)
    }

    pub fn to_json(&self) -> String {
        let doc: BTreeMap<&str, EntryDoc> =
            self.entries.iter().map(|e| (e.name.as_str(), EntryDoc { id: e.id, rgb: e.color, role: e.role })).collect();
        serde_json::to_string_pretty(&doc).expect("palette serializes")
    }

    pub fn load(path: &Path) -> Result<Self, MaskError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| MaskError::InvalidPalette(format!("{}: {e}", path.display())))?;
        Palette::from_json(&text)
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Position of `id` in palette order, used as the row/column index of confusion matrices.
    pub fn position(&self, id: ClassId) -> Option<usize> {
        self.index[id as usize].map(usize::from)
    }

    pub fn contains(&self, id: ClassId) -> bool {
        self.index[id as usize].is_some()
    }

    pub fn entry(&self, id: ClassId) -> Option<&PaletteEntry> {
        self.position(id).map(|p| &self.entries[p])
    }

    pub fn color_of(&self, id: ClassId) -> Option<Rgb> {
        self.entry(id).map(|e| e.color)
    }

    pub fn by_name(&self, name: &str) -> Option<&PaletteEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn by_role(&self, role: Role) -> Option<&PaletteEntry> {
        self.entries.iter().find(|e| e.role == role)
    }

    pub fn id_for_role(&self, role: Role) -> Option<ClassId> {
        self.by_role(role).map(|e| e.id)
    }

    pub fn background(&self) -> ClassId {
        self.id_for_role(Role::Background).expect("validated palette has a background")
    }

    pub fn role_of(&self, id: ClassId) -> Option<Role> {
        self.entry(id).map(|e| e.role)
    }
}

fn entry(id: ClassId, name: &str, color: Rgb, role: Role) -> PaletteEntry {
    PaletteEntry { id, name: name.to_string(), color, role }
}
