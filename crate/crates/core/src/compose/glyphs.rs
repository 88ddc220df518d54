//! Built-in glyph tables shipped in `data/glyphs.json`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Deserialize)]
pub struct GlyphFamily {
    pub labels: Vec<String>,
    pub glyphs: Vec<Vec<u32>>,
}

#[derive(Debug, Deserialize)]
struct GlyphTables {
    #[allow(dead_code)]
    schema: u32,
    micro_mb: BTreeMap<String, GlyphFamily>,
    micro_bb: BTreeMap<String, GlyphFamily>,
}

const RAW: &str = include_str!("../../data/glyphs.json");

fn tables() -> &'static GlyphTables {
    static T: OnceLock<GlyphTables> = OnceLock::new();
    T.get_or_init(|| serde_json::from_str(RAW).expect("bundled glyph table is valid"))
}

/// 3x3 glyph family for `micro_mb` (`"a"` or `"b"`).
pub fn micro_mb_family(name: &str) -> Result<&'static GlyphFamily> {
    tables()
        .micro_mb
        .get(name)
        .ok_or_else(|| LabError::InvalidParams(format!("glyph_family: unknown micro_mb family `{name}`")))
}

/// 2x2 glyph class for `micro_bb` (`"1"` or `"2"`).
pub fn micro_bb_class(name: &str) -> Result<&'static GlyphFamily> {
    tables()
        .micro_bb
        .get(name)
        .ok_or_else(|| LabError::InvalidParams(format!("glyph_family: unknown micro_bb class `{name}`")))
}
