//! Preset values against the checked-in table, and config round trips.

use std::collections::HashMap;

use rsb_core::harness::{desk_recipe, DESK_NAMES};
use rsb_core::recipe::{parse_config, preset, Recipe, PRESET_NAMES};

use super::{ensure, Check};

pub const TABLE: &str = include_str!("../data/presets.tsv");
pub const PINNED: [&str; 7] = ["a1", "a2", "a3", "b", "c1", "c2", "d"];

fn as_map(r: &Recipe) -> HashMap<String, String> {
    r.to_config().lines().filter_map(|l| l.split_once('=')).map(|(k, v)| (k.trim().to_string(), v.trim().to_string())).collect()
}

fn same(want: &str, got: &str) -> bool {
    if want == "on" {
        return got != "off";
    }
    match (want.parse::<f64>(), got.parse::<f64>()) {
        (Ok(a), Ok(b)) => a == b,
        _ => {
            let num = |s: &str| s.split(',').map(str::parse::<f64>).collect::<Result<Vec<_>, _>>();
            match (num(want), num(got)) {
                (Ok(a), Ok(b)) => a == b,
                _ => want == got,
            }
        }
    }
}

pub fn golden_table() -> Check {
    let mut maps = HashMap::new();
    for name in PINNED {
        maps.insert(name, as_map(&preset(name).map_err(|e| e.to_string())?));
    }
    let mut rows = 0;
    for line in TABLE.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        ensure(f.len() == 3, || format!("bad table row '{line}'"))?;
        let map = maps.get(f[0]).ok_or_else(|| format!("unknown preset {}", f[0]))?;
        let got = map.get(f[1]).ok_or_else(|| format!("{}: no key {}", f[0], f[1]))?;
        ensure(same(f[2], got), || format!("{} {}: table {} vs preset {got}", f[0], f[1], f[2]))?;
        rows += 1;
    }
    for name in PINNED {
        ensure(TABLE.lines().any(|l| l.starts_with(&format!("{name}\t"))), || format!("{name} missing from table"))?;
    }
    Ok(format!("{rows} pinned values across {} presets", PINNED.len()))
}

/// Serializing a recipe and applying the text to any other preset
/// reproduces it exactly.
pub fn round_trip() -> Check {
    let mut recipes: Vec<Recipe> = PRESET_NAMES.iter().map(|n| preset(n)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    for n in DESK_NAMES {
        recipes.push(desk_recipe(n).map_err(|e| e.to_string())?);
    }
    let bases = [preset("a1").unwrap(), preset("b").unwrap(), preset("pytorch-baseline").unwrap()];
    for r in &recipes {
        let text = r.to_config();
        let parsed = parse_config(&text).map_err(|e| format!("{}: {e}", r.name))?;
        for base in &bases {
            let back = parsed.apply(base).map_err(|e| e.to_string())?;
            ensure(&back == r, || format!("{} does not round-trip over {}", r.name, base.name))?;
        }
        ensure(back_text(r)? == text, || format!("{}: text not stable", r.name))?;
    }
    Ok(format!("{} recipes round-trip exactly", recipes.len()))
}

fn back_text(r: &Recipe) -> Result<String, String> {
    let parsed = parse_config(&r.to_config()).map_err(|e| e.to_string())?;
    Ok(parsed.apply(&preset("c1").unwrap()).map_err(|e| e.to_string())?.to_config())
}

pub fn recipe_fidelity() -> Check {
    Ok(format!("{}; {}", golden_table()?, round_trip()?))
}
