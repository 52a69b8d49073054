use std::collections::BTreeSet;
use std::path::PathBuf;

use molt_core::chemdata::elements::parse_element_list;
use molt_core::chemdata::{
    filter_by_elements, load_dataset, Entry, LabeledDataset, Molecule, Unit,
};
use molt_core::rng::stream;
use rand::Rng;

use crate::{ensure, Outcome};

const FORBIDDEN: &str = "As,Se,Br,Te,I";
const REQUIRED: &str = "S";

fn dataset(molecules: Vec<Molecule>) -> LabeledDataset {
    let entries = molecules
        .into_iter()
        .enumerate()
        .map(|(i, molecule)| Entry {
            molecule,
            label: i as f64,
        })
        .collect();
    LabeledDataset::new(Unit::ElectronVolt, entries).unwrap()
}

fn chain(id: &str, z: &[u32]) -> Molecule {
    let pos = (0..z.len()).map(|i| [1.5 * i as f64, 0.0, 0.0]).collect();
    Molecule::new(id, z.to_vec(), pos).unwrap()
}

/// Ids a molecule-by-molecule reading of the rule keeps.
fn by_composition(ds: &LabeledDataset, forbidden: &[u32], required: &[u32]) -> Vec<String> {
    ds.entries()
        .iter()
        .filter(|e| {
            let present: BTreeSet<u32> = e.molecule.atomic_numbers.iter().copied().collect();
            let forbidden: BTreeSet<u32> = forbidden.iter().copied().collect();
            let required: BTreeSet<u32> = required.iter().copied().collect();
            present.is_disjoint(&forbidden) && required.is_subset(&present)
        })
        .map(|e| e.molecule.id.clone())
        .collect()
}

fn ids(ds: &LabeledDataset) -> Vec<String> {
    ds.ids().into_iter().map(String::from).collect()
}

fn full_data() -> Result<Option<String>, String> {
    let (Some(dir), Some(labels)) = (
        std::env::var_os("MOLT_OE62_STRUCTURES"),
        std::env::var_os("MOLT_OE62_LABELS"),
    ) else {
        return Ok(None);
    };
    let ds = load_dataset(
        &PathBuf::from(dir),
        &PathBuf::from(labels),
        Unit::ElectronVolt,
    )
    .map_err(|e| e.to_string())?;
    let kept = filter_by_elements(
        &ds,
        &parse_element_list(FORBIDDEN).unwrap(),
        &parse_element_list(REQUIRED).unwrap(),
    );
    ensure(ds.len() == 61_489 && kept.len() == 41_487, || {
        format!(
            "full data: {} -> {}, expected 61489 -> 41487",
            ds.len(),
            kept.len()
        )
    })?;
    Ok(Some(format!("{} -> {}", ds.len(), kept.len())))
}

pub fn run() -> Outcome {
    let forbidden = parse_element_list(FORBIDDEN).map_err(|e| e.to_string())?;
    let required = parse_element_list(REQUIRED).map_err(|e| e.to_string())?;

    let five = dataset(vec![
        chain("thiophene-like", &[16, 6, 6, 1]),
        chain("selenide", &[34, 16, 6]),
        chain("plain", &[6, 1, 1, 1, 1]),
        chain("bromo-thio", &[16, 35, 6]),
        chain("thiol", &[16, 1, 1]),
    ]);
    let kept = ids(&filter_by_elements(&five, &forbidden, &required));
    ensure(kept == ["thiophene-like", "thiol"], || {
        format!("five-molecule fixture kept {kept:?}")
    })?;
    let methane = dataset(vec![chain("methane", &[6, 1, 1, 1, 1])]);
    ensure(
        filter_by_elements(&methane, &[34], &[16]).is_empty(),
        || "CH4 kept without sulfur".into(),
    )?;

    // random compositions, including several required elements at once
    let palette = [1, 6, 7, 8, 9, 15, 16, 17, 33, 34, 35, 52, 53];
    let mut rng = stream(61, "filter-fixture", 0);
    let mols: Vec<Molecule> = (0..300)
        .map(|i| {
            let n = rng.random_range(1..7);
            let z: Vec<u32> = (0..n)
                .map(|_| palette[rng.random_range(0..palette.len())])
                .collect();
            chain(&format!("m{i:03}"), &z)
        })
        .collect();
    let ds = dataset(mols);
    let rules: [(&[u32], &[u32]); 4] = [
        (&forbidden, &required),
        (&[], &[]),
        (&[9, 17], &[7, 8]),
        (&[1], &[16, 34]),
    ];
    let mut checked = 0;
    for (f, r) in rules {
        let fast = ids(&filter_by_elements(&ds, f, r));
        let slow = by_composition(&ds, f, r);
        ensure(fast == slow, || {
            format!(
                "forbidden {f:?} required {r:?}: {} vs {} kept",
                fast.len(),
                slow.len()
            )
        })?;
        checked += 1;
    }

    let full = match full_data()? {
        Some(s) => format!("full data {s}"),
        None => "full-data check skipped (set MOLT_OE62_STRUCTURES and MOLT_OE62_LABELS)".into(),
    };
    Ok(format!(
        "fixtures exact ({checked} rules on 300 molecules, 5-molecule case); {full}"
    ))
}
