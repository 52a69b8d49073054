//! Hand-crafted composition descriptors appended to SOAP for the boosted trees.

use crate::chemdata::{elements, Molecule};

pub const DEFAULT_CC_BOND_CUT: f64 = 1.8;
const CARBON: u32 = 6;

/// `[N_atoms; count per species; presence per species; mean C-C; std C-C]`.
///
/// C-C neighbors are carbon pairs closer than `cc_bond_cut`; both statistics
/// are zero when the molecule has no such pair. The standard deviation is the
/// population one. Atoms whose element is not in `species_universe` only
/// contribute to the total count.
pub fn simple_descriptors(mol: &Molecule, species_universe: &[u32], cc_bond_cut: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 + 2 * species_universe.len());
    out.push(mol.len() as f64);
    let counts: Vec<f64> = species_universe
        .iter()
        .map(|&z| mol.atomic_numbers.iter().filter(|&&a| a == z).count() as f64)
        .collect();
    out.extend(&counts);
    out.extend(counts.iter().map(|&c| if c > 0.0 { 1.0 } else { 0.0 }));

    let carbons: Vec<usize> = (0..mol.len())
        .filter(|&i| mol.atomic_numbers[i] == CARBON)
        .collect();
    let mut distances = Vec::new();
    for (k, &i) in carbons.iter().enumerate() {
        for &j in &carbons[k + 1..] {
            let d = mol.distance(i, j);
            if d < cc_bond_cut {
                distances.push(d);
            }
        }
    }
    if distances.is_empty() {
        out.extend([0.0, 0.0]);
    } else {
        let n = distances.len() as f64;
        let mean = distances.iter().sum::<f64>() / n;
        let var = distances
            .iter()
            .map(|d| (d - mean) * (d - mean))
            .sum::<f64>()
            / n;
        out.extend([mean, var.sqrt()]);
    }
    out
}

pub fn simple_descriptor_labels(species_universe: &[u32]) -> Vec<String> {
    let name = |z: u32| {
        elements::symbol(z)
            .map(str::to_string)
            .unwrap_or_else(|| z.to_string())
    };
    let mut out = vec!["sd:n_atoms".to_string()];
    out.extend(
        species_universe
            .iter()
            .map(|&z| format!("sd:count:{}", name(z))),
    );
    out.extend(
        species_universe
            .iter()
            .map(|&z| format!("sd:present:{}", name(z))),
    );
    out.push("sd:cc_mean".into());
    out.push("sd:cc_std".into());
    out
}
