//! Analytic-label corpora for exercising the transfer pipeline at desk scale.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::chemdata::synthetic::random_molecule;
use crate::chemdata::{Entry, LabeledDataset, Molecule, Unit};
use crate::nets::cosine_cutoff;
use crate::rng::stream;

pub const SPECIES: [u32; 3] = [1, 6, 8];

fn atom_term(z: u32) -> f64 {
    match z {
        1 => -0.5,
        6 => -1.1,
        8 => -1.6,
        _ => 0.0,
    }
}

fn pair_strength(a: u32, b: u32) -> f64 {
    let (a, b) = (a.min(b), a.max(b));
    match (a, b) {
        (1, 1) => 0.2,
        (1, 6) => -0.45,
        (1, 8) => -0.6,
        (6, 6) => -0.7,
        (6, 8) => -0.9,
        (8, 8) => 0.3,
        _ => 0.0,
    }
}

/// Smooth, size-extensive function of the structure: per-atom terms plus
/// species-dependent pair terms that vanish beyond 3.5 Å.
pub fn reference_property(mol: &Molecule) -> f64 {
    let mut f: f64 = mol.atomic_numbers.iter().map(|&z| atom_term(z)).sum();
    for i in 0..mol.len() {
        for j in 0..i {
            let r = mol.distance(i, j);
            let shape = (-(r - 1.3).powi(2) / 0.3).exp() + 0.3 * (-(r - 2.4).powi(2) / 0.2).exp();
            f += pair_strength(mol.atomic_numbers[i], mol.atomic_numbers[j])
                * shape
                * cosine_cutoff(r, 3.5);
        }
    }
    f
}

pub struct TransferFixture {
    /// Labels f(structure).
    pub pretrain: LabeledDataset,
    /// Labels a·f + b + noise on different structures.
    pub finetune: LabeledDataset,
    pub noise_sd: f64,
}

/// `n_pre` cheaply labeled and `n_fine` accurately labeled random H/C/O
/// molecules of 3–8 atoms. The fine-tuning noise has standard deviation
/// `noise_fraction` times the population std of f over the pre-training corpus.
pub fn transfer_fixture(
    seed: u64,
    n_pre: usize,
    n_fine: usize,
    a: f64,
    b: f64,
    noise_fraction: f64,
) -> TransferFixture {
    let make = |tag: &str, n: usize| -> Vec<Molecule> {
        let mut rng = stream(seed, tag, 0);
        (0..n)
            .map(|i| {
                let atoms = rng.random_range(3..=8);
                random_molecule(&mut rng, format!("{tag}-{i:04}"), atoms, &SPECIES)
            })
            .collect()
    };
    let pre_mols = make("pre", n_pre);
    let fine_mols = make("fine", n_fine);
    let f_pre: Vec<f64> = pre_mols.iter().map(reference_property).collect();
    let mean = f_pre.iter().sum::<f64>() / f_pre.len().max(1) as f64;
    let std =
        (f_pre.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / f_pre.len().max(1) as f64).sqrt();
    let noise_sd = noise_fraction * std;
    let mut noise_rng = stream(seed, "fine-noise", 0);
    let normal = Normal::new(0.0, noise_sd.max(0.0)).expect("finite noise scale");
    let pre = pre_mols
        .into_iter()
        .zip(f_pre)
        .map(|(molecule, label)| Entry { molecule, label })
        .collect();
    let fine = fine_mols
        .into_iter()
        .map(|molecule| {
            let label = a * reference_property(&molecule) + b + normal.sample(&mut noise_rng);
            Entry { molecule, label }
        })
        .collect();
    TransferFixture {
        pretrain: LabeledDataset::new(Unit::Dimensionless, pre).expect("unique ids"),
        finetune: LabeledDataset::new(Unit::Dimensionless, fine).expect("unique ids"),
        noise_sd,
    }
}
