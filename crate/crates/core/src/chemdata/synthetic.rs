//! Random small molecules and rigid motions for fixtures and demos.

use rand::Rng;
use rand_distr::StandardNormal;

use super::Molecule;
use crate::rng::Stream;

fn random_unit(rng: &mut Stream) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-8 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Uniformly distributed rotation matrix (normalized random quaternion).
pub fn random_rotation(rng: &mut Stream) -> [[f64; 3]; 3] {
    let q: [f64; 4] = loop {
        let q: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            break [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        }
    };
    let [w, x, y, z] = q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Grows a molecule atom by atom, attaching each new atom 1.0–1.6 Å from a
/// random existing one and rejecting placements closer than 0.9 Å to any atom.
pub fn random_molecule(
    rng: &mut Stream,
    id: impl Into<String>,
    n_atoms: usize,
    species: &[u32],
) -> Molecule {
    assert!(n_atoms >= 1 && !species.is_empty());
    let mut positions: Vec<[f64; 3]> = vec![[0.0; 3]];
    while positions.len() < n_atoms {
        let anchor = positions[rng.random_range(0..positions.len())];
        let d = random_unit(rng);
        let r = rng.random_range(1.0..1.6);
        let p = [
            anchor[0] + r * d[0],
            anchor[1] + r * d[1],
            anchor[2] + r * d[2],
        ];
        if positions
            .iter()
            .all(|q| super::molecule::distance(q, &p) >= 0.9)
        {
            positions.push(p);
        }
    }
    let z = (0..n_atoms)
        .map(|_| species[rng.random_range(0..species.len())])
        .collect();
    Molecule::new(id, z, positions).expect("generated molecule is valid")
}
