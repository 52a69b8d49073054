use molt_core::chemdata::synthetic::{random_molecule, random_rotation};
use molt_core::chemdata::Molecule;
use molt_core::descriptors::{SoapCalculator, SoapParams};
use molt_core::nets::{Painn, PainnConfig, Readout};
use molt_core::rng::stream;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::{ensure, Outcome};

const TOL: f64 = 1e-8;
const N_TRANSFORMS: usize = 50;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn fixtures() -> Vec<Molecule> {
    [5, 8, 11]
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut rng = stream(41, "symmetry-fixture", i as u64);
            random_molecule(&mut rng, format!("fx{i}"), n, &[1, 6, 7, 8])
        })
        .collect()
}

struct Worst {
    soap: f64,
    soap_atomic: f64,
    painn: [f64; 2],
    scalars: f64,
    vectors: f64,
}

pub fn run() -> Outcome {
    let soap = SoapCalculator::new(
        SoapParams::new(5.0, 6, 6, 0.5, vec![1, 6, 7, 8]).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let nets: Vec<Painn> = [Readout::Mean, Readout::Sum]
        .into_iter()
        .map(|readout| {
            Painn::new(
                PainnConfig {
                    readout,
                    ..PainnConfig::default()
                },
                3,
            )
            .unwrap()
        })
        .collect();
    let mut w = Worst {
        soap: 0.0,
        soap_atomic: 0.0,
        painn: [0.0; 2],
        scalars: 0.0,
        vectors: 0.0,
    };
    for (fi, mol) in fixtures().iter().enumerate() {
        let base_soap = soap.molecular(mol).unwrap();
        let base_atomic: Vec<Vec<f64>> = (0..mol.len())
            .map(|i| soap.atomic(mol, i).unwrap())
            .collect();
        let base_pred: Vec<f64> = nets.iter().map(|n| n.predict_one(mol).unwrap()).collect();
        let base_state = nets[0].state(mol).unwrap();
        let mut rng = stream(42, "symmetry-transforms", fi as u64);
        for _ in 0..N_TRANSFORMS {
            let r = random_rotation(&mut rng);
            let t = [
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ];
            let mut order: Vec<usize> = (0..mol.len()).collect();
            order.shuffle(&mut rng);
            let moved = mol.transformed(&r, t).permuted(&order);

            w.soap = w
                .soap
                .max(max_diff(&base_soap, &soap.molecular(&moved).unwrap()));
            for (k, &old) in order.iter().enumerate() {
                let a = soap.atomic(&moved, k).unwrap();
                w.soap_atomic = w.soap_atomic.max(max_diff(&base_atomic[old], &a));
            }
            for (i, net) in nets.iter().enumerate() {
                let d = (net.predict_one(&moved).unwrap() - base_pred[i]).abs();
                w.painn[i] = w.painn[i].max(d);
            }

            // scalars follow the permutation; vectors also rotate
            let st = nets[0].state(&moved).unwrap();
            let f = st.s.ncols();
            for (k, &old) in order.iter().enumerate() {
                for c in 0..f {
                    w.scalars = w.scalars.max((st.s[(k, c)] - base_state.s[(old, c)]).abs());
                    for a in 0..3 {
                        let rotated: f64 =
                            (0..3).map(|b| r[a][b] * base_state.v[(old, b, c)]).sum();
                        w.vectors = w.vectors.max((st.v[(k, a, c)] - rotated).abs());
                    }
                }
            }
        }
    }
    let detail = format!(
        "max |diff| soap {:.1e}, soap atomic {:.1e}, painn mean/sum {:.1e}/{:.1e}, \
         painn scalars {:.1e}, painn vectors {:.1e}",
        w.soap, w.soap_atomic, w.painn[0], w.painn[1], w.scalars, w.vectors
    );
    let worst = [
        w.soap,
        w.soap_atomic,
        w.painn[0],
        w.painn[1],
        w.scalars,
        w.vectors,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    ensure(worst < TOL, || detail.clone())?;
    Ok(detail)
}
