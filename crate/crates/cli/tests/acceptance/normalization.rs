use molt_core::rng::stream;
use molt_core::transfer::{assign_discriminative_lrs, LabelScaler};
use rand::Rng;

use crate::{ensure, Outcome};

const CASES: u64 = 500;

pub fn run() -> Outcome {
    let (mut round_trip, mut moments, mut affine) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..CASES {
        let mut rng = stream(31, "normalization", case);
        let n = rng.random_range(2..200);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        // offsets up to 100 spreads keep the conditioning of y - mu reasonable
        let offset = scale * rng.random_range(-100.0..100.0);
        let y: Vec<f64> = (0..n)
            .map(|_| offset + scale * rng.random_range(-1.0..1.0))
            .collect();
        let Ok(s) = LabelScaler::fit(&y) else {
            continue;
        };

        let z = s.apply_all(&y);
        for (a, b) in s.invert_all(&z).iter().zip(&y) {
            round_trip = round_trip.max((a - b).abs() / b.abs().max(1.0));
        }
        let m = z.iter().sum::<f64>() / n as f64;
        let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        moments = moments.max(m.abs()).max((sd - 1.0).abs());

        // cheap labels that are an exact positive-slope affine map of the truth
        let a = 10f64.powf(rng.random_range(-2.0..2.0));
        let b = a * scale * rng.random_range(-100.0..100.0);
        let cheap: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let zc = LabelScaler::fit(&cheap)
            .map_err(|e| e.to_string())?
            .apply_all(&cheap);
        for (u, v) in zc.iter().zip(&z) {
            affine = affine.max((u - v).abs());
        }
    }
    let detail = format!(
        "{CASES} cases: round trip {round_trip:.1e}, z mean/std {moments:.1e}, affine {affine:.1e}"
    );
    ensure(
        round_trip < 1e-12 && moments < 1e-10 && affine < 1e-10,
        || detail.clone(),
    )?;
    Ok(detail)
}

pub fn discriminative() -> Outcome {
    let groups: Vec<String> = ["embedding", "interactions", "readout"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let lrs: Vec<f64> = assign_discriminative_lrs(&groups, 5e-4, 5.0)
        .into_iter()
        .map(|(_, lr)| lr)
        .collect();
    ensure(lrs == [2e-5, 1e-4, 5e-4], || format!("got {lrs:?}"))?;
    Ok(format!("{lrs:?}"))
}
