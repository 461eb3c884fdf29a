//! Distributional checks on the candidate stream.

use slfv_core::{next_candidate, replica_stream, RadiusMeasure, Window};

/// Upper 1% point of the chi-square law with 13 degrees of freedom
/// (scipy.stats.chi2.ppf(0.99, 13)).
const CHI2_99_DF13: f64 = 27.68824961045705;
/// Same with 99 degrees of freedom.
const CHI2_99_DF99: f64 = 134.64161685578915;

fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    let mut p = (-lambda).exp();
    for j in 1..=k {
        p *= lambda / j as f64;
    }
    p
}

fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

#[test]
fn candidate_counts_are_poisson() {
    let m = RadiusMeasure::unit();
    let w = Window::new(0.0, 2.0, 0.0, 1.0).unwrap();
    // area 2, duration 5, unit mass
    let (horizon, lambda) = (5.0, 10.0);
    let samples = 10_000u64;
    // bins: <= 4, 5, ..., 16, >= 17
    let (lo, hi) = (4u64, 17u64);
    let mut observed = vec![0u64; (hi - lo + 1) as usize];
    for s in 0..samples {
        let mut rng = replica_stream(11, s);
        let (mut t, mut n) = (0.0, 0u64);
        loop {
            let e = next_candidate(&mut rng, &w, &m, t).unwrap();
            if e.time > horizon {
                break;
            }
            t = e.time;
            n += 1;
        }
        observed[(n.clamp(lo, hi) - lo) as usize] += 1;
    }
    let below: f64 = (0..=lo).map(|k| poisson_pmf(k, lambda)).sum();
    let above = 1.0 - (0..hi).map(|k| poisson_pmf(k, lambda)).sum::<f64>();
    let mut probs = vec![below];
    probs.extend((lo + 1..hi).map(|k| poisson_pmf(k, lambda)));
    probs.push(above);
    let expected: Vec<f64> = probs.iter().map(|p| p * samples as f64).collect();
    assert!(expected.iter().all(|&e| e >= 5.0));
    let stat = chi_square(&observed, &expected);
    assert!(stat <= CHI2_99_DF13, "chi-square {stat} > {CHI2_99_DF13}");
}

#[test]
fn candidate_centres_are_uniform() {
    let m = RadiusMeasure::unit();
    let w = Window::new(-3.0, 7.0, 10.0, 20.0).unwrap();
    let n = 100_000;
    let mut rng = replica_stream(12, 0);
    let mut cells = vec![0u64; 100];
    let mut t = 0.0;
    for _ in 0..n {
        let e = next_candidate(&mut rng, &w, &m, t).unwrap();
        assert!(e.time > t);
        t = e.time;
        let i = ((e.center.x - w.x_lo) / w.width() * 10.0) as usize;
        let j = ((e.center.y - w.y_lo) / w.height() * 10.0) as usize;
        cells[i.min(9) * 10 + j.min(9)] += 1;
    }
    let expected = vec![n as f64 / 100.0; 100];
    let stat = chi_square(&cells, &expected);
    assert!(stat <= CHI2_99_DF99, "chi-square {stat} > {CHI2_99_DF99}");
}

#[test]
fn mixture_radii_follow_the_weights() {
    use slfv_core::Atom;
    // P(r = 2) = 1/4 by the masses
    let m = RadiusMeasure::new(vec![Atom { r: 1.0, mass: 3.0 }, Atom { r: 2.0, mass: 1.0 }], vec![]).unwrap();
    let w = Window::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let mut rng = replica_stream(13, 0);
    let n = 40_000;
    let mut big = 0;
    let mut t = 0.0;
    for _ in 0..n {
        let e = next_candidate(&mut rng, &w, &m, t).unwrap();
        t = e.time;
        if e.radius == 2.0 {
            big += 1;
        }
    }
    let p = big as f64 / n as f64;
    let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
    assert!((p - 0.25).abs() <= 3.0 * sigma, "{p}");
    // total mass 4 on unit area: mean gap 1/4
    assert!((t / n as f64 - 0.25).abs() <= 3.0 * 0.25 / (n as f64).sqrt());
}
