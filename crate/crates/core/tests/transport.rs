mod common;

use kinetic_swarm::io::{load_snapshot, write_phase_csv, write_sphere_csv, SnapshotDoc};
use kinetic_swarm::transport::{w1_subsampled, Solver};
use kinetic_swarm::{project_measure, w1, w1_exact, Ensemble, Particle, PhaseEnsemble, Vec3};
use proptest::prelude::*;

use common::{brute_force_assignment, cost_table};

fn ensemble(dim: usize, coords: &[(f64, f64, f64, f64)], weights: &[f64]) -> PhaseEnsemble {
    let particles =
        coords.iter().zip(weights).map(|(&(a, b, c, d), &w)| Particle::new(Vec3::new(a, b, 0.0), Vec3::new(c, d, 0.0), w)).collect();
    PhaseEnsemble::new(dim, particles, 0.0).unwrap()
}

/// Atom `i` with weight `k_i / m` becomes `k_i` copies of weight `1/m`.
fn expand(coords: &[(f64, f64, f64, f64)], counts: &[usize]) -> PhaseEnsemble {
    let m: usize = counts.iter().sum();
    let mut cs = Vec::new();
    for (c, &k) in coords.iter().zip(counts) {
        cs.extend(std::iter::repeat_n(*c, k));
    }
    ensemble(2, &cs, &vec![1.0 / m as f64; m])
}

fn coord() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-2.0..2.0f64, -2.0..2.0f64, -1.5..1.5f64, -1.5..1.5f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weighted_plan_matches_brute_force_on_copies(
        a in prop::collection::vec((coord(), 1usize..4), 2..4),
        b in prop::collection::vec((coord(), 1usize..4), 2..4),
    ) {
        // Equal total counts so the copies give a square assignment.
        let total_a: usize = a.iter().map(|p| p.1).sum();
        let total_b: usize = b.iter().map(|p| p.1).sum();
        prop_assume!(total_a == total_b && total_a <= 8);
        let (ca, ka): (Vec<_>, Vec<_>) = a.into_iter().unzip();
        let (cb, kb): (Vec<_>, Vec<_>) = b.into_iter().unzip();
        let wa: Vec<f64> = ka.iter().map(|&k| k as f64 / total_a as f64).collect();
        let wb: Vec<f64> = kb.iter().map(|&k| k as f64 / total_b as f64).collect();
        let mu = ensemble(2, &ca, &wa);
        let nu = ensemble(2, &cb, &wb);
        let report = w1_exact(&mu, &nu).unwrap();
        let (ea, eb) = (expand(&ca, &ka), expand(&cb, &kb));
        let oracle = brute_force_assignment(&cost_table(ea.particles(), eb.particles()));
        prop_assert!((report.value - oracle).abs() <= 1e-9, "{} vs {}", report.value, oracle);
        for (i, p) in mu.particles().iter().enumerate() {
            let out: f64 = report.plan.iter().filter(|e| e.0 == i).map(|e| e.2).sum();
            prop_assert!((out - p.w).abs() <= 1e-12);
        }
    }

    #[test]
    fn distance_is_symmetric_and_respects_translation(
        a in prop::collection::vec(coord(), 6),
        b in prop::collection::vec(coord(), 6),
        shift in (-1.0..1.0f64, -1.0..1.0f64),
    ) {
        let w = vec![1.0 / 6.0; 6];
        let (mu, nu) = (ensemble(2, &a, &w), ensemble(2, &b, &w));
        let ab = w1_exact(&mu, &nu).unwrap();
        let ba = w1_exact(&nu, &mu).unwrap();
        prop_assert!((ab.value - ba.value).abs() <= 1e-12);
        prop_assert_eq!(ab.solver, Solver::Assignment);
        let moved: Vec<_> = a.iter().map(|&(x, y, u, v)| (x + shift.0, y + shift.1, u, v)).collect();
        let t = w1_exact(&mu, &ensemble(2, &moved, &w)).unwrap();
        prop_assert!((t.value - (shift.0 * shift.0 + shift.1 * shift.1).sqrt()).abs() <= 1e-12);
    }
}

#[test]
fn oversized_pairs_fall_back_to_subsampling() {
    let n = 1500;
    let make = |offset: f64| {
        let cs: Vec<_> = (0..n).map(|i| { let s = i as f64 / n as f64; (s, offset, (7.0 * s).cos(), (7.0 * s).sin()) }).collect();
        ensemble(2, &cs, &vec![1.0 / n as f64; n])
    };
    let (mu, nu) = (make(0.0), make(0.25));
    assert!(w1_exact(&mu, &nu).is_err());
    let report = w1(&mu, &nu, 3).unwrap();
    assert_eq!(report.solver, Solver::Subsampled);
    let se = report.std_error.unwrap();
    // Subsampled empirical distance is biased upward from the true 0.25.
    assert!(report.value >= 0.25 - 3.0 * se && report.value < 0.4, "{report:?}");
    assert_eq!(report, w1_subsampled(&mu, &nu, 1024, 16, 3).unwrap());
}

#[test]
fn snapshots_survive_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cs = [(0.1, -0.3, 1.25, -0.5), (2.0, 0.0, -0.75, 0.125), (-1.0, 1.0, 0.0, 1.0)];
    let ens = ensemble(2, &cs, &[0.25, 0.5, 0.25]);

    let csv_path = dir.path().join("snap.csv");
    write_phase_csv(&ens, std::fs::File::create(&csv_path).unwrap()).unwrap();
    let back = load_snapshot(&csv_path).unwrap().to_phase().unwrap();
    assert_eq!(back.particles(), ens.particles());
    assert_eq!(w1_exact(&ens, &back).unwrap().value, 0.0);

    let sph = project_measure(&ens, 2.0).unwrap();
    let json_path = dir.path().join("snap.json");
    std::fs::write(&json_path, serde_json::to_string(&SnapshotDoc::from_ensemble(&sph, Some(2.0))).unwrap()).unwrap();
    let sph_back = load_snapshot(&json_path).unwrap().to_sphere().unwrap();
    assert_eq!(sph_back, sph);

    let mut buf = Vec::new();
    write_sphere_csv(&sph, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("id,x1,x2,v1,v2,w\n"));
}
