use std::f64::consts::PI;

use marsris::geometry::Vec3;
use marsris::propagation::{db_to_linear, free_space_path_loss, LinkBudget};
use marsris::ris::{
    aperture_cell_gain, cascade_received_power, element_positions, steering_phase_profile,
    PhaseConfiguration, RisKind, RisPanel, StarMode,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn panel(rows: usize, cols: usize, kind: RisKind) -> RisPanel {
    RisPanel::facing(
        0,
        Vec3::new(0.0, 0.0, 5.0),
        0.0,
        0.0,
        rows,
        cols,
        0.03,
        kind,
    )
    .unwrap()
}

fn tx() -> Vec3 {
    Vec3::new(300.0, 120.0, 20.0)
}

fn rx() -> Vec3 {
    Vec3::new(250.0, -200.0, 1.0)
}

fn signal(p: &RisPanel, cfg: &PhaseConfiguration, a: Vec3, b: Vec3) -> f64 {
    cascade_received_power(p, cfg, a, b, &LinkBudget::default())
        .unwrap()
        .signal_dbm
}

/// Per-element two-leg Friis amplitudes with the cos^q pattern.
fn element_amplitudes(p: &RisPanel, a: Vec3, b: Vec3) -> Vec<f64> {
    let link = LinkBudget::default();
    element_positions(p)
        .iter()
        .map(|e| {
            let (d1, d2) = (a.distance(*e), e.distance(b));
            let c1 = p.normal().dot(a - *e) / d1;
            let c2 = p.normal().dot(b - *e) / d2;
            let db = link.eirp_plus_rx_gain_dbm()
                - free_space_path_loss(d1, link.frequency_hz).unwrap()
                - free_space_path_loss(d2, link.frequency_hz).unwrap();
            db_to_linear(db).sqrt() * (c1 * c2).powf(p.element_gain_exponent)
        })
        .collect()
}

#[test]
fn steered_cascade_equals_sum_of_element_amplitudes() {
    let p = panel(6, 5, RisKind::Passive);
    let cfg = steering_phase_profile(&p, tx(), rx(), 5e9).unwrap();
    let sum: f64 = element_amplitudes(&p, tx(), rx()).iter().sum();
    let got = signal(&p, &cfg, tx(), rx());
    assert!((got - 20.0 * sum.log10()).abs() < 1e-9, "{got}");
}

#[test]
fn steering_beats_exhaustive_phase_search() {
    let p = panel(1, 3, RisKind::Passive);
    let best = signal(
        &p,
        &steering_phase_profile(&p, tx(), rx(), 5e9).unwrap(),
        tx(),
        rx(),
    );
    let levels = 16;
    for i in 0..levels * levels * levels {
        let phases = [i % levels, (i / levels) % levels, i / (levels * levels)]
            .map(|k| k as f64 * 2.0 * PI / levels as f64);
        let cfg = PhaseConfiguration::from_radians(phases).unwrap();
        assert!(signal(&p, &cfg, tx(), rx()) <= best + 1e-9);
    }
}

#[test]
fn steering_beats_random_search() {
    let p = panel(2, 4, RisKind::Passive);
    let best = signal(
        &p,
        &steering_phase_profile(&p, tx(), rx(), 5e9).unwrap(),
        tx(),
        rx(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5000 {
        let cfg =
            PhaseConfiguration::from_radians((0..8).map(|_| rng.gen_range(0.0..2.0 * PI))).unwrap();
        assert!(signal(&p, &cfg, tx(), rx()) <= best + 1e-9);
    }
}

#[test]
fn array_gain_of_sixteen_elements() {
    let far_tx = Vec3::new(4000.0, 3000.0, 5.0);
    let far_rx = Vec3::new(3000.0, -4000.0, 5.0);
    let one = panel(1, 1, RisKind::Passive);
    let p = panel(4, 4, RisKind::Passive);
    let single = signal(&one, &PhaseConfiguration::zeros(1), far_tx, far_rx);
    let steered = signal(
        &p,
        &steering_phase_profile(&p, far_tx, far_rx, 5e9).unwrap(),
        far_tx,
        far_rx,
    );
    assert!((steered - single - 20.0 * 16f64.log10()).abs() < 0.1);
}

#[test]
fn kind_scalings_are_exact() {
    let passive = panel(3, 3, RisKind::Passive);
    let cfg = steering_phase_profile(&passive, tx(), rx(), 5e9).unwrap();
    let base = signal(&passive, &cfg, tx(), rx());
    let with = |k| signal(&passive.with_kind(k).unwrap(), &cfg, tx(), rx());

    assert!((with(RisKind::active(7.0)) - base - 7.0).abs() < 1e-9);
    let star = RisKind::Star {
        mode: StarMode::Reflect,
        reflect_magnitude: 0.5,
        transmit_magnitude: 1.0,
    };
    assert!((with(star) - base - 20.0 * 0.5f64.log10()).abs() < 1e-9);
    assert!(
        (with(RisKind::SemiPassive {
            csi_available: false
        }) - base)
            .abs()
            < 1e-12
    );

    let g_cell = aperture_cell_gain(&passive, 5e9);
    for gain in [0.0, 3.0, 10.0, 17.5] {
        let amp = RisKind::Amplifying {
            amp_gain_db: gain,
            noise_figure_db: 5.0,
            amplified_noise: true,
        };
        let expected = base + gain + 20.0 * g_cell.log10();
        assert!((with(amp) - expected).abs() < 1e-9, "gain {gain}");
    }
}

#[test]
fn noise_injection_by_kind() {
    let link = LinkBudget::default();
    let p = panel(4, 4, RisKind::Passive);
    let cfg = steering_phase_profile(&p, tx(), rx(), 5e9).unwrap();
    let noise = |k| {
        cascade_received_power(&p.with_kind(k).unwrap(), &cfg, tx(), rx(), &link)
            .unwrap()
            .effective_noise_dbm
    };
    assert_eq!(noise(RisKind::Passive), link.noise_power_dbm);
    assert_eq!(
        noise(RisKind::star(StarMode::Reflect)),
        link.noise_power_dbm
    );
    assert!(noise(RisKind::active(10.0)) > link.noise_power_dbm);
    assert!(noise(RisKind::amplifying()) > link.noise_power_dbm);
    let quiet = RisKind::Amplifying {
        amp_gain_db: 10.0,
        noise_figure_db: 5.0,
        amplified_noise: false,
    };
    assert_eq!(noise(quiet), link.noise_power_dbm);
    // More amplifier gain, more noise.
    let loud = RisKind::Amplifying {
        amp_gain_db: 20.0,
        noise_figure_db: 5.0,
        amplified_noise: true,
    };
    assert!(noise(loud) > noise(RisKind::amplifying()));
}

#[test]
fn configuration_phases_stay_in_range() {
    let cfg = PhaseConfiguration::from_radians([-1e-18, 2.0 * PI, 7.0 * PI, -3.0, 1e6]).unwrap();
    assert!(cfg.phases().iter().all(|p| (0.0..2.0 * PI).contains(p)));
}

proptest! {
    #[test]
    fn cascade_is_reciprocal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = panel(3, 4, RisKind::Passive);
        let mut front = || Vec3::new(rng.gen_range(5.0..500.0), rng.gen_range(-500.0..500.0), rng.gen_range(-50.0..50.0));
        let (a, b) = (front(), front());
        let cfg = PhaseConfiguration::from_radians((0..12).map(|i| i as f64 * 0.7 + seed as f64 * 1e-3)).unwrap();
        prop_assert!((signal(&p, &cfg, a, b) - signal(&p, &cfg, b, a)).abs() < 1e-9);
    }

    #[test]
    fn passive_power_bounded_by_coherent_sum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = panel(2, 3, RisKind::Passive);
        let cfg = PhaseConfiguration::from_radians((0..6).map(|_| rng.gen_range(0.0..7.0))).unwrap();
        let bound: f64 = element_amplitudes(&p, tx(), rx()).iter().sum();
        prop_assert!(signal(&p, &cfg, tx(), rx()) <= 20.0 * bound.log10() + 1e-9);
    }

    #[test]
    fn steering_is_optimal_against_perturbation(seed in any::<u64>(), k in 0usize..12, delta in 0.01f64..6.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = panel(3, 4, RisKind::Passive);
        let target = Vec3::new(rng.gen_range(10.0..800.0), rng.gen_range(-800.0..800.0), rng.gen_range(-20.0..20.0));
        let cfg = steering_phase_profile(&p, tx(), target, 5e9).unwrap();
        let mut phases = cfg.phases().to_vec();
        phases[k] += delta;
        let perturbed = PhaseConfiguration::from_radians(phases).unwrap();
        prop_assert!(signal(&p, &perturbed, tx(), target) <= signal(&p, &cfg, tx(), target) + 1e-9);
    }
}
