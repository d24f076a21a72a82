//! Built-in acceptance suite: ten numbered criteria covering the coherent
//! gain law, the path-loss identity, the energy budget, quantization loss,
//! optimizer dominance, beam shape and scan loss on the reference array,
//! calibration fidelity, an independent brute-force cross-check, and
//! byte-level reproducibility.
//!
//! The suite is callable from the CLI (`star-ris validate`) and from the
//! `acceptance` integration test. Report rendering is deterministic: two
//! runs with the same seed produce identical bytes at any thread count.

use crate::beamform::{
    exhaustive_search, greedy_multistart, greedy_optimize, half_power_beamwidth_deg, pattern_sweep,
    quantized_conjugate, uniform_grid_deg, SteeringTarget,
};
use crate::channel::AntennaPattern;
use crate::element::{codebook_phase, split_coefficients, CalibrationCurves, ElementState};
use crate::geometry::{ArrayLayout, Side, TerminalPosition};
use crate::link::{
    element_terms, path_loss_from_aligned, power_from_terms, received_power, Scenario, Terminal,
};
use crate::scenario::ScenarioFile;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};
use std::time::Instant;

/// Master seed used when none is given on the command line.
pub const DEFAULT_SEED: u64 = 7;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Wall-clock cost; excluded from the rendered report so that reports
    /// stay byte-identical across runs.
    pub duration_ms: u128,
}

/// Run criteria 1 through 9 with the given master seed.
pub fn run_all(seed: u64) -> Vec<CriterionReport> {
    vec![
        timed(1, "coherent-gain-law", coherent_gain_law),
        timed(2, "path-loss-identity", || path_loss_identity(seed)),
        timed(3, "energy-budget", || energy_budget(seed)),
        timed(4, "quantization-loss", || quantization_loss(seed)),
        timed(5, "oracle-dominance", || oracle_dominance(seed)),
        timed(6, "beamwidth", beamwidth),
        timed(7, "scan-loss", scan_loss),
        timed(8, "calibration-fidelity", calibration_fidelity),
        timed(9, "brute-force-equivalence", || {
            brute_force_equivalence(seed)
        }),
    ]
}

/// Run the full suite including the reproducibility criterion, which
/// executes criteria 1-9 twice under thread pools of different sizes and
/// compares the rendered reports byte for byte.
pub fn run_full(seed: u64) -> (Vec<CriterionReport>, String) {
    let start = Instant::now();
    let pool_a = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool");
    let pool_b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .expect("three-thread pool");
    let run_a = pool_a.install(|| run_all(seed));
    let run_b = pool_b.install(|| run_all(seed));
    let render_a = render_report(seed, &run_a);
    let render_b = render_report(seed, &run_b);
    let identical = render_a == render_b;
    let mut reports = run_b;
    reports.push(CriterionReport {
        id: 10,
        name: "reproducibility",
        passed: identical,
        detail: if identical {
            "reports byte-identical across 1-thread and 3-thread pools".into()
        } else {
            "reports differ between thread pools".into()
        },
        duration_ms: start.elapsed().as_millis(),
    });
    let rendered = render_report(seed, &reports);
    (reports, rendered)
}

/// Deterministic text report: one line per criterion plus a summary.
pub fn render_report(seed: u64, reports: &[CriterionReport]) -> String {
    let mut out = format!("acceptance suite (seed {seed})\n");
    for r in reports {
        out.push_str(&format!(
            "criterion {:02} {} {:<24} {}\n",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail,
        ));
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    out.push_str(&format!("result: {passed}/{} passed\n", reports.len()));
    out
}

fn timed<F: FnOnce() -> (bool, String)>(id: u32, name: &'static str, f: F) -> CriterionReport {
    let start = Instant::now();
    let (passed, detail) = f();
    CriterionReport {
        id,
        name,
        passed,
        detail,
        duration_ms: start.elapsed().as_millis(),
    }
}

// ---------------------------------------------------------------------
// shared generators

fn isotropic_terminal(x: f64, y: f64, z: f64) -> Terminal {
    Terminal::new(
        TerminalPosition::from_cartesian(x, y, z),
        AntennaPattern::Isotropic,
    )
}

/// Random desk-scale scenario: terminals drawn on their own half-spaces,
/// zeniths kept off grazing so every element keeps a nonzero response.
fn random_scenario(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Scenario {
    let draw = |rng: &mut ChaCha8Rng, z_sign: f64| {
        let range: f64 = rng.random_range(0.8..6.0);
        let zenith: f64 = rng.random_range(0.0..1.1);
        let azimuth: f64 = rng.random_range(0.0..TAU);
        let (sin_z, cos_z) = zenith.sin_cos();
        let (sin_a, cos_a) = azimuth.sin_cos();
        TerminalPosition::from_cartesian(
            range * sin_z * cos_a,
            range * sin_z * sin_a,
            z_sign * range * cos_z,
        )
    };
    Scenario {
        layout: ArrayLayout::new(rows, cols, 0.058, 0.058).expect("valid layout"),
        carrier_frequency: 2.6e9,
        tx: Terminal::new(draw(rng, 1.0), AntennaPattern::Isotropic),
        rx_t: Terminal::new(draw(rng, -1.0), AntennaPattern::Isotropic),
        rx_r: Terminal::new(draw(rng, 1.0), AntennaPattern::Isotropic),
        element_pattern: AntennaPattern::cosine_auto(1.0).expect("valid pattern"),
        tx_power: 1.0,
        noise_power_t: 1e-12,
        noise_power_r: 1e-12,
        calibration: CalibrationCurves::default(),
    }
}

fn random_states(rng: &mut ChaCha8Rng, n: usize, bits: u32) -> Vec<ElementState> {
    (0..n)
        .map(|_| ElementState {
            phase_code_t: rng.random_range(0..(1u32 << bits)) as u16,
            phase_code_r: rng.random_range(0..(1u32 << bits)) as u16,
            bits,
            bias_voltage: rng.random_range(2.0..20.0),
            pa_current_ma: rng.random_range(0.0..20.0),
            efficiency: rng.random_range(0.2..1.0),
        })
        .collect()
}

fn reference_setup() -> (Scenario, Vec<ElementState>) {
    let parsed = ScenarioFile::reference()
        .build(None)
        .expect("reference scenario builds");
    let states = parsed.states();
    (parsed.scenario, states)
}

// ---------------------------------------------------------------------
// criterion 1: coherent-gain law

fn coherent_gain_law() -> (bool, String) {
    // a vanishing pitch equalizes every per-element magnitude bit-exactly,
    // so the N^2 law must hold through the full evaluation path
    let sizes = [1usize, 4, 16, 32];
    let mut powers = Vec::new();
    for &n in &sizes {
        let scenario = Scenario {
            layout: ArrayLayout::new(1, n, 1e-12, 1e-12).expect("layout"),
            carrier_frequency: 2.6e9,
            tx: isotropic_terminal(0.0, 0.0, 2.0),
            rx_t: isotropic_terminal(0.0, 0.0, -2.0),
            rx_r: isotropic_terminal(0.5, 0.0, 2.0),
            element_pattern: AntennaPattern::Isotropic,
            tx_power: 1.0,
            noise_power_t: 1e-12,
            noise_power_r: 1e-12,
            calibration: CalibrationCurves::default(),
        };
        let states = scenario.uniform_states(&ElementState::new(1).expect("state"));
        let terms = element_terms(&scenario, &states, Side::Transmit).expect("terms");
        let phases: Vec<f64> = terms.iter().map(|t| t.path_phase).collect();
        powers.push(power_from_terms(scenario.tx_power, &terms, &phases));
    }
    let mut max_err: f64 = 0.0;
    for (i, &n) in sizes.iter().enumerate() {
        let expect = (n * n) as f64;
        let err = (powers[i] / powers[0] - expect).abs() / expect;
        max_err = max_err.max(err);
    }
    (
        max_err <= 1e-9,
        format!("max relative error {max_err:.3e} over N in {{1,4,16,32}} (limit 1e-9)"),
    )
}

// ---------------------------------------------------------------------
// criterion 2: path-loss identity

fn path_loss_identity(seed: u64) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x02));
    let mut max_err: f64 = 0.0;
    for trial in 0..100 {
        let rows = rng.random_range(1..=3);
        let cols = rng.random_range(1..=4);
        let scenario = random_scenario(&mut rng, rows, cols);
        let states = random_states(&mut rng, rows * cols, 1);
        let side = if trial % 2 == 0 {
            Side::Transmit
        } else {
            Side::Reflect
        };
        let terms = element_terms(&scenario, &states, side).expect("terms");
        let phases: Vec<f64> = terms.iter().map(|t| t.path_phase).collect();
        let power = power_from_terms(scenario.tx_power, &terms, &phases);
        let pl = path_loss_from_aligned(&terms);
        let err = (scenario.tx_power / power / pl - 1.0).abs();
        max_err = max_err.max(err);
    }
    (
        max_err <= 1e-12,
        format!("max relative error {max_err:.3e} over 100 scenarios (limit 1e-12)"),
    )
}

// ---------------------------------------------------------------------
// criterion 3: energy budget

fn energy_budget(seed: u64) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x03));
    let curves = CalibrationCurves::default();
    let mut violations = 0usize;
    for _ in 0..100_000 {
        let bias = rng.random_range(-5.0..30.0);
        let eta: f64 = rng.random_range(1e-6..1.0);
        let split = split_coefficients(bias, eta, &curves).expect("split");
        if split.eta_t + split.eta_r != eta {
            violations += 1;
        }
    }
    (
        violations == 0,
        format!("{violations} budget violations in 100000 random biases (exact equality required)"),
    )
}

// ---------------------------------------------------------------------
// criterion 4: 1-bit quantization loss

fn quantization_loss(seed: u64) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x04));
    let trials = 10_000;
    let mut sum_ratio = 0.0;
    for _ in 0..trials {
        let scenario = random_scenario(&mut rng, 4, 8);
        let states = scenario.uniform_states(&ElementState::new(1).expect("state"));
        let target = SteeringTarget::Position {
            side: Side::Transmit,
            position: scenario.rx_t.position,
        };
        let qc = quantized_conjugate(&scenario, &target, 1, &states).expect("quantized");
        sum_ratio += qc.power / qc.bound;
    }
    let mean = sum_ratio / trials as f64;
    (
        (0.355..=0.455).contains(&mean),
        format!("mean quantized/continuous power ratio {mean:.4} over 10000 geometries (band [0.355, 0.455], theory 0.405)"),
    )
}

// ---------------------------------------------------------------------
// criterion 5: oracle dominance

fn oracle_dominance(seed: u64) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x05));
    let trials = 200;
    let mut chain_violations = 0usize;
    let mut near_optimal = 0usize;
    for trial in 0..trials {
        let n = rng.random_range(2..=10usize);
        let scenario = random_scenario(&mut rng, 1, n);
        let states = random_states(&mut rng, n, 1);
        let side = if trial % 2 == 0 {
            Side::Transmit
        } else {
            Side::Reflect
        };
        let target = SteeringTarget::Position {
            side,
            position: scenario.receiver(side).position,
        };
        let qc = quantized_conjugate(&scenario, &target, 1, &states).expect("quantized");
        let greedy = greedy_multistart(&scenario, &target, 1, &states, 16).expect("greedy");
        let oracle = exhaustive_search(&scenario, &target, 1, &states, 20).expect("oracle");
        if !(oracle.power >= greedy.power && greedy.power >= qc.power) {
            chain_violations += 1;
        }
        if greedy.power >= 0.95 * oracle.power {
            near_optimal += 1;
        }
    }
    let passed = chain_violations == 0 && near_optimal * 100 >= trials * 99;
    (
        passed,
        format!(
            "chain violations {chain_violations}/200, restarted greedy within 95% of optimum in {near_optimal}/200 (need 0 and >=198)"
        ),
    )
}

// ---------------------------------------------------------------------
// criteria 6-7: beam shape on the reference array

/// Optimize toward a transmit-side steering angle and sweep the pattern.
fn steered_pattern(
    scenario: &Scenario,
    states: &[ElementState],
    steer_deg: f64,
) -> Vec<crate::beamform::PatternSample> {
    let target = SteeringTarget::Angles {
        side: Side::Transmit,
        zenith: steer_deg.to_radians(),
        azimuth: 0.0,
    };
    let qc = quantized_conjugate(scenario, &target, 1, states).expect("quantized");
    let greedy = greedy_optimize(scenario, &target, 1, states, &qc.config, 8).expect("greedy");
    let grid = uniform_grid_deg(-80.0, 80.0, 0.5).expect("grid");
    pattern_sweep(scenario, &greedy.config, Side::Transmit, &grid, 0.0, states).expect("sweep")
}

fn beamwidth() -> (bool, String) {
    let (scenario, states) = reference_setup();
    let samples = steered_pattern(&scenario, &states, 0.0);
    match half_power_beamwidth_deg(&samples) {
        Some(width) => (
            (12.0..=18.0).contains(&width),
            format!(
                "3 dB beamwidth {width:.2} deg at boresight (band [12, 18], measured reference 16)"
            ),
        ),
        None => (false, "no half-power crossings found".into()),
    }
}

fn scan_loss() -> (bool, String) {
    let (scenario, states) = reference_setup();
    let peak = |steer: f64| -> f64 {
        steered_pattern(&scenario, &states, steer)
            .iter()
            .map(|s| s.power_w)
            .fold(0.0f64, f64::max)
    };
    let p0 = peak(0.0);
    let p45 = peak(45.0);
    let p52 = peak(52.0);
    let drop45 = 10.0 * (p0 / p45).log10();
    let drop52 = 10.0 * (p0 / p52).log10();
    let passed = (1.0..=4.0).contains(&drop45) && drop52 > drop45;
    (
        passed,
        format!(
            "scan loss {drop45:.2} dB at 45 deg (band [1, 4]), {drop52:.2} dB at 52 deg (must exceed 45 deg loss)"
        ),
    )
}

// ---------------------------------------------------------------------
// criterion 8: calibration fidelity

fn calibration_fidelity() -> (bool, String) {
    let curves = CalibrationCurves::default();
    let span = curves.pa_gain_db(20.0) - curves.pa_gain_db(0.0);
    let exact = span == 12.0;
    let mut monotone = true;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=1000 {
        let ma = 20.0 * i as f64 / 1000.0;
        let g = curves.pa_gain_db(ma);
        if g < prev {
            monotone = false;
        }
        prev = g;
    }
    let split_span = curves.split_ratio_span_db();
    let split_ok = split_span >= 6.0;
    (
        exact && monotone && split_ok,
        format!(
            "pa gain span {span} dB (exactly 12 required), monotone {monotone}, split ratio range {split_span:.2} dB (>= 6 required)"
        ),
    )
}

// ---------------------------------------------------------------------
// criterion 9: brute-force equivalence

/// Independent amplitude-path evaluation: per-element hop coefficients
/// multiplied term by term and summed naively, with geometry, angles and
/// free-space factors recomputed from scratch.
fn oracle_received_power(scenario: &Scenario, states: &[ElementState], side: Side) -> f64 {
    let lambda = crate::SPEED_OF_LIGHT / scenario.carrier_frequency;
    let four_pi = 4.0 * PI;
    let aperture = scenario.element_pattern.peak_gain() * lambda * lambda / four_pi;
    let tx_pos = scenario.tx.position.cartesian();
    let rx = scenario.receiver(side);
    let rx_pos = rx.position.cartesian();
    let rows = scenario.layout.n_rows();
    let cols = scenario.layout.n_cols();
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let gain_at = |terminal: [f64; 3], pattern: &AntennaPattern, element: [f64; 3]| {
        let to_center = [-terminal[0], -terminal[1], -terminal[2]];
        let to_element = [
            element[0] - terminal[0],
            element[1] - terminal[1],
            element[2] - terminal[2],
        ];
        let cosang = (to_center[0] * to_element[0]
            + to_center[1] * to_element[1]
            + to_center[2] * to_element[2])
            / (norm(to_center) * norm(to_element));
        pattern.gain(cosang.clamp(-1.0, 1.0).acos())
    };
    let mut y = Complex64::new(0.0, 0.0);
    let mut idx = 0usize;
    for row in 1..=rows {
        for col in 1..=cols {
            let pos = [
                (col as f64 - (cols as f64 + 1.0) / 2.0) * scenario.layout.pitch_x(),
                ((rows as f64 + 1.0) / 2.0 - row as f64) * scenario.layout.pitch_y(),
                0.0,
            ];
            let state = &states[idx];
            idx += 1;
            let d_tx = [tx_pos[0] - pos[0], tx_pos[1] - pos[1], tx_pos[2] - pos[2]];
            let d_rx = [rx_pos[0] - pos[0], rx_pos[1] - pos[1], rx_pos[2] - pos[2]];
            let r_t = norm(d_tx);
            let r_r = norm(d_rx);
            let theta_inc = (d_tx[2] / r_t).clamp(-1.0, 1.0).acos();
            let theta_dep = (d_rx[2] * side.z_sign() / r_r).clamp(-1.0, 1.0).acos();
            let g_t = gain_at(tx_pos, &scenario.tx.pattern, pos);
            let g_r = gain_at(rx_pos, &rx.pattern, pos);
            let f =
                Complex64::from_polar((g_t * aperture / four_pi).sqrt() / r_t, -TAU * r_t / lambda);
            let g =
                Complex64::from_polar((g_r * aperture / four_pi).sqrt() / r_r, -TAU * r_r / lambda);
            let split =
                split_coefficients(state.bias_voltage, state.efficiency, &scenario.calibration)
                    .expect("split");
            let eta = match side {
                Side::Transmit => split.eta_t,
                Side::Reflect => split.eta_r,
            };
            let mu = scenario.element_pattern.amplitude(theta_inc)
                * scenario.element_pattern.amplitude(theta_dep);
            let g_n = scenario.calibration.pa_gain_linear(state.pa_current_ma);
            let gamma = Complex64::from_polar(
                eta.sqrt() * mu * g_n.sqrt(),
                codebook_phase(state.code(side), state.bits),
            );
            y += f * gamma * g;
        }
    }
    scenario.tx_power * y.norm_sqr()
}

fn brute_force_equivalence(seed: u64) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x09));
    let layouts = [(1usize, 1usize), (1, 2), (2, 1), (2, 2), (1, 3), (1, 4)];
    let mut max_err: f64 = 0.0;
    for trial in 0..100 {
        let (rows, cols) = layouts[rng.random_range(0..layouts.len())];
        let scenario = random_scenario(&mut rng, rows, cols);
        let mut states = random_states(&mut rng, rows * cols, 2);
        let side = if trial % 2 == 0 {
            Side::Transmit
        } else {
            Side::Reflect
        };
        if trial % 3 == 0 {
            // aligned-ish configuration: quantized conjugate codes
            let target = SteeringTarget::Position {
                side,
                position: scenario.receiver(side).position,
            };
            let qc = quantized_conjugate(&scenario, &target, 2, &states).expect("quantized");
            qc.config.apply_to_states(&mut states).expect("apply");
        }
        let p_main = received_power(&scenario, &states, side).expect("power");
        let p_oracle = oracle_received_power(&scenario, &states, side);
        let denom = p_main.max(p_oracle);
        if denom > 0.0 {
            let err = (p_main - p_oracle).abs() / denom;
            max_err = max_err.max(err);
        }
    }
    (
        max_err <= 1e-10,
        format!("max relative deviation {max_err:.3e} from the amplitude-path oracle over 100 scenarios (limit 1e-10)"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_report_for_fixed_seed() {
        let a = render_report(7, &run_all(7));
        let b = render_report(7, &run_all(7));
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_still_pass() {
        // spot-check one cheap criterion under a different seed
        let (ok, detail) = path_loss_identity(12345);
        assert!(ok, "{detail}");
    }
}
