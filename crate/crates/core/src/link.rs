//! Coherent link evaluation: per-element responses and channel
//! coefficients combined into received powers, path losses and SNRs for
//! the transmission and reflection receivers.
//!
//! Received power follows the coherent-sum form
//!
//! ```text
//! P_r = P_t / (16 pi^2) * | sum_n sqrt(G_t G_r) / (r_n^t r_n^r)
//!                            * sigma_n * exp(j (phi_n - Phi_n)) |^2
//! ```
//!
//! with the amplifier gain living entirely inside `sigma_n` and
//! `Phi_n = 2 pi (r_n^t + r_n^r) / lambda`. Sums use compensated (Kahan)
//! accumulation in a fixed element order so results are reproducible at
//! any parallelism setting.

use crate::channel::{path_phase, AntennaPattern};
use crate::element::{element_rcs, CalibrationCurves, ElementState};
use crate::error::{Error, Result};
use crate::geometry::{link_geometry, ArrayLayout, Side, TerminalPosition, Vec3};
use crate::SPEED_OF_LIGHT;
use num_complex::Complex64;
use std::f64::consts::PI;

/// A transmitter or receiver: a position and an antenna pattern whose
/// boresight points at the array center.
#[derive(Debug, Clone, PartialEq)]
pub struct Terminal {
    pub position: TerminalPosition,
    pub pattern: AntennaPattern,
}

impl Terminal {
    pub fn new(position: TerminalPosition, pattern: AntennaPattern) -> Self {
        Self { position, pattern }
    }

    /// Gain toward a specific element, measured off the boresight that
    /// points at the array center.
    fn gain_toward(&self, element_pos: Vec3) -> f64 {
        let p = self.position.cartesian();
        let to_center = [-p[0], -p[1], -p[2]];
        let to_element = [
            element_pos[0] - p[0],
            element_pos[1] - p[1],
            element_pos[2] - p[2],
        ];
        let nc = (to_center[0].powi(2) + to_center[1].powi(2) + to_center[2].powi(2)).sqrt();
        let ne = (to_element[0].powi(2) + to_element[1].powi(2) + to_element[2].powi(2)).sqrt();
        if nc == 0.0 || ne == 0.0 {
            return self.pattern.peak_gain();
        }
        let dot = to_center[0] * to_element[0]
            + to_center[1] * to_element[1]
            + to_center[2] * to_element[2];
        let angle = (dot / (nc * ne)).clamp(-1.0, 1.0).acos();
        self.pattern.gain(angle)
    }
}

/// Full immutable description of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub layout: ArrayLayout,
    /// Carrier frequency (Hz).
    pub carrier_frequency: f64,
    /// Transmitter, on the reflection side (z > 0).
    pub tx: Terminal,
    /// Transmission receiver, behind the surface (z < 0).
    pub rx_t: Terminal,
    /// Reflection receiver, in front of the surface (z > 0).
    pub rx_r: Terminal,
    /// Element radiation pattern (power domain).
    pub element_pattern: AntennaPattern,
    /// Transmit power (W).
    pub tx_power: f64,
    /// Noise power at the transmission receiver (W).
    pub noise_power_t: f64,
    /// Noise power at the reflection receiver (W).
    pub noise_power_r: f64,
    /// Hardware calibration tables.
    pub calibration: CalibrationCurves,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "carrier frequency must be positive, got {}",
                self.carrier_frequency
            )));
        }
        if !(self.tx_power > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transmit power must be positive, got {}",
                self.tx_power
            )));
        }
        if !(self.noise_power_t > 0.0) || !(self.noise_power_r > 0.0) {
            return Err(Error::InvalidParameter(
                "noise powers must be positive".into(),
            ));
        }
        if self.tx.position.side() != Some(Side::Reflect) {
            return Err(Error::Configuration(
                "transmitter must illuminate the top face (z > 0)".into(),
            ));
        }
        if self.rx_t.position.side() != Some(Side::Transmit) {
            return Err(Error::Configuration(
                "transmission receiver must lie behind the surface (z < 0)".into(),
            ));
        }
        if self.rx_r.position.side() != Some(Side::Reflect) {
            return Err(Error::Configuration(
                "reflection receiver must lie in front of the surface (z > 0)".into(),
            ));
        }
        Ok(())
    }

    /// Carrier wavelength (m).
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn n_elements(&self) -> usize {
        self.layout.n_elements()
    }

    pub fn receiver(&self, side: Side) -> &Terminal {
        match side {
            Side::Transmit => &self.rx_t,
            Side::Reflect => &self.rx_r,
        }
    }

    pub fn noise_power(&self, side: Side) -> f64 {
        match side {
            Side::Transmit => self.noise_power_t,
            Side::Reflect => self.noise_power_r,
        }
    }

    /// Copy of the scenario with the receiver on `side` repositioned.
    pub fn with_receiver_position(&self, side: Side, position: TerminalPosition) -> Scenario {
        let mut s = self.clone();
        match side {
            Side::Transmit => s.rx_t.position = position,
            Side::Reflect => s.rx_r.position = position,
        }
        s
    }

    /// Uniform element-state vector covering the whole array.
    pub fn uniform_states(&self, template: &ElementState) -> Vec<ElementState> {
        vec![template.clone(); self.n_elements()]
    }
}

/// Received powers, path losses and SNRs for both receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkResult {
    /// Received power at the transmission receiver (W).
    pub p_rt: f64,
    /// Received power at the reflection receiver (W).
    pub p_rr: f64,
    /// Path loss P_t / P_rt (dimensionless, `f64::INFINITY` when no power
    /// reaches the receiver).
    pub pl_t: f64,
    /// Path loss P_t / P_rr.
    pub pl_r: f64,
    /// SNR at the transmission receiver (dimensionless).
    pub snr_t: f64,
    /// SNR at the reflection receiver.
    pub snr_r: f64,
}

/// One element's contribution, ready for phase assignment: the real
/// amplitude and the propagation phase of the two-hop path.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ElementTerm {
    pub amplitude: f64,
    pub path_phase: f64,
}

/// Per-element amplitudes and propagation phases for the receiver on
/// `side`, in row-major element order.
pub(crate) fn element_terms(
    scenario: &Scenario,
    states: &[ElementState],
    side: Side,
) -> Result<Vec<ElementTerm>> {
    scenario.validate()?;
    let n = scenario.n_elements();
    if states.len() != n {
        return Err(Error::Configuration(format!(
            "expected {n} element states, got {}",
            states.len()
        )));
    }
    let wavelength = scenario.wavelength();
    let receiver = scenario.receiver(side);
    let mut terms = Vec::with_capacity(n);
    for (pos, state) in scenario.layout.positions().iter().zip(states) {
        let (r_tx, incident_zenith) = link_geometry(*pos, &scenario.tx.position)?;
        let (r_rx, depart_zenith) = link_geometry(*pos, &receiver.position)?;
        let response = element_rcs(
            state,
            incident_zenith,
            depart_zenith,
            wavelength,
            &scenario.element_pattern,
            side,
            &scenario.calibration,
        )?;
        let g_tx = scenario.tx.gain_toward(*pos);
        let g_rx = receiver.gain_toward(*pos);
        terms.push(ElementTerm {
            amplitude: (g_tx * g_rx).sqrt() / (r_tx * r_rx) * response.sigma,
            path_phase: path_phase(r_tx + r_rx, wavelength),
        });
    }
    Ok(terms)
}

/// Compensated complex summation in iteration order.
pub(crate) fn kahan_complex_sum<I: IntoIterator<Item = Complex64>>(terms: I) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    for t in terms {
        let y = t - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    sum
}

/// Compensated real summation in iteration order.
pub(crate) fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    sum
}

pub(crate) fn power_from_terms(tx_power: f64, terms: &[ElementTerm], phases: &[f64]) -> f64 {
    let sum = kahan_complex_sum(
        terms
            .iter()
            .zip(phases)
            .map(|(t, &phi)| Complex64::from_polar(t.amplitude, phi - t.path_phase)),
    );
    tx_power / (16.0 * PI * PI) * sum.norm_sqr()
}

pub(crate) fn path_loss_from_aligned(terms: &[ElementTerm]) -> f64 {
    let total = kahan_sum(terms.iter().map(|t| t.amplitude));
    let denom = total * total;
    if denom == 0.0 {
        f64::INFINITY
    } else {
        16.0 * PI * PI / denom
    }
}

/// Received power (W) at the receiver on `side` using each element's own
/// codebook phase for that side.
pub fn received_power(scenario: &Scenario, states: &[ElementState], side: Side) -> Result<f64> {
    let phases: Vec<f64> = states.iter().map(|s| s.phase(side)).collect();
    received_power_with_phases(scenario, states, side, &phases)
}

/// Received power with explicit per-element phases (continuous values or
/// jittered codebook phases).
pub fn received_power_with_phases(
    scenario: &Scenario,
    states: &[ElementState],
    side: Side,
    phases: &[f64],
) -> Result<f64> {
    let terms = element_terms(scenario, states, side)?;
    if phases.len() != terms.len() {
        return Err(Error::Configuration(format!(
            "expected {} phases, got {}",
            terms.len(),
            phases.len()
        )));
    }
    Ok(power_from_terms(scenario.tx_power, &terms, phases))
}

/// Minimum achievable path loss on `side`: every element contribution
/// summed with aligned phase. Returns `f64::INFINITY` when every element
/// amplitude is zero.
pub fn min_path_loss(scenario: &Scenario, states: &[ElementState], side: Side) -> Result<f64> {
    let terms = element_terms(scenario, states, side)?;
    Ok(path_loss_from_aligned(&terms))
}

/// Signal-to-noise ratio as a plain power ratio.
pub fn snr(received: f64, noise_power: f64) -> Result<f64> {
    if !(noise_power > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise power must be positive, got {noise_power}"
        )));
    }
    Ok(received / noise_power)
}

/// Complete link report for both receivers.
pub fn link_budget(scenario: &Scenario, states: &[ElementState]) -> Result<LinkResult> {
    let p_rt = received_power(scenario, states, Side::Transmit)?;
    let p_rr = received_power(scenario, states, Side::Reflect)?;
    let pl = |p: f64| {
        if p == 0.0 {
            f64::INFINITY
        } else {
            scenario.tx_power / p
        }
    };
    Ok(LinkResult {
        p_rt,
        p_rr,
        pl_t: pl(p_rt),
        pl_r: pl(p_rr),
        snr_t: snr(p_rt, scenario.noise_power_t)?,
        snr_r: snr(p_rr, scenario.noise_power_r)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::effective_aperture;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scenario(layout: ArrayLayout) -> Scenario {
        Scenario {
            layout,
            carrier_frequency: 2.6e9,
            tx: Terminal::new(
                TerminalPosition::from_cartesian(0.0, 0.0, 2.0),
                AntennaPattern::Isotropic,
            ),
            rx_t: Terminal::new(
                TerminalPosition::from_cartesian(0.0, 0.0, -2.0),
                AntennaPattern::Isotropic,
            ),
            rx_r: Terminal::new(
                TerminalPosition::from_cartesian(1.0, 0.0, 2.0),
                AntennaPattern::Isotropic,
            ),
            element_pattern: AntennaPattern::Isotropic,
            tx_power: 1.0,
            noise_power_t: 1e-12,
            noise_power_r: 1e-12,
            calibration: CalibrationCurves::default(),
        }
    }

    fn passive_state() -> ElementState {
        ElementState {
            pa_current_ma: 0.0,
            ..ElementState::new(1).unwrap()
        }
    }

    #[test]
    fn single_element_double_friis() {
        let s = scenario(ArrayLayout::new(1, 1, 0.058, 0.058).unwrap());
        let states = vec![passive_state()];
        // conjugate phase for a single element: any constant aligns
        let terms = element_terms(&s, &states, Side::Transmit).unwrap();
        let p = power_from_terms(s.tx_power, &terms, &[terms[0].path_phase]);
        let lambda = s.wavelength();
        let friis_hop = (lambda / (4.0 * PI * 2.0)).powi(2);
        // eta_t = 0.4 at the default bias, passive amplifier
        let expect = 0.4 * friis_hop * friis_hop * s.tx_power;
        assert!(
            (p - expect).abs() < 1e-12 * expect,
            "got {p}, expected {expect}"
        );
    }

    #[test]
    fn opposite_codes_cancel() {
        let s = scenario(ArrayLayout::new(1, 2, 0.058, 0.058).unwrap());
        let mut states = vec![passive_state(), passive_state()];
        states[1].phase_code_t = 1; // pi against 0
        let p = received_power(&s, &states, Side::Transmit).unwrap();
        let bound = s.tx_power / min_path_loss(&s, &states, Side::Transmit).unwrap();
        assert!(p < 1e-25 * bound, "cancellation left {p} of {bound}");
    }

    #[test]
    fn conjugate_phases_reach_the_bound() {
        let s = scenario(ArrayLayout::new(2, 3, 0.058, 0.058).unwrap());
        let states = s.uniform_states(&ElementState::new(1).unwrap());
        let terms = element_terms(&s, &states, Side::Reflect).unwrap();
        let phases: Vec<f64> = terms.iter().map(|t| t.path_phase).collect();
        let p = received_power_with_phases(&s, &states, Side::Reflect, &phases).unwrap();
        let pl = min_path_loss(&s, &states, Side::Reflect).unwrap();
        let identity = s.tx_power / p;
        assert!(
            (identity - pl).abs() < 1e-12 * pl,
            "P_t/P_r = {identity} vs PL_min = {pl}"
        );
    }

    #[test]
    fn colocated_elements_obey_n_squared() {
        // a vanishing pitch makes every element term bit-identical, so the
        // coherent gain law is exact
        let mut powers = Vec::new();
        for n in [1usize, 4, 16, 32] {
            let s = scenario(ArrayLayout::new(1, n, 1e-12, 1e-12).unwrap());
            let states = s.uniform_states(&passive_state());
            let terms = element_terms(&s, &states, Side::Transmit).unwrap();
            let phases: Vec<f64> = terms.iter().map(|t| t.path_phase).collect();
            powers.push(power_from_terms(s.tx_power, &terms, &phases));
        }
        for (i, &n) in [1usize, 4, 16, 32].iter().enumerate() {
            let ratio = powers[i] / powers[0];
            let expect = (n * n) as f64;
            assert!(
                (ratio - expect).abs() < 1e-9 * expect,
                "N={n}: ratio {ratio}"
            );
        }
    }

    #[test]
    fn min_path_loss_never_rises_with_more_elements() {
        let mut prev = f64::INFINITY;
        for n in 1..=6 {
            let s = scenario(ArrayLayout::new(1, n, 0.058, 0.058).unwrap());
            let states = s.uniform_states(&passive_state());
            let pl = min_path_loss(&s, &states, Side::Transmit).unwrap();
            assert!(pl <= prev * (1.0 + 1e-12), "PL rose at N={n}");
            prev = pl;
        }
    }

    #[test]
    fn all_zero_amplitudes_give_infinite_path_loss() {
        let terms = vec![
            ElementTerm {
                amplitude: 0.0,
                path_phase: 1.0,
            };
            4
        ];
        assert_eq!(path_loss_from_aligned(&terms), f64::INFINITY);
    }

    #[test]
    fn snr_contract() {
        let s = snr(1e-9, 1e-12).unwrap();
        assert!((s - 1000.0).abs() < 1e-9, "got {s}");
        assert_eq!(snr(0.0, 1e-12).unwrap(), 0.0);
        assert!(snr(1e-9, 0.0).is_err());
        assert!(snr(1e-9, -1.0).is_err());
    }

    #[test]
    fn mirror_receivers_see_equal_power() {
        let mut s = scenario(ArrayLayout::new(2, 2, 0.058, 0.058).unwrap());
        s.rx_t.position = TerminalPosition::from_cartesian(0.7, 0.0, -1.9);
        s.rx_r.position = TerminalPosition::from_cartesian(0.7, 0.0, 1.9);
        let states = s.uniform_states(&ElementState::new(1).unwrap());
        let result = link_budget(&s, &states).unwrap();
        assert_eq!(result.p_rt, result.p_rr);
        assert_eq!(result.snr_t, result.snr_r);
    }

    #[test]
    fn power_linear_in_tx_power_and_amplifier_gain() {
        let s = scenario(ArrayLayout::new(2, 2, 0.058, 0.058).unwrap());
        let states = s.uniform_states(&ElementState::new(1).unwrap());
        let p1 = received_power(&s, &states, Side::Reflect).unwrap();
        let mut s2 = s.clone();
        s2.tx_power = 3.5;
        let p2 = received_power(&s2, &states, Side::Reflect).unwrap();
        assert!((p2 / p1 - 3.5).abs() < 1e-12);

        // shifting the whole gain table by +3.0103 dB doubles the power
        let mut s3 = s.clone();
        s3.calibration = CalibrationCurves::new(
            vec![
                (0.0, 0.0),
                (5.0, 4.0 + 10.0 * 2f64.log10()),
                (10.0, 10.0 + 10.0 * 2f64.log10()),
                (20.0, 12.0 + 10.0 * 2f64.log10()),
            ],
            vec![(2.0, 0.863), (11.0, 0.5), (20.0, 0.137)],
        )
        .unwrap();
        // 0 mA anchors both tables at the passive baseline; use 20 mA
        let p3 = received_power(&s3, &states, Side::Reflect).unwrap();
        assert!((p3 / p1 - 2.0).abs() < 1e-9, "ratio {}", p3 / p1);
    }

    #[test]
    fn mismatched_state_count_rejected() {
        let s = scenario(ArrayLayout::new(2, 2, 0.058, 0.058).unwrap());
        let states = vec![passive_state(); 3];
        assert!(matches!(
            received_power(&s, &states, Side::Transmit),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn wrong_half_space_rejected() {
        let mut s = scenario(ArrayLayout::new(1, 1, 0.058, 0.058).unwrap());
        s.rx_t.position = TerminalPosition::from_cartesian(0.0, 0.0, 2.0);
        assert!(matches!(s.validate(), Err(Error::Configuration(_))));
    }

    #[test]
    fn coherent_bound_holds_for_random_configurations() {
        let s = scenario(ArrayLayout::new(2, 4, 0.058, 0.058).unwrap());
        let states = s.uniform_states(&ElementState::new(2).unwrap());
        let terms = element_terms(&s, &states, Side::Transmit).unwrap();
        let bound = s.tx_power / path_loss_from_aligned(&terms);
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..10_000 {
            let phases: Vec<f64> = (0..terms.len())
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            let p = power_from_terms(s.tx_power, &terms, &phases);
            assert!(p <= bound * (1.0 + 1e-9), "power {p} above bound {bound}");
        }
    }

    #[test]
    fn single_element_aperture_consistency() {
        // sanity anchor for the sigma convention: the peak element gain
        // raises sigma through the boresight aperture
        let mut s = scenario(ArrayLayout::new(1, 1, 0.058, 0.058).unwrap());
        s.element_pattern = AntennaPattern::cosine_auto(1.0).unwrap();
        let states = vec![passive_state()];
        let p_cos = received_power(&s, &states, Side::Transmit).unwrap();
        s.element_pattern = AntennaPattern::Isotropic;
        let p_iso = received_power(&s, &states, Side::Transmit).unwrap();
        // boresight link: aperture ratio 4 on each face, amplitude ratio 16
        let lambda = s.wavelength();
        let a = effective_aperture(1.0, lambda);
        let a4 = effective_aperture(4.0, lambda);
        let expect = (a4 / a).powi(2);
        assert!((p_cos / p_iso - expect).abs() < 1e-9 * expect);
    }
}
