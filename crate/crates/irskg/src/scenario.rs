//! Link budget: turns a physical scenario description into the numeric
//! constants every other module consumes.
//!
//! All large-scale quantities live here: path gains `beta` per link, the
//! receiver noise power, least-squares estimation-noise variances, the IRS
//! covariance scales `kappa`, and the inter-node spatial correlation
//! coefficients `rho = J0(2 pi d / lambda)`.

use crate::geometry::IrsGeometry;
use crate::plan::ProbePlan;
use crate::special::bessel_j0;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Thermal noise floor in dBm/Hz.
pub const THERMAL_FLOOR_DBM_HZ: f64 = -174.0;

/// Point-to-point links of the three-node-plus-surface network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    /// Alice - Bob (direct).
    Ab,
    /// Alice - Eve (direct).
    Ae,
    /// Bob - Eve (direct).
    Be,
    /// Alice - surface.
    Ar,
    /// Surface - Bob.
    Rb,
    /// Surface - Eve.
    Re,
}

impl Link {
    pub const ALL: [Link; 6] = [Link::Ab, Link::Ae, Link::Be, Link::Ar, Link::Rb, Link::Re];

    pub fn name(self) -> &'static str {
        match self {
            Link::Ab => "ab",
            Link::Ae => "ae",
            Link::Be => "be",
            Link::Ar => "ar",
            Link::Rb => "rb",
            Link::Re => "re",
        }
    }
}

/// Direct node pairs, used for the Bessel spatial correlation coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodePair {
    Ab,
    Ae,
    Be,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    /// Distances in meters, one per [`Link`] in `ALL` order.
    pub distances: [f64; 6],
    /// Path-loss exponents, one per link.
    pub exponents: [f64; 6],
    /// Antenna gains in dBi: Alice, Bob, Eve, surface.
    pub gain_a_dbi: f64,
    pub gain_b_dbi: f64,
    pub gain_e_dbi: f64,
    pub gain_r_dbi: f64,
    /// Reference loss in dB at `ref_distance_m`.
    pub ref_loss_db: f64,
    pub ref_distance_m: f64,
    /// Carrier frequency in Hz.
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    /// Transmit powers in watts.
    pub power_a_w: f64,
    pub power_b_w: f64,
    pub irs: IrsGeometry,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Invalid(String),
}

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ScenarioError::Invalid(msg) = self;
        write!(f, "invalid scenario: {msg}")
    }
}

impl std::error::Error for ScenarioError {}

/// Receiver noise power, identical at the three receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma2_a: f64,
    pub sigma2_b: f64,
    pub sigma2_e: f64,
}

/// Least-squares estimation-noise variances for one probing plan.
///
/// Naming follows the two probing steps: `direct_*` are the step-one
/// variances `sigma^2 / (P T_d)`, `reflected_*` the per-round variances
/// `sigma^2 / (P T_s)`, and `combined_*` the variances of the
/// direct-subtracted samples (sum of the two, since the step-one estimate is
/// subtracted from every round).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationVariances {
    /// At Alice, estimating from Bob's pilot (step 1).
    pub direct_a2: f64,
    /// At Bob, estimating from Alice's pilot (step 1).
    pub direct_b1: f64,
    /// At Eve, listening to Alice (step 1).
    pub direct_e1: f64,
    /// At Eve, listening to Bob (step 1).
    pub direct_e2: f64,
    pub reflected_a: f64,
    pub reflected_b: f64,
    pub reflected_ae: f64,
    pub reflected_be: f64,
    pub combined_za: f64,
    pub combined_zb: f64,
    pub combined_zae: f64,
    pub combined_zbe: f64,
}

impl ScenarioConfig {
    /// Reference scenario used by the shipped configs and the validation
    /// suite: a 70 m Alice-Bob link with Eve 0.15 m from Alice and the
    /// surface 4 m from both Alice and Eve, at 1 GHz with 10 MHz bandwidth,
    /// 5 dB noise figure, -30 dB reference loss at 1 m, and 4 dBi antennas
    /// (0 dBi at the surface).  `n_side` sets the square IRS size; element
    /// spacing is half a wavelength.
    pub fn reference(n_side: usize) -> Self {
        let wavelength = SPEED_OF_LIGHT / 1e9;
        let irs = IrsGeometry::square(n_side, 0.5, wavelength).expect("valid reference geometry");
        Self {
            // ab, ae, be, ar, rb, re
            distances: [70.0, 0.15, 69.85, 4.0, 70.04, 4.0],
            exponents: [4.8, 2.1, 4.8, 2.1, 2.2, 2.1],
            gain_a_dbi: 4.0,
            gain_b_dbi: 4.0,
            gain_e_dbi: 4.0,
            gain_r_dbi: 0.0,
            ref_loss_db: -30.0,
            ref_distance_m: 1.0,
            frequency_hz: 1e9,
            bandwidth_hz: 10e6,
            noise_figure_db: 5.0,
            power_a_w: 1.0,
            power_b_w: 1.0,
            irs,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (i, &d) in self.distances.iter().enumerate() {
            if !(d > 0.0) {
                return Err(ScenarioError::Invalid(format!(
                    "distance for link {} must be positive, got {d}",
                    Link::ALL[i].name()
                )));
            }
        }
        if !(self.power_a_w > 0.0) || !(self.power_b_w > 0.0) {
            return Err(ScenarioError::Invalid("transmit powers must be positive".into()));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(ScenarioError::Invalid("bandwidth must be positive".into()));
        }
        if !(self.frequency_hz > 0.0) {
            return Err(ScenarioError::Invalid("carrier frequency must be positive".into()));
        }
        if !(self.ref_distance_m > 0.0) {
            return Err(ScenarioError::Invalid("reference distance must be positive".into()));
        }
        let lambda = self.wavelength();
        let rel = (self.irs.wavelength - lambda).abs() / lambda;
        if rel > 1e-9 {
            return Err(ScenarioError::Invalid(format!(
                "geometry wavelength {} disagrees with c/frequency = {lambda}",
                self.irs.wavelength
            )));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    fn gains_db(&self, link: Link) -> f64 {
        match link {
            Link::Ab => self.gain_a_dbi + self.gain_b_dbi,
            Link::Ae => self.gain_a_dbi + self.gain_e_dbi,
            Link::Be => self.gain_b_dbi + self.gain_e_dbi,
            Link::Ar => self.gain_a_dbi + self.gain_r_dbi,
            Link::Rb => self.gain_r_dbi + self.gain_b_dbi,
            Link::Re => self.gain_r_dbi + self.gain_e_dbi,
        }
    }

    fn distance(&self, link: Link) -> f64 {
        self.distances[Link::ALL.iter().position(|&l| l == link).unwrap()]
    }

    fn exponent(&self, link: Link) -> f64 {
        self.exponents[Link::ALL.iter().position(|&l| l == link).unwrap()]
    }
}

/// Linear path gain of a link.
///
/// dB-domain: `beta[dB] = G_i + G_j - 10 zeta log10(d/d0) + ref_loss`,
/// so gain falls with distance and the reference-distance case reduces to
/// the reference loss plus antenna gains.
pub fn path_gain(scn: &ScenarioConfig, link: Link) -> f64 {
    let d = scn.distance(link);
    let zeta = scn.exponent(link);
    let db = scn.gains_db(link) - 10.0 * zeta * (d / scn.ref_distance_m).log10() + scn.ref_loss_db;
    10f64.powf(db / 10.0)
}

/// Receiver noise power from the thermal floor, bandwidth and noise figure:
/// `sigma^2[dBm] = -174 + 10 log10(BW) + NF`, converted to watts.  The three
/// receivers share one front-end model.
pub fn noise_power(scn: &ScenarioConfig) -> NoiseModel {
    let dbm = THERMAL_FLOOR_DBM_HZ + 10.0 * scn.bandwidth_hz.log10() + scn.noise_figure_db;
    let watts = 10f64.powf(dbm / 10.0) / 1e3;
    NoiseModel { sigma2_a: watts, sigma2_b: watts, sigma2_e: watts }
}

/// Inter-node spatial correlation coefficient `J0(2 pi d / lambda)` for a
/// direct node pair.
pub fn spatial_rho(scn: &ScenarioConfig, pair: NodePair) -> f64 {
    let link = match pair {
        NodePair::Ab => Link::Ab,
        NodePair::Ae => Link::Ae,
        NodePair::Be => Link::Be,
    };
    let d = scn.distance(link);
    bessel_j0(2.0 * std::f64::consts::PI * d / scn.wavelength())
}

/// Least-squares estimation-noise variances for a probing plan.
///
/// Step-one (direct) estimates use pilot length `T_d`, per-round estimates
/// use `T_s`; the noise of a direct-subtracted sample is the sum of the two
/// because the step-one estimate is subtracted from every round of the block.
pub fn estimation_variances(scn: &ScenarioConfig, plan: &ProbePlan) -> EstimationVariances {
    estimation_variances_at(scn, plan.t_d, plan.t_s)
}

/// Same as [`estimation_variances`] for raw `(T_d, T_s)` values; callers that
/// sweep or Taylor-expand over times use this without constructing a plan.
pub fn estimation_variances_at(scn: &ScenarioConfig, t_d: f64, t_s: f64) -> EstimationVariances {
    assert!(t_d > 0.0 && t_s > 0.0, "probe times must be positive");
    let noise = noise_power(scn);
    let (pa, pb) = (scn.power_a_w, scn.power_b_w);
    let direct_a2 = noise.sigma2_a / (pb * t_d);
    let direct_b1 = noise.sigma2_b / (pa * t_d);
    let direct_e1 = noise.sigma2_e / (pa * t_d);
    let direct_e2 = noise.sigma2_e / (pb * t_d);
    let reflected_a = noise.sigma2_a / (pb * t_s);
    let reflected_b = noise.sigma2_b / (pa * t_s);
    let reflected_ae = noise.sigma2_e / (pa * t_s);
    let reflected_be = noise.sigma2_e / (pb * t_s);
    EstimationVariances {
        direct_a2,
        direct_b1,
        direct_e1,
        direct_e2,
        reflected_a,
        reflected_b,
        reflected_ae,
        reflected_be,
        combined_za: direct_a2 + reflected_a,
        combined_zb: direct_b1 + reflected_b,
        combined_zae: direct_e1 + reflected_ae,
        combined_zbe: direct_e2 + reflected_be,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::ProbePlan;
    use approx::assert_relative_eq;

    fn scn() -> ScenarioConfig {
        ScenarioConfig::reference(4)
    }

    #[test]
    fn reference_scenario_is_valid() {
        scn().validate().unwrap();
    }

    #[test]
    fn path_gain_reference_distance() {
        let mut s = scn();
        s.distances[0] = 1.0; // ab at d0
        s.gain_a_dbi = 0.0;
        s.gain_b_dbi = 0.0;
        assert_relative_eq!(path_gain(&s, Link::Ab), 1e-3, max_relative = 1e-12);
    }

    #[test]
    fn path_gain_alice_surface() {
        // hand evaluation of the dB sum: 4 + 0 - 21*log10(4) - 30
        let want = 10f64.powf((4.0 - 21.0 * 4f64.log10() - 30.0) / 10.0);
        assert_relative_eq!(path_gain(&scn(), Link::Ar), want, max_relative = 1e-12);
        assert_relative_eq!(path_gain(&scn(), Link::Ar), 1.366_702_592_4e-4, max_relative = 1e-9);
    }

    #[test]
    fn doubling_distance_quarters_gain_at_exponent_two() {
        let mut s = scn();
        s.exponents[0] = 2.0;
        s.distances[0] = 10.0;
        let b1 = path_gain(&s, Link::Ab);
        s.distances[0] = 20.0;
        let b2 = path_gain(&s, Link::Ab);
        assert_relative_eq!(b1 / b2, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn gain_monotonicity() {
        let base = scn();
        let mut closer = base.clone();
        closer.distances[0] *= 0.9;
        assert!(path_gain(&closer, Link::Ab) > path_gain(&base, Link::Ab));
        let mut hotter = base.clone();
        hotter.gain_a_dbi += 1.0;
        assert!(path_gain(&hotter, Link::Ab) > path_gain(&base, Link::Ab));
        for link in Link::ALL {
            assert!(path_gain(&base, link) > 0.0);
        }
    }

    #[test]
    fn noise_power_reference() {
        // -174 + 70 + 5 = -99 dBm
        let n = noise_power(&scn());
        assert_relative_eq!(n.sigma2_a, 1.258_925_411_794_167e-13, max_relative = 1e-12);
        assert_eq!(n.sigma2_a, n.sigma2_b);
        assert_eq!(n.sigma2_a, n.sigma2_e);
    }

    #[test]
    fn noise_floor_definition() {
        let mut s = scn();
        s.noise_figure_db = 0.0;
        s.bandwidth_hz = 1.0;
        let n = noise_power(&s);
        assert_relative_eq!(10.0 * (n.sigma2_a * 1e3).log10(), -174.0, max_relative = 1e-12);
    }

    #[test]
    fn doubling_bandwidth_adds_three_db() {
        let mut s = scn();
        let n1 = noise_power(&s);
        s.bandwidth_hz *= 2.0;
        let n2 = noise_power(&s);
        let delta_db = 10.0 * (n2.sigma2_a / n1.sigma2_a).log10();
        assert_relative_eq!(delta_db, 10.0 * 2f64.log10(), max_relative = 1e-12);
    }

    #[test]
    fn spatial_rho_values() {
        let s = scn();
        let mut zero = s.clone();
        zero.distances[1] = 1e-30;
        assert_relative_eq!(spatial_rho(&zero, NodePair::Ae), 1.0, epsilon = 1e-12);
        // frozen independent evaluation of J0(2 pi 0.15 / lambda)
        assert_relative_eq!(spatial_rho(&s, NodePair::Ae), -0.304_860_247_639, max_relative = 1e-7);
        // far pair: asymptotic envelope bounds the magnitude
        assert!(spatial_rho(&s, NodePair::Ab).abs() < 0.03);
    }

    #[test]
    fn estimation_variances_unit_case() {
        let mut s = scn();
        s.power_a_w = 1.0;
        s.power_b_w = 1.0;
        s.bandwidth_hz = 1.0;
        // force sigma^2 = 1 W: -174 dBm floor cancelled by a matching NF
        s.noise_figure_db = 174.0 + 30.0;
        let plan = ProbePlan::new(10.0, 1.0, 1.0).unwrap();
        let v = estimation_variances(&s, &plan);
        assert_relative_eq!(v.direct_a2, 1.0, max_relative = 1e-12);
        assert_relative_eq!(v.reflected_a, 1.0, max_relative = 1e-12);
        assert_relative_eq!(v.combined_za, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn estimation_variances_reference_plan() {
        // direct arithmetic oracle at T_d = 40, T_s = 16
        let s = scn();
        let v = estimation_variances_at(&s, 40.0, 16.0);
        let sigma2 = noise_power(&s).sigma2_a;
        assert_relative_eq!(v.direct_a2, sigma2 / 40.0, max_relative = 1e-15);
        assert_relative_eq!(v.direct_b1, sigma2 / 40.0, max_relative = 1e-15);
        assert_relative_eq!(v.reflected_ae, sigma2 / 16.0, max_relative = 1e-15);
        assert_relative_eq!(v.combined_zbe, sigma2 / 40.0 + sigma2 / 16.0, max_relative = 1e-15);
    }

    #[test]
    fn combined_equals_sum_exactly() {
        let v = estimation_variances_at(&scn(), 13.0, 7.0);
        assert_eq!(v.combined_za, v.direct_a2 + v.reflected_a);
        assert_eq!(v.combined_zb, v.direct_b1 + v.reflected_b);
        assert_eq!(v.combined_zae, v.direct_e1 + v.reflected_ae);
        assert_eq!(v.combined_zbe, v.direct_e2 + v.reflected_be);
    }

    #[test]
    fn variances_scale_inversely_with_power() {
        let mut s = scn();
        let v1 = estimation_variances_at(&s, 10.0, 5.0);
        s.power_a_w *= 3.0;
        s.power_b_w *= 3.0;
        let v3 = estimation_variances_at(&s, 10.0, 5.0);
        assert_relative_eq!(v3.combined_za * 3.0, v1.combined_za, max_relative = 1e-12);
        assert_relative_eq!(v3.direct_e1 * 3.0, v1.direct_e1, max_relative = 1e-12);
    }

    #[test]
    fn long_direct_probe_leaves_reflected_noise() {
        let s = scn();
        let v = estimation_variances_at(&s, 1e12, 16.0);
        assert!(v.direct_a2 < 1e-24);
        assert_relative_eq!(v.combined_za, v.reflected_a, max_relative = 1e-10);
    }

    #[test]
    fn wavelength_mismatch_rejected() {
        let mut s = scn();
        s.frequency_hz = 2e9;
        assert!(s.validate().is_err());
    }
}
