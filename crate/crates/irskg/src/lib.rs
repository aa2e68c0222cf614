//! Secret-key generation over a reconfigurable reflecting surface under
//! spatially correlated Rayleigh fading.
//!
//! The library models a three-node network (two legitimate parties and a
//! passive eavesdropper) assisted by a rectangular surface of randomly
//! phase-shifted elements, and provides:
//!
//! * the surface geometry and its sinc spatial correlation matrix
//!   ([`geometry`]),
//! * the link budget turning distances, exponents and gains into path gains,
//!   noise powers and estimation variances ([`scenario`]),
//! * closed-form temporal correlation coefficients and covariance parameter
//!   vectors of the probing samples ([`stats`]),
//! * the closed-form secret-key rate and its determinant reference form
//!   ([`rate`]),
//! * a seeded Monte Carlo simulator of the probing protocol ([`sim`]) and
//!   oracle estimators validating every closed form ([`oracle`]),
//! * a probing-time optimizer with an exhaustive-search baseline
//!   ([`optim`]),
//! * the validation suite behind the `validate` command ([`validate`]).

pub mod cli;
pub mod config;
pub mod geometry;
pub mod optim;
pub mod oracle;
pub mod plan;
pub mod rate;
pub mod scenario;
pub mod sim;
pub mod special;
pub mod stats;
pub mod validate;

pub use geometry::{CorrelationMatrix, IrsGeometry};
pub use plan::ProbePlan;
pub use rate::{skg_rate, SkgRate};
pub use scenario::ScenarioConfig;
pub use stats::{CovarianceQuad, Regime, ScenarioContext};

#[cfg(doctest)]
mod booktests {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(unused)]
            pub struct $name;
        };
    }
    chapter!(Readme, "../../../README.md");
    chapter!(ChannelModel, "../../../book/src/channel-model.md");
    chapter!(Probing, "../../../book/src/probing.md");
    chapter!(Correlation, "../../../book/src/correlation.md");
    chapter!(RateChapter, "../../../book/src/rate.md");
    chapter!(Optimization, "../../../book/src/optimization.md");
    chapter!(Validation, "../../../book/src/validation.md");
}
