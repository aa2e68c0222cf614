//! Probing-time allocation within one coherence block.
//!
//! Times are continuous positive reals in pilot-symbol units.  Out of a
//! probing budget `T_p`, each party spends `T_d` on the direct probe
//! (`2 T_d` total), leaving `T_r = T_p - 2 T_d` for surface-assisted rounds.
//! One round is two pilot slots of length `T_s`, so the block holds
//! `P = floor(T_r / (2 T_s))` rounds; leftover time is idle.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePlan {
    /// Total probing budget in symbols.
    pub t_p: f64,
    /// Direct-probe symbols per direction.
    pub t_d: f64,
    /// Reflected-probe symbols per slot.
    pub t_s: f64,
    /// Time left for surface-assisted probing: `t_p - 2 t_d`.
    pub t_r: f64,
    /// Number of phase-shift rounds in the block.
    pub rounds: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanError {
    NonPositiveTimes { t_d: f64, t_s: f64 },
    /// `t_d + t_s` exceeds `t_p / 2`, so not even one round fits.
    BudgetExceeded { t_p: f64, t_d: f64, t_s: f64 },
}

impl std::fmt::Display for PlanError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlanError::NonPositiveTimes { t_d, t_s } => {
                write!(f, "probe times must be positive (t_d={t_d}, t_s={t_s})")
            }
            PlanError::BudgetExceeded { t_p, t_d, t_s } => write!(
                f,
                "plan infeasible: t_d + t_s = {} exceeds t_p/2 = {} (t_d={t_d}, t_s={t_s})",
                t_d + t_s,
                t_p / 2.0
            ),
        }
    }
}

impl std::error::Error for PlanError {}

impl ProbePlan {
    pub fn new(t_p: f64, t_d: f64, t_s: f64) -> Result<Self, PlanError> {
        if !(t_d > 0.0) || !(t_s > 0.0) || !(t_p > 0.0) {
            return Err(PlanError::NonPositiveTimes { t_d, t_s });
        }
        let t_r = t_p - 2.0 * t_d;
        // T_s <= T_r/2 is the same budget as T_d + T_s <= T_p/2
        if t_s > t_r / 2.0 + 1e-12 * t_p {
            return Err(PlanError::BudgetExceeded { t_p, t_d, t_s });
        }
        let rounds = (t_r / (2.0 * t_s)).floor() as u32;
        debug_assert!(rounds >= 1);
        Ok(Self { t_p, t_d, t_s, t_r, rounds })
    }

    /// True when raw times satisfy the exact budget `t_d + t_s <= t_p / 2`.
    pub fn budget_ok(t_p: f64, t_d: f64, t_s: f64) -> bool {
        t_d > 0.0 && t_s > 0.0 && t_d + t_s <= t_p / 2.0 + 1e-12 * t_p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derives_rounds_and_remainder() {
        let p = ProbePlan::new(100.0, 25.0, 10.0).unwrap();
        assert_eq!(p.t_r, 50.0);
        assert_eq!(p.rounds, 2);
        let p = ProbePlan::new(100.0, 20.0, 5.0).unwrap();
        assert_eq!(p.rounds, 6);
    }

    #[test]
    fn exact_budget_boundary_gives_one_round() {
        let p = ProbePlan::new(100.0, 40.0, 10.0).unwrap();
        assert_eq!(p.rounds, 1);
    }

    #[test]
    fn rejects_budget_violation() {
        // t_d + t_s = 56 > 50
        assert!(matches!(
            ProbePlan::new(100.0, 40.0, 16.0),
            Err(PlanError::BudgetExceeded { .. })
        ));
        assert!(!ProbePlan::budget_ok(100.0, 40.0, 16.0));
        assert!(ProbePlan::budget_ok(100.0, 25.0, 10.0));
    }

    #[test]
    fn rejects_nonpositive_times() {
        assert!(matches!(ProbePlan::new(100.0, 0.0, 5.0), Err(PlanError::NonPositiveTimes { .. })));
        assert!(matches!(ProbePlan::new(100.0, 5.0, -1.0), Err(PlanError::NonPositiveTimes { .. })));
    }
}
