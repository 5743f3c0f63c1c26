use serde::{Deserialize, Serialize};

/// C¹ penalty: zero on `s >= 0`, the parabola `-s²/(2η)` on `(-η, 0)` and
/// the line `s + η/2` below `-η`. Nondecreasing, negative for `s < 0`, with
/// slope in `(0, 1]` there and `β(s) → -∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFunction {
    pub eta: f64,
}

impl Default for PenaltyFunction {
    fn default() -> Self {
        Self { eta: 1.0 }
    }
}

impl PenaltyFunction {
    pub fn beta(&self, s: f64) -> f64 {
        if s >= 0.0 {
            0.0
        } else if s > -self.eta {
            -s * s / (2.0 * self.eta)
        } else {
            s + self.eta / 2.0
        }
    }

    pub fn beta_prime(&self, s: f64) -> f64 {
        if s >= 0.0 {
            0.0
        } else if s > -self.eta {
            -s / self.eta
        } else {
            1.0
        }
    }

    /// `β_ε(s) = β(s/ε)`.
    pub fn beta_eps(&self, eps: f64, s: f64) -> f64 {
        self.beta(s / eps)
    }

    pub fn beta_eps_prime(&self, eps: f64, s: f64) -> f64 {
        self.beta_prime(s / eps) / eps
    }

    /// Smallest `s` with `β(s) >= -force` (`force >= 0`): the constraint
    /// violation, in units of ε, needed to exert a given penalty force.
    pub fn inverse_force(&self, force: f64) -> f64 {
        if force <= 0.0 {
            0.0
        } else if force < self.eta / 2.0 {
            -(2.0 * self.eta * force).sqrt()
        } else {
            -force - self.eta / 2.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn branch_values() {
        for eta in [1.0, 0.3, 2.5] {
            let p = PenaltyFunction { eta };
            assert_eq!(p.beta(1.0), 0.0);
            assert_eq!(p.beta(0.0), 0.0);
            assert!((p.beta(-eta / 2.0) + eta / 8.0).abs() < 1e-15);
            assert!((p.beta(-2.0 * eta) + 1.5 * eta).abs() < 1e-15);
        }
        let p = PenaltyFunction::default();
        assert_eq!(p.beta_eps(0.1, -0.2), p.beta(-2.0));
        assert!(p.beta(-1e12) < -1e11);
    }

    #[test]
    fn continuity_at_branch_points() {
        let p = PenaltyFunction { eta: 0.7 };
        let d = 1e-9;
        assert!((p.beta(-0.7 + d) - p.beta(-0.7 - d)).abs() < 1e-8);
        assert!((p.beta_prime(-0.7 + d) - p.beta_prime(-0.7 - d)).abs() < 1e-8);
        assert!(p.beta_prime(-d) < 1e-8);
    }

    proptest! {
        #[test]
        fn penalty_conditions(s in -50.0f64..50.0, eta in 0.1f64..5.0) {
            let p = PenaltyFunction { eta };
            if s >= 0.0 {
                prop_assert_eq!(p.beta(s), 0.0);
            } else {
                prop_assert!(p.beta(s) < 0.0);
                let d = p.beta_prime(s);
                prop_assert!(d > 0.0 && d <= 1.0);
                // derivative agrees with a central difference
                let h = 1e-6 * (1.0 + s.abs());
                let fd = (p.beta(s + h) - p.beta(s - h)) / (2.0 * h);
                prop_assert!((fd - d).abs() < 1e-4);
            }
        }

        #[test]
        fn inverse_force_inverts(force in 0.0f64..20.0, eta in 0.1f64..5.0) {
            let p = PenaltyFunction { eta };
            let s = p.inverse_force(force);
            prop_assert!((p.beta(s) + force).abs() < 1e-9 * (1.0 + force));
        }
    }
}
