//! Small reference models shared by unit tests, integration tests and benches.

use crate::model::{validate, JumpComponent, JumpLaw, LevyModel, Marginal, ValidatedModel};

fn exp_marginal(rate: f64) -> Marginal {
    Marginal::Exponential { rate }
}

/// Two queues, independent inputs: unit-rate exp(4) jumps into coordinate 1,
/// unit-rate exp(2) jumps into coordinate 2, drift (-1, 0).
pub fn m1_raw() -> LevyModel {
    LevyModel {
        n: 2,
        drift: vec![-1.0, 0.0],
        sigma: 0.0,
        components: vec![
            JumpComponent {
                rate: 1.0,
                law: JumpLaw::Independent {
                    marginals: vec![exp_marginal(4.0), Marginal::Zero],
                },
            },
            JumpComponent {
                rate: 1.0,
                law: JumpLaw::Independent {
                    marginals: vec![Marginal::Zero, exp_marginal(2.0)],
                },
            },
        ],
    }
}

pub fn m1() -> ValidatedModel {
    validate(m1_raw()).unwrap()
}

/// m1 with Brownian volatility on coordinate 1 (forces grid-mode simulation).
pub fn m1_sigma(sigma: f64) -> ValidatedModel {
    let mut raw = m1_raw();
    raw.sigma = sigma;
    validate(raw).unwrap()
}

/// Three queues: m1 plus a third coordinate fed by unit-rate exp(8) jumps.
pub fn m2_raw() -> LevyModel {
    LevyModel {
        n: 3,
        drift: vec![-1.0, 0.0, 0.0],
        sigma: 0.0,
        components: vec![
            JumpComponent {
                rate: 1.0,
                law: JumpLaw::Independent {
                    marginals: vec![exp_marginal(4.0), Marginal::Zero, Marginal::Zero],
                },
            },
            JumpComponent {
                rate: 1.0,
                law: JumpLaw::Independent {
                    marginals: vec![Marginal::Zero, exp_marginal(2.0), Marginal::Zero],
                },
            },
            JumpComponent {
                rate: 1.0,
                law: JumpLaw::Independent {
                    marginals: vec![Marginal::Zero, Marginal::Zero, exp_marginal(8.0)],
                },
            },
        ],
    }
}

pub fn m2() -> ValidatedModel {
    validate(m2_raw()).unwrap()
}

/// Two queues with comonotone dependence: one unit-rate stream of jumps
/// (E, E/2) with E exponential of rate 4, drift (-1, 0).
pub fn m3_raw() -> LevyModel {
    LevyModel {
        n: 2,
        drift: vec![-1.0, 0.0],
        sigma: 0.0,
        components: vec![JumpComponent {
            rate: 1.0,
            law: JumpLaw::Comonotone {
                weights: vec![1.0, 0.5],
                rate: 4.0,
            },
        }],
    }
}

pub fn m3() -> ValidatedModel {
    validate(m3_raw()).unwrap()
}
