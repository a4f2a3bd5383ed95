//! Scalar test functions with known gradient-Lipschitz bounds, used to
//! certify the sampling-based Lipschitz estimator.

use super::Oracle;

/// A named oracle together with the bound its gradient Lipschitz constant is
/// claimed not to exceed.
pub struct Activation {
    pub name: &'static str,
    pub claimed_bound: f64,
    pub oracle: Oracle,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn sinc_value_deriv(x: f64) -> (f64, f64) {
    if x.abs() < 1e-4 {
        // series around 0: sin(x)/x = 1 - x^2/6 + x^4/120, d/dx = -x/3 + x^3/30
        let x2 = x * x;
        (1.0 - x2 / 6.0 + x2 * x2 / 120.0, -x / 3.0 + x * x2 / 30.0)
    } else {
        (x.sin() / x, (x * x.cos() - x.sin()) / (x * x))
    }
}

/// The suite: smooth scalar objectives (plus one non-smooth-Hessian 2-D
/// example) with their claimed gradient-Lipschitz bounds.
pub fn activation_suite() -> Vec<Activation> {
    vec![
        Activation {
            name: "sigmoid",
            claimed_bound: 1.0,
            oracle: Oracle::new(1, |x, g| {
                let s = sigmoid(x[0]);
                g[0] = s * (1.0 - s);
                s
            }),
        },
        Activation {
            name: "arctan",
            claimed_bound: 1.0,
            oracle: Oracle::new(1, |x, g| {
                g[0] = 1.0 / (1.0 + x[0] * x[0]);
                x[0].atan()
            }),
        },
        Activation {
            name: "tanh",
            claimed_bound: 1.0,
            oracle: Oracle::new(1, |x, g| {
                let t = x[0].tanh();
                g[0] = 1.0 - t * t;
                t
            }),
        },
        Activation {
            name: "logit",
            claimed_bound: 1.0,
            oracle: Oracle::new(1, |x, g| {
                // 2 logit(x) = 1 + tanh(x/2)
                let s = sigmoid(x[0]);
                g[0] = s * (1.0 - s);
                s
            }),
        },
        Activation {
            name: "log1p_square",
            claimed_bound: 2.0,
            oracle: Oracle::new(1, |x, g| {
                g[0] = 2.0 * x[0] / (1.0 + x[0] * x[0]);
                (1.0 + x[0] * x[0]).ln()
            }),
        },
        Activation {
            name: "sin",
            claimed_bound: 1.0,
            oracle: Oracle::new(1, |x, g| {
                g[0] = x[0].cos();
                x[0].sin()
            }),
        },
        Activation {
            name: "cos",
            claimed_bound: 1.0,
            oracle: Oracle::new(1, |x, g| {
                g[0] = -x[0].sin();
                x[0].cos()
            }),
        },
        Activation {
            name: "sinc",
            claimed_bound: 1.0 / 3.0,
            oracle: Oracle::new(1, |x, g| {
                let (v, d) = sinc_value_deriv(x[0]);
                g[0] = d;
                v
            }),
        },
        Activation {
            name: "bilinear_hinge",
            claimed_bound: std::f64::consts::SQRT_2 + 1.0,
            oracle: Oracle::new(2, |x, g| {
                let up = (x[0] - 1.0).max(0.0);
                let dn = (-x[0] - 1.0).max(0.0);
                g[0] = -x[1] + 2.0 * up - 2.0 * dn;
                g[1] = -x[0];
                -x[0] * x[1] + up * up + dn * dn
            }),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::estimate_gradient_lipschitz;

    #[test]
    fn claimed_bounds_hold_on_samples() {
        for act in activation_suite() {
            let est = estimate_gradient_lipschitz(&act.oracle, 2000, 10.0, 17);
            assert!(
                est <= act.claimed_bound * 1.001,
                "{}: sampled {} exceeds claimed {}",
                act.name,
                est,
                act.claimed_bound
            );
        }
    }

    #[test]
    fn hinge_example_attains_its_bound() {
        // near x0 = 1 the curvature jumps; the sampled constant should come
        // close to sqrt(2) + 1 when sampling tightly around the kink
        let suite = activation_suite();
        let hinge = suite.iter().find(|a| a.name == "bilinear_hinge").unwrap();
        let g1 = hinge.oracle.gradient(&[2.0, 0.0]);
        let g2 = hinge.oracle.gradient(&[0.5, 0.0]);
        // gradient jump across the kink: [2(x-1)+, -x] changes slope by 2
        assert!((g1[0] - g2[0] - 2.0).abs() < 1e-12);
        assert!(
            estimate_gradient_lipschitz(&hinge.oracle, 4000, 3.0, 23)
                <= (std::f64::consts::SQRT_2 + 1.0) * 1.001
        );
    }

    #[test]
    fn sinc_series_joins_smoothly() {
        // both branches evaluated at the same point just outside the cutoff
        let x = 1.1e-4;
        let (v_analytic, d_analytic) = sinc_value_deriv(x);
        let x2 = x * x;
        let v_series = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
        let d_series = -x / 3.0 + x * x2 / 30.0;
        assert!((v_analytic - v_series).abs() < 1e-14);
        assert!((d_analytic - d_series).abs() < 1e-12);
    }
}
