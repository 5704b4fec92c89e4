//! Quadrature helpers.

use std::cell::RefCell;

use crate::error::{Error, Result};

/// Adaptive double-exponential quadrature of a fallible integrand over `[a, b]`.
///
/// Endpoint singularities of integrable type (`ln v` at `v = 0`) are handled
/// since the nodes never touch the endpoints.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical(format!(
            "quadrature limits must be finite: [{a}, {b}]"
        )));
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let out = quadrature::double_exponential::integrate(
        |x| match f(x) {
            Ok(y) if y.is_finite() => y,
            Ok(y) => {
                failure
                    .borrow_mut()
                    .get_or_insert(Error::Numerical(format!("integrand is {y} at {x}")));
                0.0
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        tol,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    if !out.integral.is_finite() {
        return Err(Error::Numerical("quadrature produced a non-finite value".into()));
    }
    Ok(out.integral)
}

/// Composite Simpson rule on equally spaced samples. An odd number of
/// intervals closes with the 3/8 rule over the last three.
pub fn simpson_uniform(samples: &[f64], h: f64) -> f64 {
    let intervals = samples.len().saturating_sub(1);
    match intervals {
        0 => 0.0,
        1 => 0.5 * h * (samples[0] + samples[1]),
        2 => h / 3.0 * (samples[0] + 4.0 * samples[1] + samples[2]),
        _ => {
            let (even_part, tail) = if intervals % 2 == 0 {
                (intervals, 0)
            } else {
                (intervals - 3, 3)
            };
            let mut sum = 0.0;
            let mut i = 0;
            while i < even_part {
                sum += h / 3.0 * (samples[i] + 4.0 * samples[i + 1] + samples[i + 2]);
                i += 2;
            }
            if tail == 3 {
                let s = &samples[even_part..];
                sum += 3.0 * h / 8.0 * (s[0] + 3.0 * s[1] + 3.0 * s[2] + s[3]);
            }
            sum
        }
    }
}
