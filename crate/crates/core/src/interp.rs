//! Gap filling for per-entity time series.
//!
//! Cubic filling uses a natural cubic spline (zero second derivative at the end
//! knots). With only two or three knots the interpolant degrades to the line or
//! parabola through them. Cubic never extrapolates; trailing gaps are handled by
//! padding forward from the last known value.

use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FillError {
    #[error("need at least 2 known points for cubic interpolation, found {found}")]
    TooFewKnots { found: usize },
    #[error("gap at period {period} lies outside the known range [{lo}, {hi}]")]
    OutsideKnotRange { period: f64, lo: f64, hi: f64 },
    #[error("no known value precedes the gap at period {period}")]
    NoPrecedingValue { period: f64 },
    #[error("periods must be strictly increasing (at position {index})")]
    Unsorted { index: usize },
    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },
}

/// How missing values in a series are completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillMethod {
    /// Natural cubic spline through the known points; interior gaps only.
    Cubic,
    /// Carry the most recent known value forward.
    Pad,
    /// Cubic for interior gaps, pad for gaps after the last known value.
    CubicPad,
}

/// Interpolant through a set of knots with strictly increasing abscissae.
#[derive(Debug, Clone)]
pub struct CubicInterpolant {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots (natural spline only).
    second: Vec<f64>,
}

impl CubicInterpolant {
    pub fn fit(knots: &[(f64, f64)]) -> Result<Self, FillError> {
        if knots.len() < 2 {
            return Err(FillError::TooFewKnots { found: knots.len() });
        }
        for (i, &(x, y)) in knots.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(FillError::NonFinite { index: i });
            }
            if i > 0 && x <= knots[i - 1].0 {
                return Err(FillError::Unsorted { index: i });
            }
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let second = if xs.len() >= 4 {
            natural_second_derivatives(&xs, &ys)
        } else {
            Vec::new()
        };
        Ok(Self { xs, ys, second })
    }

    pub fn lo(&self) -> f64 {
        self.xs[0]
    }

    pub fn hi(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Evaluates the interpolant; `x` must lie within the knot range.
    pub fn eval(&self, x: f64) -> Result<f64, FillError> {
        let (lo, hi) = (self.lo(), self.hi());
        if !(x >= lo && x <= hi) {
            return Err(FillError::OutsideKnotRange { period: x, lo, hi });
        }
        let (xs, ys) = (&self.xs, &self.ys);
        Ok(match xs.len() {
            2 => {
                let t = (x - xs[0]) / (xs[1] - xs[0]);
                ys[0] + t * (ys[1] - ys[0])
            }
            3 => {
                // Newton divided differences.
                let d01 = (ys[1] - ys[0]) / (xs[1] - xs[0]);
                let d12 = (ys[2] - ys[1]) / (xs[2] - xs[1]);
                let d012 = (d12 - d01) / (xs[2] - xs[0]);
                ys[0] + (x - xs[0]) * (d01 + (x - xs[1]) * d012)
            }
            _ => {
                let i = match xs.iter().position(|&k| k >= x) {
                    Some(0) => 0,
                    Some(p) => p - 1,
                    None => xs.len() - 2,
                };
                let h = xs[i + 1] - xs[i];
                let a = (xs[i + 1] - x) / h;
                let b = (x - xs[i]) / h;
                let m0 = self.second[i];
                let m1 = self.second[i + 1];
                a * ys[i]
                    + b * ys[i + 1]
                    + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0
            }
        })
    }
}

/// Solves the tridiagonal system for the interior second derivatives
/// (Thomas algorithm), with M_0 = M_{n-1} = 0.
fn natural_second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let m = n - 2;
    let mut diag = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    let mut lower = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        lower.push(h0);
        diag.push(2.0 * (h0 + h1));
        upper.push(h1);
        rhs.push(6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0));
    }
    for i in 1..m {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut inner = alloc::vec![0.0; m];
    for i in (0..m).rev() {
        let carry = if i + 1 < m { upper[i] * inner[i + 1] } else { 0.0 };
        inner[i] = (rhs[i] - carry) / diag[i];
    }
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    out.extend(inner);
    out.push(0.0);
    out
}

/// Completes a series of `(period, value)` entries sorted by period.
///
/// Known values are returned untouched. A series without gaps is returned as-is
/// regardless of how many values it has.
pub fn fill_gaps(series: &[(f64, Option<f64>)], method: FillMethod) -> Result<Vec<f64>, FillError> {
    for i in 1..series.len() {
        if series[i].0 <= series[i - 1].0 {
            return Err(FillError::Unsorted { index: i });
        }
    }
    if series.iter().all(|(_, v)| v.is_some()) {
        return Ok(series.iter().map(|(_, v)| v.unwrap_or_default()).collect());
    }
    let knots: Vec<(f64, f64)> = series
        .iter()
        .filter_map(|&(t, v)| v.map(|v| (t, v)))
        .collect();
    let last_known = knots.last().map(|k| k.0);

    let needs_spline = series.iter().any(|&(t, v)| {
        v.is_none()
            && match method {
                FillMethod::Cubic => true,
                FillMethod::Pad => false,
                FillMethod::CubicPad => last_known.is_none_or(|hi| t < hi),
            }
    });
    let spline = if needs_spline {
        Some(CubicInterpolant::fit(&knots)?)
    } else {
        None
    };

    let mut out = Vec::with_capacity(series.len());
    let mut previous: Option<f64> = None;
    for &(t, v) in series {
        let value = match v {
            Some(v) => v,
            None => {
                let pad = match method {
                    FillMethod::Pad => true,
                    FillMethod::Cubic => false,
                    FillMethod::CubicPad => last_known.is_some_and(|hi| t > hi),
                };
                if pad {
                    previous.ok_or(FillError::NoPrecedingValue { period: t })?
                } else {
                    spline.as_ref().map_or(
                        Err(FillError::TooFewKnots { found: knots.len() }),
                        |s| s.eval(t),
                    )?
                }
            }
        };
        previous = Some(value);
        out.push(value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn collinear_gap_is_linear() {
        let s = [(2012.0, Some(0.0)), (2013.0, Some(1.0)), (2014.0, None), (2015.0, Some(3.0)), (2016.0, Some(4.0))];
        let out = fill_gaps(&s, FillMethod::Cubic).unwrap();
        assert!((out[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pad_carries_last_value() {
        let s = [(2016.0, Some(3.51e6)), (2017.0, None)];
        assert_eq!(fill_gaps(&s, FillMethod::Pad).unwrap(), vec![3.51e6, 3.51e6]);
    }

    #[test]
    fn cubic_refuses_to_extrapolate() {
        let s = [(2016.0, Some(1.0)), (2017.0, Some(2.0)), (2018.0, None)];
        assert!(matches!(
            fill_gaps(&s, FillMethod::Cubic),
            Err(FillError::OutsideKnotRange { .. })
        ));
        let lead = [(2015.0, None), (2016.0, Some(1.0)), (2017.0, Some(2.0))];
        assert!(matches!(fill_gaps(&lead, FillMethod::Cubic), Err(FillError::OutsideKnotRange { .. })));
    }

    #[test]
    fn pad_needs_a_predecessor() {
        let s = [(2015.0, None), (2016.0, Some(1.0))];
        assert_eq!(
            fill_gaps(&s, FillMethod::Pad),
            Err(FillError::NoPrecedingValue { period: 2015.0 })
        );
    }

    #[test]
    fn single_knot_is_rejected_for_cubic() {
        let s = [(1.0, Some(1.0)), (2.0, None)];
        assert_eq!(fill_gaps(&s, FillMethod::Cubic), Err(FillError::TooFewKnots { found: 1 }));
    }

    #[test]
    fn cubic_pad_mixes_interior_and_trailing() {
        // 2013 and 2015 interior, 2017 trailing.
        let s = [
            (2012.0, Some(1.0)),
            (2013.0, None),
            (2014.0, Some(3.0)),
            (2015.0, None),
            (2016.0, Some(5.0)),
            (2017.0, None),
        ];
        let out = fill_gaps(&s, FillMethod::CubicPad).unwrap();
        assert!((out[1] - 2.0).abs() < 1e-12);
        assert!((out[3] - 4.0).abs() < 1e-12);
        assert_eq!(out[5], 5.0);
    }

    #[test]
    fn three_knots_use_the_parabola() {
        let s = [(0.0, Some(0.0)), (1.0, Some(1.0)), (1.5, None), (2.0, Some(4.0))];
        let out = fill_gaps(&s, FillMethod::Cubic).unwrap();
        assert!((out[2] - 2.25).abs() < 1e-12);
    }

    #[test]
    fn unsorted_periods_are_rejected() {
        let s = [(2.0, Some(0.0)), (1.0, None)];
        assert_eq!(fill_gaps(&s, FillMethod::Pad), Err(FillError::Unsorted { index: 1 }));
    }
}
