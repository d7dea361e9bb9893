//! Scalar interpolants through non-uniform knots.
//!
//! Four or more knots get a natural cubic spline; three knots a quadratic
//! through all of them; two knots a straight line.

#[derive(Debug, Clone)]
pub(crate) enum Interpolant {
    Linear { t: [f64; 2], y: [f64; 2] },
    Quadratic { t: [f64; 3], y: [f64; 3] },
    Cubic(NaturalCubic),
}

impl Interpolant {
    pub(crate) fn new(t: &[f64], y: &[f64]) -> Self {
        debug_assert_eq!(t.len(), y.len());
        debug_assert!(t.len() >= 2);
        match t.len() {
            2 => Self::Linear { t: [t[0], t[1]], y: [y[0], y[1]] },
            3 => Self::Quadratic { t: [t[0], t[1], t[2]], y: [y[0], y[1], y[2]] },
            _ => Self::Cubic(NaturalCubic::new(t, y)),
        }
    }

    /// Evaluate at `x`; values outside the knot span clamp to the end values.
    pub(crate) fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Linear { t, y } => {
                if x <= t[0] {
                    return y[0];
                }
                if x >= t[1] {
                    return y[1];
                }
                let u = (x - t[0]) / (t[1] - t[0]);
                y[0] + u * (y[1] - y[0])
            }
            Self::Quadratic { t, y } => {
                if x <= t[0] {
                    return y[0];
                }
                if x >= t[2] {
                    return y[2];
                }
                let l0 = (x - t[1]) * (x - t[2]) / ((t[0] - t[1]) * (t[0] - t[2]));
                let l1 = (x - t[0]) * (x - t[2]) / ((t[1] - t[0]) * (t[1] - t[2]));
                let l2 = (x - t[0]) * (x - t[1]) / ((t[2] - t[0]) * (t[2] - t[1]));
                y[0] * l0 + y[1] * l1 + y[2] * l2
            }
            Self::Cubic(c) => c.eval(x),
        }
    }
}

/// Natural cubic spline (zero second derivative at both ends).
#[derive(Debug, Clone)]
pub(crate) struct NaturalCubic {
    t: Vec<f64>,
    y: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl NaturalCubic {
    pub(crate) fn new(t: &[f64], y: &[f64]) -> Self {
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas algorithm)
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = t[i] - t[i - 1];
                let h1 = t[i + 1] - t[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = t[i + 1] - t[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Self { t: t.to_vec(), y: y.to_vec(), m }
    }

    fn segment(&self, x: f64) -> usize {
        match self.t.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.t.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.t.len() - 2),
        }
    }

    pub(crate) fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x <= self.t[0] {
            return self.y[0];
        }
        if x >= self.t[n - 1] {
            return self.y[n - 1];
        }
        let i = self.segment(x);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_through_knots() {
        let t = [0.0, 0.1, 0.25, 0.3, 0.7];
        let y = [1.0, -2.0, 0.5, 3.0, 0.0];
        let s = Interpolant::new(&t, &y);
        for (ti, yi) in t.iter().zip(y) {
            assert!((s.eval(*ti) - yi).abs() < 1e-12);
        }
    }

    #[test]
    fn reproduces_lines_exactly() {
        let t = [0.0, 0.3, 0.4, 1.0, 1.5];
        let y: Vec<f64> = t.iter().map(|x| 2.0 * x - 1.0).collect();
        let s = Interpolant::new(&t, &y);
        for k in 0..=30 {
            let x = k as f64 * 0.05;
            assert!((s.eval(x) - (2.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn natural_end_conditions() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.0, 0.0, 1.0];
        let c = NaturalCubic::new(&t, &y);
        assert_eq!(c.m[0], 0.0);
        assert_eq!(c.m[3], 0.0);
        // second-derivative continuity reproduces the known solution m1 = -m2 = -4
        assert!((c.m[1] + 4.0).abs() < 1e-12);
        assert!((c.m[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_fallback_is_exact_for_parabola() {
        let t = [0.0, 0.5, 2.0];
        let y: Vec<f64> = t.iter().map(|x| x * x).collect();
        let s = Interpolant::new(&t, &y);
        assert!((s.eval(1.3) - 1.69).abs() < 1e-12);
    }
}
