//! Small fixed-size linear algebra and root/minimum finding helpers.
//!
//! Everything here is 2x2 or scalar, so we keep it dependency-free and use
//! closed forms (Cramer's rule, the quadratic eigenvalue formula) instead of
//! pulling in a general-purpose matrix crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or rate pair (n_e, n_d) ordered as (establisher, disperser).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_inf(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(s * self.x, s * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;

    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;

    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

/// Row-major 2x2 matrix.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (self.a11.abs() + self.a12.abs()).max(self.a21.abs() + self.a22.abs())
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.a11 * v.x + self.a12 * v.y,
            self.a21 * v.x + self.a22 * v.y,
        )
    }

    /// Solves `A x = b` by Cramer's rule. Errors when the determinant is
    /// smaller than 1e-14 times the matrix scale.
    pub fn solve(&self, b: Vec2) -> Result<Vec2> {
        let det = self.det();
        let scale = self.norm_inf().max(1.0);
        if det.abs() <= 1e-14 * scale * scale {
            return Err(Error::SingularJacobian { det });
        }
        Ok(Vec2::new(
            (b.x * self.a22 - self.a12 * b.y) / det,
            (self.a11 * b.y - b.x * self.a21) / det,
        ))
    }

    pub fn add_diag(&self, c: f64) -> Mat2 {
        Mat2::new(self.a11 + c, self.a12, self.a21, self.a22 + c)
    }
}

/// Damped-free Newton iteration for a 2d root. Stops when the step norm
/// drops below `tol`; errors after `max_iter` steps or on a singular Jacobian.
pub fn newton2<F, J>(f: F, jac: J, x0: Vec2, tol: f64, max_iter: usize) -> Result<Vec2>
where
    F: Fn(Vec2) -> Vec2,
    J: Fn(Vec2) -> Mat2,
{
    let mut x = x0;
    for _ in 0..max_iter {
        let step = jac(x).solve(f(x))?;
        x = x - step;
        if !x.is_finite() {
            return Err(Error::NoConvergence { max_iter });
        }
        if step.norm() <= tol {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence { max_iter })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of a unimodal `f` on `[a, b]`, run until the
/// bracket width falls below `rel_width` times the midpoint. Returns the best
/// probed point and the final bracket.
pub fn golden_section_min<F>(f: F, mut a: f64, mut b: f64, rel_width: f64) -> (f64, f64, (f64, f64))
where
    F: Fn(f64) -> f64,
{
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a) > rel_width * 0.5 * (a + b).abs() {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1, (a, b))
    } else {
        (x2, f2, (a, b))
    }
}

/// Bisection for a sign change of `df` on `[a, b]`. Returns `None` when the
/// endpoints do not bracket a sign change; used to polish minima where the
/// derivative is available analytically.
pub fn bisect_root<F>(df: F, mut a: f64, mut b: f64, iters: usize) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let mut fa = df(a);
    let fb = df(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..iters {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break; // interval exhausted at f64 resolution
        }
        let fm = df(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_2x2() {
        let m = Mat2::new(2.0, 1.0, 1.0, 3.0);
        let x = m.solve(Vec2::new(5.0, 10.0)).unwrap();
        assert!((x.x - 1.0).abs() < 1e-14);
        assert!((x.y - 3.0).abs() < 1e-14);
    }

    #[test]
    fn solve_rejects_singular() {
        let m = Mat2::new(1.0, 2.0, 2.0, 4.0);
        assert!(m.solve(Vec2::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn newton_finds_quadratic_root() {
        // x^2 + y^2 = 2, x - y = 0 has the root (1, 1)
        let f = |v: Vec2| Vec2::new(v.x * v.x + v.y * v.y - 2.0, v.x - v.y);
        let j = |v: Vec2| Mat2::new(2.0 * v.x, 2.0 * v.y, 1.0, -1.0);
        let r = newton2(f, j, Vec2::new(2.0, 0.5), 1e-12, 100).unwrap();
        assert!((r.x - 1.0).abs() < 1e-12);
        assert!((r.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_parabola() {
        let (x, fx, _) = golden_section_min(|x| (x - 2.5) * (x - 2.5) + 1.0, 0.0, 10.0, 1e-11);
        assert!((x - 2.5).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-13);
    }

    #[test]
    fn bisect_kink() {
        // derivative of |x - 3| jumps through zero at x = 3
        let df = |x: f64| if x < 3.0 { -1.0 } else { 1.0 };
        let r = bisect_root(df, 0.0, 10.0, 200).unwrap();
        assert!((r - 3.0).abs() < 1e-12);
    }
}
