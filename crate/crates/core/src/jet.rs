//! Forward-mode truncated Taylor arithmetic carrying value, gradient, and
//! Hessian through closed-form field expressions.

use smallvec::SmallVec;

use crate::error::KropinaError;

/// Degree-2 jet over `m` active directions.
///
/// A constant has empty derivative storage and acts as a jet of any arity;
/// mixing two non-constant jets of different arity is a programming error and
/// panics. Storage is inline up to four active directions, which covers the
/// phase space of a surface (two position and two velocity coordinates).
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    v: f64,
    g: SmallVec<[f64; 4]>,
    h: SmallVec<[f64; 16]>,
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Jet2 {
            v,
            g: SmallVec::new(),
            h: SmallVec::new(),
        }
    }

    /// Seed the `index`-th of `arity` active directions with value `v`.
    pub fn variable(v: f64, index: usize, arity: usize) -> Self {
        assert!(index < arity, "active index {index} out of arity {arity}");
        let mut g = SmallVec::from_elem(0.0, arity);
        g[index] = 1.0;
        Jet2 {
            v,
            g,
            h: SmallVec::from_elem(0.0, arity * arity),
        }
    }

    pub fn value(&self) -> f64 {
        self.v
    }

    /// Number of active directions; zero for constants.
    pub fn arity(&self) -> usize {
        self.g.len()
    }

    pub fn grad(&self, i: usize) -> f64 {
        if self.g.is_empty() {
            0.0
        } else {
            self.g[i]
        }
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        if self.h.is_empty() {
            0.0
        } else {
            self.h[i * self.g.len() + j]
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.g.iter().all(|x| x.is_finite()) && self.h.iter().all(|x| x.is_finite())
    }

    fn joint_arity(&self, rhs: &Jet2) -> usize {
        match (self.g.len(), rhs.g.len()) {
            (0, m) | (m, 0) => m,
            (a, b) if a == b => a,
            (a, b) => panic!("jet arity mismatch: {a} vs {b}"),
        }
    }

    /// Chain rule for a scalar map with local value `p`, first derivative
    /// `dp`, and second derivative `ddp` at `self.v`.
    fn chain(&self, p: f64, dp: f64, ddp: f64) -> Jet2 {
        let m = self.g.len();
        let mut g = SmallVec::with_capacity(m);
        for i in 0..m {
            g.push(dp * self.g[i]);
        }
        let mut h = SmallVec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                h.push(ddp * self.g[i] * self.g[j] + dp * self.h[i * m + j]);
            }
        }
        Jet2 { v: p, g, h }
    }

    pub fn sin(&self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    /// Natural logarithm; produces non-finite channels at arguments <= 0,
    /// which [`jet2_eval`] turns into an error.
    pub fn ln(&self) -> Jet2 {
        let inv = 1.0 / self.v;
        self.chain(self.v.ln(), inv, -inv * inv)
    }

    /// Square root; non-smooth at 0, surfacing as non-finite derivatives.
    pub fn sqrt(&self) -> Jet2 {
        let r = self.v.sqrt();
        let dr = 0.5 / r;
        self.chain(r, dr, -0.5 * dr / self.v)
    }

    pub fn powi(&self, k: i32) -> Jet2 {
        let kf = f64::from(k);
        self.chain(
            self.v.powi(k),
            kf * self.v.powi(k - 1),
            kf * (kf - 1.0) * self.v.powi(k - 2),
        )
    }

    pub fn recip(&self) -> Jet2 {
        let inv = 1.0 / self.v;
        self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }

    fn add_impl(&self, rhs: &Jet2) -> Jet2 {
        let m = self.joint_arity(rhs);
        let mut g = SmallVec::with_capacity(m);
        for i in 0..m {
            g.push(self.grad(i) + rhs.grad(i));
        }
        let mut h = SmallVec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                h.push(self.hess(i, j) + rhs.hess(i, j));
            }
        }
        Jet2 { v: self.v + rhs.v, g, h }
    }

    fn sub_impl(&self, rhs: &Jet2) -> Jet2 {
        let m = self.joint_arity(rhs);
        let mut g = SmallVec::with_capacity(m);
        for i in 0..m {
            g.push(self.grad(i) - rhs.grad(i));
        }
        let mut h = SmallVec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                h.push(self.hess(i, j) - rhs.hess(i, j));
            }
        }
        Jet2 { v: self.v - rhs.v, g, h }
    }

    fn mul_impl(&self, rhs: &Jet2) -> Jet2 {
        let m = self.joint_arity(rhs);
        let mut g = SmallVec::with_capacity(m);
        for i in 0..m {
            g.push(self.grad(i) * rhs.v + self.v * rhs.grad(i));
        }
        let mut h = SmallVec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                h.push(
                    self.hess(i, j) * rhs.v
                        + self.grad(i) * rhs.grad(j)
                        + self.grad(j) * rhs.grad(i)
                        + self.v * rhs.hess(i, j),
                );
            }
        }
        Jet2 { v: self.v * rhs.v, g, h }
    }

    fn div_impl(&self, rhs: &Jet2) -> Jet2 {
        let m = self.joint_arity(rhs);
        let inv = 1.0 / rhs.v;
        let q = self.v * inv;
        let mut g: SmallVec<[f64; 4]> = SmallVec::with_capacity(m);
        for i in 0..m {
            g.push((self.grad(i) - q * rhs.grad(i)) * inv);
        }
        let mut h = SmallVec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                h.push(
                    (self.hess(i, j) - q * rhs.hess(i, j) - g[i] * rhs.grad(j) - g[j] * rhs.grad(i))
                        * inv,
                );
            }
        }
        Jet2 { v: q, g, h }
    }

    fn neg_impl(&self) -> Jet2 {
        Jet2 {
            v: -self.v,
            g: self.g.iter().map(|x| -x).collect(),
            h: self.h.iter().map(|x| -x).collect(),
        }
    }
}

macro_rules! jet_binop {
    ($trait:ident, $method:ident, $impl_fn:ident) => {
        impl std::ops::$trait for &Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                self.$impl_fn(rhs)
            }
        }
        impl std::ops::$trait for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                self.$impl_fn(&rhs)
            }
        }
        impl std::ops::$trait<&Jet2> for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                self.$impl_fn(rhs)
            }
        }
        impl std::ops::$trait<Jet2> for &Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                self.$impl_fn(&rhs)
            }
        }
        impl std::ops::$trait<f64> for &Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: f64) -> Jet2 {
                self.$impl_fn(&Jet2::constant(rhs))
            }
        }
        impl std::ops::$trait<f64> for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: f64) -> Jet2 {
                self.$impl_fn(&Jet2::constant(rhs))
            }
        }
        impl std::ops::$trait<Jet2> for f64 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                Jet2::constant(self).$impl_fn(&rhs)
            }
        }
        impl std::ops::$trait<&Jet2> for f64 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                Jet2::constant(self).$impl_fn(rhs)
            }
        }
    };
}

jet_binop!(Add, add, add_impl);
jet_binop!(Sub, sub, sub_impl);
jet_binop!(Mul, mul, mul_impl);
jet_binop!(Div, div, div_impl);

impl std::ops::Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.neg_impl()
    }
}

impl std::ops::Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.neg_impl()
    }
}

/// Solve the `n x n` linear system `a x = b` in jet arithmetic by Gaussian
/// elimination with partial pivoting on the value channel. A singular system
/// produces non-finite channels rather than an error, matching how other
/// non-smooth evaluations surface.
pub(crate) fn solve_linear_jets(n: usize, a: &[Jet2], b: &[Jet2]) -> Vec<Jet2> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r1, &r2| {
                m[r1 * n + col]
                    .value()
                    .abs()
                    .total_cmp(&m[r2 * n + col].value().abs())
            })
            .unwrap();
        if piv != col {
            for c in 0..n {
                m.swap(piv * n + c, col * n + c);
            }
            rhs.swap(piv, col);
        }
        for r in col + 1..n {
            let f = &m[r * n + col] / &m[col * n + col];
            for c in col..n {
                m[r * n + c] = &m[r * n + c] - &f * &m[col * n + c];
            }
            rhs[r] = &rhs[r] - &f * &rhs[col];
        }
    }
    let mut x = vec![Jet2::constant(0.0); n];
    for col in (0..n).rev() {
        let mut acc = rhs[col].clone();
        for c in col + 1..n {
            acc = acc - &m[col * n + c] * &x[c];
        }
        x[col] = acc / &m[col * n + col];
    }
    x
}

/// Evaluate `f` at `point` with the coordinates listed in `active` seeded as
/// jet variables (in the given order) and the rest held constant.
///
/// Fails if any output channel is non-finite, which is how non-smooth
/// evaluations (square root at zero, logarithm at a non-positive argument,
/// division by zero) surface.
pub fn jet2_eval<F>(f: F, point: &[f64], active: &[usize]) -> Result<Jet2, KropinaError>
where
    F: Fn(&[Jet2]) -> Jet2,
{
    let m = active.len();
    let mut inputs: Vec<Jet2> = point.iter().map(|&v| Jet2::constant(v)).collect();
    for (slot, &idx) in active.iter().enumerate() {
        assert!(idx < point.len(), "active index {idx} outside point of length {}", point.len());
        inputs[idx] = Jet2::variable(point[idx], slot, m);
    }
    let out = f(&inputs);
    if !out.is_finite() {
        return Err(KropinaError::NonSmoothEvaluation {
            point: point.to_vec(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    type Expr = fn(&[Jet2]) -> Jet2;

    fn value_of(f: Expr, x: &[f64]) -> f64 {
        let inputs: Vec<Jet2> = x.iter().map(|&v| Jet2::constant(v)).collect();
        f(&inputs).value()
    }

    fn fd_grad(f: Expr, x: &[f64], i: usize, step: f64) -> f64 {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += step;
        xm[i] -= step;
        (value_of(f, &xp) - value_of(f, &xm)) / (2.0 * step)
    }

    fn fd_hess(f: Expr, x: &[f64], i: usize, j: usize, step: f64) -> f64 {
        if i == j {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += step;
            xm[i] -= step;
            (value_of(f, &xp) - 2.0 * value_of(f, x) + value_of(f, &xm)) / (step * step)
        } else {
            let mut xpp = x.to_vec();
            let mut xpm = x.to_vec();
            let mut xmp = x.to_vec();
            let mut xmm = x.to_vec();
            xpp[i] += step;
            xpp[j] += step;
            xpm[i] += step;
            xpm[j] -= step;
            xmp[i] -= step;
            xmp[j] += step;
            xmm[i] -= step;
            xmm[j] -= step;
            (value_of(f, &xpp) - value_of(f, &xpm) - value_of(f, &xmp) + value_of(f, &xmm))
                / (4.0 * step * step)
        }
    }

    /// Central-difference oracle built purely from value-channel evaluations.
    /// Gradient step 1e-5 meets relative 1e-6 outright; for the Hessian the
    /// rounding floor of second differences at that step is a few parts in
    /// 1e6, so entries are also cross-checked at the step-size optimum 1e-4
    /// where relative 1e-6 is attainable.
    fn check_against_fd(f: Expr, x: &[f64]) {
        let n = x.len();
        let active: Vec<usize> = (0..n).collect();
        let jet = jet2_eval(f, x, &active).unwrap();
        assert!((jet.value() - value_of(f, x)).abs() <= 1e-14 * value_of(f, x).abs().max(1.0));
        for i in 0..n {
            let fd = fd_grad(f, x, i, 1e-5);
            let tol = 1e-6 * fd.abs().max(1.0);
            assert!(
                (jet.grad(i) - fd).abs() <= tol,
                "grad[{i}] at {x:?}: jet {} vs fd {}",
                jet.grad(i),
                fd
            );
        }
        for i in 0..n {
            for j in 0..n {
                let fd_pinned = fd_hess(f, x, i, j, 1e-5);
                assert!(
                    (jet.hess(i, j) - fd_pinned).abs() <= 5e-6 * fd_pinned.abs().max(1.0),
                    "hess[{i}{j}] at {x:?} (step 1e-5): jet {} vs fd {}",
                    jet.hess(i, j),
                    fd_pinned
                );
                let fd_opt = fd_hess(f, x, i, j, 1e-4);
                assert!(
                    (jet.hess(i, j) - fd_opt).abs() <= 1e-6 * fd_opt.abs().max(1.0),
                    "hess[{i}{j}] at {x:?} (step 1e-4): jet {} vs fd {}",
                    jet.hess(i, j),
                    fd_opt
                );
                assert!(
                    (jet.hess(i, j) - jet.hess(j, i)).abs() <= 1e-15,
                    "hessian not symmetric at ({i},{j})"
                );
            }
        }
    }

    // Corpus of composed expressions exercising every primitive; evaluation
    // points keep a margin of at least 1e-3 from any singularity.
    fn corpus() -> Vec<(Expr, Vec<Vec<f64>>)> {
        vec![
            (
                (|x| (x[0].sin() * x[1].cos() + (&x[0] * &x[1]).exp()) / (3.0 + x[0].powi(2))) as Expr,
                vec![vec![0.3, -0.7], vec![1.1, 0.4], vec![-0.9, 0.8]],
            ),
            (
                (|x| ((x[0].powi(2) + x[1].powi(2) + 0.5).sqrt() + &x[0] / &x[1]).ln()) as Expr,
                vec![vec![0.6, 0.9], vec![1.4, 0.5], vec![2.0, 1.7]],
            ),
            (
                (|x| {
                    let s = &x[0] + &x[1];
                    let e = (x[1].powi(2) * s.sin().powi(2) * (1.0 / std::f64::consts::PI)).exp();
                    (x[2].powi(2) + x[3].powi(2)) * &e
                        / (2.0 * (&e + 2.0) * (&x[2] * s.cos() + &x[3] * s.sin()))
                }) as Expr,
                vec![vec![0.3, -0.2, 1.1, 0.4], vec![1.2, 0.7, -0.5, 1.3]],
            ),
            (
                (|x| x[0].recip() + (-&x[0]).exp() * x[1].sin() - x[1].sqrt() * x[0].powi(3)) as Expr,
                vec![vec![0.8, 1.3], vec![1.9, 0.2]],
            ),
        ]
    }

    #[test]
    fn jet_matches_finite_differences_on_corpus() {
        for (f, points) in corpus() {
            for x in points {
                check_against_fd(f, &x);
            }
        }
    }

    #[test]
    fn constants_broadcast_into_any_arity() {
        let x = Jet2::variable(2.0, 0, 3);
        let c = Jet2::constant(5.0);
        let y = &c * &x + &c;
        assert_eq!(y.value(), 15.0);
        assert_eq!(y.arity(), 3);
        assert_eq!(y.grad(0), 5.0);
        assert_eq!(y.grad(1), 0.0);
        assert_eq!(y.hess(0, 0), 0.0);
    }

    #[test]
    #[should_panic(expected = "arity mismatch")]
    fn mixed_arity_panics() {
        let a = Jet2::variable(1.0, 0, 2);
        let b = Jet2::variable(1.0, 0, 3);
        let _ = a + b;
    }

    #[test]
    fn partial_activation_freezes_the_rest() {
        // d/dx1 of x0*x1^2 at (3, 2) with only x1 active.
        let f = |x: &[Jet2]| &x[0] * &(x[1].powi(2));
        let jet = jet2_eval(f, &[3.0, 2.0], &[1]).unwrap();
        assert_eq!(jet.arity(), 1);
        assert!((jet.value() - 12.0).abs() < 1e-15);
        assert!((jet.grad(0) - 12.0).abs() < 1e-15);
        assert!((jet.hess(0, 0) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn non_smooth_points_are_rejected() {
        let sqrt0 = |x: &[Jet2]| x[0].sqrt();
        assert!(matches!(
            jet2_eval(sqrt0, &[0.0], &[0]),
            Err(KropinaError::NonSmoothEvaluation { .. })
        ));
        let log_neg = |x: &[Jet2]| x[0].ln();
        assert!(matches!(
            jet2_eval(log_neg, &[-2.0], &[0]),
            Err(KropinaError::NonSmoothEvaluation { .. })
        ));
        assert!(matches!(
            jet2_eval(log_neg, &[0.0], &[0]),
            Err(KropinaError::NonSmoothEvaluation { .. })
        ));
        let div0 = |x: &[Jet2]| 1.0 / (&x[0] - 1.0);
        assert!(matches!(
            jet2_eval(div0, &[1.0], &[0]),
            Err(KropinaError::NonSmoothEvaluation { .. })
        ));
    }

    #[test]
    fn quadratic_jets_are_exact() {
        // f(x,y) = 2x^2 - 3xy + y - 7: degree 2, so the jet is exact.
        let f = |x: &[Jet2]| 2.0 * x[0].powi(2) - 3.0 * &x[0] * &x[1] + &x[1] - 7.0;
        let jet = jet2_eval(f, &[1.5, -2.0], &[0, 1]).unwrap();
        assert_eq!(jet.value(), 2.0 * 2.25 + 9.0 - 2.0 - 7.0);
        assert_eq!(jet.grad(0), 4.0 * 1.5 - 3.0 * -2.0);
        assert_eq!(jet.grad(1), -3.0 * 1.5 + 1.0);
        assert_eq!(jet.hess(0, 0), 4.0);
        assert_eq!(jet.hess(0, 1), -3.0);
        assert_eq!(jet.hess(1, 0), -3.0);
        assert_eq!(jet.hess(1, 1), 0.0);
    }
}
