//! Bivariate truncated Taylor arithmetic.
//!
//! A [`Jet2`] holds the Taylor coefficients `c[i][j] = ∂ₓ^i ∂_y^j f / (i! j!)`
//! of a scalar field at a base point, for all `i + j <= order`. Products are
//! truncated convolutions, and elementary functions are applied by composing
//! their univariate Taylor series with the non-constant part of the argument.
//!
//! Arithmetic never fails: a pole or a logarithm of a negative number yields
//! non-finite coefficients, which [`Jet2::checked`] turns into a domain error.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::{Result, VossError};

/// Largest supported total order.
pub const MAX_ORDER: usize = 10;
/// Order used when a caller has no specific need.
pub const DEFAULT_ORDER: usize = 5;

const LEN: usize = (MAX_ORDER + 1) * (MAX_ORDER + 2) / 2;

#[inline]
const fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Number of coefficients of a jet of the given order.
pub const fn coeff_count(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Truncated bivariate Taylor expansion at a base point.
#[derive(Clone, Copy, Debug)]
pub struct Jet2 {
    order: usize,
    base: (f64, f64),
    c: [f64; LEN],
}

impl PartialEq for Jet2 {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
            && self.base == other.base
            && self.coeffs() == other.coeffs()
    }
}

impl Jet2 {
    fn zeroed(order: usize, base: (f64, f64)) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        Jet2 { order, base, c: [0.0; LEN] }
    }

    /// Constant field.
    pub fn constant(value: f64, base: (f64, f64), order: usize) -> Self {
        let mut j = Self::zeroed(order, base);
        j.c[0] = value;
        j
    }

    /// The coordinate function `x` expanded at `(x, y)`.
    pub fn var_x(x: f64, y: f64, order: usize) -> Self {
        let mut j = Self::constant(x, (x, y), order);
        if order >= 1 {
            j.c[idx(1, 0)] = 1.0;
        }
        j
    }

    /// The coordinate function `y` expanded at `(x, y)`.
    pub fn var_y(x: f64, y: f64, order: usize) -> Self {
        let mut j = Self::constant(y, (x, y), order);
        if order >= 1 {
            j.c[idx(0, 1)] = 1.0;
        }
        j
    }

    /// Builds a jet from Taylor coefficients listed by total degree, then by
    /// the power of `y`: `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...`.
    pub fn from_coeffs(coeffs: &[f64], base: (f64, f64), order: usize) -> Self {
        assert_eq!(coeffs.len(), coeff_count(order));
        let mut j = Self::zeroed(order, base);
        j.c[..coeffs.len()].copy_from_slice(coeffs);
        j
    }

    /// Builds a jet from raw partial derivatives `∂ₓ^i ∂_y^j f`.
    pub fn from_partials(partials: impl Fn(usize, usize) -> f64, base: (f64, f64), order: usize) -> Self {
        let mut j = Self::zeroed(order, base);
        for d in 0..=order {
            for b in 0..=d {
                let a = d - b;
                j.c[idx(a, b)] = partials(a, b) / (factorial(a) * factorial(b));
            }
        }
        j
    }

    /// Jet of a potential `P` with `P(base) = value`, `P_x = wx`, `P_y = wy`.
    ///
    /// The one-form jets must share a base and be of equal order; the result
    /// is one order higher. Closedness is assumed, and only the `x`-part is
    /// read for coefficients with `i >= 1`.
    pub fn from_gradient(value: f64, wx: &Jet2, wy: &Jet2) -> Self {
        let n = wx.order.min(wy.order) + 1;
        let mut j = Self::zeroed(n, wx.base);
        j.c[0] = value;
        for d in 1..=n {
            for b in 0..=d {
                let a = d - b;
                j.c[idx(a, b)] = if a >= 1 {
                    wx.c[idx(a - 1, b)] / a as f64
                } else {
                    wy.c[idx(0, b - 1)] / b as f64
                };
            }
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn base(&self) -> (f64, f64) {
        self.base
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficient of `x^i y^j`; zero beyond the order.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            0.0
        } else {
            self.c[idx(i, j)]
        }
    }

    /// Overwrites one Taylor coefficient; `i + j` must not exceed the order.
    pub fn set_coeff(&mut self, i: usize, j: usize, v: f64) {
        assert!(i + j <= self.order, "coefficient beyond jet order");
        self.c[idx(i, j)] = v;
    }

    /// Coefficients in storage order.
    pub fn coeffs(&self) -> &[f64] {
        &self.c[..coeff_count(self.order)]
    }

    /// Raw partial derivative `∂ₓ^i ∂_y^j f` at the base point.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * factorial(i) * factorial(j)
    }

    pub fn dx(&self) -> f64 {
        self.partial(1, 0)
    }

    pub fn dy(&self) -> f64 {
        self.partial(0, 1)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs().iter().all(|v| v.is_finite())
    }

    /// Returns the jet unchanged when every coefficient is finite.
    pub fn checked(self) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(VossError::Domain(format!(
                "non-finite jet coefficient at ({}, {})",
                self.base.0, self.base.1
            )))
        }
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let n = order.min(self.order);
        let mut j = Self::zeroed(n, self.base);
        j.c[..coeff_count(n)].copy_from_slice(&self.c[..coeff_count(n)]);
        j
    }

    /// Partial derivative along one axis; the order drops by one.
    pub fn derivative(&self, axis: Axis) -> Result<Self> {
        if self.order == 0 {
            return Err(VossError::OrderExhausted);
        }
        let n = self.order - 1;
        let mut j = Self::zeroed(n, self.base);
        for d in 0..=n {
            for b in 0..=d {
                let a = d - b;
                j.c[idx(a, b)] = match axis {
                    Axis::X => (a + 1) as f64 * self.c[idx(a + 1, b)],
                    Axis::Y => (b + 1) as f64 * self.c[idx(a, b + 1)],
                };
            }
        }
        Ok(j)
    }

    /// `∂ₓ^i ∂_y^j` applied as a jet; panics if the order is insufficient.
    pub fn diff(&self, i: usize, j: usize) -> Self {
        assert!(i + j <= self.order, "differentiation beyond jet order");
        let mut out = *self;
        for _ in 0..i {
            out = out.derivative(Axis::X).expect("order checked");
        }
        for _ in 0..j {
            out = out.derivative(Axis::Y).expect("order checked");
        }
        out
    }

    /// Exchanges the roles of `x` and `y`, including the base point.
    pub fn transpose(&self) -> Self {
        let mut j = Self::zeroed(self.order, (self.base.1, self.base.0));
        for d in 0..=self.order {
            for b in 0..=d {
                j.c[idx(b, d - b)] = self.c[idx(d - b, b)];
            }
        }
        j
    }

    /// Evaluates the Taylor polynomial at `base + (hx, hy)`.
    pub fn eval_offset(&self, hx: f64, hy: f64) -> f64 {
        let mut total = 0.0;
        for d in (0..=self.order).rev() {
            let mut row = 0.0;
            for b in 0..=d {
                row += self.c[idx(d - b, b)] * hx.powi((d - b) as i32) * hy.powi(b as i32);
            }
            total += row;
        }
        total
    }

    fn same_frame(&self, other: &Self) -> (usize, (f64, f64)) {
        (self.order.min(other.order), self.base)
    }

    /// Applies a univariate function given its Taylor coefficients at the
    /// current value: `f(v0 + h) = Σ series[k] h^k`.
    pub fn compose(&self, series: &[f64]) -> Self {
        let n = self.order;
        debug_assert!(series.len() > n);
        let mut h = *self;
        h.c[0] = 0.0;
        let mut r = Self::constant(series[n], self.base, n);
        for k in (0..n).rev() {
            r = r * h;
            r.c[0] += series[k];
        }
        r
    }

    pub fn recip(&self) -> Self {
        let a = self.c[0];
        let n = self.order;
        let mut s = [0.0; MAX_ORDER + 1];
        let inv = 1.0 / a;
        let mut p = inv;
        for sk in s.iter_mut().take(n + 1) {
            *sk = p;
            p *= -inv;
        }
        self.compose(&s)
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        let mut s = [0.0; MAX_ORDER + 1];
        for (k, sk) in s.iter_mut().enumerate().take(self.order + 1) {
            *sk = e / factorial(k);
        }
        self.compose(&s)
    }

    pub fn ln(&self) -> Self {
        let a = self.c[0];
        let mut s = [0.0; MAX_ORDER + 1];
        s[0] = if a > 0.0 { a.ln() } else { f64::NAN };
        for k in 1..=self.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            s[k] = sign / (k as f64 * a.powi(k as i32));
        }
        self.compose(&s)
    }

    /// Real power `f^p` for positive base values.
    pub fn powf(&self, p: f64) -> Self {
        let a = self.c[0];
        let mut s = [0.0; MAX_ORDER + 1];
        if a <= 0.0 {
            s[0] = f64::NAN;
            return self.compose(&s);
        }
        let mut binom = 1.0;
        for k in 0..=self.order {
            s[k] = binom * a.powf(p - k as f64);
            binom *= (p - k as f64) / (k + 1) as f64;
        }
        self.compose(&s)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    /// Integer power by repeated multiplication.
    pub fn powi(&self, k: i32) -> Self {
        if k < 0 {
            return self.powi(-k).recip();
        }
        let mut r = Self::constant(1.0, self.base, self.order);
        for _ in 0..k {
            r = r * *self;
        }
        r
    }

    pub fn sin(&self) -> Self {
        let (s0, c0) = self.c[0].sin_cos();
        let cycle = [s0, c0, -s0, -c0];
        let mut s = [0.0; MAX_ORDER + 1];
        for k in 0..=self.order {
            s[k] = cycle[k % 4] / factorial(k);
        }
        self.compose(&s)
    }

    pub fn cos(&self) -> Self {
        let (s0, c0) = self.c[0].sin_cos();
        let cycle = [c0, -s0, -c0, s0];
        let mut s = [0.0; MAX_ORDER + 1];
        for k in 0..=self.order {
            s[k] = cycle[k % 4] / factorial(k);
        }
        self.compose(&s)
    }

    pub fn tan(&self) -> Self {
        self.sin() / self.cos()
    }

    pub fn sinh(&self) -> Self {
        let (sh, ch) = (self.c[0].sinh(), self.c[0].cosh());
        let mut s = [0.0; MAX_ORDER + 1];
        for k in 0..=self.order {
            s[k] = if k % 2 == 0 { sh } else { ch } / factorial(k);
        }
        self.compose(&s)
    }

    pub fn cosh(&self) -> Self {
        let (sh, ch) = (self.c[0].sinh(), self.c[0].cosh());
        let mut s = [0.0; MAX_ORDER + 1];
        for k in 0..=self.order {
            s[k] = if k % 2 == 0 { ch } else { sh } / factorial(k);
        }
        self.compose(&s)
    }

    pub fn tanh(&self) -> Self {
        // 1 - 2/(e^{2f}+1) stays bounded for large |f|.
        let a = self.c[0];
        if a.abs() > 20.0 {
            let sign = a.signum();
            let e = (*self * (-2.0 * sign)).exp();
            return (1.0 - e) / (1.0 + e) * sign;
        }
        self.sinh() / self.cosh()
    }

    /// `1 / cosh f`, computed from `e^{-|f|}` so that large arguments stay finite.
    pub fn sech(&self) -> Self {
        let sign = if self.c[0] >= 0.0 { 1.0 } else { -1.0 };
        let e = (*self * (-sign)).exp();
        e * 2.0 / (1.0 + e * e)
    }

    pub fn atan(&self) -> Self {
        let a = self.c[0];
        let n = self.order;
        let mut s = [0.0; MAX_ORDER + 1];
        s[0] = a.atan();
        if n >= 1 {
            // Series of 1/(1 + (a + t)^2) = 1/(p0 + p1 t + t^2), integrated term by term.
            let p0 = 1.0 + a * a;
            let p1 = 2.0 * a;
            let mut g = [0.0; MAX_ORDER + 1];
            g[0] = 1.0 / p0;
            for k in 1..n {
                let prev2 = if k >= 2 { g[k - 2] } else { 0.0 };
                g[k] = -(p1 * g[k - 1] + prev2) / p0;
            }
            for k in 1..=n {
                s[k] = g[k - 1] / k as f64;
            }
        }
        self.compose(&s)
    }
}

/// Coordinate axis selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        let (n, base) = self.same_frame(&rhs);
        let mut j = Jet2::zeroed(n, base);
        for k in 0..coeff_count(n) {
            j.c[k] = self.c[k] + rhs.c[k];
        }
        j
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        let (n, base) = self.same_frame(&rhs);
        let mut j = Jet2::zeroed(n, base);
        for k in 0..coeff_count(n) {
            j.c[k] = self.c[k] - rhs.c[k];
        }
        j
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        let (n, base) = self.same_frame(&rhs);
        let mut j = Jet2::zeroed(n, base);
        for d in 0..=n {
            for b in 0..=d {
                let a = d - b;
                let mut acc = 0.0;
                for p in 0..=a {
                    for q in 0..=b {
                        acc += self.c[idx(p, q)] * rhs.c[idx(a - p, b - q)];
                    }
                }
                j.c[idx(a, b)] = acc;
            }
        }
        j
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet2) -> Jet2 {
        self * rhs.recip()
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(mut self) -> Jet2 {
        for k in 0..coeff_count(self.order) {
            self.c[k] = -self.c[k];
        }
        self
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(mut self, rhs: f64) -> Jet2 {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet2 {
    type Output = Jet2;
    fn sub(mut self, rhs: f64) -> Jet2 {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(mut self, rhs: f64) -> Jet2 {
        for k in 0..coeff_count(self.order) {
            self.c[k] *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet2 {
    type Output = Jet2;
    fn div(self, rhs: f64) -> Jet2 {
        self * (1.0 / rhs)
    }
}

impl Add<Jet2> for f64 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        rhs + self
    }
}

impl Sub<Jet2> for f64 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        -rhs + self
    }
}

impl Mul<Jet2> for f64 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        rhs * self
    }
}

impl Div<Jet2> for f64 {
    type Output = Jet2;
    fn div(self, rhs: Jet2) -> Jet2 {
        rhs.recip() * self
    }
}

impl AddAssign for Jet2 {
    fn add_assign(&mut self, rhs: Jet2) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet2 {
    fn sub_assign(&mut self, rhs: Jet2) {
        *self = *self - rhs;
    }
}

impl MulAssign<f64> for Jet2 {
    fn mul_assign(&mut self, rhs: f64) {
        *self = *self * rhs;
    }
}

/// Scalar field evaluated as jets at arbitrary points.
pub trait ScalarField: Send + Sync {
    /// Jet of the field at `(x, y)` truncated at `order`.
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet2>;

    /// Human-readable identifier.
    fn name(&self) -> String;

    fn value(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.jet(x, y, 0)?.value())
    }
}

type JetFn = dyn Fn(Jet2, Jet2) -> Jet2 + Send + Sync;
type VecJetFn = dyn Fn(Jet2, Jet2) -> [Jet2; 3] + Send + Sync;

/// Field given by an elementary composition of the coordinate jets.
#[derive(Clone)]
pub struct AnalyticField {
    name: String,
    params: Vec<(String, f64)>,
    f: std::sync::Arc<JetFn>,
}

impl std::fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticField")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish()
    }
}

impl AnalyticField {
    pub fn new(
        name: impl Into<String>,
        params: Vec<(String, f64)>,
        f: impl Fn(Jet2, Jet2) -> Jet2 + Send + Sync + 'static,
    ) -> Self {
        AnalyticField { name: name.into(), params, f: std::sync::Arc::new(f) }
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }
}

impl ScalarField for AnalyticField {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet2> {
        jet_lift(&*self.f, x, y, order)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Expands `f(x, y)` at a point by feeding it the coordinate jets.
pub fn jet_lift(f: &(impl Fn(Jet2, Jet2) -> Jet2 + ?Sized), x: f64, y: f64, order: usize) -> Result<Jet2> {
    if order > MAX_ORDER {
        return Err(VossError::Unsupported(format!("jet order {order} > {MAX_ORDER}")));
    }
    f(Jet2::var_x(x, y, order), Jet2::var_y(x, y, order)).checked()
}

/// Vector-valued analogue of [`AnalyticField`].
#[derive(Clone)]
pub struct VectorField {
    name: String,
    f: std::sync::Arc<VecJetFn>,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField").field("name", &self.name).finish()
    }
}

impl VectorField {
    pub fn new(name: impl Into<String>, f: impl Fn(Jet2, Jet2) -> [Jet2; 3] + Send + Sync + 'static) -> Self {
        VectorField { name: name.into(), f: std::sync::Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn jets(&self, x: f64, y: f64, order: usize) -> Result<[Jet2; 3]> {
        if order > MAX_ORDER {
            return Err(VossError::Unsupported(format!("jet order {order} > {MAX_ORDER}")));
        }
        let v = (self.f)(Jet2::var_x(x, y, order), Jet2::var_y(x, y, order));
        Ok([v[0].checked()?, v[1].checked()?, v[2].checked()?])
    }
}

/// Dot product of jet triples.
pub fn dot3(a: &[Jet2; 3], b: &[Jet2; 3]) -> Jet2 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kink_diag(x: Jet2, y: Jet2) -> Jet2 {
        (x + y).exp().atan() * 4.0
    }

    #[test]
    fn constant_field() {
        let j = jet_lift(&|x: Jet2, _y: Jet2| x * 0.0 + 1.0, 0.3, -0.2, 2).unwrap();
        assert_eq!(j.coeffs(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn bilinear_product() {
        let j = jet_lift(&|x: Jet2, y: Jet2| x * y, 2.0, 3.0, 2).unwrap();
        assert_eq!(j.value(), 6.0);
        assert_eq!(j.partial(1, 0), 3.0);
        assert_eq!(j.partial(0, 1), 2.0);
        assert_eq!(j.partial(1, 1), 1.0);
        assert_eq!(j.partial(2, 0), 0.0);
        assert_eq!(j.partial(0, 2), 0.0);
    }

    #[test]
    fn kink_against_finite_differences() {
        let j = jet_lift(&kink_diag, 0.0, 0.0, 3).unwrap();
        let f = |x: f64, y: f64| 4.0 * (x + y).exp().atan();
        let h = 1e-5;
        let fd_x = (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h);
        let fd_y = (f(0.0, h) - f(0.0, -h)) / (2.0 * h);
        assert!((j.value() - std::f64::consts::PI).abs() < 1e-15);
        assert!((j.dx() - fd_x).abs() < 1e-8);
        assert!((j.dy() - fd_y).abs() < 1e-8);
        assert!((j.dx() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_of_square_and_sine() {
        let sq = jet_lift(&|x: Jet2, _| x * x, 1.5, 0.0, 3).unwrap();
        let d = sq.derivative(Axis::X).unwrap();
        let two_x = jet_lift(&|x: Jet2, _| x * 2.0, 1.5, 0.0, 2).unwrap();
        assert_eq!(d, two_x);

        let s = jet_lift(&|x: Jet2, _| x.sin(), 0.0, 0.0, 6).unwrap();
        let c = jet_lift(&|x: Jet2, _| x.cos(), 0.0, 0.0, 5).unwrap();
        let ds = s.derivative(Axis::X).unwrap();
        for (a, b) in ds.coeffs().iter().zip(c.coeffs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn kink_derivative_on_diagonal() {
        let j = jet_lift(&kink_diag, 1.0, -1.0, 3).unwrap();
        let d = j.derivative(Axis::X).unwrap();
        assert!((d.value() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn order_zero_cannot_differentiate() {
        let j = Jet2::constant(1.0, (0.0, 0.0), 0);
        assert_eq!(j.derivative(Axis::Y), Err(VossError::OrderExhausted));
    }

    #[test]
    fn pole_is_domain_error() {
        let r = jet_lift(&|x: Jet2, _| 1.0 / x, 0.0, 0.0, 2);
        assert!(matches!(r, Err(VossError::Domain(_))));
        let r = jet_lift(&|x: Jet2, _| x.ln(), -1.0, 0.0, 2);
        assert!(matches!(r, Err(VossError::Domain(_))));
    }

    #[test]
    fn elementary_functions_match_central_differences() {
        type F = fn(Jet2, Jet2) -> Jet2;
        type G = fn(f64, f64) -> f64;
        let cases: Vec<(F, G)> = vec![
            (|x, y| (x * y).sin() + (x - y).cos(), |x, y| (x * y).sin() + (x - y).cos()),
            (|x, y| (x + y * 0.5).tanh(), |x, y| (x + y * 0.5).tanh()),
            (|x, y| (x * x + y * y + 1.0).sqrt(), |x, y| (x * x + y * y + 1.0).sqrt()),
            (|x, y| (x - y).atan() / (x + y).cosh(), |x, y| (x - y).atan() / (x + y).cosh()),
            (|x, y| (x * 0.3 + 2.0).ln() * y.sinh(), |x, y| (x * 0.3 + 2.0).ln() * y.sinh()),
            (|x, y| (x + y).sech(), |x, y| 1.0 / (x + y).cosh()),
        ];
        let (x0, y0) = (0.37, -0.21);
        for (f, g) in cases {
            let j = jet_lift(&f, x0, y0, 2).unwrap();
            let h = 1e-4;
            let fxx = (g(x0 + h, y0) - 2.0 * g(x0, y0) + g(x0 - h, y0)) / (h * h);
            let fxy = (g(x0 + h, y0 + h) - g(x0 + h, y0 - h) - g(x0 - h, y0 + h) + g(x0 - h, y0 - h))
                / (4.0 * h * h);
            let fx = (g(x0 + h, y0) - g(x0 - h, y0)) / (2.0 * h);
            assert!((j.value() - g(x0, y0)).abs() < 1e-14);
            assert!((j.dx() - fx).abs() < 1e-6 * (1.0 + fx.abs()));
            assert!((j.partial(2, 0) - fxx).abs() < 1e-5 * (1.0 + fxx.abs()));
            assert!((j.partial(1, 1) - fxy).abs() < 1e-5 * (1.0 + fxy.abs()));
        }
    }

    #[test]
    fn high_order_sine_matches_closed_form() {
        let j = jet_lift(&|x: Jet2, y: Jet2| (x + y).sin(), 0.4, 0.1, MAX_ORDER).unwrap();
        for d in 0..=MAX_ORDER {
            let expected = (0.5f64 + d as f64 * std::f64::consts::FRAC_PI_2).sin();
            for b in 0..=d {
                assert!((j.partial(d - b, b) - expected).abs() < 1e-9 * factorial(d).max(1.0));
            }
        }
    }

    #[test]
    fn gradient_reconstruction_round_trip() {
        let f = |x: Jet2, y: Jet2| (x * y).sin() + x.exp() * y;
        let j = jet_lift(&f, 0.2, 0.4, 5).unwrap();
        let wx = j.derivative(Axis::X).unwrap();
        let wy = j.derivative(Axis::Y).unwrap();
        let back = Jet2::from_gradient(j.value(), &wx, &wy);
        for (a, b) in back.coeffs().iter().zip(j.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn eval_offset_matches_function() {
        let j = jet_lift(&|x: Jet2, y: Jet2| (x + y * 2.0).exp(), 0.0, 0.0, MAX_ORDER).unwrap();
        let v = j.eval_offset(0.05, -0.02);
        assert!((v - (0.05f64 - 0.04).exp()).abs() < 1e-15);
    }

    #[test]
    fn transpose_swaps_partials() {
        let j = jet_lift(&|x: Jet2, y: Jet2| x * x * x * y, 1.2, 0.7, 4).unwrap();
        let t = j.transpose();
        assert_eq!(t.base(), (0.7, 1.2));
        assert_eq!(t.partial(1, 3), j.partial(3, 1));
        assert_eq!(t.partial(0, 2), j.partial(2, 0));
    }

    fn poly(cs: &[f64]) -> impl Fn(Jet2, Jet2) -> Jet2 + '_ {
        move |x, y| {
            (x * cs[0] + y * cs[1]).sin() * cs[2] + (x * y * cs[3]).exp() + (y * cs[4] + 1.5).atan()
        }
    }

    proptest! {
        #[test]
        fn product_rule(cs in prop::collection::vec(-1.0f64..1.0, 10), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let f = jet_lift(&poly(&cs[..5]), x, y, 6).unwrap();
            let g = jet_lift(&poly(&cs[5..]), x, y, 6).unwrap();
            for axis in [Axis::X, Axis::Y] {
                let lhs = (f * g).derivative(axis).unwrap();
                let rhs = f.derivative(axis).unwrap() * g + f * g.derivative(axis).unwrap();
                for (a, b) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                    prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()) * 8.0);
                }
            }
        }

        #[test]
        fn mixed_partials_commute(cs in prop::collection::vec(-1.0f64..1.0, 5), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let f = jet_lift(&poly(&cs), x, y, 6).unwrap();
            let xy = f.derivative(Axis::X).unwrap().derivative(Axis::Y).unwrap();
            let yx = f.derivative(Axis::Y).unwrap().derivative(Axis::X).unwrap();
            prop_assert_eq!(xy, yx);
        }

        #[test]
        fn transpose_is_involution(cs in prop::collection::vec(-1.0f64..1.0, 5), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let f = jet_lift(&poly(&cs), x, y, 5).unwrap();
            prop_assert_eq!(f.transpose().transpose(), f);
        }
    }
}
