//! Solutions of the Moutard equation `Φ_xy = Φ cos φ`.
//!
//! Local symmetries come in closed form. Recursion operators and the nonlocal
//! hierarchy need potentials of closed one-forms; those are integrated along
//! grid lines and differentiated through their defining one-forms, so every
//! field can still be expanded as a jet at any point.

use std::sync::Arc;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::SGSolution;
use crate::error::{Result, VossError};
use crate::frames::Surface;
use crate::grid::GridSpec;
use crate::jets::{Axis, Jet2, ScalarField, MAX_ORDER};

/// Where a field's values come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    ClosedForm(String),
    Quadrature { base: (f64, f64), constants: Vec<f64> },
}

/// An evaluable solution of the Moutard equation for a fixed `φ`.
pub trait MoutardField: Send + Sync {
    /// Jet of `Φ` at `(x, y)`.
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet2>;

    fn solution(&self) -> &SGSolution;

    fn label(&self) -> String;

    fn provenance(&self) -> Provenance {
        Provenance::ClosedForm(self.label())
    }

    /// Potential grids this field depends on.
    fn potentials(&self) -> Vec<Arc<PotentialGrid>> {
        Vec::new()
    }

    fn value(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.jet(x, y, 0)?.value())
    }
}

pub type FieldRef = Arc<dyn MoutardField>;

/// `|Φ_xy − Φ cos φ|` at a point.
pub fn moutard_residual(f: &dyn MoutardField, x: f64, y: f64) -> Result<f64> {
    let j = f.jet(x, y, 2)?;
    let p = f.solution().jet(x, y, 0)?.value();
    Ok((j.partial(1, 1) - j.value() * p.cos()).abs())
}

type JetRule = dyn Fn(&SGSolution, f64, f64, usize) -> Result<Jet2> + Send + Sync;

/// Field given by an explicit rule in terms of the jets of `φ`.
#[derive(Clone)]
pub struct ClosedField {
    label: String,
    phi: SGSolution,
    rule: Arc<JetRule>,
}

impl ClosedField {
    pub fn new(
        label: impl Into<String>,
        phi: &SGSolution,
        rule: impl Fn(&SGSolution, f64, f64, usize) -> Result<Jet2> + Send + Sync + 'static,
    ) -> Self {
        ClosedField { label: label.into(), phi: phi.clone(), rule: Arc::new(rule) }
    }
}

impl MoutardField for ClosedField {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet2> {
        (self.rule)(&self.phi, x, y, order)?.checked()
    }
    fn solution(&self) -> &SGSolution {
        &self.phi
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

pub(crate) fn phi_jet(phi: &SGSolution, x: f64, y: f64, order: usize) -> Result<Jet2> {
    if order > MAX_ORDER {
        return Err(VossError::Unsupported(format!("needs a jet of order {order} > {MAX_ORDER}")));
    }
    phi.jet(x, y, order)
}

/// `φ_x` or `φ_y`.
pub fn translation_symmetry(phi: &SGSolution, axis: Axis) -> FieldRef {
    let label = match axis {
        Axis::X => "translate:x",
        Axis::Y => "translate:y",
    };
    Arc::new(ClosedField::new(label, phi, move |p, x, y, k| phi_jet(p, x, y, k + 1)?.derivative(axis)))
}

/// `x φ_x − y φ_y`, the shadow of the scaling symmetry.
pub fn scaling_shadow(phi: &SGSolution) -> FieldRef {
    Arc::new(ClosedField::new("scaling", phi, |p, x, y, k| {
        let j = phi_jet(p, x, y, k + 1)?;
        Ok(Jet2::var_x(x, y, k) * j.derivative(Axis::X)? - Jet2::var_y(x, y, k) * j.derivative(Axis::Y)?)
    }))
}

/// `x`-derivatives `u, u_x, u_xx, …` of `u = φ_x`, each of order `order`.
fn phi_x_tower(phi: &SGSolution, x: f64, y: f64, order: usize, count: usize) -> Result<Vec<Jet2>> {
    let p = phi_jet(phi, x, y, order + count)?;
    let mut out = Vec::with_capacity(count);
    let mut cur = p.derivative(Axis::X)?;
    for _ in 0..count {
        out.push(cur.truncate(order));
        if cur.order() > 0 {
            cur = cur.derivative(Axis::X)?;
        }
    }
    Ok(out)
}

/// Closed-form member `n ∈ 1..=4` of the local (pmKdV) hierarchy as a jet.
///
/// The fourth member is `D_x² Φ₃ + φ_x Q₃` with the homogeneous potential
/// `Q₃ = u u₄ − u₁u₃ + ½u₂² + 5/2 (u³u₂ + ½u²u₁²) + 5/16 u⁶`, `u = φ_x`.
pub fn pmkdv_jet(phi: &SGSolution, n: usize, x: f64, y: f64, order: usize) -> Result<Jet2> {
    let phi3 = |k: usize| -> Result<Jet2> {
        let u = phi_x_tower(phi, x, y, k, 5)?;
        let u2sq = u[0] * u[0];
        Ok(u[4] + u2sq * u[2] * 2.5 + u[0] * u[1] * u[1] * 2.5 + u2sq * u2sq * u[0] * 0.375)
    };
    match n {
        1 => Ok(phi_x_tower(phi, x, y, order, 1)?[0]),
        2 => {
            let u = phi_x_tower(phi, x, y, order, 3)?;
            Ok(u[2] + u[0] * u[0] * u[0] * 0.5)
        }
        3 => phi3(order),
        4 => {
            let p3 = phi3(order + 2)?;
            let u = phi_x_tower(phi, x, y, order, 5)?;
            let (u0, u1, u2, u3, u4) = (u[0], u[1], u[2], u[3], u[4]);
            let sq = u0 * u0;
            let q3 = u0 * u4 - u1 * u3 + u2 * u2 * 0.5
                + (sq * u0 * u2 + sq * u1 * u1 * 0.5) * 2.5
                + sq * sq * sq * (5.0 / 16.0);
            Ok(p3.diff(2, 0) + u0 * q3)
        }
        _ => Err(VossError::Unsupported(format!("local hierarchy member {n}"))),
    }
}

/// Member `n ∈ {±1, ±2, ±3}` of the local hierarchy; negative members are
/// obtained by exchanging `x` and `y`.
pub fn pmkdv_member(phi: &SGSolution, n: i32) -> Result<FieldRef> {
    if n == 0 || n.abs() > 3 {
        return Err(VossError::Unsupported(format!("pmkdv member {n}; supported: ±1, ±2, ±3")));
    }
    Ok(pmkdv_member_unchecked(phi, n))
}

/// The fourth local member, used for dependency checks on the three-soliton.
pub fn pmkdv_fourth(phi: &SGSolution) -> FieldRef {
    pmkdv_member_unchecked(phi, 4)
}

fn pmkdv_member_unchecked(phi: &SGSolution, n: i32) -> FieldRef {
    let m = n.unsigned_abs() as usize;
    if n > 0 {
        Arc::new(ClosedField::new(format!("pmkdv:{n}"), phi, move |p, x, y, k| pmkdv_jet(p, m, x, y, k)))
    } else {
        let inner: FieldRef = Arc::new(ClosedField::new(format!("pmkdv:{m}"), &phi.transposed(), move |p, x, y, k| {
            pmkdv_jet(p, m, x, y, k)
        }));
        Arc::new(Transposed::labelled(inner, format!("pmkdv:{n}")))
    }
}

/// `c · n` for a constant vector `c`.
pub fn normal_component(surface: Arc<dyn Surface>, c: Vector3<f64>) -> Result<FieldRef> {
    if c.norm() == 0.0 || !c.iter().all(|v| v.is_finite()) {
        return Err(VossError::Config("normal component needs a finite non-zero vector".into()));
    }
    Ok(Arc::new(NormalField { phi: surface.solution().clone(), surface, c }))
}

struct NormalField {
    surface: Arc<dyn Surface>,
    phi: SGSolution,
    c: Vector3<f64>,
}

impl MoutardField for NormalField {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet2> {
        let n = self.surface.frame_jets(x, y, order)?.n;
        Ok(n[0] * self.c[0] + n[1] * self.c[1] + n[2] * self.c[2])
    }
    fn solution(&self) -> &SGSolution {
        &self.phi
    }
    fn label(&self) -> String {
        format!("normal:{},{},{}", self.c[0], self.c[1], self.c[2])
    }
}

/// The field `(x, y) ↦ F(y, x)` for a field `F` over the transposed solution.
pub struct Transposed {
    inner: FieldRef,
    phi: SGSolution,
    label: String,
}

impl Transposed {
    pub fn new(inner: FieldRef) -> Self {
        let label = format!("T({})", inner.label());
        Self::labelled(inner, label)
    }

    pub fn labelled(inner: FieldRef, label: String) -> Self {
        let phi = inner.solution().transposed();
        Transposed { inner, phi, label }
    }
}

impl MoutardField for Transposed {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet2> {
        Ok(self.inner.jet(y, x, order)?.transpose())
    }
    fn solution(&self) -> &SGSolution {
        &self.phi
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn provenance(&self) -> Provenance {
        match self.inner.provenance() {
            Provenance::Quadrature { base, constants } => Provenance::Quadrature { base: (base.1, base.0), constants },
            p => p,
        }
    }
    fn potentials(&self) -> Vec<Arc<PotentialGrid>> {
        self.inner.potentials()
    }
}

/// `Σ c_i Φ_i` over one solution.
pub struct LinearCombination {
    terms: Vec<(f64, FieldRef)>,
    phi: SGSolution,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, FieldRef)>) -> Result<FieldRef> {
        let phi = terms
            .first()
            .map(|t| t.1.solution().clone())
            .ok_or_else(|| VossError::Config("empty linear combination".into()))?;
        if terms.iter().any(|t| t.1.solution().id() != phi.id()) {
            return Err(VossError::Config("combined fields must share one solution".into()));
        }
        Ok(Arc::new(LinearCombination { terms, phi }))
    }
}

impl MoutardField for LinearCombination {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet2> {
        let mut acc = Jet2::constant(0.0, (x, y), order);
        for (c, f) in &self.terms {
            if *c != 0.0 {
                acc += f.jet(x, y, order)? * *c;
            }
        }
        Ok(acc)
    }
    fn solution(&self) -> &SGSolution {
        &self.phi
    }
    fn label(&self) -> String {
        self.terms
            .iter()
            .map(|(c, f)| format!("{c}*{}", f.label()))
            .collect::<Vec<_>>()
            .join("+")
    }
    fn provenance(&self) -> Provenance {
        let quad = self.terms.iter().find_map(|t| match t.1.provenance() {
            p @ Provenance::Quadrature { .. } => Some(p),
            _ => None,
        });
        quad.unwrap_or_else(|| Provenance::ClosedForm(self.label()))
    }
    fn potentials(&self) -> Vec<Arc<PotentialGrid>> {
        self.terms.iter().flat_map(|t| t.1.potentials()).collect()
    }
}

/// The zero solution.
pub fn zero_field(phi: &SGSolution) -> FieldRef {
    Arc::new(ClosedField::new("zero", phi, |_, x, y, k| Ok(Jet2::constant(0.0, (x, y), k))))
}

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

/// A one-form `ω_x dx + ω_y dy` evaluated as a pair of jets.
pub trait OneForm: Send + Sync {
    fn jets(&self, x: f64, y: f64, order: usize) -> Result<(Jet2, Jet2)>;
    fn name(&self) -> String;
}

type FormRule = dyn Fn(f64, f64, usize) -> Result<(Jet2, Jet2)> + Send + Sync;

/// One-form given by a closure.
#[derive(Clone)]
pub struct FnForm {
    name: String,
    rule: Arc<FormRule>,
}

impl FnForm {
    pub fn new(name: impl Into<String>, rule: impl Fn(f64, f64, usize) -> Result<(Jet2, Jet2)> + Send + Sync + 'static) -> Self {
        FnForm { name: name.into(), rule: Arc::new(rule) }
    }
}

impl OneForm for FnForm {
    fn jets(&self, x: f64, y: f64, order: usize) -> Result<(Jet2, Jet2)> {
        (self.rule)(x, y, order)
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Number of derivatives used by the two-point Hermite rule on each cell.
pub const HERMITE_DERIVS: usize = 4;

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// Weights of `∫₀ʰ f ≈ Σ_k c_k h^{k+1} (f⁽ᵏ⁾(0) + (−1)ᵏ f⁽ᵏ⁾(h))`, exact for
/// polynomials of degree `2m + 1`.
pub fn hermite_weights(m: usize) -> Vec<f64> {
    (0..=m)
        .map(|k| {
            factorial(m) * factorial(2 * m + 1 - k)
                / (2.0 * factorial(m - k) * factorial(2 * m + 1) * factorial(k + 1))
        })
        .collect()
}

/// Integral of `ω` along one axis between two points, given the one-form
/// jets at both ends.
fn hermite_segment(w: &[f64], a: &(Jet2, Jet2), b: &(Jet2, Jet2), axis: Axis, h: f64) -> f64 {
    let mut total = 0.0;
    let mut hp = h;
    for (k, wk) in w.iter().enumerate() {
        let (fa, fb) = match axis {
            Axis::X => (a.0.partial(k, 0), b.0.partial(k, 0)),
            Axis::Y => (a.1.partial(0, k), b.1.partial(0, k)),
        };
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        total += wk * hp * (fa + sign * fb);
        hp *= h;
    }
    total
}

/// Grid of values of a potential `P` with `dP = ω` and `P(base) = constant`.
pub struct PotentialGrid {
    name: String,
    grid: GridSpec,
    base: (usize, usize),
    constant: f64,
    values: Vec<f64>,
    alt_values: Vec<f64>,
    node_jets: Vec<(Jet2, Jet2)>,
    form: Arc<dyn OneForm>,
    weights: Vec<f64>,
    /// Largest relative closedness residual `|∂_y ω_x − ∂_x ω_y|` over the nodes.
    pub closedness: f64,
    /// Largest node difference between x-then-y and y-then-x integration.
    pub path_discrepancy: f64,
}

impl std::fmt::Debug for PotentialGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialGrid")
            .field("name", &self.name)
            .field("grid", &self.grid)
            .field("base", &self.base)
            .field("constant", &self.constant)
            .field("closedness", &self.closedness)
            .field("path_discrepancy", &self.path_discrepancy)
            .finish()
    }
}

/// Tolerance on the relative closedness residual of a one-form.
pub const CLOSEDNESS_TOL: f64 = 1e-6;

/// Integrates a closed one-form over the grid from `base` (a node).
pub fn integrate_potential(form: Arc<dyn OneForm>, grid: &GridSpec, base: (f64, f64), c0: f64) -> Result<PotentialGrid> {
    grid.validate()?;
    let (ib, jb) = grid
        .node_of(base.0, base.1)
        .ok_or_else(|| VossError::Config(format!("base point ({}, {}) is not a grid node", base.0, base.1)))?;
    let m = HERMITE_DERIVS;
    let weights = hermite_weights(m);
    let node_jets: Vec<(Jet2, Jet2)> = grid
        .points()
        .par_iter()
        .map(|&(x, y)| form.jets(x, y, m))
        .collect::<Result<_>>()?;

    let mut closedness = 0.0f64;
    for (k, (wx, wy)) in node_jets.iter().enumerate() {
        let a = wx.partial(0, 1);
        let b = wy.partial(1, 0);
        let rel = (a - b).abs() / (1.0 + a.abs().max(b.abs()));
        if !(rel <= CLOSEDNESS_TOL) {
            let (x, y) = grid.point(grid.ij(k).0, grid.ij(k).1);
            return Err(VossError::NotClosed { residual: rel, x, y });
        }
        closedness = closedness.max(rel);
    }

    let (nx, ny) = (grid.nx, grid.ny);
    let jet_at = |i: usize, j: usize| &node_jets[grid.index(i, j)];
    // seg_x[index(i, j)] integrates from node (i, j) to (i+1, j).
    let seg_x: Vec<f64> = (0..grid.len())
        .map(|k| {
            let (i, j) = grid.ij(k);
            if i + 1 < nx {
                hermite_segment(&weights, jet_at(i, j), jet_at(i + 1, j), Axis::X, grid.dx)
            } else {
                0.0
            }
        })
        .collect();
    let seg_y: Vec<f64> = (0..grid.len())
        .map(|k| {
            let (i, j) = grid.ij(k);
            if j + 1 < ny {
                hermite_segment(&weights, jet_at(i, j), jet_at(i, j + 1), Axis::Y, grid.dy)
            } else {
                0.0
            }
        })
        .collect();

    let line = |start: f64, pos: usize, len: usize, seg: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut out = vec![0.0; len];
        out[pos] = start;
        for a in pos + 1..len {
            out[a] = out[a - 1] + seg(a - 1);
        }
        for a in (0..pos).rev() {
            out[a] = out[a + 1] - seg(a);
        }
        out
    };

    let mut values = vec![0.0; grid.len()];
    let row = line(c0, ib, nx, &|i| seg_x[grid.index(i, jb)]);
    for i in 0..nx {
        let col = line(row[i], jb, ny, &|j| seg_y[grid.index(i, j)]);
        for j in 0..ny {
            values[grid.index(i, j)] = col[j];
        }
    }
    let mut alt_values = vec![0.0; grid.len()];
    let col = line(c0, jb, ny, &|j| seg_y[grid.index(ib, j)]);
    for j in 0..ny {
        let row = line(col[j], ib, nx, &|i| seg_x[grid.index(i, j)]);
        for i in 0..nx {
            alt_values[grid.index(i, j)] = row[i];
        }
    }
    let path_discrepancy = values
        .iter()
        .zip(&alt_values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    Ok(PotentialGrid {
        name: form.name(),
        grid: *grid,
        base: (ib, jb),
        constant: c0,
        values,
        alt_values,
        node_jets,
        form,
        weights,
        closedness,
        path_discrepancy,
    })
}

impl PotentialGrid {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn base_point(&self) -> (f64, f64) {
        self.grid.point(self.base.0, self.base.1)
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Node values from the x-then-y integration order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Node values from the y-then-x integration order.
    pub fn alt_values(&self) -> &[f64] {
        &self.alt_values
    }

    pub fn form(&self) -> &Arc<dyn OneForm> {
        &self.form
    }

    fn form_jets_at(&self, x: f64, y: f64) -> Result<(Jet2, Jet2)> {
        match self.grid.node_of(x, y) {
            Some((i, j)) => Ok(self.node_jets[self.grid.index(i, j)]),
            None => self.form.jets(x, y, HERMITE_DERIVS),
        }
    }

    fn leg(&self, from: (f64, f64), axis: Axis, len: f64) -> Result<f64> {
        if len == 0.0 {
            return Ok(0.0);
        }
        let cell = match axis {
            Axis::X => self.grid.dx,
            Axis::Y => self.grid.dy,
        };
        let pieces = ((len.abs() / cell).ceil() as usize).max(1);
        let h = len / pieces as f64;
        let at = |t: f64| match axis {
            Axis::X => (from.0 + t, from.1),
            Axis::Y => (from.0, from.1 + t),
        };
        let mut total = 0.0;
        let mut prev = self.form_jets_at(from.0, from.1)?;
        for p in 1..=pieces {
            let (x, y) = at(p as f64 * h);
            let next = self.form_jets_at(x, y)?;
            total += hermite_segment(&self.weights, &prev, &next, axis, h);
            prev = next;
        }
        Ok(total)
    }

    /// Value at any point: stored at nodes, otherwise integrated from the
    /// nearest node along `x` and then `y`.
    pub fn value(&self, x: f64, y: f64) -> Result<f64> {
        if let Some((i, j)) = self.grid.node_of(x, y) {
            return Ok(self.values[self.grid.index(i, j)]);
        }
        let (i, j) = self.grid.nearest(x, y);
        let (xi, yj) = self.grid.point(i, j);
        let v = self.values[self.grid.index(i, j)];
        Ok(v + self.leg((xi, yj), Axis::X, x - xi)? + self.leg((x, yj), Axis::Y, y - yj)?)
    }

    /// Jet of the potential: value from quadrature, derivatives from `ω`.
    pub fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet2> {
        let v = self.value(x, y)?;
        if order == 0 {
            return Ok(Jet2::constant(v, (x, y), 0));
        }
        let (wx, wy) = self.form.jets(x, y, order - 1)?;
        Ok(Jet2::from_gradient(v, &wx, &wy))
    }
}

/// Base point and integration constants for quadrature-defined fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    /// Base node; the grid origin when absent.
    pub base: Option<(f64, f64)>,
    /// Constants in order of the potentials a construction introduces;
    /// missing entries are zero.
    pub constants: Vec<f64>,
}

impl Quadrature {
    pub fn with_constants(constants: Vec<f64>) -> Self {
        Quadrature { base: None, constants }
    }

    pub fn base_on(&self, grid: &GridSpec) -> (f64, f64) {
        self.base.unwrap_or((grid.x0, grid.y0))
    }

    pub fn constant(&self, k: usize) -> f64 {
        self.constants.get(k).copied().unwrap_or(0.0)
    }

    pub fn transpose(&self) -> Self {
        Quadrature { base: self.base.map(|(x, y)| (y, x)), constants: self.constants.clone() }
    }
}

// ---------------------------------------------------------------------------
// Recursion operators
// ---------------------------------------------------------------------------

/// `RΦ = Φ_xx + φ_x Q` with `Q_x = Φ_x φ_x`, `Q_y = Φ sin φ`.
pub struct RField {
    inner: FieldRef,
    phi: SGSolution,
    q: Arc<PotentialGrid>,
    label: String,
}

/// The one-form defining the potential of the recursion operator.
pub fn recursion_form(field: FieldRef) -> FnForm {
    let name = format!("Q[{}]", field.label());
    FnForm::new(name, move |x, y, k| {
        let f = field.jet(x, y, k + 1)?;
        let p = phi_jet(field.solution(), x, y, k + 1)?;
        let wx = f.derivative(Axis::X)? * p.derivative(Axis::X)?;
        let wy = f.truncate(k) * p.truncate(k).sin();
        Ok((wx, wy))
    })
}

/// Applies the recursion operator with potential constant `Q(base) = c0`.
pub fn apply_r(field: FieldRef, grid: &GridSpec, quad: &Quadrature) -> Result<FieldRef> {
    let phi = field.solution().clone();
    let form: Arc<dyn OneForm> = Arc::new(recursion_form(field.clone()));
    let q = Arc::new(integrate_potential(form, grid, quad.base_on(grid), quad.constant(0))?);
    let label = format!("R({})", field.label());
    Ok(Arc::new(RField { inner: field, phi, q, label }))
}

impl RField {
    pub fn potential(&self) -> &Arc<PotentialGrid> {
        &self.q
    }
}

impl MoutardField for RField {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet2> {
        let f = self.inner.jet(x, y, order + 2)?;
        let p = phi_jet(&self.phi, x, y, order + 1)?;
        let q = self.q.jet(x, y, order)?;
        Ok(f.diff(2, 0) + p.derivative(Axis::X)? * q)
    }
    fn solution(&self) -> &SGSolution {
        &self.phi
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn provenance(&self) -> Provenance {
        Provenance::Quadrature { base: self.q.base_point(), constants: vec![self.q.constant()] }
    }
    fn potentials(&self) -> Vec<Arc<PotentialGrid>> {
        let mut v = self.inner.potentials();
        v.push(self.q.clone());
        v
    }
}

/// `R′Φ = Φ_yy + φ_y Q′` with `Q′_y = Φ_y φ_y`, `Q′_x = Φ sin φ`: the recursion
/// operator with `x` and `y` exchanged, which inverts `R` modulo `ℝφ_y`.
pub fn apply_r_inverse(field: FieldRef, grid: &GridSpec, quad: &Quadrature) -> Result<FieldRef> {
    let label = format!("R'({})", field.label());
    let flipped: FieldRef = Arc::new(Transposed::new(field));
    let r = apply_r(flipped, &grid.transpose(), &quad.transpose())?;
    Ok(Arc::new(Transposed::labelled(r, label)))
}

// ---------------------------------------------------------------------------
// Nonlocal hierarchy
// ---------------------------------------------------------------------------

/// Potentials `q₁`, `q₂` of the first conservation laws, shared by every
/// nonlocal member built on them.
#[derive(Clone, Debug)]
pub struct ConservationPotentials {
    pub q1: Arc<PotentialGrid>,
    pub q2: Arc<PotentialGrid>,
}

/// `q₁: (½φ_x², −cos φ)` and `q₂: (½φ_xx² − ⅛φ_x⁴, ½φ_x² cos φ)`.
pub fn conservation_potentials(phi: &SGSolution, grid: &GridSpec, quad: &Quadrature) -> Result<ConservationPotentials> {
    let p1 = phi.clone();
    let f1 = FnForm::new("q1", move |x, y, k| {
        let p = phi_jet(&p1, x, y, k + 1)?;
        let u = p.derivative(Axis::X)?;
        Ok((u * u * 0.5, -p.truncate(k).cos()))
    });
    let p2 = phi.clone();
    let f2 = FnForm::new("q2", move |x, y, k| {
        let p = phi_jet(&p2, x, y, k + 2)?;
        let u = p.derivative(Axis::X)?;
        let u1 = u.derivative(Axis::X)?;
        let u = u.truncate(k);
        let usq = u * u;
        Ok((u1 * u1 * 0.5 - usq * usq * 0.125, usq * 0.5 * p.truncate(k).cos()))
    });
    let base = quad.base_on(grid);
    Ok(ConservationPotentials {
        q1: Arc::new(integrate_potential(Arc::new(f1), grid, base, quad.constant(0))?),
        q2: Arc::new(integrate_potential(Arc::new(f2), grid, base, quad.constant(1))?),
    })
}

struct KhorkovaField {
    n: usize,
    phi: SGSolution,
    pots: ConservationPotentials,
}

impl MoutardField for KhorkovaField {
    fn jet(&self, x: f64, y: f64, k: usize) -> Result<Jet2> {
        let xj = Jet2::var_x(x, y, k);
        let q1 = self.pots.q1.jet(x, y, k)?;
        match self.n {
            2 => {
                let p = phi_jet(&self.phi, x, y, k + 2)?;
                Ok(xj * pmkdv_jet(&self.phi, 2, x, y, k)? + q1 * pmkdv_jet(&self.phi, 1, x, y, k)? + p.diff(2, 0) * 2.0)
            }
            3 => {
                let q2 = self.pots.q2.jet(x, y, k)?;
                let u = phi_x_tower(&self.phi, x, y, k, 4)?;
                Ok(xj * pmkdv_jet(&self.phi, 3, x, y, k)? + q1 * pmkdv_jet(&self.phi, 2, x, y, k)?
                    - q2 * u[0] * 3.0
                    + u[3] * 4.0
                    + u[0] * u[0] * u[1] * 7.0)
            }
            _ => unreachable!("constructed only for n = 2, 3"),
        }
    }
    fn solution(&self) -> &SGSolution {
        &self.phi
    }
    fn label(&self) -> String {
        format!("khorkova:{}", self.n)
    }
    fn provenance(&self) -> Provenance {
        let mut constants = vec![self.pots.q1.constant()];
        if self.n == 3 {
            constants.push(self.pots.q2.constant());
        }
        Provenance::Quadrature { base: self.pots.q1.base_point(), constants }
    }
    fn potentials(&self) -> Vec<Arc<PotentialGrid>> {
        if self.n == 3 {
            vec![self.pots.q1.clone(), self.pots.q2.clone()]
        } else {
            vec![self.pots.q1.clone()]
        }
    }
}

/// Positive nonlocal member built on given conservation potentials.
pub fn khorkova_with(phi: &SGSolution, n: usize, pots: &ConservationPotentials) -> Result<FieldRef> {
    match n {
        1 => {
            let f = scaling_shadow(phi);
            Ok(Arc::new(ClosedField::new("khorkova:1", phi, move |_, x, y, k| f.jet(x, y, k))))
        }
        2 | 3 => Ok(Arc::new(KhorkovaField { n, phi: phi.clone(), pots: pots.clone() })),
        _ => Err(VossError::Unsupported(format!("khorkova member {n}"))),
    }
}

/// Member `n ∈ {±1, ±2, ±3}` of the nonlocal hierarchy:
///
/// ```text
/// Φ̄₁ = xφ_x − yφ_y
/// Φ̄₂ = xΦ₂ + q₁Φ₁ + 2φ_xx
/// Φ̄₃ = xΦ₃ + q₁Φ₂ − 3q₂Φ₁ + 4φ_xxxx + 7φ_x²φ_xx
/// ```
///
/// Negative members exchange `x` and `y`. `quad.constants` are `q₁(base)`
/// and `q₂(base)`.
pub fn khorkova_member(phi: &SGSolution, grid: &GridSpec, n: i32, quad: &Quadrature) -> Result<FieldRef> {
    if n == 0 || n.abs() > 3 {
        return Err(VossError::Unsupported(format!("khorkova member {n}; supported: ±1, ±2, ±3")));
    }
    if n > 0 {
        if n == 1 {
            return khorkova_with(phi, 1, &conservation_placeholder(phi, grid, quad)?);
        }
        let pots = conservation_potentials(phi, grid, quad)?;
        return khorkova_with(phi, n as usize, &pots);
    }
    let inner = khorkova_member(&phi.transposed(), &grid.transpose(), -n, &quad.transpose())?;
    Ok(Arc::new(Transposed::labelled(inner, format!("khorkova:{n}"))))
}

fn conservation_placeholder(phi: &SGSolution, grid: &GridSpec, quad: &Quadrature) -> Result<ConservationPotentials> {
    // The first member is local; a one-node grid keeps the call cheap.
    let base = quad.base_on(grid);
    let tiny = GridSpec::new(base.0, base.1, grid.dx, grid.dy, 1, 1)?;
    conservation_potentials(phi, &tiny, &Quadrature { base: Some(base), constants: quad.constants.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_kink, make_three_soliton, make_two_soliton, pseudosphere};

    fn grid() -> GridSpec {
        GridSpec::spanning(-1.0, 1.0, -0.9, 1.1, 41, 41).unwrap()
    }

    #[test]
    fn hermite_weights_match_known_rules() {
        let w = hermite_weights(3);
        let expect = [0.5, 3.0 / 28.0, 1.0 / 84.0, 1.0 / 1680.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-16);
        }
        let w = hermite_weights(4);
        assert!((w[4] - 1.0 / 30240.0).abs() < 1e-18);
    }

    #[test]
    fn translation_values_and_residuals() {
        let k = make_kink(0.0);
        let f = translation_symmetry(&k, Axis::X);
        assert!((f.value(0.0, 0.0).unwrap() - 2.0).abs() < 1e-14);
        let h = 1e-5;
        let fd = (k.jet(h, 0.0, 0).unwrap().value() - k.jet(-h, 0.0, 0).unwrap().value()) / (2.0 * h);
        assert!((f.value(0.0, 0.0).unwrap() - fd).abs() < 1e-8);
        let t = make_two_soliton();
        let s = LinearCombination::new(vec![(1.0, translation_symmetry(&t, Axis::X)), (1.0, translation_symmetry(&t, Axis::Y))]).unwrap();
        for tt in [0.3, 0.8, 1.7] {
            assert!((s.value(tt, tt).unwrap() - s.value(-tt, -tt).unwrap()).abs() < 1e-12);
        }
        for (x, y) in [(0.3, -0.7), (1.2, 0.4), (-0.5, -0.1)] {
            for phi in [k.clone(), t.clone(), make_three_soliton()] {
                for a in [Axis::X, Axis::Y] {
                    assert!(moutard_residual(&*translation_symmetry(&phi, a), x, y).unwrap() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn scaling_shadow_on_pseudosphere() {
        let k = make_kink(0.0);
        let f = scaling_shadow(&k);
        assert_eq!(f.value(0.0, 0.0).unwrap(), 0.0);
        for (x, y) in [(0.3f64, -0.7f64), (1.2, 0.4), (-0.5, -0.1)] {
            let half = -0.5 * f.value(x, y).unwrap();
            assert!((half + (x - y) / (x + y).cosh()).abs() < 1e-10);
            assert!(moutard_residual(&*scaling_shadow(&make_two_soliton()), x, y).unwrap() < 1e-10);
        }
    }

    #[test]
    fn normal_component_at_origin() {
        let s: Arc<dyn Surface> = Arc::new(pseudosphere());
        let f = normal_component(s.clone(), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((f.value(0.0, 0.0).unwrap() + 1.0).abs() < 1e-15);
        let g = normal_component(s, Vector3::new(0.3, -1.0, 0.4)).unwrap();
        for (x, y) in [(0.3, 0.7), (1.2, 0.4), (-0.5, -0.1)] {
            assert!(moutard_residual(&*g, x, y).unwrap() < 1e-9);
        }
    }

    #[test]
    fn pmkdv_members() {
        let t = make_two_soliton();
        let (x, y) = (0.4, -0.3);
        let p = t.jet(x, y, 4).unwrap();
        let want = p.partial(3, 0) + 0.5 * p.partial(1, 0).powi(3);
        assert!((pmkdv_member(&t, 2).unwrap().value(x, y).unwrap() - want).abs() < 1e-12);
        assert!((pmkdv_member(&t, -1).unwrap().value(x, y).unwrap() - p.partial(0, 1)).abs() < 1e-14);
        let k = make_kink(0.0);
        for (x, y) in [(0.3, 0.2), (-1.0, 0.4), (0.9, 0.9)] {
            let a = pmkdv_member(&k, 3).unwrap().value(x, y).unwrap();
            let b = pmkdv_member(&k, 1).unwrap().value(x, y).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(pmkdv_member(&k, 4), Err(VossError::Unsupported(_))));
        for phi in [k, t, make_three_soliton()] {
            for n in [-3, -2, -1, 1, 2, 3] {
                let f = pmkdv_member(&phi, n).unwrap();
                for (x, y) in [(0.3, -0.6), (1.1, 0.2)] {
                    assert!(moutard_residual(&*f, x, y).unwrap() < 1e-10, "{} n={n}", phi.id());
                }
            }
            for (x, y) in [(0.3, -0.6), (1.1, 0.2)] {
                let r4 = moutard_residual(&*pmkdv_fourth(&phi), x, y).unwrap(); assert!(r4 < 1e-8, "{} {r4}", phi.id());
            }
        }
    }

    #[test]
    fn potential_of_zero_form_is_constant() {
        let f = Arc::new(FnForm::new("zero", |x, y, k| Ok((Jet2::constant(0.0, (x, y), k), Jet2::constant(0.0, (x, y), k)))));
        let p = integrate_potential(f, &grid(), (-1.0, -0.9), 2.5).unwrap();
        assert!(p.values().iter().all(|&v| v == 2.5));
        assert_eq!(p.value(0.123, 0.456).unwrap(), 2.5);
    }

    #[test]
    fn non_closed_form_is_rejected() {
        let f = Arc::new(FnForm::new("bad", |x, y, k| Ok((Jet2::var_y(x, y, k), Jet2::constant(0.0, (x, y), k)))));
        assert!(matches!(integrate_potential(f, &grid(), (-1.0, -0.9), 0.0), Err(VossError::NotClosed { .. })));
    }

    #[test]
    fn recursion_potential_for_travelling_wave() {
        let g = 0.5f64;
        let k = make_kink(g);
        let m = (-2.0 * g).exp();
        let gr = grid();
        let f = translation_symmetry(&k, Axis::X);
        let form: Arc<dyn OneForm> = Arc::new(recursion_form(f));
        let base = (gr.x0, gr.y0);
        let c0 = -k.jet(base.0, base.1, 0).unwrap().value().cos() / m;
        let q = integrate_potential(form, &gr, base, c0).unwrap();
        assert!(q.path_discrepancy < 1e-10);
        for (idx, (x, y)) in gr.points().into_iter().enumerate() {
            let want = -k.jet(x, y, 0).unwrap().value().cos() / m;
            assert!((q.values()[idx] - want).abs() < 1e-9);
        }
        let off = q.value(0.0137, -0.2911).unwrap();
        let want = -k.jet(0.0137, -0.2911, 0).unwrap().value().cos() / m;
        assert!((off - want).abs() < 1e-9);
    }

    #[test]
    fn r_maps_first_member_to_second() {
        let t = make_two_soliton();
        let gr = grid();
        let base = (gr.x0, gr.y0);
        let u = t.jet(base.0, base.1, 1).unwrap().dx();
        let r = apply_r(translation_symmetry(&t, Axis::X), &gr, &Quadrature::with_constants(vec![0.5 * u * u])).unwrap();
        let p2 = pmkdv_member(&t, 2).unwrap();
        for (x, y) in gr.points().into_iter().step_by(37) {
            assert!((r.value(x, y).unwrap() - p2.value(x, y).unwrap()).abs() < 1e-7);
            assert!(moutard_residual(&*r, x, y).unwrap() < 1e-7);
        }
    }

    #[test]
    fn r_of_zero_is_the_ideal() {
        let k = make_kink(0.0);
        let gr = GridSpec::spanning(0.1, 1.0, 0.1, 1.0, 10, 10).unwrap();
        let r = apply_r(zero_field(&k), &gr, &Quadrature::with_constants(vec![1.5])).unwrap();
        let px = translation_symmetry(&k, Axis::X);
        for (x, y) in gr.points() {
            assert!((r.value(x, y).unwrap() - 1.5 * px.value(x, y).unwrap()).abs() < 1e-14);
        }
        let ri = apply_r_inverse(zero_field(&k), &gr, &Quadrature::with_constants(vec![-2.0])).unwrap();
        let py = translation_symmetry(&k, Axis::Y);
        for (x, y) in gr.points() {
            assert!((ri.value(x, y).unwrap() + 2.0 * py.value(x, y).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn r_ideal_quotient() {
        let t = make_two_soliton();
        let gr = GridSpec::spanning(0.2, 1.2, -0.5, 0.5, 21, 21).unwrap();
        let f = scaling_shadow(&t);
        let a = apply_r(f.clone(), &gr, &Quadrature::with_constants(vec![0.3])).unwrap();
        let b = apply_r(f, &gr, &Quadrature::with_constants(vec![-1.1])).unwrap();
        let px = translation_symmetry(&t, Axis::X);
        for (x, y) in gr.points() {
            let d = a.value(x, y).unwrap() - b.value(x, y).unwrap() - 1.4 * px.value(x, y).unwrap();
            assert!(d.abs() < 1e-12, "{d}");
        }
    }

    #[test]
    fn inverse_of_y_translation_on_pseudosphere() {
        let k = make_kink(0.0);
        let gr = GridSpec::spanning(0.1, 1.1, 0.1, 1.1, 21, 21).unwrap();
        let r = apply_r_inverse(translation_symmetry(&k, Axis::Y), &gr, &Quadrature::default()).unwrap();
        let px = translation_symmetry(&k, Axis::X);
        let ratio = r.value(gr.x0, gr.y0).unwrap() / px.value(gr.x0, gr.y0).unwrap();
        for (x, y) in gr.points() {
            assert!((r.value(x, y).unwrap() - ratio * px.value(x, y).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn nonlocal_members_solve_moutard() {
        for phi in [make_kink(0.3), make_two_soliton(), make_three_soliton()] {
            let gr = GridSpec::spanning(0.1, 1.1, -0.4, 0.6, 21, 21).unwrap();
            for n in [-3, -2, -1, 1, 2, 3] {
                let f = khorkova_member(&phi, &gr, n, &Quadrature::with_constants(vec![0.2, -0.7])).unwrap();
                for (x, y) in gr.points().into_iter().step_by(53) {
                    let r = moutard_residual(&*f, x, y).unwrap();
                    assert!(r < 1e-7, "{} n={n} residual {r}", phi.id());
                }
            }
        }
    }

    #[test]
    fn first_nonlocal_members() {
        let k = make_kink(0.0);
        let gr = grid();
        let a = khorkova_member(&k, &gr, 1, &Quadrature::default()).unwrap();
        let b = khorkova_member(&k, &gr, -1, &Quadrature::default()).unwrap();
        for (x, y) in [(0.2, 0.4), (-0.6, 0.9)] {
            let want = x * k.jet(x, y, 1).unwrap().dx() - y * k.jet(x, y, 1).unwrap().dy();
            assert!((a.value(x, y).unwrap() - want).abs() < 1e-14);
            assert!((b.value(x, y).unwrap() + want).abs() < 1e-14);
        }
    }

    #[test]
    fn kink_relation_between_nonlocal_members() {
        for g in [-1.0f64, 0.0, 0.5] {
            let k = make_kink(g);
            let a = g.exp();
            let gr = GridSpec::spanning(-1.0, 1.0, -0.9, 1.1, 41, 41).unwrap();
            let (xb, yb) = (gr.x0, gr.y0);
            let w = a * xb + yb / a;
            // q₁ = 2a tanh w − y + a makes the difference a pure multiple of sech w.
            let c1 = 2.0 * a * w.tanh() - yb + a;
            let quad = Quadrature::with_constants(vec![c1]);
            let f2 = khorkova_member(&k, &gr, 2, &quad).unwrap();
            let f1 = khorkova_member(&k, &gr, 1, &quad).unwrap();
            for (x, y) in gr.points().into_iter().step_by(29) {
                let w = a * x + y / a;
                let d = f2.value(x, y).unwrap() - a * a * f1.value(x, y).unwrap();
                assert!((d - 2.0 * a * a / w.cosh()).abs() < 1e-6, "gamma={g}: {d}");
            }
        }
    }

    #[test]
    fn right_inverse_composition_on_two_soliton() {
        let t = make_two_soliton();
        let gr = GridSpec::spanning(0.2, 1.2, -0.5, 0.5, 31, 31).unwrap();
        let f = scaling_shadow(&t);
        let rf = apply_r(f.clone(), &gr, &Quadrature::default()).unwrap();
        let back = apply_r_inverse(rf, &gr, &Quadrature::default()).unwrap();
        let py = translation_symmetry(&t, Axis::Y);
        let (xb, yb) = (0.7, 0.1);
        let c = (back.value(xb, yb).unwrap() - f.value(xb, yb).unwrap()) / py.value(xb, yb).unwrap();
        for (x, y) in gr.points().into_iter().step_by(7) {
            let d = back.value(x, y).unwrap() - f.value(x, y).unwrap() - c * py.value(x, y).unwrap();
            assert!(d.abs() < 1e-6, "{d}");
        }
    }
}
