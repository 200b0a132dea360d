//! The inverse `(R + Id)⁻¹` of the shifted recursion operator and the nets it
//! produces outside the Guichard sequence.
//!
//! For a Moutard solution `Ψ` put
//!
//! ```text
//! X̃ = (φ_x / sin φ) Ψ_y − Ψ,   Ỹ = (φ_y / tan φ) Ψ_y − Ψ_yy.
//! ```
//!
//! The vector one-form `(X̃ r_y, Ỹ r_x) / sin φ` is closed, its potential `q`
//! is a Voss net, and `Φ = n·q` satisfies `RΦ + Φ = Ψ` modulo `ℝφ_x`.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{vec_value, SGSolution};
use crate::error::{Result, VossError};
use crate::frames::{check_grid_regular, Surface};
use crate::grid::GridSpec;
use crate::jets::{Axis, Jet2};
use crate::symmetries::{
    apply_r, integrate_potential, phi_jet, FieldRef, FnForm, MoutardField, OneForm, PotentialGrid, Provenance,
    Quadrature,
};
use crate::voss::{
    assemble_net, assemble_node, second_derivative_scale, NetKind, NodeInput, ScaledXY, SingularLocus, VossNet,
    DEGENERACY_TOL,
};

/// Jets of `X̃`, `Ỹ` of order `k` from `φ` (order `k + 1`) and `Ψ` (order `k + 2`).
pub fn tilde_jets(phi: &Jet2, psi: &Jet2, k: usize) -> Result<(Jet2, Jet2)> {
    if phi.order() < k + 1 || psi.order() < k + 2 {
        return Err(VossError::OrderExhausted);
    }
    let p = phi.truncate(k + 1);
    let px = p.derivative(Axis::X)?;
    let py = p.derivative(Axis::Y)?;
    let p0 = p.truncate(k);
    let inv = p0.sin().recip();
    let cot = p0.cos() * inv;
    let psi = psi.truncate(k + 2);
    let psi_y = psi.derivative(Axis::Y)?.truncate(k);
    let xt = px * inv * psi_y - psi.truncate(k);
    let yt = py * cot * psi_y - psi.diff(0, 2);
    Ok((xt, yt))
}

/// `(X̃, Ỹ)` at a point.
pub fn tilde_fields(psi: &dyn MoutardField, x: f64, y: f64) -> Result<(f64, f64)> {
    let p = phi_jet(psi.solution(), x, y, 1)?;
    let (a, b) = tilde_jets(&p, &psi.jet(x, y, 2)?, 0)?;
    Ok((a.value(), b.value()))
}

fn check_same_solution(psi: &dyn MoutardField, surface: &dyn Surface) -> Result<()> {
    if psi.solution().id() != surface.solution().id() {
        return Err(VossError::Config(format!(
            "field over {} used with surface over {}",
            psi.solution().id(),
            surface.solution().id()
        )));
    }
    Ok(())
}

/// Component `c` of the one-form `dq = (X̃ r_y dx + Ỹ r_x dy) / sin φ`.
fn q_form(psi: FieldRef, surface: Arc<dyn Surface>, c: usize) -> FnForm {
    let name = format!("q{c}[{}]", psi.label());
    FnForm::new(name, move |x, y, k| {
        let fj = surface.frame_jets(x, y, k)?;
        let (rx, ry) = fj.tangents();
        let p = phi_jet(psi.solution(), x, y, k + 1)?;
        let (xt, yt) = tilde_jets(&p, &psi.jet(x, y, k + 2)?, k)?;
        let inv = p.truncate(k).sin().recip();
        Ok((xt * inv * ry[c].truncate(k), yt * inv * rx[c].truncate(k)))
    })
}

/// Vector potential `q` of the inverse construction, one scalar potential per
/// component.
#[derive(Clone)]
pub struct VectorPotential {
    pub components: [Arc<PotentialGrid>; 3],
}

impl VectorPotential {
    fn integrate(psi: &FieldRef, surface: &Arc<dyn Surface>, grid: &GridSpec, base: (f64, f64), q0: Vector3<f64>) -> Result<Self> {
        let parts: Vec<Arc<PotentialGrid>> = (0..3)
            .map(|c| {
                let form: Arc<dyn OneForm> = Arc::new(q_form(psi.clone(), surface.clone(), c));
                integrate_potential(form, grid, base, q0[c]).map(Arc::new)
            })
            .collect::<Result<_>>()?;
        Ok(VectorPotential { components: [parts[0].clone(), parts[1].clone(), parts[2].clone()] })
    }

    pub fn value(&self, x: f64, y: f64) -> Result<Vector3<f64>> {
        Ok(Vector3::new(
            self.components[0].value(x, y)?,
            self.components[1].value(x, y)?,
            self.components[2].value(x, y)?,
        ))
    }

    pub fn jets(&self, x: f64, y: f64, order: usize) -> Result<[Jet2; 3]> {
        Ok([
            self.components[0].jet(x, y, order)?,
            self.components[1].jet(x, y, order)?,
            self.components[2].jet(x, y, order)?,
        ])
    }

    /// Largest closedness residual over the components.
    pub fn closedness(&self) -> f64 {
        self.components.iter().map(|p| p.closedness).fold(0.0, f64::max)
    }

    /// Largest node difference between the two integration orders.
    pub fn path_discrepancy(&self) -> f64 {
        self.components.iter().map(|p| p.path_discrepancy).fold(0.0, f64::max)
    }
}

/// `Φ = (R + Id)⁻¹Ψ = n·q`.
pub struct InverseField {
    psi: FieldRef,
    surface: Arc<dyn Surface>,
    phi: SGSolution,
    q: VectorPotential,
    label: String,
}

impl InverseField {
    pub fn potential(&self) -> &VectorPotential {
        &self.q
    }

    pub fn source(&self) -> &FieldRef {
        &self.psi
    }
}

impl MoutardField for InverseField {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet2> {
        let n = self.surface.frame_jets(x, y, order)?.n;
        let q = self.q.jets(x, y, order)?;
        Ok(n[0] * q[0] + n[1] * q[1] + n[2] * q[2])
    }
    fn solution(&self) -> &SGSolution {
        &self.phi
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn provenance(&self) -> Provenance {
        Provenance::Quadrature {
            base: self.q.components[0].base_point(),
            constants: self.q.components.iter().map(|p| p.constant()).collect(),
        }
    }
    fn potentials(&self) -> Vec<Arc<PotentialGrid>> {
        let mut v = self.psi.potentials();
        v.extend(self.q.components.iter().cloned());
        v
    }
}

/// Applies `(R + Id)⁻¹` to `Ψ`: integrates `q` from `base` with `q(base) = q0`
/// and returns `n·q`. Different `q0` change the result by `n·c`.
pub fn apply_r_plus_id_inverse(
    psi: FieldRef,
    surface: Arc<dyn Surface>,
    grid: &GridSpec,
    base: (f64, f64),
    q0: Vector3<f64>,
) -> Result<Arc<InverseField>> {
    check_same_solution(&*psi, &*surface)?;
    check_grid_regular(surface.solution(), grid)?;
    let q = VectorPotential::integrate(&psi, &surface, grid, base, q0)?;
    Ok(Arc::new(InverseField {
        label: format!("(R+Id)^-1({})", psi.label()),
        phi: surface.solution().clone(),
        psi,
        surface,
        q,
    }))
}

/// Residual of the second-order system for `Φ = (R + Id)⁻¹Ψ` at a point:
/// the equations for `Φ_xx`, `Φ_xy` and `Φ_yy` relative to their terms.
pub fn inverse_system_residual(f: &dyn MoutardField, psi: &dyn MoutardField, x: f64, y: f64) -> Result<f64> {
    let p = phi_jet(f.solution(), x, y, 1)?;
    let j = f.jet(x, y, 2)?;
    let s = psi.jet(x, y, 2)?;
    let (sn, cs) = p.value().sin_cos();
    let (px, py) = (p.dx(), p.dy());
    let (v, vx, vy) = (j.value(), j.dx(), j.dy());
    let (w, wy, wyy) = (s.value(), s.dy(), s.partial(0, 2));
    let rel = |lhs: f64, terms: &[f64]| {
        let rhs: f64 = terms.iter().sum();
        let scale = terms.iter().fold(lhs.abs(), |m, t| m.max(t.abs())).max(1.0);
        (lhs - rhs).abs() / scale
    };
    let exx = rel(j.partial(2, 0), &[-v, px * cs / sn * vx, px / sn * vy, w, -px / sn * wy]);
    let exy = rel(j.partial(1, 1), &[v * cs]);
    let eyy = rel(j.partial(0, 2), &[-v, py * cs / sn * vy, py / sn * vx, -py * cs / sn * wy, wyy]);
    Ok(exx.max(exy).max(eyy))
}

/// Outcome of checking `(R + Id)Φ = Ψ + C φ_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    /// Least-squares constant `C`.
    pub constant: f64,
    /// `max |(R + Id)Φ − Ψ − C φ_x|` relative to `max |Ψ|`.
    pub residual: f64,
}

/// Applies `R + Id` to `Φ` and fits the remainder against `φ_x`.
pub fn round_trip(phi_field: FieldRef, psi: &dyn MoutardField, grid: &GridSpec, quad: &Quadrature) -> Result<RoundTrip> {
    let r = apply_r(phi_field.clone(), grid, quad)?;
    let sol = psi.solution().clone();
    let rows: Vec<(f64, f64, f64)> = grid
        .points()
        .par_iter()
        .map(|&(x, y)| {
            let d = r.value(x, y)? + phi_field.value(x, y)? - psi.value(x, y)?;
            Ok((d, phi_jet(&sol, x, y, 1)?.dx(), psi.value(x, y)?))
        })
        .collect::<Result<_>>()?;
    let (num, den) = rows.iter().fold((0.0, 0.0), |(a, b), r| (a + r.0 * r.1, b + r.1 * r.1));
    let constant = if den > 0.0 { num / den } else { 0.0 };
    let scale = rows.iter().fold(0.0f64, |m, r| m.max(r.2.abs())).max(f64::MIN_POSITIVE);
    let residual = rows.iter().map(|r| (r.0 - constant * r.1).abs()).fold(0.0, f64::max) / scale;
    Ok(RoundTrip { constant, residual })
}

/// Matrices of the first-order form `W_x = A W + a`, `W_y = B W + b` with
/// `W = (Φ, Φ_x, Φ_y)`.
fn matrix_system(phi: &SGSolution, psi: &dyn MoutardField, x: f64, y: f64, axis: Axis) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    let p = phi_jet(phi, x, y, 1)?;
    let s = psi.jet(x, y, 2)?;
    let (sn, cs) = p.value().sin_cos();
    Ok(match axis {
        Axis::X => {
            let px = p.dx();
            let a = Matrix3::new(0.0, 1.0, 0.0, -1.0, px * cs / sn, px / sn, cs, 0.0, 0.0);
            (a, Vector3::new(0.0, s.value() - px * s.dy() / sn, 0.0))
        }
        Axis::Y => {
            let py = p.dy();
            let b = Matrix3::new(0.0, 0.0, 1.0, cs, 0.0, 0.0, -1.0, py / sn, py * cs / sn);
            (b, Vector3::new(0.0, 0.0, s.partial(0, 2) - py * s.dy() / (sn / cs)))
        }
    })
}

fn rk4_line(
    phi: &SGSolution,
    psi: &dyn MoutardField,
    from: (f64, f64),
    axis: Axis,
    len: f64,
    w0: Vector3<f64>,
) -> Result<Vector3<f64>> {
    let steps = ((len.abs() / 0.01).ceil() as usize).max(1);
    let h = len / steps as f64;
    let at = |t: f64| match axis {
        Axis::X => (from.0 + t, from.1),
        Axis::Y => (from.0, from.1 + t),
    };
    let rhs = |t: f64, w: &Vector3<f64>| -> Result<Vector3<f64>> {
        let (x, y) = at(t);
        let (m, b) = matrix_system(phi, psi, x, y, axis)?;
        Ok(m * w + b)
    };
    let mut w = w0;
    for s in 0..steps {
        let t = s as f64 * h;
        let k1 = rhs(t, &w)?;
        let k2 = rhs(t + 0.5 * h, &(w + k1 * (0.5 * h)))?;
        let k3 = rhs(t + 0.5 * h, &(w + k2 * (0.5 * h)))?;
        let k4 = rhs(t + h, &(w + k3 * h))?;
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(w)
}

/// Independent evaluation of `(Φ, Φ_x, Φ_y)` over the grid by integrating the
/// linear first-order system along the base row and then up each column.
pub fn matrix_form_values(
    psi: &dyn MoutardField,
    grid: &GridSpec,
    base: (f64, f64),
    w0: Vector3<f64>,
) -> Result<Vec<Vector3<f64>>> {
    let phi = psi.solution().clone();
    let (ib, jb) = grid
        .node_of(base.0, base.1)
        .ok_or_else(|| VossError::Config("base point is not a grid node".into()))?;
    let mut row = vec![Vector3::zeros(); grid.nx];
    row[ib] = w0;
    for i in ib + 1..grid.nx {
        row[i] = rk4_line(&phi, psi, grid.point(i - 1, jb), Axis::X, grid.dx, row[i - 1])?;
    }
    for i in (0..ib).rev() {
        row[i] = rk4_line(&phi, psi, grid.point(i + 1, jb), Axis::X, -grid.dx, row[i + 1])?;
    }
    let columns: Vec<Vec<Vector3<f64>>> = (0..grid.nx)
        .into_par_iter()
        .map(|i| {
            let mut col = vec![Vector3::zeros(); grid.ny];
            col[jb] = row[i];
            for j in jb + 1..grid.ny {
                col[j] = rk4_line(&phi, psi, grid.point(i, j - 1), Axis::Y, grid.dy, col[j - 1])?;
            }
            for j in (0..jb).rev() {
                col[j] = rk4_line(&phi, psi, grid.point(i, j + 1), Axis::Y, -grid.dy, col[j + 1])?;
            }
            Ok(col)
        })
        .collect::<Result<_>>()?;
    Ok(grid.points().iter().enumerate().map(|(k, _)| {
        let (i, j) = grid.ij(k);
        columns[i][j]
    }).collect())
}

/// Largest difference between `(Φ, Φ_x, Φ_y)` of the quadrature result and
/// the matrix-form integration started from the same base values, relative
/// to the magnitude of the former.
pub fn matrix_form_discrepancy(inv: &InverseField, grid: &GridSpec) -> Result<f64> {
    let base = inv.q.components[0].base_point();
    let j0 = inv.jet(base.0, base.1, 1)?;
    let w = matrix_form_values(&*inv.psi, grid, base, Vector3::new(j0.value(), j0.dx(), j0.dy()))?;
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    for (k, (x, y)) in grid.points().into_iter().enumerate() {
        let j = inv.jet(x, y, 1)?;
        let v = Vector3::new(j.value(), j.dx(), j.dy());
        scale = scale.max(v.amax());
        worst = worst.max((v - w[k]).amax());
    }
    Ok(worst / scale.max(1.0))
}

struct TildeSource {
    psi: FieldRef,
}

impl ScaledXY for TildeSource {
    fn scaled_xy(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        let s = self.psi.jet(x, y, 2)?;
        let p = phi_jet(self.psi.solution(), x, y, 1)?;
        let (sn, cs) = p.value().sin_cos();
        Ok((p.dx() * s.dy() - s.value() * sn, p.dy() * cs * s.dy() - s.partial(0, 2) * sn, sn))
    }
}

/// Builds the net `r̃` with `r̃_x = (X̃ / sin φ) r_y`, `r̃_y = (Ỹ / sin φ) r_x`
/// and `r̃(base) = anchor`.
pub fn build_tilde_net(
    psi: FieldRef,
    surface: Arc<dyn Surface>,
    grid: &GridSpec,
    base: (f64, f64),
    anchor: Vector3<f64>,
) -> Result<VossNet> {
    let cert = tilde_degeneracy_test(&*psi, grid)?;
    if cert.degenerate {
        return Err(VossError::DegenerateNet(format!(
            "Ψ = {:e} φ_x up to relative deviation {:e}",
            cert.ratio, cert.deviation
        )));
    }
    let inv = apply_r_plus_id_inverse(psi.clone(), surface.clone(), grid, base, anchor)?;
    let phi = surface.solution().clone();
    let nodes = grid
        .points()
        .par_iter()
        .map(|&(x, y)| {
            let fj = surface.frame_jets(x, y, 0)?;
            let (rx, ry) = fj.tangents();
            let p = phi_jet(&phi, x, y, 2)?;
            let (xt, yt) = tilde_jets(&p, &psi.jet(x, y, 3)?, 1)?;
            let q = inv.q.jets(x, y, 2)?;
            let n = vec_value(&fj.n);
            let support = inv.value(x, y)?;
            Ok(assemble_node(
                NetKind::Tilde,
                NodeInput { q, n, rx: vec_value(&rx), ry: vec_value(&ry), x: xt, y: yt, phi: p, support },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let source: Arc<dyn ScaledXY> = Arc::new(TildeSource { psi: psi.clone() });
    assemble_net(NetKind::Tilde, format!("tilde({})", psi.label()), grid, nodes, source)
}

/// Outcome of the degeneracy test for the inverse construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TildeCertificate {
    /// `max(|X̃| + |Ỹ|)` over the grid.
    pub max_xy: f64,
    pub scale: f64,
    /// Least-squares ratio `Ψ / φ_x`.
    pub ratio: f64,
    /// `max |Ψ − ratio·φ_x| / max |Ψ|`.
    pub deviation: f64,
    pub degenerate: bool,
}

/// The net of `Ψ` collapses to a point exactly when `Ψ` is a constant
/// multiple of `φ_x`.
pub fn tilde_degeneracy_test(psi: &dyn MoutardField, grid: &GridSpec) -> Result<TildeCertificate> {
    let phi = psi.solution().clone();
    check_grid_regular(&phi, grid)?;
    let rows: Vec<(f64, f64, f64)> = grid
        .points()
        .par_iter()
        .map(|&(x, y)| {
            let p = phi_jet(&phi, x, y, 1)?;
            let s = psi.jet(x, y, 2)?;
            let (a, b) = tilde_jets(&p, &s, 0)?;
            Ok((s.value(), p.dx(), a.value().abs() + b.value().abs()))
        })
        .collect::<Result<_>>()?;
    let (num, den) = rows.iter().fold((0.0, 0.0), |(a, b), r| (a + r.0 * r.1, b + r.1 * r.1));
    let ratio = if den > 0.0 { num / den } else { 0.0 };
    let size = rows.iter().fold(0.0f64, |m, r| m.max(r.0.abs()));
    let dev = rows.iter().map(|r| (r.0 - ratio * r.1).abs()).fold(0.0, f64::max);
    let deviation = if size > 0.0 { dev / size } else { 0.0 };
    let max_xy = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let scale = second_derivative_scale(psi, grid)?.max(size);
    Ok(TildeCertificate { max_xy, scale, ratio, deviation, degenerate: deviation < DEGENERACY_TOL })
}

/// `|tanh(x + y)| − |tan(x − y)|`: zero on the ridges of the arch net.
pub fn radioid_residual(x: f64, y: f64) -> f64 {
    (x + y).tanh().abs() - (x - y).tan().abs()
}

/// Ridge curves of the arch net over the pseudosphere, with the largest
/// radioid residual along them.
pub fn voss_arch_singular_locus(net: &VossNet) -> (SingularLocus, f64) {
    let ridges: Vec<_> = net.singular.ridges().cloned().collect();
    let worst = ridges
        .iter()
        .flat_map(|p| p.points.iter())
        .map(|&(x, y)| radioid_residual(x, y).abs())
        .fold(0.0, f64::max);
    (SingularLocus { polylines: ridges, intersections: net.singular.intersections.clone() }, worst)
}

/// Net nodes on the diagonal `y = x`, ordered by `x`.
pub fn spinal_curve(net: &VossNet) -> Vec<(f64, Vector3<f64>)> {
    let g = &net.grid;
    let tol = 1e-9 * g.dx.min(g.dy);
    let mut out: Vec<(f64, Vector3<f64>)> = g
        .points()
        .into_iter()
        .enumerate()
        .filter(|(_, (x, y))| (x - y).abs() <= tol)
        .map(|(k, (x, _))| (x, net.q[k]))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Least-squares fit of `z = z₀ + a cosh((s − s₀) / a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatenaryFit {
    pub a: f64,
    pub s0: f64,
    pub z0: f64,
    /// Largest absolute residual of the fit.
    pub residual: f64,
    /// Largest distance of the points from their best-fit vertical plane.
    pub planarity: f64,
}

fn catenary_residuals(p: &[f64; 3], pts: &[(f64, f64)]) -> Vec<f64> {
    pts.iter().map(|&(s, z)| p[2] + p[0] * ((s - p[1]) / p[0]).cosh() - z).collect()
}

/// Fits a catenary with vertical axis `e_z` to a space curve: the curve is
/// projected onto its principal horizontal direction and the fit is done by
/// Levenberg–Marquardt.
pub fn fit_catenary(points: &[Vector3<f64>]) -> Result<CatenaryFit> {
    if points.len() < 4 {
        return Err(VossError::Domain("catenary fit needs at least four points".into()));
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.x - cx, p.y - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (dir, nrm) = ((angle.cos(), angle.sin()), (-angle.sin(), angle.cos()));
    let pts: Vec<(f64, f64)> = points.iter().map(|p| ((p.x - cx) * dir.0 + (p.y - cy) * dir.1, p.z)).collect();
    let planarity = points
        .iter()
        .map(|p| ((p.x - cx) * nrm.0 + (p.y - cy) * nrm.1).abs())
        .fold(0.0, f64::max);

    // Starting point from a quadratic fit z ≈ α + βs + γs².
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(s, z) in &pts {
        let row = Vector3::new(1.0, s, s * s);
        ata += row * row.transpose();
        atb += row * z;
    }
    let c = ata.lu().solve(&atb).ok_or_else(|| VossError::Domain("degenerate catenary data".into()))?;
    if !(c[2].abs() > 0.0) {
        return Err(VossError::Domain("points are collinear".into()));
    }
    let a0 = 1.0 / (2.0 * c[2]);
    let s0 = -c[1] / (2.0 * c[2]);
    let zmin = c[0] - c[1] * c[1] / (4.0 * c[2]);
    let mut p = [a0, s0, zmin - a0];
    let cost = |p: &[f64; 3]| catenary_residuals(p, &pts).iter().map(|r| r * r).sum::<f64>();
    let mut lambda = 1e-3;
    let mut current = cost(&p);
    for _ in 0..200 {
        let r = catenary_residuals(&p, &pts);
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (k, &(s, _)) in pts.iter().enumerate() {
            let t = (s - p[1]) / p[0];
            let row = Vector3::new(t.cosh() - t * t.sinh(), -t.sinh(), 1.0);
            jtj += row * row.transpose();
            jtr += row * r[k];
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut m = jtj;
            for d in 0..3 {
                m[(d, d)] *= 1.0 + lambda;
            }
            let Some(step) = m.lu().solve(&(-jtr)) else { break };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let tc = cost(&trial);
            if tc.is_finite() && tc < current {
                p = trial;
                lambda = (lambda * 0.3).max(1e-12);
                improved = tc < current * (1.0 - 1e-15);
                current = tc;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let residual = catenary_residuals(&p, &pts).iter().map(|r| r.abs()).fold(0.0, f64::max);
    Ok(CatenaryFit { a: p[0], s0: p[1], z0: p[2], residual, planarity })
}
