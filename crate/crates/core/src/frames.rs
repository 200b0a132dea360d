//! Moving frames of pseudospherical surfaces.
//!
//! In asymptotic Chebyshev coordinates the frame `(r, r_x, r_y, n)` obeys
//!
//! ```text
//! r_xx = (φ_x / tan φ) r_x − (φ_x / sin φ) r_y      n_x = r_x / tan φ − r_y / sin φ
//! r_xy = sin φ n                                   n_y = r_y / tan φ − r_x / sin φ
//! r_yy = −(φ_y / sin φ) r_x + (φ_y / tan φ) r_y
//! ```
//!
//! This module expands frames as jets from these relations and integrates
//! them along grid lines when no closed form is available.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{vec_value, SGSolution, EPS_CHART};
use crate::error::{Result, VossError};
use crate::grid::GridSpec;
use crate::jets::{dot3, Axis, Jet2, ScalarField};

/// Position, asymptotic tangents and unit normal at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub r: Vector3<f64>,
    pub rx: Vector3<f64>,
    pub ry: Vector3<f64>,
    pub n: Vector3<f64>,
}

/// Jets of position (one order higher) and normal at a point.
#[derive(Clone, Copy, Debug)]
pub struct FrameJet {
    pub r: [Jet2; 3],
    pub n: [Jet2; 3],
}

impl FrameJet {
    pub fn frame(&self) -> Frame {
        let d = |axis| {
            let v: Vec<f64> = self.r.iter().map(|c| c.derivative(axis).map(|j| j.value()).unwrap_or(f64::NAN)).collect();
            Vector3::new(v[0], v[1], v[2])
        };
        Frame { r: vec_value(&self.r), rx: d(Axis::X), ry: d(Axis::Y), n: vec_value(&self.n) }
    }

    /// Jets of `r_x` and `r_y`, of the same order as the normal jets.
    pub fn tangents(&self) -> ([Jet2; 3], [Jet2; 3]) {
        let dx = self.r.map(|c| c.derivative(Axis::X).expect("position jet has order >= 1"));
        let dy = self.r.map(|c| c.derivative(Axis::Y).expect("position jet has order >= 1"));
        (dx, dy)
    }

    pub fn order(&self) -> usize {
        self.n[0].order()
    }
}

/// A pseudospherical surface in asymptotic Chebyshev coordinates.
pub trait Surface: Send + Sync {
    fn solution(&self) -> &SGSolution;

    fn id(&self) -> String;

    /// Frame jets with normal jets of order `order` and position jets of
    /// order `order + 1`.
    fn frame_jets(&self, x: f64, y: f64, order: usize) -> Result<FrameJet>;

    fn frame(&self, x: f64, y: f64) -> Result<Frame> {
        Ok(self.frame_jets(x, y, 0)?.frame())
    }
}

/// Largest deviation of each frame invariant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `| |n|² − 1 |`
    pub normal_norm: f64,
    /// `max(|n·r_x|, |n·r_y|)`
    pub tangency: f64,
    /// `max(| |r_x|² − 1 |, | |r_y|² − 1 |)`
    pub unit_tangents: f64,
    /// `|r_x·r_y − cos φ|`
    pub chebyshev: f64,
    /// Largest deviation of `n_x, n_y` from the third form `dx² − 2cos φ dxdy + dy²`.
    pub third_form: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        [self.normal_norm, self.tangency, self.unit_tangents, self.chebyshev, self.third_form]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn merge(&self, o: &ResidualReport) -> ResidualReport {
        ResidualReport {
            normal_norm: self.normal_norm.max(o.normal_norm),
            tangency: self.tangency.max(o.tangency),
            unit_tangents: self.unit_tangents.max(o.unit_tangents),
            chebyshev: self.chebyshev.max(o.chebyshev),
            third_form: self.third_form.max(o.third_form),
        }
    }
}

/// Checks the algebraic frame invariants against the Chebyshev angle.
///
/// The normal derivatives used for the third form are taken from the
/// structure equations, so the check never differentiates numerically.
pub fn verify_frame(f: &Frame, phi_jet: &Jet2) -> ResidualReport {
    let phi = phi_jet.value();
    let (s, c) = phi.sin_cos();
    let nx = f.rx * (c / s) - f.ry / s;
    let ny = f.ry * (c / s) - f.rx / s;
    let third = [(nx.dot(&nx) - 1.0).abs(), (ny.dot(&ny) - 1.0).abs(), (nx.dot(&ny) + c).abs()];
    ResidualReport {
        normal_norm: (f.n.dot(&f.n) - 1.0).abs(),
        tangency: f.n.dot(&f.rx).abs().max(f.n.dot(&f.ry).abs()),
        unit_tangents: (f.rx.dot(&f.rx) - 1.0).abs().max((f.ry.dot(&f.ry) - 1.0).abs()),
        chebyshev: (f.rx.dot(&f.ry) - c).abs(),
        third_form: third.into_iter().fold(0.0, f64::max),
    }
}

/// Largest residual of the structure equations at a point, computed from the
/// surface's own jets.
pub fn gauss_weingarten_residual(s: &dyn Surface, x: f64, y: f64) -> Result<f64> {
    let fj = s.frame_jets(x, y, 1)?;
    let p = s.solution().jet(x, y, 1)?;
    let (phi, px, py) = (p.value(), p.dx(), p.dy());
    let (sn, cs) = phi.sin_cos();
    let part = |c: &Jet2, i, j| c.partial(i, j);
    let vec = |i, j, src: &[Jet2; 3]| Vector3::new(part(&src[0], i, j), part(&src[1], i, j), part(&src[2], i, j));
    let (rx, ry, n) = (vec(1, 0, &fj.r), vec(0, 1, &fj.r), vec(0, 0, &fj.n));
    let eqs = [
        vec(2, 0, &fj.r) - (rx * (px * cs / sn) - ry * (px / sn)),
        vec(1, 1, &fj.r) - n * sn,
        vec(0, 2, &fj.r) - (ry * (py * cs / sn) - rx * (py / sn)),
        vec(1, 0, &fj.n) - (rx * (cs / sn) - ry / sn),
        vec(0, 1, &fj.n) - (ry * (cs / sn) - rx / sn),
    ];
    Ok(eqs.iter().map(|e| e.amax()).fold(0.0, f64::max))
}

/// Gaussian curvature from the first and second fundamental forms.
pub fn gaussian_curvature(s: &dyn Surface, x: f64, y: f64) -> Result<f64> {
    let fj = s.frame_jets(x, y, 1)?;
    let (rx, ry) = fj.tangents();
    let e = dot3(&rx, &rx).value();
    let f = dot3(&rx, &ry).value();
    let g = dot3(&ry, &ry).value();
    let sec = |i, j| {
        let v = Vector3::new(fj.r[0].partial(i, j), fj.r[1].partial(i, j), fj.r[2].partial(i, j));
        v.dot(&vec_value(&fj.n))
    };
    let (l, m, nn) = (sec(2, 0), sec(1, 1), sec(0, 2));
    Ok((l * nn - m * m) / (e * g - f * f))
}

/// Expands a frame into jets using the structure equations.
///
/// `phi` must have order at least `order + 1`.
pub fn gw_frame_jets(f: &Frame, phi: &Jet2, order: usize) -> Result<FrameJet> {
    if phi.order() < order + 1 {
        return Err(VossError::OrderExhausted);
    }
    let base = phi.base();
    let k = order;
    let p = phi.truncate(k + 1);
    let px = p.derivative(Axis::X)?;
    let py = p.derivative(Axis::Y)?;
    let p0 = p.truncate(k);
    let s = p0.sin();
    let inv_s = s.recip();
    let cot = p0.cos() * inv_s;
    let (a1, a2, b1, b2) = (px * cot, px * inv_s, py * inv_s, py * cot);

    let mut r = [Jet2::constant(0.0, base, k + 1); 3];
    let mut n = [Jet2::constant(0.0, base, k); 3];
    for c in 0..3 {
        let mut ta = Jet2::constant(f.rx[c], base, k);
        let mut tb = Jet2::constant(f.ry[c], base, k);
        let mut nn = Jet2::constant(f.n[c], base, k);
        for d in 0..k {
            let ax = a1 * ta - a2 * tb;
            let ay = s * nn;
            let by = b2 * tb - b1 * ta;
            let nx = cot * ta - inv_s * tb;
            let ny = cot * tb - inv_s * ta;
            for b in 0..=d + 1 {
                let a = d + 1 - b;
                if a >= 1 {
                    ta.set_coeff(a, b, ax.coeff(a - 1, b) / a as f64);
                    nn.set_coeff(a, b, nx.coeff(a - 1, b) / a as f64);
                } else {
                    ta.set_coeff(a, b, ay.coeff(0, b - 1) / b as f64);
                    nn.set_coeff(a, b, ny.coeff(0, b - 1) / b as f64);
                }
                if b >= 1 {
                    tb.set_coeff(a, b, by.coeff(a, b - 1) / b as f64);
                } else {
                    tb.set_coeff(a, b, ay.coeff(a - 1, 0) / a as f64);
                }
            }
        }
        r[c] = Jet2::from_gradient(f.r[c], &ta, &tb).checked()?;
        n[c] = nn.checked()?;
    }
    Ok(FrameJet { r, n })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FrameSource {
    ClosedForm(String),
    Integrated,
}

/// Frames sampled on a grid.
#[derive(Clone, Debug)]
pub struct SurfaceGrid {
    pub grid: GridSpec,
    pub frames: Vec<Frame>,
    pub source: FrameSource,
    /// Largest node discrepancy between the two integration orders.
    pub compatibility: f64,
    /// Largest frame-invariant residual over the nodes.
    pub drift: f64,
    phi: SGSolution,
}

type State = [Vector3<f64>; 4];

fn gw_rhs(axis: Axis, s: &State, phi: f64, dphi: f64) -> State {
    let (sn, cs) = phi.sin_cos();
    let (cot, csc) = (cs / sn, 1.0 / sn);
    let [_, rx, ry, n] = *s;
    match axis {
        Axis::X => [rx, rx * (dphi * cot) - ry * (dphi * csc), n * sn, rx * cot - ry * csc],
        Axis::Y => [ry, n * sn, ry * (dphi * cot) - rx * (dphi * csc), ry * cot - rx * csc],
    }
}

fn axpy(s: &State, k: &State, h: f64) -> State {
    [s[0] + k[0] * h, s[1] + k[1] * h, s[2] + k[2] * h, s[3] + k[3] * h]
}

/// Step length cap for the one-step integrator.
const MAX_STEP: f64 = 0.01;

/// Carries a frame from `(x, y)` a signed distance `len` along one axis with
/// the classical fourth-order Runge–Kutta scheme.
fn transport(phi: &SGSolution, start: &State, x: f64, y: f64, axis: Axis, len: f64) -> Result<State> {
    if len == 0.0 {
        return Ok(*start);
    }
    let steps = ((len.abs() / MAX_STEP).ceil() as usize).max(2);
    let h = len / steps as f64;
    let eval = |t: f64| -> Result<(f64, f64)> {
        let (px, py) = match axis {
            Axis::X => (x + t, y),
            Axis::Y => (x, y + t),
        };
        let j = phi.jet(px, py, 1)?;
        let d = match axis {
            Axis::X => j.dx(),
            Axis::Y => j.dy(),
        };
        if j.value().sin().abs() < 1e-12 {
            return Err(VossError::SingularChart { x: px, y: py, sin_phi: j.value().sin() });
        }
        Ok((j.value(), d))
    };
    let mut s = *start;
    let mut t = 0.0;
    let mut cur = eval(0.0)?;
    for k in 0..steps {
        let mid = eval(t + 0.5 * h)?;
        let end = eval((k + 1) as f64 * h)?;
        let k1 = gw_rhs(axis, &s, cur.0, cur.1);
        let k2 = gw_rhs(axis, &axpy(&s, &k1, 0.5 * h), mid.0, mid.1);
        let k3 = gw_rhs(axis, &axpy(&s, &k2, 0.5 * h), mid.0, mid.1);
        let k4 = gw_rhs(axis, &axpy(&s, &k3, h), end.0, end.1);
        for i in 0..4 {
            s[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        t = (k + 1) as f64 * h;
        cur = end;
    }
    Ok(s)
}

fn to_state(f: &Frame) -> State {
    [f.r, f.rx, f.ry, f.n]
}

fn to_frame(s: &State) -> Frame {
    Frame { r: s[0], rx: s[1], ry: s[2], n: s[3] }
}

/// Fails with `SingularChart` at the first node where `|sin φ| < EPS_CHART`.
pub fn check_grid_regular(phi: &SGSolution, grid: &GridSpec) -> Result<()> {
    for (x, y) in grid.points() {
        phi.check_regular(x, y, EPS_CHART)?;
    }
    Ok(())
}

/// Integrates the structure equations over a grid starting from the frame at
/// the grid origin: first along the bottom row, then up every column. The
/// opposite order (first column, then rows) is computed as well and the
/// largest node discrepancy is stored as `compatibility`.
pub fn integrate_gauss_weingarten(phi: &SGSolution, grid: &GridSpec, f0: &Frame) -> Result<SurfaceGrid> {
    grid.validate()?;
    check_grid_regular(phi, grid)?;
    let (nx, ny) = (grid.nx, grid.ny);

    let sweep = |first: Axis| -> Result<Vec<State>> {
        let (n_outer, n_inner, second) = match first {
            Axis::X => (nx, ny, Axis::Y),
            Axis::Y => (ny, nx, Axis::X),
        };
        let step_first = if first == Axis::X { grid.dx } else { grid.dy };
        let step_second = if second == Axis::X { grid.dx } else { grid.dy };
        let at = |a: usize, b: usize| match first {
            Axis::X => grid.point(a, b),
            Axis::Y => grid.point(b, a),
        };
        let mut line = Vec::with_capacity(n_outer);
        line.push(to_state(f0));
        for a in 1..n_outer {
            let (x, y) = at(a - 1, 0);
            let next = transport(phi, &line[a - 1], x, y, first, step_first)?;
            line.push(next);
        }
        let columns: Vec<Result<Vec<State>>> = (0..n_outer)
            .into_par_iter()
            .map(|a| {
                let mut col = Vec::with_capacity(n_inner);
                col.push(line[a]);
                for b in 1..n_inner {
                    let (x, y) = at(a, b - 1);
                    col.push(transport(phi, &col[b - 1], x, y, second, step_second)?);
                }
                Ok(col)
            })
            .collect();
        let mut out = vec![[Vector3::zeros(); 4]; grid.len()];
        for (a, col) in columns.into_iter().enumerate() {
            for (b, s) in col?.into_iter().enumerate() {
                let (i, j) = match first {
                    Axis::X => (a, b),
                    Axis::Y => (b, a),
                };
                out[grid.index(i, j)] = s;
            }
        }
        Ok(out)
    };

    let primary = sweep(Axis::X)?;
    let opposite = sweep(Axis::Y)?;
    let compatibility = primary
        .iter()
        .zip(&opposite)
        .map(|(a, b)| (0..4).map(|i| (a[i] - b[i]).amax()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let frames: Vec<Frame> = primary.iter().map(to_frame).collect();
    let mut drift = 0.0f64;
    for (k, f) in frames.iter().enumerate() {
        let (i, j) = grid.ij(k);
        let (x, y) = grid.point(i, j);
        drift = drift.max(verify_frame(f, &phi.jet(x, y, 0)?).max());
    }
    if !drift.is_finite() || drift > 1e-3 {
        return Err(VossError::DivergedIntegration(format!("frame invariant drift {drift:e}")));
    }
    Ok(SurfaceGrid { grid: *grid, frames, source: FrameSource::Integrated, compatibility, drift, phi: phi.clone() })
}

impl SurfaceGrid {
    /// Samples a surface with known frames on a grid.
    pub fn sample(surface: &dyn Surface, grid: &GridSpec) -> Result<SurfaceGrid> {
        grid.validate()?;
        let phi = surface.solution().clone();
        check_grid_regular(&phi, grid)?;
        let frames: Vec<Frame> = grid
            .points()
            .par_iter()
            .map(|&(x, y)| surface.frame(x, y))
            .collect::<Result<_>>()?;
        let mut drift = 0.0f64;
        for (f, &(x, y)) in frames.iter().zip(&grid.points()) {
            drift = drift.max(verify_frame(f, &phi.jet(x, y, 0)?).max());
        }
        Ok(SurfaceGrid {
            grid: *grid,
            frames,
            source: FrameSource::ClosedForm(surface.id()),
            compatibility: 0.0,
            drift,
            phi,
        })
    }

    pub fn frame_at(&self, i: usize, j: usize) -> &Frame {
        &self.frames[self.grid.index(i, j)]
    }

    /// Frame at an arbitrary point, transported from the nearest node.
    pub fn frame_anywhere(&self, x: f64, y: f64) -> Result<Frame> {
        let (i, j) = self.grid.nearest(x, y);
        let (xi, yj) = self.grid.point(i, j);
        let start = to_state(self.frame_at(i, j));
        let mid = transport(&self.phi, &start, xi, yj, Axis::X, x - xi)?;
        Ok(to_frame(&transport(&self.phi, &mid, x, yj, Axis::Y, y - yj)?))
    }
}

impl Surface for SurfaceGrid {
    fn solution(&self) -> &SGSolution {
        &self.phi
    }

    fn id(&self) -> String {
        match &self.source {
            FrameSource::ClosedForm(name) => format!("{name}@grid"),
            FrameSource::Integrated => format!("integrated:{}", self.phi.id()),
        }
    }

    fn frame_jets(&self, x: f64, y: f64, order: usize) -> Result<FrameJet> {
        let f = match self.grid.node_of(x, y) {
            Some((i, j)) => *self.frame_at(i, j),
            None => self.frame_anywhere(x, y)?,
        };
        gw_frame_jets(&f, &self.phi.jet(x, y, order + 1)?, order)
    }

    fn frame(&self, x: f64, y: f64) -> Result<Frame> {
        match self.grid.node_of(x, y) {
            Some((i, j)) => Ok(*self.frame_at(i, j)),
            None => self.frame_anywhere(x, y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{closed_form_frame, kuen, pseudosphere};

    #[test]
    fn exact_frame_has_tiny_residuals() {
        let s = pseudosphere();
        let f = closed_form_frame(&s, 0.4, 0.3).unwrap();
        let rep = verify_frame(&f, &s.solution().jet(0.4, 0.3, 0).unwrap());
        assert!(rep.max() < 1e-10, "{rep:?}");
    }

    #[test]
    fn scaled_normal_residual() {
        let s = pseudosphere();
        let mut f = closed_form_frame(&s, 0.4, 0.3).unwrap();
        f.n *= 1.01;
        let rep = verify_frame(&f, &s.solution().jet(0.4, 0.3, 0).unwrap());
        assert!((rep.normal_norm - 0.0201).abs() < 1e-12);
    }

    #[test]
    fn jet_recursion_matches_closed_form() {
        for s in [pseudosphere(), kuen()] {
            let (x, y) = (0.9, -0.35);
            let exact = s.frame_jets(x, y, 5).unwrap();
            let f = exact.frame();
            let rec = gw_frame_jets(&f, &s.solution().jet(x, y, 6).unwrap(), 5).unwrap();
            for c in 0..3 {
                for (a, b) in rec.r[c].coeffs().iter().zip(exact.r[c].coeffs()) {
                    assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{} r: {a} vs {b}", s.id());
                }
                for (a, b) in rec.n[c].coeffs().iter().zip(exact.n[c].coeffs()) {
                    assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{} n: {a} vs {b}", s.id());
                }
            }
        }
    }

    #[test]
    fn single_node_grid_returns_start_frame() {
        let s = pseudosphere();
        let f0 = closed_form_frame(&s, 0.3, 0.2).unwrap();
        let g = GridSpec::new(0.3, 0.2, 0.1, 0.1, 1, 1).unwrap();
        let sg = integrate_gauss_weingarten(s.solution(), &g, &f0).unwrap();
        assert_eq!(sg.frames, vec![f0]);
    }

    #[test]
    fn integration_on_one_side_of_the_axis() {
        let s = pseudosphere();
        let g = GridSpec::spanning(0.05, 1.0, 0.05, 1.0, 20, 20).unwrap();
        let f0 = closed_form_frame(&s, g.x0, g.y0).unwrap();
        let sg = integrate_gauss_weingarten(s.solution(), &g, &f0).unwrap();
        assert!(sg.compatibility < 1e-6);
        for (k, f) in sg.frames.iter().enumerate() {
            let (i, j) = g.ij(k);
            let (x, y) = g.point(i, j);
            let e = closed_form_frame(&s, x, y).unwrap();
            assert!((f.r - e.r).amax() < 1e-6);
            assert!((f.n - e.n).amax() < 1e-6);
        }
        let again = integrate_gauss_weingarten(s.solution(), &g, &f0).unwrap();
        assert_eq!(again.frames, sg.frames);
    }

    #[test]
    fn kuen_from_off_axis_start() {
        let s = kuen();
        let g = GridSpec::spanning(1.0, 1.4, 0.0, 0.4, 9, 9).unwrap();
        let f0 = closed_form_frame(&s, 1.0, 0.0).unwrap();
        let sg = integrate_gauss_weingarten(s.solution(), &g, &f0).unwrap();
        let corner = sg.frame_at(8, 8);
        let e = closed_form_frame(&s, 1.4, 0.4).unwrap();
        assert!((corner.r - e.r).amax() < 1e-5);
        assert!(verify_frame(corner, &s.solution().jet(1.4, 0.4, 0).unwrap()).max() < 1e-6);
        let off = sg.frame_anywhere(1.23, 0.17).unwrap();
        let e = closed_form_frame(&s, 1.23, 0.17).unwrap();
        assert!((off.r - e.r).amax() < 1e-8);
    }
}
