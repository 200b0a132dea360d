//! Voss nets with a prescribed support function.
//!
//! Given a frame `(r, n)` of a pseudospherical surface and a solution `Φ` of
//! the Moutard equation, the net
//!
//! ```text
//! q = Φ n − (Φ_y r_x + Φ_x r_y) / sin φ
//! ```
//!
//! has `q·n = Φ`, tangents `q_x = −(X / sin φ) r_y`, `q_y = −(Y / sin φ) r_x`
//! and fundamental forms
//!
//! ```text
//! I  = (X² dx² + 2XY cos φ dx dy + Y² dy²) / sin² φ
//! II = −X dx² − Y dy²
//! ```
//!
//! with `X = Φ_xx + Φ − (Φ_x / tan φ + Φ_y / sin φ) φ_x` and `Y` obtained by
//! exchanging `x` and `y`. The net is singular where `XY = 0` or where the
//! chart itself breaks down, and collapses to a point when `X ≡ Y ≡ 0`.

use std::sync::Arc;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::vec_value;
use crate::contour::{segment_intersection, zero_contours};
use crate::error::{Result, VossError};
use crate::frames::{check_grid_regular, Surface};
use crate::grid::GridSpec;
use crate::jets::{Axis, Jet2, ScalarField};
use crate::symmetries::{FieldRef, MoutardField};

/// Relative threshold below which `X` and `Y` count as identically zero.
pub const DEGENERACY_TOL: f64 = 1e-6;

/// Jets of `X` and `Y` of order `k` from `φ` (order `k + 1`) and `Φ` (order `k + 2`).
pub fn xy_jets(phi: &Jet2, f: &Jet2, k: usize) -> Result<(Jet2, Jet2)> {
    if phi.order() < k + 1 || f.order() < k + 2 {
        return Err(VossError::OrderExhausted);
    }
    let p = phi.truncate(k + 1);
    let px = p.derivative(Axis::X)?;
    let py = p.derivative(Axis::Y)?;
    let p0 = p.truncate(k);
    let inv = p0.sin().recip();
    let cot = p0.cos() * inv;
    let f = f.truncate(k + 2);
    let fx = f.derivative(Axis::X)?.truncate(k);
    let fy = f.derivative(Axis::Y)?.truncate(k);
    let f0 = f.truncate(k);
    let x = f.diff(2, 0) + f0 - (fx * cot + fy * inv) * px;
    let y = f.diff(0, 2) + f0 - (fy * cot + fx * inv) * py;
    Ok((x, y))
}

/// Continuous access to `(X sin φ, Y sin φ, sin φ)` at any point, used to
/// refine contour crossings.
pub trait ScaledXY: Send + Sync {
    fn scaled_xy(&self, x: f64, y: f64) -> Result<(f64, f64, f64)>;
}

struct GuichardSource {
    field: FieldRef,
}

impl ScaledXY for GuichardSource {
    fn scaled_xy(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        let f = self.field.jet(x, y, 2)?;
        let p = self.field.solution().jet(x, y, 1)?;
        let (s, c) = p.value().sin_cos();
        let (fx, fy) = (f.partial(1, 0), f.partial(0, 1));
        let xs = s * (f.partial(2, 0) + f.value()) - (fx * c + fy) * p.dx();
        let ys = s * (f.partial(0, 2) + f.value()) - (fy * c + fx) * p.dy();
        Ok((xs, ys, s))
    }
}

/// Sampled `X`, `Y` and the residual of their coupled first-order system
/// `X_y + (φ_x / sin φ) Y = 0`, `Y_x + (φ_y / sin φ) X = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XYFields {
    pub grid: GridSpec,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Largest relative residual of the coupled system over the nodes.
    pub system_residual: f64,
}

impl XYFields {
    /// `max(|X| + |Y|)` over the nodes.
    pub fn max_abs_sum(&self) -> f64 {
        self.x.iter().zip(&self.y).map(|(a, b)| a.abs() + b.abs()).fold(0.0, f64::max)
    }
}

fn system_residual(x: &Jet2, y: &Jet2, phi: &Jet2) -> f64 {
    let s = phi.value().sin();
    let a = phi.dx() / s * y.value();
    let b = phi.dy() / s * x.value();
    let r1 = (x.dy() + a).abs() / x.dy().abs().max(a.abs()).max(1.0);
    let r2 = (y.dx() + b).abs() / y.dx().abs().max(b.abs()).max(1.0);
    r1.max(r2)
}

/// `X` and `Y` of a Moutard solution over a grid.
pub fn xy_fields(field: &dyn MoutardField, grid: &GridSpec) -> Result<XYFields> {
    let phi = field.solution();
    check_grid_regular(phi, grid)?;
    let rows: Vec<(f64, f64, f64)> = grid
        .points()
        .par_iter()
        .map(|&(x, y)| {
            let p = phi.jet(x, y, 2)?;
            let f = field.jet(x, y, 3)?;
            let (xj, yj) = xy_jets(&p, &f, 1)?;
            Ok((xj.value(), yj.value(), system_residual(&xj, &yj, &p)))
        })
        .collect::<Result<_>>()?;
    Ok(XYFields {
        grid: *grid,
        x: rows.iter().map(|r| r.0).collect(),
        y: rows.iter().map(|r| r.1).collect(),
        system_residual: rows.iter().map(|r| r.2).fold(0.0, f64::max),
    })
}

/// Which construction produced a net.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetKind {
    /// Support function `Φ`: `q_x = −(X / sin φ) r_y`.
    Guichard,
    /// Net of the inverse operator: `r̃_x = (X̃ / sin φ) r_y`.
    Tilde,
}

impl NetKind {
    /// Sign in `q_x = σ (X / sin φ) r_y`.
    pub fn sigma(self) -> f64 {
        match self {
            NetKind::Guichard => -1.0,
            NetKind::Tilde => 1.0,
        }
    }
}

/// Largest residual of each net invariant over the nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetDiagnostics {
    /// `|q_xy · n| / max(1, |q_xy|)`: the second form has no mixed term.
    pub conjugacy: f64,
    /// `|(q_x × q_xx)·n| / (|q_x| |q_xx|)` and the same for `y`: coordinate
    /// lines are geodesics.
    pub geodesic: f64,
    /// `|q·n − Φ| / max(1, |q|)`.
    pub support: f64,
    /// Relative residual of the coupled system for `X`, `Y`.
    pub xy_system: f64,
    /// Relative deviation of `q_x`, `q_y` from `σ (X/sin φ) r_y`, `σ (Y/sin φ) r_x`.
    pub tangency: f64,
}

impl NetDiagnostics {
    fn merge(self, o: NetDiagnostics) -> NetDiagnostics {
        NetDiagnostics {
            conjugacy: self.conjugacy.max(o.conjugacy),
            geodesic: self.geodesic.max(o.geodesic),
            support: self.support.max(o.support),
            xy_system: self.xy_system.max(o.xy_system),
            tangency: self.tangency.max(o.tangency),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocusTag {
    /// `X = 0`: the `y`-lines of the net have a cuspidal edge.
    RidgeX,
    /// `Y = 0`.
    RidgeY,
    /// `sin φ = 0`: the metric blows up.
    BlowUp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub tag: LocusTag,
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// Singular curves of a net in the parameter plane.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SingularLocus {
    pub polylines: Vec<Polyline>,
    /// Points where curves of different tags cross.
    pub intersections: Vec<(f64, f64)>,
}

impl SingularLocus {
    pub fn ridges(&self) -> impl Iterator<Item = &Polyline> {
        self.polylines.iter().filter(|p| p.tag != LocusTag::BlowUp)
    }

    pub fn blowups(&self) -> impl Iterator<Item = &Polyline> {
        self.polylines.iter().filter(|p| p.tag == LocusTag::BlowUp)
    }

    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }
}

/// A Voss net sampled on a grid.
#[derive(Clone)]
pub struct VossNet {
    pub kind: NetKind,
    pub label: String,
    pub grid: GridSpec,
    pub q: Vec<Vector3<f64>>,
    pub qx: Vec<Vector3<f64>>,
    pub qy: Vec<Vector3<f64>>,
    pub n: Vec<Vector3<f64>>,
    pub support: Vec<f64>,
    pub xy: XYFields,
    pub sin_phi: Vec<f64>,
    pub cos_phi: Vec<f64>,
    pub diagnostics: NetDiagnostics,
    pub singular: SingularLocus,
    source: Arc<dyn ScaledXY>,
}

impl std::fmt::Debug for VossNet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VossNet")
            .field("kind", &self.kind)
            .field("label", &self.label)
            .field("grid", &self.grid)
            .field("diagnostics", &self.diagnostics)
            .finish()
    }
}

/// Per-node quantities assembled by the net builders.
pub(crate) struct NodeInput {
    /// Jets of the net position, order 2.
    pub q: [Jet2; 3],
    pub n: Vector3<f64>,
    pub rx: Vector3<f64>,
    pub ry: Vector3<f64>,
    /// `X`, `Y` jets of order 1.
    pub x: Jet2,
    pub y: Jet2,
    /// `φ` jet of order at least 1.
    pub phi: Jet2,
    /// Expected value of `q·n`.
    pub support: f64,
}

pub(crate) struct NodeOutput {
    q: Vector3<f64>,
    qx: Vector3<f64>,
    qy: Vector3<f64>,
    n: Vector3<f64>,
    support: f64,
    x: f64,
    y: f64,
    sin: f64,
    cos: f64,
    diag: NetDiagnostics,
}

fn part(q: &[Jet2; 3], i: usize, j: usize) -> Vector3<f64> {
    Vector3::new(q[0].partial(i, j), q[1].partial(i, j), q[2].partial(i, j))
}

pub(crate) fn assemble_node(kind: NetKind, inp: NodeInput) -> NodeOutput {
    let sigma = kind.sigma();
    let (s, c) = inp.phi.value().sin_cos();
    let q = vec_value(&inp.q);
    let (qx, qy) = (part(&inp.q, 1, 0), part(&inp.q, 0, 1));
    let (qxx, qxy, qyy) = (part(&inp.q, 2, 0), part(&inp.q, 1, 1), part(&inp.q, 0, 2));
    let n = inp.n;
    let conj = qxy.dot(&n).abs() / qxy.norm().max(1.0);
    let geo = |a: &Vector3<f64>, b: &Vector3<f64>| {
        let d = a.norm() * b.norm();
        if d == 0.0 {
            0.0
        } else {
            a.cross(b).dot(&n).abs() / d
        }
    };
    let (xv, yv) = (inp.x.value(), inp.y.value());
    let tx = inp.ry * (sigma * xv / s);
    let ty = inp.rx * (sigma * yv / s);
    let tangency = ((qx - tx).norm() / tx.norm().max(1.0)).max((qy - ty).norm() / ty.norm().max(1.0));
    let support = (q.dot(&n) - inp.support).abs() / q.norm().max(1.0);
    let diag = NetDiagnostics {
        conjugacy: conj,
        geodesic: geo(&qx, &qxx).max(geo(&qy, &qyy)),
        support,
        xy_system: system_residual(&inp.x, &inp.y, &inp.phi),
        tangency,
    };
    NodeOutput { q, qx, qy, n, support: inp.support, x: xv, y: yv, sin: s, cos: c, diag }
}

pub(crate) fn assemble_net(
    kind: NetKind,
    label: String,
    grid: &GridSpec,
    nodes: Vec<NodeOutput>,
    source: Arc<dyn ScaledXY>,
) -> Result<VossNet> {
    let xy = XYFields {
        grid: *grid,
        x: nodes.iter().map(|o| o.x).collect(),
        y: nodes.iter().map(|o| o.y).collect(),
        system_residual: nodes.iter().map(|o| o.diag.xy_system).fold(0.0, f64::max),
    };
    let diagnostics = nodes.iter().map(|o| o.diag).fold(NetDiagnostics::default(), NetDiagnostics::merge);
    let mut net = VossNet {
        kind,
        label,
        grid: *grid,
        q: nodes.iter().map(|o| o.q).collect(),
        qx: nodes.iter().map(|o| o.qx).collect(),
        qy: nodes.iter().map(|o| o.qy).collect(),
        n: nodes.iter().map(|o| o.n).collect(),
        support: nodes.iter().map(|o| o.support).collect(),
        sin_phi: nodes.iter().map(|o| o.sin).collect(),
        cos_phi: nodes.iter().map(|o| o.cos).collect(),
        xy,
        diagnostics,
        singular: SingularLocus::default(),
        source,
    };
    net.singular = singular_locus(&net);
    Ok(net)
}

/// Median of `|Φ_xx| + |Φ_xy| + |Φ_yy|` over the grid, or `max |Φ|` when that
/// vanishes; the reference magnitude for degeneracy decisions.
pub(crate) fn second_derivative_scale(field: &dyn MoutardField, grid: &GridSpec) -> Result<f64> {
    let rows: Vec<(f64, f64)> = grid
        .points()
        .par_iter()
        .map(|&(x, y)| {
            let j = field.jet(x, y, 2)?;
            Ok((j.partial(2, 0).abs() + j.partial(1, 1).abs() + j.partial(0, 2).abs(), j.value().abs()))
        })
        .collect::<Result<_>>()?;
    let mut second: Vec<f64> = rows.iter().map(|r| r.0).collect();
    second.sort_by(f64::total_cmp);
    let median = second[second.len() / 2];
    if median > 0.0 {
        Ok(median)
    } else {
        Ok(rows.iter().map(|r| r.1).fold(0.0, f64::max))
    }
}

/// Builds the Voss net with support function `Φ` over a grid.
pub fn build_voss_net(surface: Arc<dyn Surface>, field: FieldRef, grid: &GridSpec) -> Result<VossNet> {
    let phi = surface.solution().clone();
    if phi.id() != field.solution().id() {
        return Err(VossError::Config(format!(
            "field over {} used with surface over {}",
            field.solution().id(),
            phi.id()
        )));
    }
    check_grid_regular(&phi, grid)?;
    let nodes: Vec<NodeOutput> = grid
        .points()
        .par_iter()
        .map(|&(x, y)| -> Result<NodeOutput> {
            let fj = surface.frame_jets(x, y, 2)?;
            let (rx, ry) = fj.tangents();
            let p = phi.jet(x, y, 3)?;
            let f = field.jet(x, y, 3)?;
            let (xj, yj) = xy_jets(&p, &f, 1)?;
            let p2 = p.truncate(2);
            let inv = p2.sin().recip();
            let f2 = f.truncate(2);
            let fx = f.derivative(Axis::X)?;
            let fy = f.derivative(Axis::Y)?;
            let q: [Jet2; 3] = std::array::from_fn(|c| f2 * fj.n[c] - (fy * rx[c] + fx * ry[c]) * inv);
            Ok(assemble_node(
                NetKind::Guichard,
                NodeInput {
                    q,
                    n: vec_value(&fj.n),
                    rx: vec_value(&rx),
                    ry: vec_value(&ry),
                    x: xj,
                    y: yj,
                    phi: p,
                    support: f.value(),
                },
            ))
        })
        .collect::<Result<_>>()?;
    let max_xy = nodes.iter().map(|o| o.x.abs() + o.y.abs()).fold(0.0, f64::max);
    let scale = second_derivative_scale(&*field, grid)?;
    if !(max_xy > DEGENERACY_TOL * scale) {
        return Err(VossError::DegenerateNet(format!(
            "max |X| + |Y| = {max_xy:e} against scale {scale:e}"
        )));
    }
    let source: Arc<dyn ScaledXY> = Arc::new(GuichardSource { field: field.clone() });
    assemble_net(NetKind::Guichard, field.label(), grid, nodes, source)
}

/// Fundamental forms and curvatures of a net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetGeometry {
    /// `(E, F, G)` of the first form from `X`, `Y`, `φ`.
    pub first: Vec<[f64; 3]>,
    /// `(L, M, N)` of the second form.
    pub second: Vec<[f64; 3]>,
    pub gauss: Vec<f64>,
    pub mean: Vec<f64>,
    pub det_first: Vec<f64>,
    /// Largest relative difference between the analytic first form and the
    /// one computed from the jets of `q`.
    pub jet_discrepancy: f64,
    /// The same against fourth-order central differences of the node
    /// positions (interior nodes only).
    pub mesh_discrepancy: f64,
}

impl NetGeometry {
    /// Fails at the first node where a curvature is not finite.
    pub fn checked(&self, grid: &GridSpec) -> Result<&Self> {
        for (k, (g, h)) in self.gauss.iter().zip(&self.mean).enumerate() {
            if !g.is_finite() || !h.is_finite() {
                let (i, j) = grid.ij(k);
                let (x, y) = grid.point(i, j);
                return Err(VossError::BlowUp { x, y });
            }
        }
        Ok(self)
    }
}

fn form_gap(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let scale = (a[0].abs() + a[2].abs()).max(1.0);
    (0..3).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max) / scale
}

/// Forms and curvatures: `K = sin²φ / (XY)`, `H = σ/2 (1/X + 1/Y)` with
/// `σ = −1` for support-function nets and `+1` for the inverse construction.
/// Where `X` or `Y` vanishes the curvatures are signed infinities.
pub fn forms_and_curvatures(net: &VossNet) -> NetGeometry {
    let sigma = net.kind.sigma();
    let g = &net.grid;
    let mut first = Vec::with_capacity(g.len());
    let mut second = Vec::with_capacity(g.len());
    let mut gauss = Vec::with_capacity(g.len());
    let mut mean = Vec::with_capacity(g.len());
    let mut det_first = Vec::with_capacity(g.len());
    let mut jet_discrepancy = 0.0f64;
    for k in 0..g.len() {
        let (x, y, s, c) = (net.xy.x[k], net.xy.y[k], net.sin_phi[k], net.cos_phi[k]);
        let s2 = s * s;
        let e = [x * x / s2, x * y * c / s2, y * y / s2];
        first.push(e);
        second.push([sigma * x, 0.0, sigma * y]);
        gauss.push(s2 / (x * y));
        mean.push(0.5 * sigma * (1.0 / x + 1.0 / y));
        det_first.push(x * x * y * y / s2);
        let (qx, qy) = (net.qx[k], net.qy[k]);
        let from_jets = [qx.dot(&qx), qx.dot(&qy), qy.dot(&qy)];
        jet_discrepancy = jet_discrepancy.max(form_gap(&e, &from_jets));
    }
    let mut mesh_discrepancy = 0.0f64;
    if g.nx >= 5 && g.ny >= 5 {
        let q = |i: usize, j: usize| net.q[g.index(i, j)];
        for j in 2..g.ny - 2 {
            for i in 2..g.nx - 2 {
                let dx = (q(i - 2, j) - q(i + 2, j) + (q(i + 1, j) - q(i - 1, j)) * 8.0) / (12.0 * g.dx);
                let dy = (q(i, j - 2) - q(i, j + 2) + (q(i, j + 1) - q(i, j - 1)) * 8.0) / (12.0 * g.dy);
                let mesh = [dx.dot(&dx), dx.dot(&dy), dy.dot(&dy)];
                mesh_discrepancy = mesh_discrepancy.max(form_gap(&first[g.index(i, j)], &mesh));
            }
        }
    }
    NetGeometry { first, second, gauss, mean, det_first, jet_discrepancy, mesh_discrepancy }
}

/// Blow-up indicator `sign(sin φ)·(1/det I)^{1/6}` expressed through the
/// bounded products `X sin φ`, `Y sin φ`.
fn blowup_indicator(xs: f64, ys: f64, s: f64) -> f64 {
    s / (xs * ys).abs().cbrt()
}

/// Ridge (`XY = 0`) and blow-up (`sin φ = 0`) curves of a net.
///
/// Ridges are traced on `X sin φ` and `Y sin φ`, which stay bounded where
/// `X` and `Y` themselves blow up; blow-ups are traced on the signed sixth
/// root of `1/det I`.
pub fn singular_locus(net: &VossNet) -> SingularLocus {
    let g = &net.grid;
    let src = net.source.clone();
    let eval = move |x: f64, y: f64| src.scaled_xy(x, y).ok();
    let xs: Vec<f64> = (0..g.len()).map(|k| net.xy.x[k] * net.sin_phi[k]).collect();
    let ys: Vec<f64> = (0..g.len()).map(|k| net.xy.y[k] * net.sin_phi[k]).collect();
    let bs: Vec<f64> = (0..g.len())
        .map(|k| {
            let b = blowup_indicator(xs[k], ys[k], net.sin_phi[k]);
            if b.is_nan() { 0.0 } else { b.clamp(-f64::MAX, f64::MAX) }
        })
        .collect();

    let mut polylines = Vec::new();
    let fields: [(LocusTag, &Vec<f64>); 3] = [(LocusTag::RidgeX, &xs), (LocusTag::RidgeY, &ys), (LocusTag::BlowUp, &bs)];
    for (tag, values) in fields {
        let f = |x: f64, y: f64| {
            eval(x, y).map(|(a, b, s)| match tag {
                LocusTag::RidgeX => a,
                LocusTag::RidgeY => b,
                // Same sign and zero set as the indicator, without its poles
                // on the ridges.
                LocusTag::BlowUp => s,
            })
        };
        for c in zero_contours(g, values, &f) {
            polylines.push(Polyline { tag, points: c.points, closed: c.closed });
        }
    }
    let mut intersections = Vec::new();
    for a in 0..polylines.len() {
        for b in a + 1..polylines.len() {
            if polylines[a].tag == polylines[b].tag {
                continue;
            }
            for sa in polylines[a].points.windows(2) {
                for sb in polylines[b].points.windows(2) {
                    if let Some(p) = segment_intersection(sa[0], sa[1], sb[0], sb[1]) {
                        intersections.push(p);
                    }
                }
            }
        }
    }
    SingularLocus { polylines, intersections }
}

impl VossNet {
    /// Node positions shifted so that the base node sits at the origin.
    pub fn anchored(&self, base: (usize, usize)) -> Vec<Vector3<f64>> {
        let q0 = self.q[self.grid.index(base.0, base.1)];
        self.q.iter().map(|q| q - q0).collect()
    }

    /// `(X sin φ, Y sin φ, sin φ)` at an arbitrary point.
    pub fn scaled_xy(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        self.source.scaled_xy(x, y)
    }

    /// Nodes where `|X|` or `|Y|` exceeds `cap`, or a curvature is not finite.
    pub fn flagged_nodes(&self, cap: f64) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&k| {
                let (x, y) = (self.xy.x[k], self.xy.y[k]);
                !(x.abs() <= cap && y.abs() <= cap) || x == 0.0 || y == 0.0
            })
            .collect()
    }
}

/// Outcome of a degeneracy test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `max(|X| + |Y|)` over the grid.
    pub max_xy: f64,
    /// Reference magnitude of the field.
    pub scale: f64,
    pub beltrami_mean: f64,
    pub beltrami_std: f64,
    /// `beltrami_std / |beltrami_mean|`.
    pub beltrami_rel_std: f64,
    pub degenerate: bool,
}

/// Beltrami first integral `(Φ_x² + 2Φ_xΦ_y cos φ + Φ_y²)/sin²φ + Φ²`.
pub fn beltrami_integral(field: &dyn MoutardField, x: f64, y: f64) -> Result<f64> {
    let f = field.jet(x, y, 1)?;
    let (s, c) = field.solution().jet(x, y, 0)?.value().sin_cos();
    let (fx, fy) = (f.dx(), f.dy());
    Ok((fx * fx + 2.0 * fx * fy * c + fy * fy) / (s * s) + f.value() * f.value())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Certifies whether the net with support function `Φ` collapses to a point:
/// both `X ≡ 0` and a constant Beltrami integral, relative to the field's
/// own scale.
pub fn degeneracy_test(field: &dyn MoutardField, grid: &GridSpec) -> Result<Certificate> {
    let xy = xy_fields(field, grid)?;
    let scale = second_derivative_scale(field, grid)?;
    let bel: Vec<f64> = grid
        .points()
        .par_iter()
        .map(|&(x, y)| beltrami_integral(field, x, y))
        .collect::<Result<_>>()?;
    let (mean, std) = mean_std(&bel);
    let max_xy = xy.max_abs_sum();
    let rel = if mean.abs() > 0.0 { std / mean.abs() } else if std == 0.0 { 0.0 } else { f64::INFINITY };
    let degenerate = scale == 0.0 || (max_xy <= DEGENERACY_TOL * scale && rel <= DEGENERACY_TOL);
    Ok(Certificate { max_xy, scale, beltrami_mean: mean, beltrami_std: std, beltrami_rel_std: rel, degenerate })
}

/// Largest difference of `X` and `Y` between two nets on the same grid,
/// relative to their common magnitude.
pub fn xy_distance(a: &VossNet, b: &VossNet) -> Result<f64> {
    if a.grid != b.grid {
        return Err(VossError::GridMismatch(format!("{:?} vs {:?}", a.grid, b.grid)));
    }
    let scale = a
        .xy
        .x
        .iter()
        .chain(&a.xy.y)
        .chain(&b.xy.x)
        .chain(&b.xy.y)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let d = (0..a.grid.len())
        .map(|k| (a.xy.x[k] - b.xy.x[k]).abs().max((a.xy.y[k] - b.xy.y[k]).abs()))
        .fold(0.0, f64::max);
    Ok(d / scale)
}

/// Two nets on one grid differ by a translation exactly when their `X` and
/// `Y` agree.
pub fn translation_equivalent(a: &VossNet, b: &VossNet) -> Result<bool> {
    Ok(xy_distance(a, b)? < DEGENERACY_TOL)
}
