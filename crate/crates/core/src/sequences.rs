//! Guichard sequences and linear dependencies among symmetries.
//!
//! A sequence applies successive hierarchy members to one surface and stops
//! at the first member whose net collapses to a point or repeats an earlier
//! net. Dependencies are detected numerically: member values (or their `X`,
//! `Y` fields) are sampled at quasi-random points and the rank of the sample
//! matrix is read off its singular values.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::SGSolution;
use crate::error::{Result, VossError};
use crate::frames::Surface;
use crate::grid::GridSpec;
use crate::jets::ScalarField;
use crate::symmetries::{
    apply_r, apply_r_inverse, conservation_potentials, khorkova_with, pmkdv_fourth, pmkdv_member,
    ConservationPotentials, FieldRef, Quadrature, Transposed,
};
use crate::voss::{build_voss_net, degeneracy_test, xy_jets, Certificate, VossNet, DEGENERACY_TOL};

/// Relative singular value below which a direction counts as null.
pub const RANK_THRESHOLD: f64 = 1e-8;
/// Ratios within this window around the threshold make the rank ambiguous.
pub const AMBIGUOUS_WINDOW: (f64, f64) = (1e-9, 1e-7);
/// Samples drawn per member.
pub const OVERSAMPLING: usize = 4;
/// Sample points closer than this to `sin φ = 0` are skipped.
pub const SAMPLE_MIN_SIN: f64 = 0.05;
/// Largest denominator tried when rounding coefficients to rationals.
pub const MAX_DENOMINATOR: i64 = 1000;
/// Rounding accepted when the rational is this close.
pub const RATIONAL_TOL: f64 = 1e-6;
/// Longest sequence the quadrature chains are trusted for.
pub const MAX_SEQUENCE: usize = 3;

/// Point `index` of the Halton sequence in base `b`.
pub fn halton(mut index: u64, b: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while index > 0 {
        f /= b as f64;
        r += f * (index % b) as f64;
        index /= b;
    }
    r
}

/// Rectangle `[x0, x1] × [y0, y1]` sampled by the dependency tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl SampleBox {
    pub fn of_grid(g: &GridSpec) -> Self {
        let (x1, y1) = g.far_corner();
        SampleBox { x0: g.x0.min(x1), x1: g.x0.max(x1), y0: g.y0.min(y1), y1: g.y0.max(y1) }
    }
}

/// `count` Halton points of the box, skipping points where `|sin φ|` is
/// below [`SAMPLE_MIN_SIN`]. `seed` offsets the sequence.
pub fn sample_points(phi: &SGSolution, bx: &SampleBox, count: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(count);
    let mut k = seed + 1;
    let limit = seed + 1 + 1000 * count as u64 + 1000;
    while out.len() < count {
        if k > limit {
            return Err(VossError::Domain("sampling box is almost entirely singular".into()));
        }
        let p = (bx.x0 + (bx.x1 - bx.x0) * halton(k, 2), bx.y0 + (bx.y1 - bx.y0) * halton(k, 3));
        k += 1;
        if phi.value(p.0, p.1)?.sin().abs() >= SAMPLE_MIN_SIN {
            out.push(p);
        }
    }
    Ok(out)
}

/// A null-space vector, with its rational form when every coefficient rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullVector {
    pub coefficients: Vec<f64>,
    /// `(numerator, denominator)` per coefficient.
    pub rational: Option<Vec<(i64, i64)>>,
}

impl NullVector {
    /// The rational form as strings such as `-1/3`.
    pub fn rational_strings(&self) -> Option<Vec<String>> {
        self.rational.as_ref().map(|r| {
            r.iter()
                .map(|&(p, q)| if q == 1 { p.to_string() } else { format!("{p}/{q}") })
                .collect()
        })
    }
}

/// Result of a dependency or dimension analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependencyReport {
    pub labels: Vec<String>,
    pub sample_box: SampleBox,
    pub sample_points: Vec<(f64, f64)>,
    pub seed: u64,
    /// Singular values of the column-normalised sample matrix, descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub nullity: usize,
    /// Row-reduced basis of the null space in the original member scaling.
    pub null_vectors: Vec<NullVector>,
    /// Dimension of the span of the members.
    pub symmetry_dimension: usize,
    /// Dimension of the subspace giving degenerate nets, when computed.
    pub degenerate_dimension: Option<usize>,
    /// Dimension of the space of nets, when computed.
    pub voss_dimension: Option<usize>,
}

/// Nearest fraction with denominator at most `max_den` by continued fractions.
pub fn rationalize(v: f64, max_den: i64) -> (i64, i64) {
    let sign = if v < 0.0 { -1 } else { 1 };
    let mut x = v.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    for _ in 0..64 {
        let a = x.floor();
        if a > i64::MAX as f64 / 2.0 {
            break;
        }
        let a = a as i64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = x - a as f64;
        if frac < 1e-12 {
            break;
        }
        x = 1.0 / frac;
    }
    if q1 == 0 {
        return (sign * v.abs().round() as i64, 1);
    }
    (sign * p1, q1)
}

/// Row-reduces the rows of `rows` with partial pivoting.
fn rref(mut rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut lead = 0;
    for r in 0..rows.len() {
        let mut pivot = None;
        while lead < ncols {
            let best = (r..rows.len()).max_by(|&a, &b| rows[a][lead].abs().total_cmp(&rows[b][lead].abs())).unwrap();
            if rows[best][lead].abs() > 1e-10 {
                pivot = Some(best);
                break;
            }
            lead += 1;
        }
        let Some(p) = pivot else { break };
        rows.swap(r, p);
        let d = rows[r][lead];
        for v in rows[r].iter_mut() {
            *v /= d;
        }
        for o in 0..rows.len() {
            if o != r {
                let f = rows[o][lead];
                if f != 0.0 {
                    for c in 0..ncols {
                        rows[o][c] -= f * rows[r][c];
                    }
                }
            }
        }
        lead += 1;
    }
    rows
}

struct RankAnalysis {
    singular_values: Vec<f64>,
    rank: usize,
    null_vectors: Vec<NullVector>,
}

/// Rank and null space of `samples` (rows are samples, columns members).
/// Columns are divided by `norms`, their own norms when absent.
fn analyse(samples: &DMatrix<f64>, norms: Option<&[f64]>) -> Result<RankAnalysis> {
    let ncols = samples.ncols();
    let norms: Vec<f64> = match norms {
        Some(n) => n.to_vec(),
        None => (0..ncols).map(|c| samples.column(c).norm()).collect(),
    };
    let mut scaled = samples.clone();
    for c in 0..ncols {
        if norms[c] > 0.0 {
            scaled.column_mut(c).scale_mut(1.0 / norms[c]);
        }
    }
    // A zero column is its own null direction.
    let svd = scaled.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| VossError::Domain("singular value decomposition failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let mut rank = 0;
    for &s in &sv {
        let ratio = if smax > 0.0 { s / smax } else { 0.0 };
        if ratio > AMBIGUOUS_WINDOW.0 && ratio < AMBIGUOUS_WINDOW.1 {
            return Err(VossError::IllConditioned { ratio, threshold: RANK_THRESHOLD });
        }
        if ratio > RANK_THRESHOLD {
            rank += 1;
        }
    }
    // Rows of V^T beyond the rank span the null space; missing rows (more
    // members than samples) are not expected since samples oversample.
    let mut null_rows: Vec<Vec<f64>> = order[rank..]
        .iter()
        .map(|&k| (0..ncols).map(|c| v_t[(k, c)]).collect())
        .collect();
    let zero_cols = norms.iter().filter(|&&n| n == 0.0).count();
    if null_rows.len() < ncols - rank && zero_cols > 0 {
        for (c, &n) in norms.iter().enumerate() {
            if n == 0.0 {
                let mut e = vec![0.0; ncols];
                e[c] = 1.0;
                null_rows.push(e);
            }
        }
    }
    // Back to the original member scaling.
    for row in null_rows.iter_mut() {
        for c in 0..ncols {
            if norms[c] > 0.0 {
                row[c] /= norms[c];
            }
        }
    }
    let null_vectors = rref(null_rows)
        .into_iter()
        .filter(|r| r.iter().any(|v| v.abs() > 0.0))
        .map(|coefficients| {
            let rational: Option<Vec<(i64, i64)>> = coefficients
                .iter()
                .map(|&v| {
                    let (p, q) = rationalize(v, MAX_DENOMINATOR);
                    ((v - p as f64 / q as f64).abs() < RATIONAL_TOL).then_some((p, q))
                })
                .collect();
            NullVector { coefficients, rational }
        })
        .collect();
    Ok(RankAnalysis { singular_values: sv, rank, null_vectors })
}

fn check_members(members: &[FieldRef]) -> Result<SGSolution> {
    let first = members.first().ok_or_else(|| VossError::Config("no members given".into()))?;
    let phi = first.solution().clone();
    if members.iter().any(|m| m.solution().id() != phi.id()) {
        return Err(VossError::Config("members live on different solutions".into()));
    }
    Ok(phi)
}

/// Numerical rank of the span of `members` from their values at `points`.
pub fn dependency_rank(members: &[FieldRef], points: &[(f64, f64)]) -> Result<DependencyReport> {
    check_members(members)?;
    if points.len() < 2 * members.len() {
        return Err(VossError::Config(format!(
            "{} sample points for {} members; need at least twice as many",
            points.len(),
            members.len()
        )));
    }
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&(x, y)| members.iter().map(|m| m.value(x, y)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let m = DMatrix::from_fn(points.len(), members.len(), |r, c| rows[r][c]);
    let a = analyse(&m, None)?;
    let bx = bounding_box(points);
    Ok(DependencyReport {
        labels: members.iter().map(|m| m.label()).collect(),
        sample_box: bx,
        sample_points: points.to_vec(),
        seed: 0,
        singular_values: a.singular_values,
        rank: a.rank,
        nullity: members.len() - a.rank,
        null_vectors: a.null_vectors,
        symmetry_dimension: a.rank,
        degenerate_dimension: None,
        voss_dimension: None,
    })
}

fn bounding_box(points: &[(f64, f64)]) -> SampleBox {
    let mut b = SampleBox { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
    for &(x, y) in points {
        b.x0 = b.x0.min(x);
        b.x1 = b.x1.max(x);
        b.y0 = b.y0.min(y);
        b.y1 = b.y1.max(y);
    }
    b
}

/// [`dependency_rank`] at quasi-random points of the grid's box.
pub fn dependency_rank_sampled(members: &[FieldRef], grid: &GridSpec, seed: u64) -> Result<DependencyReport> {
    let phi = check_members(members)?;
    let bx = SampleBox::of_grid(grid);
    let points = sample_points(&phi, &bx, OVERSAMPLING * members.len(), seed)?;
    let mut r = dependency_rank(members, &points)?;
    r.sample_box = bx;
    r.seed = seed;
    Ok(r)
}

/// Dimension of the space of nets spanned by `basis`: the rank of the
/// linear map sending coefficients to the `X`, `Y` fields of the combined
/// support function, since a net collapses exactly when `X ≡ Y ≡ 0`.
pub fn voss_dimension(basis: &[FieldRef], grid: &GridSpec, seed: u64) -> Result<DependencyReport> {
    let phi = check_members(basis)?;
    let bx = SampleBox::of_grid(grid);
    let points = sample_points(&phi, &bx, OVERSAMPLING * basis.len(), seed)?;
    let span = dependency_rank(basis, &points)?;
    let span_values: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&(x, y)| basis.iter().map(|m| m.value(x, y)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<(f64, f64)>> = points
        .par_iter()
        .map(|&(x, y)| {
            let p = phi.jet(x, y, 1)?;
            basis
                .iter()
                .map(|m| {
                    let (a, b) = xy_jets(&p, &m.jet(x, y, 2)?, 0)?;
                    Ok((a.value(), b.value()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let n = points.len();
    let m = DMatrix::from_fn(2 * n, basis.len(), |r, c| if r < n { rows[r][c].0 } else { rows[r - n][c].1 });
    // Scaled by the members' own sizes so that a vanishing X-column stays small.
    let sizes: Vec<f64> = (0..basis.len())
        .map(|c| (0..n).map(|r| span_values[r][c] * span_values[r][c]).sum::<f64>().sqrt())
        .collect();
    let a = analyse(&m, Some(&sizes))?;
    let nullity = basis.len() - a.rank;
    Ok(DependencyReport {
        labels: basis.iter().map(|m| m.label()).collect(),
        sample_box: bx,
        sample_points: points,
        seed,
        singular_values: a.singular_values,
        rank: a.rank,
        nullity,
        null_vectors: a.null_vectors,
        symmetry_dimension: span.rank,
        degenerate_dimension: Some(span.rank.saturating_sub(a.rank)),
        voss_dimension: Some(a.rank),
    })
}

// ---------------------------------------------------------------------------
// Guichard sequences
// ---------------------------------------------------------------------------

/// Where the members of a sequence come from.
#[derive(Clone)]
pub enum SequenceSeed {
    /// Local members `Φ_n, Φ_{n±1}, …`.
    Pmkdv(i32),
    /// Nonlocal members `Φ̄_n, Φ̄_{n±1}, …` sharing one set of potentials.
    Khorkova(i32),
    /// `Φ, RΦ, R²Φ, …` (or `R′` for the negative direction).
    Recursion(FieldRef),
}

impl std::fmt::Debug for SequenceSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SequenceSeed::Pmkdv(n) => write!(f, "Pmkdv({n})"),
            SequenceSeed::Khorkova(n) => write!(f, "Khorkova({n})"),
            SequenceSeed::Recursion(s) => write!(f, "Recursion({})", s.label()),
        }
    }
}

/// Why a sequence stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum HaltReason {
    /// The member's net collapses to a point.
    Degenerate { member: String },
    /// The member's net repeats an earlier one: its `X`, `Y` equal `factor`
    /// times those of `previous` (a translation when `factor` is 1).
    Repeats { member: String, previous: String, factor: f64 },
    /// `max_n` members were produced.
    Limit,
    /// The next member is not available.
    Unsupported { member: String, reason: String },
}

pub struct GuichardSequence {
    pub members: Vec<String>,
    pub nets: Vec<VossNet>,
    pub certificates: Vec<Certificate>,
    pub halt: HaltReason,
}

/// Hierarchy members on one solution with shared potentials.
pub struct Hierarchy {
    phi: SGSolution,
    grid: GridSpec,
    quad: Quadrature,
    positive: Option<ConservationPotentials>,
    negative: Option<ConservationPotentials>,
}

impl Hierarchy {
    pub fn new(phi: &SGSolution, grid: &GridSpec, quad: &Quadrature) -> Self {
        Hierarchy { phi: phi.clone(), grid: *grid, quad: quad.clone(), positive: None, negative: None }
    }

    pub fn pmkdv(&self, n: i32) -> Result<FieldRef> {
        match n {
            4 => Ok(pmkdv_fourth(&self.phi)),
            -4 => Ok(Arc::new(Transposed::labelled(pmkdv_fourth(&self.phi.transposed()), "pmkdv:-4".into()))),
            _ => pmkdv_member(&self.phi, n),
        }
    }

    pub fn khorkova(&mut self, n: i32) -> Result<FieldRef> {
        if n == 0 || n.abs() > 3 {
            return Err(VossError::Unsupported(format!("khorkova member {n}; supported: ±1, ±2, ±3")));
        }
        if n > 0 {
            if self.positive.is_none() {
                self.positive = Some(conservation_potentials(&self.phi, &self.grid, &self.quad)?);
            }
            return khorkova_with(&self.phi, n as usize, self.positive.as_ref().unwrap());
        }
        let pt = self.phi.transposed();
        if self.negative.is_none() {
            self.negative = Some(conservation_potentials(&pt, &self.grid.transpose(), &self.quad.transpose())?);
        }
        let inner = khorkova_with(&pt, (-n) as usize, self.negative.as_ref().unwrap())?;
        Ok(Arc::new(Transposed::labelled(inner, format!("khorkova:{n}"))))
    }
}

/// Least-squares factor `λ` with `X_b ≈ λ X_a`, `Y_b ≈ λ Y_a` and the
/// relative residual of that fit.
pub fn proportionality(a: &VossNet, b: &VossNet) -> Result<(f64, f64)> {
    if a.grid != b.grid {
        return Err(VossError::GridMismatch(format!("{:?} vs {:?}", a.grid, b.grid)));
    }
    let pa = a.xy.x.iter().chain(&a.xy.y);
    let pb = b.xy.x.iter().chain(&b.xy.y);
    let (num, den) = pa.clone().zip(pb.clone()).fold((0.0, 0.0), |(n, d), (u, v)| (n + u * v, d + u * u));
    let factor = if den > 0.0 { num / den } else { 0.0 };
    let scale = pb.clone().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let residual = pa.zip(pb).map(|(u, v)| (v - factor * u).abs()).fold(0.0, f64::max) / scale;
    Ok((factor, residual))
}

/// Generates nets from successive members until one is degenerate or
/// repeats an earlier net up to translation and scale, or `max_n` members
/// have been used. `direction` is `+1` or `-1`.
pub fn guichard_sequence(
    surface: Arc<dyn Surface>,
    seed: &SequenceSeed,
    direction: i32,
    max_n: usize,
    grid: &GridSpec,
    quad: &Quadrature,
) -> Result<GuichardSequence> {
    if direction != 1 && direction != -1 {
        return Err(VossError::Config(format!("direction must be +1 or -1, got {direction}")));
    }
    if max_n > MAX_SEQUENCE {
        return Err(VossError::Config(format!("max_n = {max_n} exceeds {MAX_SEQUENCE}")));
    }
    let phi = surface.solution().clone();
    let mut hierarchy = Hierarchy::new(&phi, grid, quad);
    let mut previous: Option<FieldRef> = None;
    let mut out = GuichardSequence { members: Vec::new(), nets: Vec::new(), certificates: Vec::new(), halt: HaltReason::Limit };
    for k in 0..max_n {
        let step = k as i32 * direction;
        let member = match seed {
            SequenceSeed::Pmkdv(n) => skip_zero(*n, step).and_then(|m| hierarchy.pmkdv(m)),
            SequenceSeed::Khorkova(n) => skip_zero(*n, step).and_then(|m| hierarchy.khorkova(m)),
            SequenceSeed::Recursion(f) => match &previous {
                None => Ok(f.clone()),
                Some(p) if direction > 0 => apply_r(p.clone(), grid, quad),
                Some(p) => apply_r_inverse(p.clone(), grid, quad),
            },
        };
        let member = match member {
            Ok(m) => m,
            Err(VossError::Unsupported(reason)) => {
                out.halt = HaltReason::Unsupported { member: format!("step {k}"), reason };
                return Ok(out);
            }
            Err(e) => return Err(e),
        };
        previous = Some(member.clone());
        let label = member.label();
        let cert = degeneracy_test(&*member, grid)?;
        out.members.push(label.clone());
        out.certificates.push(cert);
        if cert.degenerate {
            out.halt = HaltReason::Degenerate { member: label };
            return Ok(out);
        }
        let net = build_voss_net(surface.clone(), member, grid)?;
        for old in &out.nets {
            let (factor, residual) = proportionality(old, &net)?;
            if residual < DEGENERACY_TOL {
                out.halt = HaltReason::Repeats { member: label, previous: old.label.clone(), factor };
                return Ok(out);
            }
        }
        out.nets.push(net);
    }
    Ok(out)
}

fn skip_zero(start: i32, step: i32) -> Result<i32> {
    // Hierarchy indices jump over zero: 1, -1 are neighbours.
    let mut n = start + step;
    if start > 0 && n <= 0 {
        n -= 1;
    } else if start < 0 && n >= 0 {
        n += 1;
    }
    if n == 0 {
        return Err(VossError::Unsupported("member 0".into()));
    }
    Ok(n)
}
