//! Acceptance run: one line per criterion, non-zero exit when any fails.

use std::error::Error;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::Vector3;
use voss_core::catalog::{dini_helicoid, kuen, make_kink, make_three_soliton, make_two_soliton, pseudosphere, SGSolution};
use voss_core::frames::{gauss_weingarten_residual, integrate_gauss_weingarten, Frame, Surface, SurfaceGrid};
use voss_core::grid::GridSpec;
use voss_core::inverse::{apply_r_plus_id_inverse, build_tilde_net, fit_catenary, round_trip, spinal_curve, tilde_fields};
use voss_core::jets::{Axis, ScalarField};
use voss_core::sequences::{dependency_rank_sampled, voss_dimension, DependencyReport, Hierarchy};
use voss_core::symmetries::{
    apply_r, apply_r_inverse, moutard_residual, normal_component, scaling_shadow, translation_symmetry, FieldRef,
    LinearCombination, Provenance, Quadrature,
};
use voss_core::voss::{build_voss_net, degeneracy_test, forms_and_curvatures, xy_fields, NetDiagnostics, VossNet};

type Res<T> = Result<T, Box<dyn Error>>;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Res<Outcome> {
        Ok(Outcome { pass, detail })
    }
}

/// Nets built along the way; the property suite runs over all of them.
#[derive(Default)]
struct Nets(Vec<(String, NetDiagnostics)>);

impl Nets {
    fn keep(&mut self, name: &str, net: &VossNet) {
        self.0.push((name.to_string(), net.diagnostics));
    }
}

fn uv(x: f64, y: f64) -> (f64, f64) {
    (x + y, x - y)
}

fn kink_grid() -> GridSpec {
    GridSpec::spanning(0.3, 1.3, 0.2, 1.2, 41, 41).unwrap()
}

fn two_soliton_grid() -> GridSpec {
    GridSpec::spanning(0.6, 1.2, 0.0, 0.4, 41, 41).unwrap()
}

fn three_soliton_grid() -> GridSpec {
    GridSpec::spanning(0.8, 1.3, -0.4, 0.1, 41, 41).unwrap()
}

/// Frame at the grid origin used to integrate surfaces without a closed form.
fn initial_frame(phi: &SGSolution, g: &GridSpec) -> Res<Frame> {
    let a = phi.jet(g.x0, g.y0, 0)?.value();
    Ok(Frame {
        r: Vector3::zeros(),
        rx: Vector3::x(),
        ry: Vector3::new(a.cos(), a.sin(), 0.0),
        n: Vector3::z(),
    })
}

fn integrated_three_soliton() -> Res<(Arc<SurfaceGrid>, GridSpec)> {
    let t = make_three_soliton();
    let g = three_soliton_grid();
    Ok((Arc::new(integrate_gauss_weingarten(&t, &g, &initial_frame(&t, &g)?)?), g))
}

fn scaled(c: f64, f: FieldRef) -> Res<FieldRef> {
    Ok(LinearCombination::new(vec![(c, f)])?)
}

// ---------------------------------------------------------------------------

fn residual_suite() -> Res<Outcome> {
    let start = Instant::now();
    let c = Vector3::new(0.3, -1.0, 0.4);
    let (sg_tol, closed_tol, quad_tol, gw_tol) = (1e-10, 1e-10, 1e-7, 1e-8);
    let (three, g3) = integrated_three_soliton()?;
    let mut cases: Vec<(Arc<dyn Surface>, GridSpec)> = vec![
        (Arc::new(pseudosphere()), kink_grid()),
        (Arc::new(dini_helicoid(0.5)), kink_grid()),
        (Arc::new(dini_helicoid(1.0)), kink_grid()),
        (Arc::new(kuen()), two_soliton_grid()),
    ];
    cases.push((three.clone(), g3));

    let (mut sg, mut closed, mut quad, mut gw, mut pairs) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0usize);
    // Φ₄ is outside the catalogue; its residual is reported relative to its size.
    let mut fourth = 0.0f64;
    for (surface, g) in &cases {
        let phi = surface.solution().clone();
        let mut h = Hierarchy::new(&phi, g, &Quadrature::default());
        let mut fields: Vec<FieldRef> =
            vec![translation_symmetry(&phi, Axis::X), translation_symmetry(&phi, Axis::Y), scaling_shadow(&phi)];
        for n in [-3, -2, -1, 1, 2, 3] {
            fields.push(h.pmkdv(n)?);
        }
        for n in [-3, -2, -1, 1, 2, 3] {
            fields.push(h.khorkova(n)?);
        }
        fields.push(normal_component(surface.clone(), c)?);
        let p4 = h.pmkdv(4)?;
        let (mut r4, mut s4) = (0.0f64, 0.0f64);
        for (x, y) in g.points() {
            r4 = r4.max(moutard_residual(&*p4, x, y)?);
            s4 = s4.max(p4.value(x, y)?.abs());
            sg = sg.max(phi.residual(x, y)?);
            gw = gw.max(gauss_weingarten_residual(&**surface, x, y)?);
        }
        for f in &fields {
            let mut worst = 0.0f64;
            for (x, y) in g.points() {
                worst = worst.max(moutard_residual(&**f, x, y)?);
            }
            match f.provenance() {
                Provenance::ClosedForm(_) => closed = closed.max(worst),
                Provenance::Quadrature { .. } => quad = quad.max(worst),
            }
            pairs += 1;
        }
        fourth = fourth.max(r4 / s4.max(1.0));
    }
    // Integrated frames are held to their own tolerance.
    let drift = three.compatibility.max(three.drift);
    let secs = start.elapsed().as_secs_f64();
    let pass = sg < sg_tol && closed < closed_tol && quad < quad_tol && gw < gw_tol && drift < 1e-6 && secs < 10.0;
    Outcome::new(
        pass,
        format!(
            "{pairs} pairs, sine-Gordon {sg:.1e}, Moutard closed-form {closed:.1e} / quadrature {quad:.1e}, GW {gw:.1e}, \
             integrated frame drift {drift:.1e}, {secs:.2} s; Phi4 relative Moutard {fourth:.1e}"
        ),
    )
}

fn right_helicoid(nets: &mut Nets) -> Res<Outcome> {
    let start = Instant::now();
    let s: Arc<dyn Surface> = Arc::new(pseudosphere());
    let g = GridSpec::spanning(0.5, 2.0, -0.187, 1.313, 101, 101)?;
    let field = scaled(-0.5, scaling_shadow(s.solution()))?;
    let net = build_voss_net(s, field, &g)?;
    let helicoid = |x: f64, y: f64| {
        let (u, v) = uv(x, y);
        Vector3::new(-v.sin() / u.sinh(), v.cos() / u.sinh(), v)
    };
    let shift = net.q[0] - helicoid(g.x0, g.y0);
    let err = g
        .points()
        .into_iter()
        .enumerate()
        .map(|(k, (x, y))| (net.q[k] - shift - helicoid(x, y)).amax())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    nets.keep("right helicoid", &net);
    Outcome::new(err < 1e-6 && secs < 5.0, format!("max deviation {err:.1e} on 101x101, {secs:.2} s"))
}

fn dini_curvatures(nets: &mut Nets) -> Res<Outcome> {
    let g = GridSpec::spanning(0.05, 1.05, -0.287, 0.713, 41, 41)?;
    let (mut k_err, mut h_err, mut k_alt, mut h_alt) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for gamma in [0.0f64, 0.5, 1.0] {
        let s: Arc<dyn Surface> = Arc::new(dini_helicoid(gamma));
        let field = scaled(-0.5, scaling_shadow(s.solution()))?;
        let net = build_voss_net(s, field, &g)?;
        let geo = forms_and_curvatures(&net);
        let (a, b) = (gamma.exp(), (-gamma).exp());
        for (k, (x, y)) in g.points().into_iter().enumerate() {
            let u = a * x + b * y;
            let (t4, ch2) = (u.tanh().powi(4), gamma.cosh().powi(2));
            k_err = k_err.max((geo.gauss[k] + t4 / (4.0 * ch2)).abs());
            h_err = h_err.max((geo.mean[k] + 0.5 * u.sinh() * gamma.tanh()).abs());
            k_alt = k_alt.max((geo.gauss[k] + t4 / ch2).abs());
            h_alt = h_alt.max((geo.mean[k] - 0.5 * u.sinh() * gamma.tanh()).abs());
        }
        nets.keep(&format!("dini helicoid {gamma}"), &net);
    }
    Outcome::new(
        k_err < 1e-8 && h_err < 1e-8,
        format!(
            "K vs -tanh^4 u/(4cosh^2 g) {k_err:.1e}, H vs -sinh u tanh g/2 {h_err:.1e} \
             (against -tanh^4 u/cosh^2 g: {k_alt:.1e}, +sinh u tanh g/2: {h_alt:.1e})"
        ),
    )
}

/// Largest distance of curve points from the nearest of `curves` in `(u, v)`;
/// infinite when there are no points.
fn locus_error(points: &[(f64, f64)], curves: &[&dyn Fn(f64, f64) -> f64]) -> f64 {
    if points.is_empty() {
        return f64::INFINITY;
    }
    points
        .iter()
        .map(|&(x, y)| {
            let (u, v) = uv(x, y);
            curves.iter().map(|c| c(u, v).abs()).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn koru_loci(nets: &mut Nets) -> Res<Outcome> {
    let s: Arc<dyn Surface> = Arc::new(kuen());
    let g = GridSpec::spanning(-1.2, 1.2, -1.187, 1.213, 49, 49)?;
    let field = scaled(0.25, translation_symmetry(s.solution(), Axis::X))?;
    let net = build_voss_net(s, field, &g)?;
    let ridges: Vec<(f64, f64)> = net.singular.ridges().flat_map(|p| p.points.clone()).collect();
    let blowups: Vec<(f64, f64)> = net.singular.blowups().flat_map(|p| p.points.clone()).collect();
    let ridge = locus_error(&ridges, &[&|u, v| 2.0 * v - (2.0 * u).sinh(), &|u, v| 2.0 * v + (2.0 * u).sinh()]);
    let blow = locus_error(&blowups, &[&|_, v| v, &|u, v| v - u.cosh(), &|u, v| v + u.cosh()]);
    nets.keep("koru", &net);
    Outcome::new(
        ridge < 1e-3 && blow < 1e-3,
        format!("ridge {ridge:.1e} over {} points, blow-up {blow:.1e} over {} points", ridges.len(), blowups.len()),
    )
}

fn recursion_identities() -> Res<Outcome> {
    let mut first = 0.0f64;
    let cases = [(make_kink(0.0), kink_grid()), (make_two_soliton(), two_soliton_grid()), (make_three_soliton(), three_soliton_grid())];
    for (phi, g) in &cases {
        // Q = φ_x²/2 at the base node makes RΦ₁ equal Φ₂ exactly.
        let u = phi.jet(g.x0, g.y0, 1)?.dx();
        let h = Hierarchy::new(phi, g, &Quadrature::default());
        let r = apply_r(h.pmkdv(1)?, g, &Quadrature::with_constants(vec![0.5 * u * u]))?;
        let p2 = h.pmkdv(2)?;
        for (x, y) in g.points() {
            first = first.max((r.value(x, y)? - p2.value(x, y)?).abs());
        }
    }

    let mut comp = 0.0f64;
    let mut constants = Vec::new();
    for (phi, g) in &cases[1..] {
        let f = scaling_shadow(phi);
        let back = apply_r_inverse(apply_r(f.clone(), g, &Quadrature::default())?, g, &Quadrature::default())?;
        let py = translation_symmetry(phi, Axis::Y);
        let rows: Vec<(f64, f64)> = g
            .points()
            .into_iter()
            .map(|(x, y)| Ok((back.value(x, y)? - f.value(x, y)?, py.value(x, y)?)))
            .collect::<Res<_>>()?;
        let (num, den) = rows.iter().fold((0.0, 0.0), |(a, b), r| (a + r.0 * r.1, b + r.1 * r.1));
        let c = num / den;
        comp = comp.max(rows.iter().map(|r| (r.0 - c * r.1).abs()).fold(0.0, f64::max));
        constants.push(c);
    }
    Outcome::new(
        first < 1e-7 && comp < 1e-6,
        format!("R Phi1 - Phi2 {first:.1e}; R'R Phi - Phi - C phi_y {comp:.1e} (C = {constants:.4?})"),
    )
}

fn degeneracy_certificates() -> Res<Outcome> {
    let c = Vector3::new(0.3, -1.0, 0.4);
    let mut degenerate_ok = true;
    let mut worst_rel = 0.0f64;
    let mut shadow_min_rel = f64::INFINITY;
    let mut shadow_flagged = false;

    for gamma in [0.0, 0.5, 1.0] {
        let k = make_kink(gamma);
        let cert = degeneracy_test(&*translation_symmetry(&k, Axis::X), &kink_grid())?;
        degenerate_ok &= cert.degenerate;
        worst_rel = worst_rel.max(cert.beltrami_rel_std);
    }
    let (three, g3) = integrated_three_soliton()?;
    let surfaces: Vec<(Arc<dyn Surface>, GridSpec)> = vec![
        (Arc::new(pseudosphere()), kink_grid()),
        (Arc::new(dini_helicoid(0.5)), kink_grid()),
        (Arc::new(dini_helicoid(1.0)), kink_grid()),
        (Arc::new(kuen()), two_soliton_grid()),
        (three, g3),
    ];
    for (s, g) in &surfaces {
        let cert = degeneracy_test(&*normal_component(s.clone(), c)?, g)?;
        degenerate_ok &= cert.degenerate;
        worst_rel = worst_rel.max(cert.beltrami_rel_std);
        let shadow = degeneracy_test(&*scaling_shadow(s.solution()), g)?;
        shadow_flagged |= shadow.degenerate;
        shadow_min_rel = shadow_min_rel.min(shadow.beltrami_rel_std);
    }
    let pass = degenerate_ok && worst_rel < 1e-6 && !shadow_flagged && shadow_min_rel > 1e-3;
    Outcome::new(
        pass,
        format!(
            "degenerate cases certified: {degenerate_ok}, Beltrami relative spread {worst_rel:.1e}; \
             scaling shadow spread >= {shadow_min_rel:.1e}"
        ),
    )
}

/// Largest deviation between the unit null vector and the unit `expect`,
/// up to sign. Infinite unless the null space is one-dimensional.
fn null_vector_gap(r: &DependencyReport, expect: &[f64]) -> f64 {
    let Some(v) = r.null_vectors.first() else { return f64::INFINITY };
    if r.null_vectors.len() != 1 || v.coefficients.len() != expect.len() {
        return f64::INFINITY;
    }
    let unit = |w: &[f64]| {
        let n = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        w.iter().map(|a| a / n).collect::<Vec<f64>>()
    };
    let (a, b) = (unit(&v.coefficients), unit(expect));
    let gap = |s: f64| a.iter().zip(&b).map(|(p, q)| (p - s * q).abs()).fold(0.0, f64::max);
    gap(1.0).min(gap(-1.0))
}

fn guichard_dimensions() -> Res<Outcome> {
    let k = make_kink(0.0);
    let gk = GridSpec::spanning(0.3, 1.3, -0.187, 0.813, 21, 21)?;
    let hk = Hierarchy::new(&k, &gk, &Quadrature::default());
    let d1 = voss_dimension(&[hk.pmkdv(1)?, scaling_shadow(&k)], &gk, 0)?;
    let kink_rel = dependency_rank_sampled(&[hk.pmkdv(1)?, hk.pmkdv(2)?], &gk, 0)?;
    let gap1 = null_vector_gap(&kink_rel, &[1.0, -1.0]);

    let t = make_two_soliton();
    let g2 = GridSpec::spanning(0.33, 0.93, 0.2, 0.8, 7, 7)?;
    let mut h2 = Hierarchy::new(&t, &g2, &Quadrature::default());
    let d2 = voss_dimension(&[h2.pmkdv(1)?, h2.pmkdv(2)?, h2.khorkova(1)?], &g2, 0)?;
    // a Φ₁ + b Φ₂ + c Φ̄₁ with a = 0, c = −3b.
    let gap2 = null_vector_gap(&d2, &[0.0, 1.0, -3.0]);

    let t3 = make_three_soliton();
    let g3 = GridSpec::spanning(0.4, 1.4, -0.35, 0.65, 11, 11)?;
    let h3 = Hierarchy::new(&t3, &g3, &Quadrature::default());
    let d3 = voss_dimension(&[scaling_shadow(&t3), h3.pmkdv(3)?, h3.pmkdv(2)?, h3.pmkdv(1)?], &g3, 0)?;
    let rel3 = dependency_rank_sampled(&[h3.pmkdv(4)?, h3.pmkdv(3)?, h3.pmkdv(2)?, h3.pmkdv(1)?], &g3, 0)?;
    let gap3 = null_vector_gap(&rel3, &[1.0, -3.0, 3.0, -1.0]);

    let dims = [d1.voss_dimension, d2.voss_dimension, d3.voss_dimension];
    let found = d2.null_vectors.first().map(|v| v.coefficients.clone()).unwrap_or_default();
    let pass = dims == [Some(1), Some(2), Some(3)] && gap1 < 1e-6 && gap2 < 1e-6 && gap3 < 1e-6;
    Outcome::new(
        pass,
        format!(
            "dimensions {dims:?}; kink (1,-1) gap {gap1:.1e}, two-soliton (a=0, c=-3b) gap {gap2:.1e} \
             (null vector {found:.6?}), three-soliton (1,-3,3,-1) gap {gap3:.1e}"
        ),
    )
}

fn inverse_round_trip() -> Res<Outcome> {
    let ps: Arc<dyn Surface> = Arc::new(pseudosphere());
    let ku: Arc<dyn Surface> = Arc::new(kuen());
    let cases = [
        (ps.clone(), GridSpec::spanning(0.1, 1.3, 0.1, 1.3, 61, 61)?),
        (ku.clone(), GridSpec::spanning(0.6, 1.2, 0.0, 0.4, 61, 61)?),
    ];
    let mut trip = 0.0f64;
    let (mut diff, mut sum) = (0.0f64, 0.0f64);
    for (s, g) in &cases {
        let phi = s.solution().clone();
        let base = (g.x0, g.y0);
        let psis = [normal_component(s.clone(), Vector3::new(0.0, 1.0, 0.0))?, scaling_shadow(&phi)];
        for psi in psis {
            let inv = apply_r_plus_id_inverse(psi.clone(), s.clone(), g, base, Vector3::zeros())?;
            trip = trip.max(round_trip(inv, &*psi, g, &Quadrature::default())?.residual);
        }
        // X̃ of Ψ = RΦ + Φ against X of Φ for the scaling shadow.
        let f = scaling_shadow(&phi);
        let psi = LinearCombination::new(vec![(1.0, apply_r(f.clone(), g, &Quadrature::default())?), (1.0, f.clone())])?;
        let xy = xy_fields(&*f, g)?;
        for (k, (x, y)) in g.points().into_iter().enumerate() {
            let (xt, _) = tilde_fields(&*psi, x, y)?;
            diff = diff.max((xt - xy.x[k]).abs());
            sum = sum.max((xt + xy.x[k]).abs());
        }
    }
    Outcome::new(
        trip < 1e-6 && diff < 1e-6,
        format!("round trip {trip:.1e} on 61x61; max|X~ - X| {diff:.1e} (max|X~ + X| {sum:.1e})"),
    )
}

fn voss_arch(nets: &mut Nets) -> Res<Outcome> {
    let s: Arc<dyn Surface> = Arc::new(pseudosphere());
    let g = GridSpec::spanning(0.1, 1.3, 0.1, 1.3, 41, 41)?;
    let psi = normal_component(s.clone(), Vector3::new(0.0, 1.0, 0.0))?;
    let net = build_tilde_net(psi, s, &g, (g.x0, g.y0), Vector3::zeros())?;
    let ridges: Vec<(f64, f64)> = net.singular.ridges().flat_map(|p| p.points.clone()).collect();
    let ridge = if ridges.is_empty() {
        f64::INFINITY
    } else {
        ridges.iter().map(|&(x, y)| ((x + y).tanh().abs() - (x - y).tan().abs()).abs()).fold(0.0, f64::max)
    };
    let spine: Vec<Vector3<f64>> = spinal_curve(&net).into_iter().map(|p| p.1).collect();
    let fit = fit_catenary(&spine)?;
    nets.keep("arch", &net);
    Outcome::new(
        ridge < 1e-3 && fit.residual < 1e-4,
        format!("radioid {ridge:.1e} over {} points, catenary residual {:.1e} (a = {:.6})", ridges.len(), fit.residual, fit.a),
    )
}

fn property_suite(nets: &Nets, started: Instant) -> Res<Outcome> {
    let mut worst = NetDiagnostics::default();
    let mut failing = Vec::new();
    for (name, d) in &nets.0 {
        let ok = d.conjugacy < 1e-5 && d.geodesic < 1e-5 && d.support < 1e-8 && d.xy_system < 1e-6;
        if !ok {
            failing.push(name.as_str());
        }
        worst.conjugacy = worst.conjugacy.max(d.conjugacy);
        worst.geodesic = worst.geodesic.max(d.geodesic);
        worst.support = worst.support.max(d.support);
        worst.xy_system = worst.xy_system.max(d.xy_system);
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome::new(
        !nets.0.is_empty() && failing.is_empty() && secs < 60.0,
        format!(
            "{} nets, conjugacy {:.1e}, geodesic {:.1e}, support {:.1e}, XY system {:.1e}, {secs:.1} s total{}",
            nets.0.len(),
            worst.conjugacy,
            worst.geodesic,
            worst.support,
            worst.xy_system,
            if failing.is_empty() { String::new() } else { format!("; failing: {failing:?}") }
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut nets = Nets::default();
    let mut results: Vec<(u32, &str, Res<Outcome>)> = vec![
        (1, "residual suite", residual_suite()),
        (2, "right helicoid", right_helicoid(&mut nets)),
        (3, "Dini helicoid curvatures", dini_curvatures(&mut nets)),
        (4, "koru singular loci", koru_loci(&mut nets)),
        (5, "recursion operator identities", recursion_identities()),
        (6, "degeneracy certificates", degeneracy_certificates()),
        (7, "Guichard dimensions", guichard_dimensions()),
        (8, "inverse round trip", inverse_round_trip()),
        (9, "Voss arch", voss_arch(&mut nets)),
    ];
    results.push((10, "net property suite", property_suite(&nets, started)));

    let mut failed = 0;
    for (n, name, r) in results {
        let (pass, detail) = match r {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {n:>2} {}: {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of 10 criteria pass", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
