//! Stages of a run and the subcommands built from them.

use std::cell::{OnceCell, RefCell};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Vector3;
use voss_core::catalog::{ClosedFormSurface, SGSolution};
use voss_core::frames::{gauss_weingarten_residual, integrate_gauss_weingarten, Frame, Surface, SurfaceGrid};
use voss_core::grid::GridSpec;
use voss_core::jets::ScalarField;
use voss_core::inverse::{
    apply_r_plus_id_inverse, build_tilde_net, fit_catenary, inverse_system_residual, matrix_form_discrepancy,
    round_trip, spinal_curve, voss_arch_singular_locus,
};
use voss_core::sequences::{guichard_sequence, voss_dimension, Hierarchy, SequenceSeed};
use voss_core::symmetries::{
    apply_r, apply_r_inverse, moutard_residual, normal_component, scaling_shadow, translation_symmetry, FieldRef,
    LinearCombination, Quadrature,
};
use voss_core::voss::{build_voss_net, forms_and_curvatures, singular_locus, VossNet};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, InStage};
use crate::export::{export_obj, write_flagged_csv, write_grid_csv, write_intersections_csv, write_polylines_csv, GridTable};
use crate::references::{reference_checks, reference_net};
use crate::report::{SequenceSummary, VerificationReport};
use crate::symspec::{self, SymExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Surface,
    Symmetry,
    Voss,
    Inverse,
    Sequence,
    Dimension,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Surface => "surface",
            Command::Symmetry => "symmetry",
            Command::Voss => "voss",
            Command::Inverse => "inverse",
            Command::Sequence => "sequence",
            Command::Dimension => "dimension",
            Command::Verify => "verify",
        }
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        [
            Command::Surface,
            Command::Symmetry,
            Command::Voss,
            Command::Inverse,
            Command::Sequence,
            Command::Dimension,
            Command::Verify,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| CliError::Config(format!("unknown command '{s}'")))
    }
}

/// Shared state of one run: the solution, the lazily built surface and the
/// hierarchy whose potentials all members share.
pub struct Context {
    pub cfg: RunConfig,
    pub phi: SGSolution,
    pub quad: Quadrature,
    surface: OnceCell<Arc<dyn Surface>>,
    hierarchy: RefCell<Hierarchy>,
}

/// Frame at a grid origin for integrating a surface from its solution alone.
fn initial_frame(phi: &SGSolution, x: f64, y: f64) -> voss_core::Result<Frame> {
    let (s, c) = phi.value(x, y)?.sin_cos();
    Ok(Frame { r: Vector3::zeros(), rx: Vector3::x(), ry: Vector3::new(c, s, 0.0), n: Vector3::z() })
}

impl Context {
    pub fn new(cfg: &RunConfig) -> CliResult<Self> {
        let phi = SGSolution::from_id(&cfg.solution).in_stage("config")?;
        let quad = Quadrature { base: cfg.base, constants: cfg.constants.clone() };
        let hierarchy = RefCell::new(Hierarchy::new(&phi, &cfg.grid, &quad));
        Ok(Context { cfg: cfg.clone(), phi, quad, surface: OnceCell::new(), hierarchy })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.cfg.grid
    }

    pub fn surface(&self) -> CliResult<Arc<dyn Surface>> {
        if let Some(s) = self.surface.get() {
            return Ok(s.clone());
        }
        let s: Arc<dyn Surface> = if self.cfg.surface == "gw" {
            let g = self.grid();
            let f0 = initial_frame(&self.phi, g.x0, g.y0).in_stage("surface")?;
            Arc::new(integrate_gauss_weingarten(&self.phi, g, &f0).in_stage("surface")?)
        } else {
            Arc::new(ClosedFormSurface::from_id(&self.cfg.surface).in_stage("surface")?)
        };
        Ok(self.surface.get_or_init(|| s).clone())
    }

    pub fn field(&self, e: &SymExpr) -> CliResult<FieldRef> {
        let (grid, quad) = (self.grid(), &self.quad);
        let f = match e {
            SymExpr::Sum(terms) => {
                let terms = terms.iter().map(|(c, t)| Ok((*c, self.field(t)?))).collect::<CliResult<Vec<_>>>()?;
                LinearCombination::new(terms).in_stage("symmetry")?
            }
            SymExpr::Pmkdv(n) => self.hierarchy.borrow().pmkdv(*n).in_stage("symmetry")?,
            SymExpr::Khorkova(n) => self.hierarchy.borrow_mut().khorkova(*n).in_stage("symmetry")?,
            SymExpr::Translate(axis) => translation_symmetry(&self.phi, *axis),
            SymExpr::Scaling => scaling_shadow(&self.phi),
            SymExpr::Normal(c) => normal_component(self.surface()?, Vector3::from(*c)).in_stage("symmetry")?,
            SymExpr::R(inner) => apply_r(self.field(inner)?, grid, quad).in_stage("symmetry")?,
            SymExpr::RInv(inner) => apply_r_inverse(self.field(inner)?, grid, quad).in_stage("symmetry")?,
            SymExpr::RPlusIdInv(inner) => {
                let psi = self.field(inner)?;
                let anchor = Vector3::from(self.cfg.anchor);
                apply_r_plus_id_inverse(psi, self.surface()?, grid, self.cfg.base_point(), anchor).in_stage("inverse")?
            }
        };
        Ok(f)
    }

    pub fn symmetry(&self) -> CliResult<(SymExpr, FieldRef)> {
        let spec = self.cfg.symmetry.as_deref().ok_or_else(|| CliError::Config("no `symmetry` configured".into()))?;
        let e = symspec::parse(spec)?;
        let f = self.field(&e)?;
        Ok((e, f))
    }
}

/// Output directory plus the report that lists what was written there.
struct Sink<'a> {
    dir: &'a Path,
}

impl Sink<'_> {
    fn path(&self, rep: &mut VerificationReport, name: &str) -> PathBuf {
        rep.artifact(name);
        self.dir.join(name)
    }
}

fn max_over(grid: &GridSpec, f: impl Fn(f64, f64) -> voss_core::Result<f64>) -> voss_core::Result<f64> {
    let mut m = 0.0f64;
    for (x, y) in grid.points() {
        let v = f(x, y)?;
        m = if v.is_nan() { f64::NAN } else { m.max(v) };
    }
    Ok(m)
}

fn surface_stage(ctx: &Context, rep: &mut VerificationReport, sink: &Sink) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let g = ctx.grid();
    let sg = max_over(g, |x, y| ctx.phi.residual(x, y)).in_stage("surface")?;
    rep.check("sine_gordon", sg, cfg.tol("sine_gordon"));
    let surface = ctx.surface()?;
    let frames = SurfaceGrid::sample(&*surface, g).in_stage("surface")?;
    let gw = max_over(g, |x, y| gauss_weingarten_residual(&*surface, x, y)).in_stage("surface")?;
    rep.check("gauss_weingarten", gw, cfg.tol("gauss_weingarten"));
    rep.check("frame", frames.drift, cfg.tol("frame"));
    if g.len() == 1 {
        rep.frame = Some(frames.frames[0]);
    }
    let r: Vec<Vector3<f64>> = frames.frames.iter().map(|f| f.r).collect();
    export_obj(&sink.path(rep, "surface.obj"), g, &r, cfg.obj_lines)?;
    let phi: Vec<f64> = g.points().iter().map(|&(x, y)| ctx.phi.value(x, y)).collect::<voss_core::Result<_>>().in_stage("surface")?;
    let comp = |k: usize, f: fn(&Frame) -> Vector3<f64>| frames.frames.iter().map(|fr| f(fr)[k]).collect::<Vec<f64>>();
    let table = GridTable::new(g)
        .column("phi", phi)
        .column("r_x", comp(0, |f| f.r))
        .column("r_y", comp(1, |f| f.r))
        .column("r_z", comp(2, |f| f.r))
        .column("n_x", comp(0, |f| f.n))
        .column("n_y", comp(1, |f| f.n))
        .column("n_z", comp(2, |f| f.n));
    write_grid_csv(&sink.path(rep, "surface.csv"), g, &table)
}

fn symmetry_stage(ctx: &Context, rep: &mut VerificationReport, sink: &Sink) -> CliResult<(SymExpr, FieldRef)> {
    let cfg = &ctx.cfg;
    let g = ctx.grid();
    let (e, f) = ctx.symmetry()?;
    let pots = f.potentials();
    let m = max_over(g, |x, y| moutard_residual(&*f, x, y)).in_stage("symmetry")?;
    if pots.is_empty() {
        rep.check("moutard", m, cfg.tol("moutard"));
    } else {
        rep.check("moutard_quadrature", m, cfg.tol("moutard_quadrature"));
        let closed = pots.iter().map(|p| p.closedness).fold(0.0, f64::max);
        rep.check("closedness", closed, cfg.tol("closedness"));
        rep.metric("potential_path_discrepancy", pots.iter().map(|p| p.path_discrepancy).fold(0.0, f64::max));
    }
    let values: Vec<f64> = g.points().iter().map(|&(x, y)| f.value(x, y)).collect::<voss_core::Result<_>>().in_stage("symmetry")?;
    write_grid_csv(&sink.path(rep, "field.csv"), g, &GridTable::new(g).column("Phi", values))?;
    Ok((e, f))
}

fn net_checks(ctx: &Context, rep: &mut VerificationReport, net: &VossNet, prefix: &str) {
    let cfg = &ctx.cfg;
    let d = net.diagnostics;
    rep.check(format!("{prefix}conjugacy"), d.conjugacy, cfg.tol("conjugacy"));
    rep.check(format!("{prefix}geodesic"), d.geodesic, cfg.tol("geodesic"));
    rep.check(format!("{prefix}support"), d.support, cfg.tol("support"));
    rep.check(format!("{prefix}xy_system"), d.xy_system, cfg.tol("xy_system"));
    rep.metric(format!("{prefix}tangency"), d.tangency);
}

fn export_net(ctx: &Context, rep: &mut VerificationReport, sink: &Sink, net: &VossNet, stem: &str) -> CliResult<()> {
    let g = &net.grid;
    let bad = export_obj(&sink.path(rep, &format!("{stem}.obj")), g, &net.q, ctx.cfg.obj_lines)?;
    let mut flagged = net.flagged_nodes(ctx.cfg.blowup_cap);
    flagged.extend(bad);
    flagged.sort_unstable();
    flagged.dedup();
    rep.metric(format!("{stem}.flagged_nodes"), flagged.len() as f64);
    write_flagged_csv(&sink.path(rep, &format!("{stem}_flagged.csv")), net, &flagged)?;
    let comp = |k: usize| net.q.iter().map(|q| q[k]).collect::<Vec<f64>>();
    let table = GridTable::new(g)
        .column("q_x", comp(0))
        .column("q_y", comp(1))
        .column("q_z", comp(2))
        .column("X", net.xy.x.clone())
        .column("Y", net.xy.y.clone())
        .column("support", net.support.clone());
    write_grid_csv(&sink.path(rep, &format!("{stem}.csv")), g, &table)
}

/// Builds the net of the configured symmetry. A bare `rplusid_inv:(Ψ)` is
/// built directly from `Ψ` as the inverse-operator net.
fn voss_stage(ctx: &Context, rep: &mut VerificationReport, sink: &Sink, e: &SymExpr, f: FieldRef) -> CliResult<VossNet> {
    let surface = ctx.surface()?;
    let g = ctx.grid();
    let net = match e {
        SymExpr::RPlusIdInv(inner) => {
            let psi = ctx.field(inner)?;
            let anchor = Vector3::from(ctx.cfg.anchor);
            build_tilde_net(psi, surface, g, ctx.cfg.base_point(), anchor).in_stage("voss")?
        }
        _ => build_voss_net(surface, f, g).in_stage("voss")?,
    };
    net_checks(ctx, rep, &net, "");
    let geo = forms_and_curvatures(&net);
    rep.metric("first_form_jet_discrepancy", geo.jet_discrepancy);
    rep.metric("first_form_mesh_discrepancy", geo.mesh_discrepancy);
    let locus = singular_locus(&net);
    rep.metric("singular_polylines", locus.polylines.len() as f64);
    rep.metric("singular_intersections", locus.intersections.len() as f64);
    export_net(ctx, rep, sink, &net, "net")?;
    write_polylines_csv(&sink.path(rep, "singular.csv"), &locus)?;
    write_intersections_csv(&sink.path(rep, "intersections.csv"), &locus)?;
    let base = g.nearest(ctx.cfg.base_point().0, ctx.cfg.base_point().1);
    if let Some(reference) = reference_net(&ctx.cfg) {
        let anchored = net.anchored(base);
        let (bx, by) = g.point(base.0, base.1);
        let r0 = reference(bx, by);
        let err = g
            .points()
            .iter()
            .zip(&anchored)
            .map(|(&(x, y), q)| (q - (reference(x, y) - r0)).amax())
            .fold(0.0, |m: f64, v| if v.is_nan() { f64::NAN } else { m.max(v) });
        rep.check("reference", err, ctx.cfg.tol("reference"));
    }
    reference_checks(&ctx.cfg, &net, rep);
    if matches!(e, SymExpr::RPlusIdInv(_)) {
        let (arch, worst) = voss_arch_singular_locus(&net);
        write_polylines_csv(&sink.path(rep, "radioid.csv"), &arch)?;
        rep.metric("radioid_residual", worst);
        let spine: Vec<Vector3<f64>> = spinal_curve(&net).into_iter().map(|p| p.1).collect();
        if let Ok(fit) = fit_catenary(&spine) {
            rep.metric("catenary_a", fit.a);
            rep.metric("catenary_planarity", fit.planarity);
            rep.metric("catenary_residual", fit.residual);
        }
    }
    Ok(net)
}

/// `(R + Id)⁻¹Ψ` for the configured `Ψ` (the argument of a top-level
/// `rplusid_inv`, otherwise the symmetry itself).
fn inverse_stage(ctx: &Context, rep: &mut VerificationReport, sink: &Sink, e: &SymExpr) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let g = ctx.grid();
    let psi = match e {
        SymExpr::RPlusIdInv(inner) => ctx.field(inner)?,
        other => ctx.field(other)?,
    };
    let inv = apply_r_plus_id_inverse(psi.clone(), ctx.surface()?, g, cfg.base_point(), Vector3::from(cfg.anchor))
        .in_stage("inverse")?;
    let field: FieldRef = inv.clone();
    let rt = round_trip(field.clone(), &*psi, g, &ctx.quad).in_stage("inverse")?;
    rep.check("round_trip", rt.residual, cfg.tol("round_trip"));
    rep.metric("round_trip_constant", rt.constant);
    let md = matrix_form_discrepancy(&inv, g).in_stage("inverse")?;
    rep.check("matrix_form", md, cfg.tol("matrix_form"));
    rep.check("inverse_closedness", inv.potential().closedness(), cfg.tol("closedness"));
    let sys = max_over(g, |x, y| inverse_system_residual(&*field, &*psi, x, y)).in_stage("inverse")?;
    rep.metric("inverse_system_residual", sys);
    let values: Vec<f64> = g.points().iter().map(|&(x, y)| field.value(x, y)).collect::<voss_core::Result<_>>().in_stage("inverse")?;
    write_grid_csv(&sink.path(rep, "inverse.csv"), g, &GridTable::new(g).column("Phi", values))
}

fn parse_seed(ctx: &Context, text: &str) -> CliResult<SequenceSeed> {
    let bad = || CliError::Config(format!("sequence seed '{text}': expected pmkdv:<n>, khorkova:<n> or recursion:(<spec>)"));
    let (name, arg) = text.split_once(':').ok_or_else(bad)?;
    match name.trim() {
        "pmkdv" => Ok(SequenceSeed::Pmkdv(arg.trim().parse().map_err(|_| bad())?)),
        "khorkova" => Ok(SequenceSeed::Khorkova(arg.trim().parse().map_err(|_| bad())?)),
        "recursion" => Ok(SequenceSeed::Recursion(ctx.field(&symspec::parse(arg)?)?)),
        _ => Err(bad()),
    }
}

fn sequence_stage(ctx: &Context, rep: &mut VerificationReport, sink: &Sink) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let text = cfg.sequence.as_deref().ok_or_else(|| CliError::Config("no `sequence` seed configured".into()))?;
    let seed = parse_seed(ctx, text)?;
    let seq = guichard_sequence(ctx.surface()?, &seed, cfg.direction, cfg.max_n, ctx.grid(), &ctx.quad).in_stage("sequence")?;
    for (k, net) in seq.nets.iter().enumerate() {
        net_checks(ctx, rep, net, &format!("net{k}."));
        export_net(ctx, rep, sink, net, &format!("net{k}"))?;
    }
    rep.sequence = Some(SequenceSummary {
        seed: text.to_string(),
        direction: cfg.direction,
        members: seq.members.clone(),
        nets: seq.nets.len(),
        certificates: seq.certificates.clone(),
        halt: seq.halt.clone(),
    });
    Ok(())
}

fn dimension_stage(ctx: &Context, rep: &mut VerificationReport) -> CliResult<()> {
    let cfg = &ctx.cfg;
    if cfg.members.is_empty() {
        return Err(CliError::Config("no `members` configured (separate specifiers with ';')".into()));
    }
    let members = cfg
        .members
        .iter()
        .map(|m| ctx.field(&symspec::parse(m)?))
        .collect::<CliResult<Vec<_>>>()?;
    let r = voss_dimension(&members, ctx.grid(), cfg.sample_seed).in_stage("dimension")?;
    rep.metric("rank", r.rank as f64);
    rep.dependency = Some(r);
    Ok(())
}

/// Runs one subcommand, writing its artifacts and `report.json` to the
/// configured output directory.
pub fn run_pipeline(cfg: &RunConfig, command: Command) -> CliResult<VerificationReport> {
    let dir = cfg.out.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let sink = Sink { dir: &dir };
    let ctx = Context::new(cfg)?;
    let mut rep = VerificationReport::new(command.name(), cfg);
    match command {
        Command::Surface => surface_stage(&ctx, &mut rep, &sink)?,
        Command::Symmetry => {
            symmetry_stage(&ctx, &mut rep, &sink)?;
        }
        Command::Voss => {
            let (e, f) = symmetry_stage(&ctx, &mut rep, &sink)?;
            voss_stage(&ctx, &mut rep, &sink, &e, f)?;
        }
        Command::Inverse => {
            let e = symspec::parse(cfg.symmetry.as_deref().ok_or_else(|| CliError::Config("no `symmetry` configured".into()))?)?;
            inverse_stage(&ctx, &mut rep, &sink, &e)?;
        }
        Command::Sequence => sequence_stage(&ctx, &mut rep, &sink)?,
        Command::Dimension => dimension_stage(&ctx, &mut rep)?,
        Command::Verify => {
            surface_stage(&ctx, &mut rep, &sink)?;
            let (e, f) = symmetry_stage(&ctx, &mut rep, &sink)?;
            if matches!(e, SymExpr::RPlusIdInv(_)) {
                inverse_stage(&ctx, &mut rep, &sink, &e)?;
            }
            voss_stage(&ctx, &mut rep, &sink, &e, f)?;
        }
    }
    rep.artifact("report.json");
    rep.write(&dir.join("report.json"))?;
    Ok(rep)
}
