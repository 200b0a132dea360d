//! Closed-form nets and singular curves of the bundled presets.

use nalgebra::Vector3;
use voss_core::inverse::{fit_catenary, spinal_curve, voss_arch_singular_locus};
use voss_core::voss::VossNet;

use crate::config::{RunConfig, PRESETS};
use crate::report::VerificationReport;

pub type NetFormula = Box<dyn Fn(f64, f64) -> Vector3<f64>>;

fn uv(x: f64, y: f64) -> (f64, f64) {
    (x + y, x - y)
}

fn preset_value(preset: &str, key: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == preset)?.1.iter().find(|e| e.0 == key).map(|e| e.1)
}

/// The preset's closed forms apply only while its surface family and
/// symmetry are unchanged.
fn untouched(preset: &str, cfg: &RunConfig) -> bool {
    let same_symmetry = cfg.symmetry.as_deref() == preset_value(preset, "symmetry");
    let same_surface = match preset {
        "dini-helicoid" => cfg.surface.starts_with("dini:"),
        _ => Some(cfg.surface.as_str()) == preset_value(preset, "surface"),
    };
    same_symmetry && same_surface
}

fn right_helicoid(x: f64, y: f64) -> Vector3<f64> {
    let (u, v) = uv(x, y);
    Vector3::new(-v.sin() / u.sinh(), v.cos() / u.sinh(), v)
}

fn koru(x: f64, y: f64) -> Vector3<f64> {
    let (u, v) = uv(x, y);
    let (ch, sh) = (u.cosh(), u.sinh());
    let d = v * ch.powi(3) - v.powi(3) * ch;
    Vector3::new(
        (v * v.sin() - sh * sh * v.cos()) / d,
        -(v * v.cos() + sh * sh * v.sin()) / d,
        0.5 * (sh.powi(3) - (v * v + 1.0) * sh) / d,
    )
}

fn eared_screw(x: f64, y: f64) -> Vector3<f64> {
    let (u, v) = uv(x, y);
    let (ch, sh) = (u.cosh(), u.sinh());
    let d = ch * (ch * ch - v * v);
    let a = (2.0 * u + (2.0 * u).sinh()) / d;
    let b = (u - u * (2.0 * u).cosh() + (1.0 - v * v) * (2.0 * u).sinh()) / (v * d);
    let z = (v.powi(4) * ch - v * v * (ch.powi(3) + ch + u * sh) + (1.0 - sh * sh) * (ch - u * sh)) / (v * d);
    Vector3::new(a * v.sin() + b * v.cos(), b * v.sin() - a * v.cos(), z)
}

fn arch(x: f64, y: f64) -> Vector3<f64> {
    let (u, v) = uv(x, y);
    let t = u.tanh();
    Vector3::new((1.0 - (2.0 * v).cos()) / (4.0 * t) - u / 2.0, -(2.0 * v).sin() / (4.0 * t), 0.5 * v.cos() * u.cosh())
}

/// Closed-form net of a preset, up to translation.
pub fn reference_net(cfg: &RunConfig) -> Option<NetFormula> {
    let preset = cfg.preset.as_deref()?;
    if !untouched(preset, cfg) {
        return None;
    }
    match preset {
        "pseudosphere-helicoid" | "right-helicoid" => Some(Box::new(right_helicoid)),
        "dini-helicoid" => {
            let gamma: f64 = cfg.surface.strip_prefix("dini:")?.parse().ok()?;
            let (a, b, sg) = (gamma.exp(), (-gamma).exp(), gamma.sinh());
            Some(Box::new(move |x, y| {
                let (u, v) = (a * x + b * y, x - y);
                Vector3::new(-v.sin() / u.sinh(), v.cos() / u.sinh(), v + (u - 1.0 / u.tanh()) * sg)
            }))
        }
        "koru" => Some(Box::new(koru)),
        "eared-screw" => Some(Box::new(eared_screw)),
        "arch" => Some(Box::new(arch)),
        _ => None,
    }
}

/// Largest distance of the net's singular points from the preset's curves,
/// given as residual functions of `(u, v)`. NaN when a family is empty.
fn locus_error<'a>(points: impl Iterator<Item = &'a (f64, f64)>, curves: &[&dyn Fn(f64, f64) -> f64]) -> f64 {
    let mut worst = f64::NAN;
    for &(x, y) in points {
        let (u, v) = uv(x, y);
        let e = curves.iter().map(|c| c(u, v).abs()).fold(f64::INFINITY, f64::min);
        worst = if worst.is_nan() { e } else { worst.max(e) };
    }
    worst
}

/// Preset-specific checks on the singular curves and the arch spine.
pub fn reference_checks(cfg: &RunConfig, net: &VossNet, rep: &mut VerificationReport) {
    let Some(preset) = cfg.preset.as_deref() else { return };
    if !untouched(preset, cfg) {
        return;
    }
    let tol = cfg.tol("locus");
    let ridges = || net.singular.ridges().flat_map(|p| p.points.iter());
    let blowups = || net.singular.blowups().flat_map(|p| p.points.iter());
    match preset {
        "koru" => {
            let e = locus_error(ridges(), &[&|u, v| 2.0 * v - (2.0 * u).sinh(), &|u, v| 2.0 * v + (2.0 * u).sinh()]);
            rep.check("ridge_locus", e, tol);
            let e = locus_error(blowups(), &[&|_, v| v, &|u, v| v - u.cosh(), &|u, v| v + u.cosh()]);
            rep.check("blowup_locus", e, tol);
        }
        "eared-screw" => {
            let ridge = |s: f64| {
                move |u: f64, v: f64| {
                    (v * v - 1.0) * (2.0 * u).cosh() + (u + s * v) * (2.0 * u).sinh() + v * v + s * 2.0 * u * v - 1.0
                }
            };
            let (plus, minus) = (ridge(1.0), ridge(-1.0));
            rep.check("ridge_locus", locus_error(ridges(), &[&plus, &minus]), tol);
            // The net carries a factor 1/v, so v = 0 blows up as well.
            let e = locus_error(blowups(), &[&|_, v| v, &|u, v| v - u.cosh(), &|u, v| v + u.cosh()]);
            rep.check("blowup_locus", e, tol);
        }
        "arch" => {
            let (_, worst) = voss_arch_singular_locus(net);
            let any = net.singular.ridges().any(|p| !p.points.is_empty());
            rep.check("radioid_locus", if any { worst } else { f64::NAN }, tol);
            let spine: Vec<Vector3<f64>> = spinal_curve(net).into_iter().map(|p| p.1).collect();
            let fit = fit_catenary(&spine).map(|f| f.residual).unwrap_or(f64::NAN);
            rep.check("catenary", fit, cfg.tol("catenary"));
        }
        _ => {}
    }
}
