//! Exact sine-Gordon solutions and their closed-form pseudospherical surfaces.
//!
//! Coordinates are asymptotic Chebyshev coordinates `(x, y)`; the helpers
//! below use `u = x + y` (or `e^γ x + e^{-γ} y` for the kinks) and `v = x - y`.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VossError};
use crate::frames::{Frame, FrameJet, Surface};
use crate::jets::{AnalyticField, Jet2, ScalarField, VectorField};

/// Exclusion radius for `|sin φ|` used by every grid-based construction.
pub const EPS_CHART: f64 = 1e-6;
/// Threshold below which a single closed-form frame is declared singular.
pub const EPS_FRAME: f64 = 1e-12;

/// `4 arctan(e^w)` with the large-argument branch folded so `e^w` never overflows.
pub fn four_atan_exp(w: Jet2) -> Jet2 {
    if w.value() > 0.0 {
        2.0 * PI - (-w).exp().atan() * 4.0
    } else {
        w.exp().atan() * 4.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SolutionKind {
    Kink { gamma: f64 },
    TwoSoliton,
    ThreeSoliton,
}

/// A sine-Gordon solution `φ_xy = sin φ`, optionally with `x` and `y` swapped.
#[derive(Clone, Debug)]
pub struct SGSolution {
    kind: SolutionKind,
    transposed: bool,
    phi: AnalyticField,
}

pub fn make_kink(gamma: f64) -> SGSolution {
    let (a, b) = (gamma.exp(), (-gamma).exp());
    SGSolution {
        kind: SolutionKind::Kink { gamma },
        transposed: false,
        phi: AnalyticField::new("kink", vec![("gamma".into(), gamma)], move |x, y| {
            four_atan_exp(x * a + y * b)
        }),
    }
}

pub fn make_two_soliton() -> SGSolution {
    SGSolution {
        kind: SolutionKind::TwoSoliton,
        transposed: false,
        phi: AnalyticField::new("two-soliton", vec![], |x, y| ((x - y) * (x + y).sech()).atan() * 4.0),
    }
}

pub fn make_three_soliton() -> SGSolution {
    SGSolution {
        kind: SolutionKind::ThreeSoliton,
        transposed: false,
        phi: AnalyticField::new("three-soliton", vec![], |x, y| {
            let u = x + y;
            let v = x - y;
            let v2 = v * v;
            let sech = u.sech();
            // (u cosh u - v² sinh u)/(v² + cosh² u), divided through by cosh² u.
            let num = (u - v2 * u.tanh()) * sech;
            let den = v2 * sech * sech + 1.0;
            (num / den).atan() * 4.0 + four_atan_exp(u)
        }),
    }
}

impl SGSolution {
    pub fn kind(&self) -> SolutionKind {
        self.kind
    }

    pub fn is_transposed(&self) -> bool {
        self.transposed
    }

    /// The solution `φ(y, x)`, which again solves the sine-Gordon equation.
    pub fn transposed(&self) -> SGSolution {
        SGSolution { transposed: !self.transposed, ..self.clone() }
    }

    /// Catalogue identifier such as `kink:0.5` or `two-soliton`.
    pub fn id(&self) -> String {
        let base = match self.kind {
            SolutionKind::Kink { gamma } => format!("kink:{gamma}"),
            SolutionKind::TwoSoliton => "two-soliton".into(),
            SolutionKind::ThreeSoliton => "three-soliton".into(),
        };
        if self.transposed {
            format!("{base}^T")
        } else {
            base
        }
    }

    pub fn from_id(id: &str) -> Result<SGSolution> {
        let id = id.trim();
        match id {
            "two-soliton" => Ok(make_two_soliton()),
            "three-soliton" => Ok(make_three_soliton()),
            "kink" => Ok(make_kink(0.0)),
            _ => match id.strip_prefix("kink:") {
                Some(g) => g
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|g| g.is_finite())
                    .map(make_kink)
                    .ok_or_else(|| VossError::Config(format!("bad kink parameter in '{id}'"))),
                None => Err(VossError::Config(format!("unknown solution '{id}'"))),
            },
        }
    }

    /// `|φ_xy - sin φ|` at a point.
    pub fn residual(&self, x: f64, y: f64) -> Result<f64> {
        let j = self.jet(x, y, 2)?;
        Ok((j.partial(1, 1) - j.value().sin()).abs())
    }

    pub fn sin_phi(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.jet(x, y, 0)?.value().sin())
    }

    /// Fails with `SingularChart` when `|sin φ| < eps` at the point.
    pub fn check_regular(&self, x: f64, y: f64, eps: f64) -> Result<()> {
        let s = self.sin_phi(x, y)?;
        if s.abs() < eps {
            Err(VossError::SingularChart { x, y, sin_phi: s })
        } else {
            Ok(())
        }
    }
}

impl ScalarField for SGSolution {
    fn jet(&self, x: f64, y: f64, order: usize) -> Result<Jet2> {
        if self.transposed {
            Ok(self.phi.jet(y, x, order)?.transpose())
        } else {
            self.phi.jet(x, y, order)
        }
    }

    fn name(&self) -> String {
        self.id()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SurfaceKind {
    Pseudosphere,
    DiniHelicoid { gamma: f64 },
    Kuen,
}

/// Pseudospherical surface with closed-form position and unit normal.
#[derive(Clone, Debug)]
pub struct ClosedFormSurface {
    kind: SurfaceKind,
    phi: SGSolution,
    r: VectorField,
    n: VectorField,
}

pub fn pseudosphere() -> ClosedFormSurface {
    ClosedFormSurface {
        kind: SurfaceKind::Pseudosphere,
        phi: make_kink(0.0),
        r: VectorField::new("pseudosphere.r", |x, y| {
            let (u, v) = (x + y, x - y);
            let s = u.sech();
            [v.cos() * s, v.sin() * s, u - u.tanh()]
        }),
        n: VectorField::new("pseudosphere.n", |x, y| {
            let (u, v) = (x + y, x - y);
            let t = u.tanh();
            [-(t * v.cos()), -(t * v.sin()), -u.sech()]
        }),
    }
}

pub fn dini_helicoid(gamma: f64) -> ClosedFormSurface {
    let (ea, eb) = (gamma.exp(), (-gamma).exp());
    let (ch, th) = (gamma.cosh(), gamma.tanh());
    ClosedFormSurface {
        kind: SurfaceKind::DiniHelicoid { gamma },
        phi: make_kink(gamma),
        r: VectorField::new("dini.r", move |x, y| {
            let w = x * ea + y * eb;
            let v = x - y;
            let s = w.sech();
            [v.cos() * s / ch, v.sin() * s / ch, -w.tanh() / ch + x + y]
        }),
        n: VectorField::new("dini.n", move |x, y| {
            let w = x * ea + y * eb;
            let v = x - y;
            let t = w.tanh() / ch;
            let (c, s) = (v.cos(), v.sin());
            [-(t * c) + s * th, -(t * s) - c * th, -w.sech() / ch]
        }),
    }
}

pub fn kuen() -> ClosedFormSurface {
    ClosedFormSurface {
        kind: SurfaceKind::Kuen,
        phi: make_two_soliton(),
        r: VectorField::new("kuen.r", |x, y| {
            let (u, v) = (x + y, x - y);
            let ch = u.cosh();
            let d = v * v + ch * ch;
            let f = ch * 2.0 / d;
            let (c, s) = (v.cos(), v.sin());
            [f * (c + v * s), f * (s - v * c), -(f * u.sinh()) + u]
        }),
        n: VectorField::new("kuen.n", |x, y| {
            let (u, v) = (x + y, x - y);
            let ch = u.cosh();
            let d = v * v + ch * ch;
            let a = v * 2.0 / d;
            let b = (v * v - ch * ch) / d;
            let (c, s) = (v.cos(), v.sin());
            [-(a * c) - b * s, -(a * s) + b * c, a * u.sinh()]
        }),
    }
}

impl ClosedFormSurface {
    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn from_id(id: &str) -> Result<ClosedFormSurface> {
        let id = id.trim();
        match id {
            "pseudosphere" => Ok(pseudosphere()),
            "kuen" => Ok(kuen()),
            _ => match id.strip_prefix("dini:") {
                Some(g) => g
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|g| g.is_finite())
                    .map(dini_helicoid)
                    .ok_or_else(|| VossError::Config(format!("bad Dini parameter in '{id}'"))),
                None => Err(VossError::Config(format!("unknown surface '{id}'"))),
            },
        }
    }

    pub fn position_jets(&self, x: f64, y: f64, order: usize) -> Result<[Jet2; 3]> {
        self.r.jets(x, y, order)
    }

    pub fn normal_jets(&self, x: f64, y: f64, order: usize) -> Result<[Jet2; 3]> {
        self.n.jets(x, y, order)
    }
}

impl Surface for ClosedFormSurface {
    fn solution(&self) -> &SGSolution {
        &self.phi
    }

    fn id(&self) -> String {
        match self.kind {
            SurfaceKind::Pseudosphere => "pseudosphere".into(),
            SurfaceKind::DiniHelicoid { gamma } => format!("dini:{gamma}"),
            SurfaceKind::Kuen => "kuen".into(),
        }
    }

    fn frame_jets(&self, x: f64, y: f64, order: usize) -> Result<FrameJet> {
        Ok(FrameJet { r: self.r.jets(x, y, order + 1)?, n: self.n.jets(x, y, order)? })
    }
}

/// Frame of a closed-form surface read off the closed forms.
///
/// The closed forms stay smooth across `sin φ = 0`, so the frame is returned
/// there too; grid constructions apply the `EPS_CHART` guard themselves.
pub fn closed_form_frame(s: &ClosedFormSurface, x: f64, y: f64) -> Result<Frame> {
    s.frame(x, y)
}

/// As [`closed_form_frame`], but refuses points where `|sin φ| < EPS_FRAME`.
pub fn closed_form_frame_regular(s: &ClosedFormSurface, x: f64, y: f64) -> Result<Frame> {
    s.phi.check_regular(x, y, EPS_FRAME)?;
    s.frame(x, y)
}

/// Value of a jet triple as a vector.
pub fn vec_value(j: &[Jet2; 3]) -> Vector3<f64> {
    Vector3::new(j[0].value(), j[1].value(), j[2].value())
}
