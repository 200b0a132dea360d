//! Symmetry specifiers such as `-0.5*scaling + 2*pmkdv:1` or
//! `rplusid_inv:(normal:0,1,0)`.
//!
//! A specifier is a sum of terms joined by top-level `+`; each term is an
//! optional `coefficient*` followed by a member. Operator members take a
//! nested specifier in parentheses.

use voss_core::jets::Axis;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub enum SymExpr {
    Sum(Vec<(f64, SymExpr)>),
    Pmkdv(i32),
    Khorkova(i32),
    Translate(Axis),
    Scaling,
    Normal([f64; 3]),
    /// `(R + Id)⁻¹` of the inner specifier.
    RPlusIdInv(Box<SymExpr>),
    R(Box<SymExpr>),
    RInv(Box<SymExpr>),
}

fn err(spec: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("symmetry '{spec}': {msg}"))
}

/// Splits at `sep` outside parentheses. A `+` that is the sign of an
/// exponent (`1e+3`) does not split.
fn split_top(s: &str, sep: char) -> Option<Vec<&str>> {
    let bytes = s.as_bytes();
    let mut depth = 0i32;
    let mut parts = Vec::new();
    let mut start = 0;
    for (k, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
            }
            _ if c == sep && depth == 0 => {
                let exponent = k >= 2
                    && matches!(bytes[k - 1], b'e' | b'E')
                    && bytes[k - 2].is_ascii_digit();
                if !exponent {
                    parts.push(&s[start..k]);
                    start = k + 1;
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        return None;
    }
    parts.push(&s[start..]);
    Some(parts)
}

fn strip_parens(s: &str) -> &str {
    let t = s.trim();
    if t.starts_with('(') && t.ends_with(')') {
        // Only when the opening parenthesis closes at the very end.
        let inner = &t[1..t.len() - 1];
        if split_top(inner, '+').is_some() {
            return inner;
        }
    }
    t
}

pub fn parse(spec: &str) -> CliResult<SymExpr> {
    let body = strip_parens(spec);
    if body.is_empty() {
        return Err(err(spec, "empty"));
    }
    let terms = split_top(body, '+').ok_or_else(|| err(spec, "unbalanced parentheses"))?;
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        out.push(parse_term(spec, t.trim())?);
    }
    if out.len() == 1 && out[0].0 == 1.0 {
        return Ok(out.pop().unwrap().1);
    }
    Ok(SymExpr::Sum(out))
}

fn parse_term(spec: &str, t: &str) -> CliResult<(f64, SymExpr)> {
    if t.is_empty() {
        return Err(err(spec, "empty term"));
    }
    let (coef, member) = match t.find('*') {
        Some(k) if !t[..k].contains('(') => {
            let c = t[..k].trim();
            let v = c.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(spec, format!("bad coefficient '{c}'")))?;
            (v, t[k + 1..].trim())
        }
        _ => match t.strip_prefix('-') {
            Some(rest) if !rest.starts_with(|c: char| c.is_ascii_digit()) => (-1.0, rest.trim()),
            _ => (1.0, t),
        },
    };
    if member.starts_with('(') {
        return Ok((coef, parse(member)?));
    }
    let (name, args) = match member.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (member, None),
    };
    let int = |a: Option<&str>| -> CliResult<i32> {
        let a = a.ok_or_else(|| err(spec, format!("{name} needs an index")))?;
        a.parse::<i32>().map_err(|_| err(spec, format!("bad index '{a}' for {name}")))
    };
    let nested = |a: Option<&str>| -> CliResult<Box<SymExpr>> {
        let a = a.ok_or_else(|| err(spec, format!("{name} needs an argument")))?;
        Ok(Box::new(parse(a)?))
    };
    let e = match name {
        "pmkdv" => SymExpr::Pmkdv(int(args)?),
        "khorkova" => SymExpr::Khorkova(int(args)?),
        "translate" => match args {
            Some("x") => SymExpr::Translate(Axis::X),
            Some("y") => SymExpr::Translate(Axis::Y),
            _ => return Err(err(spec, "translate takes x or y")),
        },
        "scaling" if args.is_none() => SymExpr::Scaling,
        "normal" => {
            let a = args.ok_or_else(|| err(spec, "normal needs cx,cy,cz"))?;
            let a = strip_parens(a);
            let c: Vec<f64> = a
                .split(',')
                .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| err(spec, format!("bad normal direction '{a}'")))?;
            if c.len() != 3 {
                return Err(err(spec, "normal needs three components"));
            }
            SymExpr::Normal([c[0], c[1], c[2]])
        }
        "rplusid_inv" => SymExpr::RPlusIdInv(nested(args)?),
        "r" => SymExpr::R(nested(args)?),
        "rinv" => SymExpr::RInv(nested(args)?),
        _ => return Err(err(spec, format!("unknown member '{member}'"))),
    };
    Ok((coef, e))
}

impl SymExpr {
    /// Whether evaluating needs the surface frame.
    pub fn needs_surface(&self) -> bool {
        match self {
            SymExpr::Normal(_) | SymExpr::RPlusIdInv(_) => true,
            SymExpr::Sum(t) => t.iter().any(|(_, e)| e.needs_surface()),
            SymExpr::R(e) | SymExpr::RInv(e) => e.needs_surface(),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_and_coefficients() {
        assert_eq!(parse("scaling").unwrap(), SymExpr::Scaling);
        assert_eq!(parse(" -0.5*scaling ").unwrap(), SymExpr::Sum(vec![(-0.5, SymExpr::Scaling)]));
        assert_eq!(
            parse("pmkdv:2 + -3*pmkdv:1 + 1e+0*khorkova:-1").unwrap(),
            SymExpr::Sum(vec![(1.0, SymExpr::Pmkdv(2)), (-3.0, SymExpr::Pmkdv(1)), (1.0, SymExpr::Khorkova(-1))])
        );
        assert_eq!(parse("-translate:y").unwrap(), SymExpr::Sum(vec![(-1.0, SymExpr::Translate(Axis::Y))]));
    }

    #[test]
    fn nested_operators() {
        let e = parse("rplusid_inv:(normal:0,1,0)").unwrap();
        assert_eq!(e, SymExpr::RPlusIdInv(Box::new(SymExpr::Normal([0.0, 1.0, 0.0]))));
        assert!(e.needs_surface());
        let e = parse("r:(scaling + 2*translate:x) + pmkdv:1").unwrap();
        let inner = SymExpr::Sum(vec![(1.0, SymExpr::Scaling), (2.0, SymExpr::Translate(Axis::X))]);
        assert_eq!(e, SymExpr::Sum(vec![(1.0, SymExpr::R(Box::new(inner))), (1.0, SymExpr::Pmkdv(1))]));
        assert!(!e.needs_surface());
        assert_eq!(parse("(scaling)").unwrap(), SymExpr::Scaling);
    }

    #[test]
    fn errors() {
        for bad in ["", "frobnicate", "pmkdv", "pmkdv:x", "translate:z", "normal:1,2", "x*scaling", "r:(scaling", "scaling:3"] {
            assert!(matches!(parse(bad), Err(CliError::Config(_))), "{bad}");
        }
    }
}
