//! Zero-level contours of scalar fields sampled on a grid.
//!
//! Marching squares finds the cell edges where the sampled field changes
//! sign and links them into polylines; each crossing is then refined by root
//! finding on the underlying continuous field along its edge.

use std::collections::HashMap;

use crate::grid::GridSpec;

/// A cell edge: horizontal edges run from node `(i, j)` to `(i+1, j)`,
/// vertical edges from `(i, j)` to `(i, j+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Traced zero level: a sequence of points, closed when it returns to its start.
#[derive(Clone, Debug, PartialEq)]
pub struct Contour {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

fn positive(v: f64) -> bool {
    v >= 0.0
}

/// Root of `f` on the segment `a → b` given endpoint values of opposite sign.
/// Falls back to linear interpolation if `f` cannot be evaluated.
pub fn refine_root(
    f: &dyn Fn(f64, f64) -> Option<f64>,
    a: (f64, f64),
    b: (f64, f64),
    fa: f64,
    fb: f64,
) -> (f64, f64) {
    let at = |t: f64| (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut flo, mut fhi) = (fa, fb);
    let linear = if fa == fb { 0.5 } else { fa / (fa - fb) };
    let mut side = 0i32;
    for _ in 0..100 {
        if hi - lo < 1e-15 {
            break;
        }
        // Illinois variant of regula falsi, bisecting whenever the secant
        // point is not strictly inside the bracket.
        let mut t = if flo.is_finite() && fhi.is_finite() && flo != fhi {
            (lo * fhi - hi * flo) / (fhi - flo)
        } else {
            0.5 * (lo + hi)
        };
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let (x, y) = at(t);
        let ft = match f(x, y) {
            Some(v) if v.is_finite() => v,
            Some(v) if v.is_infinite() => v.signum() * f64::MAX,
            _ => return at(linear),
        };
        if ft == 0.0 {
            return (x, y);
        }
        if positive(ft) == positive(flo) {
            lo = t;
            flo = ft;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            fhi = ft;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    at(0.5 * (lo + hi))
}

/// Traces the zero level of a field with node samples `values` (row-major)
/// and continuous evaluator `f`.
pub fn zero_contours(grid: &GridSpec, values: &[f64], f: &dyn Fn(f64, f64) -> Option<f64>) -> Vec<Contour> {
    let (nx, ny) = (grid.nx, grid.ny);
    if nx < 2 || ny < 2 {
        return Vec::new();
    }
    let val = |i: usize, j: usize| values[grid.index(i, j)];
    let usable = |v: f64| v.is_finite();

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            if !c.iter().all(|&v| usable(v)) {
                continue;
            }
            let s: Vec<bool> = c.iter().map(|&v| positive(v)).collect();
            // Edges in cyclic order: bottom, right, top, left.
            let edges = [Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j)];
            let crossing = [s[0] != s[1], s[1] != s[2], s[3] != s[2], s[0] != s[3]];
            let hits: Vec<usize> = (0..4).filter(|&k| crossing[k]).collect();
            match hits.len() {
                2 => segments.push((edges[hits[0]], edges[hits[1]])),
                4 => {
                    let centre = f(grid.x(i) + 0.5 * grid.dx, grid.y(j) + 0.5 * grid.dy)
                        .filter(|v| v.is_finite())
                        .unwrap_or(0.25 * c.iter().sum::<f64>());
                    if positive(centre) == s[0] {
                        // The corner-0 region connects through the centre.
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let mut point_cache: HashMap<Edge, (f64, f64)> = HashMap::new();
    let mut locate = |e: Edge| -> (f64, f64) {
        *point_cache.entry(e).or_insert_with(|| {
            let (a, b) = match e {
                Edge::H(i, j) => ((i, j), (i + 1, j)),
                Edge::V(i, j) => ((i, j), (i, j + 1)),
            };
            refine_root(f, grid.point(a.0, a.1), grid.point(b.0, b.1), val(a.0, a.1), val(b.0, b.1))
        })
    };

    let mut adjacency: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        adjacency.entry(*a).or_default().push(k);
        adjacency.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    // Start open chains at edges touched by one segment, then sweep cycles.
    let mut starts: Vec<usize> = Vec::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        if adjacency[a].len() == 1 || adjacency[b].len() == 1 {
            starts.push(k);
        }
    }
    starts.extend(0..segments.len());
    for start in starts {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let (first, mut cur) = if adjacency[&a].len() == 1 { (a, b) } else if adjacency[&b].len() == 1 { (b, a) } else { (a, b) };
        let mut chain = vec![first, cur];
        let mut closed = false;
        loop {
            let next = adjacency[&cur].iter().copied().find(|&k| !used[k]);
            let Some(k) = next else { break };
            used[k] = true;
            let (p, q) = segments[k];
            cur = if p == cur { q } else { p };
            if cur == first {
                closed = true;
                break;
            }
            chain.push(cur);
        }
        let mut points: Vec<(f64, f64)> = chain.into_iter().map(&mut locate).collect();
        if closed {
            let p0 = points[0];
            points.push(p0);
        }
        out.push(Contour { points, closed });
    }
    out
}

/// Intersection of segments `p1p2` and `p3p4`, if any.
pub fn segment_intersection(p1: (f64, f64), p2: (f64, f64), p3: (f64, f64), p4: (f64, f64)) -> Option<(f64, f64)> {
    let d = (p2.0 - p1.0) * (p4.1 - p3.1) - (p2.1 - p1.1) * (p4.0 - p3.0);
    if d == 0.0 {
        return None;
    }
    let t = ((p3.0 - p1.0) * (p4.1 - p3.1) - (p3.1 - p1.1) * (p4.0 - p3.0)) / d;
    let s = ((p3.0 - p1.0) * (p2.1 - p1.1) - (p3.1 - p1.1) * (p2.0 - p1.0)) / d;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s) {
        Some((p1.0 + t * (p2.0 - p1.0), p1.1 + t * (p2.1 - p1.1)))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(grid: &GridSpec, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
        grid.points().into_iter().map(|(x, y)| f(x, y)).collect()
    }

    #[test]
    fn circle_is_one_closed_contour() {
        let g = GridSpec::spanning(-1.0, 1.0, -1.0, 1.0, 31, 31).unwrap();
        let f = |x: f64, y: f64| x * x + y * y - 0.5;
        let cs = zero_contours(&g, &sample(&g, &f), &|x, y| Some(f(x, y)));
        assert_eq!(cs.len(), 1);
        assert!(cs[0].closed);
        for &(x, y) in &cs[0].points {
            assert!(f(x, y).abs() < 1e-12);
        }
    }

    #[test]
    fn line_is_open_and_sorted() {
        let g = GridSpec::spanning(0.0, 1.0, 0.0, 1.0, 11, 11).unwrap();
        let f = |x: f64, y: f64| y - 0.3 * x - 0.33;
        let cs = zero_contours(&g, &sample(&g, &f), &|x, y| Some(f(x, y)));
        assert_eq!(cs.len(), 1);
        assert!(!cs[0].closed);
        let xs: Vec<f64> = cs[0].points.iter().map(|p| p.0).collect();
        let inc = xs.windows(2).all(|w| w[1] > w[0]);
        let dec = xs.windows(2).all(|w| w[1] < w[0]);
        assert!(inc || dec);
    }

    #[test]
    fn saddle_gives_two_branches() {
        let g = GridSpec::spanning(-1.0, 1.0, -1.0, 1.0, 20, 20).unwrap();
        let f = |x: f64, y: f64| x * y - 0.01;
        let cs = zero_contours(&g, &sample(&g, &f), &|x, y| Some(f(x, y)));
        assert_eq!(cs.len(), 2);
        for c in &cs {
            for &(x, y) in &c.points {
                assert!(f(x, y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_when_no_sign_change() {
        let g = GridSpec::spanning(0.0, 1.0, 0.0, 1.0, 5, 5).unwrap();
        let cs = zero_contours(&g, &vec![1.0; 25], &|_, _| Some(1.0));
        assert!(cs.is_empty());
    }

    #[test]
    fn crossing_segments() {
        let p = segment_intersection((0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)).unwrap();
        assert!((p.0 - 0.5).abs() < 1e-15 && (p.1 - 0.5).abs() < 1e-15);
        assert!(segment_intersection((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)).is_none());
    }
}
