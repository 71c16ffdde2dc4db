//! Planar helpers shared by the planners, router and simulator.

/// Polyline with cumulative arc length.
#[derive(Debug, Clone)]
pub struct Polyline {
    points: Vec<[f64; 2]>,
    cum: Vec<f64>,
}

/// Position on a polyline: segment index, fraction along it, arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Station {
    pub segment: usize,
    pub t: f64,
    pub s: f64,
}

impl Polyline {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        assert!(!points.is_empty(), "polyline needs at least one point");
        let mut cum = Vec::with_capacity(points.len());
        let mut s = 0.0;
        cum.push(0.0);
        for w in points.windows(2) {
            s += dist(w[0], w[1]);
            cum.push(s);
        }
        Self { points, cum }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Closest point to `p`; the earliest station wins ties.
    pub fn closest(&self, p: [f64; 2]) -> Station {
        let mut best = Station { segment: 0, t: 0.0, s: 0.0 };
        let mut best_d = dist(self.points[0], p);
        for k in 0..self.points.len().saturating_sub(1) {
            let (a, b) = (self.points[k], self.points[k + 1]);
            let len = self.cum[k + 1] - self.cum[k];
            let t = if len > 0.0 {
                (((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / (len * len)).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = lerp2(a, b, t);
            let d = dist(q, p);
            if d < best_d {
                best_d = d;
                best = Station { segment: k, t, s: self.cum[k] + t * len };
            }
        }
        best
    }

    /// Station at arc length `s`, clamped to the ends.
    pub fn at(&self, s: f64) -> Station {
        let n = self.points.len();
        if n == 1 || s <= 0.0 {
            return Station { segment: 0, t: 0.0, s: 0.0 };
        }
        if s >= self.length() {
            return Station { segment: n - 2, t: 1.0, s: self.length() };
        }
        let k = self.cum.partition_point(|&c| c <= s).saturating_sub(1).min(n - 2);
        let len = self.cum[k + 1] - self.cum[k];
        let t = if len > 0.0 { (s - self.cum[k]) / len } else { 0.0 };
        Station { segment: k, t, s }
    }

    pub fn point(&self, st: Station) -> [f64; 2] {
        if self.points.len() == 1 {
            return self.points[0];
        }
        lerp2(self.points[st.segment], self.points[st.segment + 1], st.t)
    }
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn lerp2(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from `p` to the boundary of `poly`, negative inside.
pub fn signed_distance(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut d = f64::INFINITY;
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let ab = [b[0] - a[0], b[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = if len2 > 0.0 { (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
        d = d.min(dist(p, lerp2(a, b, t)));
    }
    if point_in_polygon(p, poly) {
        -d
    } else {
        d
    }
}

/// First parameter `t ∈ [0, t_max]` where the ray `o + t·dir` crosses an
/// edge of `poly`.
pub fn ray_polygon(o: [f64; 2], dir: [f64; 2], poly: &[[f64; 2]], t_max: f64) -> Option<f64> {
    let n = poly.len();
    let mut best: Option<f64> = None;
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let den = dir[0] * e[1] - dir[1] * e[0];
        if den.abs() < 1e-14 {
            continue;
        }
        let w = [a[0] - o[0], a[1] - o[1]];
        let t = (w[0] * e[1] - w[1] * e[0]) / den;
        let u = (w[0] * dir[1] - w[1] * dir[0]) / den;
        if (0.0..=t_max).contains(&t) && (0.0..=1.0).contains(&u) && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    }
    best
}

/// Axis-aligned rectangle as a counter-clockwise polygon.
pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<[f64; 2]> {
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_stations() {
        let p = Polyline::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]]);
        assert_eq!(p.length(), 3.0);
        assert_eq!(p.point(p.at(2.0)), [1.0, 1.0]);
        assert_eq!(p.point(p.at(10.0)), [1.0, 2.0]);
        let st = p.closest([0.5, -0.3]);
        assert_eq!((st.segment, st.s), (0, 0.5));
    }

    #[test]
    fn polygon_queries() {
        let sq = rect(0.0, 0.0, 1.0, 1.0);
        assert!(point_in_polygon([0.5, 0.5], &sq));
        assert!(!point_in_polygon([1.5, 0.5], &sq));
        assert!((signed_distance([0.5, 0.5], &sq) + 0.5).abs() < 1e-12);
        assert!((signed_distance([2.0, 0.5], &sq) - 1.0).abs() < 1e-12);
        assert_eq!(ray_polygon([-1.0, 0.5], [1.0, 0.0], &sq, 5.0), Some(1.0));
        assert_eq!(ray_polygon([-1.0, 0.5], [-1.0, 0.0], &sq, 5.0), None);
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
    }
}
