//! Symmetric indefinite solves for KKT systems that are banded apart from a
//! small dense border.
//!
//! ```text
//! K = [A  B]    A: banded, B: dense columns, C: small dense block
//!     [Bᵀ C]
//! ```
//!
//! `A` is factored as `LDLᵀ` without pivoting, which is stable enough for the
//! regularized quasi-definite matrices the interior-point method produces.
//! The border goes through a dense Schur complement.

#[derive(Debug, Clone)]
pub struct BorderedBand {
    n: usize,
    bw: usize,
    /// Lower band, row-major: `band[i*(bw+1) + (i-j)] = A(i, j)`.
    band: Vec<f64>,
    nb: usize,
    /// `B` stored column-major: `border[c*n + i] = B(i, c)`.
    border: Vec<f64>,
    /// `C` dense row-major.
    corner: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    bw: usize,
    /// Unit lower factor in band storage, `D` on the diagonal slot.
    ld: Vec<f64>,
    nb: usize,
    /// `A⁻¹ B`, column-major.
    ainv_b: Vec<f64>,
    border: Vec<f64>,
    /// Dense `LDLᵀ` of the Schur complement `C − Bᵀ A⁻¹ B`.
    schur: Vec<f64>,
    pub inertia: Inertia,
}

const PIVOT_FLOOR: f64 = 1e-300;

impl BorderedBand {
    pub fn new(n: usize, bw: usize, nb: usize) -> Self {
        Self { n, bw, band: vec![0.0; n * (bw + 1)], nb, border: vec![0.0; nb * n], corner: vec![0.0; nb * nb] }
    }

    pub fn dim(&self) -> usize {
        self.n + self.nb
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn clear(&mut self) {
        self.band.fill(0.0);
        self.border.fill(0.0);
        self.corner.fill(0.0);
    }

    /// Adds `v` to `K(i, j)` (and implicitly `K(j, i)`), using the combined
    /// index space: band rows first, then border rows.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if j >= self.n {
            let (a, b) = (i - self.n, j - self.n);
            self.corner[a * self.nb + b] += v;
            if a != b {
                self.corner[b * self.nb + a] += v;
            }
        } else if i >= self.n {
            self.border[(i - self.n) * self.n + j] += v;
        } else {
            debug_assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
            self.band[i * (self.bw + 1) + (i - j)] += v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if j >= self.n {
            self.corner[(i - self.n) * self.nb + (j - self.n)]
        } else if i >= self.n {
            self.border[(i - self.n) * self.n + j]
        } else if i - j <= self.bw {
            self.band[i * (self.bw + 1) + (i - j)]
        } else {
            0.0
        }
    }

    /// `y = K x`.
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        let (n, w) = (self.n, self.bw + 1);
        y.fill(0.0);
        for i in 0..n {
            let row = &self.band[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for k in 1..w.min(i + 1) {
                let j = i - k;
                y[i] += row[k] * x[j];
                y[j] += row[k] * x[i];
            }
        }
        for c in 0..self.nb {
            let col = &self.border[c * n..(c + 1) * n];
            let mut acc = 0.0;
            for i in 0..n {
                y[i] += col[i] * x[n + c];
                acc += col[i] * x[i];
            }
            y[n + c] += acc;
            for d in 0..self.nb {
                y[n + c] += self.corner[c * self.nb + d] * x[n + d];
            }
        }
    }

    pub fn factor(&self) -> Factorization {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut ld = self.band.clone();
        let mut inertia = Inertia { positive: 0, negative: 0, zero: 0 };
        // Right-looking band LDLᵀ; scratch holds L(i, j)·d_j for the column.
        let mut scratch = vec![0.0; w];
        for j in 0..n {
            let d = ld[j * w];
            let d = if d.is_finite() && d.abs() > PIVOT_FLOOR { d } else { 0.0 };
            classify(d, &mut inertia);
            let inv = if d == 0.0 { 0.0 } else { 1.0 / d };
            let last = (j + bw).min(n - 1);
            for i in j + 1..=last {
                let lij_d = ld[i * w + (i - j)];
                scratch[i - j] = lij_d;
                ld[i * w + (i - j)] = lij_d * inv;
            }
            for i in j + 1..=last {
                let lij = ld[i * w + (i - j)];
                if lij == 0.0 {
                    continue;
                }
                let base = i * w;
                for k in j + 1..=i {
                    ld[base + (i - k)] -= lij * scratch[k - j];
                }
            }
            ld[j * w] = d;
        }

        let nb = self.nb;
        let mut f = Factorization {
            n,
            bw,
            ld,
            nb,
            ainv_b: vec![0.0; nb * n],
            border: self.border.clone(),
            schur: self.corner.clone(),
            inertia,
        };
        if nb > 0 {
            for c in 0..nb {
                let mut col = self.border[c * n..(c + 1) * n].to_vec();
                f.band_solve(&mut col);
                f.ainv_b[c * n..(c + 1) * n].copy_from_slice(&col);
            }
            for a in 0..nb {
                for b in 0..nb {
                    let dot: f64 = (0..n).map(|i| self.border[a * n + i] * f.ainv_b[b * n + i]).sum();
                    f.schur[a * nb + b] -= dot;
                }
            }
            let mut s = f.schur.clone();
            dense_ldl(&mut s, nb, &mut f.inertia);
            f.schur = s;
        }
        f
    }
}

fn classify(d: f64, inertia: &mut Inertia) {
    if d > 0.0 {
        inertia.positive += 1;
    } else if d < 0.0 {
        inertia.negative += 1;
    } else {
        inertia.zero += 1;
    }
}

fn dense_ldl(a: &mut [f64], n: usize, inertia: &mut Inertia) {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k] * a[k * n + k];
        }
        let d = if d.is_finite() && d.abs() > PIVOT_FLOOR { d } else { 0.0 };
        classify(d, inertia);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k] * a[k * n + k];
            }
            a[i * n + j] = if d == 0.0 { 0.0 } else { v / d };
        }
    }
}

fn dense_solve(a: &[f64], n: usize, x: &mut [f64]) {
    for i in 0..n {
        for k in 0..i {
            x[i] -= a[i * n + k] * x[k];
        }
    }
    for i in 0..n {
        let d = a[i * n + i];
        x[i] = if d == 0.0 { 0.0 } else { x[i] / d };
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= a[k * n + i] * x[k];
        }
    }
}

impl Factorization {
    pub fn is_singular(&self) -> bool {
        self.inertia.zero > 0
    }

    fn band_solve(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.ld[i * w..(i + 1) * w];
            let mut v = x[i];
            for j in lo..i {
                v -= row[i - j] * x[j];
            }
            x[i] = v;
        }
        for i in 0..n {
            let d = self.ld[i * w];
            x[i] = if d == 0.0 { 0.0 } else { x[i] / d };
        }
        for j in (0..n).rev() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(bw);
            let row = &self.ld[j * w..(j + 1) * w];
            for i in lo..j {
                x[i] -= row[j - i] * xj;
            }
        }
    }

    /// Solves `K x = rhs` in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.n;
        let nb = self.nb;
        let (top, bottom) = rhs.split_at_mut(n);
        self.band_solve(top);
        if nb == 0 {
            return;
        }
        for c in 0..nb {
            let dot: f64 = (0..n).map(|i| self.border[c * n + i] * top[i]).sum();
            bottom[c] -= dot;
        }
        dense_solve(&self.schur, nb, bottom);
        for c in 0..nb {
            let wc = bottom[c];
            for i in 0..n {
                top[i] -= self.ainv_b[c * n + i] * wc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_of(m: &BorderedBand) -> Vec<Vec<f64>> {
        let d = m.dim();
        (0..d).map(|i| (0..d).map(|j| m.get(i, j)).collect()).collect()
    }

    fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    fn quasi_definite(n: usize, bw: usize, nb: usize) -> BorderedBand {
        let mut m = BorderedBand::new(n, bw, nb);
        // Alternate primal (positive) and dual (negative) diagonal entries.
        for i in 0..n {
            let sign = if i % 3 == 2 { -1.0 } else { 1.0 };
            m.add(i, i, sign * (2.0 + (i % 5) as f64));
            for k in 1..=bw.min(i) {
                m.add(i, i - k, 0.3 * (((i * 7 + k * 3) % 11) as f64 - 5.0) / 5.0);
            }
        }
        for c in 0..nb {
            m.add(n + c, n + c, 4.0 + c as f64);
            for i in (c..n).step_by(4) {
                m.add(n + c, i, 0.2);
            }
        }
        m
    }

    #[test]
    fn solve_matches_dense_elimination() {
        for &(n, bw, nb) in &[(12, 3, 0), (30, 5, 2), (9, 8, 3)] {
            let m = quasi_definite(n, bw, nb);
            let f = m.factor();
            let rhs: Vec<f64> = (0..m.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut x = rhs.clone();
            f.solve(&mut x);
            let expect = gauss_solve(dense_of(&m), rhs.clone());
            for (a, b) in x.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
            let mut y = vec![0.0; m.dim()];
            m.mul(&x, &mut y);
            for (a, b) in y.iter().zip(&rhs) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn inertia_of_diagonal() {
        let mut m = BorderedBand::new(4, 1, 1);
        for (i, v) in [1.0, -2.0, 3.0, -4.0, 5.0].iter().enumerate() {
            m.add(i, i, *v);
        }
        let f = m.factor();
        assert_eq!(f.inertia, Inertia { positive: 3, negative: 2, zero: 0 });
    }
}
