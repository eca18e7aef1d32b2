//! Fixed-order Chebyshev–Lobatto panels: barycentric interpolation and
//! spectral cumulative integration. Used to tabulate smooth pieces of
//! piecewise densities between their break points.

use std::f64::consts::PI;
use std::sync::OnceLock;

pub const CHEB_NODES: usize = 24;
const M: usize = CHEB_NODES - 1;

struct Basis {
    /// Ascending nodes on [-1, 1].
    nodes: [f64; CHEB_NODES],
    bary: [f64; CHEB_NODES],
    /// `cumulative[i][j]` = ∫_{-1}^{nodes[i]} l_j(s) ds.
    cumulative: [[f64; CHEB_NODES]; CHEB_NODES],
}

fn basis() -> &'static Basis {
    static BASIS: OnceLock<Basis> = OnceLock::new();
    BASIS.get_or_init(build_basis)
}

fn end_weight(k: usize) -> f64 {
    if k == 0 || k == M {
        0.5
    } else {
        1.0
    }
}

/// Chebyshev coefficients (end terms already halved) of the interpolant
/// through values given at descending nodes cos(iπ/M).
fn coefficients_desc(values_desc: &[f64; CHEB_NODES]) -> [f64; CHEB_NODES] {
    let mut c = [0.0; CHEB_NODES];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut s = 0.0;
        for (i, v) in values_desc.iter().enumerate() {
            s += end_weight(i) * v * ((i * k) as f64 * PI / M as f64).cos();
        }
        *ck = end_weight(k) * 2.0 / M as f64 * s;
    }
    c
}

/// Coefficients of an antiderivative (degree one higher).
fn antiderivative(c: &[f64; CHEB_NODES]) -> [f64; CHEB_NODES + 1] {
    let mut b = [0.0; CHEB_NODES + 1];
    b[1] += c[0];
    b[2] += c[1] / 4.0;
    for k in 2..CHEB_NODES {
        b[k + 1] += c[k] / (2.0 * (k + 1) as f64);
        b[k - 1] -= c[k] / (2.0 * (k - 1) as f64);
    }
    b
}

fn clenshaw(coeffs: &[f64], s: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * s * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    s * b1 - b2 + coeffs[0]
}

fn build_basis() -> Basis {
    let mut nodes = [0.0; CHEB_NODES];
    let mut bary = [0.0; CHEB_NODES];
    for a in 0..CHEB_NODES {
        nodes[a] = -((a as f64) * PI / M as f64).cos();
        let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
        bary[a] = sign * end_weight(a);
    }
    let mut cumulative = [[0.0; CHEB_NODES]; CHEB_NODES];
    for j in 0..CHEB_NODES {
        let mut unit = [0.0; CHEB_NODES];
        // ascending index j is descending index M - j
        unit[M - j] = 1.0;
        let b = antiderivative(&coefficients_desc(&unit));
        let at_minus_one = clenshaw(&b, -1.0);
        for i in 0..CHEB_NODES {
            cumulative[i][j] = clenshaw(&b, nodes[i]) - at_minus_one;
        }
    }
    Basis {
        nodes,
        bary,
        cumulative,
    }
}

/// A smooth function sampled at Chebyshev–Lobatto points of `[lo, lo + width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevPanel {
    pub lo: f64,
    pub width: f64,
    pub values: [f64; CHEB_NODES],
}

impl ChebyshevPanel {
    /// Physical abscissae of the panel's nodes, ascending.
    pub fn nodes(lo: f64, width: f64) -> [f64; CHEB_NODES] {
        let b = basis();
        let mut x = [0.0; CHEB_NODES];
        for (xi, s) in x.iter_mut().zip(b.nodes.iter()) {
            *xi = lo + 0.5 * (s + 1.0) * width;
        }
        x[0] = lo;
        x[M] = lo + width;
        x
    }

    pub fn from_fn<F: FnMut(f64) -> f64>(lo: f64, width: f64, mut f: F) -> Self {
        let xs = Self::nodes(lo, width);
        let mut values = [0.0; CHEB_NODES];
        for (v, x) in values.iter_mut().zip(xs.iter()) {
            *v = f(*x);
        }
        Self { lo, width, values }
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.width
    }

    /// Barycentric evaluation; `x` is clamped to the panel.
    pub fn eval(&self, x: f64) -> f64 {
        let b = basis();
        let s = (2.0 * (x - self.lo) / self.width - 1.0).clamp(-1.0, 1.0);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..CHEB_NODES {
            let d = s - b.nodes[j];
            if d == 0.0 {
                return self.values[j];
            }
            let w = b.bary[j] / d;
            num += w * self.values[j];
            den += w;
        }
        num / den
    }

    /// ∫ from `lo` to each node, in physical units.
    pub fn cumulative_integral(&self) -> [f64; CHEB_NODES] {
        let b = basis();
        let mut out = [0.0; CHEB_NODES];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..CHEB_NODES {
                s += b.cumulative[i][j] * self.values[j];
            }
            *o = 0.5 * self.width * s;
        }
        out
    }

    /// Integral over the whole panel (Clenshaw–Curtis).
    pub fn integral(&self) -> f64 {
        let b = basis();
        let s: f64 = (0..CHEB_NODES).map(|j| b.cumulative[M][j] * self.values[j]).sum();
        0.5 * self.width * s
    }

    /// ∫ from `lo` to `x` of the interpolant.
    pub fn integral_to(&self, x: f64) -> f64 {
        let s = (2.0 * (x - self.lo) / self.width - 1.0).clamp(-1.0, 1.0);
        let mut desc = [0.0; CHEB_NODES];
        for a in 0..CHEB_NODES {
            desc[M - a] = self.values[a];
        }
        let anti = antiderivative(&coefficients_desc(&desc));
        0.5 * self.width * (clenshaw(&anti, s) - clenshaw(&anti, -1.0))
    }

    /// Pointwise map of the node values.
    pub fn map<F: Fn(f64, f64) -> f64>(&self, f: F) -> Self {
        let xs = Self::nodes(self.lo, self.width);
        let mut values = self.values;
        for (v, x) in values.iter_mut().zip(xs.iter()) {
            *v = f(*x, *v);
        }
        Self {
            lo: self.lo,
            width: self.width,
            values,
        }
    }
}
