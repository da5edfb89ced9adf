//! Single-step updates for the state vector and the Bloch-tensor blocks.
//!
//! The Hamiltonian is H = -b·S, so both representations obey y' = i(b·S)y
//! in their own carrier space. The Magnus step uses the three field samples
//! of a step (start, midpoint, end):
//!   w0 = h/6 (b0 + 4 b½ + b1),  w1 = h/12 (b1 - b0),
//!   y ← exp(i (w0 + w0×w1)·S) y,
//! which is fourth order and exactly norm preserving.

use num_complex::Complex64;

use crate::spin::{raising_coefficient, SpinValue};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Rotation vector of one fourth-order Magnus step.
pub(crate) fn magnus_vector(b0: [f64; 3], bh: [f64; 3], b1: [f64; 3], h: f64) -> [f64; 3] {
    let w0 = [
        h / 6.0 * (b0[0] + 4.0 * bh[0] + b1[0]),
        h / 6.0 * (b0[1] + 4.0 * bh[1] + b1[1]),
        h / 6.0 * (b0[2] + 4.0 * bh[2] + b1[2]),
    ];
    let w1 = [
        h / 12.0 * (b1[0] - b0[0]),
        h / 12.0 * (b1[1] - b0[1]),
        h / 12.0 * (b1[2] - b0[2]),
    ];
    let c = cross(w0, w1);
    [w0[0] + c[0], w0[1] + c[1], w0[2] + c[2]]
}

/// Tridiagonal action y ↦ i(v·S)y on one carrier space.
pub(crate) trait Generator {
    /// Upper bound on the operator norm of v·S for |v| = 1.
    fn scale(&self) -> f64;
    fn apply(&self, v: [f64; 3], y: &[Complex64], out: &mut [Complex64]);
}

/// Spin matrices in the standard (descending-m) basis.
#[derive(Debug, Clone)]
pub(crate) struct SpinGenerator {
    two_m: Vec<f64>,
    raise: Vec<f64>,
    s: f64,
}

impl SpinGenerator {
    pub fn new(spin: SpinValue) -> Self {
        let d = spin.dim();
        Self {
            two_m: (0..d).map(|r| spin.two_m(r) as f64).collect(),
            raise: (0..d - 1).map(|r| raising_coefficient(spin, r)).collect(),
            s: spin.s(),
        }
    }
}

impl Generator for SpinGenerator {
    fn scale(&self) -> f64 {
        self.s
    }

    fn apply(&self, v: [f64; 3], y: &[Complex64], out: &mut [Complex64]) {
        // v·S = v_z S_z + (v_- S_+ + v_+ S_-)/2
        let vp = Complex64::new(v[0], v[1]);
        let vm = vp.conj();
        let d = y.len();
        for r in 0..d {
            let mut acc = y[r] * (0.5 * v[2] * self.two_m[r]);
            if r + 1 < d {
                acc += vm * (0.5 * self.raise[r]) * y[r + 1];
            }
            if r > 0 {
                acc += vp * (0.5 * self.raise[r - 1]) * y[r - 1];
            }
            out[r] = I * acc;
        }
    }
}

/// The rank-s Bloch block, components ordered m = -s..=s:
/// ġ_m = -i m b_z g_m + (i/2)√((s+m)(s-m+1)) b_+ g_{m-1} + (i/2)√((s-m)(s+m+1)) b_- g_{m+1},
/// which is i(b·S')g for the field b.
#[derive(Debug, Clone)]
pub(crate) struct BlochGenerator {
    m: Vec<f64>,
    down: Vec<f64>,
    up: Vec<f64>,
    s: f64,
}

impl BlochGenerator {
    pub fn new(s: u32) -> Self {
        let si = s as i32;
        let ms: Vec<i32> = (-si..=si).collect();
        Self {
            m: ms.iter().map(|&m| m as f64).collect(),
            down: ms.iter().map(|&m| (((si + m) * (si - m + 1)) as f64).sqrt()).collect(),
            up: ms.iter().map(|&m| (((si - m) * (si + m + 1)) as f64).sqrt()).collect(),
            s: s as f64,
        }
    }

    #[cfg(test)]
    fn dim(&self) -> usize {
        self.m.len()
    }
}

impl Generator for BlochGenerator {
    fn scale(&self) -> f64 {
        self.s
    }

    fn apply(&self, v: [f64; 3], y: &[Complex64], out: &mut [Complex64]) {
        let vp = Complex64::new(v[0], v[1]);
        let vm = vp.conj();
        let n = y.len();
        for k in 0..n {
            let mut acc = y[k] * (-self.m[k] * v[2]);
            if k > 0 {
                acc += vp * (0.5 * self.down[k]) * y[k - 1];
            }
            if k + 1 < n {
                acc += vm * (0.5 * self.up[k]) * y[k + 1];
            }
            out[k] = I * acc;
        }
    }
}

/// y ← exp(i v·S) y by a truncated Taylor series with substepping.
pub(crate) fn exp_action<G: Generator>(
    gen: &G,
    v: [f64; 3],
    y: &mut [Complex64],
    term: &mut Vec<Complex64>,
    next: &mut Vec<Complex64>,
) {
    let norm_v = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm_v == 0.0 {
        return;
    }
    let bound = norm_v * gen.scale();
    let pieces = (bound / 0.5).ceil().max(1.0) as usize;
    let sub = [v[0] / pieces as f64, v[1] / pieces as f64, v[2] / pieces as f64];
    let n = y.len();
    term.resize(n, Complex64::default());
    next.resize(n, Complex64::default());
    for _ in 0..pieces {
        term.copy_from_slice(y);
        for k in 1..40 {
            gen.apply(sub, term, next);
            let inv = 1.0 / k as f64;
            let mut size = 0.0;
            for j in 0..n {
                let t = next[j] * inv;
                term[j] = t;
                y[j] += t;
                size += t.norm_sqr();
            }
            if size < 1e-34 {
                break;
            }
        }
    }
}

/// exp(i v·σ/2) acting on a two-component spinor.
#[inline]
pub(crate) fn exp_half(v: [f64; 3], y: &mut [Complex64]) {
    let phi = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if phi == 0.0 {
        return;
    }
    let (s, c) = (0.5 * phi).sin_cos();
    let k = s / phi;
    // i sin(φ/2) n·σ with n·σ = [[n_z, n_-], [n_+, -n_z]]
    let nz = Complex64::new(0.0, k * v[2]);
    let nm = Complex64::new(k * v[1], k * v[0]);
    let np = Complex64::new(-k * v[1], k * v[0]);
    let (a, b) = (y[0], y[1]);
    y[0] = a * c + nz * a + nm * b;
    y[1] = b * c + np * a - nz * b;
}

/// exp(i φ n·S) for spin 1 using (n·S)³ = n·S.
#[inline]
pub(crate) fn exp_one(v: [f64; 3], y: &mut [Complex64]) {
    let phi = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if phi == 0.0 {
        return;
    }
    let n = [v[0] / phi, v[1] / phi, v[2] / phi];
    let (s, c) = phi.sin_cos();
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    // n·S with S_+ = √2 on the superdiagonal
    let np = Complex64::new(n[0], n[1]) * r2;
    let nm = np.conj();
    let apply = |x: [Complex64; 3]| -> [Complex64; 3] {
        [x[0] * n[2] + nm * x[1], np * x[0] + nm * x[2], np * x[1] - x[2] * n[2]]
    };
    let x = [y[0], y[1], y[2]];
    let u = apply(x);
    let w = apply(u);
    let is = Complex64::new(0.0, s);
    for k in 0..3 {
        y[k] = x[k] + is * u[k] + w[k] * (c - 1.0);
    }
}

/// One classical RK4 step of y' = i(b(t)·S)y with the three field samples.
pub(crate) fn rk4_step<G: Generator>(
    gen: &G,
    b0: [f64; 3],
    bh: [f64; 3],
    b1: [f64; 3],
    h: f64,
    y: &mut [Complex64],
    scratch: &mut [Vec<Complex64>; 5],
) {
    let n = y.len();
    for v in scratch.iter_mut() {
        v.resize(n, Complex64::default());
    }
    let [k1, k2, k3, k4, tmp] = scratch;
    gen.apply(b0, y, k1);
    for j in 0..n {
        tmp[j] = y[j] + k1[j] * (0.5 * h);
    }
    gen.apply(bh, tmp, k2);
    for j in 0..n {
        tmp[j] = y[j] + k2[j] * (0.5 * h);
    }
    gen.apply(bh, tmp, k3);
    for j in 0..n {
        tmp[j] = y[j] + k3[j] * h;
    }
    gen.apply(b1, tmp, k4);
    for j in 0..n {
        y[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
    }
}
