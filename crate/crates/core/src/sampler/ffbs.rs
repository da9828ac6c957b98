//! Forward filtering, backward sampling for the non-centered coefficient paths.
//!
//! State `x_t` (dimension `p`) follows `x_t = x_{t-1} + u_t`, `u_t ~ N(0, I)`, `x_0 = 0`.
//! Each period carries `m` scalar observations `y_tk = h_tk' x_t + e_tk`,
//! `e_tk ~ N(0, var_k)`, absorbed one at a time. Small dense algebra is done on flat
//! row-major slices to keep the per-sweep cost allocation-free in the inner loops.

use rand::Rng;

use crate::linalg::standard_normal;

/// Observation layout for one group of units.
#[derive(Debug, Clone, Copy)]
pub struct StateSpace<'a> {
    pub p: usize,
    pub t_len: usize,
    /// Observations per period.
    pub m: usize,
    /// Loadings, `t_len * m * p`, period-major.
    pub h: &'a [f64],
    /// Observations, `t_len * m`.
    pub y: &'a [f64],
    /// Noise variance of observation slot `k`, length `m`.
    pub var: &'a [f64],
}

/// Filtered means (`t_len * p`) and covariances (`t_len * p * p`).
#[derive(Debug, Clone)]
pub struct Filtered {
    pub p: usize,
    pub t_len: usize,
    pub means: Vec<f64>,
    pub covs: Vec<f64>,
}

impl Filtered {
    pub fn mean(&self, t: usize) -> &[f64] {
        &self.means[t * self.p..(t + 1) * self.p]
    }

    pub fn cov(&self, t: usize) -> &[f64] {
        let q = self.p * self.p;
        &self.covs[t * q..(t + 1) * q]
    }
}

pub fn kalman_filter(ss: &StateSpace<'_>) -> Filtered {
    let p = ss.p;
    let mut means = vec![0.0; ss.t_len * p];
    let mut covs = vec![0.0; ss.t_len * p * p];
    let mut m = vec![0.0; p];
    let mut r = vec![0.0; p * p];
    let mut rh = vec![0.0; p];
    for t in 0..ss.t_len {
        // predict: covariance grows by the identity
        for j in 0..p {
            r[j * p + j] += 1.0;
        }
        for k in 0..ss.m {
            let h = &ss.h[(t * ss.m + k) * p..(t * ss.m + k + 1) * p];
            let mut hm = 0.0;
            let mut f = ss.var[k];
            for a in 0..p {
                let mut s = 0.0;
                for b in 0..p {
                    s += r[a * p + b] * h[b];
                }
                rh[a] = s;
                hm += h[a] * m[a];
                f += h[a] * s;
            }
            let innov = ss.y[t * ss.m + k] - hm;
            for a in 0..p {
                m[a] += rh[a] * innov / f;
            }
            for a in 0..p {
                for b in 0..p {
                    r[a * p + b] -= rh[a] * rh[b] / f;
                }
            }
            symmetrize(&mut r, p);
        }
        means[t * p..(t + 1) * p].copy_from_slice(&m);
        covs[t * p * p..(t + 1) * p * p].copy_from_slice(&r);
    }
    Filtered {
        p,
        t_len: ss.t_len,
        means,
        covs,
    }
}

/// One joint draw of `x_1..x_T` from the smoothing distribution, `t_len * p`.
pub fn backward_sample<R: Rng + ?Sized>(f: &Filtered, rng: &mut R) -> Vec<f64> {
    let p = f.p;
    let mut out = vec![0.0; f.t_len * p];
    let mut cov = f.cov(f.t_len - 1).to_vec();
    let mut mean = f.mean(f.t_len - 1).to_vec();
    let mut ws = Workspace::new(p);
    draw_into(&mean, &mut cov, p, rng, &mut ws, &mut out[(f.t_len - 1) * p..]);
    for t in (0..f.t_len - 1).rev() {
        let (head, tail) = out.split_at_mut((t + 1) * p);
        conditional_step(f.mean(t), f.cov(t), &tail[..p], p, &mut ws, &mut mean, &mut cov);
        draw_into(&mean, &mut cov, p, rng, &mut ws, &mut head[t * p..]);
    }
    out
}

/// Rauch-Tung-Striebel smoothed means (`t_len * p`) and covariances (`t_len * p * p`).
pub fn smooth(f: &Filtered) -> (Vec<f64>, Vec<f64>) {
    let p = f.p;
    let q = p * p;
    let mut means = f.means.clone();
    let mut covs = f.covs.clone();
    let mut ws = Workspace::new(p);
    for t in (0..f.t_len.saturating_sub(1)).rev() {
        // J = P_t (P_t + I)^{-1}
        let pt = f.cov(t);
        let j = gain(pt, p, &mut ws);
        let (ms_next, ps_next) = (
            means[(t + 1) * p..(t + 2) * p].to_vec(),
            covs[(t + 1) * q..(t + 2) * q].to_vec(),
        );
        let mf = f.mean(t);
        for a in 0..p {
            let mut s = 0.0;
            for b in 0..p {
                // predicted mean at t+1 equals the filtered mean at t
                s += j[a * p + b] * (ms_next[b] - mf[b]);
            }
            means[t * p + a] = mf[a] + s;
        }
        // P_s = P_t + J (P_s(t+1) - (P_t + I)) J'
        let mut d = ps_next;
        for a in 0..p {
            for b in 0..p {
                d[a * p + b] -= pt[a * p + b] + if a == b { 1.0 } else { 0.0 };
            }
        }
        let jd = matmul(&j, &d, p);
        for a in 0..p {
            for b in 0..p {
                let mut s = 0.0;
                for c in 0..p {
                    s += jd[a * p + c] * j[b * p + c];
                }
                covs[t * q + a * p + b] = pt[a * p + b] + s;
            }
        }
    }
    (means, covs)
}

struct Workspace {
    a: Vec<f64>,
    z: Vec<f64>,
}

impl Workspace {
    fn new(p: usize) -> Self {
        Self {
            a: vec![0.0; p * p],
            z: vec![0.0; p],
        }
    }
}

/// `J = P (P + I)^{-1}`, using symmetry of both factors: `J' = (P + I)^{-1} P`.
fn gain(pt: &[f64], p: usize, ws: &mut Workspace) -> Vec<f64> {
    ws.a.copy_from_slice(pt);
    for a in 0..p {
        ws.a[a * p + a] += 1.0;
    }
    // P + I has eigenvalues >= 1, so the factorization cannot fail
    cholesky_in_place(&mut ws.a, p);
    let mut jt = pt.to_vec();
    for col in 0..p {
        let mut v: Vec<f64> = (0..p).map(|r| jt[r * p + col]).collect();
        chol_solve(&ws.a, p, &mut v);
        for r in 0..p {
            jt[r * p + col] = v[r];
        }
    }
    transpose(&jt, p)
}

fn conditional_step(
    mf: &[f64],
    pt: &[f64],
    next: &[f64],
    p: usize,
    ws: &mut Workspace,
    mean: &mut [f64],
    cov: &mut [f64],
) {
    let j = gain(pt, p, ws);
    for a in 0..p {
        let mut s = 0.0;
        for b in 0..p {
            s += j[a * p + b] * (next[b] - mf[b]);
        }
        mean[a] = mf[a] + s;
    }
    let jp = matmul(&j, pt, p);
    for k in 0..p * p {
        cov[k] = pt[k] - jp[k];
    }
    symmetrize(cov, p);
}

/// `out = mean + chol(cov) z`; `cov` is overwritten. Zero-variance directions
/// (possible in unloaded components only through rounding) get a tiny jitter.
fn draw_into<R: Rng + ?Sized>(
    mean: &[f64],
    cov: &mut [f64],
    p: usize,
    rng: &mut R,
    ws: &mut Workspace,
    out: &mut [f64],
) {
    let scale = (0..p).map(|a| cov[a * p + a].abs()).fold(1e-300, f64::max);
    let mut jitter = 0.0;
    loop {
        ws.a.copy_from_slice(cov);
        for a in 0..p {
            ws.a[a * p + a] += jitter;
        }
        if cholesky_in_place(&mut ws.a, p) {
            break;
        }
        jitter = if jitter == 0.0 { 1e-14 * scale } else { jitter * 10.0 };
    }
    for z in ws.z.iter_mut() {
        *z = standard_normal(rng);
    }
    for a in 0..p {
        let mut s = mean[a];
        for b in 0..=a {
            s += ws.a[a * p + b] * ws.z[b];
        }
        out[a] = s;
    }
}

/// Lower Cholesky factor written into the lower triangle of `a`; `false` if not PD.
fn cholesky_in_place(a: &mut [f64], p: usize) -> bool {
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
        for i in 0..j {
            a[i * p + j] = 0.0;
        }
    }
    true
}

fn chol_solve(l: &[f64], p: usize, v: &mut [f64]) {
    for i in 0..p {
        let mut s = v[i];
        for k in 0..i {
            s -= l[i * p + k] * v[k];
        }
        v[i] = s / l[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = v[i];
        for k in i + 1..p {
            s -= l[k * p + i] * v[k];
        }
        v[i] = s / l[i * p + i];
    }
}

fn matmul(a: &[f64], b: &[f64], p: usize) -> Vec<f64> {
    let mut c = vec![0.0; p * p];
    for i in 0..p {
        for k in 0..p {
            let aik = a[i * p + k];
            for j in 0..p {
                c[i * p + j] += aik * b[k * p + j];
            }
        }
    }
    c
}

fn transpose(a: &[f64], p: usize) -> Vec<f64> {
    let mut t = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            t[j * p + i] = a[i * p + j];
        }
    }
    t
}

fn symmetrize(a: &mut [f64], p: usize) {
    for i in 0..p {
        for j in i + 1..p {
            let v = 0.5 * (a[i * p + j] + a[j * p + i]);
            a[i * p + j] = v;
            a[j * p + i] = v;
        }
    }
}
