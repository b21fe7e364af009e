//! Scalar loop references shared by the integration tests.
#![allow(dead_code)]

use croi::nn::{ParamStore, Tensor};

pub type Plane = Vec<Vec<Vec<f64>>>;

pub fn plane(t: &Tensor<f64>) -> Plane {
    let [c, h, w] = t.shape();
    (0..c).map(|ci| (0..h).map(|i| (0..w).map(|j| t.get(ci, i, j)).collect()).collect()).collect()
}

fn param(store: &ParamStore<f64>, name: &str) -> Tensor<f64> {
    store.get(store.find(name).unwrap_or_else(|| panic!("no parameter {name}"))).clone()
}

/// Zero-padded cross-correlation with padding `k / 2`.
pub fn conv(x: &Plane, store: &ParamStore<f64>, name: &str, k: usize, stride: usize) -> Plane {
    let w = param(store, &format!("{name}.weight"));
    let b = param(store, &format!("{name}.bias"));
    let [cout, cin, _] = w.shape();
    let (h, wd) = (x[0].len() as isize, x[0][0].len() as isize);
    let p = (k / 2) as isize;
    let oh = ((h + 2 * p - k as isize) / stride as isize + 1) as usize;
    let ow = ((wd + 2 * p - k as isize) / stride as isize + 1) as usize;
    let mut out = vec![vec![vec![0.0; ow]; oh]; cout];
    for o in 0..cout {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = b.get(o, 0, 0);
                for c in 0..cin {
                    for ki in 0..k {
                        for kj in 0..k {
                            let yi = (i * stride) as isize + ki as isize - p;
                            let xj = (j * stride) as isize + kj as isize - p;
                            if yi >= 0 && yi < h && xj >= 0 && xj < wd {
                                acc += w.get(o, c, ki * k + kj) * x[c][yi as usize][xj as usize];
                            }
                        }
                    }
                }
                out[o][i][j] = acc;
            }
        }
    }
    out
}

/// Transposed convolution by scattering, output exactly `stride` times larger.
pub fn deconv(x: &Plane, store: &ParamStore<f64>, name: &str, k: usize, stride: usize) -> Plane {
    let w = param(store, &format!("{name}.weight"));
    let b = param(store, &format!("{name}.bias"));
    let [cin, cout, _] = w.shape();
    let (h, wd) = (x[0].len(), x[0][0].len());
    let (oh, ow) = (h * stride, wd * stride);
    let p = (k / 2) as isize;
    let mut out = vec![vec![vec![0.0; ow]; oh]; cout];
    for (o, row) in out.iter_mut().enumerate() {
        for r in row.iter_mut() {
            r.iter_mut().for_each(|v| *v = b.get(o, 0, 0));
        }
    }
    for c in 0..cin {
        for i in 0..h {
            for j in 0..wd {
                for o in 0..cout {
                    for ki in 0..k {
                        for kj in 0..k {
                            let yi = (i * stride) as isize + ki as isize - p;
                            let xj = (j * stride) as isize + kj as isize - p;
                            if yi >= 0 && (yi as usize) < oh && xj >= 0 && (xj as usize) < ow {
                                out[o][yi as usize][xj as usize] += w.get(c, o, ki * k + kj) * x[c][i][j];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `x_i / sqrt(beta_i + sum_j gamma_ij x_j^2)` (or times, when inverse).
pub fn gdn(x: &Plane, store: &ParamStore<f64>, name: &str, inverse: bool) -> Plane {
    let gp = param(store, &format!("{name}.gamma"));
    let bp = param(store, &format!("{name}.beta"));
    let n = x.len();
    let mut out = x.clone();
    for i in 0..x[0].len() {
        for j in 0..x[0][0].len() {
            for c in 0..n {
                let b = bp.get(c, 0, 0);
                let mut norm = b * b + 1e-6;
                for d in 0..n {
                    let g = gp.get(c, d, 0);
                    norm += g * g * x[d][i][j] * x[d][i][j];
                }
                out[c][i][j] = if inverse { x[c][i][j] * norm.sqrt() } else { x[c][i][j] / norm.sqrt() };
            }
        }
    }
    out
}

pub fn map(x: &Plane, f: impl Fn(f64) -> f64) -> Plane {
    x.iter().map(|c| c.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect()).collect()
}

pub fn max_abs_diff(a: &Plane, b: &Tensor<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    assert_eq!([a.len(), a[0].len(), a[0][0].len()], b.shape());
    for (c, ch) in a.iter().enumerate() {
        for (i, row) in ch.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                worst = worst.max((v - b.get(c, i, j)).abs());
            }
        }
    }
    worst
}
