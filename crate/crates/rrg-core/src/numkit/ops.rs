//! Differentiable kernels over [`Var`]. Each kernel validates shapes, checks
//! the output for non-finite values, and registers a reverse-mode closure.

use super::array::Array;
use super::var::Var;
use crate::error::{CoreError, Result};
use statrs::function::erf::erf;

const NEG_INF_BIAS: f64 = -1e30;

fn shape_eq(a: &Array, b: &Array, op: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(CoreError::Shape(format!(
            "{op}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Element-wise addition, identical shapes.
pub fn add(a: &Var, b: &Var) -> Result<Var> {
    let (av, bv) = (a.value_clone(), b.value_clone());
    shape_eq(&av, &bv, "add")?;
    let mut out = av;
    out.add_assign(&bv);
    Var::from_op(
        out,
        vec![a.clone(), b.clone()],
        Box::new(|go, parents| {
            parents[0].accumulate_grad(go);
            parents[1].accumulate_grad(go);
        }),
    )
}

/// Add a row vector `b` of width d to every row of `a` (n x d).
pub fn add_rowvec(a: &Var, b: &Var) -> Result<Var> {
    let av = a.value_clone();
    let bv = b.value_clone();
    let (n, d) = (av.rows(), av.cols());
    if bv.len() != d {
        return Err(CoreError::Shape(format!(
            "add_rowvec: row width {} vs vector {}",
            d,
            bv.len()
        )));
    }
    let mut data = av.data().to_vec();
    for r in 0..n {
        for c in 0..d {
            data[r * d + c] += bv.data()[c];
        }
    }
    let out = Array::new(av.shape().to_vec(), data)?;
    Var::from_op(
        out,
        vec![a.clone(), b.clone()],
        Box::new(move |go, parents| {
            parents[0].accumulate_grad(go);
            if parents[1].needs_grad() {
                let d = parents[1].value().len();
                let n = go.len() / d;
                let mut gb = vec![0.0; d];
                for r in 0..n {
                    for c in 0..d {
                        gb[c] += go.data()[r * d + c];
                    }
                }
                let shape = parents[1].value().shape().to_vec();
                parents[1].accumulate_grad(&Array::new(shape, gb).unwrap());
            }
        }),
    )
}

pub fn sub(a: &Var, b: &Var) -> Result<Var> {
    add(a, &scale(b, -1.0)?)
}

/// Element-wise product.
pub fn mul(a: &Var, b: &Var) -> Result<Var> {
    let (av, bv) = (a.value_clone(), b.value_clone());
    shape_eq(&av, &bv, "mul")?;
    let data: Vec<f64> = av
        .data()
        .iter()
        .zip(bv.data())
        .map(|(x, y)| x * y)
        .collect();
    let out = Array::new(av.shape().to_vec(), data)?;
    Var::from_op(
        out,
        vec![a.clone(), b.clone()],
        Box::new(|go, parents| {
            if parents[0].needs_grad() {
                let bv = parents[1].value_clone();
                let g: Vec<f64> = go.data().iter().zip(bv.data()).map(|(g, y)| g * y).collect();
                parents[0].accumulate_grad(&Array::new(go.shape().to_vec(), g).unwrap());
            }
            if parents[1].needs_grad() {
                let av = parents[0].value_clone();
                let g: Vec<f64> = go.data().iter().zip(av.data()).map(|(g, x)| g * x).collect();
                parents[1].accumulate_grad(&Array::new(go.shape().to_vec(), g).unwrap());
            }
        }),
    )
}

pub fn scale(a: &Var, c: f64) -> Result<Var> {
    let av = a.value_clone();
    let data: Vec<f64> = av.data().iter().map(|x| x * c).collect();
    let out = Array::new(av.shape().to_vec(), data)?;
    Var::from_op(
        out,
        vec![a.clone()],
        Box::new(move |go, parents| {
            let g: Vec<f64> = go.data().iter().map(|x| x * c).collect();
            parents[0].accumulate_grad(&Array::new(go.shape().to_vec(), g).unwrap());
        }),
    )
}

pub fn add_scalar(a: &Var, c: f64) -> Result<Var> {
    let av = a.value_clone();
    let data: Vec<f64> = av.data().iter().map(|x| x + c).collect();
    let out = Array::new(av.shape().to_vec(), data)?;
    Var::from_op(
        out,
        vec![a.clone()],
        Box::new(|go, parents| parents[0].accumulate_grad(go)),
    )
}

pub fn exp(a: &Var) -> Result<Var> {
    let av = a.value_clone();
    let data: Vec<f64> = av.data().iter().map(|x| x.exp()).collect();
    let out = Array::new(av.shape().to_vec(), data.clone())?;
    Var::from_op(
        out,
        vec![a.clone()],
        Box::new(move |go, parents| {
            let g: Vec<f64> = go.data().iter().zip(&data).map(|(g, y)| g * y).collect();
            parents[0].accumulate_grad(&Array::new(go.shape().to_vec(), g).unwrap());
        }),
    )
}

/// Clamp to [lo, hi]; gradient passes through strictly inside the interval.
pub fn clamp(a: &Var, lo: f64, hi: f64) -> Result<Var> {
    let av = a.value_clone();
    let data: Vec<f64> = av.data().iter().map(|x| x.clamp(lo, hi)).collect();
    let out = Array::new(av.shape().to_vec(), data)?;
    let inputs = av.data().to_vec();
    Var::from_op(
        out,
        vec![a.clone()],
        Box::new(move |go, parents| {
            let g: Vec<f64> = go
                .data()
                .iter()
                .zip(&inputs)
                .map(|(g, x)| if *x > lo && *x < hi { *g } else { 0.0 })
                .collect();
            parents[0].accumulate_grad(&Array::new(go.shape().to_vec(), g).unwrap());
        }),
    )
}

/// Element-wise minimum; ties route the gradient to `a`.
pub fn minimum(a: &Var, b: &Var) -> Result<Var> {
    let (av, bv) = (a.value_clone(), b.value_clone());
    shape_eq(&av, &bv, "minimum")?;
    let data: Vec<f64> = av
        .data()
        .iter()
        .zip(bv.data())
        .map(|(x, y)| x.min(*y))
        .collect();
    let out = Array::new(av.shape().to_vec(), data)?;
    let (ad, bd) = (av.data().to_vec(), bv.data().to_vec());
    Var::from_op(
        out,
        vec![a.clone(), b.clone()],
        Box::new(move |go, parents| {
            if parents[0].needs_grad() {
                let g: Vec<f64> = go
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, g)| if ad[i] <= bd[i] { *g } else { 0.0 })
                    .collect();
                parents[0].accumulate_grad(&Array::new(go.shape().to_vec(), g).unwrap());
            }
            if parents[1].needs_grad() {
                let g: Vec<f64> = go
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, g)| if bd[i] < ad[i] { *g } else { 0.0 })
                    .collect();
                parents[1].accumulate_grad(&Array::new(go.shape().to_vec(), g).unwrap());
            }
        }),
    )
}

/// Matrix product of (n x k) and (k x m).
pub fn matmul(a: &Var, b: &Var) -> Result<Var> {
    let (av, bv) = (a.value_clone(), b.value_clone());
    let (n, k) = (av.rows(), av.cols());
    let (k2, m) = (bv.rows(), bv.cols());
    if k != k2 {
        return Err(CoreError::Shape(format!(
            "matmul: inner dims {k} vs {k2}"
        )));
    }
    let out = matmul_raw(&av, &bv, n, k, m);
    Var::from_op(
        Array::new(vec![n, m], out)?,
        vec![a.clone(), b.clone()],
        Box::new(move |go, parents| {
            if parents[0].needs_grad() {
                // ga = go . b^T
                let bv = parents[1].value_clone();
                let bt = transpose_raw(&bv);
                let g = matmul_raw(go, &bt, n, m, k);
                parents[0].accumulate_grad(&Array::new(vec![n, k], g).unwrap());
            }
            if parents[1].needs_grad() {
                // gb = a^T . go
                let av = parents[0].value_clone();
                let at = transpose_raw(&av);
                let g = matmul_raw(&at, go, k, n, m);
                parents[1].accumulate_grad(&Array::new(vec![k, m], g).unwrap());
            }
        }),
    )
}

fn matmul_raw(a: &Array, b: &Array, n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..n {
        for l in 0..k {
            let ail = ad[i * k + l];
            if ail == 0.0 {
                continue;
            }
            let brow = &bd[l * m..(l + 1) * m];
            let orow = &mut out[i * m..(i + 1) * m];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += ail * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &Array) -> Array {
    let (n, m) = (a.rows(), a.cols());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            out[j * n + i] = a.at(i, j);
        }
    }
    Array::new(vec![m, n], out).unwrap()
}

pub fn transpose(a: &Var) -> Result<Var> {
    let out = transpose_raw(&a.value_clone());
    Var::from_op(
        out,
        vec![a.clone()],
        Box::new(|go, parents| {
            parents[0].accumulate_grad(&transpose_raw(go));
        }),
    )
}

/// Concatenate 2-D arrays along the row axis.
pub fn concat_rows(vs: &[Var]) -> Result<Var> {
    if vs.is_empty() {
        return Err(CoreError::Shape("concat_rows: empty input".into()));
    }
    let cols = vs[0].value().cols();
    let mut data = Vec::new();
    let mut row_counts = Vec::new();
    for v in vs {
        let a = v.value_clone();
        if a.cols() != cols {
            return Err(CoreError::Shape("concat_rows: column mismatch".into()));
        }
        row_counts.push(a.rows());
        data.extend_from_slice(a.data());
    }
    let total: usize = row_counts.iter().sum();
    Var::from_op(
        Array::new(vec![total, cols], data)?,
        vs.to_vec(),
        Box::new(move |go, parents| {
            let mut r0 = 0;
            for (p, rc) in parents.iter().zip(&row_counts) {
                if p.needs_grad() {
                    let g = &go.data()[r0 * cols..(r0 + rc) * cols];
                    p.accumulate_grad(&Array::new(vec![*rc, cols], g.to_vec()).unwrap());
                }
                r0 += rc;
            }
        }),
    )
}

/// Concatenate 2-D arrays along the column axis.
pub fn concat_cols(vs: &[Var]) -> Result<Var> {
    if vs.is_empty() {
        return Err(CoreError::Shape("concat_cols: empty input".into()));
    }
    let rows = vs[0].value().rows();
    let mut col_counts = Vec::new();
    for v in vs {
        let a = v.value();
        if a.rows() != rows {
            return Err(CoreError::Shape("concat_cols: row mismatch".into()));
        }
        col_counts.push(a.cols());
    }
    let total: usize = col_counts.iter().sum();
    let mut data = vec![0.0; rows * total];
    let mut c0 = 0;
    for (v, cc) in vs.iter().zip(&col_counts) {
        let a = v.value();
        for r in 0..rows {
            data[r * total + c0..r * total + c0 + cc].copy_from_slice(a.row(r));
        }
        c0 += cc;
    }
    Var::from_op(
        Array::new(vec![rows, total], data)?,
        vs.to_vec(),
        Box::new(move |go, parents| {
            let mut c0 = 0;
            for (p, cc) in parents.iter().zip(&col_counts) {
                if p.needs_grad() {
                    let mut g = vec![0.0; rows * cc];
                    for r in 0..rows {
                        g[r * cc..(r + 1) * cc]
                            .copy_from_slice(&go.data()[r * total + c0..r * total + c0 + cc]);
                    }
                    p.accumulate_grad(&Array::new(vec![rows, *cc], g).unwrap());
                }
                c0 += cc;
            }
        }),
    )
}

pub fn slice_rows(a: &Var, start: usize, end: usize) -> Result<Var> {
    let av = a.value_clone();
    let (n, d) = (av.rows(), av.cols());
    if end > n || start > end {
        return Err(CoreError::Shape(format!(
            "slice_rows: [{start}, {end}) out of {n}"
        )));
    }
    let data = av.data()[start * d..end * d].to_vec();
    Var::from_op(
        Array::new(vec![end - start, d], data)?,
        vec![a.clone()],
        Box::new(move |go, parents| {
            let mut g = Array::zeros(vec![n, d]);
            g.data_mut()[start * d..end * d].copy_from_slice(go.data());
            parents[0].accumulate_grad(&g);
        }),
    )
}

pub fn slice_cols(a: &Var, start: usize, end: usize) -> Result<Var> {
    let av = a.value_clone();
    let (n, d) = (av.rows(), av.cols());
    if end > d || start > end {
        return Err(CoreError::Shape(format!(
            "slice_cols: [{start}, {end}) out of {d}"
        )));
    }
    let w = end - start;
    let mut data = vec![0.0; n * w];
    for r in 0..n {
        data[r * w..(r + 1) * w].copy_from_slice(&av.row(r)[start..end]);
    }
    Var::from_op(
        Array::new(vec![n, w], data)?,
        vec![a.clone()],
        Box::new(move |go, parents| {
            let mut g = Array::zeros(vec![n, d]);
            for r in 0..n {
                g.data_mut()[r * d + start..r * d + end]
                    .copy_from_slice(&go.data()[r * w..(r + 1) * w]);
            }
            parents[0].accumulate_grad(&g);
        }),
    )
}

/// Embedding lookup: gathers rows of `table` (v x d) by id.
pub fn gather_rows(table: &Var, ids: &[usize]) -> Result<Var> {
    let tv = table.value_clone();
    let (v, d) = (tv.rows(), tv.cols());
    let mut data = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        if id >= v {
            return Err(CoreError::Shape(format!("gather_rows: id {id} >= {v}")));
        }
        data.extend_from_slice(tv.row(id));
    }
    let ids_owned = ids.to_vec();
    Var::from_op(
        Array::new(vec![ids.len(), d], data)?,
        vec![table.clone()],
        Box::new(move |go, parents| {
            let mut g = Array::zeros(vec![v, d]);
            for (i, &id) in ids_owned.iter().enumerate() {
                for c in 0..d {
                    g.data_mut()[id * d + c] += go.data()[i * d + c];
                }
            }
            parents[0].accumulate_grad(&g);
        }),
    )
}

/// Sum of all elements, returning a scalar.
pub fn sum_all(a: &Var) -> Result<Var> {
    let av = a.value_clone();
    let s: f64 = av.data().iter().sum();
    let shape = av.shape().to_vec();
    Var::from_op(
        Array::scalar(s),
        vec![a.clone()],
        Box::new(move |go, parents| {
            let g = go.item();
            let mut ga = Array::zeros(shape.clone());
            ga.fill(g);
            parents[0].accumulate_grad(&ga);
        }),
    )
}

/// Exact GELU: x * Phi(x) with Phi the standard normal CDF.
pub fn gelu(a: &Var) -> Result<Var> {
    let av = a.value_clone();
    av.check_finite("gelu input")?;
    let inputs = av.data().to_vec();
    let data: Vec<f64> = inputs.iter().map(|&x| x * normal_cdf(x)).collect();
    let out = Array::new(av.shape().to_vec(), data)?;
    Var::from_op(
        out,
        vec![a.clone()],
        Box::new(move |go, parents| {
            let g: Vec<f64> = go
                .data()
                .iter()
                .zip(&inputs)
                .map(|(g, &x)| g * (normal_cdf(x) + x * normal_pdf(x)))
                .collect();
            parents[0].accumulate_grad(&Array::new(go.shape().to_vec(), g).unwrap());
        }),
    )
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Shift-stable softmax over the last axis. Rank-1 inputs are one row.
pub fn softmax_last(a: &Var) -> Result<Var> {
    let av = a.value_clone();
    av.check_finite("softmax input")?;
    let (n, d) = (av.rows(), av.cols());
    if d == 0 {
        return Err(CoreError::Shape("softmax_last: empty last axis".into()));
    }
    let mut data = vec![0.0; n * d];
    for r in 0..n {
        softmax_row(av.row(r), &mut data[r * d..(r + 1) * d]);
    }
    let out = Array::new(av.shape().to_vec(), data.clone())?;
    Var::from_op(
        out,
        vec![a.clone()],
        Box::new(move |go, parents| {
            let mut g = vec![0.0; n * d];
            for r in 0..n {
                let y = &data[r * d..(r + 1) * d];
                let gr = &go.data()[r * d..(r + 1) * d];
                let dot: f64 = y.iter().zip(gr).map(|(y, g)| y * g).sum();
                for c in 0..d {
                    g[r * d + c] = y[c] * (gr[c] - dot);
                }
            }
            parents[0].accumulate_grad(&Array::new(go.shape().to_vec(), g).unwrap());
        }),
    )
}

pub(crate) fn softmax_row(row: &[f64], out: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = (x - m).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

const RMS_EPS: f64 = 1e-6;

/// Row-wise RMS normalisation with a learned gain vector.
pub fn rms_norm(x: &Var, gain: &Var) -> Result<Var> {
    let xv = x.value_clone();
    let gv = gain.value_clone();
    let (n, d) = (xv.rows(), xv.cols());
    if gv.len() != d {
        return Err(CoreError::Shape("rms_norm: gain width mismatch".into()));
    }
    let mut data = vec![0.0; n * d];
    let mut inv_r = vec![0.0; n];
    for r in 0..n {
        let row = xv.row(r);
        let ms = row.iter().map(|v| v * v).sum::<f64>() / d as f64;
        let ir = 1.0 / (ms + RMS_EPS).sqrt();
        inv_r[r] = ir;
        for c in 0..d {
            data[r * d + c] = gv.data()[c] * row[c] * ir;
        }
    }
    let out = Array::new(xv.shape().to_vec(), data)?;
    Var::from_op(
        out,
        vec![x.clone(), gain.clone()],
        Box::new(move |go, parents| {
            let xv = parents[0].value_clone();
            let gv = parents[1].value_clone();
            if parents[0].needs_grad() {
                let mut gx = vec![0.0; n * d];
                for r in 0..n {
                    let row = xv.row(r);
                    let gr = &go.data()[r * d..(r + 1) * d];
                    let ir = inv_r[r];
                    let s: f64 = (0..d).map(|c| gr[c] * gv.data()[c] * row[c]).sum();
                    for c in 0..d {
                        gx[r * d + c] =
                            gv.data()[c] * gr[c] * ir - row[c] * s * ir.powi(3) / d as f64;
                    }
                }
                parents[0].accumulate_grad(&Array::new(vec![n, d], gx).unwrap());
            }
            if parents[1].needs_grad() {
                let mut gg = vec![0.0; d];
                for r in 0..n {
                    let row = xv.row(r);
                    let gr = &go.data()[r * d..(r + 1) * d];
                    for c in 0..d {
                        gg[c] += gr[c] * row[c] * inv_r[r];
                    }
                }
                let shape = parents[1].value().shape().to_vec();
                parents[1].accumulate_grad(&Array::new(shape, gg).unwrap());
            }
        }),
    )
}

/// Rotary position transform: consecutive even/odd column pairs of each row
/// are rotated by angle position * theta_j, theta_j = base^(-2j/dim).
pub fn rotary_apply(x: &Var, position_ids: &[usize], base: f64) -> Result<Var> {
    let xv = x.value_clone();
    let (n, d) = (xv.rows(), xv.cols());
    if d % 2 != 0 {
        return Err(CoreError::Shape(format!("rotary_apply: odd dim {d}")));
    }
    if position_ids.len() != n {
        return Err(CoreError::Shape(format!(
            "rotary_apply: {} position ids for {} rows",
            position_ids.len(),
            n
        )));
    }
    let thetas: Vec<f64> = (0..d / 2)
        .map(|j| base.powf(-2.0 * j as f64 / d as f64))
        .collect();
    let mut data = vec![0.0; n * d];
    for r in 0..n {
        let p = position_ids[r] as f64;
        let row = xv.row(r);
        for j in 0..d / 2 {
            let ang = p * thetas[j];
            let (s, c) = ang.sin_cos();
            let (x0, x1) = (row[2 * j], row[2 * j + 1]);
            data[r * d + 2 * j] = c * x0 - s * x1;
            data[r * d + 2 * j + 1] = s * x0 + c * x1;
        }
    }
    let out = Array::new(xv.shape().to_vec(), data)?;
    let pos = position_ids.to_vec();
    Var::from_op(
        out,
        vec![x.clone()],
        Box::new(move |go, parents| {
            // The inverse rotation propagates the gradient.
            let mut g = vec![0.0; n * d];
            for r in 0..n {
                let p = pos[r] as f64;
                let gr = &go.data()[r * d..(r + 1) * d];
                for j in 0..d / 2 {
                    let ang = p * thetas[j];
                    let (s, c) = ang.sin_cos();
                    let (g0, g1) = (gr[2 * j], gr[2 * j + 1]);
                    g[r * d + 2 * j] = c * g0 + s * g1;
                    g[r * d + 2 * j + 1] = -s * g0 + c * g1;
                }
            }
            parents[0].accumulate_grad(&Array::new(go.shape().to_vec(), g).unwrap());
        }),
    )
}

/// Mean over masked positions of -log softmax(logits)[target].
pub fn cross_entropy(logits: &Var, targets: &[usize], mask: &[u8]) -> Result<Var> {
    let lv = logits.value_clone();
    let (n, v) = (lv.rows(), lv.cols());
    if targets.len() != n || mask.len() != n {
        return Err(CoreError::Shape(
            "cross_entropy: targets/mask length mismatch".into(),
        ));
    }
    let count = mask.iter().filter(|&&m| m != 0).count();
    if count == 0 {
        return Err(CoreError::InvalidArgument(
            "cross_entropy: all-zero mask".into(),
        ));
    }
    let mut probs = vec![0.0; n * v];
    let mut loss = 0.0;
    for r in 0..n {
        if mask[r] == 0 {
            continue;
        }
        let t = targets[r];
        if t >= v {
            return Err(CoreError::InvalidArgument(format!(
                "cross_entropy: target {t} out of vocabulary {v}"
            )));
        }
        softmax_row(lv.row(r), &mut probs[r * v..(r + 1) * v]);
        loss -= probs[r * v + t].max(f64::MIN_POSITIVE).ln();
    }
    loss /= count as f64;
    let targets_owned = targets.to_vec();
    let mask_owned = mask.to_vec();
    Var::from_op(
        Array::scalar(loss),
        vec![logits.clone()],
        Box::new(move |go, parents| {
            let g0 = go.item() / count as f64;
            let mut g = vec![0.0; n * v];
            for r in 0..n {
                if mask_owned[r] == 0 {
                    continue;
                }
                for c in 0..v {
                    g[r * v + c] = g0 * probs[r * v + c];
                }
                g[r * v + targets_owned[r]] -= g0;
            }
            parents[0].accumulate_grad(&Array::new(vec![n, v], g).unwrap());
        }),
    )
}

/// Per-position log-probability of the selected ids: log softmax(logits)[id].
pub fn gather_log_softmax(logits: &Var, ids: &[usize]) -> Result<Var> {
    let lv = logits.value_clone();
    let (n, v) = (lv.rows(), lv.cols());
    if ids.len() != n {
        return Err(CoreError::Shape(
            "gather_log_softmax: ids length mismatch".into(),
        ));
    }
    let mut probs = vec![0.0; n * v];
    let mut out = vec![0.0; n];
    for r in 0..n {
        let id = ids[r];
        if id >= v {
            return Err(CoreError::InvalidArgument(format!(
                "gather_log_softmax: id {id} out of vocabulary {v}"
            )));
        }
        softmax_row(lv.row(r), &mut probs[r * v..(r + 1) * v]);
        out[r] = probs[r * v + id].max(f64::MIN_POSITIVE).ln();
    }
    let ids_owned = ids.to_vec();
    Var::from_op(
        Array::from_vec(out),
        vec![logits.clone()],
        Box::new(move |go, parents| {
            let mut g = vec![0.0; n * v];
            for r in 0..n {
                let gr = go.data()[r];
                for c in 0..v {
                    g[r * v + c] = -gr * probs[r * v + c];
                }
                g[r * v + ids_owned[r]] += gr;
            }
            parents[0].accumulate_grad(&Array::new(vec![n, v], g).unwrap());
        }),
    )
}

/// Masked scaled-dot-product attention. `allowed[i][j]` permits query row i
/// to attend to key row j; disallowed scores receive a large negative bias.
pub fn masked_attention(q: &Var, k: &Var, v: &Var, allowed: &[Vec<bool>]) -> Result<Var> {
    let dh = q.value().cols();
    let nq = q.value().rows();
    let nk = k.value().rows();
    if allowed.len() != nq || allowed.iter().any(|r| r.len() != nk) {
        return Err(CoreError::Shape("masked_attention: mask shape".into()));
    }
    let mut bias = Array::zeros(vec![nq, nk]);
    for (i, row) in allowed.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            if !a {
                bias.set(i, j, NEG_INF_BIAS);
            }
        }
    }
    let scores = scale(&matmul(q, &transpose(k)?)?, 1.0 / (dh as f64).sqrt())?;
    let scores = add(&scores, &Var::constant(bias))?;
    let weights = softmax_last(&scores)?;
    matmul(&weights, v)
}
