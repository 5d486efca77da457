//! Forward and backward passes for a single example.

use super::params::ParamVector;
use super::spec::NetSpec;
use crate::error::{check_dims, Error, Result};

/// Activations recorded by [`forward`], tied to the exact parameters used.
#[derive(Debug, Clone)]
pub struct Cache {
    fingerprint: u64,
    inner: CacheInner,
}

#[derive(Debug, Clone)]
enum CacheInner {
    /// Input to every dense layer (post-ReLU for hidden layers).
    Mlp { acts: Vec<Vec<f64>> },
    Conv { blocks: Vec<ConvCache>, flat: Vec<f64> },
}

#[derive(Debug, Clone)]
struct ConvCache {
    side: usize,
    channels: usize,
    cols: Vec<f64>,
    relu: Vec<f64>,
    argmax: Vec<u32>,
}

/// `c = beta * c + a * b` for row/column-strided dense matrices,
/// `a: m x k`, `b: k x n`, `c: m x n`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: (&[f64], usize, usize),
    b: (&[f64], usize, usize),
    beta: f64,
    c: (&mut [f64], usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols.max(1) - 1) * cs;
    if k > 0 {
        assert!(a.0.len() > last(m, k, a.1, a.2));
        assert!(b.0.len() > last(k, n, b.1, b.2));
    }
    assert!(c.0.len() > last(m, n, c.1, c.2));
    // SAFETY: every index the kernel touches is bounded by the asserts above;
    // `c` does not alias `a` or `b` because it is borrowed mutably.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1 as isize,
            a.2 as isize,
            b.0.as_ptr(),
            b.1 as isize,
            b.2 as isize,
            beta,
            c.0.as_mut_ptr(),
            c.1 as isize,
            c.2 as isize,
        );
    }
}

fn dense_forward(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, bias)| {
            let row = &w[o * n_in..(o + 1) * n_in];
            bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

fn weights<'a>(params: &'a ParamVector, name: &str) -> &'a [f64] {
    params.block(name).expect("layout matches spec")
}

fn check_params(spec: &NetSpec, params: &ParamVector) -> Result<()> {
    spec.validate()?;
    check_dims(spec.param_count(), params.len())
}

fn im2col(x: &[f64], channels: usize, side: usize) -> Vec<f64> {
    let hw = side * side;
    let mut cols = vec![0.0; channels * 9 * hw];
    for c in 0..channels {
        let plane = &x[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(c * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..side {
                    let sy = y + ky;
                    if sy < 1 || sy > side {
                        continue;
                    }
                    let src = &plane[(sy - 1) * side..sy * side];
                    let dst = &mut row[y * side..(y + 1) * side];
                    for x in 0..side {
                        let sx = x + kx;
                        if sx >= 1 && sx <= side {
                            dst[x] = src[sx - 1];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(dcols: &[f64], channels: usize, side: usize) -> Vec<f64> {
    let hw = side * side;
    let mut dx = vec![0.0; channels * hw];
    for c in 0..channels {
        let plane = &mut dx[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &dcols[(c * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..side {
                    let sy = y + ky;
                    if sy < 1 || sy > side {
                        continue;
                    }
                    for x in 0..side {
                        let sx = x + kx;
                        if sx >= 1 && sx <= side {
                            plane[(sy - 1) * side + sx - 1] += row[y * side + x];
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Runs the network on one input and records what [`backward`] needs.
pub fn forward(spec: &NetSpec, params: &ParamVector, input: &[f64]) -> Result<(Vec<f64>, Cache)> {
    check_params(spec, params)?;
    check_dims(spec.input_dim(), input.len())?;
    let (out, inner) = match spec {
        NetSpec::Mlp { widths } => {
            let layers = widths.len() - 1;
            let mut acts = Vec::with_capacity(layers);
            let mut x = input.to_vec();
            for i in 0..layers {
                let mut z = dense_forward(
                    weights(params, &format!("dense{i}.weight")),
                    weights(params, &format!("dense{i}.bias")),
                    &x,
                );
                if i + 1 < layers {
                    z.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                acts.push(std::mem::replace(&mut x, z));
            }
            (x, CacheInner::Mlp { acts })
        }
        NetSpec::Conv { input_size, blocks: n_blocks, filters, .. } => {
            let f = *filters;
            let mut x = input.to_vec();
            let mut side = *input_size;
            let mut channels = 1;
            let mut blocks = Vec::with_capacity(*n_blocks);
            for b in 0..*n_blocks {
                let hw = side * side;
                let cols = im2col(&x, channels, side);
                let w = weights(params, &format!("conv{b}.weight"));
                let bias = weights(params, &format!("conv{b}.bias"));
                let mut z = vec![0.0; f * hw];
                for (o, row) in z.chunks_mut(hw).enumerate() {
                    row.fill(bias[o]);
                }
                let k = channels * 9;
                gemm(f, k, hw, (w, k, 1), (&cols, hw, 1), 1.0, (&mut z, hw, 1));
                z.iter_mut().for_each(|v| *v = v.max(0.0));
                let half = side / 2;
                let mut pooled = vec![0.0; f * half * half];
                let mut argmax = vec![0u32; f * half * half];
                for o in 0..f {
                    for py in 0..half {
                        for px in 0..half {
                            let base = o * hw + 2 * py * side + 2 * px;
                            let mut best = base;
                            for cand in [base + 1, base + side, base + side + 1] {
                                if z[cand] > z[best] {
                                    best = cand;
                                }
                            }
                            let out = o * half * half + py * half + px;
                            pooled[out] = z[best];
                            argmax[out] = best as u32;
                        }
                    }
                }
                blocks.push(ConvCache { side, channels, cols, relu: z, argmax });
                x = pooled;
                side = half;
                channels = f;
            }
            let out = dense_forward(weights(params, "head.weight"), weights(params, "head.bias"), &x);
            (out, CacheInner::Conv { blocks, flat: x })
        }
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "forward pass".into() });
    }
    Ok((out, Cache { fingerprint: params.fingerprint(), inner }))
}

/// Embedding only, without keeping activations.
pub fn embed(spec: &NetSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    forward(spec, params, input).map(|(out, _)| out)
}

fn dense_backward(w: &[f64], x: &[f64], g: &[f64], dw: &mut [f64], db: &mut [f64], want_dx: bool) -> Option<Vec<f64>> {
    let n_in = x.len();
    for (o, go) in g.iter().enumerate() {
        db[o] += go;
        if *go != 0.0 {
            for (d, xi) in dw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                *d += go * xi;
            }
        }
    }
    want_dx.then(|| {
        let mut dx = vec![0.0; n_in];
        for (o, go) in g.iter().enumerate() {
            if *go != 0.0 {
                for (d, wi) in dx.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *d += go * wi;
                }
            }
        }
        dx
    })
}

fn split_block<'a>(grad: &'a mut ParamVector, weight: &str, bias: &str) -> (&'a mut [f64], &'a mut [f64]) {
    let wr = grad.layout.iter().find(|b| b.name == weight).expect("layout").range();
    let br = grad.layout.iter().find(|b| b.name == bias).expect("layout").range();
    debug_assert_eq!(wr.end, br.start);
    let (w, b) = grad.values[wr.start..br.end].split_at_mut(wr.len());
    (w, b)
}

/// Adds the gradient of `output · output_grad` into `grad`.
pub fn backward_into(
    spec: &NetSpec,
    params: &ParamVector,
    cache: &Cache,
    output_grad: &[f64],
    grad: &mut ParamVector,
) -> Result<()> {
    check_params(spec, params)?;
    check_dims(spec.output_dim(), output_grad.len())?;
    check_dims(params.len(), grad.len())?;
    if cache.fingerprint != params.fingerprint() {
        return Err(Error::StaleCache);
    }
    match (&cache.inner, spec) {
        (CacheInner::Mlp { acts }, NetSpec::Mlp { .. }) => {
            let mut g = output_grad.to_vec();
            for i in (0..acts.len()).rev() {
                let wname = format!("dense{i}.weight");
                let w = weights(params, &wname);
                let (dw, db) = split_block(grad, &wname, &format!("dense{i}.bias"));
                let dx = dense_backward(w, &acts[i], &g, dw, db, i > 0);
                if let Some(mut dx) = dx {
                    for (d, a) in dx.iter_mut().zip(&acts[i]) {
                        if *a <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    g = dx;
                }
            }
        }
        (CacheInner::Conv { blocks, flat }, NetSpec::Conv { filters, .. }) => {
            let f = *filters;
            let w = weights(params, "head.weight");
            let (dw, db) = split_block(grad, "head.weight", "head.bias");
            let mut g = dense_backward(w, flat, output_grad, dw, db, true).expect("requested");
            for (b, blk) in blocks.iter().enumerate().rev() {
                let hw = blk.side * blk.side;
                let mut dz = vec![0.0; f * hw];
                for (out, idx) in blk.argmax.iter().enumerate() {
                    if blk.relu[*idx as usize] > 0.0 {
                        dz[*idx as usize] += g[out];
                    }
                }
                let wname = format!("conv{b}.weight");
                let w = weights(params, &wname);
                let (dw, db) = split_block(grad, &wname, &format!("conv{b}.bias"));
                for (o, row) in dz.chunks(hw).enumerate() {
                    db[o] += row.iter().sum::<f64>();
                }
                let k = blk.channels * 9;
                // dW += dz · colsᵀ
                gemm(f, hw, k, (&dz, hw, 1), (&blk.cols, 1, hw), 1.0, (dw, k, 1));
                if b > 0 {
                    // dcols = Wᵀ · dz
                    let mut dcols = vec![0.0; k * hw];
                    gemm(k, f, hw, (w, 1, k), (&dz, hw, 1), 0.0, (&mut dcols, hw, 1));
                    g = col2im(&dcols, blk.channels, blk.side);
                }
            }
        }
        _ => return Err(Error::StaleCache),
    }
    Ok(())
}

/// Gradient of `output · output_grad` with respect to the parameters.
pub fn backward(spec: &NetSpec, params: &ParamVector, cache: &Cache, output_grad: &[f64]) -> Result<ParamVector> {
    let mut grad = params.zeros_like();
    backward_into(spec, params, cache, output_grad, &mut grad)?;
    Ok(grad)
}
