use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{HeadConfig, TaskKind};
use crate::embeddings::EmbeddingTensor;
use crate::error::{Error, Result};
use crate::rng;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum P {
    Conv1W,
    Conv1B,
    Conv2W,
    Conv2B,
    AlignW,
    AlignB,
    LnGain,
    LnBias,
    Wq,
    Bq,
    Wk,
    Bk,
    Wv,
    Bv,
    Wo,
    Bo,
    OutW,
    OutB,
}

const PARAMS: [P; 18] = [
    P::Conv1W,
    P::Conv1B,
    P::Conv2W,
    P::Conv2B,
    P::AlignW,
    P::AlignB,
    P::LnGain,
    P::LnBias,
    P::Wq,
    P::Bq,
    P::Wk,
    P::Bk,
    P::Wv,
    P::Bv,
    P::Wo,
    P::Bo,
    P::OutW,
    P::OutB,
];

impl P {
    fn name(self) -> &'static str {
        match self {
            P::Conv1W => "conv1.weight",
            P::Conv1B => "conv1.bias",
            P::Conv2W => "conv2.weight",
            P::Conv2B => "conv2.bias",
            P::AlignW => "align.weight",
            P::AlignB => "align.bias",
            P::LnGain => "norm.gain",
            P::LnBias => "norm.bias",
            P::Wq => "attn.q.weight",
            P::Bq => "attn.q.bias",
            P::Wk => "attn.k.weight",
            P::Bk => "attn.k.bias",
            P::Wv => "attn.v.weight",
            P::Bv => "attn.v.bias",
            P::Wo => "attn.out.weight",
            P::Bo => "attn.out.bias",
            P::OutW => "proj.weight",
            P::OutB => "proj.bias",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Entry {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Entry {
    fn len(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub entries: Vec<Entry>,
    pub total: usize,
}

impl Layout {
    fn new(c: &HeadConfig) -> Self {
        let k2 = c.conv_kernel * c.conv_kernel;
        let d = c.attention_dim;
        let w2 = c.conv_width().unwrap_or(0);
        let mut offset = 0;
        let entries = PARAMS
            .iter()
            .map(|&p| {
                let (rows, cols) = match p {
                    P::Conv1W => (k2, c.conv1_channels),
                    P::Conv1B => (1, c.conv1_channels),
                    P::Conv2W => (k2 * c.conv1_channels, c.conv2_channels),
                    P::Conv2B => (1, c.conv2_channels),
                    P::AlignW => (w2 * c.conv2_channels, d),
                    P::Wq | P::Wk | P::Wv | P::Wo => (d, d),
                    P::AlignB | P::LnGain | P::LnBias | P::Bq | P::Bk | P::Bv | P::Bo => (1, d),
                    P::OutW => (c.input_groups() * d, c.output_classes),
                    P::OutB => (1, c.output_classes),
                };
                let e = Entry {
                    name: p.name(),
                    rows,
                    cols,
                    offset,
                };
                offset += rows * cols;
                e
            })
            .collect();
        Layout {
            entries,
            total: offset,
        }
    }

    fn entry(&self, p: P) -> &Entry {
        &self.entries[p as usize]
    }
}

/// Training target of one example.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Class(usize),
    Labels(Vec<bool>),
}

/// Valid segments of one or two embeddings, tagged with their input group.
#[derive(Debug, Clone)]
pub struct HeadInput<'a> {
    segments: Vec<(usize, &'a [f32])>,
    frames: usize,
    dim: usize,
    groups: usize,
}

impl<'a> HeadInput<'a> {
    pub fn single(emb: &'a EmbeddingTensor) -> Self {
        HeadInput {
            segments: valid_segments(emb, 0),
            frames: emb.frames_per_segment,
            dim: emb.dim,
            groups: 1,
        }
    }

    /// Two recordings concatenated along the segment axis: `first` fills
    /// slots 0..30, `second` slots 30..60.
    pub fn pair(first: &'a EmbeddingTensor, second: &'a EmbeddingTensor) -> Result<Self> {
        if first.backend_id != second.backend_id {
            return Err(Error::Shape(format!(
                "backend mismatch: `{}` vs `{}`",
                first.backend_id, second.backend_id
            )));
        }
        if first.dim != second.dim || first.frames_per_segment != second.frames_per_segment {
            return Err(Error::Shape(format!(
                "cannot concatenate ({}, {}) with ({}, {})",
                first.frames_per_segment, first.dim, second.frames_per_segment, second.dim
            )));
        }
        let mut segments = valid_segments(first, 0);
        segments.extend(valid_segments(second, 1));
        Ok(HeadInput {
            segments,
            frames: first.frames_per_segment,
            dim: first.dim,
            groups: 2,
        })
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }
}

fn valid_segments(emb: &EmbeddingTensor, group: usize) -> Vec<(usize, &[f32])> {
    (0..emb.n_segments.min(crate::MAX_SEGMENTS))
        .filter(|&i| emb.valid_mask[i])
        .map(|i| (group, emb.segment(i)))
        .collect()
}

/// The trainable conv + attention head.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionHead {
    config: HeadConfig,
    layout: Layout,
    params: Vec<f64>,
}

/// Build a head with seeded initialization. Weights are f32-representable.
pub fn build_head(config: &HeadConfig, seed: u64) -> Result<PredictionHead> {
    config.validate()?;
    let layout = Layout::new(config);
    let mut params = vec![0.0; layout.total];
    let mut rng: ChaCha8Rng = rng::substream(seed, rng::INIT);
    for (&p, e) in PARAMS.iter().zip(&layout.entries) {
        let slot = &mut params[e.offset..e.offset + e.len()];
        let fan_in = e.rows as f64;
        let std = match p {
            P::Conv1W | P::Conv2W => (2.0 / fan_in).sqrt(),
            P::AlignW | P::Wq | P::Wk | P::Wv | P::Wo | P::OutW => (1.0 / fan_in).sqrt(),
            P::LnGain => {
                slot.fill(1.0);
                continue;
            }
            _ => continue,
        };
        let normal = Normal::new(0.0, std).expect("finite std");
        for v in slot.iter_mut() {
            *v = f64::from(normal.sample(&mut rng) as f32);
        }
    }
    Ok(PredictionHead {
        config: config.clone(),
        layout,
        params,
    })
}

/// Activations kept from the forward pass for backpropagation. Convolution
/// internals are recomputed per segment during the backward pass.
struct Trace {
    token_ranges: Vec<(usize, usize)>,
    token_group: Vec<usize>,
    group_counts: Vec<usize>,
    aligned_in: Vec<Array2<f64>>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    h: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    o: Array2<f64>,
    pooled: Array1<f64>,
}

/// Patch matrix of a channel-last (h, w, c) image: rows are output
/// positions, columns `(ky * k + kx) * c + ch`.
fn im2col(
    img: &[f64],
    (h, w, c): (usize, usize, usize),
    cfg: &HeadConfig,
    (ho, wo): (usize, usize),
) -> Array2<f64> {
    let (k, s, p) = (cfg.conv_kernel, cfg.conv_stride, cfg.conv_padding);
    let cols = k * k * c;
    let mut out = vec![0.0; ho * wo * cols];
    for oy in 0..ho {
        for ox in 0..wo {
            let row = &mut out[(oy * wo + ox) * cols..(oy * wo + ox + 1) * cols];
            for ky in 0..k {
                let iy = (oy * s + ky) as isize - p as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * s + kx) as isize - p as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let src = (iy as usize * w + ix as usize) * c;
                    let dst = (ky * k + kx) * c;
                    row[dst..dst + c].copy_from_slice(&img[src..src + c]);
                }
            }
        }
    }
    Array2::from_shape_vec((ho * wo, cols), out).expect("patch shape")
}

/// Adjoint of [`im2col`].
fn col2im(
    cols: ArrayView2<f64>,
    (h, w, c): (usize, usize, usize),
    cfg: &HeadConfig,
    (ho, wo): (usize, usize),
) -> Array2<f64> {
    let (k, s, p) = (cfg.conv_kernel, cfg.conv_stride, cfg.conv_padding);
    let mut img = vec![0.0; h * w * c];
    let cols = cols.as_standard_layout();
    let data = cols.as_slice().expect("standard layout");
    let width = k * k * c;
    for oy in 0..ho {
        for ox in 0..wo {
            let row = &data[(oy * wo + ox) * width..(oy * wo + ox + 1) * width];
            for ky in 0..k {
                let iy = (oy * s + ky) as isize - p as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * s + kx) as isize - p as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let dst = (iy as usize * w + ix as usize) * c;
                    let src = (ky * k + kx) * c;
                    for ch in 0..c {
                        img[dst + ch] += row[src + ch];
                    }
                }
            }
        }
    }
    Array2::from_shape_vec((h * w, c), img).expect("image shape")
}

/// Keeps NaN so corrupt inputs surface as a non-finite loss.
fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| if v < 0.0 { 0.0 } else { v });
}

fn softmax_rows(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Intermediate results of both convolutions on one segment.
struct ConvPass {
    p1: Array2<f64>,
    z1: Array2<f64>,
    p2: Array2<f64>,
    z2: Array2<f64>,
    dims1: (usize, usize),
    dims2: (usize, usize),
}

impl PredictionHead {
    pub fn config(&self) -> &HeadConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// `(name, rows, cols)` of every parameter array, in storage order.
    pub fn param_shapes(&self) -> Vec<(&'static str, usize, usize)> {
        self.layout
            .entries
            .iter()
            .map(|e| (e.name, e.rows, e.cols))
            .collect()
    }

    pub(crate) fn from_parts(config: HeadConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(Error::Checkpoint(format!(
                "{} parameters stored, config needs {}",
                params.len(),
                layout.total
            )));
        }
        Ok(PredictionHead {
            config,
            layout,
            params,
        })
    }

    fn mat(&self, p: P) -> ArrayView2<'_, f64> {
        let e = self.layout.entry(p);
        ArrayView2::from_shape((e.rows, e.cols), &self.params[e.offset..e.offset + e.len()])
            .expect("layout shape")
    }

    fn vec(&self, p: P) -> ArrayView1<'_, f64> {
        let e = self.layout.entry(p);
        ArrayView1::from(&self.params[e.offset..e.offset + e.len()])
    }

    fn check_input(&self, input: &HeadInput) -> Result<()> {
        if input.dim != self.config.input_dim {
            return Err(Error::Shape(format!(
                "embedding dim {} does not match head input_dim {}",
                input.dim, self.config.input_dim
            )));
        }
        if input.groups != self.config.input_groups() {
            return Err(Error::Shape(format!(
                "{} input(s) given to a head expecting {}",
                input.groups,
                self.config.input_groups()
            )));
        }
        if self.config.conv_out(input.frames).and_then(|f| self.config.conv_out(f)).is_none() {
            return Err(Error::Shape(format!("{} frames per segment is too few", input.frames)));
        }
        if input.segments.is_empty() {
            return Err(Error::Shape("no valid segment".into()));
        }
        Ok(())
    }

    fn conv(&self, frames: &[f32], input: &HeadInput) -> ConvPass {
        let c = &self.config;
        let img: Vec<f64> = frames.iter().map(|&v| f64::from(v)).collect();
        let h1 = c.conv_out(input.frames).expect("checked");
        let w1 = c.conv_out(input.dim).expect("checked");
        let h2 = c.conv_out(h1).expect("checked");
        let w2 = c.conv_out(w1).expect("checked");

        let p1 = im2col(&img, (input.frames, input.dim, 1), c, (h1, w1));
        let mut z1 = p1.dot(&self.mat(P::Conv1W));
        z1 += &self.vec(P::Conv1B);
        let mut a1 = z1.clone();
        relu_inplace(&mut a1);
        let p2 = im2col(
            a1.as_slice().expect("standard layout"),
            (h1, w1, c.conv1_channels),
            c,
            (h2, w2),
        );
        let mut z2 = p2.dot(&self.mat(P::Conv2W));
        z2 += &self.vec(P::Conv2B);
        ConvPass {
            p1,
            z1,
            p2,
            z2,
            dims1: (h1, w1),
            dims2: (h2, w2),
        }
    }

    fn forward_trace(&self, input: &HeadInput) -> Result<(Array1<f64>, Trace)> {
        self.check_input(input)?;
        let c = &self.config;
        let d = c.attention_dim;

        let mut aligned_in = Vec::with_capacity(input.segments.len());
        let mut token_ranges = Vec::with_capacity(input.segments.len());
        let mut token_group = Vec::new();
        let mut group_counts = vec![0usize; input.groups];
        let mut blocks = Vec::with_capacity(input.segments.len());
        for &(group, frames) in &input.segments {
            let pass = self.conv(frames, input);
            let (h2, w2) = pass.dims2;
            let mut a2 = pass.z2;
            relu_inplace(&mut a2);
            let a2r = a2
                .into_shape_with_order((h2, w2 * c.conv2_channels))
                .expect("flatten width x channels");
            let mut t = a2r.dot(&self.mat(P::AlignW));
            t += &self.vec(P::AlignB);
            let start = token_group.len();
            token_group.extend(std::iter::repeat_n(group, h2));
            group_counts[group] += h2;
            token_ranges.push((start, start + h2));
            aligned_in.push(a2r);
            blocks.push(t);
        }
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        let t = ndarray::concatenate(Axis(0), &views).expect("equal token width");
        let n = t.nrows();

        // layer norm over features
        let mut xhat = Array2::zeros((n, d));
        let mut inv_std = Array1::zeros(n);
        for (i, row) in t.rows().into_iter().enumerate() {
            let mean = row.sum() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std[i] = is;
            xhat.row_mut(i).assign(&row.mapv(|v| (v - mean) * is));
        }
        let h = &xhat * &self.vec(P::LnGain) + self.vec(P::LnBias);

        let q = h.dot(&self.mat(P::Wq)) + self.vec(P::Bq);
        let k = h.dot(&self.mat(P::Wk)) + self.vec(P::Bk);
        let v = h.dot(&self.mat(P::Wv)) + self.vec(P::Bv);
        let heads = c.attention_heads;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut o = Array2::zeros((n, d));
        let mut probs = Vec::with_capacity(heads);
        for hd in 0..heads {
            let cols = s![.., hd * dh..(hd + 1) * dh];
            let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut scores);
            o.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
            probs.push(scores);
        }
        let z = &h + &(o.dot(&self.mat(P::Wo)) + self.vec(P::Bo));

        let mut pooled = Array1::zeros(input.groups * d);
        for (i, row) in z.rows().into_iter().enumerate() {
            let g = token_group[i];
            let mut slot = pooled.slice_mut(s![g * d..(g + 1) * d]);
            slot.scaled_add(1.0 / group_counts[g] as f64, &row);
        }
        let logits = pooled.dot(&self.mat(P::OutW)) + self.vec(P::OutB);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training("non-finite logits".into()));
        }

        Ok((
            logits,
            Trace {
                token_ranges,
                token_group,
                group_counts,
                aligned_in,
                xhat,
                inv_std,
                h,
                q,
                k,
                v,
                probs,
                o,
                pooled,
            },
        ))
    }

    /// Logits for a prepared input.
    pub fn forward(&self, input: &HeadInput) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.0.to_vec())
    }

    /// Class logits of one recording.
    pub fn forward_classify(&self, emb: &EmbeddingTensor) -> Result<Vec<f64>> {
        if self.config.task_kind == TaskKind::Rank {
            return Err(Error::Shape("ranking head needs two inputs".into()));
        }
        self.forward(&HeadInput::single(emb))
    }

    /// Rank logits of an ordered pair concatenated in time.
    pub fn forward_rank(&self, first: &EmbeddingTensor, second: &EmbeddingTensor) -> Result<Vec<f64>> {
        if self.config.task_kind != TaskKind::Rank {
            return Err(Error::Shape("classification head takes one input".into()));
        }
        self.forward(&HeadInput::pair(first, second)?)
    }

    /// Loss, its gradient with respect to every parameter, and the logits.
    pub fn loss_and_grad(&self, input: &HeadInput, target: &Target) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let (logits, tr) = self.forward_trace(input)?;
        let (loss, dlogits) = loss_and_dlogits(&logits, target, self.config.task_kind)?;
        let mut grad = vec![0.0; self.layout.total];
        self.backward(input, &tr, &dlogits, &mut grad);
        Ok((loss, grad, logits.to_vec()))
    }

    /// Loss only; used by finite-difference checks.
    pub fn loss(&self, input: &HeadInput, target: &Target) -> Result<f64> {
        let (logits, _) = self.forward_trace(input)?;
        Ok(loss_and_dlogits(&logits, target, self.config.task_kind)?.0)
    }

    fn grad_slot<'g>(&self, grad: &'g mut [f64], p: P) -> ndarray::ArrayViewMut2<'g, f64> {
        let e = self.layout.entry(p);
        ndarray::ArrayViewMut2::from_shape((e.rows, e.cols), &mut grad[e.offset..e.offset + e.len()])
            .expect("layout shape")
    }

    fn add_grad(&self, grad: &mut [f64], p: P, value: ArrayView2<f64>) {
        let mut slot = self.grad_slot(grad, p);
        slot += &value;
    }

    fn add_bias_grad(&self, grad: &mut [f64], p: P, rows_of: &Array2<f64>) {
        let sum = rows_of.sum_axis(Axis(0));
        let mut slot = self.grad_slot(grad, p);
        slot.row_mut(0).scaled_add(1.0, &sum);
    }

    fn backward(&self, input: &HeadInput, tr: &Trace, dlogits: &Array1<f64>, grad: &mut [f64]) {
        let c = &self.config;
        let d = c.attention_dim;
        let n = tr.h.nrows();

        // projection
        let outer = tr
            .pooled
            .view()
            .insert_axis(Axis(1))
            .dot(&dlogits.view().insert_axis(Axis(0)));
        self.add_grad(grad, P::OutW, outer.view());
        self.grad_slot(grad, P::OutB).row_mut(0).scaled_add(1.0, dlogits);
        let dpooled = self.mat(P::OutW).dot(dlogits);

        // mean pooling
        let mut dz = Array2::zeros((n, d));
        for (i, mut row) in dz.rows_mut().into_iter().enumerate() {
            let g = tr.token_group[i];
            row.assign(&dpooled.slice(s![g * d..(g + 1) * d]));
            row /= tr.group_counts[g] as f64;
        }

        // attention with residual
        let mut dh = dz.clone();
        self.add_grad(grad, P::Wo, tr.o.t().dot(&dz).view());
        self.add_bias_grad(grad, P::Bo, &dz);
        let d_o = dz.dot(&self.mat(P::Wo).t());
        let heads = c.attention_heads;
        let dhd = d / heads;
        let scale = 1.0 / (dhd as f64).sqrt();
        let mut dq = Array2::zeros((n, d));
        let mut dk = Array2::zeros((n, d));
        let mut dv = Array2::zeros((n, d));
        for hd in 0..heads {
            let cols = s![.., hd * dhd..(hd + 1) * dhd];
            let p = &tr.probs[hd];
            let d_oh = d_o.slice(cols);
            let dp = d_oh.dot(&tr.v.slice(cols).t());
            dv.slice_mut(cols).assign(&p.t().dot(&d_oh));
            let row_dot = (&dp * p).sum_axis(Axis(1));
            let ds = (dp - &row_dot.insert_axis(Axis(1))) * p * scale;
            dq.slice_mut(cols).assign(&ds.dot(&tr.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&tr.q.slice(cols)));
        }
        for (dproj, w, b) in [(&dq, P::Wq, P::Bq), (&dk, P::Wk, P::Bk), (&dv, P::Wv, P::Bv)] {
            self.add_grad(grad, w, tr.h.t().dot(dproj).view());
            self.add_bias_grad(grad, b, dproj);
            dh += &dproj.dot(&self.mat(w).t());
        }

        // layer norm
        let gain = self.vec(P::LnGain);
        let dgain = (&dh * &tr.xhat).sum_axis(Axis(0));
        self.grad_slot(grad, P::LnGain).row_mut(0).scaled_add(1.0, &dgain);
        self.add_bias_grad(grad, P::LnBias, &dh);
        let dxhat = &dh * &gain;
        let mut dt = Array2::zeros((n, d));
        for i in 0..n {
            let dx = dxhat.row(i);
            let xh = tr.xhat.row(i);
            let mean_dx = dx.sum() / d as f64;
            let mean_dx_xh = dx.dot(&xh) / d as f64;
            let mut out = dt.row_mut(i);
            out.assign(&((&dx - mean_dx - &(&xh * mean_dx_xh)) * tr.inv_std[i]));
        }

        // per-segment align + convolutions
        for (seg, &(start, end)) in tr.token_ranges.iter().enumerate() {
            let dt_s = dt.slice(s![start..end, ..]);
            let a2r = &tr.aligned_in[seg];
            self.add_grad(grad, P::AlignW, a2r.t().dot(&dt_s).view());
            let colsum = dt_s.sum_axis(Axis(0));
            self.grad_slot(grad, P::AlignB).row_mut(0).scaled_add(1.0, &colsum);
            let da2r = dt_s.dot(&self.mat(P::AlignW).t());

            let pass = self.conv(input.segments[seg].1, input);
            let (h2, w2) = pass.dims2;
            let mut dz2 = da2r
                .into_shape_with_order((h2 * w2, c.conv2_channels))
                .expect("unflatten");
            ndarray::Zip::from(&mut dz2).and(&pass.z2).for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
            self.add_grad(grad, P::Conv2W, pass.p2.t().dot(&dz2).view());
            self.add_bias_grad(grad, P::Conv2B, &dz2);
            let dp2 = dz2.dot(&self.mat(P::Conv2W).t());
            let (h1, w1) = pass.dims1;
            let mut dz1 = col2im(dp2.view(), (h1, w1, c.conv1_channels), c, (h2, w2));
            ndarray::Zip::from(&mut dz1).and(&pass.z1).for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
            self.add_grad(grad, P::Conv1W, pass.p1.t().dot(&dz1).view());
            self.add_bias_grad(grad, P::Conv1B, &dz1);
        }
    }
}

/// Softmax cross-entropy for single-label targets, mean per-class binary
/// cross-entropy for multi-label targets.
pub(crate) fn loss_and_dlogits(
    logits: &Array1<f64>,
    target: &Target,
    kind: TaskKind,
) -> Result<(f64, Array1<f64>)> {
    let k = logits.len();
    match (kind, target) {
        (TaskKind::Rank | TaskKind::Multiclass, Target::Class(y)) => {
            if *y >= k {
                return Err(Error::Training(format!("class {y} out of range for {k} outputs")));
            }
            let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let exp = logits.mapv(|v| (v - max).exp());
            let sum = exp.sum();
            let loss = sum.ln() + max - logits[*y];
            let mut d = exp / sum;
            d[*y] -= 1.0;
            Ok((loss, d))
        }
        (TaskKind::Multilabel, Target::Labels(labels)) => {
            if labels.len() != k {
                return Err(Error::Training(format!("{} labels for {k} outputs", labels.len())));
            }
            let mut loss = 0.0;
            let mut d = Array1::zeros(k);
            for (i, (&z, &y)) in logits.iter().zip(labels).enumerate() {
                let y = f64::from(u8::from(y));
                // softplus(z) - y z, computed stably
                loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
                d[i] = (1.0 / (1.0 + (-z).exp()) - y) / k as f64;
            }
            Ok((loss / k as f64, d))
        }
        _ => Err(Error::Training(format!("target {target:?} does not fit task {kind:?}"))),
    }
}
