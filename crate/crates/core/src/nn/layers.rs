use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParameterSet};
use super::tensor::{axpy, dot, Tensor};
use crate::error::{Error, Result};

/// One stage of a layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        kernel: usize,
        stride: usize,
        filters: usize,
        padding: usize,
    },
    FullyConnected {
        inputs: usize,
        outputs: usize,
    },
    Relu,
    /// Joins two feature vectors end to end. Only valid at the join point of
    /// the two-head network; a [`Sequential`] rejects it.
    Concat,
}

impl LayerSpec {
    /// Convolution with symmetric padding `(kernel - stride) / 2`, which makes
    /// the output exactly `input / stride` when the sizes divide.
    pub fn conv(kernel: usize, stride: usize, filters: usize) -> Self {
        LayerSpec::Conv2d {
            kernel,
            stride,
            filters,
            padding: kernel.saturating_sub(stride) / 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(
        input: [usize; 3],
        kernel: usize,
        stride: usize,
        filters: usize,
        padding: usize,
    ) -> Option<Self> {
        let [in_channels, in_h, in_w] = input;
        if kernel == 0 || stride == 0 || filters == 0 {
            return None;
        }
        if in_h + 2 * padding < kernel || in_w + 2 * padding < kernel {
            return None;
        }
        Some(ConvGeometry {
            in_channels,
            in_h,
            in_w,
            filters,
            kernel,
            stride,
            padding,
        })
    }

    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn output_shape(&self) -> [usize; 3] {
        [self.filters, self.out_h(), self.out_w()]
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn out_len(&self) -> usize {
        self.out_h() * self.out_w()
    }

    /// Unfolds the padded input into a `(C*k*k) x (Ho*Wo)` matrix.
    fn im2col(&self, x: &[f64], cols: &mut Vec<f64>) {
        let (k, s, p) = (self.kernel, self.stride, self.padding as isize);
        let (ho, wo) = (self.out_h(), self.out_w());
        let n = ho * wo;
        cols.clear();
        cols.resize(self.patch_len() * n, 0.0);
        for c in 0..self.in_channels {
            let plane = &x[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ki in 0..k {
                for kj in 0..k {
                    let r = (c * k + ki) * k + kj;
                    let row = &mut cols[r * n..(r + 1) * n];
                    for oy in 0..ho {
                        let iy = (oy * s + ki) as isize - p;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * self.in_w..(iy as usize + 1) * self.in_w];
                        let dst = &mut row[oy * wo..(oy + 1) * wo];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * s + kj) as isize - p;
                            if ix >= 0 && ix < self.in_w as isize {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`im2col`](Self::im2col): scatters column gradients back.
    fn col2im(&self, cols: &[f64], dx: &mut [f64]) {
        let (k, s, p) = (self.kernel, self.stride, self.padding as isize);
        let (ho, wo) = (self.out_h(), self.out_w());
        let n = ho * wo;
        for c in 0..self.in_channels {
            let plane = &mut dx[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ki in 0..k {
                for kj in 0..k {
                    let r = (c * k + ki) * k + kj;
                    let row = &cols[r * n..(r + 1) * n];
                    for oy in 0..ho {
                        let iy = (oy * s + ki) as isize - p;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        let dst =
                            &mut plane[iy as usize * self.in_w..(iy as usize + 1) * self.in_w];
                        for (ox, g) in row[oy * wo..(oy + 1) * wo].iter().enumerate() {
                            let ix = (ox * s + kj) as isize - p;
                            if ix >= 0 && ix < self.in_w as isize {
                                dst[ix as usize] += g;
                            }
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Layer {
    Conv {
        geom: ConvGeometry,
        weight: ParamId,
        bias: ParamId,
    },
    Linear {
        inputs: usize,
        outputs: usize,
        weight: ParamId,
        bias: ParamId,
    },
    Relu,
}

/// Activations recorded by a forward pass: the input of every layer.
#[derive(Debug, Clone, Default)]
pub struct SeqCache {
    inputs: Vec<Vec<f64>>,
}

impl SeqCache {
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// A chain of conv / fully-connected / ReLU layers whose weights live in a
/// shared [`ParameterSet`].
#[derive(Debug, Clone)]
pub struct Sequential {
    name: String,
    layers: Vec<Layer>,
    shapes: Vec<Vec<usize>>,
}

impl Sequential {
    /// Builds the stack, registering parameters under `prefix.{index}.w/b`.
    pub fn build(
        prefix: &str,
        specs: &[LayerSpec],
        input_shape: &[usize],
        params: &mut ParameterSet,
    ) -> Result<Self> {
        let mut shapes = vec![input_shape.to_vec()];
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let cur = shapes.last().unwrap().clone();
            let lname = format!("{prefix}.{i}");
            let bad = |expected: Vec<usize>| Error::Shape {
                layer: lname.clone(),
                expected,
                got: cur.clone(),
            };
            match *spec {
                LayerSpec::Conv2d {
                    kernel,
                    stride,
                    filters,
                    padding,
                } => {
                    let [c, h, w] =
                        <[usize; 3]>::try_from(cur.as_slice()).map_err(|_| bad(vec![0, 0, 0]))?;
                    let geom = ConvGeometry::new([c, h, w], kernel, stride, filters, padding)
                        .ok_or_else(|| bad(vec![c, kernel, kernel]))?;
                    let weight = params.add(format!("{lname}.w"), &[filters, c, kernel, kernel]);
                    let bias = params.add(format!("{lname}.b"), &[filters]);
                    shapes.push(geom.output_shape().to_vec());
                    layers.push(Layer::Conv { geom, weight, bias });
                }
                LayerSpec::FullyConnected { inputs, outputs } => {
                    let n: usize = cur.iter().product();
                    if n != inputs {
                        return Err(bad(vec![inputs]));
                    }
                    let weight = params.add(format!("{lname}.w"), &[outputs, inputs]);
                    let bias = params.add(format!("{lname}.b"), &[outputs]);
                    shapes.push(vec![outputs]);
                    layers.push(Layer::Linear {
                        inputs,
                        outputs,
                        weight,
                        bias,
                    });
                }
                LayerSpec::Relu => {
                    shapes.push(cur.clone());
                    layers.push(Layer::Relu);
                }
                LayerSpec::Concat => {
                    return Err(Error::config(
                        lname,
                        "concat is only valid at the two-head join",
                    ))
                }
            }
        }
        Ok(Sequential {
            name: prefix.to_string(),
            layers,
            shapes,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut ParameterSet, rng: &mut R) {
        for layer in &self.layers {
            match layer {
                Layer::Conv { geom, weight, bias } => {
                    let k2 = geom.kernel * geom.kernel;
                    params.init_glorot(*weight, geom.in_channels * k2, geom.filters * k2, rng);
                    params.value_mut(*bias).fill(0.0);
                }
                Layer::Linear {
                    inputs,
                    outputs,
                    weight,
                    bias,
                } => {
                    params.init_glorot(*weight, *inputs, *outputs, rng);
                    params.value_mut(*bias).fill(0.0);
                }
                Layer::Relu => {}
            }
        }
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.shapes[0]
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    /// Shapes of the input and of every layer output, in order.
    pub fn shape_chain(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn input_len(&self) -> usize {
        self.shapes[0].iter().product()
    }

    pub fn output_len(&self) -> usize {
        self.output_shape().iter().product()
    }

    pub fn forward(
        &self,
        params: &ParameterSet,
        input: &[f64],
        mut cache: Option<&mut SeqCache>,
    ) -> Result<Vec<f64>> {
        if input.len() != self.input_len() {
            return Err(Error::Shape {
                layer: format!("{}.0", self.name),
                expected: self.shapes[0].clone(),
                got: vec![input.len()],
            });
        }
        if let Some(c) = cache.as_deref_mut() {
            c.inputs.clear();
        }
        let values = params.values();
        let mut x = input.to_vec();
        let mut cols = Vec::new();
        for layer in &self.layers {
            let y = match layer {
                Layer::Conv { geom, weight, bias } => conv_forward(
                    geom,
                    values[weight.0].data(),
                    values[bias.0].data(),
                    &x,
                    &mut cols,
                ),
                Layer::Linear {
                    inputs,
                    outputs,
                    weight,
                    bias,
                } => linear_forward(
                    *inputs,
                    *outputs,
                    values[weight.0].data(),
                    values[bias.0].data(),
                    &x,
                ),
                Layer::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
            };
            match cache.as_deref_mut() {
                Some(c) => c.inputs.push(std::mem::replace(&mut x, y)),
                None => x = y,
            }
        }
        Ok(x)
    }

    /// Accumulates parameter gradients for `upstream = dL/d(output)` and
    /// returns `dL/d(input)` when requested.
    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &SeqCache,
        upstream: &[f64],
        need_input_grad: bool,
    ) -> Result<Option<Vec<f64>>> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::MissingCache(self.name.clone()));
        }
        if upstream.len() != self.output_len() {
            return Err(Error::Shape {
                layer: self.name.clone(),
                expected: self.output_shape().to_vec(),
                got: vec![upstream.len()],
            });
        }
        let (values, grads) = params.split();
        let mut g = upstream.to_vec();
        let mut cols = Vec::new();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let want_dx = i > 0 || need_input_grad;
            let x = &cache.inputs[i];
            g = match layer {
                Layer::Conv { geom, weight, bias } => {
                    let (gw, gb) = two_mut(grads, weight.0, bias.0);
                    conv_backward(
                        geom,
                        values[weight.0].data(),
                        gw.data_mut(),
                        gb.data_mut(),
                        x,
                        &g,
                        want_dx,
                        &mut cols,
                    )
                }
                Layer::Linear {
                    inputs,
                    outputs,
                    weight,
                    bias,
                } => {
                    let (gw, gb) = two_mut(grads, weight.0, bias.0);
                    linear_backward(
                        *inputs,
                        *outputs,
                        values[weight.0].data(),
                        gw.data_mut(),
                        gb.data_mut(),
                        x,
                        &g,
                        want_dx,
                    )
                }
                Layer::Relu => x
                    .iter()
                    .zip(&g)
                    .map(|(&xi, &gi)| if xi > 0.0 { gi } else { 0.0 })
                    .collect(),
            };
        }
        Ok(need_input_grad.then_some(g))
    }
}

fn two_mut(v: &mut [Tensor], a: usize, b: usize) -> (&mut Tensor, &mut Tensor) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

pub(crate) fn conv_forward(
    geom: &ConvGeometry,
    w: &[f64],
    b: &[f64],
    x: &[f64],
    cols: &mut Vec<f64>,
) -> Vec<f64> {
    geom.im2col(x, cols);
    let n = geom.out_len();
    let r = geom.patch_len();
    let mut out = vec![0.0; geom.filters * n];
    for f in 0..geom.filters {
        let row = &mut out[f * n..(f + 1) * n];
        row.fill(b[f]);
        for (ri, &wv) in w[f * r..(f + 1) * r].iter().enumerate() {
            if wv != 0.0 {
                axpy(row, wv, &cols[ri * n..(ri + 1) * n]);
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    geom: &ConvGeometry,
    w: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    x: &[f64],
    gy: &[f64],
    want_dx: bool,
    cols: &mut Vec<f64>,
) -> Vec<f64> {
    geom.im2col(x, cols);
    let n = geom.out_len();
    let r = geom.patch_len();
    for f in 0..geom.filters {
        let g = &gy[f * n..(f + 1) * n];
        gb[f] += g.iter().sum::<f64>();
        let gwf = &mut gw[f * r..(f + 1) * r];
        for (ri, acc) in gwf.iter_mut().enumerate() {
            *acc += dot(g, &cols[ri * n..(ri + 1) * n]);
        }
    }
    if !want_dx {
        return Vec::new();
    }
    // Reuse the column buffer for dL/dcols.
    cols.iter_mut().for_each(|c| *c = 0.0);
    for f in 0..geom.filters {
        let g = &gy[f * n..(f + 1) * n];
        for (ri, &wv) in w[f * r..(f + 1) * r].iter().enumerate() {
            if wv != 0.0 {
                axpy(&mut cols[ri * n..(ri + 1) * n], wv, g);
            }
        }
    }
    let mut dx = vec![0.0; x.len()];
    geom.col2im(cols, &mut dx);
    dx
}

pub(crate) fn linear_forward(
    inputs: usize,
    outputs: usize,
    w: &[f64],
    b: &[f64],
    x: &[f64],
) -> Vec<f64> {
    (0..outputs)
        .map(|o| b[o] + dot(&w[o * inputs..(o + 1) * inputs], x))
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    inputs: usize,
    outputs: usize,
    w: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    x: &[f64],
    gy: &[f64],
    want_dx: bool,
) -> Vec<f64> {
    let mut dx = if want_dx {
        vec![0.0; inputs]
    } else {
        Vec::new()
    };
    for o in 0..outputs {
        let g = gy[o];
        if g == 0.0 {
            continue;
        }
        gb[o] += g;
        axpy(&mut gw[o * inputs..(o + 1) * inputs], g, x);
        if want_dx {
            axpy(&mut dx, g, &w[o * inputs..(o + 1) * inputs]);
        }
    }
    dx
}

/// `(a; b)`
pub fn concat_forward(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

/// Splits the upstream gradient of a concatenation into its two segments.
pub fn concat_backward(upstream: &[f64], first_len: usize) -> (&[f64], &[f64]) {
    upstream.split_at(first_len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_definition() {
        let mut ps = ParameterSet::new();
        let seq = Sequential::build("r", &[LayerSpec::Relu], &[3], &mut ps).unwrap();
        let y = seq.forward(&ps, &[-1.0, 0.0, 2.0], None).unwrap();
        assert_eq!(y, vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn identity_one_by_one_conv() {
        let mut ps = ParameterSet::new();
        let seq = Sequential::build("c", &[LayerSpec::conv(1, 1, 2)], &[2, 3, 3], &mut ps).unwrap();
        // weight [filters=2, channels=2, 1, 1] = identity
        let w = ps.get_mut("c.0.w").unwrap();
        w.data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let x: Vec<f64> = (0..18).map(|i| i as f64 - 4.5).collect();
        assert_eq!(seq.forward(&ps, &x, None).unwrap(), x);
    }

    #[test]
    fn zero_weight_fc_outputs_bias() {
        let mut ps = ParameterSet::new();
        let seq = Sequential::build(
            "f",
            &[LayerSpec::FullyConnected {
                inputs: 4,
                outputs: 2,
            }],
            &[4],
            &mut ps,
        )
        .unwrap();
        ps.get_mut("f.0.b")
            .unwrap()
            .data_mut()
            .copy_from_slice(&[0.5, -3.0]);
        for x in [[1.0, 2.0, 3.0, 4.0], [-9.0, 0.0, 0.1, 7.0]] {
            assert_eq!(seq.forward(&ps, &x, None).unwrap(), vec![0.5, -3.0]);
        }
    }

    #[test]
    fn linear_weight_gradient_is_outer_product() {
        let mut ps = ParameterSet::new();
        let seq = Sequential::build(
            "f",
            &[LayerSpec::FullyConnected {
                inputs: 3,
                outputs: 2,
            }],
            &[3],
            &mut ps,
        )
        .unwrap();
        ps.get_mut("f.0.w")
            .unwrap()
            .data_mut()
            .copy_from_slice(&[0.3, -0.1, 0.7, 1.1, 0.0, -0.4]);
        let x = [1.5, -2.0, 0.25];
        let g = [0.5, -3.0];
        let mut cache = SeqCache::default();
        seq.forward(&ps, &x, Some(&mut cache)).unwrap();
        seq.backward(&mut ps, &cache, &g, false).unwrap();
        let gw = ps.grad_by_name("f.0.w").unwrap().data();
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(gw[o * 3 + i], g[o] * x[i]);
            }
        }
    }

    #[test]
    fn concat_adjoint_splits() {
        let up = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (a, b) = concat_backward(&up, 2);
        assert_eq!(a, &[1.0, 2.0]);
        assert_eq!(b, &[3.0, 4.0, 5.0]);
        assert_eq!(concat_forward(a, b), up.to_vec());
    }

    #[test]
    fn shape_mismatch_names_layer() {
        let mut ps = ParameterSet::new();
        let seq = Sequential::build("net", &[LayerSpec::Relu], &[4], &mut ps).unwrap();
        match seq.forward(&ps, &[1.0; 3], None) {
            Err(Error::Shape { layer, .. }) => assert_eq!(layer, "net.0"),
            other => panic!("unexpected {other:?}"),
        }
        let err = Sequential::build(
            "bad",
            &[
                LayerSpec::Relu,
                LayerSpec::FullyConnected {
                    inputs: 5,
                    outputs: 1,
                },
            ],
            &[4],
            &mut ps,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Shape { ref layer, .. } if layer == "bad.1"));
    }

    #[test]
    fn backward_without_cache_errors() {
        let mut ps = ParameterSet::new();
        let seq = Sequential::build("r", &[LayerSpec::Relu], &[2], &mut ps).unwrap();
        let err = seq.backward(&mut ps, &SeqCache::default(), &[1.0, 1.0], true);
        assert!(matches!(err, Err(Error::MissingCache(_))));
    }

    #[test]
    fn table_geometry_halves_spatial_size() {
        let c1 = ConvGeometry::new([1, 200, 200], 8, 2, 16, 3).unwrap();
        assert_eq!(c1.output_shape(), [16, 100, 100]);
        let c2 = ConvGeometry::new([16, 100, 100], 4, 2, 32, 1).unwrap();
        assert_eq!(c2.output_shape(), [32, 50, 50]);
        let d1 = ConvGeometry::new([1, 40, 40], 8, 2, 16, 3).unwrap();
        assert_eq!(d1.output_shape(), [16, 20, 20]);
    }
}
