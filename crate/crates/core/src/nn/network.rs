//! The shared-extractor network and its single-head variant.
//!
//! Joint topology:
//!
//! ```text
//! input -> conv1 -> relu -> conv2 -> relu -> h_e
//! h_e -> q.fc1 -> relu -> h_q ┐
//! h_e -> c.fc1 -> relu -> h_c ┴> h = (h_q; h_c)
//! h -> q.head (fc2 -> relu -> fc3) -> Q values
//! h -> c.head (fc2 -> relu -> fc3) -> predicted coarse spectrum
//! ```
//!
//! Parameter names start with `ext.` (shared), `q.` or `c.`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{concat_backward, concat_forward, LayerSpec, SeqCache, Sequential};
use super::params::ParameterSet;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub filters: usize,
}

impl ConvSpec {
    fn layer(&self) -> LayerSpec {
        LayerSpec::conv(self.kernel, self.stride, self.filters)
    }
}

/// Layer sizes of the extractor and heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    pub fc1: usize,
    pub fc2: usize,
}

impl Architecture {
    /// Conv 8/2/16, conv 4/2/32, FC 512, FC 256.
    pub fn table() -> Self {
        Architecture {
            conv1: ConvSpec {
                kernel: 8,
                stride: 2,
                filters: 16,
            },
            conv2: ConvSpec {
                kernel: 4,
                stride: 2,
                filters: 32,
            },
            fc1: 512,
            fc2: 256,
        }
    }
}

fn extractor(
    arch: &Architecture,
    input: [usize; 2],
    params: &mut ParameterSet,
) -> Result<Sequential> {
    Sequential::build(
        "ext",
        &[
            arch.conv1.layer(),
            LayerSpec::Relu,
            arch.conv2.layer(),
            LayerSpec::Relu,
        ],
        &[1, input[0], input[1]],
        params,
    )
}

fn fc1(
    prefix: &str,
    inputs: usize,
    arch: &Architecture,
    params: &mut ParameterSet,
) -> Result<Sequential> {
    Sequential::build(
        prefix,
        &[
            LayerSpec::FullyConnected {
                inputs,
                outputs: arch.fc1,
            },
            LayerSpec::Relu,
        ],
        &[inputs],
        params,
    )
}

fn head(
    prefix: &str,
    inputs: usize,
    outputs: usize,
    arch: &Architecture,
    params: &mut ParameterSet,
) -> Result<Sequential> {
    Sequential::build(
        prefix,
        &[
            LayerSpec::FullyConnected {
                inputs,
                outputs: arch.fc2,
            },
            LayerSpec::Relu,
            LayerSpec::FullyConnected {
                inputs: arch.fc2,
                outputs,
            },
        ],
        &[inputs],
        params,
    )
}

/// Two heads over a shared extractor, joined by concatenating their FC1 features.
#[derive(Debug, Clone)]
pub struct JointNet {
    extractor: Sequential,
    q_fc1: Sequential,
    c_fc1: Sequential,
    q_head: Sequential,
    c_head: Sequential,
    fc1: usize,
}

#[derive(Debug, Clone, Default)]
pub struct JointCache {
    ext: SeqCache,
    q_fc1: SeqCache,
    c_fc1: SeqCache,
    q_head: SeqCache,
    c_head: SeqCache,
    extracted: usize,
}

/// Output of a joint forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOutput {
    pub q: Vec<f64>,
    pub c: Vec<f64>,
}

impl JointNet {
    /// Registers all parameters (zeroed) in `params`.
    pub fn build(
        arch: &Architecture,
        input: [usize; 2],
        q_outputs: usize,
        c_outputs: usize,
        params: &mut ParameterSet,
    ) -> Result<Self> {
        let extractor = extractor(arch, input, params)?;
        let e = extractor.output_len();
        let q_fc1 = fc1("q.fc1", e, arch, params)?;
        let c_fc1 = fc1("c.fc1", e, arch, params)?;
        let q_head = head("q.head", 2 * arch.fc1, q_outputs, arch, params)?;
        let c_head = head("c.head", 2 * arch.fc1, c_outputs, arch, params)?;
        Ok(JointNet {
            extractor,
            q_fc1,
            c_fc1,
            q_head,
            c_head,
            fc1: arch.fc1,
        })
    }

    pub fn init<R: Rng + ?Sized>(&self, params: &mut ParameterSet, rng: &mut R) {
        for s in [
            &self.extractor,
            &self.q_fc1,
            &self.c_fc1,
            &self.q_head,
            &self.c_head,
        ] {
            s.init(params, rng);
        }
    }

    /// Input, conv1, conv2, FC1 (per branch), concatenation, FC2, FC3 (Q head).
    pub fn shape_chain(&self) -> Vec<Vec<usize>> {
        let ext = self.extractor.shape_chain();
        vec![
            ext[0].clone(),
            ext[1].clone(),
            ext[3].clone(),
            self.q_fc1.output_shape().to_vec(),
            vec![2 * self.fc1],
            self.q_head.shape_chain()[1].clone(),
            self.q_head.output_shape().to_vec(),
        ]
    }

    pub fn input_len(&self) -> usize {
        self.extractor.input_len()
    }

    pub fn q_outputs(&self) -> usize {
        self.q_head.output_len()
    }

    pub fn c_outputs(&self) -> usize {
        self.c_head.output_len()
    }

    pub fn forward(
        &self,
        params: &ParameterSet,
        input: &[f64],
        cache: Option<&mut JointCache>,
    ) -> Result<JointOutput> {
        match cache {
            Some(c) => {
                let he = self.extractor.forward(params, input, Some(&mut c.ext))?;
                c.extracted = he.len();
                let hq = self.q_fc1.forward(params, &he, Some(&mut c.q_fc1))?;
                let hc = self.c_fc1.forward(params, &he, Some(&mut c.c_fc1))?;
                let h = concat_forward(&hq, &hc);
                let q = self.q_head.forward(params, &h, Some(&mut c.q_head))?;
                let cg = self.c_head.forward(params, &h, Some(&mut c.c_head))?;
                Ok(JointOutput { q, c: cg })
            }
            None => {
                let h = self.hidden(params, input)?;
                Ok(JointOutput {
                    q: self.q_head.forward(params, &h, None)?,
                    c: self.c_head.forward(params, &h, None)?,
                })
            }
        }
    }

    /// Q values only; used for bootstrap targets.
    pub fn forward_q(&self, params: &ParameterSet, input: &[f64]) -> Result<Vec<f64>> {
        let h = self.hidden(params, input)?;
        self.q_head.forward(params, &h, None)
    }

    fn hidden(&self, params: &ParameterSet, input: &[f64]) -> Result<Vec<f64>> {
        let he = self.extractor.forward(params, input, None)?;
        let hq = self.q_fc1.forward(params, &he, None)?;
        let hc = self.c_fc1.forward(params, &he, None)?;
        Ok(concat_forward(&hq, &hc))
    }

    /// Accumulates gradients for upstream gradients on either or both heads.
    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &JointCache,
        dq: Option<&[f64]>,
        dc: Option<&[f64]>,
    ) -> Result<()> {
        let mut dh = vec![0.0; 2 * self.fc1];
        for (head, hc, g) in [
            (&self.q_head, &cache.q_head, dq),
            (&self.c_head, &cache.c_head, dc),
        ] {
            if let Some(g) = g {
                let d = head.backward(params, hc, g, true)?.expect("input grad");
                dh.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
            }
        }
        let (dhq, dhc) = concat_backward(&dh, self.fc1);
        let mut de = vec![0.0; cache.extracted];
        for (branch, bc, g) in [
            (&self.q_fc1, &cache.q_fc1, dhq),
            (&self.c_fc1, &cache.c_fc1, dhc),
        ] {
            let d = branch.backward(params, bc, g, true)?.expect("input grad");
            de.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        }
        self.extractor.backward(params, &cache.ext, &de, false)?;
        Ok(())
    }
}

/// Extractor, one FC1 branch and one head: the plain DQN, the predictor-only
/// ablation and the intelligent jammer.
#[derive(Debug, Clone)]
pub struct SingleNet {
    extractor: Sequential,
    fc1: Sequential,
    head: Sequential,
}

#[derive(Debug, Clone, Default)]
pub struct SingleCache {
    ext: SeqCache,
    fc1: SeqCache,
    head: SeqCache,
    extracted: usize,
}

impl SingleNet {
    pub fn build(
        arch: &Architecture,
        input: [usize; 2],
        outputs: usize,
        params: &mut ParameterSet,
    ) -> Result<Self> {
        let extractor = extractor(arch, input, params)?;
        let e = extractor.output_len();
        let fc1 = fc1("fc1", e, arch, params)?;
        let head = head("head", arch.fc1, outputs, arch, params)?;
        Ok(SingleNet {
            extractor,
            fc1,
            head,
        })
    }

    pub fn init<R: Rng + ?Sized>(&self, params: &mut ParameterSet, rng: &mut R) {
        for s in [&self.extractor, &self.fc1, &self.head] {
            s.init(params, rng);
        }
    }

    pub fn input_len(&self) -> usize {
        self.extractor.input_len()
    }

    pub fn outputs(&self) -> usize {
        self.head.output_len()
    }

    pub fn forward(
        &self,
        params: &ParameterSet,
        input: &[f64],
        cache: Option<&mut SingleCache>,
    ) -> Result<Vec<f64>> {
        match cache {
            Some(c) => {
                let he = self.extractor.forward(params, input, Some(&mut c.ext))?;
                c.extracted = he.len();
                let h = self.fc1.forward(params, &he, Some(&mut c.fc1))?;
                self.head.forward(params, &h, Some(&mut c.head))
            }
            None => {
                let he = self.extractor.forward(params, input, None)?;
                let h = self.fc1.forward(params, &he, None)?;
                self.head.forward(params, &h, None)
            }
        }
    }

    pub fn backward(
        &self,
        params: &mut ParameterSet,
        cache: &SingleCache,
        upstream: &[f64],
    ) -> Result<()> {
        let dh = self
            .head
            .backward(params, &cache.head, upstream, true)?
            .expect("input grad");
        let de = self
            .fc1
            .backward(params, &cache.fc1, &dh, true)?
            .expect("input grad");
        debug_assert_eq!(de.len(), cache.extracted);
        self.extractor.backward(params, &cache.ext, &de, false)?;
        Ok(())
    }
}
