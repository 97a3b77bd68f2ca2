use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::ndops::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    Xavier { fan_in: usize, fan_out: usize },
    Zeros,
    Ones,
    Adjacency,
}

fn conv(out: &mut Vec<(String, Vec<usize>, Init)>, name: &str, cout: usize, cin: usize) {
    out.push((
        format!("{name}.weight"),
        vec![cout, cin, 3],
        Init::Xavier {
            fan_in: 3 * cin,
            fan_out: 3 * cout,
        },
    ));
    out.push((format!("{name}.bias"), vec![cout], Init::Zeros));
}

fn norm(out: &mut Vec<(String, Vec<usize>, Init)>, name: &str, c: usize) {
    out.push((format!("{name}.gamma"), vec![c], Init::Ones));
    out.push((format!("{name}.beta"), vec![c], Init::Zeros));
}

fn gcn(
    out: &mut Vec<(String, Vec<usize>, Init)>,
    cfg: &ModelConfig,
    prefix: &str,
    tlen: usize,
    din: usize,
) {
    let (n, d) = (cfg.graph_nodes(), cfg.latent_dim);
    if cfg.use_tgcn {
        out.push((format!("{prefix}.adj_t"), vec![tlen, tlen], Init::Adjacency));
    }
    out.push((
        format!("{prefix}.weight"),
        vec![din, d],
        Init::Xavier {
            fan_in: din,
            fan_out: d,
        },
    ));
    if cfg.use_sgcn {
        out.push((format!("{prefix}.adj_s"), vec![n, n], Init::Adjacency));
    }
}

fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let mut out = Vec::new();
    let (t, d, c) = (cfg.seq_len, cfg.latent_dim, cfg.ori_channels);
    if cfg.use_head {
        conv(&mut out, "ori.conv1", c, 3);
        norm(&mut out, "ori.ln1", c);
        conv(&mut out, "ori.conv2", c, c);
        norm(&mut out, "ori.ln2", c);
        conv(&mut out, "ori.conv3", c, c);
    }
    if cfg.use_pose {
        gcn(&mut out, cfg, "start", t, 3);
        for i in 0..cfg.residual_blocks {
            let name = format!("res{i}");
            gcn(&mut out, cfg, &name, 2 * t, d);
            norm(&mut out, &format!("{name}.ln"), d);
        }
    }
    let f = cfg.fusion_channels;
    conv(&mut out, "fusion.conv1", f, cfg.fusion_inputs());
    norm(&mut out, "fusion.ln", f);
    conv(&mut out, "fusion.conv2", 3, f);
    out
}

/// Names and shapes of every learnable tensor for `cfg`, in storage order.
pub fn param_shapes(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    layout(cfg).into_iter().map(|(n, s, _)| (n, s)).collect()
}

/// Number of scalar parameters for `cfg`.
pub fn param_count(cfg: &ModelConfig) -> usize {
    layout(cfg)
        .iter()
        .map(|(_, s, _)| s.iter().product::<usize>())
        .sum()
}

/// All learnable tensors of one model, in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose2GazeParams {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl Pose2GazeParams {
    /// Glorot-uniform kernels and weights, zero biases, unit layer-norm
    /// scales, and adjacency matrices at identity plus U(-0.01, 0.01).
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, init) in layout(cfg) {
            let t = match init {
                Init::Zeros => Tensor::zeros(&shape),
                Init::Ones => Tensor::ones(&shape),
                Init::Xavier { fan_in, fan_out } => {
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    Tensor::from_fn(&shape, |_| rng.random_range(-a..a))
                }
                Init::Adjacency => {
                    let n = shape[0];
                    Tensor::from_fn(&shape, |i| {
                        let noise = rng.random_range(-0.01..0.01);
                        if i / n == i % n {
                            1.0 + noise
                        } else {
                            noise
                        }
                    })
                }
            };
            names.push(name);
            tensors.push(t);
        }
        Ok(Self { names, tensors })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index_of(name).map(move |i| &mut self.tensors[i])
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Checks names and shapes against the layout `cfg` requires.
    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        let want = param_shapes(cfg);
        if want.len() != self.names.len() {
            return Err(Error::Contract(format!(
                "parameter set has {} tensors, configuration needs {}",
                self.names.len(),
                want.len()
            )));
        }
        for ((name, shape), (have, t)) in want.iter().zip(self.names.iter().zip(&self.tensors)) {
            if name != have || shape.as_slice() != t.shape() {
                return Err(Error::Contract(format!(
                    "parameter {have} {:?} does not match expected {name} {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}
