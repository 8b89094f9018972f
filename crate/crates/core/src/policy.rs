//! Control policy: deterministic MLP mean, Gaussian exploration wrapper, binary snapshots and
//! C source export.
//!
//! Snapshot byte layout (all little-endian):
//!
//! | offset | size | content                                              |
//! |--------|------|------------------------------------------------------|
//! | 0      | 4    | magic `QRLP`                                         |
//! | 4      | 4    | format version (`u32`, currently 1)                  |
//! | 8      | 4    | number of layer sizes `k` (`u32`)                    |
//! | 12     | 4·k  | layer sizes (`u32`)                                  |
//! | …      | 4·n  | MLP parameters as `f32`, per layer `W` row-major then `b` |
//! | …      | 4·a  | action log-std as `f32` (`a` = output size)          |

use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;
use std::path::Path;

use crate::mlp::Mlp;
use crate::{Error, Result, ACT_DIM, OBS_DIM};

pub const POLICY_SIZES: [usize; 4] = [OBS_DIM, 64, 64, ACT_DIM];
pub const VALUE_SIZES: [usize; 4] = [OBS_DIM, 64, 64, 1];
pub const INITIAL_LOG_STD: f64 = -1.0;
pub const SNAPSHOT_MAGIC: &[u8; 4] = b"QRLP";
pub const SNAPSHOT_VERSION: u32 = 1;

pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal-Gaussian log-density of `action` around `mean`.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    let mut lp = 0.0;
    for j in 0..mean.len() {
        let z = (action[j] - mean[j]) * (-log_std[j]).exp();
        lp += -0.5 * z * z - log_std[j] - HALF_LN_2PI;
    }
    lp
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub mlp: Mlp,
    pub log_std: Vec<f64>,
}

impl PolicyNet {
    pub fn zeros() -> Self {
        PolicyNet { mlp: Mlp::zeros(&POLICY_SIZES), log_std: vec![INITIAL_LOG_STD; ACT_DIM] }
    }

    /// Fan-in uniform hidden layers; the output layer is scaled by 0.01 so early actions stay
    /// close to half thrust.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        PolicyNet { mlp: Mlp::init(&POLICY_SIZES, 0.01, rng), log_std: vec![INITIAL_LOG_STD; ACT_DIM] }
    }

    pub fn forward(&self, obs: &[f64]) -> Result<[f64; ACT_DIM]> {
        if obs.len() != OBS_DIM {
            return Err(Error::Dimension { expected: OBS_DIM, got: obs.len() });
        }
        let y = self.mlp.forward(obs);
        Ok([y[0], y[1], y[2], y[3]])
    }

    pub fn forward_batch(&self, obs: &[f64], batch: usize) -> Vec<f64> {
        self.mlp.forward_batch(obs, batch)
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    /// Draws `mean + std·N(0, I)` given a precomputed mean.
    pub fn sample_around<R: Rng + ?Sized>(&self, mean: &[f64; ACT_DIM], rng: &mut R) -> ([f64; ACT_DIM], f64) {
        let mut a = [0.0; ACT_DIM];
        for j in 0..ACT_DIM {
            let n: f64 = rng.sample(StandardNormal);
            a[j] = mean[j] + self.log_std[j].exp() * n;
        }
        let lp = gaussian_log_prob(mean, &self.log_std, &a);
        (a, lp)
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<([f64; ACT_DIM], f64)> {
        let mean = self.forward(obs)?;
        Ok(self.sample_around(&mean, rng))
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64; ACT_DIM]) -> Result<f64> {
        let mean = self.forward(obs)?;
        Ok(gaussian_log_prob(&mean, &self.log_std, action))
    }

    /// Number of trainable parameters: MLP plus log-std.
    pub fn num_params(&self) -> usize {
        self.mlp.num_params() + self.log_std.len()
    }

    /// Rounds every parameter to `f32`, the precision of snapshots and exports.
    pub fn quantized(&self) -> PolicyNet {
        let mut out = self.clone();
        out.mlp.params_mut().iter_mut().for_each(|p| *p = *p as f32 as f64);
        out.log_std.iter_mut().for_each(|p| *p = *p as f32 as f64);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.mlp.params().iter().chain(&self.log_std).all(|p| p.is_finite())
    }

    pub fn to_snapshot(&self) -> Vec<u8> {
        let sizes = self.mlp.sizes();
        let mut out = Vec::with_capacity(12 + 4 * sizes.len() + 4 * self.num_params());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for &s in sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for &p in self.mlp.params().iter().chain(&self.log_std) {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        out
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<PolicyNet> {
        let err = |m: &str| Error::Snapshot(m.to_string());
        let word = |i: usize| -> Result<u32> {
            bytes
                .get(i..i + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| err("truncated header"))
        };
        if bytes.len() < 12 || &bytes[0..4] != SNAPSHOT_MAGIC {
            return Err(err("bad magic"));
        }
        let version = word(4)?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let k = word(8)? as usize;
        if !(2..=16).contains(&k) {
            return Err(err("bad layer count"));
        }
        let sizes = (0..k).map(|i| word(12 + 4 * i).map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        if sizes.first() != Some(&OBS_DIM) || sizes.last() != Some(&ACT_DIM) {
            return Err(Error::Snapshot(format!("unexpected layer sizes {sizes:?}")));
        }
        let mut mlp = Mlp::zeros(&sizes);
        let start = 12 + 4 * k;
        let total = mlp.num_params() + ACT_DIM;
        if bytes.len() != start + 4 * total {
            return Err(Error::Snapshot(format!(
                "expected {} bytes, got {}",
                start + 4 * total,
                bytes.len()
            )));
        }
        let mut values = bytes[start..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        for p in mlp.params_mut() {
            *p = values.next().unwrap();
        }
        let log_std: Vec<f64> = values.collect();
        let net = PolicyNet { mlp, log_std };
        if !net.is_finite() {
            return Err(err("non-finite parameters"));
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_snapshot())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PolicyNet> {
        PolicyNet::from_snapshot(&std::fs::read(path)?)
    }

    /// Self-contained C99 source defining `void <name>(const float obs[18], float action[4])`.
    pub fn export_c(&self, name: &str) -> String {
        export_c(&self.mlp, name)
    }
}

fn c_float(x: f64) -> String {
    let v = x as f32;
    if v == 0.0 {
        return "0.0f".to_string();
    }
    let s = format!("{v:e}");
    // `{:e}` gives e.g. "1.5e-3" or "2e0"; both parse as C float literals once suffixed.
    if s.contains('.') {
        format!("{s}f")
    } else {
        let (m, e) = s.split_once('e').unwrap();
        format!("{m}.0e{e}f")
    }
}

pub fn export_c(mlp: &Mlp, name: &str) -> String {
    let sizes = mlp.sizes();
    let layers = mlp.num_layers();
    let mut src = String::new();
    let dims = sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" -> ");
    let _ = writeln!(src, "/* Generated control policy ({dims}), tanh hidden layers, linear output. */");
    let _ = writeln!(src, "#include <math.h>\n");
    for l in 0..layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = mlp.weights(l);
        let _ = writeln!(src, "static const float {name}_w{l}[{n_out}][{n_in}] = {{");
        for o in 0..n_out {
            let row = w[o * n_in..(o + 1) * n_in].iter().map(|&x| c_float(x)).collect::<Vec<_>>();
            let _ = writeln!(src, "    {{{}}},", row.join(", "));
        }
        let _ = writeln!(src, "}};");
        let b = mlp.bias(l).iter().map(|&x| c_float(x)).collect::<Vec<_>>();
        let _ = writeln!(src, "static const float {name}_b{l}[{n_out}] = {{{}}};\n", b.join(", "));
    }
    let _ = writeln!(
        src,
        "void {name}(const float obs[{}], float action[{}])\n{{",
        sizes[0],
        sizes[layers]
    );
    let mut prev = "obs".to_string();
    for l in 0..layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let last = l + 1 == layers;
        let out = if last { "action".to_string() } else { format!("h{l}") };
        if !last {
            let _ = writeln!(src, "    float {out}[{n_out}];");
        }
        let _ = writeln!(src, "    for (int i = 0; i < {n_out}; ++i) {{");
        let _ = writeln!(src, "        float acc = {name}_b{l}[i];");
        let _ = writeln!(src, "        for (int j = 0; j < {n_in}; ++j) {{");
        let _ = writeln!(src, "            acc += {name}_w{l}[i][j] * {prev}[j];");
        let _ = writeln!(src, "        }}");
        if last {
            let _ = writeln!(src, "        {out}[i] = acc;");
        } else {
            let _ = writeln!(src, "        {out}[i] = tanhf(acc);");
        }
        let _ = writeln!(src, "    }}");
        prev = out;
    }
    let _ = writeln!(src, "}}");
    src
}

/// State-value baseline with the policy topology and a scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    pub mlp: Mlp,
}

impl ValueNet {
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        ValueNet { mlp: Mlp::init(&VALUE_SIZES, 1.0, rng) }
    }

    pub fn predict_batch(&self, obs: &[f64], batch: usize) -> Vec<f64> {
        self.mlp.forward_batch(obs, batch)
    }
}
