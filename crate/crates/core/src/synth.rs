//! Seeded synthetic inputs.
//!
//! A spec is `DIMS` or `DIMS:RANKS`, e.g. `16x16x16` (i.i.d. uniform on
//! [-1, 1)) or `4x3x2:1,2,2,1` (decode of random cores with that rank
//! chain).

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::tt::{tt_decode, TtCores};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub dims: Vec<usize>,
    pub ranks: Option<Vec<usize>>,
}

fn parse_list(s: &str, sep: char, what: &str) -> Result<Vec<usize>> {
    s.split(sep)
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::Format(format!("bad {what} entry {x:?}")))
        })
        .collect()
}

impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (dims, ranks) = match s.split_once(':') {
            Some((d, r)) => (d, Some(r)),
            None => (s, None),
        };
        let dims = parse_list(dims, 'x', "dims")?;
        let ranks = ranks.map(|r| parse_list(r, ',', "rank")).transpose()?;
        if let Some(r) = &ranks {
            if r.len() != dims.len() + 1 || r[0] != 1 || r[r.len() - 1] != 1 {
                return Err(Error::Format(format!(
                    "rank chain {r:?} must have {} entries and start and end with 1",
                    dims.len() + 1
                )));
            }
        }
        Ok(Self { dims, ranks })
    }
}

pub fn uniform_tensor(dims: &[usize], seed: u64) -> Result<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.iter().product();
    Tensor::new(dims.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

pub fn random_cores(dims: &[usize], ranks: &[usize], seed: u64) -> Result<TtCores> {
    if ranks.len() != dims.len() + 1 {
        return Err(Error::ShapeError(format!(
            "{} ranks for {} dims",
            ranks.len(),
            dims.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cores = dims
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let shape = vec![ranks[k], n, ranks[k + 1]];
            let len = shape.iter().product();
            Tensor::new(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    TtCores::new(cores)
}

pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<Tensor> {
    match &spec.ranks {
        None => uniform_tensor(&spec.dims, seed),
        Some(r) => tt_decode(&random_cores(&spec.dims, r, seed)?),
    }
}
