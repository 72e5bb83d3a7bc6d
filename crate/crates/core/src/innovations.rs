//! Innovation laws and keyed random streams.
//!
//! Every random quantity in a replication is drawn from an [`RngStream`]
//! keyed by `(master_seed, replication_index, purpose)`. The stream is a
//! ChaCha8 generator whose key is built from those three fields, so the
//! sequence is a pure function of the key and distinct keys give unrelated
//! sequences. Worker count and scheduling never enter the key.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationKind {
    StandardNormal,
    /// Uniform on (-1, 1).
    UniformPm1,
}

impl InnovationKind {
    pub fn name(self) -> &'static str {
        match self {
            InnovationKind::StandardNormal => "normal",
            InnovationKind::UniformPm1 => "uniform",
        }
    }
}

impl std::str::FromStr for InnovationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(InnovationKind::StandardNormal),
            "uniform" => Ok(InnovationKind::UniformPm1),
            other => Err(format!(
                "unknown innovation law `{other}` (expected normal|uniform)"
            )),
        }
    }
}

/// An innovation law together with the population quantities the estimators
/// and normalisations need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationSpec {
    pub kind: InnovationKind,
    /// Population variance.
    pub sigma2: f64,
    /// Density at zero.
    pub f0: f64,
    /// `E|eps|`.
    pub mean_abs: f64,
}

impl InnovationSpec {
    pub fn new(kind: InnovationKind) -> Self {
        attributes(kind)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            InnovationKind::StandardNormal => rng.sample(StandardNormal),
            InnovationKind::UniformPm1 => rng.random_range(-1.0..1.0),
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.draw(rng);
        }
    }
}

/// Exact analytic attributes of an innovation law.
pub fn attributes(kind: InnovationKind) -> InnovationSpec {
    match kind {
        InnovationKind::StandardNormal => InnovationSpec {
            kind,
            sigma2: 1.0,
            f0: 1.0 / (2.0 * PI).sqrt(),
            mean_abs: (2.0 / PI).sqrt(),
        },
        InnovationKind::UniformPm1 => InnovationSpec {
            kind,
            sigma2: 1.0 / 3.0,
            f0: 0.5,
            mean_abs: 0.5,
        },
    }
}

/// Signum with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// What a stream is used for. Keeping these apart means, for example, that
/// changing `kappa_n` (and hence the number of pre-sample draws) leaves the
/// in-sample innovations untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Purpose {
    PreSample = 0,
    Innovations = 1,
    OutlierPositions = 2,
    LimitPath = 3,
}

/// Replayable random stream keyed by `(master_seed, replication_index, purpose)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    replication_index: u64,
    purpose: u8,
    rng: ChaCha8Rng,
}

const DOMAIN_TAG: u64 = 0x6c61_6472_6f6f_7431; // "ladroot1"

impl RngStream {
    pub fn new(master_seed: u64, replication_index: u64, purpose: Purpose) -> Self {
        Self::with_tag(master_seed, replication_index, purpose as u8)
    }

    pub fn with_tag(master_seed: u64, replication_index: u64, purpose_tag: u8) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&replication_index.to_le_bytes());
        key[16..24].copy_from_slice(&(purpose_tag as u64).to_le_bytes());
        key[24..32].copy_from_slice(&DOMAIN_TAG.to_le_bytes());
        Self {
            master_seed,
            replication_index,
            purpose: purpose_tag,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replication_index(&self) -> u64 {
        self.replication_index
    }

    pub fn purpose_tag(&self) -> u8 {
        self.purpose
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// The three streams a single AR(1) replication consumes.
#[derive(Debug, Clone)]
pub struct ReplicationStreams {
    pub pre_sample: RngStream,
    pub innovations: RngStream,
    pub outliers: RngStream,
}

impl ReplicationStreams {
    pub fn new(master_seed: u64, replication_index: u64) -> Self {
        Self {
            pre_sample: RngStream::new(master_seed, replication_index, Purpose::PreSample),
            innovations: RngStream::new(master_seed, replication_index, Purpose::Innovations),
            outliers: RngStream::new(master_seed, replication_index, Purpose::OutlierPositions),
        }
    }
}
