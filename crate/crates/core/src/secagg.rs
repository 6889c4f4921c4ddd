//! Simulated single-server secure aggregation.
//!
//! Clients add zero-sum masks modulo `M` to their encoded values before
//! upload, so the server only ever learns the modular sum. All masks are held
//! in one process; no key agreement or dropout recovery is modelled.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// The modulus of the additive group SecAgg works in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldSpec {
    modulus: u64,
}

impl FieldSpec {
    pub fn new(modulus: u64) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::Config(format!("modulus must be at least 2, got {modulus}")));
        }
        Ok(Self { modulus })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Whether a sum of `n` values in `[0, m]` always fits without wraparound.
    pub fn serves(&self, n: u64, m: u64) -> bool {
        n.checked_mul(m).is_some_and(|nm| nm < self.modulus)
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        // a, b < M <= u64::MAX, so use u128 to avoid overflow near the top.
        ((a as u128 + b as u128) % self.modulus as u128) as u64
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.modulus - a
        }
    }
}

/// Smallest field with no possible overflow for `n` clients each sending a
/// value in `[0, m]`: `M = n*m + 1`.
pub fn field_size_for(n: u64, m: u64) -> Result<FieldSpec> {
    if n == 0 || m == 0 {
        return Err(Error::Config(format!("field sizing needs n >= 1 and m >= 1 (n={n}, m={m})")));
    }
    let modulus = n
        .checked_mul(m)
        .and_then(|nm| nm.checked_add(1))
        .ok_or_else(|| Error::Config(format!("n*m + 1 overflows u64 (n={n}, m={m})")))?;
    FieldSpec::new(modulus)
}

/// Draws `n` masks that sum to zero modulo `M`. The first `n - 1` are
/// uniform; the last cancels them, and is itself uniform marginally.
pub fn generate_masks(n: usize, spec: FieldSpec, seed: u64) -> Vec<u64> {
    if n == 0 {
        return Vec::new();
    }
    let mut rng = seed::rng_from_seed(seed);
    let mut masks = Vec::with_capacity(n);
    let mut acc = 0u64;
    for _ in 0..n - 1 {
        let r = rng.random_range(0..spec.modulus());
        acc = spec.add(acc, r);
        masks.push(r);
    }
    masks.push(spec.neg(acc));
    masks
}

/// One client's upload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskedContribution {
    pub client_id: usize,
    pub value: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Control,
    Treatment,
}

impl Group {
    pub fn index(self) -> u64 {
        match self {
            Group::Control => 0,
            Group::Treatment => 1,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Control => "control",
            Group::Treatment => "treatment",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Moment {
    First,
    Second,
}

impl Moment {
    pub fn index(self) -> u64 {
        match self {
            Moment::First => 0,
            Moment::Second => 1,
        }
    }
}

/// What the server learns from one aggregation round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregateState {
    pub group: Group,
    pub moment: Moment,
    pub sum: u64,
    pub count: u64,
}

/// Modular sum of a batch of contributions. Rejects duplicate client ids and
/// out-of-range values.
pub fn aggregate(contributions: &[MaskedContribution], spec: FieldSpec) -> Result<u64> {
    let mut seen = vec![false; contributions.iter().map(|c| c.client_id + 1).max().unwrap_or(0)];
    let mut sum = 0u64;
    for c in contributions {
        if c.value >= spec.modulus() {
            return Err(Error::Protocol(format!(
                "client {} sent {} which is not reduced modulo {}",
                c.client_id,
                c.value,
                spec.modulus()
            )));
        }
        if std::mem::replace(&mut seen[c.client_id], true) {
            return Err(Error::Protocol(format!("duplicate contribution from client {}", c.client_id)));
        }
        sum = spec.add(sum, c.value);
    }
    Ok(sum)
}

/// A single aggregation round over a fixed set of `n` clients.
#[derive(Debug, Clone)]
pub struct SecAggSession {
    spec: FieldSpec,
    group: Group,
    moment: Moment,
    masks: Vec<u64>,
}

impl SecAggSession {
    /// Sets up a round for `n` clients whose raw values lie in `[0, m]`.
    pub fn new(group: Group, moment: Moment, n: usize, m: u64, mask_seed: u64) -> Result<Self> {
        let spec = field_size_for(n as u64, m)?;
        Ok(Self { spec, group, moment, masks: generate_masks(n, spec, mask_seed) })
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn clients(&self) -> usize {
        self.masks.len()
    }

    /// Client-side masking of a raw encoded value.
    pub fn mask(&self, client_id: usize, raw: u64) -> Result<MaskedContribution> {
        let mask = *self
            .masks
            .get(client_id)
            .ok_or_else(|| Error::Protocol(format!("client {client_id} is not part of this session")))?;
        if raw >= self.spec.modulus() {
            return Err(Error::Protocol(format!("raw value {raw} exceeds the field")));
        }
        Ok(MaskedContribution { client_id, value: self.spec.add(raw, mask) })
    }

    /// Server-side unmasking: requires exactly one upload per client.
    pub fn aggregate(&self, contributions: &[MaskedContribution]) -> Result<AggregateState> {
        if let Some(c) = contributions.iter().find(|c| c.client_id >= self.masks.len()) {
            return Err(Error::Protocol(format!("unknown client {}", c.client_id)));
        }
        let sum = aggregate(contributions, self.spec)?;
        if contributions.len() != self.masks.len() {
            return Err(Error::Protocol(format!(
                "expected {} contributions, received {} (dropouts are not supported)",
                self.masks.len(),
                contributions.len()
            )));
        }
        Ok(AggregateState { group: self.group, moment: self.moment, sum, count: self.masks.len() as u64 })
    }

    /// Masks every raw value and aggregates them in one step.
    pub fn run(&self, raw: &[u64]) -> Result<AggregateState> {
        let uploads = raw.iter().enumerate().map(|(i, &z)| self.mask(i, z)).collect::<Result<Vec<_>>>()?;
        self.aggregate(&uploads)
    }
}
