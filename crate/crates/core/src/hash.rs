//! k-wise independent polynomial hashing over a prime field.
//!
//! A hash function is `h(x) = (a_0 + a_1·x + … + a_{k-1}·x^{k-1} mod p) mod B`
//! with `p` the smallest prime not below the codebook size `N_C`. The
//! polynomial values are exactly k-wise independent and uniform over `GF(p)`.
//! The final reduction mod `B` is exactly uniform only when `B` divides `p`,
//! so in general each bucket probability is off by at most `(p mod B)/p`.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest supported independence order.
pub const MAX_INDEPENDENCE: usize = 8;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Smallest prime `>= n`.
pub fn next_prime(n: u64) -> u64 {
    let mut p = n.max(2);
    while !is_prime(p) {
        p += 1;
    }
    p
}

/// Number of polynomials of degree `< k` over `GF(p)` whose non-constant
/// coefficients are not all zero: `p^k - p`.
pub fn family_size(p: u64, k: usize) -> u128 {
    (p as u128).pow(k as u32) - p as u128
}

/// One member of the polynomial hash family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashFunction {
    coefficients: Vec<u64>,
    prime: u64,
    universe: usize,
    buckets: usize,
}

impl HashFunction {
    /// `coefficients[i]` multiplies `x^i`.
    pub fn new(coefficients: Vec<u64>, prime: u64, universe: usize, buckets: usize) -> Result<Self> {
        let k = coefficients.len();
        if !(2..=MAX_INDEPENDENCE).contains(&k) {
            return domain(format!("independence order must be in 2..={MAX_INDEPENDENCE}, got {k}"));
        }
        if !is_prime(prime) {
            return domain(format!("{prime} is not prime"));
        }
        if (prime as u128) < universe as u128 {
            return domain(format!("field size {prime} is smaller than universe {universe}"));
        }
        if buckets == 0 || buckets > universe {
            return domain(format!("bucket count {buckets} must lie in 1..={universe}"));
        }
        if coefficients.iter().any(|&a| a >= prime) {
            return domain("coefficients must be reduced mod p");
        }
        if coefficients[1..].iter().all(|&a| a == 0) {
            return domain("non-constant coefficients may not all be zero");
        }
        Ok(Self {
            coefficients,
            prime,
            universe,
            buckets,
        })
    }

    pub fn coefficients(&self) -> &[u64] {
        &self.coefficients
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn independence(&self) -> usize {
        self.coefficients.len()
    }

    /// Polynomial value in `GF(p)` before range reduction (Horner).
    pub fn field_value(&self, x: u64) -> u64 {
        let p = self.prime as u128;
        let x = x as u128 % p;
        let mut acc: u128 = 0;
        for &a in self.coefficients.iter().rev() {
            acc = (acc * x + a as u128) % p;
        }
        acc as u64
    }

    /// Bucket index of key `x` in `[0, B)`.
    pub fn evaluate(&self, x: usize) -> Result<usize> {
        if x >= self.universe {
            return domain(format!("key {x} outside universe of size {}", self.universe));
        }
        Ok(self.bucket_unchecked(x))
    }

    pub(crate) fn bucket_unchecked(&self, x: usize) -> usize {
        (self.field_value(x as u64) % self.buckets as u64) as usize
    }
}

/// Draws a hash function uniformly from the family over `GF(next_prime(N_C))`.
pub fn sample_hash<R: Rng + ?Sized>(rng: &mut R, k: usize, universe: usize, buckets: usize) -> Result<HashFunction> {
    if universe < 2 {
        return domain(format!("universe must hold at least 2 keys, got {universe}"));
    }
    if !(2..=MAX_INDEPENDENCE).contains(&k) {
        return domain(format!("independence order must be in 2..={MAX_INDEPENDENCE}, got {k}"));
    }
    let p = next_prime(universe as u64);
    loop {
        let coefficients: Vec<u64> = (0..k).map(|_| rng.random_range(0..p)).collect();
        if coefficients[1..].iter().any(|&a| a != 0) {
            return HashFunction::new(coefficients, p, universe, buckets);
        }
    }
}

/// Every member of the family over `GF(p)` for the given order, in
/// lexicographic coefficient order.
pub fn enumerate_family(prime: u64, k: usize, universe: usize, buckets: usize) -> Result<Vec<HashFunction>> {
    let size = family_size(prime, k);
    if size > 50_000_000 {
        return domain(format!("family of {size} functions is too large to enumerate"));
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut coeffs = vec![0u64; k];
    loop {
        if coeffs[1..].iter().any(|&a| a != 0) {
            out.push(HashFunction::new(coeffs.clone(), prime, universe, buckets)?);
        }
        let mut i = 0;
        loop {
            if i == k {
                return Ok(out);
            }
            coeffs[i] += 1;
            if coeffs[i] < prime {
                break;
            }
            coeffs[i] = 0;
            i += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    /// Bucket `b` holds exactly the keys hashing to `b`.
    Raw,
    /// Raw buckets trimmed to sizes `⌊N_C/B⌋` or `⌈N_C/B⌉`.
    #[default]
    Balanced,
}

/// Partition of the key universe `{0, …, N_C-1}` into `B` buckets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketPartition {
    buckets: Vec<Vec<usize>>,
    assignment: Vec<usize>,
    mode: PartitionMode,
    reassigned: usize,
}

impl BucketPartition {
    /// Builds a partition from explicit buckets, checking the partition law.
    pub fn from_buckets(buckets: Vec<Vec<usize>>, mode: PartitionMode) -> Result<Self> {
        let universe: usize = buckets.iter().map(Vec::len).sum();
        let mut assignment = vec![usize::MAX; universe];
        for (b, members) in buckets.iter().enumerate() {
            for &x in members {
                if x >= universe || assignment[x] != usize::MAX {
                    return domain(format!("key {x} is duplicated or out of range"));
                }
                assignment[x] = b;
            }
        }
        let mut buckets = buckets;
        for members in &mut buckets {
            members.sort_unstable();
        }
        Ok(Self {
            buckets,
            assignment,
            mode,
            reassigned: 0,
        })
    }

    pub fn buckets(&self) -> &[Vec<usize>] {
        &self.buckets
    }

    pub fn members(&self, bucket: usize) -> &[usize] {
        &self.buckets[bucket]
    }

    pub fn bucket_of(&self, key: usize) -> usize {
        self.assignment[key]
    }

    pub fn num_buckets(&self) -> usize {
        self.buckets.len()
    }

    pub fn universe(&self) -> usize {
        self.assignment.len()
    }

    pub fn mode(&self) -> PartitionMode {
        self.mode
    }

    /// Keys moved away from their raw bucket by balancing.
    pub fn reassigned(&self) -> usize {
        self.reassigned
    }

    /// Text form: one `bucket_index: key,key,…` line per bucket.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (b, members) in self.buckets.iter().enumerate() {
            let keys: Vec<String> = members.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{b}: {}", keys.join(","));
        }
        out
    }

    pub fn parse(text: &str, mode: PartitionMode) -> Result<Self> {
        let mut buckets = Vec::new();
        for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let (idx, keys) = line
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("missing ':' in partition line {line:?}")))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad bucket index in {line:?}")))?;
            if idx != i {
                return Err(Error::Parse(format!("bucket {idx} out of order (expected {i})")));
            }
            let members = keys
                .split(',')
                .map(str::trim)
                .filter(|k| !k.is_empty())
                .map(|k| k.parse::<usize>().map_err(|_| Error::Parse(format!("bad key {k:?}"))))
                .collect::<Result<Vec<_>>>()?;
            buckets.push(members);
        }
        Self::from_buckets(buckets, mode)
    }
}

/// Partitions `{0, …, N_C-1}` by the bucket each key hashes to.
///
/// In balanced mode the `N_C mod B` largest raw buckets (ties to the lower
/// index) may keep `⌈N_C/B⌉` keys and every other bucket keeps `⌊N_C/B⌋`.
/// Each bucket keeps its smallest keys. The overflow keys then go, in
/// ascending order, to the least-full bucket still below its size. This
/// moves the minimum possible number of keys.
pub fn partition(h: &HashFunction, universe: usize, buckets: usize, mode: PartitionMode) -> Result<BucketPartition> {
    if universe != h.universe() || buckets != h.buckets() {
        return domain(format!(
            "hash maps {} keys to {} buckets, asked for {universe} to {buckets}",
            h.universe(),
            h.buckets()
        ));
    }
    let mut raw = vec![Vec::new(); buckets];
    for x in 0..universe {
        raw[h.bucket_unchecked(x)].push(x);
    }
    let mut reassigned = 0;
    if mode == PartitionMode::Balanced {
        let floor = universe / buckets;
        let rem = universe % buckets;
        let mut order: Vec<usize> = (0..buckets).collect();
        order.sort_by(|&a, &b| raw[b].len().cmp(&raw[a].len()).then(a.cmp(&b)));
        let mut target = vec![floor; buckets];
        for &b in order.iter().take(rem) {
            target[b] += 1;
        }
        let mut overflow = Vec::new();
        for (b, members) in raw.iter_mut().enumerate() {
            if members.len() > target[b] {
                overflow.extend(members.drain(target[b]..));
            }
        }
        overflow.sort_unstable();
        reassigned = overflow.len();
        for key in overflow {
            let dest = (0..buckets)
                .filter(|&b| raw[b].len() < target[b])
                .min_by_key(|&b| (raw[b].len(), b))
                .expect("balanced targets sum to the universe size");
            raw[dest].push(key);
        }
    }
    let mut part = BucketPartition::from_buckets(raw, mode)?;
    part.reassigned = reassigned;
    Ok(part)
}

/// Empirical collision frequencies of the hash family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionStats {
    pub trials: usize,
    /// `Pr[h(x₁) = h(x₂)]` for distinct random keys (target `1/B`).
    pub pairwise: f64,
    /// `Pr[h_l(x₁) = h_l(x₂)` for all `l ≤ L]` (target `1/B^L`).
    pub joint: f64,
    /// `Pr[h_i(γ_i) = h_j(γ_j)]` for independent functions and keys (target `1/B`).
    pub cross_ap: f64,
    /// `Pr[h_i(γ_i) = h_j(γ_j) = 0]`, both APs in one given slot (target `1/B²`).
    pub cross_ap_slot: f64,
}

/// Monte Carlo estimate of the collision laws over `trials` draws.
pub fn collision_stats<R: Rng + ?Sized>(
    k: usize,
    universe: usize,
    buckets: usize,
    rounds: usize,
    trials: usize,
    rng: &mut R,
) -> Result<CollisionStats> {
    if rounds == 0 || trials == 0 {
        return domain("need at least one round and one trial");
    }
    let (mut pair, mut joint, mut cross, mut slot) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..trials {
        let x1 = rng.random_range(0..universe);
        let x2 = loop {
            let x = rng.random_range(0..universe);
            if x != x1 {
                break x;
            }
        };
        let mut all = true;
        for l in 0..rounds {
            let h = sample_hash(rng, k, universe, buckets)?;
            let hit = h.bucket_unchecked(x1) == h.bucket_unchecked(x2);
            if l == 0 && hit {
                pair += 1;
            }
            all &= hit;
        }
        joint += all as usize;

        let hi = sample_hash(rng, k, universe, buckets)?;
        let hj = sample_hash(rng, k, universe, buckets)?;
        let bi = hi.bucket_unchecked(rng.random_range(0..universe));
        let bj = hj.bucket_unchecked(rng.random_range(0..universe));
        cross += (bi == bj) as usize;
        slot += (bi == 0 && bj == 0) as usize;
    }
    let n = trials as f64;
    Ok(CollisionStats {
        trials,
        pairwise: pair as f64 / n,
        joint: joint as f64 / n,
        cross_ap: cross as f64 / n,
        cross_ap_slot: slot as f64 / n,
    })
}

/// Frequency with which `L` independent functions all collide on the fixed
/// keys `x1`, `x2`.
pub fn key_collision_rate<R: Rng + ?Sized>(
    k: usize,
    universe: usize,
    buckets: usize,
    rounds: usize,
    keys: (usize, usize),
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut hits = 0;
    for _ in 0..trials {
        let mut all = true;
        for _ in 0..rounds {
            let h = sample_hash(rng, k, universe, buckets)?;
            all &= h.evaluate(keys.0)? == h.evaluate(keys.1)?;
        }
        hits += all as usize;
    }
    Ok(hits as f64 / trials as f64)
}

/// Samples `count` pairwise-distinct functions (duplicates are redrawn).
pub fn sample_distinct<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    k: usize,
    universe: usize,
    buckets: usize,
) -> Result<Vec<HashFunction>> {
    let p = next_prime(universe as u64);
    if (count as u128) > family_size(p, k) {
        return domain(format!(
            "cannot draw {count} distinct functions from a family of {}",
            family_size(p, k)
        ));
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let h = sample_hash(rng, k, universe, buckets)?;
        if seen.insert(h.coefficients.clone()) {
            out.push(h);
        }
    }
    Ok(out)
}
