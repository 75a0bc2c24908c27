//! Beam-training protocols over superimposed multi-AP measurements.
//!
//! Slots are 0-based: round `l` and bucket `b` map to slot `q = l·B + b`.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::{complex_noise, inner, ChannelRealization};
use crate::codebook::SingleBeamCodebook;
use crate::error::{domain, Error, Result};
use crate::hash::{partition, sample_distinct, BucketPartition, HashFunction, PartitionMode};
use crate::multibeam::{build_multiarm_codebook, synthesize, MultiArmCodebook, MultiBeamOptions};

/// Training method identifiers used in tables and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Hashed multi-arm beams with soft (ranked) demultiplexing.
    Hmb,
    /// Hashed multi-arm beams with threshold decisions.
    HmbHard,
    /// Equal-interval multi-arm beams with threshold decisions.
    Eimb,
    /// Per-AP sweep of the whole polar codebook.
    Exhaustive,
    /// Per-AP sweep of the far-field DFT codebook.
    Dft,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Hmb,
        Method::HmbHard,
        Method::Eimb,
        Method::Exhaustive,
        Method::Dft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hmb => "hmb",
            Method::HmbHard => "hmb_hard",
            Method::Eimb => "eimb",
            Method::Exhaustive => "exhaustive",
            Method::Dft => "dft",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown method {s:?}")))
    }
}

/// How ranked slots are split among APs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemuxMode {
    /// The k-th block of `L` strongest slots goes to the k-th strongest AP.
    #[default]
    Plain,
    /// Greedy by power, at most one slot per round for each AP.
    RoundConstrained,
}

impl FromStr for DemuxMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(DemuxMode::Plain),
            "round_constrained" => Ok(DemuxMode::RoundConstrained),
            _ => Err(Error::Domain(format!("unknown demux mode {s:?}"))),
        }
    }
}

/// Per-AP hash functions, partitions and multi-arm codebooks for `L` rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSchedule {
    pub rounds: usize,
    pub buckets: usize,
    /// `hashes[k][l]`.
    pub hashes: Vec<Vec<HashFunction>>,
    pub partitions: Vec<Vec<BucketPartition>>,
    pub codebooks: Vec<Vec<MultiArmCodebook>>,
}

impl ScanSchedule {
    pub fn aps(&self) -> usize {
        self.hashes.len()
    }

    /// `Q = B·L`, independent of the AP count.
    pub fn slots(&self) -> usize {
        self.buckets * self.rounds
    }

    pub fn slot(&self, round: usize, bucket: usize) -> usize {
        round * self.buckets + bucket
    }

    pub fn round_bucket(&self, slot: usize) -> (usize, usize) {
        (slot / self.buckets, slot % self.buckets)
    }
}

/// Schedule construction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOptions {
    /// Hash independence order `k`.
    pub independence: usize,
    pub partition: PartitionMode,
    pub multibeam: MultiBeamOptions,
}

impl ScheduleOptions {
    pub fn for_codebook(codebook: &SingleBeamCodebook) -> Self {
        Self {
            independence: 2,
            partition: PartitionMode::Balanced,
            multibeam: MultiBeamOptions::for_array(&codebook.array),
        }
    }
}

/// Draws `L` distinct hash functions per AP and synthesizes their codebooks.
pub fn build_schedule<R: Rng + ?Sized>(
    aps: usize,
    rounds: usize,
    buckets: usize,
    codebook: &SingleBeamCodebook,
    opts: &ScheduleOptions,
    rng: &mut R,
) -> Result<ScanSchedule> {
    if rounds == 0 {
        return domain("need at least one round");
    }
    if buckets < 2 || buckets > codebook.len() {
        return domain(format!("bucket count {buckets} must lie in 2..={}", codebook.len()));
    }
    let nc = codebook.len();
    let mut hashes = Vec::with_capacity(aps);
    let mut partitions = Vec::with_capacity(aps);
    let mut codebooks = Vec::with_capacity(aps);
    for _ in 0..aps {
        let hs = sample_distinct(rng, rounds, opts.independence, nc, buckets)?;
        let parts = hs
            .iter()
            .map(|h| partition(h, nc, buckets, opts.partition))
            .collect::<Result<Vec<_>>>()?;
        let cbs = parts
            .iter()
            .map(|p| build_multiarm_codebook(p, codebook, &opts.multibeam))
            .collect::<Result<Vec<_>>>()?;
        hashes.push(hs);
        partitions.push(parts);
        codebooks.push(cbs);
    }
    Ok(ScanSchedule {
        rounds,
        buckets,
        hashes,
        partitions,
        codebooks,
    })
}

/// Received powers on an `L × B` slot grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMeasurements {
    pub rounds: usize,
    pub buckets: usize,
    /// Slot-major powers, `power[l·B + b]`.
    pub power: Vec<f64>,
}

impl PowerMeasurements {
    pub fn new(rounds: usize, buckets: usize, power: Vec<f64>) -> Result<Self> {
        if power.len() != rounds * buckets {
            return domain(format!("{} powers for a {rounds}×{buckets} grid", power.len()));
        }
        if power.iter().any(|p| !(*p >= 0.0)) {
            return domain("powers must be nonnegative");
        }
        Ok(Self { rounds, buckets, power })
    }

    pub fn get(&self, round: usize, bucket: usize) -> f64 {
        self.power[round * self.buckets + bucket]
    }

    pub fn round(&self, round: usize) -> &[f64] {
        &self.power[round * self.buckets..(round + 1) * self.buckets]
    }
}

fn check_channels(schedule: &ScanSchedule, channels: &[ChannelRealization]) -> Result<()> {
    if channels.len() != schedule.aps() {
        return domain(format!(
            "{} channels for {} scheduled APs",
            channels.len(),
            schedule.aps()
        ));
    }
    Ok(())
}

/// Noiseless superimposed amplitude `Σ_k h_kᴴ w_k √P_0` in every slot.
pub fn slot_amplitudes(schedule: &ScanSchedule, channels: &[ChannelRealization], p0: f64) -> Result<Vec<Complex64>> {
    check_channels(schedule, channels)?;
    let x = p0.sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); schedule.slots()];
    for (k, ch) in channels.iter().enumerate() {
        for (l, cb) in schedule.codebooks[k].iter().enumerate() {
            for (b, row) in cb.rows.iter().enumerate() {
                out[schedule.slot(l, b)] += inner(&ch.h, &row.weights) * x;
            }
        }
    }
    Ok(out)
}

/// Adds independent `CN(0, σ²)` noise per slot and takes powers.
pub fn measure<R: Rng + ?Sized>(amplitudes: &[Complex64], sigma2: f64, rng: &mut R) -> Vec<f64> {
    amplitudes
        .iter()
        .map(|&a| (a + complex_noise(rng, sigma2)).norm_sqr())
        .collect()
}

/// One measurement per slot: `P(l,b) = |Σ_k h_kᴴ w_k^{(l,b)} x + n|²`.
pub fn scan<R: Rng + ?Sized>(
    schedule: &ScanSchedule,
    channels: &[ChannelRealization],
    p0: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<PowerMeasurements> {
    let amps = slot_amplitudes(schedule, channels, p0)?;
    PowerMeasurements::new(schedule.rounds, schedule.buckets, measure(&amps, sigma2, rng))
}

/// Slot indices sorted by descending power, ties to the smaller index.
fn ranked(power: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..power.len()).collect();
    order.sort_by(|&a, &b| power[b].total_cmp(&power[a]).then(a.cmp(&b)));
    order
}

/// Splits slots among `K` APs by received power; entry `k` belongs to the
/// k-th strongest AP.
pub fn soft_demux(p: &PowerMeasurements, aps: usize, rounds: usize, mode: DemuxMode) -> Result<Vec<Vec<usize>>> {
    let q = p.power.len();
    if aps * rounds > q {
        return domain(format!("{aps} APs × {rounds} rounds exceed {q} slots"));
    }
    let order = ranked(&p.power);
    match mode {
        DemuxMode::Plain => Ok((0..aps)
            .map(|k| {
                let mut slots = order[k * rounds..(k + 1) * rounds].to_vec();
                slots.sort_unstable();
                slots
            })
            .collect()),
        DemuxMode::RoundConstrained => {
            if rounds != p.rounds || aps > p.buckets {
                return domain(format!(
                    "round-constrained demux needs L = {} rounds and K ≤ B = {}",
                    p.rounds, p.buckets
                ));
            }
            let mut taken = vec![false; q];
            let mut out = Vec::with_capacity(aps);
            for _ in 0..aps {
                let mut used = vec![false; p.rounds];
                let mut slots = Vec::with_capacity(rounds);
                for &s in &order {
                    let l = s / p.buckets;
                    if !taken[s] && !used[l] {
                        taken[s] = true;
                        used[l] = true;
                        slots.push(s);
                        if slots.len() == rounds {
                            break;
                        }
                    }
                }
                slots.sort_unstable();
                out.push(slots);
            }
            Ok(out)
        }
    }
}

/// Vote tallies over the codebook and the winning index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub winner: usize,
    pub tallies: Vec<u32>,
}

fn tally_winner(tallies: Vec<u32>) -> Vote {
    let mut winner = 0;
    for (i, &t) in tallies.iter().enumerate() {
        if t > tallies[winner] {
            winner = i;
        }
    }
    Vote { winner, tallies }
}

/// Every member of each assigned slot's bucket gets one vote; the most voted
/// index wins, ties going to the smallest index.
pub fn vote(partitions: &[BucketPartition], slots: &[usize]) -> Result<Vote> {
    let Some(first) = partitions.first() else {
        return domain("no partitions to vote over");
    };
    if slots.is_empty() {
        return domain("no slots assigned");
    }
    let b = first.num_buckets();
    let mut tallies = vec![0u32; first.universe()];
    for &q in slots {
        let (l, bucket) = (q / b, q % b);
        let part = partitions
            .get(l)
            .ok_or_else(|| Error::Domain(format!("slot {q} lies beyond round {}", partitions.len())))?;
        for &x in part.members(bucket) {
            tallies[x] += 1;
        }
    }
    Ok(tally_winner(tallies))
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingResult {
    pub method: Method,
    /// Identified codeword per AP, in channel order.
    pub gamma: Vec<usize>,
    /// Slots attributed to each AP.
    pub assigned: Vec<Vec<usize>>,
    pub tallies: Vec<Vec<u32>>,
    /// Slots consumed.
    pub overhead: usize,
    /// Every measured power, in slot order.
    pub powers: Vec<f64>,
}

/// AP indices sorted by channel gain `‖h‖`, strongest first.
pub fn gain_order(channels: &[ChannelRealization]) -> Vec<usize> {
    let gains: Vec<f64> = channels
        .iter()
        .map(|c| c.h.iter().map(|z| z.norm_sqr()).sum())
        .collect();
    ranked(&gains)
}

/// Soft-decision training on precomputed measurements.
pub fn hmb_decode(
    schedule: &ScanSchedule,
    channels: &[ChannelRealization],
    p: &PowerMeasurements,
    mode: DemuxMode,
) -> Result<TrainingResult> {
    check_channels(schedule, channels)?;
    let k = channels.len();
    let sets = soft_demux(p, k, schedule.rounds, mode)?;
    let mut gamma = vec![0; k];
    let mut assigned = vec![Vec::new(); k];
    let mut tallies = vec![Vec::new(); k];
    for (rank, ap) in gain_order(channels).into_iter().enumerate() {
        let v = vote(&schedule.partitions[ap], &sets[rank])?;
        gamma[ap] = v.winner;
        tallies[ap] = v.tallies;
        assigned[ap] = sets[rank].clone();
    }
    Ok(TrainingResult {
        method: Method::Hmb,
        gamma,
        assigned,
        tallies,
        overhead: schedule.slots(),
        powers: p.power.clone(),
    })
}

/// Scan, soft demultiplexing and per-AP voting.
pub fn hmb_train<R: Rng + ?Sized>(
    schedule: &ScanSchedule,
    channels: &[ChannelRealization],
    p0: f64,
    sigma2: f64,
    mode: DemuxMode,
    rng: &mut R,
) -> Result<TrainingResult> {
    let p = scan(schedule, channels, p0, sigma2, rng)?;
    hmb_decode(schedule, channels, &p, mode)
}

/// Slots per round whose power reaches `α` times that round's maximum.
fn active_slots(power: &[f64], buckets: usize, alpha: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for (l, round) in power.chunks(buckets).enumerate() {
        let max = round.iter().cloned().fold(0.0, f64::max);
        out.extend(
            (0..round.len())
                .filter(|&b| round[b] >= alpha * max)
                .map(|b| l * buckets + b),
        );
    }
    out
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("threshold α must lie in (0, 1) (got {alpha})"));
    }
    Ok(())
}

/// Threshold-decision training on the hashed schedule's measurements.
pub fn hmb_hard_decode(
    schedule: &ScanSchedule,
    channels: &[ChannelRealization],
    p: &PowerMeasurements,
    alpha: f64,
) -> Result<TrainingResult> {
    check_channels(schedule, channels)?;
    check_alpha(alpha)?;
    let active = active_slots(&p.power, schedule.buckets, alpha);
    let mut gamma = Vec::with_capacity(channels.len());
    let mut tallies = Vec::with_capacity(channels.len());
    for ap in 0..channels.len() {
        let v = vote(&schedule.partitions[ap], &active)?;
        gamma.push(v.winner);
        tallies.push(v.tallies);
    }
    Ok(TrainingResult {
        method: Method::HmbHard,
        gamma,
        assigned: vec![active; channels.len()],
        tallies,
        overhead: schedule.slots(),
        powers: p.power.clone(),
    })
}

pub fn hmb_hard_train<R: Rng + ?Sized>(
    schedule: &ScanSchedule,
    channels: &[ChannelRealization],
    p0: f64,
    sigma2: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<TrainingResult> {
    let p = scan(schedule, channels, p0, sigma2, rng)?;
    hmb_hard_decode(schedule, channels, &p, alpha)
}

/// Noiseless `h_kᴴ c_s √P_0` for every AP and codeword.
pub fn codeword_amplitudes(
    codebook: &SingleBeamCodebook,
    channels: &[ChannelRealization],
    p0: f64,
) -> Vec<Vec<Complex64>> {
    let x = p0.sqrt();
    channels
        .iter()
        .map(|ch| codebook.rows.iter().map(|c| inner(&ch.h, c) * x).collect())
        .collect()
}

/// Exhaustive decision from per-AP sweep powers.
pub fn exhaustive_decode(method: Method, powers: Vec<Vec<f64>>) -> TrainingResult {
    let nc = powers.first().map_or(0, Vec::len);
    let gamma = powers.iter().map(|p| ranked(p)[0]).collect();
    TrainingResult {
        method,
        assigned: (0..powers.len()).map(|k| (k * nc..(k + 1) * nc).collect()).collect(),
        gamma,
        tallies: Vec::new(),
        overhead: nc * powers.len(),
        powers: powers.concat(),
    }
}

/// Each AP sweeps every codeword alone; `γ_k` is the strongest slot.
pub fn exhaustive_train<R: Rng + ?Sized>(
    codebook: &SingleBeamCodebook,
    channels: &[ChannelRealization],
    p0: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<TrainingResult> {
    if codebook.is_empty() {
        return domain("empty codebook");
    }
    let powers = codeword_amplitudes(codebook, channels, p0)
        .iter()
        .map(|amps| measure(amps, sigma2, rng))
        .collect();
    Ok(exhaustive_decode(Method::Exhaustive, powers))
}

/// Equal-interval partition for round `l`: index `i` goes to bucket
/// `(i + l·⌊i/B⌋) mod B`, so round 0 is the plain interleave `i mod B`.
pub fn eimb_partition(universe: usize, buckets: usize, round: usize) -> Result<BucketPartition> {
    if buckets == 0 || buckets > universe {
        return domain(format!("bucket count {buckets} must lie in 1..={universe}"));
    }
    let mut parts = vec![Vec::new(); buckets];
    for i in 0..universe {
        parts[(i + round * (i / buckets)) % buckets].push(i);
    }
    BucketPartition::from_buckets(parts, PartitionMode::Raw)
}

/// Fixed equal-interval multi-arm beams for EIMB, one codebook per round.
#[derive(Debug, Clone, PartialEq)]
pub struct EimbSchedule {
    pub partitions: Vec<BucketPartition>,
    pub codebooks: Vec<MultiArmCodebook>,
}

impl EimbSchedule {
    pub fn new(codebook: &SingleBeamCodebook, buckets: usize, rounds: usize) -> Result<Self> {
        if rounds == 0 {
            return domain("need at least one round");
        }
        let partitions = (0..rounds)
            .map(|l| eimb_partition(codebook.len(), buckets, l))
            .collect::<Result<Vec<_>>>()?;
        let codebooks = partitions
            .iter()
            .map(|p| {
                let rows = p
                    .buckets()
                    .iter()
                    .map(|b| synthesize(b, codebook, &vec![0.0; b.len()]))
                    .collect::<Result<_>>()?;
                Ok(MultiArmCodebook {
                    rows,
                    partition: p.clone(),
                    deviations: None,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { partitions, codebooks })
    }

    pub fn buckets(&self) -> usize {
        self.partitions[0].num_buckets()
    }

    /// Noiseless per-AP slot amplitudes; each AP sweeps alone.
    pub fn amplitudes(&self, channels: &[ChannelRealization], p0: f64) -> Vec<Vec<Complex64>> {
        let x = p0.sqrt();
        channels
            .iter()
            .map(|ch| {
                self.codebooks
                    .iter()
                    .flat_map(|cb| cb.rows.iter().map(|r| inner(&ch.h, &r.weights) * x))
                    .collect()
            })
            .collect()
    }

    pub fn decode(&self, powers: Vec<Vec<f64>>, alpha: f64) -> Result<TrainingResult> {
        check_alpha(alpha)?;
        let b = self.buckets();
        let mut gamma = Vec::with_capacity(powers.len());
        let mut assigned = Vec::with_capacity(powers.len());
        let mut tallies = Vec::with_capacity(powers.len());
        for p in &powers {
            let active = active_slots(p, b, alpha);
            let v = vote(&self.partitions, &active)?;
            gamma.push(v.winner);
            tallies.push(v.tallies);
            assigned.push(active);
        }
        Ok(TrainingResult {
            method: Method::Eimb,
            gamma,
            assigned,
            tallies,
            overhead: b * self.partitions.len() * powers.len(),
            powers: powers.concat(),
        })
    }
}

/// Equal-interval multi-arm training with per-AP sweeps and `α·max`
/// threshold decisions.
#[allow(clippy::too_many_arguments)]
pub fn eimb_train<R: Rng + ?Sized>(
    codebook: &SingleBeamCodebook,
    channels: &[ChannelRealization],
    buckets: usize,
    rounds: usize,
    alpha: f64,
    p0: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<TrainingResult> {
    let sched = EimbSchedule::new(codebook, buckets, rounds)?;
    let powers = sched
        .amplitudes(channels, p0)
        .iter()
        .map(|a| measure(a, sigma2, rng))
        .collect();
    sched.decode(powers, alpha)
}

/// Inputs of the round-count bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Number of candidate directions `M_s`.
    pub candidates: f64,
    pub signal_max: f64,
    pub signal_min: f64,
    pub noise_max: f64,
    pub noise_min: f64,
    /// Decision threshold `T_0`.
    pub threshold: f64,
    /// Expected signal-slot power `T_b^s`.
    pub signal_mean: f64,
    /// Expected noise-slot power `T_b^ns`.
    pub noise_mean: f64,
}

/// Round counts from Hoeffding's inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundBound {
    pub signal: f64,
    pub noise: f64,
    /// `L^s + L^ns` before rounding.
    pub real: f64,
    pub rounds: usize,
}

/// `L^ns = ln(M_s)(ΔP^ns)²/(2(T_0 - T^ns)²)`, `L^s` likewise with the signal
/// range and `T^s - T_0`; the result is `⌈L^s + L^ns⌉`.
pub fn required_rounds(p: &BoundParams) -> Result<RoundBound> {
    let finite = [
        p.candidates,
        p.signal_max,
        p.signal_min,
        p.noise_max,
        p.noise_min,
        p.threshold,
        p.signal_mean,
        p.noise_mean,
    ]
    .iter()
    .all(|x| x.is_finite());
    if !finite {
        return domain("bound inputs must be finite");
    }
    if !(p.candidates >= 1.0) {
        return domain(format!("candidate count must be at least 1 (got {})", p.candidates));
    }
    if !(p.noise_mean < p.threshold && p.threshold < p.signal_mean) {
        return domain(format!(
            "need T_ns < T_0 < T_s (got {} < {} < {})",
            p.noise_mean, p.threshold, p.signal_mean
        ));
    }
    if !(p.signal_max >= p.signal_min && p.noise_max >= p.noise_min) {
        return domain("power ranges must have max ≥ min");
    }
    let ln = p.candidates.ln();
    let signal = ln * (p.signal_max - p.signal_min).powi(2) / (2.0 * (p.signal_mean - p.threshold).powi(2));
    let noise = ln * (p.noise_max - p.noise_min).powi(2) / (2.0 * (p.threshold - p.noise_mean).powi(2));
    let real = signal + noise;
    Ok(RoundBound {
        signal,
        noise,
        real,
        rounds: real.ceil() as usize,
    })
}

/// Uniform two-level slot-power model for checking the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelModel {
    pub signal: (f64, f64),
    pub noise: (f64, f64),
    pub threshold: f64,
}

impl TwoLevelModel {
    pub fn bound_params(&self, candidates: f64) -> BoundParams {
        BoundParams {
            candidates,
            signal_max: self.signal.1,
            signal_min: self.signal.0,
            noise_max: self.noise.1,
            noise_min: self.noise.0,
            threshold: self.threshold,
            signal_mean: 0.5 * (self.signal.0 + self.signal.1),
            noise_mean: 0.5 * (self.noise.0 + self.noise.1),
        }
    }
}

/// Fraction of trials in which identification fails after averaging `L`
/// rounds: the true direction's mean power falls below `T_0`, or one of
/// the other `M_s - 1` candidates reaches it.
pub fn misidentification_rate<R: Rng + ?Sized>(
    model: &TwoLevelModel,
    candidates: usize,
    rounds: usize,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if rounds == 0 || trials == 0 || candidates == 0 {
        return domain("need at least one round, trial and candidate");
    }
    let mean = |rng: &mut R, (lo, hi): (f64, f64)| -> f64 {
        (0..rounds).map(|_| rng.random_range(lo..=hi)).sum::<f64>() / rounds as f64
    };
    let mut failures = 0usize;
    for _ in 0..trials {
        let mut failed = mean(rng, model.signal) < model.threshold;
        for _ in 1..candidates {
            failed |= mean(rng, model.noise) >= model.threshold;
        }
        failures += failed as usize;
    }
    Ok(failures as f64 / trials as f64)
}

/// Text trace of one run: powers, assigned slots and top tallies.
pub fn render_trace(result: &TrainingResult, top: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "method {}", result.method);
    let _ = writeln!(out, "overhead {}", result.overhead);
    let powers: Vec<String> = result.powers.iter().map(|p| format!("{p:.6e}")).collect();
    let _ = writeln!(out, "powers {}", powers.join(","));
    for (k, g) in result.gamma.iter().enumerate() {
        let slots: Vec<String> = result.assigned[k].iter().map(usize::to_string).collect();
        let _ = write!(out, "ap {k} gamma {g} slots {}", slots.join(","));
        if let Some(t) = result.tallies.get(k) {
            let mut idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] > 0).collect();
            idx.sort_by(|&a, &b| t[b].cmp(&t[a]).then(a.cmp(&b)));
            let votes: Vec<String> = idx.iter().take(top).map(|&i| format!("{i}:{}", t[i])).collect();
            let _ = write!(out, " votes {}", votes.join(","));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{los_channel, ApPlacement, ArrayConfig};
    use crate::codebook::{build_codebook, CodebookParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn desk_codebook() -> SingleBeamCodebook {
        let cfg = ArrayConfig::half_wavelength(4, 32, 28e9).unwrap();
        build_codebook(&cfg, &CodebookParams::for_array(&cfg)).unwrap()
    }

    /// LoS channel whose array response is exactly codeword `s`.
    fn on_grid(cb: &SingleBeamCodebook, index: usize, s: usize, gain: f64) -> ChannelRealization {
        let h: Vec<Complex64> = cb.row(s).iter().map(|z| z * gain).collect();
        ChannelRealization {
            h,
            ap_index: index,
            point: cb.points[s].polar(),
            gain,
        }
    }

    fn far_field_codebook() -> SingleBeamCodebook {
        let cfg = ArrayConfig::half_wavelength(4, 32, 28e9).unwrap();
        let params = CodebookParams {
            far_field_only: true,
            ..CodebookParams::for_array(&cfg)
        };
        build_codebook(&cfg, &params).unwrap()
    }

    fn part_of(buckets: Vec<Vec<usize>>) -> BucketPartition {
        BucketPartition::from_buckets(buckets, PartitionMode::Raw).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("foo".parse::<Method>().is_err());
        assert_eq!(
            "round_constrained".parse::<DemuxMode>().unwrap(),
            DemuxMode::RoundConstrained
        );
    }

    #[test]
    fn schedule_slot_count_ignores_ap_count() {
        let cb = desk_codebook();
        let opts = ScheduleOptions::for_codebook(&cb);
        for k in [1, 3] {
            let s = build_schedule(k, 6, 32, &cb, &opts, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert_eq!(s.slots(), 192);
            assert_eq!(s.aps(), k);
            for q in 0..s.slots() {
                let (l, b) = s.round_bucket(q);
                assert_eq!(s.slot(l, b), q);
            }
        }
    }

    #[test]
    fn schedule_hashes_distinct_per_ap() {
        let cb = desk_codebook();
        let opts = ScheduleOptions::for_codebook(&cb);
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let hs = sample_distinct(&mut rng, 6, opts.independence, cb.len(), 16).unwrap();
            let set: HashSet<_> = hs.iter().map(|h| h.coefficients().to_vec()).collect();
            assert_eq!(set.len(), 6);
        }
        let s = build_schedule(2, 3, 16, &cb, &opts, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for hs in &s.hashes {
            assert_ne!(hs[0], hs[1]);
        }
    }

    #[test]
    fn empty_scan_is_silent() {
        let cb = desk_codebook();
        let s = build_schedule(
            0,
            2,
            8,
            &cb,
            &ScheduleOptions::for_codebook(&cb),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let p = scan(&s, &[], 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(p.power.len(), 16);
        assert!(p.power.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_ap_peak_is_the_true_bucket() {
        let cb = desk_codebook();
        let opts = ScheduleOptions::for_codebook(&cb);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = rng.random_range(0..cb.len());
            let s = build_schedule(1, 4, 16, &cb, &opts, &mut rng).unwrap();
            let ch = [on_grid(&cb, 0, g, 1.0)];
            let p = scan(&s, &ch, 1.0, 0.0, &mut rng).unwrap();
            for l in 0..4 {
                let round = p.round(l);
                let arg = ranked(round)[0];
                assert_eq!(arg, s.partitions[0][l].bucket_of(g), "seed {seed} round {l}");
            }
        }
    }

    #[test]
    fn superposition_matches_per_ap_scans() {
        let cb = desk_codebook();
        let opts = ScheduleOptions::for_codebook(&cb);
        let s = build_schedule(2, 3, 8, &cb, &opts, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let chans = [on_grid(&cb, 0, 10, 1.0), on_grid(&cb, 1, 100, 0.3)];
        let joint = slot_amplitudes(&s, &chans, 2.0).unwrap();
        let single = |k: usize| {
            let sub = ScanSchedule {
                hashes: vec![s.hashes[k].clone()],
                partitions: vec![s.partitions[k].clone()],
                codebooks: vec![s.codebooks[k].clone()],
                ..s.clone()
            };
            slot_amplitudes(&sub, &chans[k..=k], 2.0).unwrap()
        };
        let (a, b) = (single(0), single(1));
        let sigma2 = 0.01;
        let pj = measure(&joint, sigma2, &mut ChaCha8Rng::seed_from_u64(9));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for q in 0..joint.len() {
            let n = complex_noise(&mut rng, sigma2);
            let expect = (a[q] + b[q] + n).norm_sqr();
            assert!((pj[q] - expect).abs() <= 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn plain_demux_takes_blocks_of_ranks() {
        let mut power = vec![0.0; 16];
        power[4] = 9.0;
        power[1] = 7.0;
        power[12] = 5.0;
        power[7] = 3.0;
        let p = PowerMeasurements::new(2, 8, power).unwrap();
        let sets = soft_demux(&p, 2, 2, DemuxMode::Plain).unwrap();
        assert_eq!(sets, vec![vec![1, 4], vec![7, 12]]);
        assert!(soft_demux(&p, 9, 2, DemuxMode::Plain).is_err());
    }

    #[test]
    fn round_constrained_demux_uses_each_round_once() {
        // two strongest slots share round 0
        let power = vec![9.0, 8.0, 1.0, 1.0, 2.0, 3.0, 0.5, 0.4];
        let p = PowerMeasurements::new(2, 4, power).unwrap();
        let plain = soft_demux(&p, 2, 2, DemuxMode::Plain).unwrap();
        assert_eq!(plain[0], vec![0, 1]);
        let rc = soft_demux(&p, 2, 2, DemuxMode::RoundConstrained).unwrap();
        assert_eq!(rc, vec![vec![0, 5], vec![1, 4]]);
    }

    #[test]
    fn demux_noiseless_two_aps() {
        // orthogonal rows: each slot carries exactly the arms it contains
        let cb = far_field_codebook();
        let opts = ScheduleOptions::for_codebook(&cb);
        let mut checked = 0;
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = build_schedule(2, 3, 16, &cb, &opts, &mut rng).unwrap();
            let (g0, g1) = (rng.random_range(0..cb.len()), rng.random_range(0..cb.len()));
            let chans = [on_grid(&cb, 0, g0, 1.0), on_grid(&cb, 1, g1, 0.1)];
            let p = scan(&s, &chans, 1.0, 0.0, &mut rng).unwrap();
            let sets = soft_demux(&p, 2, 3, DemuxMode::Plain).unwrap();
            let expect: Vec<usize> = (0..3).map(|l| s.slot(l, s.partitions[0][l].bucket_of(g0))).collect();
            // ambiguous when AP 2 shares a slot with AP 1
            if (0..3).any(|l| s.partitions[1][l].bucket_of(g1) == s.partitions[0][l].bucket_of(g0)) {
                continue;
            }
            assert_eq!(sets[0], expect, "seed {seed}");
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn vote_finds_common_direction() {
        let r1 = part_of(vec![vec![1, 6, 9, 13], vec![0, 2, 3, 4, 5, 7, 8, 10, 11, 12, 14, 15]]);
        let r2 = part_of(vec![vec![0, 1, 3, 4, 6, 7, 8, 10, 11, 12, 13, 15], vec![2, 5, 9, 14]]);
        let v = vote(&[r1.clone(), r2], &[0, 3]).unwrap();
        assert_eq!(v.winner, 9);
        assert_eq!(v.tallies[9], 2);
        assert_eq!(vote(std::slice::from_ref(&r1), &[0]).unwrap().winner, 1);
        assert!(vote(&[r1], &[]).is_err());
        assert!(vote(&[], &[0]).is_err());
    }

    #[test]
    fn vote_recovers_planted_intersection() {
        let cb_len = 120;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut hits = 0;
        for _ in 0..1000 {
            let planted = rng.random_range(0..cb_len);
            let parts: Vec<BucketPartition> = (0..4)
                .map(|_| {
                    let h = crate::hash::sample_hash(&mut rng, 2, cb_len, 8).unwrap();
                    partition(&h, cb_len, 8, PartitionMode::Balanced).unwrap()
                })
                .collect();
            let slots: Vec<usize> = parts
                .iter()
                .enumerate()
                .map(|(l, p)| l * 8 + p.bucket_of(planted))
                .collect();
            let common: Vec<usize> = (0..cb_len)
                .filter(|&x| {
                    parts
                        .iter()
                        .enumerate()
                        .all(|(l, p)| l * 8 + p.bucket_of(x) == slots[l])
                })
                .collect();
            if common == [planted] {
                assert_eq!(vote(&parts, &slots).unwrap().winner, planted);
                hits += 1;
            }
        }
        assert!(hits > 900);
    }

    #[test]
    fn hmb_is_composition_of_stages() {
        let cb = desk_codebook();
        let opts = ScheduleOptions::for_codebook(&cb);
        let s = build_schedule(2, 4, 16, &cb, &opts, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let chans = [on_grid(&cb, 0, 17, 1.0), on_grid(&cb, 1, 90, 0.5)];
        let r = hmb_train(
            &s,
            &chans,
            1.0,
            0.05,
            DemuxMode::Plain,
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        let p = scan(&s, &chans, 1.0, 0.05, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let sets = soft_demux(&p, 2, 4, DemuxMode::Plain).unwrap();
        for (rank, ap) in gain_order(&chans).into_iter().enumerate() {
            let v = vote(&s.partitions[ap], &sets[rank]).unwrap();
            assert_eq!(r.gamma[ap], v.winner);
            assert_eq!(r.tallies[ap], v.tallies);
        }
        assert_eq!(r.overhead, 64);
    }

    #[test]
    fn noiseless_single_ap_recovery_when_intersection_unique() {
        let cb = far_field_codebook();
        let opts = ScheduleOptions::for_codebook(&cb);
        let mut unique = 0;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = rng.random_range(0..cb.len());
            let s = build_schedule(1, 2, 16, &cb, &opts, &mut rng).unwrap();
            let inter = (0..cb.len())
                .filter(|&x| (0..2).all(|l| s.partitions[0][l].bucket_of(x) == s.partitions[0][l].bucket_of(g)))
                .count();
            if inter == 1 {
                let r = hmb_train(&s, &[on_grid(&cb, 0, g, 1.0)], 1.0, 0.0, DemuxMode::Plain, &mut rng).unwrap();
                assert_eq!(r.gamma[0], g, "seed {seed}");
                unique += 1;
            }
        }
        assert!(unique > 100);
    }

    #[test]
    fn noiseless_polar_recovery_rate() {
        // correlated arms sharing a bucket can mask the true slot
        let cb = desk_codebook();
        let opts = ScheduleOptions::for_codebook(&cb);
        let (mut unique, mut ok) = (0, 0);
        for seed in 0..300 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = rng.random_range(0..cb.len());
            let s = build_schedule(1, 2, 16, &cb, &opts, &mut rng).unwrap();
            let inter = (0..cb.len())
                .filter(|&x| (0..2).all(|l| s.partitions[0][l].bucket_of(x) == s.partitions[0][l].bucket_of(g)))
                .count();
            if inter == 1 {
                let r = hmb_train(
                    &s,
                    &[on_grid(&cb, 0, g, 1.0)],
                    1.0,
                    0.0,
                    DemuxMode::RoundConstrained,
                    &mut rng,
                )
                .unwrap();
                unique += 1;
                ok += (r.gamma[0] == g) as usize;
            }
        }
        assert!(ok as f64 >= 0.9 * unique as f64, "{ok}/{unique}");
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        let cb = desk_codebook();
        let cfg = cb.array;
        let aps = [
            ApPlacement::new(0, 2.0, 0.4, 1.3).unwrap(),
            ApPlacement::new(1, 0.9, 2.5, 1.9).unwrap(),
        ];
        let chans: Vec<_> = aps.iter().map(|a| los_channel(&cfg, a, 1e-7).unwrap()).collect();
        let r = exhaustive_train(&cb, &chans, 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for (k, ch) in chans.iter().enumerate() {
            assert_eq!(r.gamma[k], cb.best_index(&ch.h));
        }
        assert_eq!(r.overhead, cb.len() * 2);
        for g in [0, 50, cb.len() - 1] {
            let r = exhaustive_train(
                &cb,
                &[on_grid(&cb, 0, g, 1.0)],
                1.0,
                0.0,
                &mut ChaCha8Rng::seed_from_u64(0),
            )
            .unwrap();
            assert_eq!(r.gamma[0], g);
        }
    }

    #[test]
    fn eimb_interleave_and_noiseless_activity() {
        let p = eimb_partition(16, 4, 0).unwrap();
        assert_eq!(p.members(0), &[0, 4, 8, 12]);
        for l in 0..4 {
            let p = eimb_partition(16, 4, l).unwrap();
            assert!(p.buckets().iter().all(|b| b.len() == 4));
        }
        let cb = desk_codebook();
        let sched = EimbSchedule::new(&cb, 16, 6).unwrap();
        for g in [3, 77, 150] {
            let chans = [on_grid(&cb, 0, g, 1.0)];
            let powers: Vec<Vec<f64>> = sched
                .amplitudes(&chans, 1.0)
                .iter()
                .map(|a| a.iter().map(|z| z.norm_sqr()).collect())
                .collect();
            let r = sched.decode(powers, 0.5).unwrap();
            for (l, part) in sched.partitions.iter().enumerate() {
                assert!(r.assigned[0].contains(&(l * 16 + part.bucket_of(g))));
            }
            assert_eq!(r.overhead, 16 * 6);
        }
        assert!(sched.decode(vec![vec![0.0; 96]], 1.5).is_err());
    }

    #[test]
    fn hard_decision_noiseless_recovery() {
        let cb = desk_codebook();
        let opts = ScheduleOptions::for_codebook(&cb);
        let mut ok = 0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = rng.random_range(0..cb.len());
            let s = build_schedule(1, 6, 16, &cb, &opts, &mut rng).unwrap();
            let r = hmb_hard_train(&s, &[on_grid(&cb, 0, g, 1.0)], 1.0, 0.0, 0.5, &mut rng).unwrap();
            ok += (r.gamma[0] == g) as usize;
        }
        assert!(ok >= 45, "{ok}");
    }

    #[test]
    fn bound_arithmetic() {
        let model = TwoLevelModel {
            signal: (0.8, 1.2),
            noise: (0.05, 0.15),
            threshold: 0.55,
        };
        let one = required_rounds(&model.bound_params(1.0)).unwrap();
        assert_eq!(one.rounds, 0);
        let a = required_rounds(&model.bound_params(10.0)).unwrap();
        let b = required_rounds(&model.bound_params(100.0)).unwrap();
        assert!((b.real - 2.0 * a.real).abs() < 1e-12);
        let ln = 100f64.ln();
        assert!((b.signal - ln * 0.16 / (2.0 * 0.45f64.powi(2))).abs() < 1e-12);
        assert!((b.noise - ln * 0.01 / (2.0 * 0.45f64.powi(2))).abs() < 1e-12);
        let mut bad = model.bound_params(10.0);
        bad.threshold = 2.0;
        assert!(required_rounds(&bad).is_err());
    }

    #[test]
    fn trace_lists_every_ap() {
        let cb = desk_codebook();
        let r = exhaustive_train(
            &cb,
            &[on_grid(&cb, 0, 5, 1.0)],
            1.0,
            0.0,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let t = render_trace(&r, 3);
        assert!(t.contains("ap 0 gamma 5"));
        assert!(t.starts_with("method exhaustive"));
    }
}
