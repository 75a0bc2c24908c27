//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hmb_core::array::ArrayConfig;
use hmb_core::codebook::{build_codebook, render_codebook, CodebookParams};
use hmb_core::harness::{
    read_csv, read_distance_csv, read_overhead_csv, render_plots, run_sweep, simulate_trial_detailed, trial_geometry,
    write_csv, write_distance_csv, write_json, write_overhead_csv, ExperimentConfig, TrialContext,
};
use hmb_core::multibeam::{arm_fidelity, render_multiarm, MultiBeamOptions, PhaseSearch, Quadrature};
use hmb_core::protocol::{
    build_schedule, misidentification_rate, render_trace, required_rounds, BoundParams, ScheduleOptions, TwoLevelModel,
};

use crate::{BoundArgs, CodebookArgs, Command, ConfigArgs, MultibeamArgs, PlotArgs, SweepArgs, TrainArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Codebook(a) => codebook(a),
        Command::Multibeam(a) => multibeam(a),
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
        Command::Bound(a) => bound(a),
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn codebook(a: CodebookArgs) -> Result<()> {
    let cfg = ArrayConfig::half_wavelength(a.m, a.n, a.carrier_hz)?;
    let base = CodebookParams::for_array(&cfg);
    let params = CodebookParams {
        threshold: a.threshold,
        r_min: a.r_min.unwrap_or(base.r_min),
        r_max: a.r_max.unwrap_or(base.r_max),
        axis: a.axis,
        far_field_only: a.far_field_only,
    };
    let cb = build_codebook(&cfg, &params)?;
    write_or_print(a.output.as_deref(), &render_codebook(&cb))?;
    eprintln!(
        "codebook: {} rows ({} far-field), r in [{:.4}, {:.4}] m, adjacent-ring coherence {:.4}",
        cb.len(),
        cb.far_field_indices().len(),
        params.r_min,
        params.r_max,
        cb.ring_coherence()
    );
    Ok(())
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.profile) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::profile(name)?,
            (None, None) => ExperimentConfig::desk(),
        };
        cfg.apply_seed_env()?;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.m {
            cfg.array.m = v;
        }
        if let Some(v) = self.n {
            cfg.array.n = v;
        }
        if let Some(v) = self.aps {
            cfg.scenario.aps = v;
        }
        if let Some(v) = self.buckets {
            cfg.protocol.buckets = v;
        }
        if let Some(v) = self.rounds {
            cfg.protocol.rounds = v;
        }
        if let Some(v) = self.independence {
            cfg.protocol.independence = v;
        }
        if let Some(v) = self.demux {
            cfg.protocol.demux = v;
        }
        if let Some(v) = &self.methods {
            cfg.protocol.methods = v.clone();
        }
        if let Some(v) = self.alpha {
            cfg.protocol.alpha = v;
        }
        if self.optimize {
            cfg.protocol.optimize_phases = true;
        }
        if self.far_field_only {
            cfg.codebook.far_field_only = true;
        }
        if let Some(v) = self.placement {
            cfg.scenario.placement = v;
        }
        if let Some(v) = self.nlos {
            cfg.scenario.nlos_paths = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn multibeam(a: MultibeamArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let array = cfg.array_config()?;
    let params = cfg.codebook.params(&array);
    let cb = build_codebook(&array, &params)?;
    let opts = ScheduleOptions {
        independence: cfg.protocol.independence,
        partition: cfg.protocol.partition,
        multibeam: MultiBeamOptions {
            optimize: cfg.protocol.optimize_phases,
            quadrature: Quadrature::new(cfg.protocol.quadrature, params.r_min)?,
            search: PhaseSearch::default(),
            seed: cfg.seed,
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sched = build_schedule(1, cfg.protocol.rounds, cfg.protocol.buckets, &cb, &opts, &mut rng)?;
    if let Some(dir) = &a.output {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    println!(
        "codewords {} buckets {} rounds {} seed {}",
        cb.len(),
        sched.buckets,
        sched.rounds,
        cfg.seed
    );
    for (l, mcb) in sched.codebooks[0].iter().enumerate() {
        let h = &sched.hashes[0][l];
        let sizes: Vec<usize> = mcb.rows.iter().map(|r| r.arms()).collect();
        let fid = mcb
            .rows
            .iter()
            .map(|r| arm_fidelity(r, &cb))
            .collect::<hmb_core::Result<Vec<_>>>()?;
        let mean = fid.iter().map(|f| f.mean).sum::<f64>() / fid.len() as f64;
        let max = fid.iter().map(|f| f.max).fold(0.0, f64::max);
        let mut line = format!(
            "round {l} coefficients {:?} prime {} arms {}..{} arm-gain error mean {mean:.4} max {max:.4}",
            h.coefficients(),
            h.prime(),
            sizes.iter().min().unwrap_or(&0),
            sizes.iter().max().unwrap_or(&0)
        );
        if let Some(d) = &mcb.deviations {
            let _ = write!(line, " deviation mean {:.4}", d.iter().sum::<f64>() / d.len() as f64);
        }
        println!("{line}");
        if let Some(dir) = &a.output {
            let path = dir.join(format!("round_{l}.txt"));
            fs::write(&path, render_multiarm(mcb, &array, Some(params.threshold)))
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = a.config.resolve()?;
    if !a.snr_db.is_finite() {
        bail!("SNR must be finite");
    }
    cfg.sweep.snr_db = vec![a.snr_db];
    cfg.sweep.buckets.clear();
    cfg.sweep.rounds.clear();
    let ctx = TrialContext::new(&cfg)?;
    let geo = trial_geometry(&ctx, a.trial)?;
    let (outcome, results) = simulate_trial_detailed(&ctx, a.trial, true)?;
    println!(
        "seed {} trial {} snr_db {} codewords {} B {} L {}",
        cfg.seed,
        a.trial,
        a.snr_db,
        ctx.codebook.len(),
        cfg.protocol.buckets,
        cfg.protocol.rounds
    );
    for (p, ch) in geo.placements.iter().zip(&geo.channels) {
        let best = ctx.codebook.best_index(&ch.h);
        println!(
            "ap {} r {:.4} theta {:.4} phi {:.4} best {best}",
            p.index, p.point.r, p.point.theta, p.point.phi
        );
    }
    for (mi, r) in results[0][0].iter().enumerate() {
        let scores = &outcome.scores[0][0][mi];
        let ok: Vec<String> = scores.iter().map(|s| s.success.to_string()).collect();
        let rate: Vec<String> = scores.iter().map(|s| format!("{:.4}", s.rate)).collect();
        println!("{} success {} rate {}", r.method, ok.join(","), rate.join(","));
        print!("{}", render_trace(r, a.top));
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = a.config.resolve()?;
    if let Some(v) = a.snr_db {
        cfg.sweep.snr_db = v;
    }
    if let Some(v) = a.sweep_buckets {
        cfg.sweep.buckets = v;
    }
    if let Some(v) = a.sweep_rounds {
        cfg.sweep.rounds = v;
    }
    cfg.validate()?;
    let out = run_sweep(&cfg)?;
    let dir = &a.output;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_csv(&dir.join("results.csv"), &out.table)?;
    write_json(&dir.join("results.json"), &out.table)?;
    write_distance_csv(&dir.join("distance.csv"), &out.distance)?;
    write_overhead_csv(&dir.join("overhead.csv"), &out.overhead)?;
    fs::write(dir.join("config.json"), cfg.to_json()? + "\n").context("cannot write config.json")?;
    if out.resampled > 0 {
        eprintln!("note: {} AP placements inside r_min were redrawn", out.resampled);
    }
    if a.plot {
        render_plots(dir, &out.table, &out.distance, &out.overhead)?;
    }
    eprintln!("sweep: {} rows written to {}", out.table.rows.len(), dir.display());
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let table = read_csv(&a.input.join("results.csv"))?;
    let optional = |name: &str| a.input.join(name).is_file().then(|| a.input.join(name));
    let distance = optional("distance.csv")
        .map(|p| read_distance_csv(&p))
        .transpose()?
        .unwrap_or_default();
    let overhead = optional("overhead.csv")
        .map(|p| read_overhead_csv(&p))
        .transpose()?
        .unwrap_or_default();
    let dir = a.output.as_ref().unwrap_or(&a.input);
    for p in render_plots(dir, &table, &distance, &overhead)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn bound(a: BoundArgs) -> Result<()> {
    let signal_mean = a.signal_mean.unwrap_or(0.5 * (a.signal_min + a.signal_max));
    let noise_mean = a.noise_mean.unwrap_or(0.5 * (a.noise_min + a.noise_max));
    let params = BoundParams {
        candidates: a.candidates,
        signal_max: a.signal_max,
        signal_min: a.signal_min,
        noise_max: a.noise_max,
        noise_min: a.noise_min,
        threshold: a.threshold.unwrap_or(0.5 * (signal_mean + noise_mean)),
        signal_mean,
        noise_mean,
    };
    let b = required_rounds(&params)?;
    println!(
        "rounds {} (signal {:.4} + noise {:.4} = {:.4}) threshold {}",
        b.rounds, b.signal, b.noise, b.real, params.threshold
    );
    if let Some(trials) = a.simulate {
        if a.candidates.fract() != 0.0 {
            bail!("--simulate needs an integer candidate count");
        }
        let model = TwoLevelModel {
            signal: (a.signal_min, a.signal_max),
            noise: (a.noise_min, a.noise_max),
            threshold: params.threshold,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let rate = misidentification_rate(&model, a.candidates as usize, b.rounds.max(1), trials, &mut rng)?;
        println!(
            "misidentification {rate:.6} over {trials} trials (target {:.6})",
            1.0 / a.candidates
        );
    }
    Ok(())
}
