//! Parameter exploration harness. Not part of the library surface; run as
//!
//! ```text
//! cargo run --release -p lcsb --example tune -- <mode> [args]
//! ```

use lcsb::bench::{derive_seed, run_single, RunSpec};
use lcsb::decoder::{EcParams, EcStage};
use lcsb::estimator::EstimatorParams;
use lcsb::model::FrequencyGrid;

fn base_spec(n: usize, m: usize, k: f64, t: usize, run: u64, est: EstimatorParams) -> RunSpec {
    let omega0 = std::env::var("TUNE_OMEGA0").ok().and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let grid = FrequencyGrid::uniform_imaginary(n, omega0, 5e-4, m).unwrap();
    RunSpec {
        grid,
        sparsity_factor: k,
        num_samples: t,
        noise_std: 0.0,
        real_amplitudes: false,
        offgrid: vec![],
        estimator: est,
        flip_prob: 0.0,
        ec: EcParams::disabled(),
        signal_seed: derive_seed(99, &[0, run]),
        channel_seed: derive_seed(99, &[1, run]),
    }
}

fn apply_env(est: &mut EstimatorParams) {
    if let Ok(v) = std::env::var("TUNE_DCAP") {
        est.delta_cap = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("TUNE_SCAP") {
        est.sigma_cap = v.parse().unwrap();
    }
    if let Ok(v) = std::env::var("TUNE_S0") {
        est.sigma0 = v.parse().unwrap();
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sweep_estimator(n: usize, m: usize, k: f64, t: usize, runs: u64) {
    println!("n={n} m={m} k={k} t={t} runs={runs}");
    println!("{:>8} {:>8} {:>8} {:>8} {:>6} {:>10} {:>8}", "l1", "l2", "d0", "s0", "prop", "mean_db", "worst");
    let lambda1s: Vec<f64> = std::env::var("TUNE_L1").map(|v| v.split(',').map(|x| x.parse().unwrap()).collect()).unwrap_or(vec![16.0, 32.0, 64.0]);
    let delta0s: Vec<f64> = std::env::var("TUNE_D0").map(|v| v.split(',').map(|x| x.parse().unwrap()).collect()).unwrap_or(vec![0.5, 1.0, 2.0]);
    let ratios: Vec<f64> = std::env::var("TUNE_R").map(|v| v.split(',').map(|x| x.parse().unwrap()).collect()).unwrap_or(vec![0.03, 0.1, 0.4]);
    for &l1 in &lambda1s {
        for &ratio in &ratios {
            let l2 = ratio * l1;
            for &d0 in &delta0s {
                for prop in [false, true] {
                    let mut est = EstimatorParams::default();
                    est.lambda1 = l1;
                    est.lambda2 = l2;
                    est.delta0 = d0;
                    est.propagate_first = prop;
                    apply_env(&mut est);
                    let mut finals = vec![];
                    for run in 0..runs {
                        let spec = base_spec(n, m, k, t, run, est);
                        match run_single(&spec) {
                            Ok(out) => finals.push(out.final_mse_db),
                            Err(e) => {
                                finals.push(f64::INFINITY);
                                eprintln!("run failed: {e}");
                            }
                        }
                    }
                    let worst = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    println!(
                        "{:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>6} {:>10.2} {:>8.2}",
                        l1, l2, d0, est.sigma0, prop, mean(&finals), worst
                    );
                }
            }
        }
    }
}

fn single(n: usize, m: usize, k: f64, t: usize, l1: f64, l2: f64, d0: f64, prop: bool, runs: u64) {
    let mut est = EstimatorParams::default();
    est.lambda1 = l1;
    est.lambda2 = l2;
    est.delta0 = d0;
    est.propagate_first = prop;
    apply_env(&mut est);
    let mut finals = vec![];
    for run in 0..runs {
        let spec = base_spec(n, m, k, t, run, est);
        let out = run_single(&spec).unwrap();
        // print trace milestones
        let tr = &out.mse_trace;
        let probe: Vec<String> = [t / 10, t / 4, t / 2, 3 * t / 4, t - 1]
            .iter()
            .map(|&i| format!("{:7.2}", tr[i.min(tr.len() - 1)]))
            .collect();
        println!(
            "run {run} (seed {}): final {:8.2} dB  trace {}",
            spec.signal_seed, out.final_mse_db, probe.join(" ")
        );
        finals.push(out.final_mse_db);
    }
    println!("mean {:.2} dB", mean(&finals));
}

fn sweep_ec(n: usize, m: usize, k: f64, t: usize, p: f64, l1: f64, l2: f64, d0: f64, runs: u64) {
    let mut est = EstimatorParams::default();
    est.lambda1 = l1;
    est.lambda2 = l2;
    est.delta0 = d0;
    apply_env(&mut est);
    println!("{:>8} {:>8} {:>6} {:>6} {:>10} {:>10} {:>6}", "theta", "eps", "stage", "steps", "mean_db", "noec_db", "div");
    let mut noec = vec![];
    for run in 0..runs {
        let mut spec = base_spec(n, m, k, t, run, est);
        spec.flip_prob = p;
        noec.push(run_single(&spec).unwrap().final_mse_db);
    }
    let noec_mean = mean(&noec);
    for &theta in &[0.5, 1.0, 2.0, 4.0, 6.0, 7.5] {
        for &eps in &[0.05, 0.1, 0.2, 0.5] {
            for stage in [EcStage::Post, EcStage::Pre] {
                let mut finals = vec![];
                let mut div = 0;
                for run in 0..runs {
                    let mut spec = base_spec(n, m, k, t, run, est);
                    spec.flip_prob = p;
                    spec.ec = EcParams {
                        theta,
                        epsilon: eps,
                        seed: derive_seed(99, &[2, run]),
                        enabled: true,
                        steps_per_sample: 1,
                        stage,
                    };
                    let out = run_single(&spec).unwrap();
                    if out.diverged {
                        div += 1;
                    }
                    finals.push(out.final_mse_db);
                }
                println!(
                    "{:>8.2} {:>8.2} {:>6} {:>6} {:>10.2} {:>10.2} {:>6}",
                    theta,
                    eps,
                    if stage == EcStage::Post { "post" } else { "pre" },
                    1,
                    mean(&finals),
                    noec_mean,
                    div
                );
            }
        }
    }
}

fn diag(n: usize, m: usize, k: f64, t: usize, l1: f64, l2: f64, d0: f64, prop: bool) {
    use lcsb::estimator::Estimator;
    use lcsb::model::{csgn, predict_state, Sign};
    use lcsb::siggen::{generate, SignalSpec};

    let omega0 = std::env::var("TUNE_OMEGA0").ok().and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let grid = FrequencyGrid::uniform_imaginary(n, omega0, 5e-4, m).unwrap();
    let mut est_params = EstimatorParams::default();
    est_params.lambda1 = l1;
    est_params.lambda2 = l2;
    est_params.delta0 = d0;
    est_params.propagate_first = prop;
    apply_env(&mut est_params);
    let seed: u64 = std::env::var("TUNE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(42);
    let sig = generate(&SignalSpec::new(grid.clone(), k, t, seed)).unwrap();
    let mut est = Estimator::new(&grid, est_params).unwrap();
    let mut level = lcsb::C64::new(0.0, 0.0);
    println!(
        "{:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>7} {:>7} {:>9} {:>9} {:>9}",
        "m", "|x|", "|l|", "|x-l|", "||S||", "mse_db", "active", "cons", "delta", "err_on", "err_off"
    );
    for mm in 0..t {
        let x = sig.samples[mm];
        let sign = csgn(x - level).unwrap();
        est.push_measurement(sign, level);
        let corrected: Vec<lcsb::C64> = est.window().signs().iter().map(|s| s.value()).collect();
        est.update(&corrected).unwrap();
        level = est.predict_next_level();

        if mm % (t / 40).max(1) == 0 || mm == t - 1 {
            let truth = &sig.true_states[mm];
            let err: f64 = est
                .state()
                .amps
                .iter()
                .zip(truth)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            let tn: f64 = truth.iter().map(|a| a.norm_sqr()).sum();
            let mse = 10.0 * (err / tn).log10();
            let active = est.state().amps.iter().filter(|a| a.norm() > 0.0).count();
            // post-update window sign consistency
            let w = est.window().len();
            let fitted = est.phi().apply_truncated(&est.state().amps, w);
            let levels = est.window().levels();
            let signs = est.window().signs();
            let mut cons = 0usize;
            for kk in 0..w {
                let u = fitted[kk] - levels[kk];
                if Sign::of(u.re) == signs[kk].re {
                    cons += 1;
                }
                if Sign::of(u.im) == signs[kk].im {
                    cons += 1;
                }
            }
            let snorm = est.state().norm_sq().sqrt();
            // error on/off the true support
            let mut err_on = 0.0f64;
            let mut err_off = 0.0f64;
            for (i, (a, b)) in est.state().amps.iter().zip(truth).enumerate() {
                let _ = i;
                if b.norm() > 0.0 {
                    err_on += (a - b).norm_sqr();
                } else {
                    err_off += (a - b).norm_sqr();
                }
            }
            println!(
                "{:>6} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.2} {:>7} {:>7.3} {:>9.1} {:>9.4} {:>9.4}",
                mm,
                x.norm(),
                level.norm(),
                (x - level).norm(),
                snorm,
                mse,
                active,
                cons as f64 / (2 * w) as f64,
                est.delta(),
                err_on.sqrt(),
                err_off.sqrt(),
            );
            let _ = predict_state(est.state(), est.predictor());
        }
    }
    // final support comparison
    let truth = &sig.true_states[t - 1];
    println!("bin  truth                est");
    for i in 0..n {
        let tv = truth[i];
        let ev = est.state().amps[i];
        if tv.norm() > 1e-12 || ev.norm() > 0.05 {
            println!(
                "{:>3}  ({:>7.3},{:>7.3})   ({:>7.3},{:>7.3})",
                i, tv.re, tv.im, ev.re, ev.im
            );
        }
    }
}

fn search(n: usize, m: usize, k: f64, t: usize, omega0: f64, configs: usize) {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rayon::prelude::*;

    let mut rng = ChaCha8Rng::seed_from_u64(7771);
    let mut cands: Vec<EstimatorParams> = Vec::new();
    for _ in 0..configs {
        let mut e = EstimatorParams::default();
        let lg = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo * (hi / lo).powf(rng.random::<f64>());
        let ranges: Vec<f64> = std::env::var("TUNE_RANGES")
            .map(|v| v.split(',').map(|x| x.parse().unwrap()).collect())
            .unwrap_or(vec![5.0, 30000.0, 0.003, 0.4, 0.02, 10.0, 2.0, 1000.0, 1.2, 100.0]);
        e.lambda1 = lg(&mut rng, ranges[0], ranges[1]);
        e.lambda2 = e.lambda1 * lg(&mut rng, ranges[2], ranges[3]);
        e.delta0 = lg(&mut rng, ranges[4], ranges[5]);
        e.delta_cap = e.delta0.max(lg(&mut rng, ranges[6], ranges[7]));
        e.sigma_cap = lg(&mut rng, ranges[8], ranges[9]);
        e.sigma0 = e.sigma_cap.min(1.0);
        cands.push(e);
    }
    let score = |e: &EstimatorParams, seeds: u64| -> f64 {
        (0..seeds)
            .map(|run| {
                let grid = FrequencyGrid::uniform_imaginary(n, omega0, 5e-4, m).unwrap();
                let spec = RunSpec {
                    grid,
                    sparsity_factor: k,
                    num_samples: t,
                    noise_std: 0.0,
                    real_amplitudes: false,
                    offgrid: vec![],
                    estimator: *e,
                    flip_prob: 0.0,
                    ec: EcParams::disabled(),
                    signal_seed: derive_seed(99, &[0, run]),
                    channel_seed: derive_seed(99, &[1, run]),
                };
                match run_single(&spec) {
                    Ok(out) => out.final_mse_db,
                    Err(_) => 60.0,
                }
            })
            .sum::<f64>()
            / seeds as f64
    };
    let mut scored: Vec<(f64, EstimatorParams)> = cands
        .par_iter()
        .map(|e| (score(e, 2), *e))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    println!("top screen (2 seeds):");
    for (s, e) in scored.iter().take(24) {
        println!(
            "{:8.2} dB  l1={:9.1} l2={:9.2} d0={:7.3} dcap={:8.1} s0={:5.2} scap={:7.2}",
            s, e.lambda1, e.lambda2, e.delta0, e.delta_cap, e.sigma0, e.sigma_cap
        );
    }
    println!("rescopre finalists (6 seeds):");
    let mut finals: Vec<(f64, EstimatorParams)> = scored
        .iter()
        .take(16)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(_, e)| (score(e, 6), *e))
        .collect();
    finals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (s, e) in finals.iter().take(10) {
        println!(
            "{:8.2} dB  l1={:9.1} l2={:9.2} d0={:7.3} dcap={:8.1} s0={:5.2} scap={:7.2}",
            s, e.lambda1, e.lambda2, e.delta0, e.delta_cap, e.sigma0, e.sigma_cap
        );
    }
}

fn eccheck(n: usize, m: usize, k: f64, t: usize, omega0: f64, theta: f64, eps: f64, runs: u64) {
    // p = 0 with EC enabled: count spurious flip estimates + post-update
    // consistency violations
    let mut est = EstimatorParams::default();
    apply_env(&mut est);
    let mut total_flagged_samples = 0usize;
    let mut total_flags = 0u64;
    for run in 0..runs {
        let grid = FrequencyGrid::uniform_imaginary(n, omega0, 5e-4, m).unwrap();
        let mut spec = base_spec(n, m, k, t, run, est);
        spec.grid = grid;
        spec.flip_prob = 0.0;
        spec.ec = EcParams {
            theta,
            epsilon: eps,
            seed: derive_seed(99, &[2, run]),
            enabled: true,
            steps_per_sample: 1,
            stage: EcStage::Post,
        };
        let sigspec = {
            use lcsb::siggen::SignalSpec;
            let mut ss = SignalSpec::new(spec.grid.clone(), k, t, spec.signal_seed);
            ss.noise_std = 0.0;
            ss
        };
        let sig = lcsb::siggen::generate(&sigspec).unwrap();
        let enc = lcsb::encoder::encode(&sig, &est).unwrap();
        let dec = lcsb::decoder::decode(&enc.stream, &spec.grid, est, spec.ec).unwrap();
        let mut flagged = 0usize;
        let mut flags = 0u64;
        for c in &dec.flip_counts {
            let tot = c[0] + c[1];
            if tot > 0 {
                flagged += 1;
            }
            flags += tot as u64;
        }
        let err: f64 = dec.states[t - 1]
            .iter()
            .zip(&sig.true_states[t - 1])
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let tn: f64 = sig.true_states[t - 1].iter().map(|a| a.norm_sqr()).sum();
        println!(
            "run {run}: {flagged}/{t} samples flagged, {flags} total flags, final {:.2} dB",
            10.0 * (err / tn).log10()
        );
        total_flagged_samples += flagged;
        total_flags += flags;
    }
    println!("TOTAL: {total_flagged_samples} flagged samples, {total_flags} flags across {runs} runs");
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().map(String::as_str).unwrap_or("help");
    let f = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let u = |i: usize, d: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    match mode {
        // mode n m k t runs
        "sweep-small" => sweep_estimator(20, 10, 0.1, std::env::var("TUNE_T").ok().and_then(|v| v.parse().ok()).unwrap_or(2000), 3),
        "sweep-desk" => sweep_estimator(100, 50, 0.05, 3000, 3),
        "sweep" => sweep_estimator(u(1, 100), u(2, 50), f(3, 0.05), u(4, 3000), u(5, 3) as u64),
        // single n m k t l1 l2 d0 prop runs
        "single" => single(
            u(1, 100),
            u(2, 50),
            f(3, 0.05),
            u(4, 3000),
            f(5, 0.5),
            f(6, 0.05),
            f(7, 1.0),
            args.get(8).map(|s| s == "true").unwrap_or(false),
            u(9, 3) as u64,
        ),
        // ecsearch n m t omega0 configs
        "ecsearch" => ecsearch(u(1, 100), u(2, 50), u(3, 3000), f(4, 50.0), u(5, 80)),
        // eccheck n m k t omega0 theta eps runs
        "eccheck" => eccheck(
            u(1, 100),
            u(2, 50),
            f(3, 0.05),
            u(4, 3000),
            f(5, 50.0),
            f(6, 0.1),
            f(7, 0.2),
            u(8, 5) as u64,
        ),
        // search n m k t omega0 configs
        "search" => search(
            u(1, 100),
            u(2, 50),
            f(3, 0.05),
            u(4, 3000),
            f(5, 50.0),
            u(6, 200),
        ),
        // diag n m k t l1 l2 d0 prop
        "diag" => diag(
            u(1, 20),
            u(2, 10),
            f(3, 0.1),
            u(4, 2000),
            f(5, 0.5),
            f(6, 0.05),
            f(7, 1.0),
            args.get(8).map(|s| s == "true").unwrap_or(false),
        ),
        // ec n m k t p l1 l2 d0 runs
        "ec" => sweep_ec(
            u(1, 100),
            u(2, 50),
            f(3, 0.05),
            u(4, 3000),
            f(5, 0.025),
            f(6, 0.5),
            f(7, 0.05),
            f(8, 1.0),
            u(9, 5) as u64,
        ),
        _ => {
            eprintln!("modes: sweep-small | sweep-desk | sweep n m k t runs | single n m k t l1 l2 d0 prop runs | ec n m k t p l1 l2 d0 runs");
        }
    }
}

// appended: joint estimator+EC search for the flip-fragile/EC-rescuable regime
pub fn ecsearch(n: usize, m: usize, t: usize, omega0: f64, configs: usize) {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(991);
    let lg = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo * (hi / lo).powf(rng.random::<f64>());
    println!(
        "{:>9} {:>7} {:>7} {:>6} {:>6} {:>6} {:>6} | {:>8} {:>8} {:>8} {:>8} {:>5} {:>5}",
        "l1", "l2", "d0", "dcap", "scap", "theta", "eps", "clean", "noec25", "ec25", "gap", "dv-", "dv+"
    );
    let mut rows: Vec<(f64, String)> = vec![];
    for _ in 0..configs {
        let mut e = EstimatorParams::default();
        e.lambda1 = lg(&mut rng, 800.0, 16000.0);
        e.lambda2 = e.lambda1 * lg(&mut rng, 0.001, 0.02);
        e.delta0 = lg(&mut rng, 0.1, 1.0);
        e.delta_cap = e.delta0.max(lg(&mut rng, 1.5, 30.0));
        e.sigma_cap = lg(&mut rng, 2.0, 15.0);
        e.sigma0 = 1.0;
        let theta = lg(&mut rng, 0.5, 8.0);
        let eps = lg(&mut rng, 0.03, 0.6);

        let run_one = |p: f64, ec_on: bool, run: u64, e: &EstimatorParams| -> f64 {
            let grid = FrequencyGrid::uniform_imaginary(n, omega0, 5e-4, m).unwrap();
            let spec = RunSpec {
                grid,
                sparsity_factor: 0.05,
                num_samples: t,
                noise_std: 0.0,
                real_amplitudes: false,
                offgrid: vec![],
                estimator: *e,
                flip_prob: p,
                ec: if ec_on {
                    EcParams {
                        theta,
                        epsilon: eps,
                        seed: derive_seed(5, &[3, run]),
                        enabled: true,
                        steps_per_sample: 1,
                        stage: EcStage::Post,
                    }
                } else {
                    EcParams::disabled()
                },
                signal_seed: derive_seed(5, &[0, run]),
                channel_seed: derive_seed(5, &[1, run]),
            };
            run_single(&spec).map(|o| o.final_mse_db).unwrap_or(99.0)
        };
        let clean: f64 = (0..2).map(|r| run_one(0.0, false, r, &e)).sum::<f64>() / 2.0;
        if clean > -14.0 {
            continue; // noiseless convergence is a hard requirement
        }
        let noec: Vec<f64> = (0..3).map(|r| run_one(0.025, false, r, &e)).collect();
        let ec: Vec<f64> = (0..3).map(|r| run_one(0.025, true, r, &e)).collect();
        let noec_m = noec.iter().sum::<f64>() / 3.0;
        let ec_m = ec.iter().sum::<f64>() / 3.0;
        let dvm = noec.iter().filter(|&&v| v > -5.0).count();
        let dvp = ec.iter().filter(|&&v| v > -5.0).count();
        let gap = noec_m - ec_m;
        let row = format!(
            "{:>9.1} {:>7.2} {:>7.3} {:>6.2} {:>6.2} {:>6.2} {:>6.3} | {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>5} {:>5}",
            e.lambda1, e.lambda2, e.delta0, e.delta_cap, e.sigma_cap, theta, eps,
            clean, noec_m, ec_m, gap, dvm, dvp
        );
        println!("{row}");
        rows.push((gap, row));
    }
    rows.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    println!("--- top by rescue gap:");
    for (_, r) in rows.iter().take(8) {
        println!("{r}");
    }
}
