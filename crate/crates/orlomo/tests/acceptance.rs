// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

mod common;

use common::{config, quadratic, rel_dev};
use orlomo::cli::{cmd_run, cmd_sweep, cmd_verify, EXIT_OK, EXIT_VERIFY};
use orlomo::optimizers::msgd_reference;
use orlomo::oracle::{build_aux_sequences, weighted_gradient_metric_until};
use orlomo::problems::ProblemConfig;
use orlomo::simulator::TimingModel;
use orlomo::{
    delay_statistics, run, Algorithm, ProblemSpec, RngStream, RunTrace, Schedule, SimConfig,
    StreamPurpose,
};
use std::path::Path;
use std::time::Instant;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 degeneration beta=0", degeneration_beta_zero),
        ("2 degeneration S=1", degeneration_single_step),
        ("3 sequential MSGD", sequential_msgd),
        ("4 identity suite", identity_suite),
        ("5 delay accounting", delay_accounting),
        ("6 convergence", convergence),
        ("7 heterogeneity", heterogeneity),
        ("8 extreme delay", extreme_delay),
        ("9 determinism", determinism),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.2}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

fn bits_equal(a: &RunTrace, b: &RunTrace) -> bool {
    a.weights.len() == b.weights.len() && a.weights.iter().zip(&b.weights).all(|(x, y)| x.bit_eq(y))
}

/// Everything in the container except the algorithm tag and the momentum
/// fields (`Δu` and `u`), which AL-SGD never populates.
fn without_momentum_channel(trace: &RunTrace) -> String {
    let mut t = trace.clone();
    t.config.algorithm = Algorithm::Orlomo;
    for u in &mut t.momenta {
        *u = orlomo::ParamVector::zeros(u.len());
    }
    for p in &mut t.packets {
        p.delta_u = orlomo::ParamVector::zeros(p.delta_u.len());
    }
    t.to_json()
}

fn degeneration_beta_zero() -> Outcome {
    let start = Instant::now();
    let mut cells = 0;
    for k in [1, 2, 4, 8] {
        for s in [1, 4] {
            let mut cfg = config(Algorithm::Orlomo, k, s, 200);
            cfg.momentum = 0.0;
            let a = run(&cfg)?;
            let b = run(&SimConfig { algorithm: Algorithm::AlSgd, ..cfg.clone() })?;
            if a.metrics_csv() != b.metrics_csv() {
                return Ok((false, format!("metrics CSV differs at K={k} S={s}")));
            }
            if !bits_equal(&a, &b) || without_momentum_channel(&a) != without_momentum_channel(&b) {
                return Ok((false, format!("trace differs at K={k} S={s}")));
            }
            cells += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        secs < 5.0,
        format!("{cells} configurations: CSV byte-identical, containers byte-identical apart from the algorithm tag and momentum fields, in {secs:.2}s, limit 5s"),
    ))
}

fn degeneration_single_step() -> Outcome {
    let mut worst = 0.0_f64;
    for beta in [0.5, 0.9] {
        for k in [2, 4] {
            let mut cfg = config(Algorithm::Orlomo, k, 1, 200);
            cfg.momentum = beta;
            let a = run(&cfg)?;
            let b = run(&SimConfig { algorithm: Algorithm::LocalOrmoDa, ..cfg.clone() })?;
            if a.iterations != b.iterations {
                return Ok((false, format!("arrival order differs at beta={beta} K={k}")));
            }
            for (x, y) in a.weights.iter().zip(&b.weights) {
                worst = worst.max(rel_dev(x.as_slice(), y.as_slice()));
            }
        }
    }
    Ok((worst <= 1e-12, format!("max relative deviation {worst:.3e}, tolerance 1e-12")))
}

fn sequential_msgd() -> Outcome {
    let mut cfg = config(Algorithm::Orlomo, 1, 1, 500);
    cfg.schedule = Schedule::Constant { eta: 1.0 };
    let trace = run(&cfg)?;
    let problem = ProblemSpec::build(&cfg.problem, cfg.seed)?;
    let mut rng = RngStream::new(cfg.seed, 0, StreamPurpose::Gradient);
    let reference = msgd_reference(&cfg.hyper_params()?, &problem, &problem.initial_point, &mut rng, 500)?;
    let mismatch = trace.weights.iter().zip(&reference).position(|(a, b)| !a.bit_eq(b));
    Ok(match mismatch {
        None if trace.weights.len() == 501 => (true, "501 iterates bit-identical to the reference".into()),
        None => (false, format!("trace has {} iterates", trace.weights.len())),
        Some(t) => (false, format!("iterate {t} differs")),
    })
}

fn grid() -> Vec<SimConfig> {
    let mut out = Vec::new();
    let mut seed = 100;
    for beta in [0.0, 0.5, 0.9, 0.99] {
        for k in [1, 3, 4, 8] {
            for s in [1, 2, 8] {
                for schedule in [Schedule::DelayPenalized, Schedule::Constant { eta: 1.0 / k as f64 }] {
                    let mut cfg = config(Algorithm::Orlomo, k, s, 300);
                    cfg.momentum = beta;
                    cfg.schedule = schedule;
                    cfg.problem = quadratic(8, 0.1);
                    cfg.diagnostics_every = None;
                    cfg.seed = seed;
                    seed += 1;
                    out.push(cfg);
                }
            }
        }
    }
    out
}

fn identity_suite() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir()?;
    let cells = grid();
    let mut sink = Vec::new();
    for (i, cfg) in cells.iter().enumerate() {
        let path = dir.path().join(format!("cell{i}.json"));
        std::fs::write(&path, cfg.to_json_pretty())?;
        sink.clear();
        let code = cmd_verify(&path, None, None, &mut sink)?;
        if code != EXIT_OK {
            let report = String::from_utf8_lossy(&sink);
            let failed: Vec<&str> = report.lines().filter(|l| l.starts_with("FAIL")).collect();
            return Ok((false, format!("beta={} K={} S={}: {failed:?}", cfg.momentum, cfg.workers, cfg.local_steps)));
        }

        let mut trace = run(cfg)?;
        trace.packets[0].delta_u.scale(1.0 + 1e-3);
        let tampered = dir.path().join(format!("cell{i}.trace.json"));
        trace.write_json(&tampered)?;
        sink.clear();
        if cmd_verify(&tampered, None, None, &mut sink)? != EXIT_VERIFY {
            return Ok((
                false,
                format!("mutation undetected at beta={} K={} S={}", cfg.momentum, cfg.workers, cfg.local_steps),
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        secs < 60.0,
        format!("{} configurations verified, every single-packet mutation rejected, {secs:.1}s of 60s", cells.len()),
    ))
}

fn delay_accounting() -> Outcome {
    let mut checked = 0;
    let mut min_eta_margin = f64::INFINITY;
    for cfg in grid() {
        let trace = run(&cfg)?;
        let k = cfg.workers;
        let t_total = trace.len();
        let tau_sum: usize = trace.iterations.iter().map(|r| r.tau).sum();
        if tau_sum > (k - 1) * t_total {
            return Ok((false, format!("sum of delays {tau_sum} > (K-1)T = {}", (k - 1) * t_total)));
        }
        let stats = delay_statistics(&trace);
        if stats.delay_sum as usize != tau_sum || !stats.staleness_identity_holds() {
            return Ok((false, format!("delay statistics inconsistent at K={k}")));
        }
        if cfg.schedule == Schedule::DelayPenalized {
            // Each τ ≤ 2K iteration contributes exactly 1/K, so 2·#{τ ≤ 2K} ≥ T
            // certifies Σ η ≥ T/(2K) without rounding.
            let fresh = trace.iterations.iter().filter(|r| r.tau <= 2 * k).count();
            if 2 * fresh < t_total || !stats.eta_sum_holds() {
                return Ok((false, format!("only {fresh} of {t_total} delays within 2K at K={k}")));
            }
            let eta_sum: f64 = trace.iterations.iter().map(|r| r.eta).sum();
            min_eta_margin = min_eta_margin.min(eta_sum / (t_total as f64 / (2 * k) as f64));
        }
        checked += 1;
    }
    Ok((
        true,
        format!("{checked} traces, smallest sum(eta)/(T/2K) = {min_eta_margin:.3}"),
    ))
}

fn convergence_config() -> SimConfig {
    // 16·L·S·γ = (1 − β)² with L = 10, S = 8, β = 0.9.
    SimConfig {
        algorithm: Algorithm::Orlomo,
        workers: 8,
        local_steps: 8,
        iterations: None,
        gradient_budget: Some(64_000),
        momentum: 0.9,
        local_lr: 7.8125e-6,
        schedule: Schedule::DelayPenalized,
        seed: 2024,
        timing: TimingModel::uniform_jitter(1.0, 0.5),
        problem: ProblemConfig::NoisyQuadratic {
            dimension: 32,
            noise: 0.1,
            spectrum_min: 5.0,
            spectrum_max: 10.0,
            optimum_scale: 1.0,
        },
        diagnostics_every: Some(1),
        output: None,
    }
}

fn convergence() -> Outcome {
    let start = Instant::now();
    let cfg = convergence_config();
    let hp = cfg.hyper_params()?;
    assert!(16.0 * 10.0 * hp.local_steps as f64 * hp.local_lr <= (1.0 - hp.momentum).powi(2) + 1e-15);
    let trace = run(&cfg)?;
    let gap = trace.final_loss - trace.f_star;
    let aux = build_aux_sequences(&trace)?;
    let t_total = trace.len();
    let late = weighted_gradient_metric_until(&trace, &aux, t_total)?;
    let early = weighted_gradient_metric_until(&trace, &aux, t_total / 10)?;
    let ratio = late / early;

    // The metric is a weighted running mean, so its value at T is at least
    // W(T/10)/W(T) times its value at T/10. The weight of iterate t is the
    // learning rate its packet(s) eventually received.
    let weight_below = |h: usize| -> f64 {
        trace
            .iterations
            .iter()
            .filter(|r| r.origin < h.min(aux.checkable))
            .map(|r| r.eta)
            .sum()
    };
    let floor = weight_below(t_total / 10) / weight_below(t_total);
    let secs = start.elapsed().as_secs_f64();
    let pass = gap <= 1e-2 && ratio <= 0.1 && secs < 30.0;
    Ok((
        pass,
        format!(
            "T={t_total}, F(w_T)-F* = {gap:.3e} (limit 1e-2), metric(T)/metric(T/10) = {ratio:.4} (limit 0.1, \
             weighted-mean floor W(T/10)/W(T) = {floor:.4})"
        ),
    ))
}

fn timing_config(algorithm: Algorithm, timing: TimingModel) -> SimConfig {
    SimConfig {
        algorithm,
        workers: 8,
        local_steps: 8,
        iterations: None,
        gradient_budget: Some(8 * 8 * 100),
        momentum: 0.9,
        local_lr: 5e-4,
        schedule: Schedule::DelayPenalized,
        seed: 7,
        timing,
        problem: quadratic(16, 0.1),
        diagnostics_every: None,
        output: None,
    }
}

fn heterogeneity() -> Outcome {
    let slow = TimingModel::heterogeneous_fraction(1.0, 0.05, 0.25, 2.0);
    let sync = run(&timing_config(Algorithm::Prsgdm, slow.clone()))?;
    let asynchronous = run(&timing_config(Algorithm::Orlomo, slow))?;
    if sync.gradient_samples != asynchronous.gradient_samples {
        return Ok((false, "gradient budgets differ".into()));
    }
    let hetero = sync.wall_clock() / asynchronous.wall_clock();

    let flat = TimingModel::constant(1.0);
    let sync = run(&timing_config(Algorithm::Prsgdm, flat.clone()))?;
    let asynchronous = run(&timing_config(Algorithm::Orlomo, flat))?;
    let homo = sync.wall_clock() / asynchronous.wall_clock();
    Ok((
        hetero >= 1.5 && homo >= 1.0,
        format!("PRSGDm/OrLoMo wall-clock {hetero:.3} with 25% slow workers (limit 1.5), {homo:.3} homogeneous (limit 1.0)"),
    ))
}

fn extreme_delay() -> Outcome {
    let mut delays = Vec::new();
    let mut losses = Vec::new();
    for ratio in [1.0, 2.0, 5.0, 10.0, 50.0] {
        let cfg = SimConfig {
            algorithm: Algorithm::Orlomo,
            workers: 16,
            local_steps: 8,
            iterations: None,
            gradient_budget: Some(16 * 8 * 200),
            momentum: 0.9,
            local_lr: 5e-4,
            schedule: Schedule::DelayPenalized,
            seed: 16,
            timing: TimingModel::heterogeneous(1.0, 0.0, vec![15], ratio),
            problem: quadratic(16, 0.1),
            diagnostics_every: None,
            output: None,
        };
        let trace = run(&cfg)?;
        delays.push(trace.max_delay());
        losses.push(trace.final_loss - trace.f_star);
    }
    let monotone = delays.windows(2).all(|w| w[0] <= w[1]);
    let bounded = losses[4] <= 2.0 * losses[0];
    Ok((
        monotone && bounded,
        format!("max delays {delays:?}, final gap {:.3e} at ratio 50 vs {:.3e} at ratio 1", losses[4], losses[0]),
    ))
}

fn read(path: &Path) -> std::io::Result<Vec<u8>> {
    std::fs::read(path)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir()?;
    let d = dir.path();
    let mut cfg = config(Algorithm::Orlomo, 4, 4, 300);
    cfg.timing = TimingModel::heterogeneous(1.0, 0.5, vec![3], 3.0);
    std::fs::write(d.join("run.json"), cfg.to_json_pretty())?;
    let mut sink = Vec::new();
    for i in 0..2 {
        cmd_run(
            &d.join("run.json"),
            Some(&d.join(format!("trace{i}.bin"))),
            Some(&d.join(format!("metrics{i}.csv"))),
            None,
            &mut sink,
        )?;
    }
    if read(&d.join("trace0.bin"))? != read(&d.join("trace1.bin"))?
        || read(&d.join("metrics0.csv"))? != read(&d.join("metrics1.csv"))?
    {
        return Ok((false, "repeated run wrote different files".into()));
    }

    let mut base: serde_json::Value = serde_json::from_str(&cfg.to_json_pretty())?;
    base["diagnostics_every"] = serde_json::json!(5);
    let sweep = serde_json::json!({
        "base": base,
        "algorithms": ["orlomo", "al-sgd"],
        "local_steps": [2, 4],
    });
    std::fs::write(d.join("sweep.json"), sweep.to_string())?;
    if cmd_sweep(&d.join("sweep.json"), &d.join("out"), None, &mut sink)? != EXIT_OK {
        return Ok((false, "sweep failed".into()));
    }
    let mut cells = 0;
    for entry in std::fs::read_dir(d.join("out"))? {
        let cell = entry?.path();
        if !cell.is_dir() {
            continue;
        }
        let standalone = d.join(format!("standalone{cells}.csv"));
        cmd_run(&cell.join("config.json"), None, Some(&standalone), None, &mut sink)?;
        if read(&standalone)? != read(&cell.join("metrics.csv"))? {
            return Ok((false, format!("cell {} differs from its standalone run", cell.display())));
        }
        cells += 1;
    }
    Ok((
        cells == 4,
        format!("repeated run byte-identical, {cells} sweep cells reproduced standalone"),
    ))
}
