//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use v2g_ca_core::cli::{cmd_sweep, CliConfig, ScenarioArgs};
use v2g_ca_core::metrics::compare_results;
use v2g_ca_core::*;

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn reference_target() -> TargetProfile {
    triangular_target(
        REF_N as f64 * REF_DENSITY,
        REF_FRACTION,
        REF_DIP.0,
        REF_DIP.1,
        REF_T,
    )
    .unwrap()
}

fn random_config(rng: &mut ChaCha8Rng) -> ControlConfig {
    ControlConfig {
        mode: if rng.random_bool(0.5) {
            ControlMode::Price
        } else {
            ControlMode::Direct
        },
        v2g_enabled: rng.random_bool(0.5),
        require_prior_charge: rng.random_bool(0.3),
        max_discharges_per_particle: if rng.random_bool(0.3) {
            Some(rng.random_range(1..3))
        } else {
            None
        },
        seed: rng.random(),
    }
}

/// Steps `1..T-1` where the sweep stopped early but the load is still above
/// the target.
fn tracking_violations(r: &SimResult) -> usize {
    let n = r.initial_population.len();
    (1..r.horizon())
        .filter(|&k| r.calls_series[k - 1] < n && r.p_series[k - 1] as f64 > r.target.at(k))
        .count()
}

fn criterion_conservation(rng: &mut ChaCha8Rng, runs: &mut Vec<SimResult>) -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    for case in 0..100 {
        let n = rng.random_range(1..=10);
        let t = rng.random_range(2..=10);
        let density = rng.random::<f64>();
        let pop = Population::generate(n, density, t, rng.random()).unwrap();
        let goals: Vec<f64> = (0..t).map(|_| rng.random_range(-2.0..n as f64 + 1.0)).collect();
        let target = TargetProfile::new(goals, 0.0).unwrap();
        let cfg = random_config(rng);

        let totals: Vec<i64> = pop.particles().iter().map(|p| p.total_demand()).collect();
        let mut state = pop.clone();
        for k in 1..t {
            step(&mut state, &target, k, &cfg).unwrap();
            if state.aggregate() != state.recompute_aggregate().as_slice() {
                failures.push(format!("case {case}: cache drift at k={k}"));
            }
        }
        let r = run(&pop, &target, &cfg).unwrap();
        let after: Vec<i64> = r.final_population.particles().iter().map(|p| p.total_demand()).collect();
        if after != totals {
            failures.push(format!("case {case}: particle totals changed"));
        }
        if r.final_population != state {
            failures.push(format!("case {case}: run and stepwise results differ"));
        }
        runs.push(r);
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(1);
    Verdict {
        id: 1,
        name: "conservation and cache coherence",
        pass,
        detail: format!("100 populations, {} failures, {elapsed:.2?} (limit 1s) {}", failures.len(), failures.first().cloned().unwrap_or_default()),
    }
}

fn criterion_oracle(rng: &mut ChaCha8Rng) -> Verdict {
    let start = Instant::now();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let t = rng.random_range(2..=4);
        let bits: u32 = rng.random_range(0..(1u32 << (n * t)));
        let d: Vec<Vec<i8>> = (0..n)
            .map(|i| (0..t).map(|j| ((bits >> (i * t + j)) & 1) as i8).collect())
            .collect();
        let bids: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let goal = rng.random_range(-2.0..n as f64 + 0.5);
        let k = rng.random_range(1..t);
        let cfg = random_config(rng);

        let mut pop = Population::from_schedules(d.clone(), bids.clone()).unwrap();
        let target = TargetProfile::new(vec![goal; t], goal).unwrap();
        let report = step(&mut pop, &target, k, &cfg).unwrap();

        let mut oracle = OracleState { d, bids, discharges: vec![0; n] };
        let expected = oracle_step(&mut oracle, goal, k, &cfg);

        let post: Vec<Vec<i8>> = pop.particles().iter().map(|p| p.demand().to_vec()).collect();
        let actions: Vec<_> = report.actions.iter().map(|&a| <(usize, usize, ActionKind)>::from(a)).collect();
        let aggregate_ok = pop.aggregate() == pop.recompute_aggregate().as_slice();
        if post != oracle.d || actions != expected.actions || report.calls != expected.calls || !aggregate_ok {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    Verdict {
        id: 2,
        name: "oracle equivalence of step()",
        pass: mismatches == 0 && elapsed < Duration::from_secs(10),
        detail: format!("1000 sampled instances, {mismatches} mismatches, {elapsed:.2?} (limit 10s)"),
    }
}

struct Reference {
    pairs: Vec<(SimResult, SimResult)>,
    comparisons: Vec<Comparison>,
    elapsed: Duration,
}

fn reference_runs() -> Reference {
    let start = Instant::now();
    let target = reference_target();
    let cfg = ControlConfig::default();
    let mut pairs = Vec::new();
    let mut comparisons = Vec::new();
    for seed in REF_SEEDS {
        let pop = Population::generate(REF_N, REF_DENSITY, REF_T, seed).unwrap();
        let (a, b) = compare_modes(&pop, &target, &ControlConfig { seed, ..cfg.clone() }).unwrap();
        comparisons.push(compare_results(&a, &b));
        pairs.push((a, b));
    }
    Reference {
        pairs,
        comparisons,
        elapsed: start.elapsed(),
    }
}

fn criterion_discharge_ratio(r: &Reference) -> Verdict {
    let ratios: Vec<f64> = r.comparisons.iter().map(|c| c.v2g.discharge_ratio).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let all_discharge = r.comparisons.iter().all(|c| c.v2g.total_discharges > 0);
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    Verdict {
        id: 3,
        name: "discharges rare relative to shifts",
        pass: mean <= 0.1 && all_discharge && r.elapsed < Duration::from_secs(30),
        detail: format!(
            "mean Σw/Σv = {mean:.4} (max {max:.4}, limit 0.1), Σw > 0 on all seeds: {all_discharge}, 20 seeds in {:.2?} (limit 30s)",
            r.elapsed
        ),
    }
}

fn criterion_hysteresis(r: &Reference) -> Verdict {
    let wins = r
        .comparisons
        .iter()
        .filter(|c| c.v1g.loop_area >= 3.0 * c.v2g.loop_area)
        .count();
    let min_ratio = r
        .comparisons
        .iter()
        .map(|c| c.v1g.loop_area / c.v2g.loop_area.max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    Verdict {
        id: 4,
        name: "V1G-only loop area >= 3x V2G loop area",
        pass: wins >= 16,
        detail: format!("{wins}/20 seeds (need 16), smallest area ratio {min_ratio:.1}"),
    }
}

fn criterion_calls_at_level(r: &Reference) -> Verdict {
    let levels: Vec<(f64, f64)> = r
        .comparisons
        .iter()
        .filter_map(|c| Some((c.v1g_calls_at_level?, c.v2g_calls_at_level?)))
        .collect();
    let complete = levels.len() == r.comparisons.len();
    let n = levels.len().max(1) as f64;
    let mean_v1g = levels.iter().map(|l| l.0).sum::<f64>() / n;
    let mean_v2g = levels.iter().map(|l| l.1).sum::<f64>() / n;
    let wins = levels.iter().filter(|l| l.0 > l.1).count();
    let mean_level = r.comparisons.iter().map(|c| c.response_level).sum::<f64>() / r.comparisons.len() as f64;
    Verdict {
        id: 5,
        name: "calls at half-peak responses: V1G-only needs more",
        pass: complete && mean_v1g >= 1.2 * mean_v2g && wins >= 18,
        detail: format!(
            "level ≈ {mean_level:.0} responses; mean calls V1G {mean_v1g:.0} vs V2G {mean_v2g:.0} (gap {:.1}%, need 20%), V1G higher on {wins}/20 (need 18)",
            100.0 * (mean_v1g / mean_v2g - 1.0)
        ),
    }
}

fn criterion_wavefront(r: &Reference) -> Verdict {
    let wins = r
        .comparisons
        .iter()
        .filter(|c| c.wavefront_concentration > c.wavefront_baseline_p95)
        .count();
    let mean_c = r.comparisons.iter().map(|c| c.wavefront_concentration).sum::<f64>() / 20.0;
    let mean_b = r.comparisons.iter().map(|c| c.wavefront_baseline_p95).sum::<f64>() / 20.0;
    Verdict {
        id: 6,
        name: "discharges concentrate at the shift wave front",
        pass: wins >= 16,
        detail: format!("{wins}/20 seeds above baseline p95 (need 16); mean concentration {mean_c:.3} vs baseline p95 {mean_b:.3}"),
    }
}

fn criterion_tracking(r: &Reference, small: &[SimResult]) -> Verdict {
    let all = r.pairs.iter().flat_map(|(a, b)| [a, b]).chain(small.iter());
    let mut runs = 0;
    let mut violations = 0;
    for result in all {
        runs += 1;
        violations += tracking_violations(result);
    }
    Verdict {
        id: 7,
        name: "early stop implies p(k) <= p*(k)",
        pass: violations == 0,
        detail: format!("{runs} runs checked, {violations} violations"),
    }
}

fn compare_outputs(out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_v2g-ca"))
        .args(["compare", "--seed", "3", "--out-dir"])
        .arg(out)
        .env_remove("V2G_CA_OUT_DIR")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_determinism() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    if !compare_outputs(a.path()) || !compare_outputs(b.path()) {
        return Verdict {
            id: 8,
            name: "compare output is byte-identical across invocations",
            pass: false,
            detail: "compare invocation failed".into(),
        };
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let differing: Vec<_> = names
        .iter()
        .filter(|n| std::fs::read(a.path().join(n)).ok() != std::fs::read(b.path().join(n)).ok())
        .collect();
    let kinds = ["csv", "json", "svg"]
        .iter()
        .all(|ext| names.iter().any(|n| n.to_string_lossy().ends_with(ext)));
    Verdict {
        id: 8,
        name: "compare output is byte-identical across invocations",
        pass: differing.is_empty() && kinds,
        detail: format!("{} files compared (csv, json, svg present: {kinds}), {} differ", names.len(), differing.len()),
    }
}

fn criterion_performance() -> Verdict {
    let pop = Population::generate(REF_N, REF_DENSITY, REF_T, 1).unwrap();
    let target = reference_target();
    let cfg = ControlConfig {
        v2g_enabled: true,
        ..Default::default()
    };
    let start = Instant::now();
    run(&pop, &target, &cfg).unwrap();
    let single = start.elapsed();

    let out = tempfile::tempdir().unwrap();
    let mut cli = CliConfig::resolve(&ScenarioArgs::default(), Some(20)).unwrap();
    cli.out_dir = out.path().to_path_buf();
    let start = Instant::now();
    let swept = cmd_sweep(&cli).map(|s| s.seeds.len()).unwrap_or(0);
    let sweep = start.elapsed();
    Verdict {
        id: 9,
        name: "performance",
        pass: single < Duration::from_secs(1) && swept == 20 && sweep < Duration::from_secs(30),
        detail: format!("single run {single:.2?} (limit 1s); 20-seed sweep with all outputs {sweep:.2?} (limit 30s)"),
    }
}

fn main() -> ExitCode {
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_edca);
    let mut small_runs = Vec::new();
    let mut verdicts = vec![
        criterion_conservation(&mut rng, &mut small_runs),
        criterion_oracle(&mut rng),
    ];
    let reference = reference_runs();
    verdicts.push(criterion_discharge_ratio(&reference));
    verdicts.push(criterion_hysteresis(&reference));
    verdicts.push(criterion_calls_at_level(&reference));
    verdicts.push(criterion_wavefront(&reference));
    verdicts.push(criterion_tracking(&reference, &small_runs));
    verdicts.push(criterion_determinism());
    verdicts.push(criterion_performance());

    for v in &verdicts {
        println!(
            "[{}] criterion {}: {} -- {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.id,
            v.name,
            v.detail
        );
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("acceptance: {}/{} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
