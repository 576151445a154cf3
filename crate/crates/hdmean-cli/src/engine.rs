//! Experiment engine: resolves configured scenarios into generator specs,
//! runs replicates in a work-stealing pool, and aggregates rejection
//! rates. Every (scenario, replicate) pair draws from its own keyed RNG
//! stream, so summaries are identical for any worker-thread count.

use crate::config::{ExperimentConfig, ModelConfig, ScenarioConfig, ScenarioKind};
use hdmean::io::{format_f64, ObservationMatrix, ResultRecord};
use hdmean::numeric::RngStream;
use hdmean::simgen::{
    build_mixing, catalog_entry, generate, innovation_covariance, sample_mean_scenario,
    shift_rows, two_sample_specs, FactorModelSpec, MeanScenario, MixingVariant,
};
use hdmean::stat::{test_bs, test_one_sample, test_two_sample, TestResult, TwoSampleInput};
use hdmean::{Error, Result};
use ndarray::Array1;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

/// Smallest sample size at which the dependence-adjusted statistic is
/// defined everywhere for lag order `m`: the library requires
/// n ≥ 4(M+1)+2, and n ≥ 6M+3 is the sharp bound for every averaging set
/// B(t, s) to be nonempty.
pub fn min_n_for_t_new(m: usize) -> usize {
    (4 * (m + 1) + 2).max(6 * m + 3)
}

/// A scenario after validation: generator spec(s) built, sample sizes
/// checked against the statistic preconditions.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub label: String,
    /// Position in the config's scenario list; part of the RNG stream key.
    pub ordinal: u64,
    pub kind: ScenarioKind,
    pub spec1: FactorModelSpec,
    pub spec2: Option<FactorModelSpec>,
    pub n1: usize,
    /// Zero for one-sample scenarios.
    pub n2: usize,
    pub specified_m: usize,
    pub mean: MeanScenario,
    pub alpha: f64,
    pub replicates: u64,
    pub run_t_new: bool,
    pub run_t_bs: bool,
}

fn build_one_sample_spec(model: &ModelConfig, n: usize) -> Result<FactorModelSpec> {
    match model {
        ModelConfig::Catalog { name } => catalog_entry(name)?.spec_for(n),
        ModelConfig::Parametric { p, m, m_order, phi1, phi2, w, variant } => {
            let variant = match variant.as_str() {
                "reciprocal" => MixingVariant::ReciprocalH,
                "linear" => MixingVariant::LinearH,
                other => {
                    return Err(Error::config(format!("unknown mixing variant '{other}'")));
                }
            };
            let mixing = build_mixing(*p, *m, *m_order, *phi1, *w, variant)?;
            let band = *p as f64 * *w;
            let (sigma, _) = innovation_covariance(*m, *phi2, band, &vec![1.0; *m])?;
            FactorModelSpec::new(mixing, sigma, Array1::zeros(*p))
        }
        ModelConfig::TwoSampleStudy { .. } => {
            Err(Error::config("two-sample-study model in a one-sample scenario"))
        }
    }
}

fn resolve_scenario(scenario: &ScenarioConfig, index: usize) -> Result<ResolvedScenario> {
    let kind = ScenarioKind::parse(&scenario.kind)?;
    let mean = MeanScenario::parse(&scenario.mean)?;
    let run_t_new = scenario.statistics.iter().any(|s| s == "t-new");
    let run_t_bs = scenario.statistics.iter().any(|s| s == "t-bs");
    let m = scenario.specified_m;

    let check_n = |n: usize, side: &str| -> Result<()> {
        let mut min_n = 2usize;
        if run_t_new {
            min_n = min_n.max(min_n_for_t_new(m));
        }
        if run_t_bs {
            min_n = min_n.max(4);
        }
        if n < min_n {
            return Err(Error::config(format!(
                "scenario {index}: {side} = {n} is below the minimum {min_n} \
                 for specified_m = {m}"
            )));
        }
        Ok(())
    };

    match kind {
        ScenarioKind::OneSample => {
            let n = scenario
                .n
                .ok_or_else(|| Error::config(format!("scenario {index}: missing n")))?;
            check_n(n, "n")?;
            let spec1 = build_one_sample_spec(&scenario.model, n)?;
            Ok(ResolvedScenario {
                label: scenario.label(index),
                ordinal: index as u64,
                kind,
                spec1,
                spec2: None,
                n1: n,
                n2: 0,
                specified_m: m,
                mean,
                alpha: scenario.alpha,
                replicates: scenario.replicates,
                run_t_new,
                run_t_bs,
            })
        }
        ScenarioKind::TwoSample => {
            let n1 = scenario
                .n1
                .ok_or_else(|| Error::config(format!("scenario {index}: missing n1")))?;
            let n2 = scenario
                .n2
                .ok_or_else(|| Error::config(format!("scenario {index}: missing n2")))?;
            if n1 != n2 {
                return Err(Error::config(format!(
                    "scenario {index}: the built-in two-sample study is balanced; \
                     got n1 = {n1}, n2 = {n2}"
                )));
            }
            check_n(n1, "n1")?;
            check_n(n2, "n2")?;
            let m_order = match &scenario.model {
                ModelConfig::TwoSampleStudy { m_order } => *m_order,
                _ => {
                    return Err(Error::config(format!(
                        "scenario {index}: two-sample scenarios use model type \
                         two-sample-study"
                    )));
                }
            };
            let (spec1, spec2) = two_sample_specs(m_order, n1)?;
            Ok(ResolvedScenario {
                label: scenario.label(index),
                ordinal: index as u64,
                kind,
                spec1,
                spec2: Some(spec2),
                n1,
                n2,
                specified_m: m,
                mean,
                alpha: scenario.alpha,
                replicates: scenario.replicates,
                run_t_new,
                run_t_bs,
            })
        }
    }
}

/// Builds generator specs and checks satisfiability for every scenario;
/// fails before any replicate runs.
pub fn resolve_scenarios(config: &ExperimentConfig) -> Result<Vec<ResolvedScenario>> {
    config.validate()?;
    config
        .scenarios
        .iter()
        .enumerate()
        .map(|(index, s)| resolve_scenario(s, index))
        .collect()
}

/// Per-replicate outcome of one statistic.
#[derive(Debug, Clone, Copy)]
enum StatOutcome {
    Done { p_value: f64, reject: bool },
    /// The variance estimate was not positive: excluded from the rate
    /// denominator and counted separately.
    Degenerate,
}

fn to_outcome(result: Result<TestResult>) -> Result<StatOutcome> {
    match result {
        Ok(t) => Ok(StatOutcome::Done { p_value: t.p_value, reject: t.reject }),
        Err(Error::DegenerateVariance { .. }) => Ok(StatOutcome::Degenerate),
        Err(other) => Err(other),
    }
}

#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    t_new: Option<StatOutcome>,
    t_bs: Option<StatOutcome>,
}

fn run_replicate(sc: &ResolvedScenario, seed: u64, rep: u64) -> Result<RepOutcome> {
    let mut stream = RngStream::new(seed, sc.ordinal, rep);
    // Draw order is fixed: mean vector first, then innovations (sample 1
    // before sample 2) — part of the reproducibility contract.
    let mean = sample_mean_scenario(sc.mean, sc.spec1.p(), &mut stream);
    match sc.kind {
        ScenarioKind::OneSample => {
            let x = generate(&sc.spec1, sc.n1, &mut stream)?;
            let x = if sc.mean == MeanScenario::Null { x } else { shift_rows(&x, &mean)? };
            let t_new = if sc.run_t_new {
                Some(to_outcome(test_one_sample(&x, sc.specified_m, sc.alpha))?)
            } else {
                None
            };
            let t_bs = if sc.run_t_bs {
                Some(to_outcome(test_bs(&x, sc.alpha))?)
            } else {
                None
            };
            Ok(RepOutcome { t_new, t_bs })
        }
        ScenarioKind::TwoSample => {
            let spec2 = sc.spec2.as_ref().expect("two-sample scenario has a second spec");
            let x1 = generate(&sc.spec1, sc.n1, &mut stream)?;
            // The mean difference is applied to the first sample.
            let x1 = if sc.mean == MeanScenario::Null { x1 } else { shift_rows(&x1, &mean)? };
            let x2 = generate(spec2, sc.n2, &mut stream)?;
            let input = TwoSampleInput::new(x1, x2, sc.specified_m)?;
            let t_new = Some(to_outcome(test_two_sample(&input, sc.alpha))?);
            Ok(RepOutcome { t_new, t_bs: None })
        }
    }
}

/// Aggregated counts for one (scenario, statistic) pair. The rate and its
/// Monte Carlo standard error derive from the integer counts, so they are
/// bit-identical across runs and thread counts.
#[derive(Debug, Clone, PartialEq)]
pub struct StatSummary {
    pub scenario: String,
    pub statistic: &'static str,
    pub kind: &'static str,
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub specified_m: usize,
    pub alpha: f64,
    pub replicates: u64,
    /// Replicates with a defined statistic (the rate denominator).
    pub completed: u64,
    pub rejections: u64,
    pub degenerate: u64,
    /// Set when the degenerate fraction exceeds 0.1% of the replicates.
    pub flagged: bool,
}

impl StatSummary {
    /// Rejection rate over completed replicates (NaN if none completed).
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.completed as f64
    }

    /// Monte Carlo standard error √(r(1−r)/R) with R the rate denominator.
    pub fn mc_se(&self) -> f64 {
        let r = self.rate();
        (r * (1.0 - r) / self.completed as f64).sqrt()
    }
}

/// Result of a full experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub rows: Vec<StatSummary>,
    /// Per-replicate records, populated when the config requests a
    /// p-value dump (or sets `collect_records`); completed replicates only.
    pub records: Vec<ResultRecord>,
    /// Not part of any output file — timings differ run to run.
    pub wall_time: Duration,
}

struct StatAccumulator {
    statistic: &'static str,
    completed: u64,
    rejections: u64,
    degenerate: u64,
}

impl StatAccumulator {
    fn new(statistic: &'static str) -> Self {
        StatAccumulator { statistic, completed: 0, rejections: 0, degenerate: 0 }
    }

    fn add(
        &mut self,
        outcome: StatOutcome,
        sc: &ResolvedScenario,
        rep: u64,
        records: Option<&mut Vec<ResultRecord>>,
    ) {
        match outcome {
            StatOutcome::Done { p_value, reject } => {
                self.completed += 1;
                self.rejections += u64::from(reject);
                if let Some(records) = records {
                    records.push(ResultRecord {
                        scenario: sc.label.clone(),
                        n: sc.n1,
                        p: sc.spec1.p(),
                        m: sc.specified_m,
                        replicate: rep,
                        statistic: self.statistic.to_string(),
                        p_value,
                        reject,
                    });
                }
            }
            StatOutcome::Degenerate => self.degenerate += 1,
        }
    }

    fn summary(&self, sc: &ResolvedScenario) -> StatSummary {
        StatSummary {
            scenario: sc.label.clone(),
            statistic: self.statistic,
            kind: sc.kind.tag(),
            n1: sc.n1,
            n2: sc.n2,
            p: sc.spec1.p(),
            specified_m: sc.specified_m,
            alpha: sc.alpha,
            replicates: sc.replicates,
            completed: self.completed,
            rejections: self.rejections,
            degenerate: self.degenerate,
            flagged: self.degenerate * 1000 > sc.replicates,
        }
    }
}

/// Runs every scenario of the config. `threads = 0` uses one worker per
/// logical CPU; any positive count gives an identical summary.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<ExperimentSummary> {
    let started = Instant::now();
    let scenarios = resolve_scenarios(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("failed to build thread pool: {e}")))?;
    let keep_records = config.dump_pvalues.is_some() || config.collect_records;

    let mut rows = Vec::new();
    let mut records = Vec::new();
    for sc in &scenarios {
        let reps = usize::try_from(sc.replicates)
            .map_err(|_| Error::config("replicate count exceeds the address space"))?;
        let seed = config.seed;
        // Indexed collect: outcomes land in replicate order regardless of
        // which worker produced them.
        let outcomes: Vec<Result<RepOutcome>> = pool.install(|| {
            use rayon::prelude::*;
            (0..reps)
                .into_par_iter()
                .map(|rep| run_replicate(sc, seed, rep as u64))
                .collect()
        });

        let mut acc_new = StatAccumulator::new("t-new");
        let mut acc_bs = StatAccumulator::new("t-bs");
        for (rep, outcome) in outcomes.into_iter().enumerate() {
            let outcome = outcome?;
            if let Some(o) = outcome.t_new {
                acc_new.add(o, sc, rep as u64, keep_records.then_some(&mut records));
            }
            if let Some(o) = outcome.t_bs {
                acc_bs.add(o, sc, rep as u64, keep_records.then_some(&mut records));
            }
        }
        if sc.run_t_new {
            rows.push(acc_new.summary(sc));
        }
        if sc.run_t_bs {
            rows.push(acc_bs.summary(sc));
        }
    }
    Ok(ExperimentSummary { rows, records, wall_time: started.elapsed() })
}

pub const SUMMARY_HEADER: &str = "scenario,statistic,kind,n1,n2,p,specified_m,alpha,\
replicates,completed,rejections,rate,mc_se,degenerate,flagged";

/// Deterministic summary CSV: every column derives from the config or from
/// integer counts; no timings.
pub fn summary_csv(rows: &[StatSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.scenario,
            row.statistic,
            row.kind,
            row.n1,
            row.n2,
            row.p,
            row.specified_m,
            row.alpha,
            row.replicates,
            row.completed,
            row.rejections,
            format_f64(row.rate()),
            format_f64(row.mc_se()),
            row.degenerate,
            u8::from(row.flagged),
        );
    }
    out
}

/// Convenience wrapper for tests and the power-prediction workflow: runs a
/// one-sample scenario on data generated outside the engine.
pub fn evaluate_matrix(x: &ObservationMatrix, m: usize, alpha: f64) -> Result<TestResult> {
    test_one_sample(x, m, alpha)
}
