//! Batch experiment harness: seeded sweeps over (scenario, gap, method)
//! cells, summary aggregation, ordering reports, and the scripted belief
//! convergence demo.

use crate::belief::{advance, correct, predict, Belief};
use crate::config::EngineConfig;
use crate::policy::{advance_one, policy_action, PolicyKind, PolicyState};
use crate::reward::COLLISION_REWARD;
use crate::rng::RngStream;
use crate::sim::{
    advance_scenario, build_scenario, episode, initial_state, trace_csv, EpisodeResult, Method,
    ScenarioKind, SimError,
};
use crate::state::Warning;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Batch sweep specification.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub scenarios: Vec<(ScenarioKind, f64)>,
    pub methods: Vec<Method>,
    /// Episodes per (scenario, method) cell; episode i uses seed base + i.
    pub runs: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// Write one trace CSV per episode under the output directory.
    pub write_traces: bool,
}

impl SweepSpec {
    /// The full evaluation protocol: both scenarios at the three initial
    /// gaps, the four warning methods.
    pub fn standard(out_dir: PathBuf, runs: usize, base_seed: u64) -> SweepSpec {
        let mut scenarios = Vec::new();
        for kind in [ScenarioKind::FrontHardBrake, ScenarioKind::LaneChange] {
            for gap in [8.5, 13.5, 18.5] {
                scenarios.push((kind, gap));
            }
        }
        SweepSpec {
            scenarios,
            methods: vec![
                Method::EstStateMdp,
                Method::ApproxPomdp,
                Method::TtcBaseline,
                Method::RuleBaseline,
            ],
            runs,
            base_seed,
            out_dir,
            write_traces: true,
        }
    }
}

/// Aggregated metrics of one sweep cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub scenario: ScenarioKind,
    pub d_gap0: f64,
    pub method: Method,
    pub runs: usize,
    /// Mean total trajectory reward over collision-free episodes; the
    /// collision sentinel when every episode collided.
    pub mean_reward: f64,
    /// Sample standard deviation over collision-free episodes.
    pub std_reward: f64,
    /// Mean issue counts per episode: text, voice, alarm, take-over.
    pub mean_counts: [f64; 4],
    pub collision_rate: f64,
}

impl CellSummary {
    pub fn stderr(&self) -> f64 {
        if self.runs > 0 && self.std_reward.is_finite() {
            self.std_reward / (self.runs as f64).sqrt()
        } else {
            f64::INFINITY
        }
    }

    pub fn key(&self) -> String {
        format!("{},{:.1},{}", self.scenario, self.d_gap0, self.method)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.1},{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
            self.scenario,
            self.d_gap0,
            self.method,
            self.mean_reward,
            self.std_reward,
            self.mean_counts[0],
            self.mean_counts[1],
            self.mean_counts[2],
            self.mean_counts[3],
            self.collision_rate
        )
    }
}

pub const SUMMARY_HEADER: &str =
    "scenario,d_gap,method,mean_reward,std_reward,text_ct,voice_ct,alarm_ct,takeover_ct,collision_rate\n";

/// Summarize a cell's episodes.
pub fn summarize_cell(
    scenario: ScenarioKind,
    d_gap0: f64,
    method: Method,
    episodes: &[EpisodeResult],
) -> CellSummary {
    let n = episodes.len();
    let finite: Vec<f64> = episodes
        .iter()
        .filter(|e| !e.collision)
        .map(|e| e.total_traj_reward)
        .collect();
    let (mean, std) = if finite.is_empty() {
        (COLLISION_REWARD, 0.0)
    } else {
        let m = finite.iter().sum::<f64>() / finite.len() as f64;
        let var = if finite.len() > 1 {
            finite.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (finite.len() - 1) as f64
        } else {
            0.0
        };
        (m, var.sqrt())
    };
    let mut counts = [0.0f64; 4];
    for e in episodes {
        counts[0] += e.count(Warning::Text) as f64;
        counts[1] += e.count(Warning::Voice) as f64;
        counts[2] += e.count(Warning::Alarm) as f64;
        counts[3] += e.count(Warning::TakeOver) as f64;
    }
    for c in &mut counts {
        *c /= n.max(1) as f64;
    }
    let collisions = episodes.iter().filter(|e| e.collision).count();
    CellSummary {
        scenario,
        d_gap0,
        method,
        runs: n,
        mean_reward: mean,
        std_reward: std,
        mean_counts: counts,
        collision_rate: collisions as f64 / n.max(1) as f64,
    }
}

/// Run every cell of the spec with seeds base..base+runs, write per-episode
/// traces and the summary CSV, and return the summaries sorted by cell key.
/// The output is a pure function of (spec, config).
pub fn run_sweep(spec: &SweepSpec, cfg: &EngineConfig) -> Result<Vec<CellSummary>, SimError> {
    let mut cells: Vec<(ScenarioKind, f64, Method)> = Vec::new();
    for &(kind, gap) in &spec.scenarios {
        for &method in &spec.methods {
            cells.push((kind, gap, method));
        }
    }
    cells.sort_by(|a, b| {
        (a.0, ordered(a.1), a.2).cmp(&(b.0, ordered(b.1), b.2))
    });

    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..spec.runs).map(move |i| (c, i as u64)))
        .collect();
    let episodes: Vec<EpisodeResult> = jobs
        .par_iter()
        .map(|&(c, i)| {
            let (kind, gap, method) = cells[c];
            let script = build_scenario(kind, gap, cfg)
                .unwrap_or_else(|e| panic!("cell {kind} {gap}: {e}"));
            episode(&script, method, spec.base_seed + i, cfg).unwrap_or_else(|e| {
                panic!("episode failed in cell ({kind}, {gap}, {method}) seed {i}: {e}")
            })
        })
        .collect();

    std::fs::create_dir_all(&spec.out_dir)?;
    let mut summaries = Vec::with_capacity(cells.len());
    for (c, &(kind, gap, method)) in cells.iter().enumerate() {
        let cell_eps = &episodes[c * spec.runs..(c + 1) * spec.runs];
        if spec.write_traces {
            let dir = spec
                .out_dir
                .join("traces")
                .join(format!("{kind}_{gap:.1}_{method}"));
            std::fs::create_dir_all(&dir)?;
            for e in cell_eps {
                let path = dir.join(format!("ep_{:06}.csv", e.seed));
                std::fs::write(path, trace_csv(e, cfg))?;
            }
        }
        summaries.push(summarize_cell(kind, gap, method, cell_eps));
    }

    let mut csv = String::from(SUMMARY_HEADER);
    for s in &summaries {
        csv.push_str(&s.csv_row());
    }
    std::fs::write(spec.out_dir.join("summary.csv"), csv)?;
    Ok(summaries)
}

fn ordered(x: f64) -> i64 {
    (x * 1000.0).round() as i64
}

/// Ordering check over a sweep: the two planning methods must agree within
/// two pooled standard errors and each stage of planners over rule-based
/// over TTC must hold up to one pooled standard error.
#[derive(Debug, Clone, Default)]
pub struct OrderingReport {
    pub lines: Vec<String>,
    pub violations: Vec<String>,
}

impl OrderingReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn pooled_se(a: &CellSummary, b: &CellSummary) -> f64 {
    (a.stderr().powi(2) + b.stderr().powi(2)).sqrt()
}

pub fn compare_report(summaries: &[CellSummary]) -> OrderingReport {
    let mut by_cell: BTreeMap<(ScenarioKind, i64), BTreeMap<Method, &CellSummary>> =
        BTreeMap::new();
    for s in summaries {
        by_cell
            .entry((s.scenario, ordered(s.d_gap0)))
            .or_default()
            .insert(s.method, s);
    }

    let mut report = OrderingReport::default();
    for ((scenario, gap_key), methods) in &by_cell {
        let gap = *gap_key as f64 / 1000.0;
        let cell = format!("{scenario} d_gap {gap:.1}");
        let (Some(mdp), Some(pomdp), Some(ttc), Some(rule)) = (
            methods.get(&Method::EstStateMdp),
            methods.get(&Method::ApproxPomdp),
            methods.get(&Method::TtcBaseline),
            methods.get(&Method::RuleBaseline),
        ) else {
            report.lines.push(format!("{cell}: skipped (incomplete methods)"));
            continue;
        };

        let gap_mm = (mdp.mean_reward - pomdp.mean_reward).abs();
        let tol = 2.0 * pooled_se(mdp, pomdp);
        check(
            &mut report,
            &cell,
            "planners agree",
            gap_mm <= tol,
            format!("|{:.2} - {:.2}| <= {:.2}", mdp.mean_reward, pomdp.mean_reward, tol),
        );

        for (name, p) in [("est_state_mdp", mdp), ("approx_pomdp", pomdp)] {
            check(
                &mut report,
                &cell,
                &format!("{name} >= rule_baseline"),
                ge_within(p, rule),
                format!("{:.2} vs {:.2}", p.mean_reward, rule.mean_reward),
            );
        }
        check(
            &mut report,
            &cell,
            "rule_baseline >= ttc_baseline",
            ge_within(rule, ttc),
            format!("{:.2} vs {:.2}", rule.mean_reward, ttc.mean_reward),
        );
    }
    report
}

/// a >= b, or within one pooled standard error of it.
fn ge_within(a: &CellSummary, b: &CellSummary) -> bool {
    if b.mean_reward == COLLISION_REWARD {
        return true;
    }
    if a.mean_reward == COLLISION_REWARD {
        return false;
    }
    a.mean_reward >= b.mean_reward - pooled_se(a, b)
}

fn check(report: &mut OrderingReport, cell: &str, what: &str, ok: bool, detail: String) {
    let status = if ok { "ok" } else { "VIOLATION" };
    report.lines.push(format!("{cell}: {what}: {status} ({detail})"));
    if !ok {
        report.violations.push(format!("{cell}: {what} ({detail})"));
    }
}

/// Parse a summary CSV produced by [`run_sweep`]; `runs` is not stored in
/// the file and must be supplied for standard-error computations.
pub fn read_summary_csv(path: &Path, runs: usize) -> Result<Vec<CellSummary>, SimError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(SimError::UnknownScenario(format!(
                "summary line {i} has {} fields",
                fields.len()
            )));
        }
        let parse = |s: &str| -> f64 {
            match s {
                "-inf" => COLLISION_REWARD,
                _ => s.parse().unwrap_or(f64::NAN),
            }
        };
        out.push(CellSummary {
            scenario: fields[0].parse()?,
            d_gap0: parse(fields[1]),
            method: fields[2].parse()?,
            runs,
            mean_reward: parse(fields[3]),
            std_reward: parse(fields[4]),
            mean_counts: [parse(fields[5]), parse(fields[6]), parse(fields[7]), parse(fields[8])],
            collision_rate: parse(fields[9]),
        });
    }
    Ok(out)
}

/// One row of the belief-convergence demo.
#[derive(Debug, Clone, Serialize)]
pub struct DemoRow {
    pub t: f64,
    /// Kind-aggregated belief mass in declaration order:
    /// safe, brake, delay-to-brake, delay-to-safe, blind.
    pub masses: [f64; 5],
}

#[derive(Debug, Clone)]
pub struct DemoTrace {
    pub rows: Vec<DemoRow>,
    /// Time the scripted driver's delayed switch to safe takes effect (s).
    pub switch_time: f64,
    /// First time the belief puts more than 0.9 on safe at or after the
    /// switch, if it ever does.
    pub convergence_time: Option<f64>,
}

fn kind_masses(b: &Belief) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (i, kind) in PolicyKind::ALL.into_iter().enumerate() {
        out[i] = b.kind_mass(kind);
    }
    out
}

/// Scripted belief-convergence run: the driver starts blind in the hard
///-brake scenario; voice warnings are issued at 0.5 s and 1.0 s; the first
/// one deterministically starts a delayed switch to safe, which takes
/// effect after the reaction delay. Only the observed actions reach the
/// filter.
pub fn estimate_demo(cfg: &EngineConfig, seed: u64) -> DemoTrace {
    let model = cfg.driver_model();
    let script = build_scenario(ScenarioKind::FrontHardBrake, 13.5, cfg)
        .expect("standard scenario");
    let mut state = initial_state(&script, cfg);
    let mut action_rng = RngStream::new(seed, 1);

    let warning_at = |t: f64| -> Warning {
        if (t - 0.5).abs() < 1e-9 || (t - 1.0).abs() < 1e-9 {
            Warning::Voice
        } else {
            Warning::NoWarning
        }
    };
    let switch_start = 0.5;
    let switch_time = switch_start + cfg.driver.t_d;

    let mut belief = Belief::from_weights(
        cfg.estimator
            .initial_belief
            .iter()
            .map(|(&kind, &p)| (PolicyState { kind, timer: 0 }, p)),
    )
    .expect("validated initial belief");
    let mut true_policy = PolicyState::blind();

    let n_steps = cfg.steps_per_episode();
    let mut rows = vec![DemoRow {
        t: 0.0,
        masses: kind_masses(&belief),
    }];
    let mut convergence_time = None;

    for _ in 0..n_steps {
        let t = state.t;
        let warning = warning_at(t);
        // scripted reaction: the first voice warning starts the delayed
        // switch; later warnings leave the committed driver unchanged
        let acting = if (t - switch_start).abs() < 1e-9 {
            PolicyState::delay_to_safe(0)
        } else {
            true_policy
        };
        let action = policy_action(acting, &state, &model).sample(&mut action_rng, &cfg.bounds);
        let next = advance_scenario(&state, &action, cfg);

        let predicted = predict(&belief, warning, &cfg.transition);
        let corrected = correct(&predicted, &action, &state, &model).unwrap_or(predicted);
        belief = advance(&corrected, &cfg.driver);

        true_policy = advance_one(acting, &cfg.driver);
        state = next;

        let masses = kind_masses(&belief);
        let t_next = state.t;
        rows.push(DemoRow { t: t_next, masses });
        if convergence_time.is_none() && t_next >= switch_time - 1e-9 && masses[0] > 0.9 {
            convergence_time = Some(t_next);
        }
    }

    DemoTrace {
        rows,
        switch_time,
        convergence_time,
    }
}

/// Render the demo trace as CSV with one column per behavior kind.
pub fn demo_csv(trace: &DemoTrace) -> String {
    let mut out =
        String::from("t,safe,brake,delay_blind_to_brake,delay_blind_to_safe,blind\n");
    for row in &trace.rows {
        out.push_str(&format!(
            "{:.1},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            row.t, row.masses[0], row.masses[1], row.masses[2], row.masses[3], row.masses[4]
        ));
    }
    out
}
