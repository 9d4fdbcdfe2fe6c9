mod args;
mod manifest;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use mtc_raw::params::MAX_RAW_SLOT_US;
use mtc_raw::planner::{MixtureSpec, Planner, Problem};
use mtc_raw::sim::{simulate, SimConfig};
use mtc_raw::{kolmogorov_distance, run_chains, Error, TimeDistribution};
use serde::Serialize;
use serde_json::json;

use args::{
    Cli, Command, CompareArgs, Format, GroupsArgs, ModelArgs, PlanArgs, ProblemArg, SimulateArgs,
};
use manifest::{same_scenario, Manifest};

const QUANTILES: [f64; 4] = [0.5, 0.95, 0.99, 0.999];

/// Error carrying the process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Truncated { .. } => 2,
            Error::UnsatisfiableQuantile { .. } => 3,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Model(a) => model(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Compare(a) => compare(a),
        Command::Plan(a) => plan(a),
        Command::Groups(a) => groups(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn prepare_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))
}

fn write_file(dir: &Path, name: &str, text: &str, manifest: &mut Manifest) -> CmdResult {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    manifest.outputs.push(name.to_string());
    Ok(())
}

fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    value: &T,
    manifest: &mut Manifest,
) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    write_file(dir, name, &(text + "\n"), manifest)
}

fn finish(dir: &Path, mut manifest: Manifest, started: Instant) -> CmdResult {
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(dir).map_err(Failure::usage)
}

fn format_name(f: Format) -> String {
    match f {
        Format::Csv => "csv".into(),
        Format::Json => "json".into(),
    }
}

fn key_values(rows: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

#[derive(Serialize)]
struct QuantileRow {
    problem: &'static str,
    q: f64,
    duration_us: Option<u64>,
    achievable: f64,
}

fn quantile_rows(name: &'static str, dist: &TimeDistribution) -> Vec<QuantileRow> {
    QUANTILES
        .iter()
        .map(|&q| QuantileRow {
            problem: name,
            q,
            duration_us: dist.quantile(q).ok(),
            achievable: dist.total_mass(),
        })
        .collect()
}

fn model(a: ModelArgs) -> CmdResult {
    let started = Instant::now();
    let (params, durations) = a.params.resolve().map_err(Failure::usage)?;
    prepare_dir(&a.out)?;
    let out = run_chains(&params, &durations)?;
    let p_b = out.p_b.clone().unwrap_or_default();

    let mut quantiles = quantile_rows("A", &out.p_a);
    quantiles.extend(quantile_rows("B", &p_b));

    let mut manifest = Manifest::new("model");
    manifest.params = Some(params.clone());
    manifest.durations = Some(durations);
    manifest.format = Some(format_name(a.format));
    match a.format {
        Format::Csv => {
            write_file(&a.out, "p_a.csv", &out.p_a.to_csv(), &mut manifest)?;
            write_file(&a.out, "p_b.csv", &p_b.to_csv(), &mut manifest)?;
            let mut q = String::from("problem,q,duration_us,achievable\n");
            for row in &quantiles {
                let d = row.duration_us.map(|d| d.to_string()).unwrap_or_default();
                q.push_str(&format!(
                    "{},{},{},{}\n",
                    row.problem, row.q, d, row.achievable
                ));
            }
            write_file(&a.out, "quantiles.csv", &q, &mut manifest)?;
            let d = &out.diagnostics;
            let summary = key_values(&[
                ("n_stations", params.n_stations.to_string()),
                ("steps", d.steps.to_string()),
                ("truncated", d.truncated.to_string()),
                ("mass_a", out.p_a.total_mass().to_string()),
                ("mass_b", p_b.total_mass().to_string()),
                ("p_fail_a", out.p_fail_a.to_string()),
                ("p_fail_b", out.p_fail_b.to_string()),
                ("carried_a", d.carried_a.to_string()),
                ("carried_b", d.carried_b.to_string()),
                ("dropped_a", d.dropped_a.to_string()),
                ("dropped_b", d.dropped_b.to_string()),
            ]);
            write_file(&a.out, "summary.csv", &summary, &mut manifest)?;
        }
        Format::Json => {
            let doc = json!({
                "p_a": out.p_a,
                "p_b": p_b,
                "p_fail_a": out.p_fail_a,
                "p_fail_b": out.p_fail_b,
                "quantiles": quantiles,
                "diagnostics": out.diagnostics,
            });
            write_json(&a.out, "model.json", &doc, &mut manifest)?;
        }
    }
    for w in &out.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    finish(&a.out, manifest, started)?;

    println!(
        "N={} steps={} mass_a={:.9} mass_b={:.9}",
        params.n_stations,
        out.diagnostics.steps,
        out.p_a.total_mass(),
        p_b.total_mass()
    );
    if out.deficit_exceeds(params.epsilon) {
        return Err(Failure {
            code: 2,
            message: format!(
                "time cap {} reached with unresolved mass {:e} (A) / {:e} (B) above epsilon {:e}",
                params.t_max_cap,
                out.diagnostics.unresolved_a(),
                out.diagnostics.unresolved_b(),
                params.epsilon
            ),
        });
    }
    Ok(())
}

fn simulate_cmd(a: SimulateArgs) -> CmdResult {
    let started = Instant::now();
    let (params, durations) = a.params.resolve().map_err(Failure::usage)?;
    let mut config = SimConfig::new(params.clone(), durations, a.runs, a.seed);
    config.tagged_station = a.tagged;
    config
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;
    prepare_dir(&a.out)?;
    let out = simulate(&config)?;
    let emp_a = out.tagged.to_time_distribution();
    let emp_b = out.all.to_time_distribution();

    let mut manifest = Manifest::new("simulate");
    manifest.params = Some(params.clone());
    manifest.durations = Some(durations);
    manifest.seed = Some(a.seed);
    manifest.format = Some(format_name(a.format));
    manifest.settings = json!({ "runs": a.runs, "tagged_station": a.tagged });
    match a.format {
        Format::Csv => {
            write_file(&a.out, "emp_a.csv", &emp_a.to_csv(), &mut manifest)?;
            write_file(&a.out, "emp_b.csv", &emp_b.to_csv(), &mut manifest)?;
            let summary = key_values(&[
                ("runs", a.runs.to_string()),
                ("seed", a.seed.to_string()),
                ("tagged_failures", out.tagged.failure_count.to_string()),
                ("group_failures", out.all.failure_count.to_string()),
                ("max_tagged_attempts", out.max_tagged_attempts.to_string()),
            ]);
            write_file(&a.out, "summary.csv", &summary, &mut manifest)?;
        }
        Format::Json => {
            let doc = json!({
                "emp_a": emp_a,
                "emp_b": emp_b,
                "counts": out,
            });
            write_json(&a.out, "simulate.json", &doc, &mut manifest)?;
        }
    }
    finish(&a.out, manifest, started)?;
    println!(
        "runs={} tagged_failures={} group_failures={}",
        a.runs, out.tagged.failure_count, out.all.failure_count
    );
    Ok(())
}

fn load_distribution(
    dir: &Path,
    manifest: &Manifest,
    problem: ProblemArg,
) -> Result<TimeDistribution, Failure> {
    let (csv, json_file, json_key) = match (manifest.command.as_str(), problem) {
        ("model", ProblemArg::A) => ("p_a.csv", "model.json", "p_a"),
        ("model", ProblemArg::B) => ("p_b.csv", "model.json", "p_b"),
        ("simulate", ProblemArg::A) => ("emp_a.csv", "simulate.json", "emp_a"),
        ("simulate", ProblemArg::B) => ("emp_b.csv", "simulate.json", "emp_b"),
        (other, _) => {
            return Err(Failure::usage(format!(
                "{}: expected a model or simulate output, found `{other}`",
                dir.display()
            )))
        }
    };
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    };
    match manifest.format.as_deref() {
        Some("json") => {
            let mut doc: serde_json::Value = serde_json::from_str(&read(json_file)?)
                .map_err(|e| Failure::usage(format!("{json_file}: {e}")))?;
            serde_json::from_value(doc[json_key].take())
                .map_err(|e| Failure::usage(format!("{json_file}: {json_key}: {e}")))
        }
        _ => TimeDistribution::from_csv(&read(csv)?)
            .map_err(|e| Failure::usage(format!("{csv}: {e}"))),
    }
}

#[derive(Serialize)]
struct AtomDiff {
    duration_us: u64,
    model: f64,
    sim: f64,
    diff: f64,
}

fn compare(a: CompareArgs) -> CmdResult {
    let started = Instant::now();
    let m_model = Manifest::read(&a.model).map_err(Failure::usage)?;
    let m_sim = Manifest::read(&a.sim).map_err(Failure::usage)?;
    if m_model.command != "model" || m_sim.command != "simulate" {
        return Err(Failure::usage(format!(
            "expected model and simulate outputs, found `{}` and `{}`",
            m_model.command, m_sim.command
        )));
    }
    same_scenario(&m_model, &m_sim)
        .map_err(|e| Failure::usage(format!("manifest mismatch: {e}")))?;
    let model = load_distribution(&a.model, &m_model, a.problem)?;
    let sim = load_distribution(&a.sim, &m_sim, a.problem)?;

    let ks = kolmogorov_distance(&model, &sim);
    let support: BTreeSet<u64> = model
        .atoms()
        .keys()
        .chain(sim.atoms().keys())
        .copied()
        .collect();
    let diffs: Vec<AtomDiff> = support
        .into_iter()
        .map(|d| {
            let (m, s) = (model.probability(d), sim.probability(d));
            AtomDiff {
                duration_us: d,
                model: m,
                sim: s,
                diff: s - m,
            }
        })
        .collect();
    let pass = ks <= a.tolerance;
    let verdict = if pass { "PASS" } else { "FAIL" };

    println!("KS distance: {ks:.6} (tolerance {})", a.tolerance);
    println!(
        "mass: model {:.6} sim {:.6}",
        model.total_mass(),
        sim.total_mass()
    );
    let mut worst: Vec<&AtomDiff> = diffs.iter().collect();
    worst.sort_by(|x, y| {
        y.diff
            .abs()
            .total_cmp(&x.diff.abs())
            .then(x.duration_us.cmp(&y.duration_us))
    });
    println!("largest per-atom differences:");
    for d in worst.iter().take(10) {
        println!(
            "  {:>10} us  model {:.6}  sim {:.6}  diff {:+.6}",
            d.duration_us, d.model, d.sim, d.diff
        );
    }
    println!("{verdict}");

    if let Some(dir) = &a.out {
        prepare_dir(dir)?;
        let mut manifest = Manifest::new("compare");
        manifest.params = m_model.params.clone();
        manifest.durations = m_model.durations;
        manifest.seed = m_sim.seed;
        manifest.settings = json!({
            "model": a.model,
            "sim": a.sim,
            "problem": Problem::from(a.problem),
            "tolerance": a.tolerance,
        });
        let mut csv = String::from("duration_us,model,sim,diff\n");
        for d in &diffs {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                d.duration_us, d.model, d.sim, d.diff
            ));
        }
        write_file(dir, "atom_diffs.csv", &csv, &mut manifest)?;
        let report = json!({
            "ks_distance": ks,
            "tolerance": a.tolerance,
            "pass": pass,
            "model_mass": model.total_mass(),
            "sim_mass": sim.total_mass(),
        });
        write_json(dir, "compare.json", &report, &mut manifest)?;
        finish(dir, manifest, started)?;
    }
    if pass {
        Ok(())
    } else {
        Err(Failure {
            code: 4,
            message: format!("KS distance {ks} exceeds tolerance {}", a.tolerance),
        })
    }
}

fn mixture_spec(n: u32, m: &args::MixtureArgs) -> Result<MixtureSpec, Failure> {
    let spec = MixtureSpec {
        n_total: n,
        p_active: m.p,
        conditioning: m.conditioning.into(),
    };
    spec.validate().map_err(|e| Failure::usage(e.to_string()))?;
    if !(m.q > 0.0 && m.q <= 1.0) {
        return Err(Failure::usage(format!("--q {} must lie in (0, 1]", m.q)));
    }
    Ok(spec)
}

fn plan(a: PlanArgs) -> CmdResult {
    let started = Instant::now();
    let (params, durations) = a.params.resolve().map_err(Failure::usage)?;
    let spec = mixture_spec(params.n_stations, &a.mixture)?;
    let options = a.mixture.options().map_err(Failure::usage)?;
    prepare_dir(&a.out)?;
    let planner = Planner::new(&params, &durations)?.with_options(options);
    let mix = planner.mixture_pa(&spec)?;
    let slot = mix.quantile(a.mixture.q);

    let mut manifest = Manifest::new("plan");
    manifest.params = Some(params.clone());
    manifest.durations = Some(durations);
    manifest.settings = json!({ "mixture": spec, "q": a.mixture.q, "options": options });
    write_file(&a.out, "mixture.csv", &mix.to_csv(), &mut manifest)?;
    let slot_us = slot.as_ref().ok().copied();
    let report = json!({
        "q": a.mixture.q,
        "slot_us": slot_us,
        "standard_compliant": slot_us.is_some_and(|s| s <= MAX_RAW_SLOT_US),
        "max_raw_slot_us": MAX_RAW_SLOT_US,
        "achievable": mix.total_mass(),
    });
    write_json(&a.out, "plan.json", &report, &mut manifest)?;
    finish(&a.out, manifest, started)?;

    let slot = slot?;
    println!(
        "slot_us={slot} compliant={} achievable={:.6}",
        slot <= MAX_RAW_SLOT_US,
        mix.total_mass()
    );
    Ok(())
}

fn groups(a: GroupsArgs) -> CmdResult {
    let started = Instant::now();
    let (params, durations) = a.params.resolve().map_err(Failure::usage)?;
    let spec = mixture_spec(params.n_stations, &a.mixture)?;
    let options = a.mixture.options().map_err(Failure::usage)?;
    let problem: Problem = a.problem.into();
    prepare_dir(&a.out)?;
    let planner = Planner::new(&params, &durations)?.with_options(options);
    let sweep = planner.optimize_groups(&spec, a.mixture.q, a.g_min..=a.g_max, problem)?;

    let mut manifest = Manifest::new("groups");
    manifest.params = Some(params.clone());
    manifest.durations = Some(durations);
    manifest.settings = json!({
        "mixture": spec,
        "q": a.mixture.q,
        "options": options,
        "g_min": a.g_min,
        "g_max": a.g_max,
        "problem": problem,
    });
    write_file(&a.out, "groups.csv", &sweep.to_csv(), &mut manifest)?;
    write_json(&a.out, "groups.json", &sweep, &mut manifest)?;
    finish(&a.out, manifest, started)?;

    let best = &sweep.best;
    println!(
        "best g={} slot_us={} total_us={} compliant={}",
        best.group_count,
        best.per_group_slot.unwrap_or_default(),
        best.total_reserved.unwrap_or_default(),
        best.standard_compliant
    );
    Ok(())
}
