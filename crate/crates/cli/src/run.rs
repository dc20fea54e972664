use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use beamalign_core::channel::calibrate_snr;
use beamalign_core::experiment::{
    format_f64, rows_csv, run_batch, se_samples_csv, RunOptions, SweepOutput,
};
use beamalign_core::ldp::{bound_report, LevelGainProfile};
use serde_json::json;

use crate::config::Plan;
use crate::{CliError, Command};

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(name.to_string())
}

/// `-15` becomes `m15`, `-7.5` becomes `m7p5`.
fn snr_tag(snr_db: f64) -> String {
    let s = format!("{}", snr_db.abs()).replace('.', "p");
    if snr_db < 0.0 {
        format!("m{s}")
    } else {
        s
    }
}

/// `N,p_up,p_low,ldp_approx` at the given pilots per pair. `p_low` is
/// clamped at zero.
fn bounds_csv(plan: &Plan, snr_db: f64, pilots: &[usize]) -> Result<String, CliError> {
    let profile = LevelGainProfile::ideal(plan.level_pairs, plan.gain, &calibrate_snr(snr_db))?;
    let mut out = String::from("N,p_up,p_low,ldp_approx\n");
    for &n in pilots {
        let r = bound_report(&profile, n as f64, plan.tol)?;
        let _ = writeln!(
            out,
            "{n},{},{},{}",
            format_f64(r.p_up),
            format_f64(r.p_low_clamped),
            format_f64(r.ldp_approx)
        );
    }
    Ok(out)
}

fn first_snr(plan: &Plan) -> Result<f64, CliError> {
    plan.snrs_db
        .first()
        .copied()
        .ok_or_else(|| CliError::Config("`snr_db` is empty".into()))
}

pub fn run(command: &Command, plan: &Plan, out: &Path, threads: Option<usize>) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.display().to_string(),
        source,
    })?;
    let start = Instant::now();
    let mut files = Vec::new();
    let mut summary = Vec::new();

    let prefix = match command {
        Command::Figure { .. } => plan.figure.clone().expect("checked by caller"),
        other => other.name().to_string(),
    };

    let mut all_infeasible = false;
    if let Command::Bounds = command {
        let pilots: Vec<usize> = (plan.n_min..=plan.n_max).collect();
        let csv = bounds_csv(plan, first_snr(plan)?, &pilots)?;
        files.push(write_file(out, "bounds.csv", &csv)?);
    } else {
        let mut specs = plan.specs();
        if let Command::Simulate = command {
            specs.truncate(1);
        }
        if specs.is_empty() {
            return Err(CliError::Config("no strategy configured".into()));
        }
        let scenario = plan.scenario()?;
        let outputs = run_batch(
            &scenario,
            &specs,
            RunOptions {
                threads,
                keep_se: !plan.cdf_budgets.is_empty(),
            },
        )?;
        let single = outputs.len() == 1 && !matches!(command, Command::Sweep);
        for o in &outputs {
            let stem = if single {
                prefix.clone()
            } else {
                format!("{prefix}_{}_snr{}", o.spec.strategy, snr_tag(o.spec.snr_db))
            };
            files.push(write_file(out, &format!("{stem}.csv"), &rows_csv(&o.rows))?);
            files.extend(write_cdfs(out, &stem, plan, o)?);
            summary.push(json!({
                "file": format!("{stem}.csv"),
                "strategy": o.spec.strategy.name(),
                "snr_db": o.spec.snr_db,
                "p_miss_global": o.rows.iter().map(|r| format_f64(r.p_miss_global)).collect::<Vec<_>>(),
            }));
            for r in &o.rows {
                println!(
                    "{stem}: N_tot={} p_miss={} ci95={} se_p10={}",
                    r.budget,
                    format_f64(r.p_miss),
                    format_f64(r.ci95),
                    format_f64(r.se_p10)
                );
            }
        }
        if plan.figure.as_deref() == Some("fig2") && matches!(command, Command::Figure { .. }) {
            let pilots: Vec<usize> = plan.budgets.iter().map(|b| b / plan.level_pairs.max(1)).collect();
            let csv = bounds_csv(plan, first_snr(plan)?, &pilots)?;
            files.push(write_file(out, &format!("{prefix}_bounds.csv"), &csv)?);
        }
        all_infeasible = outputs.iter().all(|o| o.rows.iter().all(|r| !r.feasible));
    }

    let manifest = json!({
        "tool": "beamalign",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "config": plan.entries(),
        "seeds": {
            "base_seed": plan.seed,
            "derivation": "root(base_seed) / trial / {channel | noise / pair}",
        },
        "trials": plan.trials,
        "threads": threads,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "outputs": files,
        "global_miss": summary,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is valid JSON");
    write_file(out, &format!("{prefix}.manifest.json"), &(text + "\n"))?;
    if all_infeasible {
        return Err(CliError::Infeasible(format!(
            "every budget in {:?} is too small for the configured search",
            plan.budgets
        )));
    }
    Ok(())
}

fn write_cdfs(out: &Path, stem: &str, plan: &Plan, o: &SweepOutput) -> Result<Vec<String>, CliError> {
    let Some(samples) = &o.se_samples else {
        return Ok(Vec::new());
    };
    let mut files = Vec::new();
    for (budget, values) in o.spec.budgets.iter().zip(samples) {
        if plan.cdf_budgets.contains(budget) && !values.is_empty() {
            let name = format!("{stem}_se_n{budget}.csv");
            files.push(write_file(out, &name, &se_samples_csv(values))?);
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags() {
        assert_eq!(snr_tag(-15.0), "m15");
        assert_eq!(snr_tag(-7.5), "m7p5");
        assert_eq!(snr_tag(10.0), "10");
    }
}
