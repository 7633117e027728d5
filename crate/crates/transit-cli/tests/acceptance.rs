//! Acceptance gate: one PASS/FAIL line per criterion, thresholds pinned here.
//!
//! Runs the full suite at production sizes (5e5 limit-law draws for the
//! untilted models), so it takes several minutes on one core.

use std::process::ExitCode;

use transit_cli::commands::verdict_lines;
use transit_cli::suite::{Suite, SuiteSettings, Tolerances};

const TOLERANCES: Tolerances = Tolerances {
    mc_mean: 0.05,
    mc_sd: 0.06,
    density_mean: 0.02,
    density_sd: 0.05,
    c_beta: 1e-4,
    c_power: 2e-4,
    constant_agreement: 1e-7,
    eta_rel: 1e-6,
    residue_rel: 0.03,
    tail_slope_rel: 0.05,
    tail_prefactor_rel: 0.10,
    wkb_final: 0.1,
    bootstrap_level: 0.99,
    parseval_rel: 1e-3,
    ks_inversion: 0.004,
};

fn main() -> ExitCode {
    let settings = SuiteSettings {
        seed: 7,
        criteria: (1..=10).collect(),
        n_mc: 500_000,
        n_mc_tilted: 50_000,
        n_converge: 20_000,
        bootstrap: 1000,
        constants_perturbation: 0.0,
    };
    let run = Suite::new(TOLERANCES, settings).run();
    for line in verdict_lines(&run) {
        println!("{line}");
    }
    for c in &run.report.criteria {
        for m in &c.measurements {
            println!("    [{:>2}] {}: {:.6e}{}", c.id, m.label, m.value, if m.pass { "" } else { "  <-- fails" });
        }
    }
    let passed = run.report.criteria.iter().filter(|c| c.pass).count();
    println!("acceptance: {passed}/{} criteria pass", run.report.criteria.len());
    if run.report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
