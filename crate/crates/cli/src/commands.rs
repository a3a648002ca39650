use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use rwsre::environment::{KernelKind, RenewalKernel, SparseEnvironment};
use rwsre::experiments::{
    case_flips, doubled_budgets, regime_scan, tau_mean_lower_bound, verify_key_relation,
    KeyRelationConfig, Outcome, ScanConfig, TauMeanConfig,
};
use rwsre::pinning::{
    annealed_critical_point, free_energy_estimate, grand_canonical, homogeneous_free_energy,
    quenched_critical_point_estimate, relevance_classifier, CriticalSearch, PartitionTable,
};
use rwsre::rng::{derive_seed, stream};
use rwsre::walk::{mc_speed, mc_visits_with_budget, Potential, WalkParams};

use crate::config::{EnvSection, PinningSection, ScanSection, VerifySection, WalkSection};
use crate::CliError;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Output directory plus the run's master seed.
pub struct Output {
    dir: PathBuf,
    seed: u64,
}

impl Output {
    pub fn new(dir: PathBuf, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, seed })
    }

    fn sub_seed(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Fail(format!("cannot write {}: {e}", path.display())))
    }

    /// Writes `<command>.json` with the resolved config embedded, and `<command>-config.toml`
    /// which reproduces the run when passed back through `--config`.
    fn report<S: Serialize, R: Serialize>(
        &self,
        command: &str,
        section: &S,
        result: &R,
    ) -> Result<(), CliError> {
        let mut table = toml::Table::new();
        table.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        let section_toml =
            toml::Value::try_from(section).map_err(|e| CliError::Config(e.to_string()))?;
        table.insert(command.into(), section_toml);
        let toml_text = toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?;
        self.write(&format!("{command}-config.toml"), &toml_text)?;

        let report = json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "seed": self.seed,
            "config": { "seed": self.seed, command: section },
            "result": result,
        });
        let mut text =
            serde_json::to_string_pretty(&report).map_err(|e| CliError::Fail(e.to_string()))?;
        text.push('\n');
        self.write(&format!("{command}.json"), &text)
    }
}

fn kernel(kind: KernelKind) -> Result<RenewalKernel<f64>, CliError> {
    Ok(RenewalKernel::new(kind)?)
}

pub fn env(out: &Output, s: &EnvSection) -> Result<(), CliError> {
    let kernel = kernel(s.kernel)?;
    let disorder = s.disorder.validated()?;
    let environment = SparseEnvironment::sample(
        &kernel,
        &disorder,
        s.horizon,
        out.sub_seed("env/tau"),
        out.sub_seed("env/omega"),
    );
    out.write("kernel.csv", &kernel.to_csv())?;
    let result = json!({
        "environment": environment,
        "contacts": environment.tau().len() - 1,
        "kernel_mean": kernel.mean(),
    });
    out.report("env", s, &result)
}

pub fn walk(out: &Output, s: &WalkSection) -> Result<(), CliError> {
    let kernel = kernel(s.kernel)?;
    let disorder = s.disorder.validated()?;
    let params = WalkParams::new(s.beta, s.h, s.f)?;
    let target = s.target.unwrap_or(s.horizon);
    if target == 0 || target > s.horizon + 1 {
        return Err(CliError::Config(format!(
            "target must lie in 1..={}, got {target}",
            s.horizon + 1
        )));
    }
    let environment = SparseEnvironment::sample(
        &kernel,
        &disorder,
        s.horizon,
        out.sub_seed("walk/tau"),
        out.sub_seed("walk/omega"),
    );
    let potential = Potential::build(&environment, &params);
    out.write("potential.csv", &potential.to_csv())?;

    let mut exact = String::from("r,expected_visits_exact,log_expected_visits\n");
    for r in 1..=target {
        exact.push_str(&format!(
            "{r},{},{}\n",
            potential.expected_visits_exact(r)?,
            potential.log_expected_visits(r)?
        ));
    }
    out.write("exact.csv", &exact)?;

    let expected = potential.expected_visits_exact(target)?;
    let mc = mc_visits_with_budget(
        &potential,
        target,
        s.replicas,
        out.sub_seed("walk/mc"),
        s.step_budget,
    )?;
    let z_score = if mc.stderr > 0.0 {
        (mc.mean - expected) / mc.stderr
    } else {
        0.0
    };
    let speed = if s.speed_steps > 0 {
        let sampler = kernel.sampler();
        let n = s.speed_steps;
        Some(mc_speed(
            |_, rng| {
                let omega = disorder.sample(n, rng);
                Potential::build(
                    &SparseEnvironment::with_disorder(&sampler, &omega, rng),
                    &params,
                )
            },
            n,
            s.speed_replicas,
            out.sub_seed("walk/speed"),
        )?)
    } else {
        None
    };
    let result = json!({
        "target": target,
        "expected_visits_exact": expected,
        "mc_visits": mc,
        "z_score": z_score,
        "speed": speed,
    });
    out.report("walk", s, &result)
}

pub fn pinning(out: &Output, s: &PinningSection) -> Result<(), CliError> {
    let kernel = kernel(s.kernel)?;
    let disorder = s.disorder.validated()?;
    if s.n == 0 {
        return Err(CliError::Config("n must be at least 1".into()));
    }
    WalkParams::new(s.beta, s.h, 0.0)?;
    let omega = disorder.sample(s.n, &mut stream(out.sub_seed("pinning/omega"), 0));
    let table = PartitionTable::compute(&omega, &kernel, s.beta, s.h, s.n)?;
    out.write("partition.csv", &table.to_csv())?;

    let annealed = annealed_critical_point(&disorder, s.beta);
    let relevance = match s.kernel {
        KernelKind::PowerLaw { alpha, .. } => Some(relevance_classifier(alpha)?),
        _ => None,
    };
    let series = s.grand_canonical_f.map(|f| grand_canonical(&table, f, s.n));
    let (critical, critical_error) = if s.critical {
        let search = CriticalSearch {
            n: s.search_n,
            replicas: s.search_replicas,
            tol: s.tol,
            seed: out.sub_seed("pinning/critical"),
            range: s.range.map(|[lo, hi]| (lo, hi)),
            min_threshold: s.min_threshold,
            spread_factor: s.spread_factor,
        };
        match quenched_critical_point_estimate(&disorder, &kernel, s.beta, &search) {
            Ok(est) => (Some(est), None),
            Err(e @ rwsre::Error::NoBracket { .. }) => (None, Some(e)),
            Err(e) => return Err(e.into()),
        }
    } else {
        (None, None)
    };
    let result = json!({
        "free_energy": free_energy_estimate(&omega, &kernel, s.beta, s.h, s.n)?,
        "homogeneous": homogeneous_free_energy(&kernel, s.h),
        "annealed_critical_point": annealed,
        "annealed_free_energy": homogeneous_free_energy(&kernel, s.h - annealed).free_energy,
        "relevance": relevance,
        "grand_canonical": series,
        "critical_point": critical,
        "critical_point_error": critical_error.as_ref().map(|e| e.to_string()),
    });
    out.report("pinning", s, &result)?;
    match critical_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

pub fn verify(out: &Output, s: &VerifySection) -> Result<(), CliError> {
    let key = KeyRelationConfig {
        kernel: s.kernel,
        disorder: s.disorder,
        beta: s.beta,
        h: s.h,
        f: s.f,
        tau_replicas: s.tau_replicas,
        walk_replicas: s.walk_replicas,
        seed: out.sub_seed("verify/key-relation"),
        r_min: s.r_min,
        r_max: s.r_max,
        pilot_replicas: s.pilot_replicas,
        abs_slack: s.abs_slack,
        step_budget: s.step_budget,
    };
    let tau_mean = TauMeanConfig {
        kernel: s.kernel,
        disorder: s.disorder,
        beta: s.beta,
        h: s.h,
        n_terms: s.tau_mean_terms,
        seed: out.sub_seed("verify/tau-mean"),
        slack: s.tau_mean_slack,
    };
    let key_report = verify_key_relation(&key)?;
    let tau_report = tau_mean_lower_bound(&tau_mean)?;
    let outcomes = [key_report.outcome, tau_report.outcome];
    let outcome = if outcomes.contains(&Outcome::Fail) {
        Outcome::Fail
    } else if outcomes.contains(&Outcome::Inconclusive) {
        Outcome::Inconclusive
    } else {
        Outcome::Pass
    };
    let result = json!({
        "outcome": outcome,
        "key_relation": key_report,
        "tau_mean": tau_report,
    });
    out.report("verify", s, &result)?;
    let summary = format!(
        "key relation |lhs - rhs| = {:.3e} against {:.3e}; E[tau_1] bound {:?}",
        key_report.difference, key_report.tolerance, tau_report.outcome
    );
    match outcome {
        Outcome::Pass => Ok(()),
        Outcome::Fail => Err(CliError::Fail(summary)),
        Outcome::Inconclusive => Err(CliError::Inconclusive(summary)),
    }
}

pub fn scan(out: &Output, s: &ScanSection) -> Result<(), CliError> {
    let config = ScanConfig {
        kernel: s.kernel,
        disorder: s.disorder,
        beta_grid: s.beta_grid.clone(),
        h_grid: s.h_grid.clone(),
        search: CriticalSearch {
            n: s.search_n,
            replicas: s.search_replicas,
            tol: s.tol,
            seed: out.sub_seed("scan/search"),
            range: None,
            min_threshold: s.min_threshold,
            spread_factor: s.spread_factor,
        },
        n_terms: s.n_terms,
        eps_small: s.eps_small,
        tie_tolerance: s.tie_tolerance,
    };
    let report = regime_scan(&config)?;
    out.write("scan.csv", &report.to_csv())?;
    let flips = if s.stability {
        let doubled = regime_scan(&doubled_budgets(&config))?;
        Some(
            case_flips(&report, &doubled)
                .into_iter()
                .map(|(beta, h, before, after)| json!({"beta": beta, "h": h, "before": before, "after": after}))
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let flipped = flips.as_ref().is_some_and(|f| !f.is_empty());
    let result = json!({ "report": report, "case_flips": flips });
    out.report("scan", s, &result)?;
    if flipped {
        return Err(CliError::Fail(
            "classification changed under doubled budgets".into(),
        ));
    }
    Ok(())
}
