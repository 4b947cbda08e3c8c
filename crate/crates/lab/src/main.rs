use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use entlab::commands;
use entlab::selftest::{run_selftest, Status};
use entlab::{ExperimentConfig, LabError, Overrides};

#[derive(Parser)]
#[command(name = "entlab", version, about = "Entanglement dilution and concentration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Comma-separated copy counts, ascending.
    #[arg(long = "n-grid", global = true)]
    n_grid: Option<String>,
    /// Comma-separated single-copy Schmidt coefficients.
    #[arg(long, global = true)]
    p: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Class spectra and the Gaussian comparison table.
    Spectrum,
    /// Lower and upper bounds on the diluted dimension.
    Inefficiency,
    /// Minimal classical budget of block dilution, with certificates.
    Communication,
    /// Expected yield of class-measurement concentration.
    Concentration,
    /// Run the invariant suite.
    Selftest,
}

fn load(flags: &Flags) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: flags.seed,
        out: flags.out.clone(),
        threads: flags.threads,
        n_grid: flags.n_grid.clone(),
        p: flags.p.clone(),
        epsilon: flags.epsilon,
        delta: flags.delta,
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load(&cli.flags).context("loading configuration")?;
    let files = match cli.command {
        Command::Spectrum => commands::cmd_spectrum(&cfg)?,
        Command::Inefficiency => commands::cmd_inefficiency(&cfg)?,
        Command::Communication => commands::cmd_communication(&cfg)?,
        Command::Concentration => commands::cmd_concentration(&cfg)?,
        Command::Selftest => {
            let checks = run_selftest(cfg.seed)?;
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| c.status == Status::Fail).count();
            if failed > 0 {
                return Err(LabError::SelftestFailed(failed).into());
            }
            return Ok(());
        }
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    e.downcast_ref::<LabError>().map_or(2, LabError::exit_code) as u8
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use std::fs;
    use std::path::Path;

    use entlab::commands::{read_csv, BerryEsseenRow, CommunicationRow, ConcentrationRow};
    use entlab::spotcheck::spot_check;
    use entlab_core::spectrum::BaseSpectrum;

    use super::*;

    /// Runs the CLI in-process, returning the exit status.
    fn entlab(args: &[&str]) -> u8 {
        let cli = Cli::try_parse_from(std::iter::once("entlab").chain(args.iter().copied())).expect("arguments parse");
        match run(&cli) {
            Ok(()) => 0,
            Err(e) => exit_code(&e),
        }
    }

    fn path(dir: &Path) -> &str {
        dir.to_str().unwrap()
    }

    fn qubit() -> BaseSpectrum {
        BaseSpectrum::qubit(0.75).unwrap()
    }

    #[test]
    fn concentration_is_deterministic_across_runs_and_threads() {
        let tmp = tempfile::tempdir().unwrap();
        let mut outputs = Vec::new();
        for (i, threads) in ["1", "1", "4"].iter().enumerate() {
            let dir = tmp.path().join(format!("run{i}"));
            assert_eq!(
                entlab(&["concentration", "--n-grid", "2,16,64,256", "--threads", threads, "--out", path(&dir)]),
                0
            );
            outputs.push(fs::read(dir.join("concentration.csv")).unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
        let rows: Vec<ConcentrationRow> = read_csv(&tmp.path().join("run0/concentration.csv")).unwrap();
        assert_eq!(rows[0].n, 2);
        assert!((rows[0].expected_yield - 0.375).abs() < 1e-12);
        let header = String::from_utf8_lossy(&outputs[0]).lines().next().unwrap().to_string();
        assert_eq!(header, "n,nE,expected_yield,deficit,deficit_over_sqrt_n");
    }

    #[test]
    fn uniform_concentration_has_no_deficit() {
        let tmp = tempfile::tempdir().unwrap();
        assert_eq!(entlab(&["concentration", "--p", "0.5,0.5", "--n-grid", "4,40", "--out", path(tmp.path())]), 0);
        let rows: Vec<ConcentrationRow> = read_csv(&tmp.path().join("concentration.csv")).unwrap();
        assert!(rows.iter().all(|r| r.deficit.abs() < 1e-9));
    }

    #[test]
    fn spectrum_table_from_config_file() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tmp.path().join("lab.conf");
        fs::write(&cfg, "# two and sixty-four copies\np = 0.75, 0.25\nn_grid = 2, 64\nintervals = -3:-1\n").unwrap();
        let out = tmp.path().join("out");
        assert_eq!(entlab(&["spectrum", "--config", path(&cfg), "--out", path(&out)]), 0);
        assert!(out.join("spectrum_n2.json").exists() && out.join("spectrum_n64.json").exists());
        let rows: Vec<BerryEsseenRow> = read_csv(&out.join("berry_esseen.csv")).unwrap();
        assert_eq!(rows.len(), 2 * (50 * 51 / 2 + 1));
        let hand = rows.iter().find(|r| r.n == 2 && r.a == -3.0 && r.b == -1.0).unwrap();
        assert!((hand.mu - 0.375).abs() < 1e-12);
        assert!(rows.iter().filter(|r| r.n == 64).all(|r| r.pass));
        let check = spot_check(&out, &qubit()).unwrap();
        assert!(check.passed(), "{:?}", check.first_violation);
    }

    #[test]
    fn communication_rows_and_certificates() {
        let tmp = tempfile::tempdir().unwrap();
        assert_eq!(entlab(&["communication", "--n-grid", "16,64", "--out", path(tmp.path())]), 0);
        let rows: Vec<CommunicationRow> = read_csv(&tmp.path().join("communication.csv")).unwrap();
        for r in &rows {
            assert!(r.target_error <= 0.1 && r.certificate_consistent);
            assert!(r.full_rank_error < 1e-12);
            assert_eq!(r.full_rank_bits as u64, r.n);
            assert!(tmp.path().join(format!("certificate_n{}.json", r.n)).exists());
        }
        let check = spot_check(tmp.path(), &qubit()).unwrap();
        assert!(check.passed() && check.instances == 2);
    }

    #[test]
    fn inefficiency_writes_bounds_and_growth_fit() {
        let tmp = tempfile::tempdir().unwrap();
        assert_eq!(entlab(&["inefficiency", "--n-grid", "64,256", "--out", path(tmp.path())]), 0);
        let text = fs::read_to_string(tmp.path().join("inefficiency.csv")).unwrap();
        assert!(text.starts_with("n,epsilon,nE,lower_bits,upper_bits,excess_over_nE,alpha_sqrt_n\n"));
        assert!(tmp.path().join("growth_fit.json").exists());
        assert!(spot_check(tmp.path(), &qubit()).unwrap().passed());

        // ε close to 2 leaves almost nothing to keep
        let near = tmp.path().join("near2");
        assert_eq!(entlab(&["inefficiency", "--n-grid", "4", "--epsilon", "1.999", "--out", path(&near)]), 0);
        let row = fs::read_to_string(near.join("inefficiency.csv")).unwrap();
        let lower: f64 = row.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(lower, 0.0);
    }

    #[test]
    fn exit_codes() {
        let tmp = tempfile::tempdir().unwrap();
        let out = path(tmp.path());
        assert_eq!(entlab(&["spectrum", "--p", "0.5,0.5", "--n-grid", "4", "--out", out]), 2);
        assert_eq!(entlab(&["concentration", "--n-grid", "8,4", "--out", out]), 2);
        assert_eq!(entlab(&["concentration", "--config", "/nonexistent/lab.conf"]), 4);
        assert_eq!(entlab(&["spectrum", "--p", "0.1,0.2,0.3,0.4", "--n-grid", "1000000", "--out", out]), 3);
        let blocked = tmp.path().join("file");
        fs::write(&blocked, "").unwrap();
        assert_eq!(entlab(&["concentration", "--n-grid", "4", "--out", path(&blocked.join("sub"))]), 4);
    }

    #[test]
    fn selftest_passes() {
        let checks = run_selftest(1).unwrap();
        assert!(checks.iter().all(|c| c.status != Status::Fail), "{checks:?}");
        assert!(checks.iter().any(|c| c.detail.contains("0.864334")));
        assert_eq!(entlab(&["selftest"]), 0);
    }
}
