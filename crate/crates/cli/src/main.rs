//! `nlkfp` command line: packaged experiments writing CSV files and a run
//! manifest into an output directory.
//!
//! Exit codes: 0 success, 2 invalid input, 1 runtime failure.

mod commands;
mod output;
mod settings;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::{unix_now, Manifest, OutDir};
use settings::{invalid, Invalid, Settings};

#[derive(Parser)]
#[command(name = "nlkfp", version, about = "Nonlinear kinetic Fokker-Planck experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the exponent thresholds and normalization constants.
    Params(Common),
    /// Sample f*, g* or a translated solution on a grid.
    Profile(Common),
    /// Half-mass ellipses and Barenblatt curves.
    Fig1(Common),
    /// Run the splitting solver from one initial datum.
    Evolve(Common),
    /// Convergence of sandwiched data towards g*.
    Converge(Common),
    /// Spectrum of the linearized operator.
    Spectrum(Common),
    /// Kinetic densities against the Barenblatt solution for decreasing epsilon.
    Difflimit(Common),
}

impl Cmd {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Cmd::Params(c) => ("params", c),
            Cmd::Profile(c) => ("profile", c),
            Cmd::Fig1(c) => ("fig1", c),
            Cmd::Evolve(c) => ("evolve", c),
            Cmd::Converge(c) => ("converge", c),
            Cmd::Spectrum(c) => ("spectrum", c),
            Cmd::Difflimit(c) => ("difflimit", c),
        }
    }
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    m: Option<String>,
    /// Output directory (default out/<subcommand>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file; keys outside sections and in [<subcommand>] apply.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Nx,Nv
    #[arg(long)]
    grid: Option<String>,
    /// Lx,Lv (or auto)
    #[arg(long)]
    extent: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long = "T")]
    t_end: Option<String>,
    #[arg(long)]
    flavor: Option<String>,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    count: Option<String>,
    #[arg(long = "eps-list")]
    eps_list: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Any other key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn resolve(&self, sub: &str) -> anyhow::Result<Settings> {
        let mut st = Settings::defaults(sub);
        if let Some(path) = &self.config {
            st.load_file(path)?;
        }
        let flags = [
            ("d", &self.d),
            ("m", &self.m),
            ("grid", &self.grid),
            ("extent", &self.extent),
            ("n", &self.n),
            ("T", &self.t_end),
            ("flavor", &self.flavor),
            ("domain", &self.domain),
            ("count", &self.count),
            ("eps_list", &self.eps_list),
            ("seed", &self.seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                st.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| invalid(format!("--set '{kv}': expected KEY=VALUE")))?;
            st.set(k.trim(), v)?;
        }
        Ok(st)
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<Invalid>().is_some() {
        return 2;
    }
    match e.downcast_ref::<nlkfp::Error>() {
        Some(nlkfp::Error::Range { .. } | nlkfp::Error::Value(_) | nlkfp::Error::Domain(_)) => 2,
        _ => 1,
    }
}

/// `--out` from raw arguments, for the manifest of a run whose flags did not parse.
fn raw_out(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = it.next() {
        if a == "--out" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--out=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn run(args: Vec<OsString>) -> i32 {
    let started = unix_now();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code != 0 {
                if let Some(dir) = raw_out(&args) {
                    let sub = args.get(1).map(|a| a.to_string_lossy().into_owned()).unwrap_or_default();
                    let m = Manifest {
                        sub: &sub,
                        settings: None,
                        started,
                        finished: unix_now(),
                        error: Some((2, e.to_string())),
                        constants: &[],
                        files: &[],
                    };
                    let _ = m.write(&dir);
                }
            }
            return code;
        }
    };
    let (sub, common) = cli.cmd.parts();
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("out").join(sub));
    let settings = common.resolve(sub);
    let mut out = match OutDir::create(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 1;
        }
    };
    let result = settings.as_ref().map_err(|e| anyhow::anyhow!("{e:#}")).and_then(|st| {
        match sub {
            "params" => commands::params_cmd(st, &mut out),
            "profile" => commands::profile_cmd(st, &mut out),
            "fig1" => commands::fig1_cmd(st, &mut out),
            "evolve" => commands::evolve_cmd(st, &mut out),
            "converge" => commands::converge_cmd(st, &mut out),
            "spectrum" => commands::spectrum_cmd(st, &mut out),
            _ => commands::difflimit_cmd(st, &mut out),
        }
    });
    let (code, constants, error) = match (&settings, result) {
        (Err(e), _) => (exit_code(e), Vec::new(), Some(format!("{e:#}"))),
        (Ok(_), Ok(c)) => (0, c, None),
        (Ok(_), Err(e)) => (exit_code(&e), Vec::new(), Some(format!("{e:#}"))),
    };
    if let Some(msg) = &error {
        eprintln!("error: {msg}");
    }
    let m = Manifest {
        sub,
        settings: settings.as_ref().ok(),
        started,
        finished: unix_now(),
        error: error.map(|msg| (code, msg)),
        constants: &constants,
        files: out.files(),
    };
    if let Err(e) = m.write(&dir) {
        eprintln!("error: writing manifest: {e:#}");
        return 1;
    }
    code
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os().collect()) as u8)
}
