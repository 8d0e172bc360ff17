mod args;
mod render;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use exwkb::chi::ChiOptions;
use exwkb::connection::{barrier_amplitudes_with, bound_states_with, resonances_with};
use exwkb::oracle;
use exwkb::potential::Poly;
use exwkb::{build_effective_q, coulomb_levels, coulomb_phase, Complex64, Mode, RationalPotential, ResonanceMethod, SolverOptions};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use args::{Cli, Command, Format, MethodArg, ModeArg, Problem};
use render::{complex, num, round_json};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] exwkb::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Deserialize)]
#[serde(untagged)]
enum Coef {
    Real(f64),
    Pair([f64; 2]),
}

#[derive(Deserialize)]
struct PotentialJson {
    num: Vec<Coef>,
    den: Vec<Coef>,
    label: Option<String>,
}

fn poly(coefs: &[Coef]) -> Poly {
    Poly::new(
        coefs
            .iter()
            .map(|c| match *c {
                Coef::Real(re) => Complex64::new(re, 0.0),
                Coef::Pair([re, im]) => Complex64::new(re, im),
            })
            .collect(),
    )
}

/// `coulomb:alpha=2,l=1`; `l` defaults to 0.
fn coulomb_params(params: &str, hbar: f64) -> Result<RationalPotential> {
    let (mut alpha, mut l) = (None, 0u32);
    for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
        let bad = || CliError::Usage(format!("bad coulomb parameter `{kv}` (use alpha=<float>,l=<int>)"));
        let (k, v) = kv.split_once('=').ok_or_else(bad)?;
        match k.trim() {
            "alpha" => alpha = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
            "l" => l = v.trim().parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        }
    }
    match alpha {
        Some(a) if a > 0.0 => Ok(RationalPotential::coulomb(a, l, hbar)),
        _ => Err(CliError::Usage("coulomb needs alpha > 0, e.g. coulomb:alpha=2,l=0".into())),
    }
}

fn potential(desc: &str, hbar: f64) -> Result<RationalPotential> {
    match desc.trim() {
        "double-hump" => Ok(RationalPotential::double_hump()),
        "harmonic" => Ok(RationalPotential::harmonic()),
        s if s.starts_with("coulomb") => coulomb_params(s.trim_start_matches("coulomb").trim_start_matches(':'), hbar),
        s if s.starts_with('{') => {
            let p: PotentialJson = serde_json::from_str(s).map_err(|e| CliError::Usage(format!("bad potential JSON: {e}")))?;
            Ok(RationalPotential::new(poly(&p.num), poly(&p.den), p.label)?)
        }
        other => Err(CliError::Usage(format!("unknown potential `{other}` (use double-hump, harmonic, coulomb:alpha=..,l=.. or JSON)"))),
    }
}

fn mode(m: ModeArg) -> Mode {
    match m {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Jwkb => Mode::Jwkb,
    }
}

fn label(pot: &RationalPotential, desc: &str) -> String {
    pot.label.clone().unwrap_or_else(|| desc.to_string())
}

fn json_out(v: Value) -> String {
    let mut body = serde_json::to_string_pretty(&round_json(v)).expect("JSON values always serialize");
    body.push('\n');
    body
}

fn check_format(format: Format, allowed: &[Format], cmd: &str) -> Result<()> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("format {format:?} is not available for `{cmd}`").to_lowercase()))
    }
}

fn run(cli: &Cli) -> Result<String> {
    let options = SolverOptions { chi: ChiOptions { rtol: cli.rtol, atol: cli.atol, ..ChiOptions::default() }, ..SolverOptions::default() };
    if !(cli.rtol > 0.0 && cli.atol > 0.0) {
        return Err(CliError::Usage("tolerances must be positive".into()));
    }
    match &cli.command {
        Command::Graph(a) => {
            let format = cli.format.unwrap_or(Format::Svg);
            let pot = problem_potential(&a.problem)?;
            let q = build_effective_q(&pot, Complex64::new(a.energy, 0.0), a.problem.hbar)?;
            let g = exwkb::trace_graph_with(&q, options.graph, None)?;
            Ok(match format {
                Format::Svg => render::graph_svg(&g),
                Format::Csv => render::graph_csv(&g),
                Format::Json => json_out(json!({"command": "graph", "potential": label(&pot, &a.problem.potential), "graph": render::graph_json(&g)})),
            })
        }
        Command::Quantize(a) => {
            let format = cli.format.unwrap_or(Format::Json);
            check_format(format, &[Format::Json], "quantize")?;
            let pot = problem_potential(&a.problem)?;
            let h = a.problem.hbar;
            let levels = bound_states_with(&pot, h, a.window, mode(a.mode), options)?;
            let reference = a.verify.then(|| oracle::numerov_bound_states(&pot, h, a.window, oracle::DEFAULT_POINTS));
            let records: Vec<Value> = levels
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let mut v = json!({"energy": r.energy.re, "residual": r.residual, "method": r.method, "iterations": r.iterations});
                    if let Some(Ok(o)) = &reference {
                        if let Some(e) = o.get(k) {
                            v["oracle"] = json!(e);
                            v["abs_diff"] = json!((r.energy.re - e).abs());
                        }
                    }
                    v
                })
                .collect();
            let mut out = json!({
                "command": "quantize",
                "potential": label(&pot, &a.problem.potential),
                "hbar": h,
                "window": [a.window.0, a.window.1],
                "mode": mode(a.mode),
                "levels": records,
            });
            match reference {
                Some(Ok(o)) => out["oracle_levels"] = json!(o),
                Some(Err(e)) => out["oracle_error"] = error_json(&e),
                None => {}
            }
            Ok(json_out(out))
        }
        Command::Scatter(a) => {
            let format = cli.format.unwrap_or(Format::Json);
            check_format(format, &[Format::Json, Format::Csv], "scatter")?;
            let pot = problem_potential(&a.problem)?;
            let h = a.problem.hbar;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.jobs.max(1))
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", cli.jobs)))?;
            let rows: Vec<_> = pool.install(|| {
                a.energies
                    .par_iter()
                    .map(|&e| {
                        let s = barrier_amplitudes_with(&pot, h, e, mode(a.mode), options)?;
                        let o = a.verify.then(|| oracle::transmission(&pot, h, e));
                        Ok((s, o))
                    })
                    .collect::<std::result::Result<Vec<_>, exwkb::Error>>()
            })?;
            if format == Format::Csv {
                let mut body = String::from("E,R_re,R_im,T_re,T_im,T2,unitarity_defect");
                if a.verify {
                    body.push_str(",oracle_T2,abs_diff_T2");
                }
                body.push('\n');
                for (s, o) in &rows {
                    let t2 = s.t.norm_sqr();
                    body.push_str(
                        &[s.energy, s.r.re, s.r.im, s.t.re, s.t.im, t2, s.unitarity_defect].map(num).join(","),
                    );
                    match o {
                        Some(Ok(o)) => body.push_str(&format!(",{},{}", num(o.t2()), num((t2 - o.t2()).abs()))),
                        Some(Err(_)) => body.push_str(",,"),
                        None => {}
                    }
                    body.push('\n');
                }
                return Ok(body);
            }
            let records: Vec<Value> = rows
                .iter()
                .map(|(s, o)| {
                    let t2 = s.t.norm_sqr();
                    let mut v = json!({
                        "E": s.energy,
                        "regime": s.regime,
                        "R": complex(s.r),
                        "T": complex(s.t),
                        "T2": t2,
                        "unitarity_defect": s.unitarity_defect,
                    });
                    if let Some(j) = s.anti_stokes_integral {
                        v["anti_stokes_integral"] = complex(j);
                    }
                    match o {
                        Some(Ok(o)) => {
                            v["oracle"] = json!({"R": complex(o.r), "T": complex(o.t), "T2": o.t2()});
                            v["abs_diff_T2"] = json!((t2 - o.t2()).abs());
                        }
                        Some(Err(e)) => v["oracle_error"] = error_json(e),
                        None => {}
                    }
                    v
                })
                .collect();
            Ok(json_out(json!({
                "command": "scatter",
                "potential": label(&pot, &a.problem.potential),
                "hbar": h,
                "mode": mode(a.mode),
                "results": records,
            })))
        }
        Command::Resonance(a) => {
            let format = cli.format.unwrap_or(Format::Json);
            check_format(format, &[Format::Json], "resonance")?;
            let pot = problem_potential(&a.problem)?;
            let h = a.problem.hbar;
            let method = match a.method {
                MethodArg::ComplexRoot => ResonanceMethod::ComplexRoot,
                MethodArg::Perturbative => ResonanceMethod::Perturbative,
                MethodArg::Jwkb => ResonanceMethod::Jwkb,
            };
            let found = resonances_with(&pot, h, a.window, method, options)?;
            let records: Vec<Value> = found
                .iter()
                .map(|r| {
                    let mut v = serde_json::to_value(r).expect("plain data");
                    if a.verify {
                        // sample the peak on a window of ±50 widths
                        let w = (50.0 * r.gamma).max(1e-9 * (1.0 + r.e0.abs()));
                        match oracle::resonance_fit(&pot, h, (r.e0 - w, r.e0 + w)) {
                            Ok(f) => {
                                v["oracle"] = serde_json::to_value(f).expect("plain data");
                                v["abs_diff_gamma"] = json!((r.gamma - f.gamma).abs());
                                v["abs_diff_e0"] = json!((r.e0 - f.e0).abs());
                            }
                            Err(e) => v["oracle_error"] = error_json(&e),
                        }
                    }
                    v
                })
                .collect();
            Ok(json_out(json!({
                "command": "resonance",
                "potential": label(&pot, &a.problem.potential),
                "hbar": h,
                "window": [a.window.0, a.window.1],
                "resonances": records,
            })))
        }
        Command::Coulomb(a) => {
            let format = cli.format.unwrap_or(Format::Json);
            check_format(format, &[Format::Json], "coulomb")?;
            let head = json!({"command": "coulomb", "alpha": a.alpha, "l": a.l, "hbar": a.hbar});
            let mut out = head;
            if let Some(e) = a.energy {
                let p = coulomb_phase(a.alpha, a.l, a.hbar, e)?;
                out["E"] = json!(e);
                out["phase"] = serde_json::to_value(p).expect("plain data");
                return Ok(json_out(out));
            }
            if a.levels == 0 {
                return Err(CliError::Usage("--levels must be at least 1".into()));
            }
            let levels = coulomb_levels(a.alpha, a.l, a.hbar, a.levels - 1)?;
            let exact = oracle::coulomb_exact_levels(a.alpha, a.l, a.hbar, a.l + a.levels as u32);
            out["levels"] = levels
                .iter()
                .zip(&exact)
                .map(|(r, x)| {
                    let mut v = json!({"energy": r.energy.re, "residual": r.residual, "iterations": r.iterations});
                    if a.verify {
                        v["oracle"] = json!(x);
                        v["abs_diff"] = json!((r.energy.re - x).abs());
                    }
                    v
                })
                .collect();
            Ok(json_out(out))
        }
    }
}

fn problem_potential(p: &Problem) -> Result<RationalPotential> {
    if !(p.hbar > 0.0) {
        return Err(CliError::Usage(format!("--hbar must be positive, got {}", p.hbar)));
    }
    potential(&p.potential, p.hbar)
}

fn error_json(e: &exwkb::Error) -> Value {
    json!({"kind": e.kind(), "message": e.to_string()})
}

fn emit(cli: &Cli, body: &str) -> std::io::Result<()> {
    match &cli.output {
        Some(path) => std::fs::write(path, body),
        None => std::io::stdout().lock().write_all(body.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    // `graph` only: svg
    if let (Some(Format::Svg), false) = (cli.format, matches!(cli.command, Command::Graph(_))) {
        eprintln!("error: svg output is only available for `graph`");
        return ExitCode::from(1);
    }
    let result = run(&cli).and_then(|r| emit(&cli, &r).map_err(CliError::from));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Solver(e)) => {
            let body = serde_json::to_string_pretty(&json!({"error": error_json(&e)})).expect("plain data");
            println!("{body}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
