//! Command-line interface.
//!
//! Subcommands: `gen`, `bloch`, `invariants`, `reduce`, `quotient-coords`,
//! `verify`. States travel as JSON on files or stdin/stdout, so commands
//! compose in pipes (`xstates gen --x-state | xstates reduce`). All
//! randomness is seeded; identical invocations produce byte-identical
//! output. Exit codes: 0 success, 1 verification or reduction failure,
//! 2 usage or input errors.

use std::io::Read;

use serde_json::Value;

use crate::bloch::{all_words, from_bloch, to_bloch, BlochState};
use crate::error::{Error, Result};
use crate::geometry::{random_xstate, reduce_to_section2, section_embed2, truncate_to_xt};
use crate::invariants::{p_invariants, quotient_coords};
use crate::json;
use crate::rng::SeededRng;
use crate::verify::{self, SuiteReport, ToleranceConfig};

const USAGE: &str = "\
xstates - multi-qubit X-state toolkit

USAGE:
  xstates gen [--n N] [--seed S] [--x-state] [--output PATH]
  xstates bloch [--input PATH] [--output PATH]
  xstates invariants [--input PATH] [--output PATH]
  xstates reduce [--input PATH] [--tol T] [--output PATH]
  xstates quotient-coords [--input PATH] [--output PATH]
  xstates verify [SUITE ...] [--n N] [--seed S] [--trials T] [--deep]
                 [--json] [--tol T] [--fd-step H] [--rank-tol R]
                 [--output PATH]

SUBCOMMANDS:
  gen              Sample a random state (--x-state: a random X-state)
  bloch            Convert between the matrix and Bloch JSON formats
  invariants       Five polynomial invariants of a 2-qubit state
  reduce           Carry a generic 2-qubit X-state onto the section
  quotient-coords  Tilde coordinates of a fiber-supported state
  verify           Run verification suites; exit 0 iff all pass

VERIFY SUITES:
  dims independence invariance pattern relations separation torsor all

OPTIONS:
  --n N         Qubit count (gen default 2; verify default 2,3)
  --seed S      Random seed (default 1)
  --trials T    Trial count override for every suite
  --deep        Also run n = 4 suites
  --json        Emit verify reports as a JSON array
  --tol T       Residual tolerance (reduce genericity / verify residuals)
  --fd-step H   Finite-difference step (default 1e-6)
  --rank-tol R  Relative singular-value threshold (default 1e-6)
  --input PATH  Input file (default: stdin)
  --output PATH Output file (default: stdout)

States read from files or stdin may be in either JSON format:
  {\"n\": .., \"components\": {\"XX\": [re, im], ..}}
  {\"n\": .., \"matrix\": [[[re, im], ..], ..]}
";

#[derive(Debug, Clone)]
struct CommonOpts {
    n: Option<u32>,
    seed: u64,
    trials: Option<u32>,
    tol: Option<f64>,
    fd_step: Option<f64>,
    rank_tol: Option<f64>,
    input: Option<String>,
    output: Option<String>,
    x_state: bool,
    deep: bool,
    json: bool,
    positional: Vec<String>,
}

fn parse_opts(args: &[String]) -> std::result::Result<CommonOpts, String> {
    let mut o = CommonOpts {
        n: None,
        seed: 1,
        trials: None,
        tol: None,
        fd_step: None,
        rank_tol: None,
        input: None,
        output: None,
        x_state: false,
        deep: false,
        json: false,
        positional: Vec::new(),
    };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut take = |name: &str| -> std::result::Result<String, String> {
            it.next()
                .cloned()
                .ok_or_else(|| format!("{name} requires a value"))
        };
        match arg.as_str() {
            "--n" => {
                o.n = Some(
                    take("--n")?
                        .parse::<u32>()
                        .map_err(|_| "--n expects a positive integer".to_string())?,
                )
            }
            "--seed" => {
                o.seed = take("--seed")?
                    .parse::<u64>()
                    .map_err(|_| "--seed expects an unsigned integer".to_string())?
            }
            "--trials" => {
                let t = take("--trials")?
                    .parse::<u32>()
                    .map_err(|_| "--trials expects a positive integer".to_string())?;
                if t == 0 {
                    return Err("--trials must be at least 1".into());
                }
                o.trials = Some(t)
            }
            "--tol" => {
                o.tol = Some(
                    take("--tol")?
                        .parse::<f64>()
                        .map_err(|_| "--tol expects a number".to_string())?,
                )
            }
            "--fd-step" => {
                o.fd_step = Some(
                    take("--fd-step")?
                        .parse::<f64>()
                        .map_err(|_| "--fd-step expects a number".to_string())?,
                )
            }
            "--rank-tol" => {
                o.rank_tol = Some(
                    take("--rank-tol")?
                        .parse::<f64>()
                        .map_err(|_| "--rank-tol expects a number".to_string())?,
                )
            }
            "--input" => o.input = Some(take("--input")?),
            "--output" => o.output = Some(take("--output")?),
            "--x-state" => o.x_state = true,
            "--deep" => o.deep = true,
            "--json" => o.json = true,
            other if other.starts_with("--") => {
                return Err(format!("unknown flag {other}"));
            }
            other => o.positional.push(other.to_string()),
        }
    }
    Ok(o)
}

fn read_input(input: &Option<String>) -> Result<Value> {
    let text = match input {
        Some(path) if path != "-" => std::fs::read_to_string(path)?,
        _ => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            buf
        }
    };
    Ok(serde_json::from_str(&text)?)
}

fn write_output(output: &Option<String>, text: &str) -> Result<()> {
    match output {
        Some(path) if path != "-" => std::fs::write(path, format!("{text}\n"))?,
        _ => println!("{text}"),
    }
    Ok(())
}

fn cmd_gen(o: &CommonOpts) -> Result<()> {
    let n = o.n.unwrap_or(2) as usize;
    if n == 0 {
        return Err(Error::InvalidArgument("--n must be at least 1".into()));
    }
    let state = if o.x_state {
        random_xstate(n, o.seed)?.0
    } else {
        let mut rng = SeededRng::new(o.seed);
        let mut b = BlochState::new(n)?;
        for w in all_words(n) {
            b.insert(w, rng.complex_normal(1.0))?;
        }
        b
    };
    write_output(&o.output, &serde_json::to_string(&json::bloch_to_value(&state))?)
}

fn cmd_bloch(o: &CommonOpts) -> Result<()> {
    let value = read_input(&o.input)?;
    let out = match json::state_from_value(&value)? {
        json::StateValue::Bloch(b) => json::density_to_value(&from_bloch(&b)),
        json::StateValue::Density(d) => json::bloch_to_value(&to_bloch(&d)?),
    };
    write_output(&o.output, &serde_json::to_string(&out)?)
}

fn cmd_invariants(o: &CommonOpts) -> Result<()> {
    let b = json::state_as_bloch(&read_input(&o.input)?)?;
    let inv = p_invariants(&b)?;
    write_output(&o.output, &serde_json::to_string(&json::invariants_to_value(&inv))?)
}

fn cmd_reduce(o: &CommonOpts) -> Result<()> {
    let b = json::state_as_bloch(&read_input(&o.input)?)?;
    let tol = o.tol.unwrap_or(1e-8);
    let (g, s) = reduce_to_section2(&b, tol)?;
    let residual =
        g.act(&b)?.max_difference(&section_embed2(&s)) / b.max_component().max(1e-300);
    let out = serde_json::json!({
        "section": json::section_to_value(&s),
        "g": json::rotation_to_value(&g),
        "residual": residual,
    });
    write_output(&o.output, &serde_json::to_string(&out)?)
}

fn cmd_quotient(o: &CommonOpts) -> Result<()> {
    let fiber = json::fiber_from_value(&read_input(&o.input)?)?;
    let q = quotient_coords(&truncate_to_xt(&fiber)?);
    write_output(&o.output, &serde_json::to_string(&json::quotient_to_value(&q))?)
}

/// Default trial counts per suite.
fn default_trials(suite: &str) -> u32 {
    match suite {
        "dims" => 20,
        "independence" => 20,
        "invariance" => 100,
        "pattern" => 1000,
        "relations" => 100,
        "separation" => 200,
        "torsor" => 1000,
        _ => 20,
    }
}

fn cmd_verify(o: &CommonOpts) -> Result<bool> {
    let mut suites: Vec<String> = if o.positional.is_empty() {
        vec!["all".into()]
    } else {
        o.positional.clone()
    };
    if suites.iter().any(|s| s == "all") {
        suites = verify::suite_names().iter().map(|s| s.to_string()).collect();
    }
    suites.sort();
    suites.dedup();
    for s in &suites {
        if !verify::suite_names().contains(&s.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown suite '{s}' (expected one of {:?} or 'all')",
                verify::suite_names()
            )));
        }
    }

    let ns: Vec<u32> = match o.n {
        Some(n) => vec![n],
        None => {
            let mut v = vec![2, 3];
            if o.deep {
                v.push(4);
            }
            v
        }
    };

    let mut cfg_base = ToleranceConfig {
        seed: o.seed,
        ..ToleranceConfig::default()
    };
    if let Some(t) = o.tol {
        cfg_base.residual_tol = t;
    }
    if let Some(h) = o.fd_step {
        cfg_base.fd_step = h;
    }
    if let Some(r) = o.rank_tol {
        cfg_base.rank_rel_tol = r;
    }

    let mut reports: Vec<SuiteReport> = Vec::new();
    for suite in &suites {
        let cfg = |trials: u32| ToleranceConfig {
            trials,
            ..cfg_base
        };
        let trials = o.trials.unwrap_or_else(|| default_trials(suite));
        match suite.as_str() {
            "dims" => {
                for &n in ns.iter().filter(|n| (2..=4).contains(*n)) {
                    reports.push(verify::suite_dims(n, &cfg(trials))?);
                }
            }
            "independence" => {
                for &n in ns.iter().filter(|n| **n >= 2) {
                    reports.push(verify::suite_independence(n, &cfg(trials))?);
                }
            }
            "invariance" => {
                for &n in ns.iter().filter(|n| **n >= 2) {
                    reports.push(verify::suite_invariance(n, &cfg(trials))?);
                }
            }
            "pattern" => {
                for &n in &ns {
                    reports.push(verify::suite_pattern(n, &cfg(trials))?);
                }
            }
            "relations" => {
                for &n in ns.iter().filter(|n| **n >= 2) {
                    reports.push(verify::suite_relations(n, &cfg(trials))?);
                }
            }
            "separation" => {
                if ns.contains(&2) {
                    reports.push(verify::suite_separation2(&cfg(trials))?);
                }
            }
            "torsor" => {
                reports.push(verify::suite_torsor(&cfg(trials))?);
            }
            _ => unreachable!("validated above"),
        }
    }

    let all_pass = reports.iter().all(|r| r.pass);
    if o.json {
        write_output(&o.output, &serde_json::to_string(&reports)?)?;
    } else {
        let mut lines: Vec<String> = reports.iter().map(|r| r.summary_line()).collect();
        lines.push(format!(
            "verify: {}/{} suite runs passed",
            reports.iter().filter(|r| r.pass).count(),
            reports.len()
        ));
        write_output(&o.output, &lines.join("\n"))?;
    }
    Ok(all_pass)
}

/// Entry point; returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    let Some(command) = args.first() else {
        eprintln!("{USAGE}");
        return 2;
    };
    let opts = match parse_opts(&args[1..]) {
        Ok(o) => o,
        Err(msg) => {
            eprintln!("error: {msg}");
            eprintln!("{USAGE}");
            return 2;
        }
    };

    let outcome: Result<i32> = match command.as_str() {
        "gen" => cmd_gen(&opts).map(|()| 0),
        "bloch" => cmd_bloch(&opts).map(|()| 0),
        "invariants" => cmd_invariants(&opts).map(|()| 0),
        "reduce" => cmd_reduce(&opts).map(|()| 0),
        "quotient-coords" => cmd_quotient(&opts).map(|()| 0),
        "verify" => cmd_verify(&opts).map(|ok| if ok { 0 } else { 1 }),
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            Ok(0)
        }
        other => {
            eprintln!("error: unknown command '{other}'");
            eprintln!("{USAGE}");
            return 2;
        }
    };

    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                // Mathematical failures on well-formed input.
                Error::ReductionFailed { .. }
                | Error::NotGeneric(_)
                | Error::Degenerate(_)
                | Error::NotSameOrbit
                | Error::LocalizationViolated(_)
                | Error::DegenerateSample => 1,
                // Bad input or usage.
                _ => 2,
            }
        }
    }
}
