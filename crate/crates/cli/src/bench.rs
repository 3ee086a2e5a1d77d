//! Benchmark sweeps. One CSV row per (backend, length, sparseness, K, n)
//! point; wall time is the mean over repetitions on the same trace.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use aggtl::checker::{check, Backend, Verdict};
use aggtl::formula::{parse_formula, Formula};
use aggtl::trace::{generate_trace, GeneratorConfig, PairSpec, TimedWord};
use clap::Args;

use crate::{emit, settings, BackendChoice, EncodingArgs, Failure, SolverArgs, EXIT_HOLDS};

pub const CSV_HEADER: &str = "run_id,backend,trace_length,sparseness,K,n,wall_time_ms,verdict";

#[derive(Args)]
pub struct BenchArgs {
    /// Formula template; `{K}` and `{n}` are replaced by the swept values.
    #[arg(short, long)]
    formula: String,
    /// Trace lengths as values or inclusive ranges `start..end:step`.
    #[arg(long, value_delimiter = ',', default_value = "100..2000:100")]
    lengths: Vec<String>,
    /// Window sizes substituted for `{K}`.
    #[arg(
        short = 'K',
        long = "windows",
        value_delimiter = ',',
        default_value = "100"
    )]
    windows: Vec<String>,
    /// Bounds substituted for `{n}`.
    #[arg(
        short = 'n',
        long = "bounds",
        value_delimiter = ',',
        default_value = "30"
    )]
    bounds: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    sparseness: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads running sweep points concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(short, long, value_enum, default_value_t = BackendChoice::Counters)]
    backend: BackendChoice,
    /// Longest generated start/end pair.
    #[arg(long, default_value_t = 20)]
    max_duration: u64,
    #[command(flatten)]
    solver: SolverArgs,
}

/// Expands `100`, `100..2000:100` style items.
pub fn expand_values(items: &[String]) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for item in items.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let bad = || format!("bad sweep value `{item}`");
        match item.split_once("..") {
            None => out.push(item.parse().map_err(|_| bad())?),
            Some((start, rest)) => {
                let (end, step) = rest.split_once(':').unwrap_or((rest, "1"));
                let (start, end, step): (u64, u64, u64) = (
                    start.parse().map_err(|_| bad())?,
                    end.parse().map_err(|_| bad())?,
                    step.parse().map_err(|_| bad())?,
                );
                if step == 0 {
                    return Err(bad());
                }
                out.extend((start..=end).step_by(step as usize));
            }
        }
    }
    Ok(out)
}

struct Point {
    run_id: usize,
    backend: Backend,
    length: u64,
    sparseness: f64,
    window: u64,
    bound: u64,
}

/// Trace over the atoms of `f`: distance pairs alternate, other atoms fill.
fn trace_for(
    f: &Formula,
    length: u64,
    sparseness: f64,
    seed: u64,
    max_duration: u64,
) -> Result<TimedWord, Failure> {
    let pairs = f.dist_pairs();
    let paired: Vec<&String> = pairs.iter().flat_map(|(s, e)| [s, e]).collect();
    let mut atoms: Vec<(String, f64)> = f
        .atoms()
        .into_iter()
        .filter(|a| !paired.contains(&a))
        .map(|a| (a, 0.5))
        .collect();
    if atoms.is_empty() {
        atoms.push(("idle".into(), 1.0));
    }
    let cfg = GeneratorConfig {
        seed,
        horizon: length,
        sparseness,
        atoms,
        pairs: pairs
            .into_iter()
            .map(|(start, end)| PairSpec {
                start,
                end,
                min_duration: 0,
                max_duration,
            })
            .collect(),
    };
    generate_trace(&cfg).map_err(|e| Failure::input(e.to_string()))
}

fn instantiate(template: &str, window: u64, bound: u64) -> Result<Formula, Failure> {
    let text = template
        .replace("{K}", &window.to_string())
        .replace("{n}", &bound.to_string());
    parse_formula(&text).map_err(|e| Failure::input(format!("formula `{text}`: {e}")))
}

pub fn run(args: &BenchArgs) -> Result<u8, Failure> {
    let lengths = expand_values(&args.lengths).map_err(Failure::input)?;
    let windows = expand_values(&args.windows).map_err(Failure::input)?;
    let bounds = expand_values(&args.bounds).map_err(Failure::input)?;
    if lengths.is_empty()
        || windows.is_empty()
        || bounds.is_empty()
        || args.sparseness.is_empty()
        || args.reps == 0
    {
        return Err(Failure::input(
            "empty sweep: every sweep list and --reps must be non-empty",
        ));
    }
    if args.jobs == 0 {
        return Err(Failure::input("--jobs must be at least 1"));
    }
    let settings = settings(
        false,
        &args.solver,
        &EncodingArgs {
            optimized: false,
            kmax: None,
        },
    )?;

    let mut points = Vec::new();
    for backend in args.backend.backends() {
        for &length in &lengths {
            for &sparseness in &args.sparseness {
                for &window in &windows {
                    for &bound in &bounds {
                        points.push(Point {
                            run_id: points.len(),
                            backend,
                            length,
                            sparseness,
                            window,
                            bound,
                        });
                    }
                }
            }
        }
    }
    for &w in &windows {
        for &n in &bounds {
            instantiate(&args.formula, w, n)?;
        }
    }

    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<Result<String, Failure>>>> =
        Mutex::new((0..points.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..args.jobs.min(points.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(point) = points.get(k) else { break };
                let row = measure(args, point, &settings);
                rows.lock().expect("row table")[k] = Some(row);
            });
        }
    });

    let mut out = vec![CSV_HEADER.to_owned()];
    for row in rows.into_inner().expect("row table") {
        out.push(row.expect("every point measured")?);
    }
    emit(&(out.join("\n") + "\n"));
    Ok(EXIT_HOLDS)
}

fn measure(
    args: &BenchArgs,
    p: &Point,
    settings: &aggtl::CheckSettings,
) -> Result<String, Failure> {
    let f = instantiate(&args.formula, p.window, p.bound)?;
    let seed = args.seed ^ p.length.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ p.sparseness.to_bits();
    let trace = trace_for(&f, p.length, p.sparseness, seed, args.max_duration)?;
    let instant = trace.last_timestamp();
    let mut total = 0.0;
    let mut verdict = Verdict::Holds;
    for _ in 0..args.reps {
        let report = check(&f, &trace, instant, p.backend, settings)?;
        total += report.wall_ms;
        verdict = report.verdict;
    }
    Ok(format!(
        "{},{},{},{},{},{},{:.3},{}",
        p.run_id,
        p.backend,
        p.length,
        p.sparseness,
        p.window,
        p.bound,
        total / args.reps as f64,
        verdict
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn sweep_values() {
        assert_eq!(
            expand_values(&items(&["100..500:200", "7"])).unwrap(),
            vec![100, 300, 500, 7]
        );
        assert_eq!(expand_values(&items(&["3..5"])).unwrap(), vec![3, 4, 5]);
        assert!(expand_values(&items(&["5..3:1"])).unwrap().is_empty());
        assert!(expand_values(&items(&["1..4:0"])).is_err());
        assert!(expand_values(&items(&["x"])).is_err());
    }
}
