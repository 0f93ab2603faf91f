//! Reduced versus brute-force verification over an `(n, m)` grid.

use std::time::Instant;

use catdp::{
    naive_check_count, verify_bruteforce, verify_reduced, Budget, CategorySpace, ExponentialSpec,
    PrivacyParams, UtilityFunction, UtilityTable, VerificationReport,
};
use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};

use crate::commands::emit;
use crate::{BenchArgs, Failure, Format};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchUtility {
    Hamming,
    L1,
    /// Random utility table in `[-2, 0]`, seeded per grid point.
    Table,
}

impl BenchUtility {
    fn name(self) -> &'static str {
        match self {
            BenchUtility::Hamming => "hamming",
            BenchUtility::L1 => "l1",
            BenchUtility::Table => "table",
        }
    }
}

fn parse_point(text: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure {
        status: 2,
        message: format!("grid point {text:?} is not n:m"),
    };
    let (n, m) = text.trim().split_once(':').ok_or_else(bad)?;
    Ok((n.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?))
}

fn build(
    args: &BenchArgs,
    n: usize,
    m: usize,
    budget: &Budget,
) -> catdp::Result<ExponentialSpec> {
    let space = CategorySpace::indexed(m)?;
    let utility = match args.utility {
        BenchUtility::Hamming => UtilityFunction::hamming(args.k.unwrap_or(args.epsilon))?,
        BenchUtility::L1 => UtilityFunction::NegativeL1 { scale: args.scale },
        BenchUtility::Table => {
            let universe = space.universe(n);
            let size = budget.check_databases(universe)?;
            let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
            rng.set_stream(((n as u64) << 32) | m as u64);
            let rows = (0..size)
                .map(|_| (0..size).map(|_| -2.0 * rng.random::<f64>()).collect())
                .collect();
            UtilityFunction::Table(UtilityTable::new(universe, rows)?)
        }
    };
    Ok(ExponentialSpec::new(space, n, utility)?.with_budget(*budget))
}

fn timed(
    f: impl FnOnce() -> catdp::Result<VerificationReport>,
) -> (catdp::Result<VerificationReport>, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn row(args: &BenchArgs, n: usize, m: usize, params: PrivacyParams, budget: &Budget) -> Value {
    let mut out = json!({
        "n": n,
        "m": m,
        "utility": args.utility.name(),
        "epsilon": params.epsilon,
        "delta": params.delta,
    });
    let naive = CategorySpace::indexed(m).and_then(|s| naive_check_count(&s, n));
    out["checks_naive"] = naive.map(|c| Value::from(c.to_string())).unwrap_or(Value::Null);
    let spec = match build(args, n, m, budget) {
        Ok(spec) => spec,
        Err(e) => {
            out["status"] = "skipped".into();
            out["reason"] = e.to_string().into();
            return out;
        }
    };
    let (reduced, reduced_secs) = timed(|| verify_reduced(&spec, params, budget));
    let reduced = match reduced {
        Ok(r) => r,
        Err(e) => {
            out["status"] = "skipped".into();
            out["reason"] = e.to_string().into();
            return out;
        }
    };
    out["status"] = "ok".into();
    out["verdict"] = if reduced.is_private() { "private" } else { "not-private" }.into();
    out["method"] = reduced.method.as_str().into();
    out["checks_reduced"] = reduced.checks_performed.to_string().into();
    out["reduced_secs"] = reduced_secs.into();
    let (brute, brute_secs) = timed(|| verify_bruteforce(&spec, params, budget));
    match brute {
        Ok(b) => {
            out["checks_brute"] = b.checks_performed.to_string().into();
            out["brute_secs"] = brute_secs.into();
            out["speedup"] = (brute_secs / reduced_secs.max(1e-9)).into();
            out["agree"] = (b.verdict == reduced.verdict
                && (b.margin - reduced.margin).abs() <= 1e-12)
                .into();
        }
        Err(e) => {
            out["brute"] = "skipped".into();
            out["reason"] = e.to_string().into();
        }
    }
    out
}

const COLUMNS: [&str; 13] = [
    "n",
    "m",
    "utility",
    "status",
    "verdict",
    "method",
    "checks_naive",
    "checks_reduced",
    "checks_brute",
    "reduced_secs",
    "brute_secs",
    "speedup",
    "agree",
];

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Number(x) => match x.as_f64() {
            Some(f) if x.is_f64() => format!("{f:.6}"),
            _ => x.to_string(),
        },
        other => other.to_string(),
    }
}

/// One JSON object per line (`--format json`) or a tab-separated table.
pub fn run(args: &BenchArgs) -> Result<u8, Failure> {
    let params = PrivacyParams::new(args.epsilon, args.delta)?;
    let budget = args.common.budget();
    let points = args
        .grid
        .iter()
        .map(|p| parse_point(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut text = String::new();
    if args.common.format == Format::Table {
        text.push_str(&COLUMNS.join("\t"));
        text.push('\n');
    }
    for (n, m) in points {
        let r = row(args, n, m, params, &budget);
        match args.common.format {
            Format::Json => text.push_str(&format!("{r}\n")),
            Format::Table => {
                let cells: Vec<String> = COLUMNS.iter().map(|c| cell(&r[*c])).collect();
                text.push_str(&cells.join("\t"));
                text.push('\n');
            }
        }
    }
    emit(&text, None)?;
    Ok(0)
}
