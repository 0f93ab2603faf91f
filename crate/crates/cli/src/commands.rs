use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use catdp::analysis::error_profile;
use catdp::exact::{parse_rational, verify_bruteforce_exact, verify_reduced_exact, ExactParams, ExactReport};
use catdp::formats::{CsvTable, SpecFile};
use catdp::{
    optimal_mechanism, verify_bruteforce, verify_reduced, CategorySpace, Mechanism, PrivacyParams,
    UtilityKind,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use crate::{AnalyzeArgs, ConvertArgs, Failure, Format, OptimalArgs, SanitizeArgs, VerifyArgs};

pub fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialise");
    s.push('\n');
    s
}

fn params(epsilon: f64, delta: f64) -> Result<PrivacyParams, Failure> {
    Ok(PrivacyParams::new(epsilon, delta)?)
}

pub fn verify(args: &VerifyArgs) -> Result<u8, Failure> {
    let spec_file = SpecFile::read(&args.spec)?;
    let budget = args.common.budget();
    if args.exact || args.exp_epsilon.is_some() {
        let exp_epsilon = match (&args.exp_epsilon, args.epsilon) {
            (Some(e), _) => parse_rational(e)?,
            (None, Some(0.0)) => BigRational::from_integer(BigInt::from(1)),
            _ => {
                return Err(Failure {
                    status: 2,
                    message: "--exact needs e^ε as a rational: pass --exp-epsilon".into(),
                })
            }
        };
        let exact = ExactParams::new(exp_epsilon, parse_rational(&args.delta)?)?;
        let mech = spec_file.build_exact()?;
        let report = if args.bruteforce {
            verify_bruteforce_exact(&mech, &exact, &budget)?
        } else {
            verify_reduced_exact(&mech, &exact, &budget)?
        };
        let text = match args.common.format {
            Format::Json => json_text(&report.to_json(mech.space())),
            Format::Table => exact_table(&report, mech.space()),
        };
        emit(&text, None)?;
        return Ok(if report.private { 0 } else { 1 });
    }

    let delta = parse_rational(&args.delta)
        .ok()
        .and_then(|d| d.to_f64())
        .ok_or_else(|| Failure {
            status: 2,
            message: format!("invalid --delta {:?}", args.delta),
        })?;
    let params = params(args.epsilon.unwrap_or(0.0), delta)?;
    let spec = spec_file.build(&budget)?;
    let report = if args.bruteforce {
        verify_bruteforce(&spec, params, &budget)?
    } else {
        verify_reduced(&spec, params, &budget)?
    };
    let text = match args.common.format {
        Format::Json => json_text(&report.to_json(spec.space())),
        Format::Table => report.to_table(spec.space()),
    };
    emit(&text, None)?;
    Ok(if report.is_private() { 0 } else { 1 })
}

fn exact_table(report: &ExactReport, space: &CategorySpace) -> String {
    let mut out = String::new();
    let verdict = if report.private { "private" } else { "not private" };
    let _ = writeln!(out, "verdict           {verdict}");
    let _ = writeln!(out, "method            {}", report.method.as_str());
    let _ = writeln!(out, "margin            {}", report.margin);
    let _ = writeln!(out, "checks performed  {}", report.checks_performed);
    if let Some(naive) = &report.checks_naive {
        let _ = writeln!(out, "checks naive      {naive}");
    }
    if let Some(p) = &report.binding_pair {
        let _ = writeln!(
            out,
            "binding pair      ({}) vs ({})",
            p.d.labels(space).join(","),
            p.d_prime.labels(space).join(",")
        );
    }
    out
}

pub fn sanitize(args: &SanitizeArgs) -> Result<u8, Failure> {
    let mut spec_file = SpecFile::read(&args.spec)?;
    let space = spec_file.space()?;
    let mut table = CsvTable::read(&args.data, !args.no_header)?;
    let column = table.column_index(args.column.as_deref())?;
    let input = table.database(&space, column)?;
    if spec_file.utility == Some(UtilityKind::Table) {
        if input.n() != spec_file.n {
            return Err(Failure {
                status: 2,
                message: format!(
                    "table utility fixes n = {}, data has {} rows",
                    spec_file.n,
                    input.n()
                ),
            });
        }
    } else {
        spec_file.n = input.n();
    }
    let spec = spec_file.build(&args.common.budget())?;
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let output = spec.sample(&input, &mut rng)?;
    table.replace_column(&space, column, &output)?;
    emit(&table.to_csv()?, args.output.as_deref())?;
    Ok(0)
}

pub fn analyze(args: &AnalyzeArgs) -> Result<u8, Failure> {
    let spec = SpecFile::read(&args.spec)?.build(&args.common.budget())?;
    let params = params(args.epsilon, args.delta)?;
    let profile = error_profile(&spec, params, &args.common.budget())?;
    let optimal = optimal_mechanism(params, spec.space().m())?;
    let optimal_error = spec.n() as f64 * spec.space().m() as f64 * optimal.p;
    let text = match args.common.format {
        Format::Json => json_text(&json!({
            "n": spec.n(),
            "m": spec.space().m(),
            "epsilon": params.epsilon,
            "delta": params.delta,
            "expected_error": profile.expected_error,
            "per_row_error": profile.per_row_error,
            "bounds": profile.bounds,
            "optimal_p": optimal.p,
            "optimal_error": optimal_error,
        })),
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "n                 {}", spec.n());
            let _ = writeln!(s, "m                 {}", spec.space().m());
            let _ = writeln!(s, "expected error    {}", profile.expected_error);
            let _ = writeln!(s, "per-row error     {}", profile.per_row_error);
            let _ = writeln!(s, "lower bound       {}", profile.bounds.lower);
            let _ = writeln!(s, "upper bound       {}", profile.bounds.upper);
            let _ = writeln!(s, "optimal p         {}", optimal.p);
            let _ = writeln!(s, "optimal error     {optimal_error}");
            s
        }
    };
    emit(&text, None)?;
    Ok(0)
}

pub fn convert(args: &ConvertArgs) -> Result<u8, Failure> {
    let converted = SpecFile::read(&args.spec)?.converted()?;
    emit(&converted.to_text(), args.output.as_deref())?;
    Ok(0)
}

pub fn optimal(args: &OptimalArgs) -> Result<u8, Failure> {
    let m = match (&args.spec, args.m) {
        (Some(path), _) => SpecFile::read(path)?.space()?.m(),
        (None, Some(m)) => m,
        (None, None) => unreachable!("clap requires --m or --spec"),
    };
    let params = params(args.epsilon, args.delta)?;
    let optimal = optimal_mechanism(params, m)?;
    let csv = optimal.matrix.to_csv();
    if let Some(path) = &args.csv {
        emit(&csv, Some(path))?;
    }
    let text = match args.common.format {
        Format::Json => json_text(&json!({
            "epsilon": params.epsilon,
            "delta": params.delta,
            "m": m,
            "p": optimal.p,
            "degenerate": optimal.degenerate,
            "per_row_error": m as f64 * optimal.p,
            "matrix": optimal.matrix.rows(),
        })),
        Format::Table => csv,
    };
    emit(&text, None)?;
    Ok(0)
}
