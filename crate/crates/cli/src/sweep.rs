use std::fs;

use mmg_core::metrics::{format_sig, summarize, SummaryReport};
use mmg_core::sim;
use rayon::prelude::*;

use crate::{io_failure, load, write_file, Failure, SweepArgs};

/// Worker count for sweeps; `MMG_SIM_THREADS` caps it.
fn pool() -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("MMG_SIM_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Failure::Invalid(format!("MMG_SIM_THREADS must be a positive integer, got `{raw}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Failure::Invalid(e.to_string()))
}

pub fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    if args.values.iter().all(|v| v.trim().is_empty()) {
        return Err(Failure::Invalid("sweep needs at least one value".into()));
    }
    // reject bad keys or values before spending time on any run
    let configs = args
        .values
        .iter()
        .map(|v| load(&args.scenario, &[format!("{}={}", args.param, v.trim())]).map(|c| (v.trim().to_string(), c)))
        .collect::<Result<Vec<_>, _>>()?;

    let results: Vec<(String, Result<SummaryReport, Failure>)> = pool()?.install(|| {
        configs
            .into_par_iter()
            .map(|(value, cfg)| {
                let r = sim::run(&cfg)
                    .map_err(Failure::from)
                    .and_then(|t| summarize(&t, &cfg).map_err(|e| Failure::Invalid(format!("summary: {e}"))));
                (value, r)
            })
            .collect()
    });

    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    let path = args.out.join("sweep.csv");
    write_file(&path, &to_csv(&args.param, &results)?)?;

    let worst = results.iter().filter_map(|(v, r)| r.as_ref().err().map(|e| (v, e))).max_by_key(|(_, e)| e.code());
    for (v, r) in &results {
        if let Err(e) = r {
            eprintln!("{}={v}: {e}", args.param);
        }
    }
    match worst {
        Some((_, e)) => Err(match e {
            Failure::Invalid(_) => Failure::Invalid(format!("some runs failed; partial results in {}", path.display())),
            Failure::Numeric(_) => Failure::Numeric(format!("some runs failed; partial results in {}", path.display())),
        }),
        None => {
            println!("{} rows written to {}", results.len(), path.display());
            Ok(())
        }
    }
}

/// One row per value: the parameter, a status, then every summary field.
fn to_csv(param: &str, rows: &[(String, Result<SummaryReport, Failure>)]) -> Result<Vec<u8>, Failure> {
    let fields: Vec<String> = match serde_json::to_value(SummaryReport::default()) {
        Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect(),
        _ => unreachable!("summary serializes to an object"),
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["param".to_string(), "value".into(), "status".into()];
    header.extend(fields.iter().cloned());
    header.push("error".into());
    let fail = |e: csv::Error| Failure::Invalid(e.to_string());
    w.write_record(&header).map_err(fail)?;
    for (value, r) in rows {
        let mut rec = vec![param.to_string(), value.clone()];
        match r {
            Ok(s) => {
                let obj = serde_json::to_value(s).map_err(|e| Failure::Invalid(e.to_string()))?;
                rec.push("ok".into());
                rec.extend(fields.iter().map(|f| match obj.get(f).and_then(|v| v.as_f64()) {
                    Some(x) => format_sig(x, 9),
                    None => String::new(),
                }));
                rec.push(String::new());
            }
            Err(e) => {
                rec.push(if e.code() == 3 { "numeric_fault" } else { "error" }.into());
                rec.extend(fields.iter().map(|_| String::new()));
                rec.push(e.to_string());
            }
        }
        w.write_record(&rec).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Failure::Invalid(e.to_string()))
}
