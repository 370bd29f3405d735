//! CSV persistence for traces and summaries.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every value reads back bit for bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::solvers::{Method, TraceRecord};

pub const TRACE_HEADER: [&str; 9] = [
    "iter",
    "obj",
    "acc",
    "step_t",
    "lambda_used",
    "ls_evals",
    "dk_norm",
    "xdiff",
    "wall_ns",
];

pub const SUMMARY_HEADER: [&str; 9] = [
    "m",
    "n",
    "algorithm",
    "runs",
    "mean_iterations",
    "mean_obj",
    "mean_acc",
    "mean_time_s",
    "status",
];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(field: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Format(format!("not a number: `{field}`")))
}

fn parse_usize(field: &str) -> Result<usize> {
    field
        .parse()
        .map_err(|_| Error::Format(format!("not a count: `{field}`")))
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field).map(Some)
    }
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    if !header.iter().eq(expected.iter().copied()) {
        return Err(Error::Format(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

pub fn write_trace<W: Write>(w: W, trace: &[TraceRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in trace {
        out.write_record([
            r.iter.to_string(),
            fmt_f64(r.obj),
            r.acc.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.step_t),
            fmt_f64(r.lambda_used),
            r.ls_evals.to_string(),
            fmt_f64(r.dk_norm),
            fmt_f64(r.xdiff),
            r.wall_ns.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    check_header(&mut reader, &TRACE_HEADER)?;
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(TraceRecord {
                iter: parse_usize(&rec[0])?,
                obj: parse_f64(&rec[1])?,
                acc: parse_opt(&rec[2])?,
                step_t: parse_f64(&rec[3])?,
                lambda_used: parse_f64(&rec[4])?,
                ls_evals: parse_usize(&rec[5])?,
                dk_norm: parse_f64(&rec[6])?,
                xdiff: parse_f64(&rec[7])?,
                wall_ns: rec[8]
                    .parse()
                    .map_err(|_| Error::Format(format!("bad wall_ns `{}`", &rec[8])))?,
            })
        })
        .collect()
}

pub fn read_trace_file(path: &Path) -> Result<Vec<TraceRecord>> {
    read_trace(File::open(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub m: usize,
    pub n: usize,
    pub algorithm: Method,
    /// Completed runs the means are taken over.
    pub runs: usize,
    pub mean_iterations: f64,
    pub mean_obj: f64,
    pub mean_acc: Option<f64>,
    pub mean_time_s: f64,
    /// `ok`, or the number of failed runs and the first error.
    pub status: String,
}

impl SummaryRow {
    /// Means over the final records of completed traces.
    pub fn from_traces<'a>(
        m: usize,
        n: usize,
        algorithm: Method,
        traces: impl IntoIterator<Item = &'a [TraceRecord]>,
        status: String,
    ) -> Self {
        let finals: Vec<&TraceRecord> = traces.into_iter().filter_map(|t| t.last()).collect();
        let k = finals.len() as f64;
        let mean = |f: &dyn Fn(&TraceRecord) -> f64| finals.iter().map(|r| f(r)).sum::<f64>() / k;
        let mean_acc = finals
            .iter()
            .map(|r| r.acc)
            .collect::<Option<Vec<f64>>>()
            .filter(|v| !v.is_empty())
            .map(|v| v.iter().sum::<f64>() / k);
        SummaryRow {
            m,
            n,
            algorithm,
            runs: finals.len(),
            mean_iterations: mean(&|r| r.iter as f64),
            mean_obj: mean(&|r| r.obj),
            mean_acc,
            mean_time_s: mean(&|r| r.wall_ns as f64 * 1e-9),
            status,
        }
    }
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        out.write_record([
            r.m.to_string(),
            r.n.to_string(),
            r.algorithm.to_string(),
            r.runs.to_string(),
            fmt_f64(r.mean_iterations),
            fmt_f64(r.mean_obj),
            r.mean_acc.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.mean_time_s),
            r.status.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_reader(r);
    check_header(&mut reader, &SUMMARY_HEADER)?;
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(SummaryRow {
                m: parse_usize(&rec[0])?,
                n: parse_usize(&rec[1])?,
                algorithm: rec[2].parse()?,
                runs: parse_usize(&rec[3])?,
                mean_iterations: parse_f64(&rec[4])?,
                mean_obj: parse_f64(&rec[5])?,
                mean_acc: parse_opt(&rec[6])?,
                mean_time_s: parse_f64(&rec[7])?,
                status: rec[8].to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(iter: usize, obj: f64, acc: Option<f64>) -> TraceRecord {
        TraceRecord {
            iter,
            obj,
            acc,
            step_t: 0.1 + iter as f64,
            lambda_used: 0.99,
            ls_evals: 3,
            dk_norm: 1.0 / 3.0,
            xdiff: 1e-9,
            wall_ns: 1000 * iter as u64,
        }
    }

    #[test]
    fn header_is_fixed() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &[record(0, 1.0, None)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "iter,obj,acc,step_t,lambda_used,ls_evals,dk_norm,xdiff,wall_ns"
        );
        // absent accuracy is an empty field, not zero
        assert!(text.lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(1.0 / 3.0).len(), "3.3333333333333331e-1".len());
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "iter,obj\n0,1\n";
        assert!(matches!(read_trace(text.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn summary_means() {
        let a = [record(0, 5.0, Some(2.0)), record(10, 1.0, Some(0.5))];
        let b = [record(0, 5.0, Some(2.0)), record(20, 3.0, Some(1.5))];
        let row = SummaryRow::from_traces(1, 2, Method::Pg, [&a[..], &b[..]], "ok".into());
        assert_eq!(row.runs, 2);
        assert_eq!(row.mean_iterations, 15.0);
        assert_eq!(row.mean_obj, 2.0);
        assert_eq!(row.mean_acc, Some(1.0));
        let mut buf = Vec::new();
        write_summary(&mut buf, std::slice::from_ref(&row)).unwrap();
        assert_eq!(read_summary(&buf[..]).unwrap(), vec![row]);
    }

    proptest! {
        #[test]
        fn trace_round_trips_bit_for_bit(
            obj in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO,
            acc in proptest::option::of(proptest::num::f64::POSITIVE),
            t in proptest::num::f64::POSITIVE,
        ) {
            let mut r = record(4, obj, acc);
            r.step_t = t;
            let mut buf = Vec::new();
            write_trace(&mut buf, std::slice::from_ref(&r)).unwrap();
            let back = read_trace(&buf[..]).unwrap();
            prop_assert_eq!(back[0].obj.to_bits(), obj.to_bits());
            prop_assert_eq!(back[0].acc.map(f64::to_bits), acc.map(f64::to_bits));
            prop_assert_eq!(back[0].step_t.to_bits(), t.to_bits());
        }
    }
}
