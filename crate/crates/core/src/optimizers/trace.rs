use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::{Method, Mode, OptimizerError};
use crate::Scalar;

pub const CSV_HEADER: &str = "t,b,err_sq,gap,grad_norm_sq,stepsize";

/// One optimizer step: the iterate `x_t` it started from and the
/// denominator `b_{t+1}` it used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<T> {
    pub t: usize,
    pub b: T,
    /// `‖x_t − x*‖²`; absent when the minimizer is unknown.
    pub err_sq: Option<T>,
    pub gap: T,
    pub grad_norm_sq: T,
    pub stepsize: T,
}

impl<T: Scalar> TraceRecord<T> {
    /// `err_sq`, or `gap` when the minimizer is unknown.
    pub fn metric(&self) -> T {
        self.err_sq.unwrap_or(self.gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta<T> {
    pub method: Method,
    pub mode: Mode,
    pub problem: String,
    pub seed: u64,
    pub eta: T,
    pub b0: T,
    pub batch_size: usize,
    pub stride: usize,
    pub decay: T,
}

/// State after the last step taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalSnapshot<T> {
    pub t: usize,
    pub b: T,
    pub err_sq: Option<T>,
    pub gap: T,
}

impl<T: Scalar> FinalSnapshot<T> {
    pub fn metric(&self) -> T {
        self.err_sq.unwrap_or(self.gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub meta: TraceMeta<T>,
    pub records: Vec<TraceRecord<T>>,
    pub final_state: FinalSnapshot<T>,
    pub diverged: bool,
    max_b: T,
    best: Option<T>,
}

impl<T: Scalar> Trace<T> {
    pub(super) fn empty(meta: TraceMeta<T>) -> Self {
        let b0 = meta.b0;
        Trace {
            meta,
            records: Vec::new(),
            final_state: FinalSnapshot {
                t: 0,
                b: b0,
                err_sq: None,
                gap: T::nan(),
            },
            diverged: false,
            max_b: b0,
            best: None,
        }
    }

    /// Builds a trace from explicit records, deriving the extrema from them
    /// and the final snapshot.
    pub fn from_records(
        meta: TraceMeta<T>,
        records: Vec<TraceRecord<T>>,
        final_state: FinalSnapshot<T>,
        diverged: bool,
    ) -> Self {
        let mut tr = Trace::empty(meta);
        for r in &records {
            tr.observe(r.err_sq, r.gap, r.b);
        }
        tr.observe(final_state.err_sq, final_state.gap, final_state.b);
        tr.records = records;
        tr.final_state = final_state;
        tr.diverged = diverged;
        tr
    }

    pub(super) fn observe(&mut self, err_sq: Option<T>, gap: T, b: T) {
        let m = err_sq.unwrap_or(gap);
        if !m.is_nan() {
            self.best = Some(self.best.map_or(m, |v| v.min(m)));
        }
        self.observe_b(b);
    }

    pub(super) fn observe_b(&mut self, b: T) {
        self.max_b = self.max_b.max(b);
    }

    /// `max_t b_t` over every iteration, including `b_0`, regardless of stride.
    pub fn max_b(&self) -> T {
        self.max_b
    }

    pub fn has_err_sq(&self) -> bool {
        self.final_state.err_sq.is_some()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let m = &self.meta;
        let f = &self.final_state;
        writeln!(w, "# method={}", m.method)?;
        writeln!(w, "# mode={}", m.mode)?;
        writeln!(w, "# problem={}", m.problem)?;
        writeln!(w, "# seed={}", m.seed)?;
        writeln!(w, "# eta={:e}", m.eta)?;
        writeln!(w, "# b0={:e}", m.b0)?;
        writeln!(w, "# batch_size={}", m.batch_size)?;
        writeln!(w, "# stride={}", m.stride)?;
        writeln!(w, "# decay={:e}", m.decay)?;
        writeln!(w, "# diverged={}", self.diverged)?;
        writeln!(w, "# final_t={}", f.t)?;
        writeln!(w, "# final_b={:e}", f.b)?;
        writeln!(w, "# final_err_sq={}", opt(f.err_sq))?;
        writeln!(w, "# final_gap={:e}", f.gap)?;
        writeln!(w, "# max_b={:e}", self.max_b)?;
        writeln!(w, "# best={}", opt(self.best))?;
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:e},{},{:e},{:e},{:e}",
                r.t,
                r.b,
                opt(r.err_sq),
                r.gap,
                r.grad_norm_sq,
                r.stepsize
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, TraceParseError> {
        let mut kv = std::collections::HashMap::new();
        let mut records = Vec::new();
        let mut header_seen = false;
        for (idx, line) in r.lines().enumerate() {
            let line = line.map_err(|e| TraceParseError::Io(e.to_string()))?;
            let lineno = idx + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| bad(lineno, "comment line is not key=value"))?;
                kv.insert(k.to_string(), v.to_string());
            } else if !header_seen {
                if line != CSV_HEADER {
                    return Err(bad(lineno, "unexpected header"));
                }
                header_seen = true;
            } else if !line.is_empty() {
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 6 {
                    return Err(bad(lineno, "expected 6 columns"));
                }
                records.push(TraceRecord {
                    t: parse(cols[0], lineno)?,
                    b: parse(cols[1], lineno)?,
                    err_sq: parse_opt(cols[2], lineno)?,
                    gap: parse(cols[3], lineno)?,
                    grad_norm_sq: parse(cols[4], lineno)?,
                    stepsize: parse(cols[5], lineno)?,
                });
            }
        }
        if !header_seen {
            return Err(bad(0, "missing header"));
        }
        let get = |k: &str| {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| TraceParseError::MissingKey(k.to_string()))
        };
        let meta = TraceMeta {
            method: get("method")?
                .parse()
                .map_err(|e: OptimizerError| bad(0, e.to_string()))?,
            mode: get("mode")?
                .parse()
                .map_err(|e: OptimizerError| bad(0, e.to_string()))?,
            problem: get("problem")?.to_string(),
            seed: parse(get("seed")?, 0)?,
            eta: parse(get("eta")?, 0)?,
            b0: parse(get("b0")?, 0)?,
            batch_size: parse(get("batch_size")?, 0)?,
            stride: parse(get("stride")?, 0)?,
            decay: parse(get("decay")?, 0)?,
        };
        let final_state = FinalSnapshot {
            t: parse(get("final_t")?, 0)?,
            b: parse(get("final_b")?, 0)?,
            err_sq: parse_opt(get("final_err_sq")?, 0)?,
            gap: parse(get("final_gap")?, 0)?,
        };
        Ok(Trace {
            meta,
            records,
            final_state,
            diverged: parse(get("diverged")?, 0)?,
            max_b: parse(get("max_b")?, 0)?,
            best: parse_opt(get("best")?, 0)?,
        })
    }
}

fn opt<T: Scalar>(v: Option<T>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceParseError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("missing `# {0}=` entry")]
    MissingKey(String),
    #[error("read failed: {0}")]
    Io(String),
}

fn bad(line: usize, reason: impl Into<String>) -> TraceParseError {
    TraceParseError::Malformed {
        line,
        reason: reason.into(),
    }
}

fn parse<V: std::str::FromStr>(s: &str, line: usize) -> Result<V, TraceParseError> {
    s.parse()
        .map_err(|_| bad(line, format!("cannot parse `{s}`")))
}

fn parse_opt<V: std::str::FromStr>(s: &str, line: usize) -> Result<Option<V>, TraceParseError> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse(s, line).map(Some)
    }
}

/// Smallest error over every iterate of the run (`err_sq`, or the gap when
/// the minimizer is unknown), including iterates skipped by the stride and
/// the final one.
pub fn best_error<T: Scalar>(trace: &Trace<T>) -> Result<T, OptimizerError> {
    if trace.records.is_empty() {
        return Err(OptimizerError::EmptyTrace);
    }
    trace.best.ok_or(OptimizerError::EmptyTrace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> TraceMeta<f64> {
        TraceMeta {
            method: Method::AdagradNorm,
            mode: Mode::Stochastic,
            problem: "p".into(),
            seed: 3,
            eta: 1.0,
            b0: 0.5,
            batch_size: 1,
            stride: 1,
            decay: 0.2,
        }
    }

    fn rec(t: usize, err: f64) -> TraceRecord<f64> {
        TraceRecord {
            t,
            b: 1.0 + t as f64,
            err_sq: Some(err),
            gap: err / 2.0,
            grad_norm_sq: 0.25,
            stepsize: 1.0 / (1.0 + t as f64),
        }
    }

    fn fin(t: usize, err: f64) -> FinalSnapshot<f64> {
        FinalSnapshot {
            t,
            b: 9.0,
            err_sq: Some(err),
            gap: err / 2.0,
        }
    }

    #[test]
    fn best_error_of_small_column() {
        let tr = Trace::from_records(
            meta(),
            vec![rec(0, 4.0), rec(1, 1.0), rec(2, 2.0)],
            fin(3, 3.0),
            false,
        );
        assert_eq!(best_error(&tr), Ok(1.0));
    }

    #[test]
    fn best_error_of_monotone_trace_is_last() {
        let tr = Trace::from_records(
            meta(),
            vec![rec(0, 4.0), rec(1, 2.0), rec(2, 1.0)],
            fin(3, 0.5),
            false,
        );
        assert_eq!(best_error(&tr), Ok(0.5));
    }

    #[test]
    fn best_error_falls_back_to_gap() {
        let mut r = rec(0, 4.0);
        r.err_sq = None;
        let f = FinalSnapshot {
            err_sq: None,
            ..fin(1, 6.0)
        };
        let tr = Trace::from_records(meta(), vec![r], f, false);
        assert_eq!(best_error(&tr), Ok(2.0));
    }

    #[test]
    fn csv_layout() {
        let tr = Trace::from_records(meta(), vec![rec(0, 4.0)], fin(1, 1.0), false);
        let s = tr.to_csv_string();
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines[..16].iter().all(|l| l.starts_with("# ")));
        assert_eq!(lines[16], CSV_HEADER);
        assert_eq!(lines[17], "0,1e0,4e0,2e0,2.5e-1,1e0");
    }

    #[test]
    fn csv_absent_err_is_empty_field() {
        let mut r = rec(0, 4.0);
        r.err_sq = None;
        let tr = Trace::from_records(meta(), vec![r], fin(1, 1.0), false);
        assert!(tr.to_csv_string().contains("\n0,1e0,,2e0,"));
    }

    #[test]
    fn csv_rejects_bad_header() {
        let err = Trace::<f64>::read_csv("# method=sgd_const\nt,b\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TraceParseError::Malformed { line: 2, .. }));
    }

    proptest! {
        #[test]
        fn best_error_matches_column_scan(
            errs in prop::collection::vec(0.0f64..1e6, 1..50),
            last in 0.0f64..1e6,
        ) {
            let recs: Vec<_> = errs.iter().enumerate().map(|(t, &e)| rec(t, e)).collect();
            let tr = Trace::from_records(meta(), recs, fin(errs.len(), last), false);
            let scan = errs.iter().cloned().fold(last, f64::min);
            prop_assert_eq!(best_error(&tr), Ok(scan));
        }

        #[test]
        fn csv_read_back_is_exact(
            errs in prop::collection::vec(1e-300f64..1e12, 0..20),
            diverged in any::<bool>(),
        ) {
            let recs: Vec<_> = errs.iter().enumerate().map(|(t, &e)| rec(t, e)).collect();
            let tr = Trace::from_records(meta(), recs, fin(errs.len(), 0.1), diverged);
            let back = Trace::read_csv(tr.to_csv_string().as_bytes()).unwrap();
            prop_assert_eq!(back, tr);
        }
    }
}
