//! CSV convergence traces.

use std::io::{self, Write};

pub const HEADER: &str = "step,loss,primal_lagrangian,dual_lagrangian,max_ineq_violation,max_eq_violation,multiplier_linf,kkt_stationarity,kkt_complementarity";

/// One trace line, measured after a step has been applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub loss: f64,
    pub primal_lagrangian: f64,
    pub dual_lagrangian: f64,
    /// Largest positive inequality value, 0 when all are satisfied.
    pub max_ineq_violation: f64,
    pub max_eq_violation: f64,
    pub multiplier_linf: f64,
    pub kkt_stationarity: f64,
    pub kkt_complementarity: f64,
}

impl TraceRow {
    /// Floats use 17 significant digits so rows round-trip exactly.
    pub fn to_csv(&self) -> String {
        let fields = [
            self.loss,
            self.primal_lagrangian,
            self.dual_lagrangian,
            self.max_ineq_violation,
            self.max_eq_violation,
            self.multiplier_linf,
            self.kkt_stationarity,
            self.kkt_complementarity,
        ];
        let mut line = self.step.to_string();
        for v in fields {
            line.push_str(&format!(",{v:.16e}"));
        }
        line
    }
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    /// Wraps `out`, writing the header first unless `append` is set.
    pub fn new(mut out: W, append: bool) -> io::Result<Self> {
        if !append {
            writeln!(out, "{HEADER}")?;
        }
        Ok(Self { out })
    }

    pub fn write_row(&mut self, row: &TraceRow) -> io::Result<()> {
        writeln!(self.out, "{}", row.to_csv())
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let row = TraceRow {
            step: 3,
            loss: 0.1,
            primal_lagrangian: -1.0 / 3.0,
            dual_lagrangian: 0.0,
            max_ineq_violation: 1e-300,
            max_eq_violation: 2.5,
            multiplier_linf: 4.0,
            kkt_stationarity: f64::MIN_POSITIVE,
            kkt_complementarity: 123456789.0,
        };
        let line = row.to_csv();
        let parsed: Vec<f64> = line.split(',').skip(1).map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed[0].to_bits(), 0.1f64.to_bits());
        assert_eq!(parsed[1].to_bits(), (-1.0f64 / 3.0).to_bits());
        assert_eq!(parsed[7], 123456789.0);
        assert!(line.starts_with("3,1.0000000000000001e-1,"));
    }

    #[test]
    fn header_only_when_not_appending() {
        let mut w = TraceWriter::new(Vec::new(), false).unwrap();
        w.write_row(&TraceRow {
            step: 1,
            loss: 0.0,
            primal_lagrangian: 0.0,
            dual_lagrangian: 0.0,
            max_ineq_violation: 0.0,
            max_eq_violation: 0.0,
            multiplier_linf: 0.0,
            kkt_stationarity: 0.0,
            kkt_complementarity: 0.0,
        })
        .unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        assert_eq!(text.lines().next().unwrap(), HEADER);
        assert_eq!(text.lines().count(), 2);
        let w = TraceWriter::new(Vec::new(), true).unwrap();
        assert!(w.into_inner().is_empty());
    }
}
