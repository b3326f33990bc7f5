//! Basis sifting, BSM post-selection and the per-setting tally table.
//!
//! The table holds one cell per (Alice intensity `k`, Bob intensity `l`,
//! basis) for rounds in which both parties picked that basis. Rounds with
//! mismatched bases are only counted. Gains and error rates follow as
//! `Q = accepted / sent` and `E = errors / accepted`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::NUM_INTENSITIES;
use crate::model::{Basis, PulsePairOutcome};

/// Column order of the tally CSV.
pub const CSV_HEADER: [&str; 10] = [
    "k", "l", "basis", "sent", "accepted", "errors", "Q", "E", "sigma_Q", "sigma_E",
];

/// Sifting decision for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sifted {
    pub bases_match: bool,
    pub accepted: bool,
    /// Only meaningful when `accepted`.
    pub error: bool,
}

/// Keeps rounds with equal bases and a successful BSM. Both accepted click
/// patterns announce an anti-correlated pair, so Bob flips his bit and an
/// error is any remaining disagreement.
pub fn sift(outcome: &PulsePairOutcome) -> Sifted {
    let bases_match = outcome.basis_alice == outcome.basis_bob;
    let accepted = bases_match && outcome.clicks.is_bsm_success();
    let bob_flipped = !outcome.bit_bob;
    Sifted {
        bases_match,
        accepted,
        error: accepted && outcome.bit_alice != bob_flipped,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyCell {
    pub sent: u64,
    pub accepted: u64,
    pub errors: u64,
}

impl TallyCell {
    fn merge(&mut self, other: &TallyCell) {
        self.sent += other.sent;
        self.accepted += other.accepted;
        self.errors += other.errors;
    }
}

type Cells = [[[TallyCell; 2]; NUM_INTENSITIES]; NUM_INTENSITIES];

/// Counts for every (k, l, basis) setting.
///
/// `total_rounds` equals the sum of `sent` over all cells plus
/// `basis_mismatched`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyTable {
    cells: Cells,
    total_rounds: u64,
    basis_mismatched: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum TallyError {
    #[error("tally CSV row {row}, column {column}: {message}")]
    Schema {
        row: usize,
        column: String,
        message: String,
    },
    #[error("tally CSV: duplicate row for cell (k={k}, l={l}, basis={basis})")]
    Duplicate { k: usize, l: usize, basis: Basis },
    #[error("tally CSV: missing row for cell (k={k}, l={l}, basis={basis})")]
    Missing { k: usize, l: usize, basis: Basis },
    #[error("tally CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl TallyTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one simulated round.
    pub fn record(&mut self, outcome: &PulsePairOutcome) {
        self.total_rounds += 1;
        let s = sift(outcome);
        if !s.bases_match {
            self.basis_mismatched += 1;
            return;
        }
        let cell = &mut self.cells[outcome.intensity_index_alice][outcome.intensity_index_bob]
            [outcome.basis_alice.index()];
        cell.sent += 1;
        if s.accepted {
            cell.accepted += 1;
            if s.error {
                cell.errors += 1;
            }
        }
    }

    pub fn accumulate<I>(outcomes: I) -> Self
    where
        I: IntoIterator,
        I::Item: std::borrow::Borrow<PulsePairOutcome>,
    {
        let mut t = TallyTable::new();
        for o in outcomes {
            t.record(std::borrow::Borrow::borrow(&o));
        }
        t
    }

    /// Adds another table's counts into this one.
    pub fn merge(&mut self, other: &TallyTable) {
        for (mine, theirs) in self.cells.iter_mut().flatten().flatten().zip(other.cells.iter().flatten().flatten()) {
            mine.merge(theirs);
        }
        self.total_rounds += other.total_rounds;
        self.basis_mismatched += other.basis_mismatched;
    }

    pub fn merged(mut self, other: &TallyTable) -> Self {
        self.merge(other);
        self
    }

    pub fn cell(&self, k: usize, l: usize, basis: Basis) -> &TallyCell {
        &self.cells[k][l][basis.index()]
    }

    /// Sets a cell's counts directly, keeping the round totals consistent.
    pub fn set_cell(&mut self, k: usize, l: usize, basis: Basis, cell: TallyCell) {
        let old = std::mem::replace(&mut self.cells[k][l][basis.index()], cell);
        self.total_rounds = self.total_rounds - old.sent + cell.sent;
    }

    pub fn total_rounds(&self) -> u64 {
        self.total_rounds
    }

    pub fn basis_mismatched(&self) -> u64 {
        self.basis_mismatched
    }

    /// Iterates cells in CSV order: `k`, then `l`, then Z before X.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Basis, &TallyCell)> {
        (0..NUM_INTENSITIES).flat_map(move |k| {
            (0..NUM_INTENSITIES)
                .flat_map(move |l| Basis::ALL.into_iter().map(move |b| (k, l, b, self.cell(k, l, b))))
        })
    }

    pub fn rates(&self) -> RatesTable {
        let mut cells = [[[CellRate::Empty; 2]; NUM_INTENSITIES]; NUM_INTENSITIES];
        for (k, l, b, c) in self.iter() {
            cells[k][l][b.index()] = CellRate::from_cell(c);
        }
        RatesTable { cells }
    }

    /// Writes the CSV export, one row per cell in [`TallyTable::iter`] order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TallyError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for (k, l, b, c) in self.iter() {
            let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            let rate = CellRate::from_cell(c);
            let stats = rate.stats();
            w.write_record([
                k.to_string(),
                l.to_string(),
                b.to_string(),
                c.sent.to_string(),
                c.accepted.to_string(),
                c.errors.to_string(),
                fmt(stats.map(|s| s.q)),
                fmt(stats.map(|s| s.e)),
                fmt(stats.map(|s| s.sigma_q)),
                fmt(stats.map(|s| s.sigma_e)),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV export is ASCII")
    }

    /// Reads a CSV in the export schema. Counts are authoritative; the rate
    /// columns may be empty and are otherwise only checked to be numeric.
    /// Every one of the 32 cells must appear exactly once. Basis-mismatched
    /// rounds are not part of the export, so the result reports zero.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, TallyError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers()?.clone();
        for (i, expected) in CSV_HEADER.iter().enumerate() {
            match headers.get(i) {
                Some(h) if h == *expected => {}
                found => {
                    return Err(TallyError::Schema {
                        row: 1,
                        column: expected.to_string(),
                        message: format!("expected header {expected:?} at position {i}, found {found:?}"),
                    })
                }
            }
        }
        if headers.len() != CSV_HEADER.len() {
            return Err(TallyError::Schema {
                row: 1,
                column: "header".into(),
                message: format!("expected {} columns, found {}", CSV_HEADER.len(), headers.len()),
            });
        }

        let mut table = TallyTable::new();
        let mut seen = [[[false; 2]; NUM_INTENSITIES]; NUM_INTENSITIES];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let field = |col: usize| rec.get(col).unwrap_or("");
            let schema = |col: usize, message: String| TallyError::Schema {
                row,
                column: CSV_HEADER[col].to_string(),
                message,
            };
            let index = |col: usize| -> Result<usize, TallyError> {
                let v: usize = field(col)
                    .parse()
                    .map_err(|_| schema(col, format!("expected an index, found {:?}", field(col))))?;
                if v >= NUM_INTENSITIES {
                    return Err(schema(col, format!("index {v} out of range 0..{NUM_INTENSITIES}")));
                }
                Ok(v)
            };
            let count = |col: usize| -> Result<u64, TallyError> {
                field(col)
                    .parse()
                    .map_err(|_| schema(col, format!("expected a count, found {:?}", field(col))))
            };
            let k = index(0)?;
            let l = index(1)?;
            let basis: Basis = field(2).parse().map_err(|e: String| schema(2, e))?;
            let cell = TallyCell {
                sent: count(3)?,
                accepted: count(4)?,
                errors: count(5)?,
            };
            if cell.accepted > cell.sent {
                return Err(schema(4, format!("accepted {} exceeds sent {}", cell.accepted, cell.sent)));
            }
            if cell.errors > cell.accepted {
                return Err(schema(5, format!("errors {} exceed accepted {}", cell.errors, cell.accepted)));
            }
            for col in 6..10 {
                let f = field(col);
                if !f.is_empty() && f.parse::<f64>().is_err() {
                    return Err(schema(col, format!("expected a number or empty, found {f:?}")));
                }
            }
            if std::mem::replace(&mut seen[k][l][basis.index()], true) {
                return Err(TallyError::Duplicate { k, l, basis });
            }
            table.set_cell(k, l, basis, cell);
        }
        for k in 0..NUM_INTENSITIES {
            for l in 0..NUM_INTENSITIES {
                for basis in Basis::ALL {
                    if !seen[k][l][basis.index()] {
                        return Err(TallyError::Missing { k, l, basis });
                    }
                }
            }
        }
        Ok(table)
    }
}

/// Gain and error rate of one cell with binomial standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub sent: u64,
    pub accepted: u64,
    pub errors: u64,
    pub q: f64,
    /// Set to 0 when nothing was accepted; see `e_undefined`.
    pub e: f64,
    pub sigma_q: f64,
    pub sigma_e: f64,
    pub e_undefined: bool,
}

impl CellStats {
    /// Builds statistics from real-valued rates instead of counts, e.g. for
    /// expected values. Counts are rounded for display only.
    pub fn from_rates(sent: u64, q: f64, e: f64) -> Self {
        let n = sent as f64;
        let acc = q * n;
        CellStats {
            sent,
            accepted: acc.round() as u64,
            errors: (e * acc).round() as u64,
            q,
            e,
            sigma_q: (q * (1.0 - q) / n).sqrt(),
            sigma_e: if acc > 0.0 { (e * (1.0 - e) / acc).sqrt() } else { 0.0 },
            e_undefined: acc <= 0.0,
        }
    }

    /// Error gain `E * Q`, the fraction of sent rounds producing an error.
    pub fn error_gain(&self) -> f64 {
        self.e * self.q
    }

    /// Binomial deviation of [`CellStats::error_gain`] over `sent` rounds.
    pub fn sigma_error_gain(&self) -> f64 {
        let eq = self.error_gain();
        (eq * (1.0 - eq) / self.sent as f64).sqrt()
    }
}

/// Rates of one cell; a cell nothing was sent in carries no numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellRate {
    Empty,
    Measured(CellStats),
}

impl CellRate {
    pub fn from_cell(c: &TallyCell) -> Self {
        if c.sent == 0 {
            return CellRate::Empty;
        }
        let n = c.sent as f64;
        let q = c.accepted as f64 / n;
        let (e, sigma_e, e_undefined) = if c.accepted == 0 {
            (0.0, 0.0, true)
        } else {
            let a = c.accepted as f64;
            let e = c.errors as f64 / a;
            (e, (e * (1.0 - e) / a).sqrt(), false)
        };
        CellRate::Measured(CellStats {
            sent: c.sent,
            accepted: c.accepted,
            errors: c.errors,
            q,
            e,
            sigma_q: (q * (1.0 - q) / n).sqrt(),
            sigma_e,
            e_undefined,
        })
    }

    pub fn stats(&self) -> Option<&CellStats> {
        match self {
            CellRate::Empty => None,
            CellRate::Measured(s) => Some(s),
        }
    }
}

/// Rates for every (k, l, basis) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RatesTable {
    cells: [[[CellRate; 2]; NUM_INTENSITIES]; NUM_INTENSITIES],
}

impl RatesTable {
    pub fn empty() -> Self {
        RatesTable {
            cells: [[[CellRate::Empty; 2]; NUM_INTENSITIES]; NUM_INTENSITIES],
        }
    }

    pub fn get(&self, k: usize, l: usize, basis: Basis) -> &CellRate {
        &self.cells[k][l][basis.index()]
    }

    pub fn set(&mut self, k: usize, l: usize, basis: Basis, rate: CellRate) {
        self.cells[k][l][basis.index()] = rate;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Clicks;

    fn outcome(basis_alice: Basis, basis_bob: Basis, bits: (bool, bool), flags: [bool; 4]) -> PulsePairOutcome {
        PulsePairOutcome {
            intensity_index_alice: 3,
            intensity_index_bob: 3,
            basis_alice,
            basis_bob,
            bit_alice: bits.0,
            bit_bob: bits.1,
            clicks: Clicks::from_flags(flags),
        }
    }

    const D1T0_D2T1: [bool; 4] = [true, false, false, true];

    #[test]
    fn basis_mismatch_is_discarded() {
        for flags in (0..16).map(|i| Clicks::from_pattern_index(i).flags()) {
            let s = sift(&outcome(Basis::Z, Basis::X, (false, true), flags));
            assert!(!s.bases_match && !s.accepted && !s.error);
        }
    }

    #[test]
    fn complementary_z_bits_are_correct() {
        let s = sift(&outcome(Basis::Z, Basis::Z, (false, true), D1T0_D2T1));
        assert!(s.accepted);
        assert!(!s.error);
        let s = sift(&outcome(Basis::Z, Basis::Z, (true, true), D1T0_D2T1));
        assert!(s.accepted && s.error);
    }

    #[test]
    fn single_click_not_accepted() {
        let s = sift(&outcome(Basis::X, Basis::X, (false, true), [true, false, false, false]));
        assert!(s.bases_match && !s.accepted);
    }

    #[test]
    fn empty_stream_gives_zero_table() {
        let t = TallyTable::accumulate(std::iter::empty::<PulsePairOutcome>());
        assert_eq!(t, TallyTable::new());
        assert!(t.iter().all(|(_, _, _, c)| *c == TallyCell::default()));
    }

    #[test]
    fn ratios_and_sigma() {
        let rate = CellRate::from_cell(&TallyCell {
            sent: 1_000_000,
            accepted: 1000,
            errors: 10,
        });
        let s = rate.stats().unwrap();
        assert!((s.q - 1e-3).abs() < 1e-18);
        assert!((s.e - 1e-2).abs() < 1e-18);
        let expected = (1e-3 * (1.0 - 1e-3) / 1e6f64).sqrt();
        assert!((s.sigma_q - expected).abs() < 1e-18);
        assert!((s.sigma_q - 3.16e-5).abs() < 1e-7);
    }

    #[test]
    fn empty_and_undefined_cells_are_flagged() {
        assert_eq!(CellRate::from_cell(&TallyCell::default()), CellRate::Empty);
        let r = CellRate::from_cell(&TallyCell {
            sent: 10,
            accepted: 0,
            errors: 0,
        });
        let s = r.stats().unwrap();
        assert!(s.e_undefined);
        assert_eq!(s.e, 0.0);
    }

    #[test]
    fn csv_round_trip_and_schema_errors() {
        let mut t = TallyTable::new();
        for (i, (k, l, b, _)) in TallyTable::new().iter().enumerate() {
            let i = i as u64;
            t.set_cell(k, l, b, TallyCell { sent: 100 + i, accepted: i, errors: i / 3 });
        }
        let text = t.to_csv_string();
        assert!(text.starts_with("k,l,basis,sent,accepted,errors,Q,E,sigma_Q,sigma_E\n"));
        let back = TallyTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, t);

        let missing: String = text
            .lines()
            .filter(|line| !line.starts_with("2,1,X"))
            .map(|line| format!("{line}\n"))
            .collect();
        match TallyTable::read_csv(missing.as_bytes()) {
            Err(TallyError::Missing { k: 2, l: 1, basis: Basis::X }) => {}
            other => panic!("expected missing (2,1,X), got {other:?}"),
        }

        let bad = text.replacen("0,0,Z,100", "0,0,Z,lots", 1);
        match TallyTable::read_csv(bad.as_bytes()) {
            Err(TallyError::Schema { row: 2, column, .. }) => assert_eq!(column, "sent"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }
}
