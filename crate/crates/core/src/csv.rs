//! CSV export. Dialect: comma separated, `.` decimal point, `#` comment lines
//! before the header row. Floats use the shortest round-trip representation,
//! so identical runs give identical files.

use std::io::{self, Write};

use crate::evolution::Trajectory;
use crate::linear::{DecayFit, SpectrumEntry};
use crate::moving_frame::MovingTrajectory;
use crate::steady::{Branch, StabilityEntry};

pub const SPECTRUM_COLUMNS: &[&str] = &["m", "lambda"];
pub const DECAY_COLUMNS: &[&str] = &["mode", "rate", "window_start", "window_end", "residual"];
pub const STABILITY_COLUMNS: &[&str] = &["epsilon", "gamma", "leading", "critical", "exchange_ratio"];
/// Number of leading eigenvalues (real parts) in a branch file.
pub const BRANCH_EIGENVALUES: usize = 4;

/// `t, mean, sup_norm, a1_re, a1_im, ...` up to `m_out`.
pub fn trajectory_columns(m_out: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["t", "mean", "sup_norm"].iter().map(|s| s.to_string()).collect();
    for m in 1..=m_out {
        cols.push(format!("a{m}_re"));
        cols.push(format!("a{m}_im"));
    }
    cols
}

/// Trajectory columns with `tV` inserted after `t`.
pub fn moving_trajectory_columns(m_out: usize) -> Vec<String> {
    let mut cols = trajectory_columns(m_out);
    cols.insert(1, "tV".into());
    cols
}

/// `gamma, epsilon, sup_norm, leading_eig_1..4, residual, a1..aK`.
pub fn branch_columns(num_coeffs: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["gamma", "epsilon", "sup_norm"].iter().map(|s| s.to_string()).collect();
    cols.extend((1..=BRANCH_EIGENVALUES).map(|i| format!("leading_eig_{i}")));
    cols.push("residual".into());
    cols.extend((1..=num_coeffs).map(|j| format!("a{j}")));
    cols
}

/// A value that can appear in a CSV cell.
pub trait Field {
    fn cell(&self) -> String;
}

impl Field for f64 {
    /// Shortest round-trip form; exponent notation for very small or large magnitudes.
    fn cell(&self) -> String {
        format!("{self:?}")
    }
}

impl Field for String {
    fn cell(&self) -> String {
        self.clone()
    }
}

impl Field for &str {
    fn cell(&self) -> String {
        self.to_string()
    }
}

macro_rules! integer_field {
    ($($t:ty),*) => {$(
        impl Field for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
integer_field!(u32, u64, usize, i64);

/// Comment block, header row, then one line per row.
pub fn write_table<W, S, T, I>(w: &mut W, comments: &[String], columns: &[S], rows: I) -> io::Result<()>
where
    W: Write,
    S: AsRef<str>,
    T: Field,
    I: IntoIterator<Item = Vec<T>>,
{
    for c in comments {
        for line in c.lines() {
            if line.is_empty() {
                writeln!(w, "#")?;
            } else {
                writeln!(w, "# {line}")?;
            }
        }
    }
    let header: Vec<&str> = columns.iter().map(|c| c.as_ref()).collect();
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let line: Vec<String> = row.iter().map(Field::cell).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

fn mode_columns(coeffs: &[num_complex::Complex64], fourier_len: usize, m_out: usize, row: &mut Vec<f64>) {
    let kept = m_out.min(fourier_len / 2 - 1);
    for c in &coeffs[1..=kept] {
        row.push(c.re);
        row.push(c.im);
    }
    row.extend(std::iter::repeat_n(0.0, 2 * (m_out - kept)));
}

pub fn write_trajectory<W: Write>(w: &mut W, comments: &[String], traj: &Trajectory, m_out: usize) -> io::Result<()> {
    let rows = traj.points.iter().map(|p| {
        let mut row = vec![p.t, p.mean, p.sup_norm];
        mode_columns(p.state.coeffs(), p.state.coeffs().len(), m_out, &mut row);
        row
    });
    write_table(w, comments, &trajectory_columns(m_out), rows)
}

/// Rows describe `h`; the `tV` column holds the offset, so `h - tV` can be
/// read back from `mean - tV` and the unchanged mode columns.
pub fn write_moving_trajectory<W: Write>(
    w: &mut W,
    comments: &[String],
    traj: &MovingTrajectory,
    m_out: usize,
) -> io::Result<()> {
    let rows = traj.points.iter().map(|p| {
        let f = p.displacement();
        let sup = p.h_values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut row = vec![p.t, p.offset, p.h_mean(), sup];
        mode_columns(f.coeffs(), f.coeffs().len(), m_out, &mut row);
        row
    });
    write_table(w, comments, &moving_trajectory_columns(m_out), rows)
}

pub fn write_spectrum<W: Write>(w: &mut W, comments: &[String], spectrum: &[SpectrumEntry]) -> io::Result<()> {
    let rows = spectrum.iter().map(|e| vec![e.m.cell(), e.lambda.cell()]);
    write_table(w, comments, SPECTRUM_COLUMNS, rows)
}

pub fn write_decay_fits<W: Write>(w: &mut W, comments: &[String], fits: &[DecayFit]) -> io::Result<()> {
    let rows = fits
        .iter()
        .map(|f| {
            let mut row = vec![f.mode.cell()];
            row.extend([f.rate, f.window_start, f.window_end, f.residual].iter().map(Field::cell));
            row
        });
    write_table(w, comments, DECAY_COLUMNS, rows)
}

/// Missing eigenvalues are written as `NaN`.
pub fn write_branch<W: Write>(w: &mut W, comments: &[String], branch: &Branch) -> io::Result<()> {
    let k = branch.points.first().map_or(0, |p| p.coeffs.len());
    let rows = branch.points.iter().map(|p| {
        let mut row = vec![p.gamma, p.epsilon, p.sup_norm];
        row.extend((0..BRANCH_EIGENVALUES).map(|i| p.eigenvalues.get(i).map_or(f64::NAN, |z| z.re)));
        row.push(p.residual);
        row.extend(&p.coeffs);
        row
    });
    write_table(w, comments, &branch_columns(k), rows)
}

pub fn write_stability<W: Write>(w: &mut W, comments: &[String], entries: &[StabilityEntry]) -> io::Result<()> {
    let rows = entries.iter().map(|e| {
        vec![e.epsilon, e.gamma, e.leading, e.critical, e.exchange_ratio.unwrap_or(f64::NAN)]
    });
    write_table(w, comments, STABILITY_COLUMNS, rows)
}
