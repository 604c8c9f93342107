//! CSV renderers. Every float is written with 17 significant digits so that
//! files round-trip exactly and identical runs produce identical bytes.

use std::fmt::Write;

use crate::generalized::BoundsRow;
use crate::law::LawRow;

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn table<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = [f64; N]>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn law_table_csv(rows: &[LawRow]) -> String {
    table(
        ["t", "M", "variance", "gamma_bar"],
        rows.iter().map(|r| [r.t, r.mean, r.variance, r.gamma_bar]),
    )
}

/// One draw per row after a `# seed=...` comment line and a `y` header.
pub fn samples_csv(samples: &[f64], seed: u64, stream_id: u64) -> String {
    let mut out = String::with_capacity(samples.len() * 25 + 40);
    let _ = writeln!(out, "# seed={seed} stream_id={stream_id}");
    out.push_str("y\n");
    for &x in samples {
        out.push_str(&fmt_f64(x));
        out.push('\n');
    }
    out
}

pub fn path_csv(times: &[f64], values: &[f64]) -> String {
    table(["t", "x"], times.iter().zip(values).map(|(&t, &x)| [t, x]))
}

pub fn histogram_csv(bins: &[(f64, usize)]) -> String {
    let mut out = String::from("fpt,count\n");
    for &(center, count) in bins {
        let _ = writeln!(out, "{},{count}", fmt_f64(center));
    }
    out
}

pub fn bounds_csv(rows: &[BoundsRow]) -> String {
    let mut out = String::from("t,lower,empirical_variance,upper,flagged\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.lower),
            fmt_f64(r.empirical_variance),
            fmt_f64(r.upper),
            r.flagged
        );
    }
    out
}
