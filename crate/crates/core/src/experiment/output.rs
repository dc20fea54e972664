use std::fmt::Write;

use super::EstimateRow;

pub const CSV_HEADER: &str = "budget,n_tot_used,p_miss,ci95,mean_se,se_p10,se_p50,se_p90";

/// Shortest representation that parses back to the same double; `nan` for NaN.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:?}")
    }
}

/// Sweep rows as CSV. Infeasible budgets report `n_tot_used = 0` and `nan`
/// estimates.
pub fn rows_csv(rows: &[EstimateRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.budget,
            r.n_tot_used,
            format_f64(r.p_miss),
            format_f64(r.ci95),
            format_f64(r.mean_se),
            format_f64(r.se_p10),
            format_f64(r.se_p50),
            format_f64(r.se_p90),
        );
    }
    out
}

/// Empirical CDF points `(se, cdf)` of one budget's trials.
pub fn se_samples_csv(values: &[f64]) -> String {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out = String::from("se,cdf\n");
    for (i, v) in sorted.iter().enumerate() {
        let _ = writeln!(out, "{},{}", format_f64(*v), format_f64((i + 1) as f64 / n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 2.5e10, 0.0, 0.263] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_f64(f64::NAN), "nan");
        assert_eq!(format_f64(1.0), "1.0");
    }

    #[test]
    fn csv_layout() {
        let mut row = EstimateRow::infeasible(16);
        let csv = rows_csv(std::slice::from_ref(&row));
        assert_eq!(csv, format!("{CSV_HEADER}\n16,0,nan,nan,nan,nan,nan,nan\n"));
        row.feasible = true;
        row.n_tot_used = 16;
        row.p_miss = 0.25;
        assert!(rows_csv(&[row]).lines().nth(1).unwrap().starts_with("16,16,0.25,"));
        assert_eq!(se_samples_csv(&[2.0, 1.0]), "se,cdf\n1.0,0.5\n2.0,1.0\n");
    }
}
