//! Trajectory and kappa tables as CSV or JSON lines. Floats are written with
//! 17 significant digits so they round-trip exactly.

use std::io::{self, Write};

use hessflow::dynamics::TrajectoryRow;
use hessflow::KappaReport;

use crate::config::OutputFormat;

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // JSON has no literal for these; keep CSV and JSON lines aligned
        format!("\"{x}\"")
    }
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |k| format!("{prefix}_{k}"))
}

pub fn trajectory_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend(indexed("U", n));
    cols.extend(indexed("V", n));
    cols.extend(["H", "dHdt", "kappa", "field_norm_g"].map(String::from));
    cols.join(",")
}

pub fn kappa_header(n: usize) -> String {
    let mut cols: Vec<String> = indexed("U", n).collect();
    cols.extend(
        [
            "kappa_closed_form",
            "kappa_laplacian",
            "kappa_divergence",
            "max_residual",
            "tolerance",
            "agree",
        ]
        .map(String::from),
    );
    cols.join(",")
}

fn trajectory_values(row: &TrajectoryRow) -> Vec<String> {
    let mut values = vec![num(row.t)];
    values.extend(row.u.iter().map(|&x| num(x)));
    values.extend(row.v.iter().map(|&x| num(x)));
    values.extend([row.h, row.dh_dt, row.kappa, row.field_norm_g].map(num));
    values
}

fn kappa_values(report: &KappaReport) -> Vec<String> {
    let mut values: Vec<String> = report.point_u.iter().map(|&x| num(x)).collect();
    values.extend(
        [
            report.kappa_closed_form,
            report.kappa_laplacian,
            report.kappa_divergence,
            report.max_pairwise_residual,
            report.tolerance(),
        ]
        .map(num),
    );
    values.push(report.routes_agree().to_string());
    values
}

fn write_line(out: &mut dyn Write, format: OutputFormat, header: &str, values: &[String]) -> io::Result<()> {
    match format {
        OutputFormat::Csv => writeln!(out, "{}", values.join(",")),
        OutputFormat::Jsonl => {
            let fields: Vec<String> = header
                .split(',')
                .zip(values)
                .map(|(k, v)| format!("\"{k}\":{v}"))
                .collect();
            writeln!(out, "{{{}}}", fields.join(","))
        }
    }
}

pub fn write_trajectory(out: &mut dyn Write, format: OutputFormat, rows: &[TrajectoryRow]) -> io::Result<()> {
    let n = rows.first().map_or(0, |r| r.u.len());
    let header = trajectory_header(n);
    if format == OutputFormat::Csv {
        writeln!(out, "{header}")?;
    }
    for row in rows {
        write_line(out, format, &header, &trajectory_values(row))?;
    }
    Ok(())
}

pub fn write_kappa(out: &mut dyn Write, format: OutputFormat, reports: &[KappaReport]) -> io::Result<()> {
    let n = reports.first().map_or(0, |r| r.point_u.len());
    let header = kappa_header(n);
    if format == OutputFormat::Csv {
        writeln!(out, "{header}")?;
    }
    for report in reports {
        write_line(out, format, &header, &kappa_values(report))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> TrajectoryRow {
        TrajectoryRow {
            t: 0.1,
            u: vec![1.0, -2.0],
            v: vec![0.5, 0.25],
            h: 3.0,
            dh_dt: -1.0 / 3.0,
            kappa: -0.5,
            field_norm_g: 2.0,
        }
    }

    #[test]
    fn header_contract() {
        assert_eq!(trajectory_header(2), "t,U_1,U_2,V_1,V_2,H,dHdt,kappa,field_norm_g");
    }

    #[test]
    fn csv_values_round_trip() {
        let mut buf = Vec::new();
        write_trajectory(&mut buf, OutputFormat::Csv, &[row()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        let parsed: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed[6], -1.0 / 3.0);
        assert_eq!(parsed.len(), 9);
    }

    #[test]
    fn jsonl_lines_are_json() {
        let mut buf = Vec::new();
        write_trajectory(&mut buf, OutputFormat::Jsonl, &[row(), row()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(v["dHdt"].as_f64().unwrap(), -1.0 / 3.0);
        assert_eq!(v["U_2"].as_f64().unwrap(), -2.0);
    }
}
