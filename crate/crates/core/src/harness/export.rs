use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::summary::{csv_err, Summary};
use super::RegretTrace;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "run_id,t,algorithm,inst_regret,cum_regret,arm,selecting_rep,active_set_size";

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_rows<W: Write>(w: &mut csv::Writer<W>, path: &Path, traces: &[RegretTrace], stride: u64) -> Result<()> {
    for tr in traces {
        let n = tr.len();
        for i in 0..n {
            let t = i as u64 + 1;
            if !(t - 1).is_multiple_of(stride) && i + 1 != n {
                continue;
            }
            w.write_record([
                tr.run_id.to_string(),
                t.to_string(),
                tr.algorithm.clone(),
                tr.inst_regret[i].to_string(),
                tr.cum_regret[i].to_string(),
                tr.arm[i].to_string(),
                opt(tr.selecting_rep[i]),
                opt(tr.active_set_size[i]),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    Ok(())
}

/// Rows of one run without the header, for later merging.
pub fn write_run_rows(path: &Path, traces: &[RegretTrace], stride: u64) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file));
    write_rows(&mut w, path, traces, stride)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Full trace CSV with header. An empty trace list gives a header-only file.
pub fn write_csv(path: &Path, traces: &[RegretTrace]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{CSV_HEADER}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    write_rows(&mut w, path, traces, 1)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Concatenates per-run row files under a single header.
pub fn merge_run_files(parts: &[PathBuf], out: &Path) -> Result<()> {
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{CSV_HEADER}").map_err(|e| Error::io(out, e))?;
    for p in parts {
        let mut r = File::open(p).map_err(|e| Error::io(p, e))?;
        std::io::copy(&mut r, &mut w).map_err(|e| Error::io(out, e))?;
    }
    w.flush().map_err(|e| Error::io(out, e))
}

/// Parses a trace CSV back into traces grouped by `(run_id, algorithm)`.
/// Seeds are not stored in the file and come back as 0.
pub fn read_csv(path: &Path) -> Result<Vec<RegretTrace>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("unexpected header '{}'", header.join(",")),
        });
    }
    let bad = |line: u64, what: &str| Error::Parse {
        path: path.to_path_buf(),
        message: format!("record {line}: bad {what}"),
    };
    let mut traces: Vec<RegretTrace> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i as u64 + 1;
        let field = |k: usize| rec.get(k).ok_or_else(|| bad(line, "field count"));
        let run_id: usize = field(0)?.parse().map_err(|_| bad(line, "run_id"))?;
        let algorithm = field(2)?.to_string();
        let inst: f64 = field(3)?.parse().map_err(|_| bad(line, "inst_regret"))?;
        let cum: f64 = field(4)?.parse().map_err(|_| bad(line, "cum_regret"))?;
        let arm: usize = field(5)?.parse().map_err(|_| bad(line, "arm"))?;
        let optional = |k: usize, what: &str| -> Result<Option<usize>> {
            let s = field(k)?;
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(line, what))
            }
        };
        let sel = optional(6, "selecting_rep")?;
        let act = optional(7, "active_set_size")?;
        let idx = match traces
            .iter()
            .rposition(|t| t.run_id == run_id && t.algorithm == algorithm)
        {
            Some(k) => k,
            None => {
                traces.push(RegretTrace::with_capacity(run_id, 0, &algorithm, 0));
                traces.len() - 1
            }
        };
        let tr = &mut traces[idx];
        tr.inst_regret.push(inst);
        tr.cum_regret.push(cum);
        tr.arm.push(arm);
        tr.selecting_rep.push(sel);
        tr.active_set_size.push(act);
    }
    Ok(traces)
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Mean cumulative regret per algorithm with a 2-std band.
pub fn render_svg(summary: &Summary, title: &str, log_x: bool) -> String {
    let (w, h) = (900.0, 560.0);
    let (left, right, top, bottom) = (70.0, 230.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let n = summary.checkpoints.last().copied().unwrap_or(1).max(1) as f64;
    let xmin = 1.0;
    let x_of = |t: f64| -> f64 {
        let frac = if log_x {
            if n > 1.0 {
                t.max(xmin).ln() / n.ln()
            } else {
                0.0
            }
        } else if n > 1.0 {
            (t - 1.0) / (n - 1.0)
        } else {
            0.0
        };
        left + frac * pw
    };
    let ymax = summary
        .algorithms
        .iter()
        .flat_map(|a| a.mean.iter().zip(&a.std).map(|(m, s)| m + 2.0 * s))
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 1.05;
    let y_of = |v: f64| top + ph - (v.max(0.0) / ymax) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    // x ticks
    let mut ticks = Vec::new();
    if log_x {
        let mut t = 1.0;
        while t <= n {
            ticks.push(t);
            t *= 10.0;
        }
    } else {
        for i in 0..=5 {
            ticks.push(1.0 + (n - 1.0) * i as f64 / 5.0);
        }
    }
    for t in ticks {
        let x = x_of(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#333"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 5.0,
            top + ph + 18.0,
            t.round() as u64
        );
    }
    for i in 0..=5 {
        let v = ymax * i as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="#333"/><text x="{}" y="{:.2}" text-anchor="end">{v:.1}</text>"##,
            left - 5.0,
            left - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">round t{}</text>"#,
        left + pw / 2.0,
        h - 10.0,
        if log_x { " (log scale)" } else { "" }
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">cumulative regret</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (k, a) in summary.algorithms.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let upper: Vec<String> = summary
            .checkpoints
            .iter()
            .zip(a.mean.iter().zip(&a.std))
            .map(|(&t, (m, sd))| format!("{:.2},{:.2}", x_of(t as f64), y_of(m + 2.0 * sd)))
            .collect();
        let lower: Vec<String> = summary
            .checkpoints
            .iter()
            .zip(a.mean.iter().zip(&a.std))
            .rev()
            .map(|(&t, (m, sd))| format!("{:.2},{:.2}", x_of(t as f64), y_of(m - 2.0 * sd)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = summary
            .checkpoints
            .iter()
            .zip(&a.mean)
            .map(|(&t, m)| format!("{:.2},{:.2}", x_of(t as f64), y_of(*m)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
            line.join(" ")
        );
        let ly = top + 10.0 + 18.0 * k as f64;
        let lx = left + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&a.algorithm)
        );
    }
    s.push_str("</svg>\n");
    s
}
