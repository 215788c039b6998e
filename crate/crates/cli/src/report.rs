//! Summary tables and plot data built from run records.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::config::ExperimentKind;
use crate::output::RunRecord;

pub const NO_DATA: &str = "no data";

/// A summary table plus `(series, x, y)` plot points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub plot: Vec<(String, f64, f64)>,
}

impl Report {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Aligned text table, or the no-data marker.
    pub fn render(&self) -> String {
        if self.is_empty() {
            return format!("{}: {NO_DATA}\n", self.title);
        }
        let mut widths: Vec<usize> = self.header.iter().map(String::len).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = format!("{}\n", self.title);
        let mut line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  "));
        };
        line(&self.header);
        for r in &self.rows {
            line(r);
        }
        out
    }

    pub fn plot_csv(&self) -> String {
        let mut out = String::from("series,x,y\n");
        for (s, x, y) in &self.plot {
            let _ = writeln!(out, "{s},{x:?},{y:?}");
        }
        out
    }
}

fn f(m: &BTreeMap<&str, &str>, key: &str) -> Option<f64> {
    m.get(key).and_then(|v| v.parse().ok())
}

fn s<'a>(m: &BTreeMap<&str, &'a str>, key: &str) -> &'a str {
    m.get(key).copied().unwrap_or("")
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn strings(cells: &[&str]) -> Vec<String> {
    cells.iter().map(|c| c.to_string()).collect()
}

/// Builds the summary for the kind of the first successful record. Failed records are
/// skipped.
pub fn report(records: &[RunRecord]) -> Report {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let Some(kind) = ok.first().map(|r| r.kind).or(records.first().map(|r| r.kind)) else {
        return Report { title: "report".into(), ..Report::default() };
    };
    let rows: Vec<BTreeMap<&str, &str>> = ok.iter().flat_map(|r| r.row_maps()).collect();
    match kind {
        ExperimentKind::McGap => gap_table(&rows),
        ExperimentKind::Penetration => penetration_table(&rows),
        ExperimentKind::ExactVerify => fitted_c2_table(&rows),
        ExperimentKind::Animals => animal_table(&rows),
        ExperimentKind::PeierlsScan => peierls_table(&rows),
        ExperimentKind::FieldScan => field_table(&rows),
        ExperimentKind::FatSum => fat_table(&rows),
    }
}

fn gap_table(rows: &[BTreeMap<&str, &str>]) -> Report {
    type Key<'a> = (&'a str, &'a str, &'a str, &'a str, &'a str, &'a str, &'a str, u64);
    let mut sides: BTreeMap<Key, [Option<(f64, f64)>; 2]> = BTreeMap::new();
    for m in rows.iter().filter(|m| s(m, "observable") == "sigma_origin") {
        let l: u64 = s(m, "L").parse().unwrap_or(0);
        let key = (s(m, "d"), s(m, "alpha"), s(m, "beta"), s(m, "h_star"), s(m, "J"), s(m, "algorithm"), s(m, "seed"), l);
        let slot = match s(m, "boundary") {
            "plus" => 0,
            "minus" => 1,
            _ => continue,
        };
        if let (Some(mean), Some(se)) = (f(m, "mean"), f(m, "std_error")) {
            sides.entry(key).or_default()[slot] = Some((mean, se));
        }
    }
    let mut rep = Report {
        title: "boundary gap m+(0) - m-(0) vs L".into(),
        header: strings(&["d", "alpha", "beta", "h_star", "J", "seed", "L", "m_plus", "m_minus", "gap", "std_error"]),
        ..Report::default()
    };
    for ((d, alpha, beta, h, j, _alg, seed, l), pair) in sides {
        let [Some(p), Some(m)] = pair else { continue };
        let gap = p.0 - m.0;
        let se = p.1.hypot(m.1);
        rep.rows.push(vec![
            d.into(),
            alpha.into(),
            beta.into(),
            h.into(),
            j.into(),
            seed.into(),
            l.to_string(),
            fmt(p.0),
            fmt(m.0),
            fmt(gap),
            fmt(se),
        ]);
        rep.plot.push((format!("gap d={d} alpha={alpha} beta={beta} h_star={h} seed={seed}"), l as f64, gap));
    }
    rep
}

fn penetration_table(rows: &[BTreeMap<&str, &str>]) -> Report {
    let mut rep = Report {
        title: "penetration-free fraction vs L".into(),
        header: strings(&["d", "alpha", "beta", "boundary", "seed", "L", "fraction", "std_error", "ci_low", "ci_high", "n_samples"]),
        ..Report::default()
    };
    for m in rows {
        let Some(frac) = f(m, "mean") else { continue };
        rep.rows.push(vec![
            s(m, "d").into(),
            s(m, "alpha").into(),
            s(m, "beta").into(),
            s(m, "boundary").into(),
            s(m, "seed").into(),
            s(m, "L").into(),
            fmt(frac),
            f(m, "std_error").map(fmt).unwrap_or_default(),
            f(m, "ci_low").map(fmt).unwrap_or_default(),
            f(m, "ci_high").map(fmt).unwrap_or_default(),
            s(m, "n_samples").into(),
        ]);
        if let Some(l) = f(m, "L") {
            let series = format!("fraction d={} alpha={} beta={} seed={}", s(m, "d"), s(m, "alpha"), s(m, "beta"), s(m, "seed"));
            rep.plot.push((series, l, frac));
        }
    }
    rep
}

fn fitted_c2_table(rows: &[BTreeMap<&str, &str>]) -> Report {
    let mut rep = Report {
        title: "slim-ensemble log ratio and fitted c2".into(),
        header: strings(&["d", "L", "alpha", "beta", "h_star", "J", "boundary", "log_ratio", "fitted_c2"]),
        ..Report::default()
    };
    let mut by_point: BTreeMap<Vec<&str>, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for m in rows {
        let key = vec![s(m, "d"), s(m, "L"), s(m, "alpha"), s(m, "beta"), s(m, "h_star"), s(m, "J"), s(m, "boundary")];
        let e = by_point.entry(key).or_default();
        match s(m, "observable") {
            "slim_log_ratio" => e.0 = f(m, "mean"),
            "fitted_c2" => e.1 = f(m, "mean"),
            _ => {}
        }
    }
    for (key, (lr, c2)) in by_point {
        let Some(lr) = lr else { continue };
        let mut row: Vec<String> = key.iter().map(|k| k.to_string()).collect();
        row.push(fmt(lr));
        row.push(c2.map(fmt).unwrap_or_else(|| "-".into()));
        if let (Some(c2), Ok(beta)) = (c2, key[3].parse::<f64>()) {
            rep.plot.push((format!("fitted_c2 d={} L={} alpha={} h_star={}", key[0], key[1], key[2], key[4]), beta, c2));
        }
        rep.rows.push(row);
    }
    rep
}

fn animal_table(rows: &[BTreeMap<&str, &str>]) -> Report {
    let mut rep = Report {
        title: "star-animal partial sums".into(),
        header: strings(&["d", "beta", "J", "size", "count", "partial_sum"]),
        ..Report::default()
    };
    for m in rows {
        let (Some(size), Some(sum)) = (f(m, "size"), f(m, "partial_sum")) else { continue };
        rep.rows.push(vec![
            s(m, "d").into(),
            s(m, "beta").into(),
            s(m, "J").into(),
            s(m, "size").into(),
            s(m, "count").into(),
            format!("{sum:.12e}"),
        ]);
        rep.plot.push((format!("partial_sum d={} beta={} J={}", s(m, "d"), s(m, "beta"), s(m, "J")), size, sum));
    }
    rep
}

fn peierls_table(rows: &[BTreeMap<&str, &str>]) -> Report {
    let mut rep = Report {
        title: "Peierls ratio against e^{-beta J |dI|}".into(),
        header: strings(&["d", "L", "alpha", "beta", "h_star", "J", "interiors", "violations", "max_ratio_over_bound"]),
        ..Report::default()
    };
    let mut by_point: BTreeMap<Vec<&str>, (usize, usize, f64)> = BTreeMap::new();
    for m in rows {
        let key = vec![s(m, "d"), s(m, "L"), s(m, "alpha"), s(m, "beta"), s(m, "h_star"), s(m, "J")];
        let e = by_point.entry(key).or_insert((0, 0, 0.0));
        e.0 += 1;
        e.1 += usize::from(s(m, "holds") != "true");
        if let (Some(r), Some(b)) = (f(m, "ratio"), f(m, "bound")) {
            e.2 = e.2.max(r / b);
        }
    }
    for (key, (n, bad, worst)) in by_point {
        let mut row: Vec<String> = key.iter().map(|k| k.to_string()).collect();
        row.extend([n.to_string(), bad.to_string(), fmt(worst)]);
        rep.rows.push(row);
    }
    rep
}

fn field_table(rows: &[BTreeMap<&str, &str>]) -> Report {
    let mut rep = Report {
        title: "surface-normalized ball sums".into(),
        header: strings(&["d", "alpha", "h_star", "radius", "ball_sum", "normalized_sum"]),
        ..Report::default()
    };
    for m in rows {
        let (Some(r), Some(v)) = (f(m, "radius"), f(m, "normalized_sum")) else { continue };
        rep.rows.push(vec![
            s(m, "d").into(),
            s(m, "alpha").into(),
            s(m, "h_star").into(),
            s(m, "radius").into(),
            f(m, "ball_sum").map(fmt).unwrap_or_default(),
            fmt(v),
        ]);
        rep.plot.push((format!("normalized d={} alpha={} h_star={}", s(m, "d"), s(m, "alpha"), s(m, "h_star")), r, v));
    }
    rep
}

fn fat_table(rows: &[BTreeMap<&str, &str>]) -> Report {
    let header = ["d", "alpha", "beta", "h_star", "J", "box_radius", "max_boundary", "sum", "product_bound", "fat_count"];
    let mut rep = Report { title: "partial fat-contour sums".into(), header: strings(&header), ..Report::default() };
    for m in rows {
        rep.rows.push(header.iter().map(|k| s(m, k).to_string()).collect());
        if let (Some(b), Some(v)) = (f(m, "beta"), f(m, "sum")) {
            rep.plot.push((format!("fat_sum d={} alpha={} h_star={}", s(m, "d"), s(m, "alpha"), s(m, "h_star")), b, v));
        }
    }
    rep
}
