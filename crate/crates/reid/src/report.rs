//! CMC report rendering: CSV, SVG plot, and a rank table.

use std::fmt::Write as _;

use reid_core::Report;

/// Ranks shown in the summary table.
pub const TABLE_RANKS: [usize; 3] = [1, 10, 20];

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// `method,rank,mean_rate,std_rate`, one row per method and rank.
pub fn cmc_csv(reports: &[Report]) -> String {
    let mut out = String::from("method,rank,mean_rate,std_rate\n");
    for r in reports {
        for (k, (mean, std)) in r.mean.iter().zip(&r.std).enumerate() {
            let _ = writeln!(out, "{},{},{:.6},{:.6}", r.method, k + 1, mean, std);
        }
    }
    out
}

/// `r,used_dims,rank1_mean,rank1_std,rank10_mean,rank20_mean`, one row per requested size.
pub fn sweep_csv(sweep: &[(usize, Report)]) -> String {
    let mut out = String::from("r,used_dims,rank1_mean,rank1_std,rank10_mean,rank20_mean\n");
    for (r, rep) in sweep {
        let used = rep.subspace_dims.iter().sum::<usize>() as f64 / rep.subspace_dims.len().max(1) as f64;
        let _ = writeln!(
            out,
            "{r},{used},{:.6},{:.6},{:.6},{:.6}",
            rep.mean_rank(1),
            rep.std.first().copied().unwrap_or(0.0),
            rep.mean_rank(10),
            rep.mean_rank(20)
        );
    }
    out
}

/// Plain-text table of mean rank-1/10/20 rates in percent.
pub fn rank_table(reports: &[Report]) -> String {
    let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut out = format!("{:<width$}", "method");
    for k in TABLE_RANKS {
        let _ = write!(out, "  {:>8}", format!("rank-{k}"));
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<width$}", r.method);
        for k in TABLE_RANKS {
            let _ = write!(out, "  {:>7.2}%", 100.0 * r.mean_rank(k));
        }
        out.push('\n');
    }
    out
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Self-contained SVG with one CMC polyline per report.
pub fn cmc_svg(reports: &[Report]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 150.0, 20.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let max_rank = reports.iter().map(|r| r.mean.len()).max().unwrap_or(1).max(2);
    let x = |rank: usize| left + pw * (rank - 1) as f64 / (max_rank - 1) as f64;
    let y = |rate: f64| top + ph * (1.0 - rate);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"  <rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    for tick in 0..=10 {
        let rate = tick as f64 / 10.0;
        let _ = writeln!(
            svg,
            r##"  <line x1="{left}" y1="{yy:.2}" x2="{x2}" y2="{yy:.2}" stroke="#dddddd"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{pct}</text>"##,
            yy = y(rate),
            x2 = left + pw,
            tx = left - 6.0,
            ty = y(rate) + 4.0,
            pct = tick * 10
        );
    }
    let step = (max_rank / 10).max(1);
    for rank in (1..=max_rank).filter(|r| *r == 1 || r % step == 0) {
        let _ = writeln!(
            svg,
            r#"  <text x="{:.2}" y="{}" text-anchor="middle">{rank}</text>"#,
            x(rank),
            top + ph + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r#"  <rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"  <text x="{:.2}" y="{}" text-anchor="middle">Rank</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        svg,
        r#"  <text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Matching rate (%)</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (i, r) in reports.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> =
            r.mean.iter().enumerate().map(|(k, &m)| format!("{:.2},{:.2}", x(k + 1), y(m))).collect();
        let _ = writeln!(
            svg,
            r#"  <polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"  <line x1="{lx}" y1="{ly}" x2="{lx2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{tx}" y="{ty}">{name} {pct:.2}%</text>"#,
            lx = left + pw + 10.0,
            lx2 = left + pw + 30.0,
            tx = left + pw + 36.0,
            ty = ly + 4.0,
            name = escape(&r.method),
            pct = 100.0 * r.mean_rank(1)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
