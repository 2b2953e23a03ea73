//! SVG bar chart of per-channel importance.

use std::fmt::Write as _;

use spectra_core::datacube::WavelengthGrid;
use spectra_core::reduction::ChannelRanking;

use crate::error::CliError;

const BAR: f64 = 3.0;
const PLOT_H: f64 = 240.0;
const LEFT: f64 = 56.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 40.0;

fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One bar per channel in wavelength order; the `top_n` highest-ranked
/// channels are drawn in a highlight colour and carry `class="top"`.
/// Negative scores (possible for permutation importance) hang below the axis.
pub fn importance_svg(ranking: &ChannelRanking, grid: &WavelengthGrid, top_n: usize, title: &str) -> Result<String, CliError> {
    let c = ranking.channel_count();
    if c == 0 || ranking.is_empty() {
        return Err(CliError::Usage("ranking is empty; nothing to plot".into()));
    }
    if c != grid.len() {
        return Err(CliError::Config(format!("ranking has {c} channels but the grid has {}", grid.len())));
    }
    let top = ranking.top(top_n.min(c))?;
    let scores = ranking.scores_by_channel();
    let hi = scores.iter().copied().fold(0.0f64, f64::max);
    let lo = scores.iter().copied().fold(0.0f64, f64::min);
    let span = if hi - lo > 0.0 { hi - lo } else { 1.0 };
    let zero_y = TOP + PLOT_H * hi / span;
    let width = LEFT + BAR * c as f64 + 16.0;
    let height = TOP + PLOT_H + BOTTOM;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        num(width),
        num(height),
        num(width),
        num(height)
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r#"<text x="{}" y="20" font-family="sans-serif" font-size="13">{}</text>"#, num(LEFT), escape(title));
    for (ch, &v) in scores.iter().enumerate() {
        let h = PLOT_H * v.abs() / span;
        let y = if v >= 0.0 { zero_y - h } else { zero_y };
        let flagged = top.contains(&ch);
        let (class, fill) = if flagged { ("top", "#d62728") } else { ("bar", "#8c8c8c") };
        let _ = writeln!(
            s,
            r#"<rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="{fill}"><title>ch {ch} {} nm: {}</title></rect>"#,
            num(LEFT + BAR * ch as f64),
            num(y),
            num(BAR * 0.8),
            num(h),
            num(grid.points()[ch]),
            v
        );
    }
    let axis_end = LEFT + BAR * c as f64;
    let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, num(LEFT), num(zero_y), num(axis_end), num(zero_y));
    let base = TOP + PLOT_H + 16.0;
    for ch in [0, c / 2, c - 1] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{} nm</text>"#,
            num(LEFT + BAR * ch as f64),
            num(base),
            num(grid.points()[ch])
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">wavelength</text>"#,
        num((LEFT + axis_end) / 2.0),
        num(base + 16.0)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spectra_core::reduction::RankingMethod;

    fn ranking(c: usize) -> ChannelRanking {
        let scores: Vec<f64> = (0..c).map(|i| ((i * 37) % c) as f64 / c as f64).collect();
        ChannelRanking::from_scores(RankingMethod::FeatureImportance, &scores)
    }

    #[test]
    fn one_bar_per_channel_with_top_flagged() {
        let grid = WavelengthGrid::default();
        let svg = importance_svg(&ranking(300), &grid, 6, "FI").unwrap();
        assert_eq!(svg.matches("<rect ").count(), 300);
        assert_eq!(svg.matches(r#"class="top""#).count(), 6);
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg, importance_svg(&ranking(300), &grid, 6, "FI").unwrap());
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        assert!(importance_svg(&ranking(10), &WavelengthGrid::default(), 6, "FI").is_err());
    }

    #[test]
    fn empty_ranking_is_an_error() {
        let empty = ChannelRanking::from_scores(RankingMethod::FeatureImportance, &[]);
        assert!(importance_svg(&empty, &WavelengthGrid::default(), 6, "FI").is_err());
    }

    #[test]
    fn title_is_escaped() {
        let grid = WavelengthGrid::linear(400.0, 700.0, 10).unwrap();
        let svg = importance_svg(&ranking(10), &grid, 3, "a<b & c").unwrap();
        assert!(svg.contains("a&lt;b &amp; c"));
    }
}
