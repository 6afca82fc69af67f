//! Minimal SVG bar charts of one trial's scores.

use std::fmt::Write as _;

use crate::eval::registry::ScoredSpeaker;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One bar per speaker in the order given, a dashed line at `threshold`.
/// Bars are the only `rect` elements in the document.
pub fn score_chart_svg(title: &str, scores: &[ScoredSpeaker], threshold: f64) -> String {
    let lo = scores.iter().map(|s| s.score).fold(threshold.min(0.0), f64::min);
    let hi = scores.iter().map(|s| s.score).fold(threshold.max(0.0), f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let y_of = |v: f64| MARGIN + (hi - v) / span * plot_h;
    let zero = y_of(0.0);
    let slot = (WIDTH - 2.0 * MARGIN) / scores.len().max(1) as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"  <text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r##"  <line x1="{MARGIN}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#444" stroke-width="1"/>"##,
        WIDTH - MARGIN
    );
    for (i, s) in scores.iter().enumerate() {
        let x = MARGIN + i as f64 * slot + slot * 0.15;
        let top = y_of(s.score.max(0.0));
        let h = (y_of(s.score.min(0.0)) - top).max(0.5);
        let fill = if s.decision.is_accept() { "#2a7ab9" } else { "#a0a7b0" };
        let _ = writeln!(
            svg,
            r#"  <rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{h:.2}" fill="{fill}"><title>{}: {:.5}</title></rect>"#,
            slot * 0.7,
            escape(&s.speaker_id),
            s.score
        );
        let _ = writeln!(
            svg,
            r#"  <text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="10">{}</text>"#,
            x + slot * 0.35,
            HEIGHT - MARGIN / 2.0,
            escape(&s.speaker_id)
        );
    }
    let ty = y_of(threshold);
    let _ = writeln!(
        svg,
        r##"  <line x1="{MARGIN}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#c0392b" stroke-width="1.5" stroke-dasharray="6 4"/>"##,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r##"  <text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" fill="#c0392b">threshold {threshold}</text>"##,
        WIDTH - MARGIN + 2.0,
        ty + 3.0
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::Decision;

    #[test]
    fn one_rect_per_speaker() {
        let scores: Vec<ScoredSpeaker> = [("a<1>", 2.2), ("b", 0.45), ("c", -0.6)]
            .iter()
            .map(|(id, v)| ScoredSpeaker {
                speaker_id: id.to_string(),
                cluster_id: 0,
                raw_score: *v,
                score: *v,
                decision: if *v > 1.0 { Decision::Accept } else { Decision::Reject },
            })
            .collect();
        let svg = score_chart_svg("A & friends", &scores, 1.0);
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(svg.contains("a&lt;1&gt;"));
        assert!(svg.contains("A &amp; friends"));
    }
}
