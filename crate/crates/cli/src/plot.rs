use std::io::{self, Write};
use std::path::Path;

use multisense::loss::LossReportRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Svg,
    /// Whitespace-separated `rank loss token` rows for gnuplot.
    Dat,
}

impl Format {
    pub fn infer(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("svg") => Format::Svg,
            _ => Format::Dat,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "svg" => Ok(Format::Svg),
            "dat" => Ok(Format::Dat),
            other => Err(format!("unknown plot format `{other}` (expected svg or dat)")),
        }
    }
}

fn sorted(rows: &[LossReportRow]) -> Vec<&LossReportRow> {
    let mut v: Vec<&LossReportRow> = rows.iter().collect();
    v.sort_by(|a, b| a.average_loss.total_cmp(&b.average_loss));
    v
}

pub fn write<W: Write>(rows: &[LossReportRow], format: Format, threshold: Option<f64>, out: &mut W) -> io::Result<()> {
    let rows = sorted(rows);
    match format {
        Format::Dat => {
            writeln!(out, "# rank\tavg_loss\ttoken\tfrequency")?;
            for (i, r) in rows.iter().enumerate() {
                writeln!(out, "{}\t{}\t{}\t{}", i + 1, r.average_loss, r.token, r.frequency)?;
            }
            Ok(())
        }
        Format::Svg => svg(&rows, threshold, out),
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn svg<W: Write>(rows: &[&LossReportRow], threshold: Option<f64>, out: &mut W) -> io::Result<()> {
    let lo = rows[0].average_loss.min(threshold.unwrap_or(f64::INFINITY));
    let hi = rows[rows.len() - 1].average_loss.max(threshold.unwrap_or(f64::NEG_INFINITY));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |i: usize| {
        let steps = (rows.len() - 1).max(1) as f64;
        MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / steps
    };
    let y = |loss: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (loss - lo) / span;

    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )?;
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#)?;
    writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#)?;
    writeln!(out, r#"<text x="{x0}" y="{}" font-size="12">{lo:.4}</text>"#, y0 + 15.0)?;
    writeln!(out, r#"<text x="{x0}" y="{}" font-size="12">{hi:.4}</text>"#, y1 - 5.0)?;
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">words sorted by average contextual loss ({})</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        rows.len()
    )?;
    if let Some(t) = threshold {
        writeln!(
            out,
            r#"<line x1="{x0}" y1="{yt:.2}" x2="{x1}" y2="{yt:.2}" stroke="red" stroke-dasharray="4 3"/>"#,
            yt = y(t)
        )?;
    }
    write!(out, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points=""#)?;
    for (i, r) in rows.iter().enumerate() {
        if i > 0 {
            write!(out, " ")?;
        }
        write!(out, "{:.2},{:.2}", x(i), y(r.average_loss))?;
    }
    writeln!(out, r#""/>"#)?;
    for (i, r) in rows.iter().enumerate() {
        writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="steelblue"><title>{} {}</title></circle>"#,
            x(i),
            y(r.average_loss),
            escape(&r.token),
            r.average_loss
        )?;
    }
    writeln!(out, "</svg>")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(token: &str, loss: f64) -> LossReportRow {
        LossReportRow {
            token: token.into(),
            frequency: 3,
            average_loss: loss,
        }
    }

    #[test]
    fn data_rows_ascend() {
        let rows = vec![row("c", 2.0), row("a", 0.5), row("b", 1.0)];
        let mut out = Vec::new();
        write(&rows, Format::Dat, None, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let tokens: Vec<&str> = text.lines().skip(1).map(|l| l.split('\t').nth(2).unwrap()).collect();
        assert_eq!(tokens, ["a", "b", "c"]);
    }

    #[test]
    fn svg_has_one_marker_per_word() {
        let rows = vec![row("x<y", 1.0)];
        let mut out = Vec::new();
        write(&rows, Format::Svg, Some(1.5), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.matches("<circle").count(), 1);
        assert!(text.contains("x&lt;y"));
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(Format::infer(Path::new("a/b.SVG")), Format::Svg);
        assert_eq!(Format::infer(Path::new("curve.dat")), Format::Dat);
        assert_eq!(Format::infer(Path::new("curve")), Format::Dat);
    }
}
