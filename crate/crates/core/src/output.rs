//! CSV and SVG emission for velocity tracks.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::ingest::GroundTruth;
use crate::track::VelocityTrack;

pub const CSV_HEADER: &str = "frame,method,mu,velocity_px_per_frame";

/// Formats `v` with `sig` significant digits, `%g` style: trailing zeros
/// dropped, exponent form outside `[1e-4, 10^sig)`.
pub fn format_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One row per (frame, method, μ); gaps leave the velocity field empty.
/// Velocities are multiplied by `scale` on the way out.
pub fn write_csv(tracks: &[VelocityTrack], scale: f64, mut w: impl Write) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for track in tracks {
        let method = track.method.map_or("", |m| m.as_str());
        for (frame, v) in track.frames.iter().zip(&track.velocity) {
            let v = v.map(|v| format_sig(v * scale, 6)).unwrap_or_default();
            let _ = writeln!(out, "{frame},{method},{},{v}", track.mu);
        }
    }
    w.write_all(out.as_bytes())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn label(track: &VelocityTrack) -> String {
    match track.method {
        Some(m) => format!("{m}, mu={}", track.mu),
        None => format!("mu={}", track.mu),
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

/// Velocity-vs-frame line chart, one polyline per track (broken at gaps),
/// plus the ground truth as a dashed line when given.
pub fn write_svg(
    tracks: &[VelocityTrack],
    truth: Option<&GroundTruth>,
    scale: f64,
    mut w: impl Write,
) -> io::Result<()> {
    let (width, height) = (800.0, 480.0);
    let (left, right, top, bottom) = (60.0, 200.0, 20.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let mut fmax = 1usize;
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in tracks {
        if let Some(&f) = t.frames.last() {
            fmax = fmax.max(f);
        }
        for v in t.velocity.iter().flatten() {
            vmin = vmin.min(v * scale);
            vmax = vmax.max(v * scale);
        }
    }
    if let Some(gt) = truth {
        fmax = fmax.max(gt.velocity.len().saturating_sub(1));
        for v in &gt.velocity {
            vmin = vmin.min(v * scale);
            vmax = vmax.max(v * scale);
        }
    }
    if !vmin.is_finite() {
        (vmin, vmax) = (0.0, 1.0);
    }
    if vmax - vmin < 1e-9 {
        vmin -= 0.5;
        vmax += 0.5;
    }
    let step = nice_step(vmax - vmin);
    vmin = (vmin / step).floor() * step;
    vmax = (vmax / step).ceil() * step;

    let px = |f: f64| left + plot_w * f / fmax as f64;
    let py = |v: f64| top + plot_h * (1.0 - (v - vmin) / (vmax - vmin));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    let mut v = vmin;
    while v <= vmax + step * 1e-6 {
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left + plot_w,
            left - 6.0,
            y + 4.0,
            format_sig(v, 4)
        );
        v += step;
    }
    let fstep = nice_step(fmax as f64).max(1.0);
    let mut f = 0.0;
    while f <= fmax as f64 + 1e-9 {
        let x = px(f);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{f}</text>"#,
            top + plot_h + 18.0
        );
        f += fstep;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">frame</text>"#,
        left + plot_w / 2.0,
        height - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">velocity</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    let mut legend: Vec<(String, &str, bool)> = Vec::new();
    if let Some(gt) = truth {
        let pts: Vec<String> = gt
            .velocity
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.1},{:.1}", px(i as f64), py(v * scale)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#000" stroke-dasharray="6 4"/>"##,
            pts.join(" ")
        );
        legend.push(("ground truth".into(), "#000", true));
    }
    for (i, track) in tracks.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut segment: Vec<String> = Vec::new();
        let mut segments = Vec::new();
        for (frame, v) in track.frames.iter().zip(&track.velocity) {
            match v {
                Some(v) => segment.push(format!("{:.1},{:.1}", px(*frame as f64), py(v * scale))),
                None if !segment.is_empty() => segments.push(std::mem::take(&mut segment)),
                None => {}
            }
        }
        if !segment.is_empty() {
            segments.push(segment);
        }
        let _ = writeln!(
            s,
            r#"<g class="track" stroke="{color}" fill="none"><title>{}</title>"#,
            label(track)
        );
        for seg in segments {
            let _ = writeln!(s, r#"<polyline points="{}"/>"#, seg.join(" "));
        }
        let _ = writeln!(s, "</g>");
        legend.push((label(track), color, false));
    }
    for (i, (text, color, dashed)) in legend.iter().enumerate() {
        let y = top + 10.0 + 18.0 * i as f64;
        let x = left + plot_w + 12.0;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"{dash}/><text class="legend" x="{:.1}" y="{:.1}">{text}</text>"#,
            x + 24.0,
            x + 30.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    w.write_all(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::Method;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(3.0, 6), "3");
        assert_eq!(format_sig(1.963495408, 6), "1.9635");
        assert_eq!(format_sig(3.27249234, 6), "3.27249");
        assert_eq!(format_sig(-0.654498469, 6), "-0.654498");
        assert_eq!(format_sig(123456.7, 6), "123457");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e+06");
        assert_eq!(format_sig(0.0000123456, 6), "1.23456e-05");
        assert_eq!(format_sig(0.000123456, 6), "0.000123456");
        assert_eq!(format_sig(9.9999996, 6), "10");
        assert_eq!(format_sig(0.0, 6), "0");
    }

    #[test]
    fn csv_rows_and_gaps() {
        let frames: Vec<usize> = (0..121).collect();
        let mut vel: Vec<Option<f64>> = frames.iter().map(|&f| Some(f as f64 * 0.1)).collect();
        vel[5] = None;
        let t = VelocityTrack::new(frames, vel, 0.15).with_method(Method::CsSm);
        let mut out = Vec::new();
        write_csv(&[t], 1.0, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 122);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "0,cs_sm,0.15,0");
        assert_eq!(lines[6], "5,cs_sm,0.15,");
        assert_eq!(lines[11], "10,cs_sm,0.15,1");
    }

    #[test]
    fn svg_has_one_line_per_track() {
        let mk = |m: Method| {
            VelocityTrack::new(
                vec![0, 1, 2, 3],
                vec![Some(1.0), Some(2.0), None, Some(2.5)],
                0.25,
            )
            .with_method(m)
        };
        let mut out = Vec::new();
        write_svg(&[mk(Method::CsSpec), mk(Method::CsSm)], None, 1.0, &mut out).unwrap();
        let svg = String::from_utf8(out).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches(r#"class="track""#).count(), 2);
        assert_eq!(svg.matches(r#"class="legend""#).count(), 2);
        assert!(svg.contains("cs_spec, mu=0.25"));
        assert!(svg.contains("cs_sm, mu=0.25"));
        // the gap splits each track into two polylines
        assert_eq!(svg.matches("<polyline").count(), 4);
    }
}
