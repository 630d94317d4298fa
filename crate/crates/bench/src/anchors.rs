//! Anchor files: a header `# class=<spherical|hyperbolic> d=<int>` followed by
//! one point per line, given as `d + 1` whitespace-separated ambient
//! coordinates of the unit model (pole last).

use std::fmt::Write as _;
use std::path::Path;

use geoaccel::manifold::{AmbientPoint, CurvatureClass, Geometry};
use nalgebra::DVector;

use crate::error::{BenchError, Result};

pub fn read_anchor_file(path: &Path) -> Result<(Geometry, usize, Vec<AmbientPoint>)> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_anchors(&text).map_err(|(line, message)| BenchError::AnchorFile {
        path: path.to_path_buf(),
        line,
        message,
    })
}

/// Parses anchor-file text; errors are `(line, message)`.
pub fn parse_anchors(text: &str) -> std::result::Result<(Geometry, usize, Vec<AmbientPoint>), (usize, String)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (geometry, d) = loop {
        match lines.next() {
            None => return Err((1, "missing header `# class=... d=...`".into())),
            Some((_, "")) => continue,
            Some((n, l)) => break parse_header(l).map_err(|m| (n, m))?,
        }
    };
    let class = CurvatureClass::unit(geometry);
    let mut points = Vec::new();
    for (n, l) in lines {
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let coords: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| (n, format!("cannot parse `{t}` as a number"))))
            .collect::<std::result::Result<_, _>>()?;
        if coords.len() != d + 1 {
            return Err((n, format!("expected {} coordinates, found {}", d + 1, coords.len())));
        }
        let p = AmbientPoint::new(DVector::from_vec(coords), class).map_err(|e| (n, e.to_string()))?;
        points.push(p);
    }
    if points.is_empty() {
        return Err((1, "no anchors".into()));
    }
    Ok((geometry, d, points))
}

fn parse_header(line: &str) -> std::result::Result<(Geometry, usize), String> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| "first line must be the header `# class=... d=...`".to_string())?;
    let mut geometry = None;
    let mut d = None;
    for token in body.split_whitespace() {
        match token.split_once('=') {
            Some(("class", v)) => {
                geometry = Some(v.parse::<Geometry>().map_err(|_| format!("unknown class `{v}`"))?);
            }
            Some(("d", v)) => {
                let n = v.parse::<usize>().map_err(|_| format!("cannot parse d=`{v}`"))?;
                if n == 0 {
                    return Err("d must be at least 1".into());
                }
                d = Some(n);
            }
            _ => return Err(format!("unexpected header token `{token}`")),
        }
    }
    Ok((
        geometry.ok_or("header lacks class=")?,
        d.ok_or("header lacks d=")?,
    ))
}

/// Renders points in the anchor-file format, coordinates with 17 significant
/// digits so that reading them back is exact.
pub fn format_anchors(points: &[AmbientPoint]) -> String {
    let mut out = String::new();
    if let Some(p) = points.first() {
        let _ = writeln!(out, "# class={} d={}", p.geometry(), p.dim());
    }
    for p in points {
        let row: Vec<String> = p.coords().iter().map(|c| format!("{c:.16e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let class = CurvatureClass::hyperbolic();
        let p = AmbientPoint::new(DVector::from_column_slice(&[0.3, -0.2, (1.0f64 + 0.13).sqrt()]), class).unwrap();
        let q = AmbientPoint::pole(2, class);
        let text = format_anchors(&[p.clone(), q.clone()]);
        let (g, d, pts) = parse_anchors(&text).unwrap();
        assert_eq!((g, d), (Geometry::Hyperbolic, 2));
        assert_eq!(pts, vec![p, q]);
    }

    #[test]
    fn errors_point_at_the_line() {
        let cases = [
            ("", 1),
            ("class=spherical d=2", 1),
            ("# class=cube d=2\n0 0 1", 1),
            ("# class=spherical d=2\n0 0 1\n0 1", 3),
            ("# class=spherical d=2\n0 0 1\n0 x 1", 3),
            ("# class=spherical d=2\n\n0 0 2", 3),
            ("# class=spherical d=2\n", 1),
        ];
        for (text, line) in cases {
            let err = parse_anchors(text).unwrap_err();
            assert_eq!(err.0, line, "{text:?}: {}", err.1);
        }
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let (_, _, pts) = parse_anchors("\n# class=spherical d=1\n# first\n0 1\n\n1 0\n").unwrap();
        assert_eq!(pts.len(), 2);
    }
}
