//! Plain-text codebook format.
//!
//! ```text
//! M N dx dz lambda delta S
//! s t ring r re_0 im_0 re_1 im_1 ...      (S rows, 2·M·N reals each)
//! ```
//!
//! Reals are written with 17 significant digits; the far-field distance is
//! written as `inf` and a missing threshold as `none`.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::{grid_value, SamplingPoint, SingleBeamCodebook};
use crate::array::{ArrayConfig, Direction, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

pub(crate) fn fmt_real(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

pub(crate) fn parse_real(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Parse(format!("expected a real number, got {tok:?}")))
}

pub(crate) fn parse_usize(tok: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::Parse(format!("expected a non-negative integer, got {tok:?}")))
}

pub(crate) fn header_line(cfg: &ArrayConfig, threshold: Option<f64>, rows: usize) -> String {
    format!(
        "{} {} {} {} {} {} {}",
        cfg.m,
        cfg.n,
        fmt_real(cfg.dx),
        fmt_real(cfg.dz),
        fmt_real(cfg.wavelength),
        threshold.map_or_else(|| "none".to_string(), fmt_real),
        rows
    )
}

pub(crate) fn parse_header(line: &str) -> Result<(ArrayConfig, Option<f64>, usize)> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 7 {
        return Err(Error::Parse(format!("header needs 7 fields, found {}", toks.len())));
    }
    let wavelength = parse_real(toks[4])?;
    let cfg = ArrayConfig {
        m: parse_usize(toks[0])?,
        n: parse_usize(toks[1])?,
        dx: parse_real(toks[2])?,
        dz: parse_real(toks[3])?,
        wavelength,
        carrier_hz: SPEED_OF_LIGHT / wavelength,
    };
    cfg.validate()?;
    let threshold = match toks[5] {
        "none" => None,
        t => Some(parse_real(t)?),
    };
    Ok((cfg, threshold, parse_usize(toks[6])?))
}

pub(crate) fn push_weights(line: &mut String, weights: &[Complex64]) {
    for z in weights {
        let _ = write!(line, " {} {}", fmt_real(z.re), fmt_real(z.im));
    }
}

pub(crate) fn parse_weights(toks: &[&str], count: usize) -> Result<Vec<Complex64>> {
    if toks.len() != 2 * count {
        return Err(Error::Parse(format!(
            "expected {} reals for {count} weights, found {}",
            2 * count,
            toks.len()
        )));
    }
    toks.chunks(2)
        .map(|pair| Ok(Complex64::new(parse_real(pair[0])?, parse_real(pair[1])?)))
        .collect()
}

pub fn render_codebook(cb: &SingleBeamCodebook) -> String {
    let mut out = header_line(&cb.array, cb.threshold, cb.len());
    out.push('\n');
    for (p, row) in cb.points.iter().zip(&cb.rows) {
        let mut line = format!("{} {} {} {}", p.s, p.t, p.ring, fmt_real(p.r));
        push_weights(&mut line, row);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn parse_codebook(text: &str) -> Result<SingleBeamCodebook> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty codebook file".into()))?;
    let (array, threshold, count) = parse_header(header)?;
    let mut points = Vec::with_capacity(count);
    let mut rows = Vec::with_capacity(count);
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 4 {
            return Err(Error::Parse(format!("short codebook row: {line:?}")));
        }
        let s = parse_usize(toks[0])?;
        let t = parse_usize(toks[1])?;
        if s == 0 || s > array.m || t == 0 || t > array.n {
            return Err(Error::Parse(format!("angle indices ({s}, {t}) out of range")));
        }
        points.push(SamplingPoint {
            s,
            t,
            ring: parse_usize(toks[2])?,
            direction: Direction {
                u: grid_value(t, array.n),
                c: grid_value(s, array.m),
            },
            r: parse_real(toks[3])?,
        });
        rows.push(parse_weights(&toks[4..], array.num_elements())?);
    }
    if rows.len() != count {
        return Err(Error::Parse(format!(
            "header declares {count} rows, found {}",
            rows.len()
        )));
    }
    let zeta = threshold.map(super::zeta_for_threshold).transpose()?;
    Ok(SingleBeamCodebook {
        array,
        points,
        rows,
        threshold,
        zeta,
    })
}

pub fn write_codebook(cb: &SingleBeamCodebook, path: &Path) -> Result<()> {
    std::fs::write(path, render_codebook(cb)).map_err(|e| Error::io(path, e))
}

pub fn read_codebook(path: &Path) -> Result<SingleBeamCodebook> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_codebook(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{build_codebook, dft_codebook, CodebookParams};

    #[test]
    fn text_round_trip_is_exact() {
        let cfg = ArrayConfig::half_wavelength(2, 8, 28e9).unwrap();
        let params = CodebookParams {
            r_min: 0.05,
            ..CodebookParams::for_array(&cfg)
        };
        let cb = build_codebook(&cfg, &params).unwrap();
        let text = render_codebook(&cb);
        assert!(text.lines().next().unwrap().ends_with(&format!(" {}", cb.len())));
        let back = parse_codebook(&text).unwrap();
        assert_eq!(back.rows, cb.rows);
        assert_eq!(back.points, cb.points);
        assert_eq!(back.threshold, cb.threshold);
        assert_eq!(back.array.m, 2);
        assert!((back.array.wavelength - cfg.wavelength).abs() == 0.0);

        let dft = dft_codebook(&cfg);
        let back = parse_codebook(&render_codebook(&dft)).unwrap();
        assert_eq!(back.threshold, None);
        assert_eq!(back.rows, dft.rows);
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(parse_codebook("").is_err());
        assert!(parse_codebook("2 2 0.1 0.1").is_err());
        let cfg = ArrayConfig::half_wavelength(1, 2, 28e9).unwrap();
        let mut text = render_codebook(&dft_codebook(&cfg));
        text.push_str("1 1 0 inf 1 0\n");
        assert!(parse_codebook(&text).is_err());
    }
}
