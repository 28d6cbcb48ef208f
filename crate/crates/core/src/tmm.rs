//! Normal-incidence transfer matrices for lossless dielectric stacks:
//! reflectance/transmittance spectra, stopband centres and a Fabry-Pérot
//! Q estimate.

use rayon::prelude::*;

use crate::{Error, Result, C64};

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub index: f64,
    pub thickness_nm: f64,
}

impl Layer {
    pub fn new(index: f64, thickness_nm: f64) -> Result<Self> {
        if !(index.is_finite() && index >= 1.0) {
            return Err(Error::InvalidParameter(format!("refractive index {index} must be real and >= 1")));
        }
        if !(thickness_nm.is_finite() && thickness_nm > 0.0) {
            return Err(Error::InvalidParameter(format!("thickness {thickness_nm} nm must be > 0")));
        }
        Ok(Self { index, thickness_nm })
    }

    /// Quarter-wave layer at `wavelength_nm`.
    pub fn quarter_wave(index: f64, wavelength_nm: f64) -> Result<Self> {
        Self::new(index, wavelength_nm / (4.0 * index))
    }

    /// Characteristic matrix `[[cos δ, i sin δ/n], [i n sin δ, cos δ]]`.
    pub fn matrix(&self, wavelength_nm: f64) -> [[C64; 2]; 2] {
        let delta = 2.0 * PI * self.index * self.thickness_nm / wavelength_nm;
        let (s, c) = delta.sin_cos();
        let i = C64::i();
        [[C64::new(c, 0.0), i * (s / self.index)], [i * (s * self.index), C64::new(c, 0.0)]]
    }
}

/// Layers listed from the incident side towards the substrate.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<Layer>,
    incident: f64,
    substrate: f64,
}

/// One layer kind of a repeated period whose thickness drifts linearly from
/// the first to the last repetition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftingLayer {
    pub index: f64,
    pub start_nm: f64,
    pub end_nm: f64,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>, incident: f64, substrate: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("layer stack is empty".into()));
        }
        for n in [incident, substrate] {
            if !(n.is_finite() && n >= 1.0) {
                return Err(Error::InvalidParameter(format!("outer medium index {n} must be >= 1")));
            }
        }
        Ok(Self { layers, incident, substrate })
    }

    /// `pairs` repetitions of `period`, each layer's thickness interpolated
    /// linearly from `start_nm` (first repetition) to `end_nm` (last).
    pub fn periodic(period: &[DriftingLayer], pairs: usize, incident: f64, substrate: f64) -> Result<Self> {
        if pairs == 0 || period.is_empty() {
            return Err(Error::InvalidParameter("periodic stack needs at least one layer and one repetition".into()));
        }
        let mut layers = Vec::with_capacity(pairs * period.len());
        for p in 0..pairs {
            let f = if pairs > 1 { p as f64 / (pairs - 1) as f64 } else { 0.0 };
            for l in period {
                layers.push(Layer::new(l.index, l.start_nm + f * (l.end_nm - l.start_nm))?);
            }
        }
        Self::new(layers, incident, substrate)
    }

    /// Quarter-wave (H L)^pairs stack at `wavelength_nm`.
    pub fn quarter_wave(
        n_high: f64,
        n_low: f64,
        pairs: usize,
        wavelength_nm: f64,
        incident: f64,
        substrate: f64,
    ) -> Result<Self> {
        let h = Layer::quarter_wave(n_high, wavelength_nm)?;
        let l = Layer::quarter_wave(n_low, wavelength_nm)?;
        let period = [
            DriftingLayer { index: h.index, start_nm: h.thickness_nm, end_nm: h.thickness_nm },
            DriftingLayer { index: l.index, start_nm: l.thickness_nm, end_nm: l.thickness_nm },
        ];
        Self::periodic(&period, pairs, incident, substrate)
    }

    /// Parses the plain-text stack format:
    ///
    /// ```text
    /// # comment
    /// incident 1.0
    /// substrate 3.49
    /// repeat 46 {
    ///   3.49 64.6 63.9   # thickness drifts across the repetitions
    ///   2.92 80.2 79.8
    /// }
    /// 3.49 69.8
    /// ```
    ///
    /// A third column on a layer line sets the thickness of the last
    /// repetition of the innermost enclosing `repeat` block.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .peekable();
        let mut incident = 1.0;
        let mut substrate = 1.0;
        let layers = parse_block(&mut lines, &mut incident, &mut substrate, None, 0)?;
        Self::new(layers, incident, substrate)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn incident(&self) -> f64 {
        self.incident
    }

    pub fn substrate(&self) -> f64 {
        self.substrate
    }

    /// Same layers in reverse order with the outer media swapped.
    pub fn reversed(&self) -> Self {
        Self { layers: self.layers.iter().rev().copied().collect(), incident: self.substrate, substrate: self.incident }
    }

    pub fn total_matrix(&self, wavelength_nm: f64) -> [[C64; 2]; 2] {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        self.layers.iter().fold([[one, zero], [zero, one]], |m, l| mul(&m, &l.matrix(wavelength_nm)))
    }

    /// Amplitude reflection coefficient and power transmittance.
    pub fn response(&self, wavelength_nm: f64) -> (C64, f64) {
        let m = self.total_matrix(wavelength_nm);
        let (n0, ns) = (self.incident, self.substrate);
        let b = m[0][0] + m[0][1] * ns;
        let c = m[1][0] + m[1][1] * ns;
        let denom = b * n0 + c;
        let r = (b * n0 - c) / denom;
        (r, 4.0 * n0 * ns / denom.norm_sqr())
    }

    /// Group-delay penetration depth into the stack from the incident side,
    /// L = (λ²/4π)·|dφ_r/dλ|, in nm of the incident medium.
    pub fn penetration_depth_nm(&self, wavelength_nm: f64) -> f64 {
        let h = wavelength_nm * 1e-6;
        let phase = |wl: f64| self.response(wl).0.arg();
        let mut dphi = phase(wavelength_nm + h) - phase(wavelength_nm - h);
        dphi -= 2.0 * PI * (dphi / (2.0 * PI)).round();
        wavelength_nm * wavelength_nm / (4.0 * PI) * (dphi / (2.0 * h)).abs() / self.incident
    }
}

type LineIter<'a, I> = std::iter::Peekable<I>;

fn parse_block<'a, I: Iterator<Item = (usize, &'a str)>>(
    lines: &mut LineIter<'a, I>,
    incident: &mut f64,
    substrate: &mut f64,
    repetition: Option<(usize, usize)>,
    depth: usize,
) -> Result<Vec<Layer>> {
    let bad = |n: usize, msg: &str| Error::InvalidParameter(format!("stack line {n}: {msg}"));
    let num = |n: usize, s: &str| s.parse::<f64>().map_err(|_| bad(n, &format!("cannot parse number '{s}'")));
    let mut out = Vec::new();
    while let Some((n, line)) = lines.next() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["}"] if depth > 0 => return Ok(out),
            ["}"] => return Err(bad(n, "unmatched '}'")),
            ["incident", v] => *incident = num(n, v)?,
            ["substrate", v] => *substrate = num(n, v)?,
            ["repeat", count, "{"] => {
                let count: usize = count.parse().map_err(|_| bad(n, "repeat count must be a positive integer"))?;
                if count == 0 {
                    return Err(bad(n, "repeat count must be a positive integer"));
                }
                // Parse the body once per repetition so drifting layers see
                // their own repetition index.
                let body: Vec<(usize, &'a str)> = collect_body(lines, n)?;
                for k in 0..count {
                    let mut it = body.iter().copied().peekable();
                    let mut inner = parse_block(&mut it, incident, substrate, Some((k, count)), depth + 1)?;
                    out.append(&mut inner);
                }
            }
            [idx, d] => out.push(Layer::new(num(n, idx)?, num(n, d)?).map_err(|e| bad(n, &e.to_string()))?),
            [idx, d0, d1] => {
                let Some((k, count)) = repetition else {
                    return Err(bad(n, "a drifting layer must sit inside a repeat block"));
                };
                let f = if count > 1 { k as f64 / (count - 1) as f64 } else { 0.0 };
                let (a, b) = (num(n, d0)?, num(n, d1)?);
                out.push(Layer::new(num(n, idx)?, a + f * (b - a)).map_err(|e| bad(n, &e.to_string()))?);
            }
            _ => return Err(bad(n, &format!("unrecognised line '{line}'"))),
        }
    }
    if depth > 0 {
        return Err(Error::InvalidParameter("unterminated repeat block".into()));
    }
    Ok(out)
}

/// Lines up to the matching `}` (inclusive), leaving the iterator after it.
fn collect_body<'a, I: Iterator<Item = (usize, &'a str)>>(
    lines: &mut LineIter<'a, I>,
    opened_at: usize,
) -> Result<Vec<(usize, &'a str)>> {
    let mut depth = 1;
    let mut body = Vec::new();
    for (n, line) in lines.by_ref() {
        if line.ends_with('{') {
            depth += 1;
        } else if line == "}" {
            depth -= 1;
        }
        body.push((n, line));
        if depth == 0 {
            return Ok(body);
        }
    }
    Err(Error::InvalidParameter(format!("stack line {opened_at}: unterminated repeat block")))
}

fn mul(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectanceSpectrum {
    pub wavelength_nm: Vec<f64>,
    pub reflectance: Vec<f64>,
    pub transmittance: Vec<f64>,
}

impl ReflectanceSpectrum {
    pub fn absorptance(&self) -> Vec<f64> {
        self.reflectance.iter().zip(&self.transmittance).map(|(r, t)| 1.0 - r - t).collect()
    }
}

/// Evenly spaced wavelength grid, both ends included.
pub fn wavelength_grid(start_nm: f64, stop_nm: f64, points: usize) -> Result<Vec<f64>> {
    if !(start_nm > 0.0 && stop_nm > start_nm && points >= 2) {
        return Err(Error::InvalidParameter(format!("wavelength grid {start_nm}..{stop_nm} nm with {points} points")));
    }
    Ok((0..points).map(|k| start_nm + (stop_nm - start_nm) * k as f64 / (points - 1) as f64).collect())
}

pub fn stack_spectrum(stack: &LayerStack, grid: &[f64]) -> Result<ReflectanceSpectrum> {
    if grid.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParameter("wavelengths must be finite and > 0".into()));
    }
    let (reflectance, transmittance): (Vec<f64>, Vec<f64>) = grid
        .par_iter()
        .map(|&w| {
            let (r, t) = stack.response(w);
            (r.norm_sqr(), t)
        })
        .unzip();
    Ok(ReflectanceSpectrum { wavelength_nm: grid.to_vec(), reflectance, transmittance })
}

/// Centre of the contiguous high-reflectance band (R > 0.999·max) around
/// the global maximum. Band edges are interpolated at the threshold and
/// averaged in wavenumber, where a quarter-wave stopband is symmetric.
pub fn stopband_center(spectrum: &ReflectanceSpectrum) -> Result<f64> {
    let r = &spectrum.reflectance;
    let (k, &max) = r.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).ok_or(Error::NoStopband)?;
    if !(max > 0.5) {
        return Err(Error::NoStopband);
    }
    let level = 0.999 * max;
    let mut lo = k;
    while lo > 0 && r[lo - 1] > level {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < r.len() && r[hi + 1] > level {
        hi += 1;
    }
    if lo == 0 || hi + 1 == r.len() {
        return Err(Error::NoStopband);
    }
    let w = &spectrum.wavelength_nm;
    let cross = |inside: usize, outside: usize| {
        let f = (r[inside] - level) / (r[inside] - r[outside]);
        w[inside] + f * (w[outside] - w[inside])
    };
    let (a, b) = (cross(lo, lo - 1), cross(hi, hi + 1));
    Ok(2.0 / (1.0 / a + 1.0 / b))
}

/// F = 2π/(T₁ + T₂ + losses).
pub fn finesse(t1: f64, t2: f64, losses: f64) -> Result<f64> {
    for (name, v) in [("T1", t1), ("T2", t2), ("losses", losses)] {
        if !(v.is_finite() && (0.0..1.0).contains(&v)) {
            return Err(Error::InvalidParameter(format!("{name} = {v} must lie in [0, 1)")));
        }
    }
    let total = t1 + t2 + losses;
    if total <= 0.0 {
        return Err(Error::InvalidParameter("a lossless closed cavity has infinite finesse".into()));
    }
    Ok(2.0 * PI / total)
}

/// Q = F·2L_eff/λ.
pub fn cavity_q_estimate(t1: f64, t2: f64, losses: f64, l_eff_nm: f64, wavelength_nm: f64) -> Result<f64> {
    if !(l_eff_nm > 0.0 && wavelength_nm > 0.0) {
        return Err(Error::InvalidParameter("effective length and wavelength must be > 0".into()));
    }
    Ok(finesse(t1, t2, losses)? * 2.0 * l_eff_nm / wavelength_nm)
}
