//! Complex samples on a uniform square-cell grid.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{sum_f64, ComplexSum};

/// Sample `(i, j)` sits at `origin + step·(i, j)`; storage is row-major
/// with `i` fastest, so index `j·nx + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    pub label: String,
    pub origin: [f64; 2],
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Complex64>,
}

/// Field metadata without the samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub label: String,
    pub origin: [f64; 2],
    pub step: f64,
    pub dims: [usize; 2],
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Rect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|k| p[k] >= self.lo[k] && p[k] <= self.hi[k])
    }

    pub fn grow(&self, m: f64) -> Rect {
        Rect {
            lo: [self.lo[0] - m, self.lo[1] - m],
            hi: [self.hi[0] + m, self.hi[1] + m],
        }
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            self.lo,
            [self.hi[0], self.lo[1]],
            [self.lo[0], self.hi[1]],
            self.hi,
        ]
    }

    /// Bounding box of a point set.
    pub fn bounding<I: IntoIterator<Item = [f64; 2]>>(pts: I) -> Rect {
        let mut r = Rect {
            lo: [f64::INFINITY; 2],
            hi: [f64::NEG_INFINITY; 2],
        };
        for p in pts {
            for k in 0..2 {
                r.lo[k] = r.lo[k].min(p[k]);
                r.hi[k] = r.hi[k].max(p[k]);
            }
        }
        r
    }

    pub fn intersect(&self, o: &Rect) -> Option<Rect> {
        let lo = [self.lo[0].max(o.lo[0]), self.lo[1].max(o.lo[1])];
        let hi = [self.hi[0].min(o.hi[0]), self.hi[1].min(o.hi[1])];
        (lo[0] <= hi[0] && lo[1] <= hi[1]).then_some(Rect { lo, hi })
    }
}

/// Index slack that still counts as on the grid edge.
const EDGE_SLACK: f64 = 1e-9;

impl SampledField {
    pub fn zeros(label: &str, origin: [f64; 2], step: f64, nx: usize, ny: usize) -> Self {
        Self {
            label: label.to_string(),
            origin,
            step,
            nx,
            ny,
            values: vec![Complex64::default(); nx * ny],
        }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn<F>(label: &str, origin: [f64; 2], step: f64, nx: usize, ny: usize, f: F) -> Self
    where
        F: Fn([f64; 2]) -> Complex64 + Sync,
    {
        use rayon::prelude::*;
        let mut out = Self::zeros(label, origin, step, nx, ny);
        out.values
            .par_chunks_mut(nx)
            .enumerate()
            .for_each(|(j, row)| {
                for (i, v) in row.iter_mut().enumerate() {
                    *v = f([origin[0] + step * i as f64, origin[1] + step * j as f64]);
                }
            });
        out
    }

    /// Grid covering `rect` with the given step, sampled from `f`.
    pub fn covering<F>(label: &str, rect: &Rect, step: f64, f: F) -> Self
    where
        F: Fn([f64; 2]) -> Complex64 + Sync,
    {
        let lo = [
            (rect.lo[0] / step).floor() * step,
            (rect.lo[1] / step).floor() * step,
        ];
        let nx = ((rect.hi[0] - lo[0]) / step).ceil() as usize + 1;
        let ny = ((rect.hi[1] - lo[1]) / step).ceil() as usize + 1;
        Self::from_fn(label, lo, step, nx, ny, f)
    }

    pub fn meta(&self) -> FieldMeta {
        FieldMeta {
            label: self.label.clone(),
            origin: self.origin,
            step: self.step,
            dims: [self.nx, self.ny],
        }
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + self.step * i as f64,
            self.origin[1] + self.step * j as f64,
        ]
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.nx + i]
    }

    pub fn bounds(&self) -> Rect {
        Rect {
            lo: self.origin,
            hi: self.point(self.nx - 1, self.ny - 1),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = ([f64; 2], Complex64)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (self.point(i, j), self.at(i, j))))
    }

    /// Bilinear interpolation, zero outside the grid box.
    pub fn interp(&self, t: [f64; 2]) -> Complex64 {
        let u = (t[0] - self.origin[0]) / self.step;
        let v = (t[1] - self.origin[1]) / self.step;
        let (mx, my) = ((self.nx - 1) as f64, (self.ny - 1) as f64);
        if !(u >= -EDGE_SLACK && v >= -EDGE_SLACK && u <= mx + EDGE_SLACK && v <= my + EDGE_SLACK) {
            return Complex64::default();
        }
        let u = u.clamp(0.0, mx);
        let v = v.clamp(0.0, my);
        let i = (u.floor() as usize).min(self.nx.saturating_sub(2));
        let j = (v.floor() as usize).min(self.ny.saturating_sub(2));
        let fu = u - i as f64;
        let fv = v - j as f64;
        if self.nx == 1 || self.ny == 1 {
            return self.at(i.min(self.nx - 1), j.min(self.ny - 1));
        }
        let a = self.at(i, j) * (1.0 - fu) + self.at(i + 1, j) * fu;
        let b = self.at(i, j + 1) * (1.0 - fu) + self.at(i + 1, j + 1) * fu;
        a * (1.0 - fv) + b * fv
    }

    pub fn cell_area(&self) -> f64 {
        self.step * self.step
    }

    /// `Σ |v|²·step²`.
    pub fn norm_sq(&self) -> f64 {
        sum_f64(self.values.iter().map(|v| v.norm_sqr())) * self.cell_area()
    }

    /// `Σ v·step²`.
    pub fn integral(&self) -> Complex64 {
        let mut s = ComplexSum::default();
        self.values.iter().for_each(|v| s.add(*v));
        s.value() * self.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    /// Largest `|a − b|` over samples; fields must share a grid.
    pub fn max_diff(&self, other: &SampledField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }

    pub fn check_same_grid(&self, other: &SampledField) -> Result<()> {
        if self.nx != other.nx
            || self.ny != other.ny
            || self.origin != other.origin
            || self.step != other.step
        {
            return Err(Error::InvalidParameter(format!(
                "fields {:?} and {:?} are on different grids",
                self.label, other.label
            )));
        }
        Ok(())
    }

    /// Sub-grid whose points cover `rect`, keeping the sample positions.
    pub fn crop(&self, rect: &Rect) -> SampledField {
        let Some(r) = rect.intersect(&self.bounds()) else {
            return SampledField::zeros(&self.label, self.origin, self.step, 1, 1);
        };
        let idx = |x: f64, o: f64| (x - o) / self.step;
        let i0 = idx(r.lo[0], self.origin[0]).floor().max(0.0) as usize;
        let j0 = idx(r.lo[1], self.origin[1]).floor().max(0.0) as usize;
        let i1 = (idx(r.hi[0], self.origin[0]).ceil() as usize).min(self.nx - 1);
        let j1 = (idx(r.hi[1], self.origin[1]).ceil() as usize).min(self.ny - 1);
        let (nx, ny) = (i1 - i0 + 1, j1 - j0 + 1);
        let mut values = Vec::with_capacity(nx * ny);
        for j in j0..=j1 {
            values.extend_from_slice(&self.values[j * self.nx + i0..=j * self.nx + i1]);
        }
        SampledField {
            label: self.label.clone(),
            origin: self.point(i0, j0),
            step: self.step,
            nx,
            ny,
            values,
        }
    }

    pub fn scaled(&self, s: Complex64) -> SampledField {
        SampledField {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    /// Header lines `label`, `origin`, `step`, `dims`, then `i,j,re,im` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "label,{}", self.label)?;
        writeln!(w, "origin,{},{}", self.origin[0], self.origin[1])?;
        writeln!(w, "step,{}", self.step)?;
        writeln!(w, "dims,{},{}", self.nx, self.ny)?;
        writeln!(w, "i,j,re,im")?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let v = self.at(i, j);
                writeln!(w, "{i},{j},{},{}", Num(v.re), Num(v.im))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut header = |key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {key} line")))??;
            let mut parts = line.trim_end().split(',');
            if parts.next() != Some(key) {
                return Err(Error::Parse(format!("expected {key} line, got {line:?}")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let label = header("label")?.join(",");
        let origin = parse_floats(&header("origin")?, 2)?;
        let step = parse_floats(&header("step")?, 1)?[0];
        let dims = header("dims")?;
        let (nx, ny) = match dims.as_slice() {
            [a, b] => (parse_usize(a)?, parse_usize(b)?),
            _ => return Err(Error::Parse("dims needs two entries".into())),
        };
        let cols = header("i")?;
        if cols != ["j", "re", "im"] {
            return Err(Error::Parse("expected column header i,j,re,im".into()));
        }
        if nx == 0 || ny == 0 || !(step > 0.0) {
            return Err(Error::Parse("empty grid or non-positive step".into()));
        }
        let mut field = SampledField::zeros(&label, [origin[0], origin[1]], step, nx, ny);
        let mut seen = vec![false; nx * ny];
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.trim_end().split(',').collect();
            let [i, j, re, im] = parts.as_slice() else {
                return Err(Error::Parse(format!("bad sample row {line:?}")));
            };
            let (i, j) = (parse_usize(i)?, parse_usize(j)?);
            if i >= nx || j >= ny {
                return Err(Error::Parse(format!("sample ({i}, {j}) outside dims")));
            }
            field.values[j * nx + i] = Complex64::new(parse_f64(re)?, parse_f64(im)?);
            seen[j * nx + i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Parse("field has missing samples".into()));
        }
        Ok(field)
    }

    /// Values-only companion of [`FieldMeta`]: one `re,im` row per sample.
    pub fn write_values_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "re,im")?;
        for v in &self.values {
            writeln!(w, "{},{}", Num(v.re), Num(v.im))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_meta_and_values<R: BufRead>(meta: &FieldMeta, r: R) -> Result<Self> {
        let [nx, ny] = meta.dims;
        let mut values = Vec::with_capacity(nx * ny);
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            if k == 0 && line.trim() == "re,im" {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.trim_end().split(',').collect();
            let [re, im] = parts.as_slice() else {
                return Err(Error::Parse(format!("bad value row {line:?}")));
            };
            values.push(Complex64::new(parse_f64(re)?, parse_f64(im)?));
        }
        if values.len() != nx * ny {
            return Err(Error::Parse(format!(
                "expected {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        Ok(SampledField {
            label: meta.label.clone(),
            origin: meta.origin,
            step: meta.step,
            nx,
            ny,
            values,
        })
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| Error::Parse(format!("number {s:?}: {e}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|e| Error::Parse(format!("integer {s:?}: {e}")))
}

fn parse_floats(parts: &[String], n: usize) -> Result<Vec<f64>> {
    if parts.len() != n {
        return Err(Error::Parse(format!(
            "expected {n} numbers, got {}",
            parts.len()
        )));
    }
    parts.iter().map(|p| parse_f64(p)).collect()
}

/// Shortest round-trip text for a sample: positional for ordinary
/// magnitudes, exponent form for tiny or huge ones.
struct Num(f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || (1e-4..1e6).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> SampledField {
        SampledField::from_fn("ramp", [-1.0, 0.5], 0.25, 9, 5, |t| {
            Complex64::new(2.0 * t[0] - t[1], t[0] * t[1])
        })
    }

    #[test]
    fn bilinear_is_exact_on_affine_data() {
        let f = SampledField::from_fn("aff", [0.0, 0.0], 0.5, 5, 5, |t| {
            Complex64::new(3.0 * t[0] - t[1] + 1.0, 0.0)
        });
        for t in [[0.3, 1.7], [1.99, 0.01], [2.0, 2.0], [0.0, 0.0]] {
            assert!(
                (f.interp(t).re - (3.0 * t[0] - t[1] + 1.0)).abs() < 1e-12,
                "{t:?}"
            );
        }
        assert_eq!(f.interp([-0.1, 1.0]), Complex64::default());
        assert_eq!(f.interp([1.0, 2.2]), Complex64::default());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let f = ramp();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = SampledField::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, f);

        let mut vals = Vec::new();
        f.write_values_csv(&mut vals).unwrap();
        let back = SampledField::from_meta_and_values(&f.meta(), vals.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn csv_rejects_damage() {
        let mut buf = Vec::new();
        ramp().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(SampledField::read_csv(truncated.as_bytes()).is_err());
        let bad = text.replacen("step,0.25", "step,abc", 1);
        assert!(SampledField::read_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn crop_keeps_positions() {
        let f = ramp();
        let c = f.crop(&Rect {
            lo: [-0.5, 0.7],
            hi: [0.2, 1.0],
        });
        for j in 0..c.ny {
            for i in 0..c.nx {
                assert_eq!(c.at(i, j), f.interp(c.point(i, j)));
            }
        }
        assert!(c.bounds().lo[0] <= -0.5 && c.bounds().hi[1] >= 1.0);
    }
}
