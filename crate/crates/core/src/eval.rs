//! Sample-quality metrics, classifier surfaces and report files.
//!
//! File schemas written by [`emit`]:
//!
//! | file | columns |
//! |---|---|
//! | `coverage.csv` | `modes_hit,total_modes,high_quality_fraction,mode_dispersion,flatness` (one row; empty dispersion when no mode has two samples) |
//! | `modes.csv` | `mode,mean_x,mean_y,count` |
//! | `series.csv` | `iteration,u_brs,gen_security,clf_security,subgame_value` |
//! | `surface.csv` | `# box min_x=… min_y=… max_x=… max_y=… resolution=…` then `row,col,x,y,value` |
//! | `samples.csv` | `kind,x,y,component` with kind `real` or `fake`, component empty when unassigned |
//!
//! `convergence.svg` plots the test payoff and both security payoffs per
//! iteration. `scatter.svg` draws the classifier surface (red = fake,
//! blue = real, linear in the output) under real (black) and generated
//! (green) points.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gang::{GangSpec, MixedNetStrategy};
use crate::pnm::IterationRecord;
use crate::rbbr::{bounding_box, BoundingBox};
use crate::synth::GaussianMixture;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Generated and real points drawn for the report.
    pub samples: usize,
    /// Mahalanobis radius for a high-quality sample.
    pub k_sigma: f64,
    /// Surface lattice points per axis.
    pub resolution: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples: 5000,
            k_sigma: 3.0,
            resolution: 50,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_sigma > 0.0 && self.k_sigma.is_finite()) {
            return Err(Error::Invalid(format!("k_sigma must be positive, got {}", self.k_sigma)));
        }
        if self.resolution < 2 {
            return Err(Error::Invalid("surface resolution must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub modes_hit: usize,
    pub total_modes: usize,
    /// Share of samples assigned to some mode; 0 for no samples.
    pub high_quality_fraction: f64,
    pub per_mode_counts: Vec<usize>,
}

/// Per-sample mode assignments.
pub fn assignments(samples: ArrayView2<'_, f64>, mix: &GaussianMixture, k_sigma: f64) -> Vec<Option<usize>> {
    samples.rows().into_iter().map(|r| mix.mode_assignment(r, k_sigma)).collect()
}

pub fn coverage(samples: ArrayView2<'_, f64>, mix: &GaussianMixture, k_sigma: f64) -> CoverageReport {
    coverage_from(&assignments(samples, mix, k_sigma), mix.len())
}

fn coverage_from(assigned: &[Option<usize>], total_modes: usize) -> CoverageReport {
    let mut counts = vec![0usize; total_modes];
    for k in assigned.iter().flatten() {
        counts[*k] += 1;
    }
    let hit: usize = counts.iter().sum();
    CoverageReport {
        modes_hit: counts.iter().filter(|c| **c > 0).count(),
        total_modes,
        high_quality_fraction: if assigned.is_empty() { 0.0 } else { hit as f64 / assigned.len() as f64 },
        per_mode_counts: counts,
    }
}

/// Mean distance of assigned samples to their mode's sample centroid,
/// averaged over modes holding at least two samples.
pub fn mode_dispersion(samples: ArrayView2<'_, f64>, mix: &GaussianMixture, k_sigma: f64) -> Option<f64> {
    dispersion_from(samples, &assignments(samples, mix, k_sigma), mix.len())
}

fn dispersion_from(samples: ArrayView2<'_, f64>, assigned: &[Option<usize>], modes: usize) -> Option<f64> {
    let mut groups: Vec<Vec<[f64; 2]>> = vec![Vec::new(); modes];
    for (row, k) in samples.rows().into_iter().zip(assigned) {
        if let Some(k) = k {
            groups[*k].push([row[0], row[1]]);
        }
    }
    let per_mode: Vec<f64> = groups
        .iter()
        .filter(|g| g.len() >= 2)
        .map(|g| {
            let n = g.len() as f64;
            let cx = g.iter().map(|p| p[0]).sum::<f64>() / n;
            let cy = g.iter().map(|p| p[1]).sum::<f64>() / n;
            g.iter().map(|p| (p[0] - cx).hypot(p[1] - cy)).sum::<f64>() / n
        })
        .collect();
    (!per_mode.is_empty()).then(|| per_mode.iter().sum::<f64>() / per_mode.len() as f64)
}

/// Mixture classifier output on a `resolution × resolution` lattice over
/// `bbox`; entry `[r, c]` sits at `x = min_x + c·Δx`, `y = min_y + r·Δy`.
pub fn classifier_surface(clf_mix: &MixedNetStrategy, bbox: &BoundingBox, resolution: usize) -> Result<Array2<f64>> {
    if resolution < 2 {
        return Err(Error::Invalid("surface resolution must be at least 2".into()));
    }
    let pts = lattice(bbox, resolution);
    let out = clf_mix.classify(pts.view())?;
    out.into_shape_with_order((resolution, resolution)).map_err(|e| Error::Invalid(e.to_string()))
}

fn lattice(bbox: &BoundingBox, resolution: usize) -> Array2<f64> {
    let mut pts = Array2::zeros((resolution * resolution, 2));
    for r in 0..resolution {
        for c in 0..resolution {
            let (x, y) = lattice_point(bbox, resolution, r, c);
            pts[[r * resolution + c, 0]] = x;
            pts[[r * resolution + c, 1]] = y;
        }
    }
    pts
}

fn lattice_point(bbox: &BoundingBox, resolution: usize, r: usize, c: usize) -> (f64, f64) {
    let step = |a: usize, i: usize| bbox.min[a] + (bbox.max[a] - bbox.min[a]) * i as f64 / (resolution - 1) as f64;
    (step(0, c), step(1, r))
}

/// Standard deviation of the surface values.
pub fn flatness(surface: &Array2<f64>) -> f64 {
    if surface.is_empty() {
        return 0.0;
    }
    surface.std(0.0)
}

/// Everything a run writes to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub coverage: CoverageReport,
    pub dispersion: Option<f64>,
    pub mode_means: Vec<[f64; 2]>,
    pub series: Vec<SeriesRow>,
    pub surface: Array2<f64>,
    pub bbox: BoundingBox,
    pub reals: Array2<f64>,
    pub fakes: Array2<f64>,
    pub fake_modes: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub iteration: usize,
    pub u_brs: f64,
    pub gen_security: f64,
    pub clf_security: f64,
    pub subgame_value: f64,
}

impl From<&IterationRecord> for SeriesRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iteration: r.iteration,
            u_brs: r.u_brs,
            gen_security: r.gen_security,
            clf_security: r.clf_security,
            subgame_value: r.subgame_value,
        }
    }
}

impl Report {
    pub fn flatness(&self) -> f64 {
        flatness(&self.surface)
    }
}

/// Samples both mixtures and assembles the report. The surface box is the
/// span of the drawn points, padded by 5% per side.
pub fn build_report<R: Rng + ?Sized>(
    spec: &GangSpec,
    gen_mix: &MixedNetStrategy,
    clf_mix: &MixedNetStrategy,
    history: &[IterationRecord],
    cfg: &EvalConfig,
    rng: &mut R,
) -> Result<Report> {
    cfg.validate()?;
    let reals = spec.sample_real(cfg.samples, rng);
    let fakes = gen_mix.generate(&spec.noise, cfg.samples, rng)?;
    let fake_modes = assignments(fakes.view(), &spec.data, cfg.k_sigma);
    let coverage = coverage_from(&fake_modes, spec.data.len());
    let dispersion = dispersion_from(fakes.view(), &fake_modes, spec.data.len());
    let bbox = if cfg.samples == 0 {
        let m = spec.data.means();
        let pts = Array2::from_shape_fn((m.len(), 2), |(i, a)| m[i][a]);
        BoundingBox::of(&[pts.view()])?
    } else {
        bounding_box(reals.view(), fakes.view())?
    }
    .padded(0.05, 0.1);
    let surface = classifier_surface(clf_mix, &bbox, cfg.resolution)?;
    Ok(Report {
        coverage,
        dispersion,
        mode_means: spec.data.means().to_vec(),
        series: history.iter().map(SeriesRow::from).collect(),
        surface,
        bbox,
        reals,
        fakes,
        fake_modes,
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the report files into `dir`, creating it if needed.
pub fn emit(report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let c = &report.coverage;
    write(
        dir,
        "coverage.csv",
        &format!(
            "modes_hit,total_modes,high_quality_fraction,mode_dispersion,flatness\n{},{},{},{},{}\n",
            c.modes_hit,
            c.total_modes,
            c.high_quality_fraction,
            opt(report.dispersion),
            report.flatness()
        ),
    )?;

    let mut modes = String::from("mode,mean_x,mean_y,count\n");
    for (k, (m, n)) in report.mode_means.iter().zip(&c.per_mode_counts).enumerate() {
        let _ = writeln!(modes, "{k},{},{},{n}", m[0], m[1]);
    }
    write(dir, "modes.csv", &modes)?;

    let mut series = String::from("iteration,u_brs,gen_security,clf_security,subgame_value\n");
    for s in &report.series {
        let _ = writeln!(series, "{},{},{},{},{}", s.iteration, s.u_brs, s.gen_security, s.clf_security, s.subgame_value);
    }
    write(dir, "series.csv", &series)?;

    let b = &report.bbox;
    let res = report.surface.nrows();
    let mut surface = format!(
        "# box min_x={} min_y={} max_x={} max_y={} resolution={res}\nrow,col,x,y,value\n",
        b.min[0], b.min[1], b.max[0], b.max[1]
    );
    for ((r, col), v) in report.surface.indexed_iter() {
        let (x, y) = lattice_point(b, res, r, col);
        let _ = writeln!(surface, "{r},{col},{x},{y},{v}");
    }
    write(dir, "surface.csv", &surface)?;

    let mut samples = String::from("kind,x,y,component\n");
    for r in report.reals.rows() {
        let _ = writeln!(samples, "real,{},{},", r[0], r[1]);
    }
    for (r, k) in report.fakes.rows().into_iter().zip(&report.fake_modes) {
        let k = k.map(|k| k.to_string()).unwrap_or_default();
        let _ = writeln!(samples, "fake,{},{},{k}", r[0], r[1]);
    }
    write(dir, "samples.csv", &samples)?;

    write(dir, "convergence.svg", &svg::convergence(&report.series))?;
    write(dir, "scatter.svg", &svg::scatter(report))
}

/// Reads back the files written by [`emit`].
pub fn load(dir: &Path) -> Result<Report> {
    let cov_rows = read_table(dir, "coverage.csv", 5)?;
    let [row] = cov_rows.as_slice() else {
        return Err(Error::parse(dir.join("coverage.csv"), 2, "expected exactly one data row"));
    };
    let cov_path = dir.join("coverage.csv");
    let modes_hit = num::<usize>(&cov_path, 2, &row[0])?;
    let total_modes = num::<usize>(&cov_path, 2, &row[1])?;
    let high_quality_fraction = num::<f64>(&cov_path, 2, &row[2])?;
    let dispersion = if row[3].is_empty() { None } else { Some(num::<f64>(&cov_path, 2, &row[3])?) };

    let modes_path = dir.join("modes.csv");
    let mut mode_means = Vec::new();
    let mut per_mode_counts = Vec::new();
    for (i, r) in read_table(dir, "modes.csv", 4)?.iter().enumerate() {
        mode_means.push([num(&modes_path, i + 2, &r[1])?, num(&modes_path, i + 2, &r[2])?]);
        per_mode_counts.push(num(&modes_path, i + 2, &r[3])?);
    }

    let series_path = dir.join("series.csv");
    let mut series = Vec::new();
    for (i, r) in read_table(dir, "series.csv", 5)?.iter().enumerate() {
        let l = i + 2;
        series.push(SeriesRow {
            iteration: num(&series_path, l, &r[0])?,
            u_brs: num(&series_path, l, &r[1])?,
            gen_security: num(&series_path, l, &r[2])?,
            clf_security: num(&series_path, l, &r[3])?,
            subgame_value: num(&series_path, l, &r[4])?,
        });
    }

    let surf_path = dir.join("surface.csv");
    let text = fs::read_to_string(&surf_path).map_err(|e| Error::io(&surf_path, e))?;
    let head = text.lines().next().unwrap_or_default();
    let mut fields = std::collections::HashMap::new();
    for part in head.trim_start_matches('#').split_whitespace().skip(1) {
        if let Some((k, v)) = part.split_once('=') {
            fields.insert(k, v);
        }
    }
    let field = |k: &str| fields.get(k).copied().ok_or_else(|| Error::parse(&surf_path, 1, format!("missing {k} in header")));
    let bbox = BoundingBox {
        min: [num(&surf_path, 1, field("min_x")?)?, num(&surf_path, 1, field("min_y")?)?],
        max: [num(&surf_path, 1, field("max_x")?)?, num(&surf_path, 1, field("max_y")?)?],
    };
    let res: usize = num(&surf_path, 1, field("resolution")?)?;
    let mut surface = Array2::zeros((res, res));
    let body = text.lines().skip(2).filter(|l| !l.is_empty()).collect::<Vec<_>>();
    if body.len() != res * res {
        return Err(Error::parse(&surf_path, 3, format!("expected {} surface rows, found {}", res * res, body.len())));
    }
    for (i, line) in body.iter().enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::parse(&surf_path, i + 3, "expected 5 fields"));
        }
        let r: usize = num(&surf_path, i + 3, parts[0])?;
        let c: usize = num(&surf_path, i + 3, parts[1])?;
        if r >= res || c >= res {
            return Err(Error::parse(&surf_path, i + 3, "lattice index out of range"));
        }
        surface[[r, c]] = num(&surf_path, i + 3, parts[4])?;
    }

    let samples_path = dir.join("samples.csv");
    let mut reals = Vec::new();
    let mut fakes = Vec::new();
    let mut fake_modes = Vec::new();
    for (i, r) in read_table(dir, "samples.csv", 4)?.iter().enumerate() {
        let l = i + 2;
        let p = [num::<f64>(&samples_path, l, &r[1])?, num::<f64>(&samples_path, l, &r[2])?];
        match r[0].as_str() {
            "real" => reals.push(p),
            "fake" => {
                fakes.push(p);
                fake_modes.push(if r[3].is_empty() { None } else { Some(num(&samples_path, l, &r[3])?) });
            }
            other => return Err(Error::parse(&samples_path, l, format!("unknown sample kind {other:?}"))),
        }
    }
    let to_array = |v: &[[f64; 2]]| Array2::from_shape_fn((v.len(), 2), |(i, a)| v[i][a]);

    Ok(Report {
        coverage: CoverageReport {
            modes_hit,
            total_modes,
            high_quality_fraction,
            per_mode_counts,
        },
        dispersion,
        mode_means,
        series,
        surface,
        bbox,
        reals: to_array(&reals),
        fakes: to_array(&fakes),
        fake_modes,
    })
}

fn read_table(dir: &Path, name: &str, width: usize) -> Result<Vec<Vec<String>>> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<String> = line.split(',').map(str::to_owned).collect();
        if parts.len() != width {
            return Err(Error::parse(&path, i + 1, format!("expected {width} fields, found {}", parts.len())));
        }
        out.push(parts);
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| Error::parse(path, line, format!("{s:?}: {e}")))
}

/// Hand-written SVG; coordinates are printed with fixed precision so files
/// are stable across runs.
mod svg {
    use super::{Report, SeriesRow};
    use std::fmt::Write as _;

    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 48.0;

    fn header(out: &mut String, w: f64, h: f64) {
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    }

    /// Linear red (0) to blue (1).
    pub(super) fn color(v: f64) -> String {
        let t = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.5 };
        let r = (255.0 * (1.0 - t)).round() as u8;
        let b = (255.0 * t).round() as u8;
        format!("#{r:02x}40{b:02x}")
    }

    pub(super) fn convergence(series: &[SeriesRow]) -> String {
        let mut out = String::new();
        header(&mut out, W, H);
        let lines: [(&str, &str, fn(&SeriesRow) -> f64); 3] = [
            ("u_BRs", "#000000", |s| s.u_brs),
            ("gen security", "#d62728", |s| s.gen_security),
            ("clf security", "#1f77b4", |s| s.clf_security),
        ];
        let values: Vec<f64> = series.iter().flat_map(|s| lines.iter().map(move |l| (l.2)(s))).filter(|v| v.is_finite()).collect();
        let (mut lo, mut hi) = values.iter().fold((0.0f64, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        if hi - lo < 1e-12 {
            lo -= 1.0;
            hi += 1.0;
        }
        let n = series.len().max(2) as f64 - 1.0;
        let sx = |i: f64| PAD + (W - 2.0 * PAD) * i / n;
        let sy = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
            PAD,
            sy(0.0),
            W - PAD,
            sy(0.0)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        let _ = writeln!(out, r#"<text x="{:.0}" y="{:.0}" font-size="12" text-anchor="middle">iteration</text>"#, W / 2.0, H - 12.0);
        let _ = writeln!(out, r#"<text x="4" y="{:.2}" font-size="11">{hi:.3}</text>"#, PAD + 4.0);
        let _ = writeln!(out, r#"<text x="4" y="{:.2}" font-size="11">{lo:.3}</text>"#, H - PAD);
        for (k, (name, stroke, f)) in lines.iter().enumerate() {
            let pts: Vec<String> = series
                .iter()
                .enumerate()
                .filter(|(_, s)| f(s).is_finite())
                .map(|(i, s)| format!("{:.2},{:.2}", sx(i as f64), sy(f(s))))
                .collect();
            if !pts.is_empty() {
                let _ = writeln!(out, r#"<polyline fill="none" stroke="{stroke}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
            }
            let ly = PAD + 14.0 + 14.0 * k as f64;
            let _ = writeln!(out, r#"<text x="{:.0}" y="{ly:.0}" font-size="11" fill="{stroke}">{name}</text>"#, W - PAD - 90.0);
        }
        out.push_str("</svg>\n");
        out
    }

    pub(super) fn scatter(report: &Report) -> String {
        let size = 480.0;
        let mut out = String::new();
        header(&mut out, size, size);
        let b = &report.bbox;
        let sx = |x: f64| size * (x - b.min[0]) / (b.max[0] - b.min[0]).max(1e-12);
        let sy = |y: f64| size - size * (y - b.min[1]) / (b.max[1] - b.min[1]).max(1e-12);
        let res = report.surface.nrows();
        if res >= 2 {
            let cw = size / (res - 1) as f64;
            for ((r, c), v) in report.surface.indexed_iter() {
                let (x, y) = super::lattice_point(b, res, r, c);
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.6"/>"#,
                    sx(x) - cw / 2.0,
                    sy(y) - cw / 2.0,
                    cw,
                    cw,
                    color(*v)
                );
            }
        }
        for (pts, fill) in [(&report.reals, "#000000"), (&report.fakes, "#2ca02c")] {
            let _ = writeln!(out, r#"<g fill="{fill}">"#);
            for p in pts.rows() {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="1.2"/>"#, sx(p[0]), sy(p[1]));
            }
            out.push_str("</g>\n");
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_game::MixedStrategy;
    use crate::neural::{Activation, MlpSpec, NetworkParams};
    use crate::synth::make_grid;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GaussianMixture {
        make_grid(9, 2.0, 0.05).unwrap()
    }

    fn points(p: &[[f64; 2]]) -> Array2<f64> {
        Array2::from_shape_fn((p.len(), 2), |(i, a)| p[i][a])
    }

    #[test]
    fn coverage_examples() {
        let g = grid();
        let means = points(g.means());
        let c = coverage(means.view(), &g, 3.0);
        assert_eq!((c.modes_hit, c.total_modes, c.high_quality_fraction), (9, 9, 1.0));
        assert_eq!(c.per_mode_counts, vec![1; 9]);

        let empty = Array2::<f64>::zeros((0, 2));
        let c = coverage(empty.view(), &g, 3.0);
        assert_eq!((c.modes_hit, c.total_modes, c.high_quality_fraction), (0, 9, 0.0));

        let collapsed = points(&[g.means()[4]; 100]);
        let c = coverage(collapsed.view(), &g, 3.0);
        assert_eq!((c.modes_hit, c.high_quality_fraction), (1, 1.0));

        let far = points(&[[50.0, 50.0], [0.0, 0.0]]);
        let c = coverage(far.view(), &g, 3.0);
        assert_eq!((c.modes_hit, c.high_quality_fraction), (1, 0.5));
    }

    #[test]
    fn dispersion_examples() {
        let g = grid();
        let tight = points(&[[0.0, 0.0], [0.0, 0.0], [2.0, 2.0]]);
        assert_eq!(mode_dispersion(tight.view(), &g, 3.0), Some(0.0));
        let spread = points(&[[-0.1, 0.0], [0.1, 0.0]]);
        assert!((mode_dispersion(spread.view(), &g, 3.0).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(mode_dispersion(points(&[[0.0, 0.0]]).view(), &g, 3.0), None);
    }

    fn const_clf(logit: f64) -> NetworkParams {
        let s = MlpSpec::new(vec![2, 1], vec![Activation::Sigmoid]).unwrap();
        NetworkParams::new(s, vec![0.0, 0.0, logit]).unwrap()
    }

    #[test]
    fn surface_examples() {
        let b = BoundingBox { min: [-1.0, -2.0], max: [1.0, 2.0] };
        let s = classifier_surface(&MixedNetStrategy::pure(const_clf(0.0)), &b, 4).unwrap();
        assert!(s.iter().all(|v| *v == 0.5));
        assert_eq!(flatness(&s), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = NetworkParams::init(&MlpSpec::default_classifier(2), &mut rng);
        let s = classifier_surface(&MixedNetStrategy::pure(c.clone()), &b, 5).unwrap();
        let direct = c.forward(lattice(&b, 5).view()).unwrap();
        for (i, v) in direct.column(0).iter().enumerate() {
            assert_eq!(s[[i / 5, i % 5]], *v);
        }
        assert_eq!(lattice_point(&b, 5, 4, 0), (-1.0, 2.0));
        let mix = MixedNetStrategy::new(vec![c, const_clf(3.0)], MixedStrategy::new(vec![0.3, 0.7]).unwrap()).unwrap();
        let s = classifier_surface(&mix, &b, 6).unwrap();
        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(classifier_surface(&mix, &b, 1).is_err());
    }

    #[test]
    fn colormap_ends() {
        assert_eq!(svg::color(0.0), "#ff4000");
        assert_eq!(svg::color(1.0), "#0040ff");
        assert_eq!(svg::color(f64::NAN), svg::color(0.5));
    }

    fn sample_report(iterations: usize) -> Report {
        let spec = GangSpec::with_defaults(grid());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = MixedNetStrategy::pure(NetworkParams::init(&spec.generator, &mut rng));
        let c = MixedNetStrategy::pure(NetworkParams::init(&spec.classifier, &mut rng));
        let history: Vec<IterationRecord> = (0..iterations)
            .map(|i| IterationRecord {
                iteration: i,
                u_brs: 1.0 / (i as f64 + 3.0),
                gen_security: -0.1 * i as f64,
                clf_security: 0.7,
                subgame_value: std::f64::consts::PI * i as f64,
                accepted: true,
                gen_added: true,
                clf_added: true,
                rows: i + 2,
                cols: i + 2,
                wall_ms: 1,
            })
            .collect();
        let cfg = EvalConfig {
            samples: 300,
            resolution: 7,
            ..EvalConfig::default()
        };
        build_report(&spec, &g, &c, &history, &cfg, &mut rng).unwrap()
    }

    #[test]
    fn emit_round_trips_and_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample_report(4);
        emit(&r, dir.path()).unwrap();
        let names = ["coverage.csv", "modes.csv", "series.csv", "surface.csv", "samples.csv", "convergence.svg", "scatter.svg"];
        let first: Vec<Vec<u8>> = names.iter().map(|n| fs::read(dir.path().join(n)).unwrap()).collect();
        emit(&r, dir.path()).unwrap();
        let second: Vec<Vec<u8>> = names.iter().map(|n| fs::read(dir.path().join(n)).unwrap()).collect();
        assert_eq!(first, second);
        assert_eq!(load(dir.path()).unwrap(), r);
        let svg = String::from_utf8(first[5].clone()).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    }

    #[test]
    fn empty_history_emits_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample_report(0);
        emit(&r, dir.path()).unwrap();
        let series = fs::read_to_string(dir.path().join("series.csv")).unwrap();
        assert_eq!(series, "iteration,u_brs,gen_security,clf_security,subgame_value\n");
        assert_eq!(load(dir.path()).unwrap().series, vec![]);
        assert!(fs::read_to_string(dir.path().join("convergence.svg")).unwrap().ends_with("</svg>\n"));
    }

    #[test]
    fn load_reports_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        emit(&sample_report(1), dir.path()).unwrap();
        fs::write(dir.path().join("series.csv"), "iteration,u_brs,gen_security,clf_security,subgame_value\n0,x,1,2,3\n").unwrap();
        match load(dir.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load(&dir.path().join("missing")), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn adding_a_sample_never_loses_a_mode(
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 0..40),
            extra in (-3.0f64..3.0, -3.0f64..3.0),
        ) {
            let g = grid();
            let mut v: Vec<[f64; 2]> = pts.iter().map(|(x, y)| [*x, *y]).collect();
            let before = coverage(points(&v).view(), &g, 3.0);
            v.push([extra.0, extra.1]);
            let after = coverage(points(&v).view(), &g, 3.0);
            prop_assert!(after.modes_hit >= before.modes_hit);
            prop_assert_eq!(after.per_mode_counts.iter().sum::<usize>() as f64 / v.len() as f64, after.high_quality_fraction);
        }
    }
}
