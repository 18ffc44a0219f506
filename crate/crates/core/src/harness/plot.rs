//! Log-log SVG figures of `Reg_T / T` from median metric CSVs.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MEDIAN_FILE: &str = "median_metrics.csv";
const MAX_POINTS: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlotStyle {
    /// All series on one panel.
    Fig1,
    /// One panel per graph family (top-level subdirectory).
    Fig2,
}

/// One CSV of median series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFile {
    pub path: PathBuf,
    /// Path of the containing directory relative to the plot root.
    pub prefix: String,
    pub manifest_hashes: Vec<String>,
    pub t: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl SeriesFile {
    pub fn read(path: &Path, prefix: String) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let manifest_hashes = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .filter_map(|l| {
                l.trim_start_matches('#')
                    .trim()
                    .strip_prefix("manifest_hash=")
            })
            .flat_map(|h| h.split(',').map(str::to_string))
            .collect();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::Plot(format!(
                "{}: first column must be t",
                path.display()
            )));
        }
        let mut t = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len() - 1];
        for rec in rdr.records() {
            let rec = rec?;
            t.push(parse(&rec[0]));
            for (j, c) in cols.iter_mut().enumerate() {
                c.push(parse(rec.get(j + 1).unwrap_or("")));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            prefix,
            manifest_hashes,
            t,
            columns: header[1..].iter().cloned().zip(cols).collect(),
        })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Algorithm columns (`<alg>_reg_over_T`).
    pub fn regret_columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.columns
            .iter()
            .filter_map(|(n, v)| n.strip_suffix("_reg_over_T").map(|a| (a, v.as_slice())))
    }
}

fn parse(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

/// Finds median CSVs at `dir` and up to two directory levels below it.
pub fn find_series(dir: &Path) -> Result<Vec<SeriesFile>> {
    fn walk(root: &Path, dir: &Path, depth: usize, out: &mut Vec<SeriesFile>) -> Result<()> {
        let f = dir.join(MEDIAN_FILE);
        if f.is_file() {
            let prefix = dir
                .strip_prefix(root)
                .map(|p| p.to_string_lossy().replace('\\', "/"))
                .unwrap_or_default();
            out.push(SeriesFile::read(&f, prefix)?);
        }
        if depth == 0 {
            return Ok(());
        }
        let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        subdirs.sort();
        for d in subdirs {
            walk(root, &d, depth - 1, out)?;
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, 2, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisMeta {
    pub label: String,
    pub scale: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelMeta {
    pub title: String,
    pub series: Vec<String>,
    pub x_axis: AxisMeta,
    pub y_axis: AxisMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMeta {
    pub file: String,
    pub manifest_hashes: Vec<String>,
}

/// Metadata embedded in every emitted SVG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotMeta {
    pub style: PlotStyle,
    pub panels: Vec<PanelMeta>,
    pub sources: Vec<SourceMeta>,
}

struct Curve {
    label: String,
    points: Vec<(f64, f64)>,
    reference: bool,
}

struct Panel {
    title: String,
    curves: Vec<Curve>,
}

/// Log-spaced subsample of the positive points.
fn thin(t: &[f64], v: &[f64]) -> Vec<(f64, f64)> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(v)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    if pts.len() <= MAX_POINTS {
        return pts;
    }
    let (lo, hi) = (pts[0].0.ln(), pts[pts.len() - 1].0.ln());
    let mut out = Vec::with_capacity(MAX_POINTS + 1);
    let mut next = lo;
    let step = (hi - lo) / MAX_POINTS as f64;
    for p in &pts {
        if p.0.ln() >= next {
            out.push(*p);
            next = p.0.ln() + step;
        }
    }
    if out.last() != pts.last() {
        out.push(*pts.last().unwrap());
    }
    out
}

fn curves_for(file: &SeriesFile, label_prefix: &str, skip: &[&str]) -> Vec<Curve> {
    file.regret_columns()
        .filter(|(a, _)| !skip.contains(a))
        .map(|(a, v)| Curve {
            label: if label_prefix.is_empty() {
                a.to_string()
            } else {
                format!("{label_prefix} {a}")
            },
            points: thin(&file.t, v),
            reference: false,
        })
        .collect()
}

fn reference(file: &SeriesFile) -> Option<Curve> {
    file.column("C_t_over_T").map(|v| Curve {
        label: "C_T/T".into(),
        points: thin(&file.t, v),
        reference: true,
    })
}

fn layout(style: PlotStyle, files: &[SeriesFile]) -> Result<Vec<Panel>> {
    match style {
        PlotStyle::Fig1 => {
            let multi = files.len() > 1;
            let mut curves: Vec<Curve> = files
                .iter()
                .flat_map(|f| curves_for(f, if multi { &f.prefix } else { "" }, &[]))
                .collect();
            curves.extend(reference(&files[0]));
            Ok(vec![Panel {
                title: "Reg_T/T".into(),
                curves,
            }])
        }
        PlotStyle::Fig2 => {
            let mut groups: Vec<(String, Vec<&SeriesFile>)> = Vec::new();
            for f in files {
                let top = f.prefix.split('/').next().unwrap_or("").to_string();
                match groups.iter_mut().find(|(g, _)| *g == top) {
                    Some((_, v)) => v.push(f),
                    None => groups.push((top, vec![f])),
                }
            }
            Ok(groups
                .into_iter()
                .map(|(title, fs)| {
                    let mut curves = Vec::new();
                    // schedule-independent series are drawn once per panel
                    let mut seen: Vec<String> = Vec::new();
                    for f in &fs {
                        let sub = f.prefix.split('/').skip(1).collect::<Vec<_>>().join("/");
                        for (a, v) in f.regret_columns() {
                            let independent = a.starts_with("cc-admm");
                            if independent && seen.iter().any(|s| s == a) {
                                continue;
                            }
                            seen.push(a.to_string());
                            let label = if independent || sub.is_empty() {
                                a.to_string()
                            } else {
                                format!("{a} {sub}")
                            };
                            curves.push(Curve {
                                label,
                                points: thin(&f.t, v),
                                reference: false,
                            });
                        }
                    }
                    curves.extend(reference(fs[0]));
                    Panel {
                        title: if title.is_empty() {
                            "Reg_T/T".into()
                        } else {
                            title
                        },
                        curves,
                    }
                })
                .collect())
        }
    }
}

fn bounds(curves: &[Curve]) -> Option<((f64, f64), (f64, f64))> {
    let pts = curves.iter().flat_map(|c| c.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    (x1 > 0.0 && y1 > 0.0).then(|| {
        let x1 = if x1 > x0 { x1 } else { x0 * 10.0 };
        let (y0, y1) = if y1 > y0 {
            (y0 / 1.5, y1 * 1.5)
        } else {
            (y0 / 10.0, y1 * 10.0)
        };
        ((x0, x1), (y0, y1))
    })
}

fn draw_err<E: std::fmt::Debug>(e: E) -> Error {
    Error::Plot(format!("{e:?}"))
}

fn render(panels: &[Panel], style: PlotStyle) -> Result<(String, Vec<PanelMeta>)> {
    let (cols, rows) = match panels.len() {
        1 => (1, 1),
        2 => (2, 1),
        n => (2, n.div_ceil(2)),
    };
    let size = (640 * cols as u32, 480 * rows as u32);
    let mut svg = String::new();
    let mut metas = Vec::new();
    {
        let root = SVGBackend::with_string(&mut svg, size).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let areas = root.split_evenly((rows, cols));
        for (panel, area) in panels.iter().zip(areas.iter()) {
            let Some(((x0, x1), (y0, y1))) = bounds(&panel.curves) else {
                return Err(Error::Plot(format!(
                    "panel '{}' has no positive data",
                    panel.title
                )));
            };
            let mut chart = ChartBuilder::on(area)
                .caption(&panel.title, ("sans-serif", 18))
                .margin(12)
                .x_label_area_size(40)
                .y_label_area_size(60)
                .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
                .map_err(draw_err)?;
            chart
                .configure_mesh()
                .x_desc("T")
                .y_desc("Reg_T/T")
                .draw()
                .map_err(draw_err)?;
            let mut palette_idx = 0;
            for c in &panel.curves {
                let color = if c.reference {
                    BLACK.to_rgba()
                } else {
                    palette_idx += 1;
                    Palette99::pick(palette_idx - 1).to_rgba()
                };
                let style = ShapeStyle::from(&color).stroke_width(2);
                let label = c.label.clone();
                if c.reference {
                    chart
                        .draw_series(DashedLineSeries::new(c.points.iter().copied(), 6, 4, style))
                        .map_err(draw_err)?
                        .label(label)
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], style));
                } else {
                    chart
                        .draw_series(LineSeries::new(c.points.iter().copied(), style))
                        .map_err(draw_err)?
                        .label(label)
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], style));
                }
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .position(SeriesLabelPosition::LowerLeft)
                .draw()
                .map_err(draw_err)?;
            metas.push(PanelMeta {
                title: panel.title.clone(),
                series: panel.curves.iter().map(|c| c.label.clone()).collect(),
                x_axis: AxisMeta {
                    label: "T".into(),
                    scale: "log10".into(),
                    min: x0,
                    max: x1,
                },
                y_axis: AxisMeta {
                    label: "Reg_T/T".into(),
                    scale: "log10".into(),
                    min: y0,
                    max: y1,
                },
            });
        }
        root.present().map_err(draw_err)?;
    }
    let _ = style;
    Ok((svg, metas))
}

/// Inserts `<metadata>` (JSON) and a provenance comment right after the
/// opening `<svg>` tag.
fn embed(svg: &str, meta: &PlotMeta) -> Result<String> {
    let open = svg
        .find("<svg")
        .and_then(|i| svg[i..].find('>').map(|j| i + j + 1))
        .ok_or_else(|| Error::Plot("backend produced no <svg> element".into()))?;
    let json = serde_json::to_string(meta)?;
    let sources: Vec<String> = meta
        .sources
        .iter()
        .map(|s| format!("{} [{}]", s.file, s.manifest_hashes.join(",")))
        .collect();
    let comment = format!(
        "\n<!-- sources: {} -->",
        sources.join("; ").replace("--", "- -")
    );
    let block = format!(
        "{comment}\n<metadata id=\"plot-meta\">{}</metadata>",
        escape(&json)
    );
    Ok(format!("{}{}{}", &svg[..open], block, &svg[open..]))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Reads the embedded metadata back from an SVG produced by [`emit_plot`].
pub fn read_meta(svg: &str) -> Result<PlotMeta> {
    let start = svg
        .find("<metadata id=\"plot-meta\">")
        .ok_or_else(|| Error::Plot("no plot metadata".into()))?
        + "<metadata id=\"plot-meta\">".len();
    let end = svg[start..]
        .find("</metadata>")
        .ok_or_else(|| Error::Plot("unterminated plot metadata".into()))?;
    let json = svg[start..start + end]
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&");
    Ok(serde_json::from_str(&json)?)
}

/// Renders the median series under `dir` and writes `<dir>/<style>.svg`.
pub fn emit_plot(dir: &Path, style: PlotStyle) -> Result<PathBuf> {
    let files = find_series(dir)?;
    if files.is_empty() {
        return Err(Error::Plot(format!(
            "missing series: no {MEDIAN_FILE} under {}",
            dir.display()
        )));
    }
    let panels = layout(style, &files)?;
    if panels.iter().all(|p| p.curves.is_empty()) {
        return Err(Error::Plot("missing series: no regret columns".into()));
    }
    let (svg, panel_meta) = render(&panels, style)?;
    let meta = PlotMeta {
        style,
        panels: panel_meta,
        sources: files
            .iter()
            .map(|f| SourceMeta {
                file: f
                    .path
                    .strip_prefix(dir)
                    .unwrap_or(&f.path)
                    .to_string_lossy()
                    .into_owned(),
                manifest_hashes: f.manifest_hashes.clone(),
            })
            .collect(),
    };
    let out = dir.join(match style {
        PlotStyle::Fig1 => "fig1.svg",
        PlotStyle::Fig2 => "fig2.svg",
    });
    fs::write(&out, embed(&svg, &meta)?)?;
    Ok(out)
}
