//! SVG rendering of the CSV outputs. Cosmetic only.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("drawing failed: {0}")]
    Draw(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    Curve,
    PhaseDiagram,
    Compare,
    Spectrum,
}

impl PlotKind {
    /// Kind named in a `# nrlz <kind> v1` first line.
    pub fn detect(first_line: &str) -> Option<Self> {
        let tag = first_line.strip_prefix("# nrlz ")?.split_whitespace().next()?;
        match tag {
            "curve" => Some(PlotKind::Curve),
            "phase-diagram" => Some(PlotKind::PhaseDiagram),
            "compare" => Some(PlotKind::Compare),
            "spectrum" => Some(PlotKind::Spectrum),
            _ => None,
        }
    }
}

fn draw_err<E: std::fmt::Display>(e: E) -> PlotError {
    PlotError::Draw(e.to_string())
}

struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn parse(text: &str) -> Result<Self, PlotError> {
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader.records().collect::<Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(PlotError::Malformed("no data rows".into()));
        }
        Ok(Self { headers, rows })
    }

    fn col(&self, name: &str) -> Result<usize, PlotError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PlotError::Malformed(format!("missing column `{name}`")))
    }

    fn num(&self, row: &csv::StringRecord, col: usize) -> Result<f64, PlotError> {
        let field = row.get(col).unwrap_or_default();
        field
            .parse()
            .map_err(|_| PlotError::Malformed(format!("`{field}` is not a number")))
    }
}

/// Renders `csv_path` to `out`; the kind is read from the file's first line
/// unless given.
pub fn render(csv_path: &Path, kind: Option<PlotKind>, out: &Path) -> Result<PlotKind, PlotError> {
    let text = std::fs::read_to_string(csv_path).map_err(|source| PlotError::Io {
        path: csv_path.display().to_string(),
        source,
    })?;
    let kind = match kind {
        Some(k) => k,
        None => PlotKind::detect(text.lines().next().unwrap_or_default())
            .ok_or_else(|| PlotError::Malformed("unrecognised header line; pass --kind".into()))?,
    };
    let table = Table::parse(&text)?;
    match kind {
        PlotKind::Curve | PlotKind::Compare => curve(&table, out)?,
        PlotKind::PhaseDiagram => heatmap(&table, out)?,
        PlotKind::Spectrum => spectrum(&table, out)?,
    }
    Ok(kind)
}

type Series = Vec<(String, Vec<(f64, f64)>)>;

fn bounds(series: &Series) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |a: f64, b: f64| if b - a > 0.0 { 0.05 * (b - a) } else { 0.5 };
    let (px, py) = (pad(x0, x1), pad(y0, y1));
    (x0 - px, x1 + px, y0 - py, y1 + py)
}

fn lines<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    series: &Series,
    caption: &str,
    x_desc: &str,
    y_desc: &str,
) -> Result<(), PlotError> {
    let (x0, x1, y0, y1) = bounds(series);
    let mut chart = ChartBuilder::on(area)
        .caption(caption, ("sans-serif", 18))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .draw()
        .map_err(draw_err)?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(draw_err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err)?;
    Ok(())
}

fn curve(t: &Table, out: &Path) -> Result<(), PlotError> {
    let (ca, cd, cm, cp, cs) = (t.col("alpha")?, t.col("delta")?, t.col("method")?, t.col("P")?, t.col("status")?);
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &t.rows {
        if row.get(cs) != Some("ok") {
            continue;
        }
        let key = format!("{} delta={}", row.get(cm).unwrap_or_default(), t.num(row, cd)?);
        groups.entry(key).or_default().push((t.num(row, ca)?, t.num(row, cp)?));
    }
    if groups.is_empty() {
        return Err(PlotError::Malformed("no rows with status ok".into()));
    }
    let series: Series = groups
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            (k, v)
        })
        .collect();
    let root = SVGBackend::new(out, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    lines(&root, &series, "tunneling probability", "alpha", "P")?;
    root.present().map_err(draw_err)
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn heatmap(t: &Table, out: &Path) -> Result<(), PlotError> {
    let (ca, cd, cp) = (t.col("alpha")?, t.col("delta")?, t.col("P")?);
    let mut cells = Vec::with_capacity(t.rows.len());
    for row in &t.rows {
        cells.push((t.num(row, ca)?, t.num(row, cd)?, t.num(row, cp)?));
    }
    let xs = sorted_unique(cells.iter().map(|c| c.0).collect());
    let ys = sorted_unique(cells.iter().map(|c| c.1).collect());
    let index = |v: &[f64], x: f64| v.iter().position(|&y| y == x).unwrap_or(0) as f64;
    let root = SVGBackend::new(out, (900, 700)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let (xs_fmt, ys_fmt) = (xs.clone(), ys.clone());
    let label = move |v: &[f64], i: f64| {
        v.get(i.floor().max(0.0) as usize)
            .map(|x| format!("{x:.3}"))
            .unwrap_or_default()
    };
    let mut chart = ChartBuilder::on(&root)
        .caption("tunneling probability", ("sans-serif", 18))
        .margin(15)
        .x_label_area_size(50)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..xs.len() as f64, 0.0..ys.len() as f64)
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .disable_mesh()
        .x_desc("alpha")
        .y_desc("delta")
        .x_label_formatter(&|x| label(&xs_fmt, *x))
        .y_label_formatter(&|y| label(&ys_fmt, *y))
        .draw()
        .map_err(draw_err)?;
    chart
        .draw_series(cells.iter().filter(|c| c.2.is_finite()).map(|&(a, d, p)| {
            let (i, j) = (index(&xs, a), index(&ys, d));
            let color = ViridisRGB.get_color(p.clamp(0.0, 1.0) as f32);
            Rectangle::new([(i, j), (i + 1.0, j + 1.0)], color.filled())
        }))
        .map_err(draw_err)?;
    root.present().map_err(draw_err)
}

fn spectrum(t: &Table, out: &Path) -> Result<(), PlotError> {
    let cols = ["t", "re_e_plus", "re_e_minus", "im_e_plus", "im_e_minus"].map(|c| t.col(c));
    let [ct, rp, rm, ip, im] = cols;
    let (ct, rp, rm, ip, im) = (ct?, rp?, rm?, ip?, im?);
    let column = |c: usize| -> Result<Vec<(f64, f64)>, PlotError> {
        t.rows.iter().map(|r| Ok((t.num(r, ct)?, t.num(r, c)?))).collect()
    };
    let re: Series = vec![("E+".into(), column(rp)?), ("E-".into(), column(rm)?)];
    let imag: Series = vec![("E+".into(), column(ip)?), ("E-".into(), column(im)?)];
    let root = SVGBackend::new(out, (1200, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let panels = root.split_evenly((1, 2));
    lines(&panels[0], &re, "Re E", "t", "Re E")?;
    lines(&panels[1], &imag, "Im E", "t", "Im E")?;
    root.present().map_err(draw_err)
}
