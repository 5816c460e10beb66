//! SVG figures rendered from the CSV outputs.

use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::path::Path;

use plotters::prelude::*;

type PlotResult = std::result::Result<(), Box<dyn StdError>>;

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> std::result::Result<Self, Box<dyn StdError>> {
        let mut rd = csv::Reader::from_path(path)?;
        let headers = rd.headers()?.iter().map(String::from).collect();
        let rows = rd.records().collect::<std::result::Result<_, _>>()?;
        Ok(Table { headers, rows })
    }

    fn index(&self, name: &str) -> std::result::Result<usize, Box<dyn StdError>> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("column `{name}` missing").into())
    }

    fn column(&self, name: &str) -> std::result::Result<Vec<f64>, Box<dyn StdError>> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect())
    }
}

fn bounds(series: &[(String, Vec<(f64, f64)>)]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|(_, p)| p.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    (x0, x1, y0 - pad, y1 + pad)
}

fn draw_lines<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    title: &str,
    x_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> PlotResult
where
    DB::ErrorType: 'static,
{
    let (x0, x1, y0, y1) = bounds(series);
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)?;
    chart.configure_mesh().x_desc(x_label).draw()?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    Ok(())
}

/// Mean against the limit path, and variance over ε².
pub fn trajectory(csv_path: &Path, epsilon: f64, out: &Path) -> PlotResult {
    let t = Table::read(csv_path)?;
    let time = t.column("t")?;
    let zip = |ys: Vec<f64>| time.iter().copied().zip(ys).collect::<Vec<_>>();
    let eps2 = epsilon * epsilon;
    let root = SVGBackend::new(out, (900, 700)).into_drawing_area();
    root.fill(&WHITE)?;
    let (top, bottom) = root.split_vertically(350);
    draw_lines(
        &top,
        "mean trait",
        "t",
        &[("M1".into(), zip(t.column("M1")?)), ("Zbar_eps".into(), zip(t.column("Zbar_eps")?))],
    )?;
    let v: Vec<f64> = t.column("M2c")?.into_iter().map(|v| v / eps2).collect();
    draw_lines(&bottom, "variance / eps^2", "t", &[("M2c / eps^2".into(), zip(v))])?;
    root.present()?;
    Ok(())
}

/// Sweep fields against ε on log-log axes (natural logs).
pub fn sweep(csv_path: &Path, out: &Path) -> PlotResult {
    let t = Table::read(csv_path)?;
    let eps = t.column("epsilon")?;
    let series: Vec<(String, Vec<(f64, f64)>)> = ["sup_W1", "sup_mean_err", "sup_var_err", "rho_err"]
        .iter()
        .map(|name| {
            let ys = t.column(name)?;
            let pts = eps
                .iter()
                .zip(ys)
                .filter(|(_, y)| *y > 0.0)
                .map(|(x, y)| (x.ln(), y.ln()))
                .collect();
            Ok((name.to_string(), pts))
        })
        .collect::<std::result::Result<_, Box<dyn StdError>>>()?;
    let root = SVGBackend::new(out, (900, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    draw_lines(&root, "sweep errors (ln-ln)", "ln eps", &series)?;
    root.present()?;
    Ok(())
}

/// Variance over ε² for every (model, s) pair of the comparison table.
pub fn asexual(csv_path: &Path, out: &Path) -> PlotResult {
    let t = Table::read(csv_path)?;
    let (im, is, it, iv) = (t.index("model")?, t.index("s")?, t.index("t")?, t.index("M2c_over_eps2")?);
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &t.rows {
        let key = format!("{} s={}", &r[im], &r[is]);
        groups
            .entry(key)
            .or_default()
            .push((r[it].parse()?, r[iv].parse()?));
    }
    let series: Vec<_> = groups.into_iter().collect();
    let root = SVGBackend::new(out, (900, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    draw_lines(&root, "variance / eps^2: sexual vs asexual", "t", &series)?;
    root.present()?;
    Ok(())
}
