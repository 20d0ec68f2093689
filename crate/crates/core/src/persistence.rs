//! CSV series, versioned JSON bundles and SVG figures.
//!
//! Every writer goes through a temporary file in the destination directory
//! that is renamed into place only once fully written.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::ControlConfig;
use crate::error::{Error, Result};
use crate::metrics::{action_lattice, trajectory, Lattice, SimResult};
use crate::population::ActionKind;
use crate::targets::TargetProfile;

pub const SCHEMA_VERSION: &str = "v2g-ca/1";

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub k: usize,
    pub p_initial: i64,
    pub p: i64,
    pub p_star: f64,
    pub v: usize,
    pub w: usize,
    pub calls: usize,
    pub clearing_price: Option<f64>,
}

pub fn series_rows(result: &SimResult) -> Vec<SeriesRow> {
    (0..result.horizon())
        .map(|i| SeriesRow {
            k: i + 1,
            p_initial: result.p_initial_series[i],
            p: result.p_series[i],
            p_star: result.target.values()[i],
            v: result.v_series[i],
            w: result.w_series[i],
            calls: result.calls_series[i],
            clearing_price: result.clearing_series[i],
        })
        .collect()
}

pub fn series_csv_bytes(result: &SimResult) -> Result<Vec<u8>> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in series_rows(result) {
        wtr.serialize(row)?;
    }
    wtr.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Header `k,p_initial,p,p_star,v,w,calls,clearing_price` then one row per
/// period; a missing clearing price is an empty field.
pub fn export_series_csv(result: &SimResult, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &series_csv_bytes(result)?)
}

pub fn import_series_csv(path: impl AsRef<Path>) -> Result<Vec<SeriesRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<SeriesRow>, _>>()?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunBundle {
    pub schema_version: String,
    pub config: ControlConfig,
    pub target: TargetProfile,
    pub result: SimResult,
}

impl RunBundle {
    pub fn new(result: SimResult) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            config: result.config.clone(),
            target: result.target.clone(),
            result,
        }
    }

    fn validate(&self, path: &Path) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                found: self.schema_version.clone(),
                expected: SCHEMA_VERSION.to_string(),
            });
        }
        let malformed = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            message,
        };
        if self.config != self.result.config {
            return Err(malformed("bundle config differs from result config".into()));
        }
        if self.target != self.result.target {
            return Err(malformed("bundle target differs from result target".into()));
        }
        self.result.check_consistency().map_err(malformed)
    }
}

pub fn bundle_json_bytes(bundle: &RunBundle) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec(bundle)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn export_bundle_json(bundle: &RunBundle, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &bundle_json_bytes(bundle)?)
}

pub fn import_bundle_json(path: impl AsRef<Path>) -> Result<RunBundle> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    // Check the version before the full decode so that a newer schema
    // reports a version error rather than a shape error.
    #[derive(Deserialize)]
    struct Header {
        schema_version: String,
    }
    let header: Header = serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::VersionMismatch {
            found: header.schema_version,
            expected: SCHEMA_VERSION.to_string(),
        });
    }
    let bundle: RunBundle = serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    bundle.validate(path)?;
    Ok(bundle)
}

// ---------------------------------------------------------------------------
// SVG figures

const LATTICE_MAX_ROWS: usize = 1000;
const WIDTH: f64 = 800.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const PLOT_W: f64 = WIDTH - MARGIN_L - MARGIN_R;

struct Panel {
    top: f64,
    height: f64,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Panel {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(f64::EPSILON);
        MARGIN_L + (v - self.x_min) / span * PLOT_W
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(f64::EPSILON);
        self.top + self.height - (v - self.y_min) / span * self.height
    }

    fn frame(&self, svg: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (l, r) = (MARGIN_L, MARGIN_L + PLOT_W);
        let (t, b) = (self.top, self.top + self.height);
        let _ = writeln!(
            svg,
            r##"<rect x="{l:.2}" y="{t:.2}" width="{PLOT_W:.2}" height="{:.2}" fill="none" stroke="#444" stroke-width="1"/>"##,
            self.height
        );
        let _ = writeln!(
            svg,
            r#"<text x="{l:.2}" y="{:.2}" font-size="13">{}</text>"#,
            t - 6.0,
            escape(title)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            r,
            b + 28.0,
            escape(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" transform="rotate(-90 {:.2} {:.2})" text-anchor="middle">{}</text>"#,
            l - 42.0,
            t + self.height / 2.0,
            l - 42.0,
            t + self.height / 2.0,
            escape(y_label)
        );
        for (v, anchor_y) in [(self.y_min, b), (self.y_max, t)] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#,
                l - 4.0,
                anchor_y + 4.0,
                fmt_tick(v)
            );
        }
        for (v, anchor_x) in [(self.x_min, l), (self.x_max, r)] {
            let _ = writeln!(
                svg,
                r#"<text x="{anchor_x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
                b + 14.0,
                fmt_tick(v)
            );
        }
    }

    fn polyline(&self, svg: &mut String, pts: &[(f64, f64)], color: &str, label: Option<&str>) {
        let mut coords = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            if i > 0 {
                coords.push(' ');
            }
            let _ = write!(coords, "{:.2},{:.2}", self.x(x), self.y(y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        if let Some(label) = label {
            if let Some(&(x, y)) = pts.last() {
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{color}">{}</text>"#,
                    self.x(x) - 30.0,
                    self.y(y) - 4.0,
                    escape(label)
                );
            }
        }
    }

    fn lattice(&self, svg: &mut String, lattice: &Lattice) {
        let rows = lattice.rows();
        let block = rows.div_ceil(LATTICE_MAX_ROWS).max(1);
        let blocks = rows.div_ceil(block).max(1);
        let cell_w = PLOT_W / lattice.horizon as f64;
        let cell_h = self.height / blocks as f64;
        let _ = writeln!(svg, r##"<g fill="#333">"##);
        for k in 1..=lattice.horizon {
            let active: Vec<bool> = (0..blocks)
                .map(|b| (b * block..((b + 1) * block).min(rows)).any(|r| lattice.get(r, k)))
                .collect();
            // consecutive active blocks in a column share one rect
            let mut b = 0;
            while b < blocks {
                if !active[b] {
                    b += 1;
                    continue;
                }
                let start = b;
                while b < blocks && active[b] {
                    b += 1;
                }
                // cheapest bids at the bottom
                let y = self.top + self.height - b as f64 * cell_h;
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                    MARGIN_L + (k - 1) as f64 * cell_w,
                    y,
                    cell_w,
                    (b - start) as f64 * cell_h
                );
            }
        }
        svg.push_str("</g>\n");
    }
}

fn fmt_tick(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn svg_open(height: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH:.0} {height:.0}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" fill=\"white\"/>\n"
    )
}

fn series_points<T: Copy + Into<f64>>(values: impl IntoIterator<Item = T>) -> Vec<(f64, f64)> {
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| ((i + 1) as f64, v.into()))
        .collect()
}

fn lattice_panel(top: f64, height: f64, lattice: &Lattice) -> Panel {
    Panel {
        top,
        height,
        x_min: 1.0,
        x_max: lattice.horizon as f64,
        y_min: 0.0,
        y_max: lattice.rows() as f64,
    }
}

/// Load tracking, action counts and both action lattices of one run.
pub fn figure_aggregate_response(result: &SimResult) -> String {
    let t = result.horizon() as f64;
    let mut svg = svg_open(1040.0);

    let loads = result
        .p_series
        .iter()
        .chain(&result.p_initial_series)
        .map(|&p| p as f64)
        .chain(result.target.values().iter().copied());
    let (lo, hi) = loads.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let load = Panel {
        top: 30.0,
        height: 200.0,
        x_min: 1.0,
        x_max: t,
        y_min: lo.min(0.0),
        y_max: hi.max(1.0),
    };
    load.frame(&mut svg, "Aggregate load p(k) and target p*(k)", "k", "load");
    load.polyline(
        &mut svg,
        &series_points(result.target.values().iter().copied()),
        "#d62728",
        Some("p*"),
    );
    load.polyline(
        &mut svg,
        &series_points(result.p_series.iter().map(|&p| p as f64)),
        "#1f77b4",
        Some("p"),
    );

    let max_actions = result
        .v_series
        .iter()
        .chain(&result.w_series)
        .copied()
        .max()
        .unwrap_or(0)
        .max(1);
    let actions = Panel {
        top: 280.0,
        height: 160.0,
        x_min: 1.0,
        x_max: t,
        y_min: 0.0,
        y_max: max_actions as f64,
    };
    actions.frame(&mut svg, "Decisions v(k) (shift) and w(k) (discharge)", "k", "count");
    actions.polyline(
        &mut svg,
        &series_points(result.v_series.iter().map(|&v| v as f64)),
        "#2ca02c",
        Some("v"),
    );
    actions.polyline(
        &mut svg,
        &series_points(result.w_series.iter().map(|&w| w as f64)),
        "#9467bd",
        Some("w"),
    );

    let shift = action_lattice(result, ActionKind::Shift);
    let discharge = action_lattice(result, ActionKind::Discharge);
    let p = lattice_panel(490.0, 240.0, &shift);
    p.frame(&mut svg, "Shift actions (rows by bid)", "k", "particle rank");
    p.lattice(&mut svg, &shift);
    let p = lattice_panel(780.0, 240.0, &discharge);
    p.frame(&mut svg, "Discharge actions (rows by bid)", "k", "particle rank");
    p.lattice(&mut svg, &discharge);

    svg.push_str("</svg>\n");
    svg
}

/// Shift lattice of a single run.
pub fn figure_shift_lattice(result: &SimResult) -> String {
    let mut svg = svg_open(320.0);
    let shift = action_lattice(result, ActionKind::Shift);
    let p = lattice_panel(30.0, 250.0, &shift);
    p.frame(&mut svg, "Shift actions without V2G (rows by bid)", "k", "particle rank");
    p.lattice(&mut svg, &shift);
    svg.push_str("</svg>\n");
    svg
}

/// Calls against responses for the V1G-only (red) and V2G (blue) runs.
pub fn figure_trajectories(v1g: &SimResult, v2g: &SimResult) -> String {
    let a = trajectory(v1g);
    let b = trajectory(v2g);
    let x_max = a.iter().chain(&b).map(|p| p.responses).max().unwrap_or(0).max(1);
    let y_max = a.iter().chain(&b).map(|p| p.calls).max().unwrap_or(0).max(1);
    let mut svg = svg_open(600.0);
    let panel = Panel {
        top: 30.0,
        height: 520.0,
        x_min: 0.0,
        x_max: x_max as f64,
        y_min: 0.0,
        y_max: y_max as f64,
    };
    panel.frame(
        &mut svg,
        "Calls for action vs responses v(k)+w(k)",
        "responses",
        "calls",
    );
    let xy = |pts: &[crate::metrics::TrajectoryPoint]| -> Vec<(f64, f64)> {
        pts.iter()
            .map(|p| (p.responses as f64, p.calls as f64))
            .collect()
    };
    panel.polyline(&mut svg, &xy(&a), "#d62728", None);
    panel.polyline(&mut svg, &xy(&b), "#1f77b4", None);
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="50" font-size="11" fill="#d62728">without V2G</text>"##,
        MARGIN_L + 10.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="64" font-size="11" fill="#1f77b4">with V2G</text>"##,
        MARGIN_L + 10.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Writes `fig2.svg`, `fig3.svg` and `fig4.svg` for a (V1G-only, V2G) pair
/// into `out_dir` and returns their paths.
pub fn emit_figures(v1g: &SimResult, v2g: &SimResult, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    let figures = [
        ("fig2.svg", figure_aggregate_response(v2g)),
        ("fig3.svg", figure_shift_lattice(v1g)),
        ("fig4.svg", figure_trajectories(v1g, v2g)),
    ];
    let mut paths = Vec::with_capacity(figures.len());
    for (name, svg) in figures {
        let path = out_dir.join(name);
        write_atomic(&path, svg.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}
