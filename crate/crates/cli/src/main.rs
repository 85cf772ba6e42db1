use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use geomargin::euclidean::{generate_seeds, seed_directions, solve_multistart, EuclideanOptions, EuclideanResult, SeedOptions};
use geomargin::grid::{OperatingPoint, StudyModel, ZipSplit};
use geomargin::io::{emit_svg, load_case, options_hash, reports_to_csv, LoadedCase, MarginReport, Method, Projection, Provenance, SvgPath};
use geomargin::manifold::{
    geodesic_between_points, seed_paths, solve_from_seeds, trace_associated_path, AssociatedOptions,
    AssociatedStatus, DiscretizedPath, PathObjective, PathSolveOptions,
};
use geomargin::powerflow::{base_direction, base_point, continuation_trace, newton_solve, trace_to_csv, ContinuationOptions, NewtonOptions};
use geomargin::singularity::SurfaceClass;

#[derive(Parser)]
#[command(name = "geomargin", version, about = "Voltage-collapse margins along the power-flow manifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the base-case power flow.
    Pf(Common),
    /// Continuation trace from the base case along the base direction.
    Cpf(Common),
    /// Multi-start Euclidean distance to the singular surface.
    Euclid(Common),
    /// Shortest on-manifold paths to the singular surface.
    Manifold(Common),
    /// Shortest on-manifold path from the base case to a given point.
    Geodesic(GeodesicArgs),
    /// Euclidean minima, their associated paths and the manifold paths.
    Compare(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Builtin case name or path to a JSON case file.
    #[arg(long)]
    case: String,
    /// Collocation intervals.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, value_enum, default_value_t = Objective::Energy)]
    objective: Objective,
    /// Random continuation directions for multi-start seeding.
    #[arg(long, default_value_t = 8)]
    seeds: usize,
    #[arg(long = "seed-rng", default_value_t = 7)]
    seed_rng: u64,
    /// Load split, e.g. 40:60 for 40% constant impedance.
    #[arg(long, value_parser = parse_zip)]
    zip: Option<ZipSplit>,
    /// Directory for reports, path CSVs and plots.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Also write an SVG projection (requires --out).
    #[arg(long, requires = "out")]
    svg: bool,
}

#[derive(Args, Clone)]
struct GeodesicArgs {
    #[command(flatten)]
    common: Common,
    /// Target parameters x, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    to: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Objective {
    Energy,
    Arclen,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn parse_zip(s: &str) -> Result<ZipSplit, String> {
    let (z, p) = s.split_once(':').ok_or("expected Z:P")?;
    let z: f64 = z.trim().parse().map_err(|_| format!("bad number '{z}'"))?;
    let p: f64 = p.trim().parse().map_err(|_| format!("bad number '{p}'"))?;
    let total = z + p;
    if !(total > 0.0) || z < 0.0 || p < 0.0 {
        return Err("fractions must be non-negative with a positive sum".into());
    }
    Ok(ZipSplit {
        z_fraction: z / total,
        p_fraction: p / total,
    })
}

#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
    pointer: Option<String>,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Self {
            kind,
            message: message.to_string(),
            pointer: None,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_failure(&Failure::new("usage", e.to_string().trim_end()));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report_failure(&f);
            ExitCode::from(1)
        }
    }
}

fn report_failure(f: &Failure) {
    let mut err = json!({"kind": f.kind, "message": f.message});
    if let Some(p) = &f.pointer {
        err["pointer"] = json!(p);
    }
    eprintln!("{}", json!({ "error": err }));
}

struct Study {
    loaded: LoadedCase,
    base: OperatingPoint,
    opts: Common,
    hash: String,
}

impl Study {
    fn open(command: &str, opts: &Common, extra: Value) -> Result<Self, Failure> {
        let mut loaded = load_case(&opts.case).map_err(|e| Failure {
            kind: "case",
            pointer: e.pointer().map(str::to_string),
            message: e.to_string(),
        })?;
        if let Some(zip) = opts.zip {
            let mut file = loaded.file.clone();
            file.zip = zip;
            loaded = file.load().map_err(|e| Failure::new("case", e))?;
        }
        let base = base_point(&loaded.model).map_err(|e| Failure::new("powerflow", e))?;
        let options = json!({
            "command": command,
            "case": loaded.case.name,
            "zip": [loaded.case.zip.z_fraction, loaded.case.zip.p_fraction],
            "nodes": opts.nodes,
            "objective": match opts.objective { Objective::Energy => "energy", Objective::Arclen => "arclen" },
            "seeds": opts.seeds,
            "seed_rng": opts.seed_rng,
            "extra": extra,
        });
        Ok(Self {
            hash: options_hash(&options),
            loaded,
            base,
            opts: opts.clone(),
        })
    }

    fn model(&self) -> &StudyModel {
        &self.loaded.model
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            case: self.loaded.case.name.clone(),
            options_hash: self.hash.clone(),
            seed: Some(self.opts.seed_rng),
        }
    }

    fn intervals(&self) -> usize {
        self.opts
            .nodes
            .unwrap_or(if self.model().n_x() > 6 { 30 } else { 50 })
    }

    fn path_options(&self) -> PathSolveOptions {
        let mut o = PathSolveOptions::default();
        o.transcription.intervals = self.intervals();
        o.transcription.objective = match self.opts.objective {
            Objective::Energy => PathObjective::Energy,
            Objective::Arclen => PathObjective::SmoothedArcLength,
        };
        o
    }

    fn seed_options(&self) -> SeedOptions {
        SeedOptions {
            random_directions: self.opts.seeds,
            rng_seed: self.opts.seed_rng,
            ..SeedOptions::default()
        }
    }

    fn euclidean(&self) -> Vec<EuclideanResult> {
        let seeds = generate_seeds(self.model(), &self.base, &self.seed_options());
        solve_multistart(self.model(), &self.base, &seeds, &EuclideanOptions::default())
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let dir = self.opts.out.as_deref().unwrap_or(Path::new("."));
        fs::create_dir_all(dir).map_err(|e| Failure::new("io", format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
    }

    /// Reports go to `--out` when given, else to stdout.
    fn emit_reports(&self, reports: &[MarginReport]) -> Result<(), Failure> {
        for r in reports {
            r.validate().map_err(|e| Failure::new("report", e))?;
        }
        let (name, text) = match self.opts.format {
            Some(Format::Csv) => ("reports.csv", reports_to_csv(self.model(), reports)),
            _ => (
                "reports.json",
                serde_json::to_string_pretty(reports).expect("reports serialize") + "\n",
            ),
        };
        if self.opts.out.is_some() {
            self.write(name, &text)
        } else {
            print!("{text}");
            Ok(())
        }
    }

    fn emit_svg(&self, paths: &[SvgPath]) -> Result<(), Failure> {
        if !self.opts.svg {
            return Ok(());
        }
        let model = self.model();
        let labels = model.metric.labels();
        let projection = if labels.len() >= 2 { Projection::Plane(0, 1) } else { Projection::Plane(0, 0) };
        let axis = [
            labels.first().map(String::as_str).unwrap_or(""),
            labels.get(1).map(String::as_str).unwrap_or(""),
        ];
        let base = model.metric_output(&self.base.z());
        self.write("paths.svg", &emit_svg(paths, Some(&base), projection, axis))
    }
}

fn metric_points(model: &StudyModel, points: impl Iterator<Item = Vec<f64>>) -> Vec<Vec<f64>> {
    points.map(|z| model.metric_output(&z)).collect()
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Pf(o) => pf(&o),
        Command::Cpf(o) => cpf(&o),
        Command::Euclid(o) => euclid(&o),
        Command::Manifold(o) => manifold(&o),
        Command::Geodesic(g) => geodesic(&g),
        Command::Compare(o) => compare(&o),
    }
}

fn pf(o: &Common) -> Result<(), Failure> {
    let st = Study::open("pf", o, Value::Null)?;
    let model = st.model();
    let z = st.base.z();
    let residual = geomargin::linalg::norm_inf(&model.residual(&z));
    let x_labels: Vec<&str> = model.x_labels.iter().map(String::as_str).collect();
    let y_labels: Vec<&str> = model.y_labels.iter().map(String::as_str).collect();
    let out = json!({
        "case": st.loaded.case.name,
        "x_labels": x_labels,
        "x": st.base.x,
        "y_labels": y_labels,
        "y": st.base.y,
        "metric_labels": model.metric.labels(),
        "metric": model.metric_output(&z),
        "residual_inf": residual,
        "sigma_min": geomargin::singularity::diagnose_at(model, &z).sigma_min,
    });
    let text = serde_json::to_string_pretty(&out).unwrap() + "\n";
    if o.out.is_some() {
        st.write("pf.json", &text)
    } else {
        print!("{text}");
        Ok(())
    }
}

fn cpf(o: &Common) -> Result<(), Failure> {
    let st = Study::open("cpf", o, Value::Null)?;
    let model = st.model();
    let dir = base_direction(model, &st.base);
    let copts = ContinuationOptions {
        stop_after_noses: Some(1),
        ..ContinuationOptions::default()
    };
    let trace = match continuation_trace(model, &st.base, &dir, &copts) {
        Ok(t) => t,
        Err(geomargin::powerflow::PowerflowError::StepCollapse { partial, .. }) => *partial,
        Err(e) => return Err(Failure::new("continuation", e)),
    };
    let csv = trace_to_csv(model, &trace);
    if o.out.is_some() {
        st.write("cpf.csv", &csv)?;
    } else {
        print!("{csv}");
    }
    st.emit_svg(&[SvgPath {
        label: "continuation".into(),
        color: "blue".into(),
        points: metric_points(model, trace.points().into_iter()),
        singular_end: !trace.nose_events.is_empty(),
    }])
}

fn euclid(o: &Common) -> Result<(), Failure> {
    let st = Study::open("euclid", o, Value::Null)?;
    let results = st.euclidean();
    if results.is_empty() {
        return Err(Failure::new("solve", "no Euclidean minimum found"));
    }
    let reports: Vec<MarginReport> = results
        .iter()
        .map(|r| MarginReport::from_euclidean(st.model(), r, st.provenance()))
        .collect();
    st.emit_reports(&reports)?;
    let base = st.model().metric_output(&st.base.z());
    let paths: Vec<SvgPath> = results
        .iter()
        .enumerate()
        .map(|(k, r)| SvgPath {
            label: format!("euclidean {k}"),
            color: "black".into(),
            points: vec![base.clone(), r.z_end.clone()],
            singular_end: true,
        })
        .collect();
    st.emit_svg(&paths)
}

fn path_svg(model: &StudyModel, label: String, color: &str, path: &DiscretizedPath) -> SvgPath {
    SvgPath {
        label,
        color: color.into(),
        points: metric_points(model, path.points().into_iter()),
        singular_end: true,
    }
}

/// Seeds that have not converged by then rarely do.
const MULTISTART_ITERATIONS: usize = 100;

fn manifold_paths(st: &Study, euclid: &[EuclideanResult]) -> Vec<(DiscretizedPath, geomargin::manifold::MarginResult)> {
    let mut opts = st.path_options();
    opts.ipm.max_iterations = MULTISTART_ITERATIONS;
    let dirs = seed_directions(
        st.model(),
        &SeedOptions {
            axis_directions: false,
            ..st.seed_options()
        },
    );
    let seeds = seed_paths(st.model(), &st.base, &dirs, euclid, opts.transcription.intervals);
    solve_from_seeds(st.model(), &st.base, &seeds, &opts, 1e-2)
}

fn manifold(o: &Common) -> Result<(), Failure> {
    let st = Study::open("manifold", o, Value::Null)?;
    let euclid = st.euclidean();
    let solved = manifold_paths(&st, &euclid);
    if solved.is_empty() {
        return Err(Failure::new("solve", "no converged manifold path"));
    }
    let model = st.model();
    let reports: Vec<MarginReport> = solved
        .iter()
        .map(|(_, r)| MarginReport::from_margin(model, Method::Manifold, r, st.provenance()))
        .collect();
    st.emit_reports(&reports)?;
    if st.opts.out.is_some() {
        for (k, (p, _)) in solved.iter().enumerate() {
            st.write(&format!("path_{k}.csv"), &p.to_csv(model))?;
        }
    }
    let paths: Vec<SvgPath> = solved
        .iter()
        .enumerate()
        .map(|(k, (p, _))| path_svg(model, format!("manifold {k}"), "red", p))
        .collect();
    st.emit_svg(&paths)
}

fn geodesic(g: &GeodesicArgs) -> Result<(), Failure> {
    let o = &g.common;
    let st = Study::open("geodesic", o, json!({ "to": g.to }))?;
    let model = st.model();
    if g.to.len() != model.n_x() {
        return Err(Failure::new(
            "usage",
            format!("--to needs {} values, got {}", model.n_x(), g.to.len()),
        ));
    }
    let end = newton_solve(model, &g.to, &st.base.y, &NewtonOptions::default())
        .map_err(|e| Failure::new("powerflow", e))?
        .point;
    let (path, result) =
        geodesic_between_points(model, &st.base, &end, &st.path_options()).map_err(|e| Failure::new("solve", e))?;
    st.emit_reports(&[MarginReport::from_margin(model, Method::Geodesic, &result, st.provenance())])?;
    if st.opts.out.is_some() {
        st.write("path_0.csv", &path.to_csv(model))?;
    }
    st.emit_svg(&[path_svg(model, "geodesic".into(), "red", &path)])
}

fn compare(o: &Common) -> Result<(), Failure> {
    let st = Study::open("compare", o, Value::Null)?;
    let model = st.model();
    let euclid = st.euclidean();
    let solved = manifold_paths(&st, &euclid);
    let aopts = AssociatedOptions::default();
    let mut reports = Vec::new();
    let mut associated = Vec::new();
    for r in euclid.iter().filter(|r| r.surface_class == Some(SurfaceClass::CorrectSurface)) {
        let a = trace_associated_path(model, &st.base, &r.endpoint, &aopts);
        if a.status == AssociatedStatus::Reached {
            if let Some(rep) = MarginReport::from_associated(model, &a, st.provenance()) {
                reports.push(rep);
            }
            associated.push((r.distance, a));
        }
    }
    for (_, r) in &solved {
        reports.push(MarginReport::from_margin(model, Method::Manifold, r, st.provenance()));
    }
    let best_manifold = solved
        .iter()
        .filter(|(_, r)| r.surface_class == Some(SurfaceClass::CorrectSurface))
        .map(|(_, r)| r.arc_length)
        .fold(f64::INFINITY, f64::min);
    let best_associated = associated.iter().map(|(_, a)| a.arc_length).fold(f64::INFINITY, f64::min);
    let gap = best_associated / best_manifold - 1.0;
    match o.format {
        Some(Format::Json) => {
            for r in &reports {
                r.validate().map_err(|e| Failure::new("report", e))?;
            }
            let out = json!({
                "case": st.loaded.case.name,
                "manifold_min": finite(best_manifold),
                "associated_min": finite(best_associated),
                "relative_gap": finite(gap),
                "reports": reports,
            });
            let text = serde_json::to_string_pretty(&out).unwrap() + "\n";
            if o.out.is_some() {
                st.write("compare.json", &text)?;
            } else {
                print!("{text}");
            }
        }
        Some(Format::Csv) => st.emit_reports(&reports)?,
        None => {
            let mut t = format!("case {}\n", st.loaded.case.name);
            t.push_str("path         euclidean_distance  arc_length  nose_points  surface\n");
            for (k, (_, r)) in solved.iter().enumerate() {
                t.push_str(&format!(
                    "manifold {k:<3}  {:>18}  {:>10.4}  {:>11}  {}\n",
                    "-",
                    r.arc_length,
                    r.nose_count.map(|c| c.to_string()).unwrap_or("-".into()),
                    class_name(r.surface_class)
                ));
            }
            for (k, (d, a)) in associated.iter().enumerate() {
                t.push_str(&format!(
                    "associated {k:<1}  {:>18.4}  {:>10.4}  {:>11}  {}\n",
                    d,
                    a.arc_length,
                    a.interior_noses,
                    "correct_surface"
                ));
            }
            if gap.is_finite() {
                t.push_str(&format!(
                    "shortest associated exceeds shortest manifold path by {:.1}%\n",
                    100.0 * gap
                ));
            }
            print!("{t}");
            if o.out.is_some() {
                st.write("compare.txt", &t)?;
            }
        }
    }
    let mut paths: Vec<SvgPath> = associated
        .iter()
        .enumerate()
        .map(|(k, (_, a))| SvgPath {
            label: format!("associated {k}"),
            color: "green".into(),
            points: metric_points(model, a.nodes.iter().map(|p| p.z())),
            singular_end: true,
        })
        .collect();
    paths.extend(
        solved
            .iter()
            .enumerate()
            .map(|(k, (p, _))| path_svg(model, format!("manifold {k}"), "red", p)),
    );
    st.emit_svg(&paths)
}

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn class_name(c: Option<SurfaceClass>) -> &'static str {
    match c {
        Some(SurfaceClass::CorrectSurface) => "correct_surface",
        Some(SurfaceClass::WrongSurface) => "wrong_surface",
        None => "-",
    }
}
