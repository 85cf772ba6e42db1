use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::admittance::{
    build_admittance_with_nominal, constant_power_injection, network_admittance,
};
use super::case::{BusKind, GridCase, ZipNominal, ZipSplit};
use super::quad::{Dep, Lift, QuadForm};
use super::GridError;
use crate::powerflow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Generator internal angles are the coordinates `x`; network voltages are `y`.
    DynamicClassical,
    /// Selected bus injections are the coordinates `x`; all bus voltages are `y`.
    StaticDispatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    P,
    Q,
}

/// An adjustable injection of a static-dispatch study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjustable {
    pub bus: u32,
    pub quantity: Quantity,
}

impl Adjustable {
    pub fn p(bus: u32) -> Self {
        Self {
            bus,
            quantity: Quantity::P,
        }
    }
    pub fn q(bus: u32) -> Self {
        Self {
            bus,
            quantity: Quantity::Q,
        }
    }
}

/// Which quantities span the subspace in which distances are measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpec {
    /// Every `x` coordinate.
    Adjustable,
    /// Electrical active power output of every generator.
    GeneratorP,
    /// Electrical reactive power output of every generator.
    GeneratorQ,
    Custom(Vec<MetricSelector>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSelector {
    X(usize),
    Y(usize),
    GeneratorP(u32),
    GeneratorQ(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricOutput {
    /// Projection onto coordinate `index` of `z = (x, y)`.
    Coordinate { label: String, index: usize },
    /// `w' A w + offset`.
    Derived {
        label: String,
        form: QuadForm,
        offset: f64,
    },
}

impl MetricOutput {
    pub fn label(&self) -> &str {
        match self {
            MetricOutput::Coordinate { label, .. } | MetricOutput::Derived { label, .. } => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricMap {
    pub outputs: Vec<MetricOutput>,
}

impl MetricMap {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
    pub fn labels(&self) -> Vec<String> {
        self.outputs.iter().map(|o| o.label().to_string()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VoltageSource {
    /// `y` coordinate index.
    State(usize),
    Fixed(f64),
    EmfRe { magnitude: f64, angle: usize },
    EmfIm { magnitude: f64, angle: usize },
}

/// `g = w' A w - sum(coef * x) - constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub label: String,
    pub form: QuadForm,
    pub x_terms: Vec<(usize, f64)>,
    pub constant: f64,
}

/// A point of the coordinate space `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl OperatingPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    pub fn from_z(z: &[f64], n_x: usize) -> Self {
        Self {
            x: z[..n_x].to_vec(),
            y: z[n_x..].to_vec(),
        }
    }

    pub fn z(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.y);
        z
    }
}

/// A concrete `(x, y, g, z_c)` layout over a grid case.
///
/// Immutable after construction; all evaluations are pure functions of the
/// point, so one model can be shared between threads.
#[derive(Debug, Clone)]
pub struct StudyModel {
    pub case: GridCase,
    pub kind: ModelKind,
    pub admittance: DMatrix<Complex64>,
    pub x_labels: Vec<String>,
    pub y_labels: Vec<String>,
    pub metric: MetricMap,
    /// Constant-power share of every bus injection, pu.
    pub fixed_injections: Vec<Complex64>,
    /// Parameter values of the base case.
    pub nominal_x: Vec<f64>,
    voltage_map: Vec<VoltageSource>,
    rows: Vec<ResidualRow>,
    singular_rows: Vec<usize>,
    dependent_x: Vec<(usize, usize)>,
    loss_form: QuadForm,
    generation_form: QuadForm,
    flat_y: Vec<f64>,
}

fn power_forms(y: &DMatrix<Complex64>, bus: usize) -> (QuadForm, QuadForm) {
    // P_b = sum_k e_b (G e_k - B f_k) + f_b (G f_k + B e_k)
    // Q_b = sum_k f_b (G e_k - B f_k) - e_b (G f_k + B e_k)
    let (eb, fb) = (2 * bus, 2 * bus + 1);
    let mut p = QuadForm::default();
    let mut q = QuadForm::default();
    for k in 0..y.ncols() {
        let yk = y[(bus, k)];
        if yk.norm() == 0.0 {
            continue;
        }
        let (g, b) = (yk.re, yk.im);
        let (ek, fk) = (2 * k, 2 * k + 1);
        p.add_product(eb, ek, g);
        p.add_product(eb, fk, -b);
        p.add_product(fb, fk, g);
        p.add_product(fb, ek, b);
        q.add_product(fb, ek, g);
        q.add_product(fb, fk, -b);
        q.add_product(eb, fk, -g);
        q.add_product(eb, ek, -b);
    }
    (p, q)
}

fn vmag2_form(bus: usize) -> QuadForm {
    let mut f = QuadForm::default();
    f.add_product(2 * bus, 2 * bus, 1.0);
    f.add_product(2 * bus + 1, 2 * bus + 1, 1.0);
    f
}

fn is_generator(kind: BusKind) -> bool {
    matches!(kind, BusKind::Pv | BusKind::Slack)
}

impl StudyModel {
    /// Static dispatch study: the listed injections are coordinates, every
    /// bus voltage (minus the slack imaginary part) is algebraic.
    ///
    /// If the slack active power is adjustable it becomes a dependent
    /// coordinate determined by the slack balance row, which is excluded from
    /// the singularity Jacobian.
    pub fn static_dispatch(
        case: &GridCase,
        adjustable: &[Adjustable],
        metric: &MetricSpec,
    ) -> Result<Self, GridError> {
        let admittance = full_admittance(case)?;
        Self::static_with_admittance(case, adjustable, metric, admittance)
    }

    fn static_with_admittance(
        case: &GridCase,
        adjustable: &[Adjustable],
        metric: &MetricSpec,
        admittance: DMatrix<Complex64>,
    ) -> Result<Self, GridError> {
        case.validate()?;
        let nb = case.buses.len();
        let slack = case.slack_index();
        let fixed = constant_power_injection(case);

        let mut x_labels = Vec::new();
        let mut x_of = vec![[None::<usize>; 2]; nb];
        for (m, adj) in adjustable.iter().enumerate() {
            let b = case.bus_index(adj.bus)?;
            let slot = match adj.quantity {
                Quantity::P => 0,
                Quantity::Q => {
                    if case.buses[b].kind != BusKind::Pq {
                        return Err(GridError::Invalid(format!(
                            "reactive injection of voltage-controlled bus {} cannot be adjustable",
                            adj.bus
                        )));
                    }
                    1
                }
            };
            if x_of[b][slot].is_some() {
                return Err(GridError::Invalid(format!(
                    "bus {} listed twice as adjustable",
                    adj.bus
                )));
            }
            x_of[b][slot] = Some(m);
            x_labels.push(format!(
                "{}{}",
                if slot == 0 { "P" } else { "Q" },
                adj.bus
            ));
        }
        let nominal_x: Vec<f64> = adjustable
            .iter()
            .map(|a| {
                let b = case.bus_index(a.bus).unwrap();
                match a.quantity {
                    Quantity::P => fixed[b].re,
                    Quantity::Q => fixed[b].im,
                }
            })
            .collect();

        let mut voltage_map = Vec::with_capacity(2 * nb);
        let mut y_labels = Vec::new();
        let mut flat_y = Vec::new();
        for (b, bus) in case.buses.iter().enumerate() {
            let vset = bus.v_setpoint.unwrap_or(1.0);
            voltage_map.push(VoltageSource::State(y_labels.len()));
            y_labels.push(format!("e{}", bus.id));
            flat_y.push(vset);
            if b == slack {
                voltage_map.push(VoltageSource::Fixed(0.0));
            } else {
                voltage_map.push(VoltageSource::State(y_labels.len()));
                y_labels.push(format!("f{}", bus.id));
                flat_y.push(0.0);
            }
        }

        let mut rows = Vec::new();
        let mut singular_rows = Vec::new();
        let mut dependent_x = Vec::new();
        for (b, bus) in case.buses.iter().enumerate() {
            let (pf, qf) = power_forms(&admittance, b);
            let p_row = |x: Option<usize>| ResidualRow {
                label: format!("P{}", bus.id),
                form: pf.clone(),
                x_terms: x.map(|m| vec![(m, 1.0)]).unwrap_or_default(),
                constant: if x.is_some() { 0.0 } else { fixed[b].re },
            };
            match bus.kind {
                BusKind::Slack => {
                    if let Some(m) = x_of[b][0] {
                        dependent_x.push((m, rows.len()));
                        rows.push(p_row(Some(m)));
                    }
                }
                _ => {
                    singular_rows.push(rows.len());
                    rows.push(p_row(x_of[b][0]));
                }
            }
            singular_rows.push(rows.len());
            if is_generator(bus.kind) {
                let v = bus.v_setpoint.unwrap();
                rows.push(ResidualRow {
                    label: format!("V{}", bus.id),
                    form: vmag2_form(b),
                    x_terms: Vec::new(),
                    constant: v * v,
                });
            } else {
                let xq = x_of[b][1];
                rows.push(ResidualRow {
                    label: format!("Q{}", bus.id),
                    form: qf,
                    x_terms: xq.map(|m| vec![(m, 1.0)]).unwrap_or_default(),
                    constant: if xq.is_some() { 0.0 } else { fixed[b].im },
                });
            }
        }

        let mut model = StudyModel {
            case: case.clone(),
            kind: ModelKind::StaticDispatch,
            admittance,
            x_labels,
            y_labels,
            metric: MetricMap::default(),
            fixed_injections: fixed,
            nominal_x,
            voltage_map,
            rows,
            singular_rows,
            dependent_x,
            loss_form: QuadForm::default(),
            generation_form: QuadForm::default(),
            flat_y,
        };
        model.finish(metric)?;
        Ok(model)
    }

    /// Classical-machine study: every PV/slack bus is an internal EMF of
    /// fixed magnitude (its setpoint); the angles of all but the slack
    /// machine, measured from it, are the coordinates `x`.
    pub fn dynamic_classical(case: &GridCase, metric: &MetricSpec) -> Result<Self, GridError> {
        case.validate()?;
        let admittance = full_admittance(case)?;
        let nb = case.buses.len();
        let slack = case.slack_index();
        let fixed = constant_power_injection(case);

        // equilibrium angles from the static power flow of the same case
        let gens: Vec<usize> = (0..nb)
            .filter(|&b| is_generator(case.buses[b].kind))
            .collect();
        let companion = Self::static_with_admittance(
            case,
            &[],
            &MetricSpec::Custom(vec![]),
            admittance.clone(),
        )?;
        let base = powerflow::newton_solve(
            &companion,
            &[],
            &companion.flat_y,
            &powerflow::NewtonOptions::default(),
        )
        .map_err(|e| GridError::Invalid(format!("base power flow failed: {e}")))?;
        let angle = |b: usize| -> f64 {
            let w = companion.lift(&base.point.z()).w;
            w[2 * b + 1].atan2(w[2 * b])
        };

        let mut x_labels = Vec::new();
        let mut nominal_x = Vec::new();
        let mut angle_of = vec![None; nb];
        for &g in &gens {
            if g != slack {
                angle_of[g] = Some(x_labels.len());
                x_labels.push(format!("delta{}", case.buses[g].id));
                nominal_x.push(angle(g) - angle(slack));
            }
        }

        let mut voltage_map = Vec::with_capacity(2 * nb);
        let mut y_labels = Vec::new();
        let mut flat_y = Vec::new();
        for (b, bus) in case.buses.iter().enumerate() {
            if is_generator(bus.kind) {
                let e = bus.v_setpoint.unwrap();
                match angle_of[b] {
                    None => {
                        voltage_map.push(VoltageSource::Fixed(e));
                        voltage_map.push(VoltageSource::Fixed(0.0));
                    }
                    Some(m) => {
                        voltage_map.push(VoltageSource::EmfRe {
                            magnitude: e,
                            angle: m,
                        });
                        voltage_map.push(VoltageSource::EmfIm {
                            magnitude: e,
                            angle: m,
                        });
                    }
                }
            } else {
                voltage_map.push(VoltageSource::State(y_labels.len()));
                y_labels.push(format!("e{}", bus.id));
                flat_y.push(1.0);
                voltage_map.push(VoltageSource::State(y_labels.len()));
                y_labels.push(format!("f{}", bus.id));
                flat_y.push(0.0);
            }
        }

        let mut rows = Vec::new();
        for (b, bus) in case.buses.iter().enumerate() {
            if is_generator(bus.kind) {
                continue;
            }
            let (pf, qf) = power_forms(&admittance, b);
            rows.push(ResidualRow {
                label: format!("P{}", bus.id),
                form: pf,
                x_terms: Vec::new(),
                constant: fixed[b].re,
            });
            rows.push(ResidualRow {
                label: format!("Q{}", bus.id),
                form: qf,
                x_terms: Vec::new(),
                constant: fixed[b].im,
            });
        }
        let singular_rows = (0..rows.len()).collect();

        // start Newton from the static solution rather than a flat profile
        let static_w = companion.lift(&base.point.z()).w;
        let rot = Complex64::from_polar(1.0, -angle(slack));
        let mut k = 0;
        for (b, bus) in case.buses.iter().enumerate() {
            if !is_generator(bus.kind) {
                let v = Complex64::new(static_w[2 * b], static_w[2 * b + 1]) * rot;
                flat_y[k] = v.re;
                flat_y[k + 1] = v.im;
                k += 2;
            }
        }

        let mut model = StudyModel {
            case: case.clone(),
            kind: ModelKind::DynamicClassical,
            admittance,
            x_labels,
            y_labels,
            metric: MetricMap::default(),
            fixed_injections: fixed,
            nominal_x,
            voltage_map,
            rows,
            singular_rows,
            dependent_x: Vec::new(),
            loss_form: QuadForm::default(),
            generation_form: QuadForm::default(),
            flat_y,
        };
        model.finish(metric)?;
        Ok(model)
    }

    fn finish(&mut self, metric: &MetricSpec) -> Result<(), GridError> {
        let net = network_admittance(&self.case)?;
        let nb = self.case.buses.len();
        let mut loss = QuadForm::default();
        let mut generation = QuadForm::default();
        for b in 0..nb {
            let (p, _) = power_forms(&net, b);
            p.accumulate_into(1.0, &mut loss);
            if is_generator(self.case.buses[b].kind) {
                let (p, _) = power_forms(&self.admittance, b);
                p.accumulate_into(1.0, &mut generation);
            }
        }
        self.loss_form = loss;
        self.generation_form = generation;
        self.metric = self.build_metric(metric)?;
        if self.rows.len() != self.n_y() + self.dependent_x.len() {
            return Err(GridError::Invalid(format!(
                "layout is not square: {} rows for {} algebraic and {} dependent coordinates",
                self.rows.len(),
                self.n_y(),
                self.dependent_x.len()
            )));
        }
        Ok(())
    }

    fn build_metric(&self, spec: &MetricSpec) -> Result<MetricMap, GridError> {
        let gens: Vec<u32> = self
            .case
            .buses
            .iter()
            .filter(|b| is_generator(b.kind))
            .map(|b| b.id)
            .collect();
        let selectors: Vec<MetricSelector> = match spec {
            MetricSpec::Adjustable => (0..self.n_x()).map(MetricSelector::X).collect(),
            MetricSpec::GeneratorP => gens.iter().map(|&g| MetricSelector::GeneratorP(g)).collect(),
            MetricSpec::GeneratorQ => gens.iter().map(|&g| MetricSelector::GeneratorQ(g)).collect(),
            MetricSpec::Custom(list) => list.clone(),
        };
        let mut outputs = Vec::new();
        for sel in selectors {
            outputs.push(match sel {
                MetricSelector::X(i) => {
                    let label = self.x_labels.get(i).cloned().ok_or_else(|| {
                        GridError::Invalid(format!("metric selects missing x[{i}]"))
                    })?;
                    MetricOutput::Coordinate { label, index: i }
                }
                MetricSelector::Y(i) => {
                    let label = self.y_labels.get(i).cloned().ok_or_else(|| {
                        GridError::Invalid(format!("metric selects missing y[{i}]"))
                    })?;
                    MetricOutput::Coordinate {
                        label,
                        index: self.n_x() + i,
                    }
                }
                MetricSelector::GeneratorP(id) | MetricSelector::GeneratorQ(id) => {
                    let b = self.case.bus_index(id)?;
                    let (p, q) = power_forms(&self.admittance, b);
                    let is_p = matches!(sel, MetricSelector::GeneratorP(_));
                    MetricOutput::Derived {
                        label: format!("{}gen{}", if is_p { "P" } else { "Q" }, id),
                        form: if is_p { p } else { q },
                        offset: 0.0,
                    }
                }
            });
        }
        Ok(MetricMap { outputs })
    }

    pub fn n_x(&self) -> usize {
        self.x_labels.len()
    }
    pub fn n_y(&self) -> usize {
        self.y_labels.len()
    }
    pub fn n_z(&self) -> usize {
        self.n_x() + self.n_y()
    }
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
    pub fn rows(&self) -> &[ResidualRow] {
        &self.rows
    }
    /// Rows of `g` whose `y`-Jacobian forms the square singularity matrix.
    pub fn singular_rows(&self) -> &[usize] {
        &self.singular_rows
    }
    /// `(x index, defining row)` of coordinates solved together with `y`.
    pub fn dependent_x(&self) -> &[(usize, usize)] {
        &self.dependent_x
    }
    pub fn is_dependent_x(&self, m: usize) -> bool {
        self.dependent_x.iter().any(|&(d, _)| d == m)
    }
    /// Starting profile for Newton: setpoint magnitudes, zero angles.
    pub fn flat_start(&self) -> Vec<f64> {
        self.flat_y.clone()
    }

    pub fn lift(&self, z: &[f64]) -> Lift {
        let n_x = self.n_x();
        let mut w = Vec::with_capacity(self.voltage_map.len());
        let mut deps = Vec::with_capacity(self.voltage_map.len());
        for src in &self.voltage_map {
            match *src {
                VoltageSource::State(j) => {
                    w.push(z[n_x + j]);
                    deps.push(Some(Dep {
                        coord: n_x + j,
                        d1: 1.0,
                        d2: 0.0,
                        d3: 0.0,
                    }));
                }
                VoltageSource::Fixed(v) => {
                    w.push(v);
                    deps.push(None);
                }
                VoltageSource::EmfRe { magnitude, angle } => {
                    let (s, c) = z[angle].sin_cos();
                    w.push(magnitude * c);
                    deps.push(Some(Dep {
                        coord: angle,
                        d1: -magnitude * s,
                        d2: -magnitude * c,
                        d3: magnitude * s,
                    }));
                }
                VoltageSource::EmfIm { magnitude, angle } => {
                    let (s, c) = z[angle].sin_cos();
                    w.push(magnitude * s);
                    deps.push(Some(Dep {
                        coord: angle,
                        d1: magnitude * c,
                        d2: -magnitude * s,
                        d3: -magnitude * c,
                    }));
                }
            }
        }
        Lift {
            w,
            deps,
            n_coords: self.n_z(),
        }
    }

    /// Complex bus voltages at `z`.
    pub fn bus_voltages(&self, z: &[f64]) -> Vec<Complex64> {
        let w = self.lift(z).w;
        w.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
    }

    fn residual_lifted(&self, lift: &Lift, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                row.form.eval(&lift.w)
                    - row.x_terms.iter().map(|&(m, c)| c * z[m]).sum::<f64>()
                    - row.constant
            })
            .collect()
    }

    /// Stacked mismatches `g(x, y)`.
    pub fn residual(&self, z: &[f64]) -> Vec<f64> {
        self.residual_lifted(&self.lift(z), z)
    }

    pub fn residual_xy(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.residual(&OperatingPoint::new(x.to_vec(), y.to_vec()).z())
    }

    /// `dg/dz`, rows x (n_x + n_y).
    pub fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let lift = self.lift(z);
        let mut j = DMatrix::zeros(self.n_rows(), self.n_z());
        for (i, row) in self.rows.iter().enumerate() {
            for &(p, q, a) in &row.form.terms {
                if let Some(d) = lift.deps[p] {
                    j[(i, d.coord)] += 2.0 * a * d.d1 * lift.w[q];
                }
            }
            for &(m, c) in &row.x_terms {
                j[(i, m)] -= c;
            }
        }
        j
    }

    pub fn jacobian_y(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let z = OperatingPoint::new(x.to_vec(), y.to_vec()).z();
        self.jacobian(&z).columns(self.n_x(), self.n_y()).into_owned()
    }

    pub fn jacobian_x(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let z = OperatingPoint::new(x.to_vec(), y.to_vec()).z();
        self.jacobian(&z).columns(0, self.n_x()).into_owned()
    }

    /// Square `dg/dy` restricted to the singularity rows.
    pub fn singular_jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let full = self.jacobian(z);
        self.select_singular(&full)
    }

    pub fn select_singular(&self, full_jacobian: &DMatrix<f64>) -> DMatrix<f64> {
        let n_x = self.n_x();
        let n_y = self.n_y();
        DMatrix::from_fn(n_y, n_y, |k, j| {
            full_jacobian[(self.singular_rows[k], n_x + j)]
        })
    }

    fn singular_weighted_form(&self, r: &[f64]) -> QuadForm {
        let mut f = QuadForm::default();
        for (k, &row) in self.singular_rows.iter().enumerate() {
            self.rows[row].form.accumulate_into(r[k], &mut f);
        }
        f
    }

    /// Hessian of `sum_i weights_i g_i` with respect to `z`.
    pub fn weighted_hessian(&self, z: &[f64], weights: &[f64]) -> DMatrix<f64> {
        let lift = self.lift(z);
        let mut form = QuadForm::default();
        for (row, &w) in self.rows.iter().zip(weights) {
            row.form.accumulate_into(w, &mut form);
        }
        lift.hessian(&form)
    }

    /// `(dg/dy)' r` over the singularity rows.
    pub fn null_residual(&self, z: &[f64], r: &[f64]) -> Vec<f64> {
        let js = self.singular_jacobian(z);
        (js.transpose() * nalgebra::DVector::from_column_slice(r))
            .as_slice()
            .to_vec()
    }

    /// `d/dz [(dg/dy)' r]`, an `n_y x n_z` matrix built from second
    /// derivatives of `g`. The derivative with respect to `r` is `(dg/dy)'`.
    pub fn null_jacobian(&self, z: &[f64], r: &[f64]) -> DMatrix<f64> {
        let lift = self.lift(z);
        let h = lift.hessian(&self.singular_weighted_form(r));
        h.rows(self.n_x(), self.n_y()).into_owned()
    }

    /// Hessian in `z` of `mu' (dg/dy)' r`.
    pub fn null_hessian_zz(&self, z: &[f64], r: &[f64], mu: &[f64]) -> DMatrix<f64> {
        let lift = self.lift(z);
        let mut m = vec![0.0; self.n_z()];
        m[self.n_x()..].copy_from_slice(mu);
        let mut h = DMatrix::zeros(self.n_z(), self.n_z());
        lift.add_third_contracted(&self.singular_weighted_form(r), &m, 1.0, &mut h);
        h
    }

    /// Mixed derivative `d^2/dz dr [mu' (dg/dy)' r]`, an `n_z x n_y` matrix.
    pub fn null_hessian_zr(&self, z: &[f64], mu: &[f64]) -> DMatrix<f64> {
        let lift = self.lift(z);
        let mut m = vec![0.0; self.n_z()];
        m[self.n_x()..].copy_from_slice(mu);
        let mut out = DMatrix::zeros(self.n_z(), self.n_y());
        for (k, &row) in self.singular_rows.iter().enumerate() {
            let col = lift.hessian_vec(&self.rows[row].form, &m);
            for a in 0..self.n_z() {
                out[(a, k)] = col[a];
            }
        }
        out
    }

    pub fn metric_output(&self, z: &[f64]) -> Vec<f64> {
        let lift = self.lift(z);
        self.metric
            .outputs
            .iter()
            .map(|o| match o {
                MetricOutput::Coordinate { index, .. } => z[*index],
                MetricOutput::Derived { form, offset, .. } => form.eval(&lift.w) + offset,
            })
            .collect()
    }

    /// `dz_c/dz`, `n_metric x n_z`.
    pub fn metric_jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let lift = self.lift(z);
        let mut j = DMatrix::zeros(self.metric.len(), self.n_z());
        for (k, o) in self.metric.outputs.iter().enumerate() {
            match o {
                MetricOutput::Coordinate { index, .. } => j[(k, *index)] = 1.0,
                MetricOutput::Derived { form, .. } => {
                    let g = lift.grad(form);
                    for a in 0..self.n_z() {
                        j[(k, a)] = g[a];
                    }
                }
            }
        }
        j
    }

    /// True when every metric output is a coordinate projection.
    pub fn metric_is_linear(&self) -> bool {
        self.metric
            .outputs
            .iter()
            .all(|o| matches!(o, MetricOutput::Coordinate { .. }))
    }

    fn metric_weighted_form(&self, weights: &[f64]) -> QuadForm {
        let mut f = QuadForm::default();
        for (o, &w) in self.metric.outputs.iter().zip(weights) {
            if let MetricOutput::Derived { form, .. } = o {
                form.accumulate_into(w, &mut f);
            }
        }
        f
    }

    /// Hessian of `sum_k weights_k z_c,k`.
    pub fn metric_weighted_hessian(&self, z: &[f64], weights: &[f64]) -> DMatrix<f64> {
        self.lift(z).hessian(&self.metric_weighted_form(weights))
    }

    /// `Hessian(z_c,k) * q` for every output `k`, as columns.
    pub fn metric_hessian_vecs(&self, z: &[f64], q: &[f64]) -> DMatrix<f64> {
        let lift = self.lift(z);
        let mut out = DMatrix::zeros(self.n_z(), self.metric.len());
        for (k, o) in self.metric.outputs.iter().enumerate() {
            if let MetricOutput::Derived { form, .. } = o {
                let hv = lift.hessian_vec(form, q);
                for a in 0..self.n_z() {
                    out[(a, k)] = hv[a];
                }
            }
        }
        out
    }

    /// Third derivative of `sum_k weights_k z_c,k` contracted with `q`.
    pub fn metric_weighted_third(&self, z: &[f64], weights: &[f64], q: &[f64]) -> DMatrix<f64> {
        let lift = self.lift(z);
        let mut h = DMatrix::zeros(self.n_z(), self.n_z());
        lift.add_third_contracted(&self.metric_weighted_form(weights), q, 1.0, &mut h);
        h
    }

    /// Active line losses (pu) and their share of total generation.
    pub fn active_power_loss(&self, z: &[f64]) -> (f64, f64) {
        let w = self.lift(z).w;
        let loss = self.loss_form.eval(&w);
        let generation = self.generation_form.eval(&w);
        (loss, loss / generation)
    }
}

/// Admittance with the impedance share of demand folded in at the nominal
/// voltages the case asks for.
pub fn full_admittance(case: &GridCase) -> Result<DMatrix<Complex64>, GridError> {
    case.validate()?;
    let nb = case.buses.len();
    let nominal = match case.zip_nominal {
        ZipNominal::Flat => vec![1.0; nb],
        ZipNominal::BaseCase => {
            if case.zip.z_fraction == 0.0 {
                vec![1.0; nb]
            } else {
                let mut pq = case.clone();
                pq.zip = ZipSplit::CONSTANT_POWER;
                pq.zip_nominal = ZipNominal::Flat;
                let model = StudyModel::static_dispatch(&pq, &[], &MetricSpec::Custom(vec![]))?;
                let sol = powerflow::newton_solve(
                    &model,
                    &[],
                    &model.flat_start(),
                    &powerflow::NewtonOptions::default(),
                )
                .map_err(|e| GridError::Invalid(format!("base power flow failed: {e}")))?;
                model
                    .bus_voltages(&sol.point.z())
                    .iter()
                    .map(|v| v.norm())
                    .collect()
            }
        }
    };
    build_admittance_with_nominal(case, &nominal)
}
