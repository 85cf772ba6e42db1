use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::GridError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Pq,
    Pv,
    Slack,
}

/// One network node. Injections are in MW / MVar, generation positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub id: u32,
    pub kind: BusKind,
    #[serde(rename = "p_mw")]
    pub p_inject: f64,
    #[serde(rename = "q_mvar")]
    pub q_inject: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_setpoint: Option<f64>,
}

/// A pi-model line. `r`, `x` and total charging `b` are per unit.
///
/// `tap` is an optional fixed off-nominal turns ratio on the `from` side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tap: Option<f64>,
}

impl BranchSpec {
    pub fn line(from: u32, to: u32, r: f64, x: f64, b: f64) -> Self {
        Self {
            from,
            to,
            r,
            x,
            b,
            tap: None,
        }
    }

    pub fn ratio(&self) -> f64 {
        self.tap.unwrap_or(1.0)
    }
}

/// Split of PQ-bus demand into constant-impedance and constant-power parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipSplit {
    pub z_fraction: f64,
    pub p_fraction: f64,
}

impl ZipSplit {
    pub const CONSTANT_POWER: ZipSplit = ZipSplit {
        z_fraction: 0.0,
        p_fraction: 1.0,
    };

    pub fn new(z_fraction: f64) -> Self {
        Self {
            z_fraction,
            p_fraction: 1.0 - z_fraction,
        }
    }
}

/// Voltage at which the constant-impedance share is converted to a shunt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZipNominal {
    /// 1.0 pu at every load bus.
    #[default]
    Flat,
    /// Magnitudes of the constant-power base-case power flow solution.
    BaseCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<BusSpec>,
    pub branches: Vec<BranchSpec>,
    pub zip: ZipSplit,
    #[serde(default)]
    pub zip_nominal: ZipNominal,
}

impl GridCase {
    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.base_mva > 0.0) {
            return Err(GridError::Invalid(format!(
                "base_mva must be positive, got {}",
                self.base_mva
            )));
        }
        let z = self.zip;
        if !(0.0..=1.0).contains(&z.z_fraction)
            || !(0.0..=1.0).contains(&z.p_fraction)
            || (z.z_fraction + z.p_fraction - 1.0).abs() > 1e-12
        {
            return Err(GridError::Invalid(format!(
                "zip fractions must lie in [0,1] and sum to 1, got {}/{}",
                z.z_fraction, z.p_fraction
            )));
        }
        let mut ids = BTreeSet::new();
        let mut slack = 0;
        for bus in &self.buses {
            if !ids.insert(bus.id) {
                return Err(GridError::Invalid(format!("duplicate bus id {}", bus.id)));
            }
            match bus.kind {
                BusKind::Slack | BusKind::Pv => {
                    if bus.kind == BusKind::Slack {
                        slack += 1;
                    }
                    match bus.v_setpoint {
                        Some(v) if v > 0.0 => {}
                        _ => {
                            return Err(GridError::Invalid(format!(
                                "bus {} needs a positive voltage setpoint",
                                bus.id
                            )))
                        }
                    }
                }
                BusKind::Pq => {
                    if bus.v_setpoint.is_some() {
                        return Err(GridError::Invalid(format!(
                            "PQ bus {} must not carry a voltage setpoint",
                            bus.id
                        )));
                    }
                }
            }
        }
        if slack != 1 {
            return Err(GridError::Invalid(format!(
                "exactly one slack bus required, found {slack}"
            )));
        }
        for (k, br) in self.branches.iter().enumerate() {
            if br.x == 0.0 {
                return Err(GridError::Invalid(format!("branch {k} has zero reactance")));
            }
            if !(br.ratio() > 0.0) {
                return Err(GridError::Invalid(format!("branch {k} has a non-positive tap")));
            }
            if br.from == br.to {
                return Err(GridError::Invalid(format!("branch {k} is a self loop")));
            }
            for end in [br.from, br.to] {
                if !ids.contains(&end) {
                    return Err(GridError::UnknownBus(end));
                }
            }
        }
        if !self.is_connected() {
            return Err(GridError::Disconnected);
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let index = self.index_map();
        let n = self.buses.len();
        if n == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); n];
        for br in &self.branches {
            if let (Some(&f), Some(&t)) = (index.get(&br.from), index.get(&br.to)) {
                adj[f].push(t);
                adj[t].push(f);
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn index_map(&self) -> BTreeMap<u32, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(k, b)| (b.id, k))
            .collect()
    }

    pub fn bus_index(&self, id: u32) -> Result<usize, GridError> {
        self.buses
            .iter()
            .position(|b| b.id == id)
            .ok_or(GridError::UnknownBus(id))
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated case has a slack bus")
    }

    /// Copy with every branch resistance set to zero.
    pub fn lossless(&self) -> GridCase {
        let mut c = self.clone();
        c.name = format!("{}-lossless", self.name);
        for br in c.branches.iter_mut() {
            br.r = 0.0;
        }
        c
    }
}
