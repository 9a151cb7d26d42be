//! Grid case description: buses, lines, loads and generators.
//!
//! A [`GridCase`] is immutable once validated. Bus and line order follow the
//! source file; the position of a line in the file is its canonical
//! [`LineId`]. Power is stored in MW as read and converted to per-unit on
//! `base_mva` by the accessors that feed the DC model.

mod matpower;
mod native;
mod topology;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use matpower::parse_matpower;
pub use native::{parse_native, to_native_string};
pub use topology::{bridge_lines, build_incidence, is_connected_without, is_islanding_line, IncidenceMatrices};

/// Balance tolerance between total generation and total load, per-unit.
pub const BALANCE_TOL_PU: f64 = 1e-6;

/// Canonical line index (0-based file order). Displayed 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineId(pub usize);

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Generator,
    Load,
    Transit,
}

impl BusKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BusKind::Slack => "slack",
            BusKind::Generator => "generator",
            BusKind::Load => "load",
            BusKind::Transit => "transit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "slack" | "ref" => Some(BusKind::Slack),
            "generator" | "gen" | "pv" => Some(BusKind::Generator),
            "load" | "pq" => Some(BusKind::Load),
            "transit" => Some(BusKind::Transit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: u32,
    pub to: u32,
    /// Series reactance, per-unit.
    pub reactance: f64,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: u32,
    pub mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: u32,
    pub mw: f64,
}

/// Raw case tables before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaseTables {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub loads: Vec<Load>,
    pub gens: Vec<Generator>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    base_mva: f64,
    buses: Vec<Bus>,
    lines: Vec<Line>,
    loads: Vec<Load>,
    gens: Vec<Generator>,
    bus_index: HashMap<u32, usize>,
    slack: usize,
}

impl GridCase {
    /// Validates raw tables and builds a case.
    pub fn new(tables: CaseTables) -> Result<Self> {
        let CaseTables {
            base_mva,
            buses,
            lines,
            loads,
            gens,
        } = tables;

        if !(base_mva.is_finite() && base_mva > 0.0) {
            return Err(Error::Validation(format!("base_mva must be positive, got {base_mva}")));
        }
        if buses.is_empty() {
            return Err(Error::Validation("case has no buses".into()));
        }

        let mut bus_index = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            if bus_index.insert(b.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate bus id {}", b.id)));
            }
        }

        let slacks: Vec<usize> = buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BusKind::Slack)
            .map(|(i, _)| i)
            .collect();
        let slack = match slacks.as_slice() {
            [s] => *s,
            [] => return Err(Error::Validation("no slack bus".into())),
            _ => {
                return Err(Error::Validation(format!(
                    "{} slack buses (ids {})",
                    slacks.len(),
                    slacks.iter().map(|&i| buses[i].id.to_string()).collect::<Vec<_>>().join(", ")
                )))
            }
        };

        for (l, line) in lines.iter().enumerate() {
            for bus in [line.from, line.to] {
                if !bus_index.contains_key(&bus) {
                    return Err(Error::Validation(format!("line {} references unknown bus {bus}", LineId(l))));
                }
            }
            if line.from == line.to {
                return Err(Error::Validation(format!("line {} is a self-loop at bus {}", LineId(l), line.from)));
            }
            if !(line.reactance.is_finite() && line.reactance > 0.0) {
                return Err(Error::Validation(format!(
                    "line {} ({}-{}) has non-positive or non-finite reactance {}",
                    LineId(l),
                    line.from,
                    line.to,
                    line.reactance
                )));
            }
        }

        let mut seen_load = HashMap::new();
        for load in &loads {
            if !bus_index.contains_key(&load.bus) {
                return Err(Error::Validation(format!("load at unknown bus {}", load.bus)));
            }
            if seen_load.insert(load.bus, ()).is_some() {
                return Err(Error::Validation(format!("two loads at bus {}", load.bus)));
            }
            if !(load.mw.is_finite() && load.mw > 0.0) {
                return Err(Error::Validation(format!("load at bus {} must be positive, got {}", load.bus, load.mw)));
            }
        }
        for gen in &gens {
            let Some(&i) = bus_index.get(&gen.bus) else {
                return Err(Error::Validation(format!("generator at unknown bus {}", gen.bus)));
            };
            if !gen.mw.is_finite() {
                return Err(Error::Validation(format!("generator at bus {} has non-finite output", gen.bus)));
            }
            if !matches!(buses[i].kind, BusKind::Slack | BusKind::Generator) {
                return Err(Error::Validation(format!(
                    "generator at bus {} which is declared {}",
                    gen.bus,
                    buses[i].kind.as_str()
                )));
            }
        }

        let total_load: f64 = loads.iter().map(|l| l.mw).sum();
        let total_gen: f64 = gens.iter().map(|g| g.mw).sum();
        let mismatch = (total_gen - total_load) / base_mva;
        if mismatch.abs() > BALANCE_TOL_PU {
            return Err(Error::Validation(format!(
                "generation {total_gen} MW does not balance load {total_load} MW"
            )));
        }

        let case = GridCase {
            base_mva,
            buses,
            lines,
            loads,
            gens,
            bus_index,
            slack,
        };
        if !topology::is_connected_without(&case, None) {
            return Err(Error::Validation("in-service network is not connected".into()));
        }
        Ok(case)
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn loads(&self) -> &[Load] {
        &self.loads
    }

    pub fn gens(&self) -> &[Generator] {
        &self.gens
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    /// Row index of the slack bus.
    pub fn slack_index(&self) -> usize {
        self.slack
    }

    pub fn bus_index(&self, id: u32) -> Result<usize> {
        self.bus_index.get(&id).copied().ok_or(Error::UnknownBus(id))
    }

    pub fn line(&self, id: LineId) -> Result<&Line> {
        self.lines.get(id.0).ok_or_else(|| Error::UnknownLine(id.to_string()))
    }

    /// Terminal bus row indices `(from, to)` of a line.
    pub fn terminals(&self, id: LineId) -> Result<(usize, usize)> {
        let line = self.line(id)?;
        Ok((self.bus_index[&line.from], self.bus_index[&line.to]))
    }

    /// "from-to" name using bus ids.
    pub fn line_name(&self, id: LineId) -> String {
        match self.lines.get(id.0) {
            Some(l) => format!("{}-{}", l.from, l.to),
            None => id.to_string(),
        }
    }

    /// Resolves a "from-to" name (first match in file order, either
    /// orientation) or a 1-based index.
    pub fn find_line(&self, spec: &str) -> Result<LineId> {
        let spec = spec.trim();
        if let Some((a, b)) = spec.split_once('-') {
            let (a, b): (u32, u32) = match (a.trim().parse(), b.trim().parse()) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return Err(Error::UnknownLine(spec.to_string())),
            };
            let pos = self
                .lines
                .iter()
                .position(|l| l.from == a && l.to == b)
                .or_else(|| self.lines.iter().position(|l| l.from == b && l.to == a));
            return pos.map(LineId).ok_or_else(|| Error::UnknownLine(spec.to_string()));
        }
        let idx: usize = spec.trim_start_matches('#').parse().map_err(|_| Error::UnknownLine(spec.to_string()))?;
        if idx == 0 || idx > self.lines.len() {
            return Err(Error::UnknownLine(spec.to_string()));
        }
        Ok(LineId(idx - 1))
    }

    /// Returns a copy with one line switched out of service. Connectivity is
    /// not re-validated.
    pub fn with_line_out(&self, id: LineId) -> Result<GridCase> {
        self.line(id)?;
        let mut out = self.clone();
        out.lines[id.0].in_service = false;
        Ok(out)
    }

    /// Per-unit net injection vector (generation minus load) in bus order.
    pub fn injections_pu(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.buses.len()];
        for g in &self.gens {
            p[self.bus_index[&g.bus]] += g.mw / self.base_mva;
        }
        for l in &self.loads {
            p[self.bus_index[&l.bus]] -= l.mw / self.base_mva;
        }
        p
    }

    /// Load magnitudes in per-unit, in load-table order.
    pub fn loads_pu(&self) -> Vec<f64> {
        self.loads.iter().map(|l| l.mw / self.base_mva).collect()
    }

    /// Bus row index of each load, in load-table order.
    pub fn load_bus_indices(&self) -> Vec<usize> {
        self.loads.iter().map(|l| self.bus_index[&l.bus]).collect()
    }

    /// Position of the load at a bus row index, if any.
    pub fn load_at(&self, bus_row: usize) -> Option<usize> {
        let id = self.buses.get(bus_row)?.id;
        self.loads.iter().position(|l| l.bus == id)
    }

    pub(crate) fn tables(&self) -> CaseTables {
        CaseTables {
            base_mva: self.base_mva,
            buses: self.buses.clone(),
            lines: self.lines.clone(),
            loads: self.loads.clone(),
            gens: self.gens.clone(),
        }
    }
}

/// Bundled IEEE 39-bus (New England) case in the research table format.
pub const CASE39_M: &str = include_str!("../../data/case39.m");

/// Parses the bundled 39-bus case.
pub fn case39() -> GridCase {
    parse_matpower(CASE39_M).expect("bundled case39 is valid")
}

/// PMU set: monitored buses plus the injections and lines they protect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmuPlacement {
    /// PMU bus ids in the order observations are reported.
    pub pmu_buses: Vec<u32>,
    /// Bus row indices of the PMU buses, same order as `pmu_buses`.
    pub pmu_rows: Vec<usize>,
    /// Bus ids whose injection measurement cannot be attacked.
    pub protected_injection_buses: Vec<u32>,
    /// Lines incident to a PMU bus.
    pub protected_lines: Vec<LineId>,
}

impl PmuPlacement {
    pub fn new(case: &GridCase, pmu_buses: &[u32]) -> Result<Self> {
        if pmu_buses.is_empty() {
            return Err(Error::Invalid("PMU set is empty".into()));
        }
        let mut pmu_rows = Vec::with_capacity(pmu_buses.len());
        for &b in pmu_buses {
            let row = case.bus_index(b)?;
            if pmu_rows.contains(&row) {
                return Err(Error::Invalid(format!("PMU bus {b} listed twice")));
            }
            pmu_rows.push(row);
        }
        let protected_lines = case
            .lines()
            .iter()
            .enumerate()
            .filter(|(_, l)| pmu_buses.contains(&l.from) || pmu_buses.contains(&l.to))
            .map(|(i, _)| LineId(i))
            .collect();
        Ok(PmuPlacement {
            pmu_buses: pmu_buses.to_vec(),
            pmu_rows,
            protected_injection_buses: pmu_buses.to_vec(),
            protected_lines,
        })
    }

    pub fn len(&self) -> usize {
        self.pmu_buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmu_buses.is_empty()
    }

    pub fn covers_line(&self, id: LineId) -> bool {
        self.protected_lines.contains(&id)
    }

    pub fn protects_bus(&self, bus_id: u32) -> bool {
        self.protected_injection_buses.contains(&bus_id)
    }
}

/// In-service, non-islanding lines not covered by a PMU.
pub fn default_candidates(case: &GridCase, pmu: &PmuPlacement) -> Vec<LineId> {
    let bridges = bridge_lines(case);
    (0..case.n_lines())
        .map(LineId)
        .filter(|&id| case.lines()[id.0].in_service && !bridges.contains(&id) && !pmu.covers_line(id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tables_2bus() -> CaseTables {
        CaseTables {
            base_mva: 100.0,
            buses: vec![
                Bus { id: 1, kind: BusKind::Slack },
                Bus { id: 2, kind: BusKind::Load },
            ],
            lines: vec![Line {
                from: 1,
                to: 2,
                reactance: 0.1,
                in_service: true,
            }],
            loads: vec![Load { bus: 2, mw: 50.0 }],
            gens: vec![Generator { bus: 1, mw: 50.0 }],
        }
    }

    #[test]
    fn two_slack_buses_rejected() {
        let mut t = tables_2bus();
        t.buses[1].kind = BusKind::Slack;
        let err = GridCase::new(t).unwrap_err().to_string();
        assert!(err.contains("2 slack buses"), "{err}");
    }

    #[test]
    fn zero_reactance_rejected() {
        let mut t = tables_2bus();
        t.lines[0].reactance = 0.0;
        assert!(matches!(GridCase::new(t), Err(Error::Validation(_))));
    }

    #[test]
    fn imbalance_rejected() {
        let mut t = tables_2bus();
        t.gens[0].mw = 49.0;
        assert!(GridCase::new(t).unwrap_err().to_string().contains("balance"));
    }

    #[test]
    fn disconnected_rejected() {
        let mut t = tables_2bus();
        t.lines[0].in_service = false;
        assert!(GridCase::new(t).unwrap_err().to_string().contains("connected"));
    }

    #[test]
    fn line_lookup_by_name_and_index() {
        let case = GridCase::new(tables_2bus()).unwrap();
        assert_eq!(case.find_line("1-2").unwrap(), LineId(0));
        assert_eq!(case.find_line("2-1").unwrap(), LineId(0));
        assert_eq!(case.find_line("1").unwrap(), LineId(0));
        assert!(case.find_line("0").is_err());
        assert!(case.find_line("3-4").is_err());
    }

    #[test]
    fn pmu_protection_sets() {
        let case = case39();
        let pmu = PmuPlacement::new(&case, &[4, 13, 18, 23, 24]).unwrap();
        let names: Vec<String> = pmu.protected_lines.iter().map(|&l| case.line_name(l)).collect();
        assert_eq!(
            names,
            ["3-4", "3-18", "4-5", "4-14", "10-13", "12-13", "13-14", "16-24", "17-18", "22-23", "23-24", "23-36"]
        );
        assert_eq!(pmu.protected_injection_buses, vec![4, 13, 18, 23, 24]);
    }
}
