//! Client energy-per-MAC accounting and optical link budgets.
//!
//! Device energies are amortized by a spatial fan-out N (wavelengths served
//! per event) or a temporal fan-out M (MACs accumulated per readout). The
//! headline "~1 pJ"/"~1 fJ" device figures are stored as exact defaults
//! (1e-12 J, 1e-15 J); callers may override any entry.

use crate::channel::{friis_received_power, FreeSpaceConfig};
use crate::constants::photon_energy;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default shot-limited energy per MAC for spacecraft links: one photon at
/// 1550 nm.
pub fn shot_limited_e_mac() -> f64 {
    photon_energy(1550e-9)
}

/// How a device's per-event energy is shared across MACs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fanout {
    /// Amortized over the N wavelength channels.
    Spatial,
    /// Amortized over the M MACs per readout window.
    Temporal,
    /// Charged in full on every MAC.
    None,
}

/// One device line in a client energy table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeviceEntry {
    pub name: String,
    /// Devices firing per event set.
    pub count: usize,
    pub fanout: Fanout,
    pub energy_per_event_j: f64,
}

impl DeviceEntry {
    pub fn new(name: &str, count: usize, fanout: Fanout, energy_per_event_j: f64) -> Self {
        DeviceEntry {
            name: name.to_string(),
            count,
            fanout,
            energy_per_event_j,
        }
    }

    pub fn per_mac(&self, n: usize, m: usize) -> f64 {
        let divisor = match self.fanout {
            Fanout::Spatial => n as f64,
            Fanout::Temporal => m as f64,
            Fanout::None => 1.0,
        };
        self.count as f64 * self.energy_per_event_j / divisor
    }
}

/// Per-device energy account; components always sum to the total.
#[derive(Clone, Debug)]
pub struct EnergyBreakdown {
    pub entries: Vec<(String, f64)>,
    pub total_j_per_mac: f64,
}

impl EnergyBreakdown {
    fn from_entries(table: &[DeviceEntry], n: usize, m: usize) -> Self {
        let entries: Vec<(String, f64)> = table
            .iter()
            .map(|e| (e.name.clone(), e.per_mac(n, m)))
            .collect();
        let total_j_per_mac = entries.iter().map(|(_, v)| v).sum();
        EnergyBreakdown {
            entries,
            total_j_per_mac,
        }
    }

    /// Aligned text table for terminal output.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let width = self
            .entries
            .iter()
            .map(|(n, _)| n.len())
            .max()
            .unwrap_or(6)
            .max(5);
        for (name, v) in &self.entries {
            out.push_str(&format!("{name:<width$}  {:>12.4e} J/MAC\n", v));
        }
        out.push_str(&format!("{:<width$}  {:>12.4e} J/MAC\n", "total", self.total_j_per_mac));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("device,energy_j_per_mac\n");
        for (name, v) in &self.entries {
            out.push_str(&format!("{name},{v}\n"));
        }
        out.push_str(&format!("total,{}\n", self.total_j_per_mac));
        out
    }
}

/// Default device table for the time-integration, frequency-separation
/// client: one broadband modulator and DAC serve N wavelengths per symbol;
/// the ADC and the per-wavelength integrator bank read out every M MACs.
/// Counts are devices per MAC stream, so the N-wide integrator bank
/// amortizes per unit.
pub fn default_tifs_table() -> Vec<DeviceEntry> {
    vec![
        DeviceEntry::new("modulator", 1, Fanout::Spatial, 1e-12),
        DeviceEntry::new("dac", 1, Fanout::Spatial, 1e-12),
        DeviceEntry::new("adc", 1, Fanout::Temporal, 1e-12),
        DeviceEntry::new("integrator", 1, Fanout::Temporal, 1e-15),
    ]
}

/// Default table for the frequency-integration, time-separation client:
/// M resonant input modulators fire per timestep serving N wavelengths.
pub fn default_fits_table(m: usize) -> Vec<DeviceEntry> {
    vec![
        DeviceEntry::new("modulator", m, Fanout::Spatial, 1e-15),
        DeviceEntry::new("dac", 1, Fanout::Spatial, 1e-12),
        DeviceEntry::new("adc", 1, Fanout::Temporal, 1e-12),
        DeviceEntry::new("laser", 1, Fanout::None, 1e-18),
    ]
}

/// Amortized client energy for the time-integrating architecture.
pub fn tifs_client_energy(n: usize, m: usize, table: &[DeviceEntry]) -> Result<EnergyBreakdown> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("tifs_client_energy: N and M must be >= 1"));
    }
    Ok(EnergyBreakdown::from_entries(table, n, m))
}

/// Amortized client energy for the frequency-integrating architecture.
pub fn fits_client_energy(n: usize, m: usize, table: &[DeviceEntry]) -> Result<EnergyBreakdown> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("fits_client_energy: N and M must be >= 1"));
    }
    Ok(EnergyBreakdown::from_entries(table, n, m))
}

/// What a budget stage does to the optical power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Loss,
    Amplifier,
}

/// One stage of a link budget; positive dB is loss, negative is gain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub db: f64,
    pub kind: StageKind,
}

impl Stage {
    pub fn loss(name: &str, db: f64) -> Self {
        Stage {
            name: name.to_string(),
            db,
            kind: StageKind::Loss,
        }
    }

    pub fn amplifier(name: &str, gain_db: f64) -> Self {
        Stage {
            name: name.to_string(),
            db: -gain_db,
            kind: StageKind::Amplifier,
        }
    }
}

/// Per-stage optical power account from launch to detector.
#[derive(Clone, Debug)]
pub struct LinkBudget {
    pub stages: Vec<Stage>,
    pub launch_power_w: f64,
    pub received_power_w: f64,
    pub e_mac_required_j: f64,
    /// MAC/s per wavelength achievable with the received power.
    pub achievable_rate_hz: f64,
    /// Non-fatal inconsistencies found while composing the budget.
    pub warnings: Vec<String>,
}

impl LinkBudget {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let width = self.stages.iter().map(|s| s.name.len()).max().unwrap_or(8).max(8);
        out.push_str(&format!("{:<width$}  {:>10.4e} W\n", "launch", self.launch_power_w));
        let mut p = self.launch_power_w;
        for s in &self.stages {
            p *= crate::channel::db_to_factor(s.db);
            out.push_str(&format!("{:<width$}  {:>10.4e} W  ({:+.2} dB)\n", s.name, p, -s.db));
        }
        out.push_str(&format!("{:<width$}  {:>10.4e} W\n", "received", self.received_power_w));
        out.push_str(&format!(
            "{:<width$}  {:>10.4e} MAC/s per wavelength at {:.3e} J/MAC\n",
            "rate", self.achievable_rate_hz, self.e_mac_required_j
        ));
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,db,power_after_w\n");
        let mut p = self.launch_power_w;
        out.push_str(&format!("launch,0,{p}\n"));
        for s in &self.stages {
            p *= crate::channel::db_to_factor(s.db);
            out.push_str(&format!("{},{},{}\n", s.name, s.db, p));
        }
        out.push_str(&format!("rate_mac_per_s,,{}\n", self.achievable_rate_hz));
        out
    }
}

/// Compose stage losses into received power and the achievable MAC rate,
/// received / e_mac.
pub fn compute_link_budget(
    stages: Vec<Stage>,
    launch_power_w: f64,
    e_mac_required_j: f64,
) -> Result<LinkBudget> {
    if launch_power_w <= 0.0 || e_mac_required_j <= 0.0 {
        return Err(Error::invalid("compute_link_budget: powers must be positive"));
    }
    let mut warnings = Vec::new();
    let mut factor = 1.0;
    for s in &stages {
        if s.db < 0.0 && s.kind == StageKind::Loss {
            warnings.push(format!("stage '{}' has gain without an amplifier", s.name));
        }
        factor *= crate::channel::db_to_factor(s.db);
    }
    let received_power_w = launch_power_w * factor;
    Ok(LinkBudget {
        stages,
        launch_power_w,
        received_power_w,
        e_mac_required_j,
        achievable_rate_hz: received_power_w / e_mac_required_j,
        warnings,
    })
}

/// Free-space compute rate: Friis received power over e_mac, per wavelength
/// and summed over the wavelength bank.
pub struct SpacecraftRate {
    pub received_power_w: f64,
    pub per_wavelength_mac_s: f64,
    pub total_mac_s: f64,
}

pub fn spacecraft_rate(cfg: &FreeSpaceConfig, e_mac_j: f64, n_wavelengths: usize) -> Result<SpacecraftRate> {
    if e_mac_j <= 0.0 {
        return Err(Error::invalid("spacecraft_rate: e_mac must be positive"));
    }
    let p = friis_received_power(cfg)?;
    let per = p / e_mac_j;
    Ok(SpacecraftRate {
        received_power_w: p,
        per_wavelength_mac_s: per,
        total_mac_s: per * n_wavelengths as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::presets as links;
    use approx::assert_relative_eq;

    #[test]
    fn tifs_defaults_order_of_magnitude() {
        let b = tifs_client_energy(100, 100, &default_tifs_table()).unwrap();
        // deterministic sum of the default entries
        assert_relative_eq!(b.total_j_per_mac, 3.001e-14, max_relative = 1e-9);
        // within the headline order of magnitude of 10 fJ/MAC
        let ratio = b.total_j_per_mac / 1e-14;
        assert!(ratio < 3.2 && ratio > 1.0 / 3.2, "ratio {ratio}");
    }

    #[test]
    fn tifs_n1_m1_is_raw_sum() {
        let b = tifs_client_energy(1, 1, &default_tifs_table()).unwrap();
        assert_relative_eq!(b.total_j_per_mac, 3.001e-12, max_relative = 1e-12);
    }

    #[test]
    fn doubling_n_halves_spatial_entries() {
        let t = default_tifs_table();
        let b1 = tifs_client_energy(100, 100, &t).unwrap();
        let b2 = tifs_client_energy(200, 100, &t).unwrap();
        for ((n1, v1), (_, v2)) in b1.entries.iter().zip(&b2.entries) {
            if n1 == "modulator" || n1 == "dac" {
                assert_relative_eq!(*v2, v1 / 2.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn totals_monotone_in_n_and_m() {
        let t = default_tifs_table();
        let mut prev = f64::INFINITY;
        for k in [1, 2, 5, 10, 50, 100, 1000] {
            let b = tifs_client_energy(k, 100, &t).unwrap();
            assert!(b.total_j_per_mac <= prev);
            prev = b.total_j_per_mac;
        }
        prev = f64::INFINITY;
        for k in [1, 2, 5, 10, 50, 100, 1000] {
            let b = tifs_client_energy(100, k, &t).unwrap();
            assert!(b.total_j_per_mac <= prev);
            prev = b.total_j_per_mac;
        }
    }

    #[test]
    fn breakdown_sums_exactly() {
        let b = tifs_client_energy(37, 53, &default_tifs_table()).unwrap();
        let sum: f64 = b.entries.iter().map(|(_, v)| v).sum();
        assert_eq!(sum, b.total_j_per_mac);
    }

    #[test]
    fn fits_defaults() {
        let b = fits_client_energy(100, 100, &default_fits_table(100)).unwrap();
        // ~10 fJ scale, DAC is the largest entry
        let ratio = b.total_j_per_mac / 1e-14;
        assert!(ratio < 3.2 && ratio > 1.0 / 3.2, "ratio {ratio}");
        let dac = b.entries.iter().find(|(n, _)| n == "dac").unwrap().1;
        assert!(b.entries.iter().all(|(_, v)| *v <= dac));

        // M = 1: modulator term collapses to (1/N) fJ
        let b1 = fits_client_energy(100, 1, &default_fits_table(1)).unwrap();
        let m1 = b1.entries.iter().find(|(n, _)| n == "modulator").unwrap().1;
        assert_relative_eq!(m1, 1e-15 / 100.0, max_relative = 1e-12);

        // laser entry is constant in N and M
        for (n, m) in [(10, 10), (100, 100), (1000, 7)] {
            let b = fits_client_energy(n, m, &default_fits_table(m)).unwrap();
            let laser = b.entries.iter().find(|(nm, _)| nm == "laser").unwrap().1;
            assert_relative_eq!(laser, 1e-18, max_relative = 1e-12);
        }
    }

    #[test]
    fn worked_link_budget() {
        let stages = vec![
            Stage::loss("server", 10.0),
            Stage::loss("fiber", 10.0),
            Stage::loss("client", 6.0),
        ];
        let budget = compute_link_budget(stages, 10e-3, 100e-18).unwrap();
        assert!((budget.received_power_w - 25e-6).abs() / 25e-6 < 0.01,
            "received {}", budget.received_power_w);
        assert!((budget.achievable_rate_hz - 250e9).abs() / 250e9 < 0.01,
            "rate {}", budget.achievable_rate_hz);
        assert!(budget.warnings.is_empty());
    }

    #[test]
    fn zero_loss_passes_launch_through() {
        let budget = compute_link_budget(vec![Stage::loss("patch", 0.0)], 1e-3, 1e-15).unwrap();
        assert_eq!(budget.received_power_w, 1e-3);
    }

    #[test]
    fn budget_composes_split_stages() {
        let one = compute_link_budget(vec![Stage::loss("span", 17.3)], 5e-3, 1e-16).unwrap();
        let two = compute_link_budget(
            vec![Stage::loss("a", 9.1), Stage::loss("b", 8.2)],
            5e-3,
            1e-16,
        )
        .unwrap();
        assert_relative_eq!(one.received_power_w, two.received_power_w, max_relative = 1e-12);
    }

    #[test]
    fn unexplained_gain_is_flagged() {
        let b = compute_link_budget(vec![Stage::loss("weird", -3.0)], 1e-3, 1e-15).unwrap();
        assert_eq!(b.warnings.len(), 1);
        let ok = compute_link_budget(vec![Stage::amplifier("edfa", 20.0)], 1e-3, 1e-15).unwrap();
        assert!(ok.warnings.is_empty());
    }

    #[test]
    fn spacecraft_reference_rates() {
        let leo = spacecraft_rate(&links::leo(), 1e-19, 100).unwrap();
        let r = leo.per_wavelength_mac_s / 1e16;
        assert!(r > 0.5 && r < 2.0, "LEO per-wavelength {}", leo.per_wavelength_mac_s);

        let mars = spacecraft_rate(&links::mars(), shot_limited_e_mac(), 100).unwrap();
        let r = mars.total_mac_s / 1e9;
        assert!(r > 0.5 && r < 2.0, "Mars total {}", mars.total_mac_s);

        let green = spacecraft_rate(&links::green_mars(), shot_limited_e_mac(), 1000).unwrap();
        let r = green.total_mac_s / 1.4e12;
        assert!(r > 0.5 && r < 2.0, "green Mars total {}", green.total_mac_s);
    }
}
