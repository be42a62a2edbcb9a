//! Configuration, units and the energy/carbon cost primitives.
//!
//! Internal units: carbon footprint in grams CO₂eq, energy in joules, carbon
//! intensity in gCO₂/kWh, durations in seconds unless a field says slots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};

/// Joules per kilowatt-hour.
pub const JOULES_PER_KWH: f64 = 3.6e6;

/// Reference intensity used to define the default budget unit (gCO₂/kWh).
pub const BUDGET_UNIT_REFERENCE_XI: f64 = 180.0;

/// Number of updates whose footprint at [`BUDGET_UNIT_REFERENCE_XI`] makes one budget unit.
pub const BUDGET_UNIT_UPDATES: f64 = 50.0;

/// Carbon footprint of spending `energy` joules at intensity `xi`, in grams CO₂eq.
pub fn carbon_cost(xi: f64, energy: f64) -> Result<f64> {
    if !(xi >= 0.0) || !(energy >= 0.0) {
        return Err(Error::domain(format!(
            "carbon_cost needs non-negative inputs, got xi={xi}, energy={energy}"
        )));
    }
    Ok(carbon_cost_unchecked(xi, energy))
}

#[inline]
pub(crate) fn carbon_cost_unchecked(xi: f64, energy: f64) -> f64 {
    xi * energy / JOULES_PER_KWH
}

/// LoRa modulation settings needed for the time-on-air computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoraPhy {
    /// Coding rate index 1..=4, i.e. 4/5 ..= 4/8.
    pub coding_rate: u8,
    pub preamble_symbols: u32,
    pub explicit_header: bool,
    pub crc: bool,
    pub low_data_rate_optimize: bool,
}

impl Default for LoraPhy {
    /// Raw LoRa PHY framing (implicit header, no CRC, no LDRO, CR 4/5,
    /// 8 preamble symbols). These settings reconstruct the 0.9251 J
    /// per-update energy from the Table-1 power levels to within 2%.
    fn default() -> Self {
        Self {
            coding_rate: 1,
            preamble_symbols: 8,
            explicit_header: false,
            crc: false,
            low_data_rate_optimize: false,
        }
    }
}

/// Standard Semtech LoRa time-on-air, in seconds.
pub fn lora_time_on_air(spreading_factor: u32, bandwidth_hz: f64, payload_bits: u32, phy: &LoraPhy) -> Result<f64> {
    if !(6..=12).contains(&spreading_factor) {
        return Err(Error::domain(format!("spreading factor {spreading_factor} outside 6..=12")));
    }
    if !(bandwidth_hz > 0.0) {
        return Err(Error::domain("bandwidth must be positive"));
    }
    if !(1..=4).contains(&phy.coding_rate) {
        return Err(Error::domain(format!("coding rate index {} outside 1..=4", phy.coding_rate)));
    }
    let sf = spreading_factor as i64;
    let t_sym = (1u64 << spreading_factor) as f64 / bandwidth_hz;
    let t_preamble = (phy.preamble_symbols as f64 + 4.25) * t_sym;

    let payload_bytes = payload_bits.div_ceil(8) as i64;
    let crc = phy.crc as i64;
    let implicit = (!phy.explicit_header) as i64;
    let de = phy.low_data_rate_optimize as i64;
    let num = 8 * payload_bytes - 4 * sf + 28 + 16 * crc - 20 * implicit;
    let den = 4 * (sf - 2 * de);
    let blocks = if num > 0 { (num + den - 1) / den } else { 0 };
    let payload_symbols = 8 + blocks * (phy.coding_rate as i64 + 4);

    Ok(t_preamble + payload_symbols as f64 * t_sym)
}

/// Power levels and durations that make up the per-update active energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyComponents {
    pub iot_tx_power: f64,
    pub iot_rx_power: f64,
    pub rx_window_seconds: f64,
    pub gw_tx_power: f64,
    pub gw_fwd_seconds: f64,
    pub sv_proc_power: f64,
    pub task_flops: f64,
    pub server_flops_per_sec: f64,
    pub spreading_factor: u32,
    pub bandwidth_hz: f64,
    pub payload_bits: u32,
    #[serde(default)]
    pub phy: LoraPhy,
}

impl EnergyComponents {
    /// Hardware and PHY parameters of the reference LoRaWAN Class-A deployment.
    pub fn table1() -> Self {
        Self {
            iot_tx_power: 0.125,
            iot_rx_power: 0.010,
            rx_window_seconds: 0.1,
            gw_tx_power: 3.0,
            gw_fwd_seconds: 0.001,
            sv_proc_power: 150.0,
            task_flops: 50e6,
            server_flops_per_sec: 10e9,
            spreading_factor: 12,
            bandwidth_hz: 125e3,
            payload_bits: 256,
            phy: LoraPhy::default(),
        }
    }

    pub fn time_on_air(&self) -> Result<f64> {
        lora_time_on_air(self.spreading_factor, self.bandwidth_hz, self.payload_bits, &self.phy)
    }

    /// Device-side share: uplink airtime plus both Class-A receive windows.
    pub fn device_energy(&self) -> Result<f64> {
        Ok(self.iot_tx_power * self.time_on_air()? + self.iot_rx_power * 2.0 * self.rx_window_seconds)
    }

    pub fn gateway_energy(&self) -> f64 {
        self.gw_tx_power * self.gw_fwd_seconds
    }

    pub fn server_energy(&self) -> Result<f64> {
        if !(self.server_flops_per_sec > 0.0) {
            return Err(Error::domain("server_flops_per_sec must be positive"));
        }
        Ok(self.sv_proc_power * (self.task_flops / self.server_flops_per_sec))
    }
}

/// Total active energy of one status update, in joules.
pub fn compose_energy(c: &EnergyComponents) -> Result<f64> {
    let non_negative = [
        ("iot_tx_power", c.iot_tx_power),
        ("iot_rx_power", c.iot_rx_power),
        ("rx_window_seconds", c.rx_window_seconds),
        ("gw_tx_power", c.gw_tx_power),
        ("gw_fwd_seconds", c.gw_fwd_seconds),
        ("sv_proc_power", c.sv_proc_power),
        ("task_flops", c.task_flops),
    ];
    for (name, v) in non_negative {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::domain(format!("{name} must be a finite non-negative number, got {v}")));
        }
    }
    Ok(c.device_energy()? + c.gateway_energy() + c.server_energy()?)
}

/// When the energy of an update is charged against the carbon ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyAttribution {
    /// The full per-update energy is charged at device activation.
    #[default]
    Activation,
    /// Device, gateway and server shares are charged at the slot each stage runs.
    Staged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    /// Full active energy of one update (joules).
    pub e_tot_per_update: f64,
    pub components: Option<EnergyComponents>,
    /// Infrastructure overhead (watts); reported separately, never gated.
    pub idle_power: f64,
    #[serde(default)]
    pub attribution: EnergyAttribution,
}

impl EnergyModel {
    pub fn table1() -> Self {
        Self {
            e_tot_per_update: 0.9251,
            components: Some(EnergyComponents::table1()),
            idle_power: 101.5,
            attribution: EnergyAttribution::Activation,
        }
    }

    /// Split of `e_tot_per_update` into (device, gateway, server) shares.
    /// Without components everything is attributed to the device.
    pub fn stage_shares(&self) -> (f64, f64, f64) {
        let e = self.e_tot_per_update;
        let Some(c) = &self.components else {
            return (e, 0.0, 0.0);
        };
        let (Ok(dev), gw, Ok(sv)) = (c.device_energy(), c.gateway_energy(), c.server_energy()) else {
            return (e, 0.0, 0.0);
        };
        let total = dev + gw + sv;
        if !(total > 0.0) {
            return (e, 0.0, 0.0);
        }
        (e * dev / total, e * gw / total, e * sv / total)
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon_slots: usize,
    /// Seconds per slot.
    pub slot_duration: f64,
    pub num_sources: usize,
    pub channel_capacity: usize,
    /// Carbon budget in config units; grams = `cf_budget * cf_budget_scale`.
    pub cf_budget: f64,
    /// Grams CO₂eq per config budget unit.
    pub cf_budget_scale: f64,
    /// Per-device duty budget as a fraction of the horizon.
    pub duty_budget: f64,
    /// Airtime of one transmission, seconds.
    pub duty_cost_per_tx: f64,
    pub aoi_cap: u32,
    pub tx_duration_slots: u32,
    pub fwd_duration_slots: u32,
    pub energy: EnergyModel,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::table1(50, 21.5)
    }
}

impl SimConfig {
    /// Reference deployment: 288 five-minute slots, M = 8, D = 1%, 1.296 s
    /// airtime per update, E_tot = 0.9251 J. `kappa_units` is expressed in
    /// [`default_budget_unit_grams`].
    pub fn table1(num_sources: usize, kappa_units: f64) -> Self {
        let energy = EnergyModel::table1();
        Self {
            horizon_slots: 288,
            slot_duration: 300.0,
            num_sources,
            channel_capacity: 8,
            cf_budget: kappa_units,
            cf_budget_scale: default_budget_unit_grams(energy.e_tot_per_update),
            duty_budget: 0.01,
            duty_cost_per_tx: 1.296,
            aoi_cap: 288,
            tx_duration_slots: 1,
            fwd_duration_slots: 1,
            energy,
            rng_seed: 0,
        }
    }

    /// κ in grams CO₂eq.
    pub fn cf_budget_grams(&self) -> f64 {
        self.cf_budget * self.cf_budget_scale
    }

    /// Airtime of one transmission relative to the slot length.
    pub fn duty_cost_frac(&self) -> f64 {
        self.duty_cost_per_tx / self.slot_duration
    }

    /// Increment of the per-device duty ledger for one transmission.
    pub fn duty_increment(&self) -> f64 {
        self.duty_cost_frac() / (self.horizon_slots as f64 * self.num_sources as f64)
    }

    /// Airtime each device may spend over the horizon, seconds.
    pub fn duty_allowance_seconds(&self) -> f64 {
        self.horizon_slots as f64 * self.slot_duration * self.duty_budget
    }

    pub fn horizon_seconds(&self) -> f64 {
        self.horizon_slots as f64 * self.slot_duration
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(self) -> Result<SimConfig> {
        let mut errs = Vec::new();
        let mut bad = |field: &'static str, message: String| errs.push(FieldError { field, message });

        if self.horizon_slots < 1 {
            bad("horizon_slots", "must be at least 1".into());
        }
        if !(self.slot_duration > 0.0) || !self.slot_duration.is_finite() {
            bad("slot_duration", format!("must be positive, got {}", self.slot_duration));
        }
        if self.num_sources < 1 {
            bad("num_sources", "must be at least 1".into());
        }
        if self.channel_capacity < 1 {
            bad("channel_capacity", "must be at least 1".into());
        }
        if !(self.cf_budget >= 0.0) {
            bad("cf_budget", format!("must be non-negative, got {}", self.cf_budget));
        }
        if !(self.cf_budget_scale > 0.0) || !self.cf_budget_scale.is_finite() {
            bad("cf_budget_scale", format!("must be positive, got {}", self.cf_budget_scale));
        }
        if !(self.duty_budget > 0.0 && self.duty_budget <= 1.0) {
            bad("duty_budget", format!("must lie in (0, 1], got {}", self.duty_budget));
        }
        if !(self.duty_cost_per_tx >= 0.0) || !self.duty_cost_per_tx.is_finite() {
            bad("duty_cost_per_tx", format!("must be non-negative, got {}", self.duty_cost_per_tx));
        }
        if self.aoi_cap < 3 {
            bad("aoi_cap", format!("must be at least 3, got {}", self.aoi_cap));
        }
        if self.tx_duration_slots < 1 {
            bad("tx_duration_slots", "must be at least 1".into());
        }
        if self.fwd_duration_slots < 1 {
            bad("fwd_duration_slots", "must be at least 1".into());
        }
        let e = &self.energy;
        if !(e.e_tot_per_update > 0.0) || !e.e_tot_per_update.is_finite() {
            bad("energy.e_tot_per_update", format!("must be positive, got {}", e.e_tot_per_update));
        }
        if !(e.idle_power >= 0.0) {
            bad("energy.idle_power", format!("must be non-negative, got {}", e.idle_power));
        }
        if let Some(c) = &e.components {
            match compose_energy(c) {
                Ok(total) => {
                    let rel = (total - e.e_tot_per_update).abs() / e.e_tot_per_update;
                    if rel > 0.02 {
                        bad(
                            "energy.components",
                            format!(
                                "composed energy {total:.4} J differs from e_tot_per_update {:.4} J by {:.1}%",
                                e.e_tot_per_update,
                                rel * 100.0
                            ),
                        );
                    }
                }
                Err(err) => bad("energy.components", err.to_string()),
            }
        }

        if errs.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }
}

/// Grams CO₂eq in one default budget unit: the footprint of 50 updates at
/// 180 gCO₂/kWh.
pub fn default_budget_unit_grams(e_tot: f64) -> f64 {
    BUDGET_UNIT_UPDATES * carbon_cost_unchecked(BUDGET_UNIT_REFERENCE_XI, e_tot)
}

/// Cumulative carbon and duty spend over an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub cf_spent: f64,
    pub duty_spent: f64,
    pub cf_budget: f64,
    pub duty_budget: f64,
}

impl BudgetLedger {
    pub fn new(cfg: &SimConfig) -> Self {
        Self {
            cf_spent: 0.0,
            duty_spent: 0.0,
            cf_budget: cf_budget_or_inf(cfg),
            duty_budget: cfg.duty_budget,
        }
    }

    pub fn cf_remaining(&self) -> f64 {
        (self.cf_budget - self.cf_spent).max(0.0)
    }

    pub fn duty_remaining(&self) -> f64 {
        (self.duty_budget - self.duty_spent).max(0.0)
    }
}

fn cf_budget_or_inf(cfg: &SimConfig) -> f64 {
    let g = cfg.cf_budget_grams();
    if g.is_nan() {
        f64::INFINITY
    } else {
        g
    }
}
