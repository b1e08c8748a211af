//! Post-contingency frequency dynamics on a single-bus equivalent system and
//! reserve sizing against the frequency-security limits.
//!
//! The aggregate swing equation used throughout is
//!
//! ```text
//! (2 E / f0) · dΔf/dt = −ΔP + R · min(t / T_d, 1)
//! ```
//!
//! with `E` the stored kinetic energy (GW·s), `ΔP` the lost generation (GW),
//! `R` the frequency reserve (GW) ramped linearly over the delivery time
//! `T_d`. Damping and load relief are not modelled, so for `R ≥ ΔP` the nadir
//! has the closed form `f0 · ΔP² · T_d / (4 E R)` reached at `t* = ΔP T_d / R`.
//! Once the deviation climbs back to zero it is held there: restoration takes
//! over and the surplus reserve is withdrawn.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Extra simulated time past `max(t*, T_d)`, seconds.
const HORIZON_MARGIN_S: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid {field}: {message}")]
    InvalidInput {
        field: &'static str,
        message: String,
    },
    /// RoCoF depends only on inertia and contingency size, so no reserve volume helps.
    #[error(
        "snapshot '{label}': RoCoF {rocof_hz_per_s:.6} Hz/s for a {contingency_gw} GW contingency \
         exceeds the {limit_hz_per_s} Hz/s limit regardless of reserve"
    )]
    RocofInfeasible {
        label: String,
        contingency_gw: f64,
        rocof_hz_per_s: f64,
        limit_hz_per_s: f64,
    },
}

fn invalid(field: &'static str, message: impl Into<String>) -> DynamicsError {
    DynamicsError::InvalidInput {
        field,
        message: message.into(),
    }
}

/// Which side of the balance a unit sits on, and hence which contingency it can cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// Loss of a generator: under-frequency event.
    Generation,
    /// Loss of a load: over-frequency event.
    Demand,
}

impl Side {
    pub fn service(self) -> Service {
        match self {
            Side::Generation => Service::UnderFrequency,
            Side::Demand => Service::OverFrequency,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Generation => "generation",
            Side::Demand => "demand",
        }
    }
}

/// Direction of a frequency-containment service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Service {
    UnderFrequency,
    OverFrequency,
}

impl Service {
    pub fn as_str(self) -> &'static str {
        match self {
            Service::UnderFrequency => "under-frequency",
            Service::OverFrequency => "over-frequency",
        }
    }
}

fn default_f_nominal() -> f64 {
    50.0
}

/// One operating condition of the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSnapshot {
    pub label: String,
    /// Kinetic energy stored in synchronised machines, GW·s.
    pub inertia_gws: f64,
    #[serde(default = "default_f_nominal")]
    pub f_nominal_hz: f64,
    /// Under-frequency security boundary (49.2 Hz in GB).
    pub f_min_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rocof_limit_hz_per_s: Option<f64>,
    /// Time for reserves to reach full output, s.
    pub delivery_time_s: f64,
    /// Hours per year this snapshot represents.
    #[serde(default)]
    pub weight_hours: f64,
}

impl SystemSnapshot {
    pub fn new(label: impl Into<String>, inertia_gws: f64, delivery_time_s: f64) -> Self {
        SystemSnapshot {
            label: label.into(),
            inertia_gws,
            f_nominal_hz: 50.0,
            f_min_hz: 49.2,
            rocof_limit_hz_per_s: None,
            delivery_time_s,
            weight_hours: 0.0,
        }
    }

    /// Maximum admissible frequency deviation `f0 − f_min`, Hz.
    pub fn max_deviation_hz(&self) -> f64 {
        self.f_nominal_hz - self.f_min_hz
    }

    /// RoCoF immediately after losing `contingency_gw`, before any reserve responds.
    pub fn initial_rocof(&self, contingency_gw: f64) -> f64 {
        -contingency_gw * self.f_nominal_hz / (2.0 * self.inertia_gws)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.inertia_gws.is_finite() && self.inertia_gws > 0.0) {
            return Err(invalid(
                "inertia_gws",
                format!("must be > 0, got {}", self.inertia_gws),
            ));
        }
        if !(self.f_nominal_hz.is_finite()
            && self.f_min_hz > 0.0
            && self.f_min_hz < self.f_nominal_hz)
        {
            return Err(invalid(
                "f_min_hz",
                format!(
                    "must satisfy 0 < f_min_hz < f_nominal_hz, got {} and {}",
                    self.f_min_hz, self.f_nominal_hz
                ),
            ));
        }
        if !(self.delivery_time_s.is_finite() && self.delivery_time_s > 0.0) {
            return Err(invalid(
                "delivery_time_s",
                format!("must be > 0, got {}", self.delivery_time_s),
            ));
        }
        if !(self.weight_hours.is_finite() && self.weight_hours >= 0.0) {
            return Err(invalid(
                "weight_hours",
                format!("must be >= 0, got {}", self.weight_hours),
            ));
        }
        if let Some(limit) = self.rocof_limit_hz_per_s {
            if !(limit.is_finite() && limit > 0.0) {
                return Err(invalid(
                    "rocof_limit_hz_per_s",
                    format!("must be > 0, got {limit}"),
                ));
            }
        }
        Ok(())
    }
}

/// A sudden power imbalance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contingency {
    pub size_gw: f64,
    pub side: Side,
}

impl Contingency {
    pub fn generation_loss(size_gw: f64) -> Self {
        Contingency {
            size_gw,
            side: Side::Generation,
        }
    }

    pub fn demand_loss(size_gw: f64) -> Self {
        Contingency {
            size_gw,
            side: Side::Demand,
        }
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.size_gw.is_finite() && self.size_gw >= 0.0) {
            return Err(invalid(
                "size_gw",
                format!("must be >= 0, got {}", self.size_gw),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Forward Euler. First-order: the nadir is biased by about `step/2 · |RoCoF|`.
    ExplicitEuler,
    /// Trapezoidal quadrature of the power balance. The right-hand side depends
    /// on time only, so this is still explicit, and it is exact on every
    /// piecewise-linear segment.
    #[default]
    Trapezoidal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub step_s: f64,
    /// Minimum horizon; extended when the nadir or full delivery would fall past it.
    pub horizon_s: f64,
    pub integrator: Integrator,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            step_s: 1e-3,
            horizon_s: 30.0,
            integrator: Integrator::default(),
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.step_s.is_finite() && self.step_s > 0.0) {
            return Err(invalid(
                "step_s",
                format!("must be > 0, got {}", self.step_s),
            ));
        }
        if !(self.horizon_s.is_finite() && self.horizon_s >= self.step_s) {
            return Err(invalid(
                "horizon_s",
                format!("must be >= step_s, got {}", self.horizon_s),
            ));
        }
        Ok(())
    }
}

/// Frequency deviation time series after a contingency.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTrace {
    pub times_s: Vec<f64>,
    /// Signed deviation from nominal, Hz. Negative for under-frequency.
    pub deviations_hz: Vec<f64>,
    /// Extremal deviation over the trace, signed.
    pub nadir_hz: f64,
    pub nadir_time_s: f64,
    pub initial_rocof_hz_per_s: f64,
    pub secure: bool,
    /// Reserve below the contingency size: frequency never recovers, and the
    /// nadir is just the last simulated value.
    pub unbounded: bool,
}

/// Integrates the swing equation for one contingency and reserve volume.
pub fn simulate_frequency(
    snapshot: &SystemSnapshot,
    contingency: Contingency,
    reserve_gw: f64,
    config: &SimConfig,
) -> Result<FrequencyTrace, DynamicsError> {
    snapshot.validate()?;
    contingency.validate()?;
    config.validate()?;
    if !(reserve_gw.is_finite() && reserve_gw >= 0.0) {
        return Err(invalid(
            "reserve_gw",
            format!("must be >= 0, got {reserve_gw}"),
        ));
    }

    let imbalance = contingency.size_gw;
    let t_d = snapshot.delivery_time_s;
    let gain = snapshot.f_nominal_hz / (2.0 * snapshot.inertia_gws);
    let unbounded = reserve_gw < imbalance;

    let mut horizon = config.horizon_s;
    if !unbounded && imbalance > 0.0 {
        let t_nadir = imbalance * t_d / reserve_gw;
        horizon = horizon.max(t_nadir.max(t_d) + HORIZON_MARGIN_S);
    }
    let steps = (horizon / config.step_s - 1e-9).ceil() as usize;
    let h = config.step_s;

    let rate = |t: f64| gain * (-imbalance + reserve_gw * (t / t_d).min(1.0));

    let mut times = Vec::with_capacity(steps + 1);
    let mut devs = Vec::with_capacity(steps + 1);
    let mut x = 0.0_f64;
    times.push(0.0);
    devs.push(0.0);
    for k in 0..steps {
        let t0 = k as f64 * h;
        let t1 = (k + 1) as f64 * h;
        x += match config.integrator {
            Integrator::ExplicitEuler => h * rate(t0),
            Integrator::Trapezoidal => 0.5 * h * (rate(t0) + rate(t1)),
        };
        x = x.min(0.0);
        times.push(t1);
        devs.push(x);
    }

    // the trace is computed as under-frequency; a demand loss mirrors it
    if contingency.side == Side::Demand {
        for d in devs.iter_mut() {
            *d = -*d;
        }
    }

    let (nadir_idx, nadir) = devs
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0_f64), |best, (i, d)| {
            if d.abs() > best.1.abs() {
                (i, d)
            } else {
                best
            }
        });

    let mut initial_rocof = snapshot.initial_rocof(imbalance);
    if contingency.side == Side::Demand {
        initial_rocof = -initial_rocof;
    }
    let nadir_ok = nadir.abs() <= snapshot.max_deviation_hz();
    let rocof_ok = snapshot
        .rocof_limit_hz_per_s
        .is_none_or(|limit| initial_rocof.abs() <= limit);

    Ok(FrequencyTrace {
        nadir_time_s: times[nadir_idx],
        times_s: times,
        deviations_hz: devs,
        nadir_hz: nadir,
        initial_rocof_hz_per_s: initial_rocof,
        secure: !unbounded && nadir_ok && rocof_ok,
        unbounded,
    })
}

/// Nadir magnitude `f0 · ΔP² · T_d / (4 E R)` for `R ≥ ΔP`; `None` when the
/// reserve cannot arrest the decline.
pub fn closed_form_nadir(
    snapshot: &SystemSnapshot,
    contingency_gw: f64,
    reserve_gw: f64,
) -> Option<f64> {
    if contingency_gw == 0.0 {
        return Some(0.0);
    }
    if reserve_gw < contingency_gw {
        return None;
    }
    Some(
        snapshot.f_nominal_hz * contingency_gw * contingency_gw * snapshot.delivery_time_s
            / (4.0 * snapshot.inertia_gws * reserve_gw),
    )
}

fn check_rocof(snapshot: &SystemSnapshot, contingency: Contingency) -> Result<(), DynamicsError> {
    if let Some(limit) = snapshot.rocof_limit_hz_per_s {
        let rocof = snapshot.initial_rocof(contingency.size_gw);
        if rocof.abs() > limit {
            return Err(DynamicsError::RocofInfeasible {
                label: snapshot.label.clone(),
                contingency_gw: contingency.size_gw,
                rocof_hz_per_s: rocof,
                limit_hz_per_s: limit,
            });
        }
    }
    Ok(())
}

/// Minimal reserve volume, GW, that keeps the nadir within `f0 − f_min` and
/// covers the lost power in quasi-steady state.
pub fn required_reserve(
    snapshot: &SystemSnapshot,
    contingency: Contingency,
) -> Result<f64, DynamicsError> {
    snapshot.validate()?;
    contingency.validate()?;
    check_rocof(snapshot, contingency)?;
    let dp = contingency.size_gw;
    if dp == 0.0 {
        return Ok(0.0);
    }
    let nadir_binding = snapshot.f_nominal_hz * dp * dp * snapshot.delivery_time_s
        / (4.0 * snapshot.inertia_gws * snapshot.max_deviation_hz());
    Ok(dp.max(nadir_binding))
}

/// Same quantity as [`required_reserve`], found by bisection on the simulator's
/// `secure` flag instead of the closed form.
pub fn required_reserve_by_bisection(
    snapshot: &SystemSnapshot,
    contingency: Contingency,
    config: &SimConfig,
    tolerance_gw: f64,
) -> Result<f64, DynamicsError> {
    snapshot.validate()?;
    contingency.validate()?;
    check_rocof(snapshot, contingency)?;
    if contingency.size_gw == 0.0 {
        return Ok(0.0);
    }
    let secure = |r: f64| simulate_frequency(snapshot, contingency, r, config).map(|t| t.secure);

    let mut lo = 0.0;
    let mut hi = contingency.size_gw.max(1e-6);
    while !secure(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return Err(invalid(
                "reserve_gw",
                "no finite reserve secures the contingency",
            ));
        }
    }
    while hi - lo > tolerance_gw {
        let mid = 0.5 * (lo + hi);
        if secure(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
