//! Chase-escape dynamics: infection spreads from susceptible device to
//! susceptible device, patches spread from white knights to infected
//! devices, which then become knights themselves.

mod distribution;
mod engine;
mod trace;
mod verdict;

pub use distribution::{draw_pair_timers, TimeDistribution, TimerTable};
pub use engine::run;
pub use trace::{Counts, DeviceState, EpidemicTrace, Event, Transition};
pub use verdict::{
    max_infected_distance, survival_verdict, FixedPositions, MovingPositions, Positions, Verdict,
};

use crate::contact::ContactStore;
use crate::error::{Error, Result};
use crate::points::PointConfig;

/// Run the moving-device model up to `t_sim`, the root of `config` being
/// infected at time zero.
pub fn simulate_dynamic(
    config: &PointConfig,
    contacts: &ContactStore,
    timers: &TimerTable,
    t_sim: f64,
) -> Result<EpidemicTrace> {
    let root = config
        .root
        .ok_or_else(|| Error::invalid("root", "the configuration has not been rooted"))?;
    if !(t_sim > 0.0) {
        return Err(Error::invalid(
            "t_sim",
            format!("must be positive, got {t_sim}"),
        ));
    }
    run(&config.roles(), root, contacts, timers, Some(t_sim))
}
