use serde::{Deserialize, Serialize};

use crate::contact::ContactStore;
use crate::points::{DeviceId, Role};

use super::distribution::TimerTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transition {
    Infected,
    Patched,
}

/// One role change. `window_start + timer = t`, where the timer is the
/// infection (or patching) time of the ordered pair `(cause, device)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub device: DeviceId,
    pub transition: Transition,
    pub cause: DeviceId,
    pub window_start: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceState {
    Susceptible,
    Infected,
    /// A formerly infected device that has become a white knight.
    Patched,
    Knight,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub susceptible: usize,
    pub infected: usize,
    /// Original and patched white knights.
    pub knights: usize,
}

/// Time-ordered role transitions of one run. The root's infection at time
/// zero is implied, not listed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpidemicTrace {
    pub root: DeviceId,
    pub initial_roles: Vec<Role>,
    pub events: Vec<Event>,
    /// `None` when the run continued until nothing could change.
    pub horizon: Option<f64>,
    pub infected_at: Vec<Option<f64>>,
    pub patched_at: Vec<Option<f64>>,
}

impl EpidemicTrace {
    pub fn len(&self) -> usize {
        self.initial_roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial_roles.is_empty()
    }

    /// State after all events at times `<= t`.
    pub fn state_at(&self, id: DeviceId, t: f64) -> DeviceState {
        let i = id as usize;
        if self.initial_roles[i] == Role::Knight {
            return DeviceState::Knight;
        }
        match (self.infected_at[i], self.patched_at[i]) {
            (_, Some(p)) if p <= t => DeviceState::Patched,
            (Some(s), _) if s <= t => DeviceState::Infected,
            _ => DeviceState::Susceptible,
        }
    }

    pub fn final_state(&self, id: DeviceId) -> DeviceState {
        self.state_at(id, f64::INFINITY)
    }

    pub fn counts_at(&self, t: f64) -> Counts {
        let mut c = Counts::default();
        for id in 0..self.len() as DeviceId {
            match self.state_at(id, t) {
                DeviceState::Susceptible => c.susceptible += 1,
                DeviceState::Infected => c.infected += 1,
                DeviceState::Patched | DeviceState::Knight => c.knights += 1,
            }
        }
        c
    }

    /// Devices infected at some point, root included, sorted.
    pub fn ever_infected(&self) -> Vec<DeviceId> {
        (0..self.len() as DeviceId)
            .filter(|&i| self.infected_at[i as usize].is_some())
            .collect()
    }

    /// Devices still infected at the end of the run.
    pub fn infected_at_end(&self) -> Vec<DeviceId> {
        (0..self.len() as DeviceId)
            .filter(|&i| self.final_state(i) == DeviceState::Infected)
            .collect()
    }

    /// Time at which the last infected device was patched, if that
    /// happened.
    pub fn extinction_time(&self) -> Option<f64> {
        if self.infected_at_end().is_empty() {
            self.patched_at.iter().flatten().copied().reduce(f64::max)
        } else {
            None
        }
    }

    /// Check the trace against the contacts and timers it was produced
    /// from. Returns a description of the first violation.
    pub fn audit(&self, contacts: &ContactStore, timers: &TimerTable) -> Result<(), String> {
        let n = self.len();
        let mut infected = vec![0u32; n];
        let mut patched = vec![0u32; n];
        infected[self.root as usize] = 1;
        let mut last_t = f64::NEG_INFINITY;
        for (k, e) in self.events.iter().enumerate() {
            let i = e.device as usize;
            let c = e.cause as usize;
            let fail = |msg: &str| Err(format!("event {k} ({e:?}): {msg}"));
            if e.t < last_t {
                return fail("events out of time order");
            }
            last_t = e.t;
            if self.initial_roles[i] == Role::Knight {
                return fail("a knight changed state");
            }
            let intervals = contacts
                .get(e.cause, e.device)
                .map_err(|err| err.to_string())?;
            match e.transition {
                Transition::Infected => {
                    infected[i] += 1;
                    let rho = timers
                        .infection(e.cause, e.device)
                        .map_err(|err| err.to_string())?;
                    if e.window_start + rho != e.t {
                        return fail("window length differs from the pair's infection time");
                    }
                    let Some(tc) = self.infected_at[c] else {
                        return fail("cause was never infected");
                    };
                    if tc > e.window_start || self.patched_at[c].is_some_and(|p| p < e.t) {
                        return fail("cause not infected throughout the window");
                    }
                    if !window_fits(intervals, e.window_start, e.t) {
                        return fail("window not inside one contact interval");
                    }
                }
                Transition::Patched => {
                    patched[i] += 1;
                    if infected[i] == 0 {
                        return fail("patched before being infected");
                    }
                    let rho = timers
                        .patch(e.cause, e.device)
                        .map_err(|err| err.to_string())?;
                    if e.window_start + rho != e.t {
                        return fail("window length differs from the pair's patching time");
                    }
                    let onset = if self.initial_roles[c] == Role::Knight {
                        Some(0.0)
                    } else {
                        self.patched_at[c]
                    };
                    if onset.is_none_or(|o| o > e.window_start) {
                        return fail("cause not a knight at the window start");
                    }
                    if self.infected_at[i].is_none_or(|s| s > e.window_start) {
                        return fail("target not infected at the window start");
                    }
                    if !window_fits(intervals, e.window_start, e.t) {
                        return fail("window not inside one contact interval");
                    }
                }
            }
        }
        if infected.iter().any(|&k| k > 1) || patched.iter().any(|&k| k > 1) {
            return Err("a device changed state twice in the same way".into());
        }
        Ok(())
    }
}

/// Whether the window starting at `s` and ending at `t` fits in one
/// interval: it may start at the interval's left end only if it ends
/// strictly before the right end.
pub(crate) fn window_fits(intervals: &[crate::contact::Interval], s: f64, t: f64) -> bool {
    intervals.iter().any(|iv| {
        if s == iv.start {
            t < iv.end
        } else {
            s > iv.start && t <= iv.end
        }
    })
}
