//! Channel arbitration: which planning channel's trajectory the safety shell
//! executes at each step, and when it abandons all of them for the escape
//! maneuver.
//!
//! Channels are ranked by their current consideration time — the time the
//! shell is willing to stay with a channel before an intervention would have
//! to start. A channel is eligible to take over only while its own plan could
//! still be safely aborted far enough in the future (its last safe
//! intervention step is sufficient). Escapes are executed without changing
//! the arbiter's notion of the selected channel, so control returns to the
//! same channel when the situation clears.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::world::Tau;

/// Arbitration parameters, all in prediction steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellConfig {
    /// Minimum last-safe-intervention step for a channel to count as safe
    /// enough to (keep) control.
    pub tau_suff: u32,
    /// Intervention step at or below which an escape starts immediately.
    pub tau_immediate: u32,
    /// Nominal consideration time of each channel, most preferred first.
    pub tau_c_star: Vec<u32>,
    /// Minimum number of steps between two preference-driven switches.
    pub q: u32,
    /// Demotion gain: how strongly recent insufficiency shrinks a channel's
    /// consideration time.
    pub rho: f64,
    /// Length of the trailing window over which insufficiency is counted.
    pub k_r: u32,
}

impl ShellConfig {
    pub fn channels(&self) -> usize {
        self.tau_c_star.len()
    }
}

/// Nominal consideration time (s) of a channel braking at `a_channel`,
/// relative to an escape maneuver braking at `a_escape`: the head start a
/// gentler plan enjoys before the harder stop would have to begin.
pub fn design_consideration_time(speed: f64, a_channel: f64, a_escape: f64) -> f64 {
    (speed / 2.0) * (1.0 / a_channel - 1.0 / a_escape)
}

/// Trailing record of per-channel insufficiency used to demote channels that
/// keep producing plans the shell could not abort in time.
#[derive(Debug, Clone)]
pub struct PreferenceState {
    windows: Vec<VecDeque<bool>>,
    counts: Vec<u32>,
    k_r: usize,
}

impl PreferenceState {
    pub fn new(channels: usize, k_r: u32) -> Self {
        PreferenceState {
            windows: vec![VecDeque::with_capacity(k_r as usize); channels],
            counts: vec![0; channels],
            k_r: k_r as usize,
        }
    }

    /// Record this step's per-channel intervention steps and return the
    /// current consideration times: the nominal value of each channel shrunk
    /// by how often it was insufficient over the trailing window, floored to
    /// whole steps.
    pub fn update_preferences(&mut self, tau_l: &[Tau], cfg: &ShellConfig) -> Vec<u32> {
        assert_eq!(tau_l.len(), cfg.channels(), "one intervention step per channel");
        for (i, &t) in tau_l.iter().enumerate() {
            let insufficient = !t.at_least(cfg.tau_suff);
            self.windows[i].push_back(insufficient);
            if insufficient {
                self.counts[i] += 1;
            }
            if self.windows[i].len() > self.k_r {
                if self.windows[i].pop_front() == Some(true) {
                    self.counts[i] -= 1;
                }
            }
        }
        cfg.tau_c_star
            .iter()
            .zip(&self.counts)
            .map(|(&star, &g)| (f64::from(star) / (1.0 + cfg.rho * f64::from(g))).floor() as u32)
            .collect()
    }

    /// Number of insufficient steps of `channel` in the trailing window.
    pub fn demotion_count(&self, channel: usize) -> u32 {
        self.counts[channel]
    }
}

/// What the shell does at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    /// Keep executing the currently selected channel.
    Continue { channel: usize },
    /// Move to a more preferred channel that is currently safe enough.
    PreferenceSwitch { channel: usize },
    /// Leave a channel that can no longer be aborted late enough for one
    /// that can.
    SafetySwitch { channel: usize },
    /// No channel is safe to follow: execute the escape maneuver spliced on
    /// the named channel's plan (the one abortable the longest).
    Escape { channel: usize },
}

impl Decision {
    /// Channel whose trajectory the shell bases this step on.
    pub fn channel(&self) -> usize {
        match *self {
            Decision::Continue { channel }
            | Decision::PreferenceSwitch { channel }
            | Decision::SafetySwitch { channel }
            | Decision::Escape { channel } => channel,
        }
    }

    pub fn is_escape(&self) -> bool {
        matches!(self, Decision::Escape { .. })
    }
}

/// Arbiter bookkeeping carried between steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArbiterState {
    /// Channel selected at the previous step (escapes do not change it).
    pub prev_choice: usize,
    /// Step index of the most recent switch; zero before any switch.
    pub last_switch_step: u32,
}

impl ArbiterState {
    pub fn new(initial_channel: usize) -> Self {
        ArbiterState { prev_choice: initial_channel, last_switch_step: 0 }
    }
}

/// Index of the maximum value, breaking ties toward the lowest index.
fn argmax_by<T: PartialOrd + Copy>(indices: &[usize], values: impl Fn(usize) -> T) -> usize {
    let mut best = indices[0];
    let mut best_v = values(best);
    for &i in &indices[1..] {
        let v = values(i);
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// One arbitration step.
///
/// Given each channel's current last-safe-intervention step `tau_l` and
/// consideration time `tau_c` (steps), decide what to execute at step `k`
/// and update the arbiter state. The decision cascade:
///
/// 1. If the minimum dwell time since the last switch has passed and some
///    safe-enough channel has a strictly larger consideration time than the
///    current one, switch preference to the largest such channel.
/// 2. Otherwise, if the current channel could only be aborted within some
///    safe-enough channel's consideration time, that channel takes over
///    (a safety switch).
/// 3. Otherwise, if the current channel's own abort deadline is at most the
///    immediate threshold, escape along the channel abortable the longest.
/// 4. Otherwise keep the current channel.
pub fn arbitrate(
    state: &mut ArbiterState,
    k: u32,
    tau_l: &[Tau],
    tau_c: &[u32],
    cfg: &ShellConfig,
) -> Decision {
    let n = cfg.channels();
    assert_eq!(tau_l.len(), n);
    assert_eq!(tau_c.len(), n);
    let j = state.prev_choice;

    let sufficient: Vec<usize> = (0..n).filter(|&i| tau_l[i].at_least(cfg.tau_suff)).collect();

    if k.saturating_sub(state.last_switch_step) >= cfg.q {
        let better: Vec<usize> = sufficient
            .iter()
            .copied()
            .filter(|&i| tau_c[i] > tau_c[j])
            .collect();
        if !better.is_empty() {
            let target = argmax_by(&better, |i| tau_c[i]);
            state.prev_choice = target;
            state.last_switch_step = k;
            return Decision::PreferenceSwitch { channel: target };
        }
    }

    let overtaking: Vec<usize> = sufficient
        .iter()
        .copied()
        .filter(|&i| Tau::Finite(tau_c[i]) >= tau_l[j])
        .collect();
    if !overtaking.is_empty() {
        let target = argmax_by(&overtaking, |i| tau_c[i]);
        if target == j {
            return Decision::Continue { channel: j };
        }
        state.prev_choice = target;
        state.last_switch_step = k;
        return Decision::SafetySwitch { channel: target };
    }

    if tau_l[j].at_most(cfg.tau_immediate) {
        let all: Vec<usize> = (0..n).collect();
        let basis = argmax_by(&all, |i| tau_l[i]);
        return Decision::Escape { channel: basis };
    }

    Decision::Continue { channel: j }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ShellConfig {
        ShellConfig {
            tau_suff: 19,
            tau_immediate: 4,
            tau_c_star: vec![18, 15, 10],
            q: 20,
            rho: 0.0,
            k_r: 600,
        }
    }

    #[test]
    fn stays_on_preferred_channel_while_safe() {
        let cfg = cfg();
        let mut st = ArbiterState::new(0);
        let d = arbitrate(
            &mut st,
            5,
            &[Tau::Infinite, Tau::Infinite, Tau::Infinite],
            &[18, 15, 10],
            &cfg,
        );
        assert_eq!(d, Decision::Continue { channel: 0 });
        assert_eq!(st.prev_choice, 0);
    }

    #[test]
    fn safety_switch_when_current_channel_expires() {
        let cfg = cfg();
        let mut st = ArbiterState::new(0);
        // Channel 0 abortable only within channel 1's consideration time.
        let d = arbitrate(
            &mut st,
            30,
            &[Tau::Finite(14), Tau::Infinite, Tau::Infinite],
            &[18, 15, 10],
            &cfg,
        );
        assert_eq!(d, Decision::SafetySwitch { channel: 1 });
        assert_eq!(st.prev_choice, 1);
        assert_eq!(st.last_switch_step, 30);
    }

    #[test]
    fn escape_keeps_previous_choice() {
        let cfg = cfg();
        let mut st = ArbiterState::new(0);
        let d = arbitrate(
            &mut st,
            40,
            &[Tau::Finite(3), Tau::Finite(6), Tau::Finite(2)],
            &[18, 15, 10],
            &cfg,
        );
        assert_eq!(d, Decision::Escape { channel: 1 });
        assert_eq!(st.prev_choice, 0);
        assert_eq!(st.last_switch_step, 0);
    }

    #[test]
    fn preference_switch_respects_dwell_time() {
        let cfg = cfg();
        let mut st = ArbiterState::new(1);
        // Channel 0 is safe and more preferred, but the dwell time has not
        // elapsed yet.
        let all_safe = [Tau::Infinite, Tau::Infinite, Tau::Infinite];
        st.last_switch_step = 10;
        let d = arbitrate(&mut st, 25, &all_safe, &[18, 15, 10], &cfg);
        assert_eq!(d, Decision::Continue { channel: 1 });
        let d = arbitrate(&mut st, 30, &all_safe, &[18, 15, 10], &cfg);
        assert_eq!(d, Decision::PreferenceSwitch { channel: 0 });
    }
}
