use rand::Rng;

use crate::agent::stream_rng;
use crate::env::{EnvConfig, FadingMode};
use crate::error::{Error, Result};
use crate::jammer::{FixedJammerConfig, FixedMode};

/// Random-hopping throughput estimated directly from the jamming schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub hops: u64,
    /// ACK fraction over `hops` sampled user hops.
    pub monte_carlo: f64,
    /// Expected ACK fraction over one full schedule period, when the period is short enough.
    pub exact: Option<f64>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// One jammer's schedule, evaluated with integer hertz arithmetic.
struct Schedule {
    cfg: FixedJammerConfig,
    channel_hz: u64,
    band_hz: u64,
    step_hz: u64,
    slots_per_hop: u64,
}

impl Schedule {
    fn new(cfg: &FixedJammerConfig, env: &EnvConfig) -> Result<Self> {
        let modes: Vec<FixedMode> = match cfg.mode {
            FixedMode::Dynamic => cfg.mode_cycle.clone(),
            m => vec![m],
        };
        if let Some(m) = modes.iter().find(|m| {
            !matches!(
                m,
                FixedMode::Sweep | FixedMode::Comb | FixedMode::SwitchComb
            )
        }) {
            return Err(Error::config(
                "jammers",
                format!("the oracle handles sweep, comb and switch_comb schedules, not {m:?}"),
            ));
        }
        let band_hz = env.bandwidth_hz.round() as u64;
        Ok(Schedule {
            cfg: cfg.clone(),
            channel_hz: band_hz / env.channels as u64,
            band_hz,
            step_hz: (cfg.sweep_rate_hz_per_s * env.slot_duration_s).round() as u64,
            slots_per_hop: env.slots_per_hop as u64,
        })
    }

    fn jammed(&self, mode: FixedMode, hop: u64, slot: u64) -> Vec<usize> {
        match mode {
            FixedMode::Sweep => {
                let k = hop * self.slots_per_hop + slot;
                let f =
                    (u128::from(self.step_hz) * u128::from(k) % u128::from(self.band_hz)) as u64;
                vec![(f / self.channel_hz) as usize]
            }
            FixedMode::Comb => self.cfg.comb_channels.clone(),
            FixedMode::SwitchComb => {
                self.cfg.comb_pair[((hop / self.cfg.switch_period_hops) % 2) as usize].clone()
            }
            FixedMode::Dynamic => {
                let c = &self.cfg.mode_cycle;
                let m = c[((hop / self.cfg.cycle_period_hops) % c.len() as u64) as usize];
                self.jammed(m, hop, slot)
            }
            _ => unreachable!("rejected in Schedule::new"),
        }
    }

    fn period_hops(&self) -> u64 {
        let sweep_slots = if self.step_hz == 0 {
            1
        } else {
            self.band_hz / gcd(self.step_hz, self.band_hz)
        };
        let sweep = lcm(sweep_slots, self.slots_per_hop) / self.slots_per_hop;
        match self.cfg.mode {
            FixedMode::Sweep => sweep,
            FixedMode::Comb => 1,
            FixedMode::SwitchComb => 2 * self.cfg.switch_period_hops,
            _ => {
                let cycle = self.cfg.mode_cycle.len() as u64 * self.cfg.cycle_period_hops;
                lcm(lcm(cycle, sweep), 2 * self.cfg.switch_period_hops)
            }
        }
    }
}

/// Estimates random-hopping throughput against fixed jammers with deterministic links.
pub fn random_fh_oracle(
    env: &EnvConfig,
    jammers: &[FixedJammerConfig],
    hops: u64,
    seed: u64,
) -> Result<OracleReport> {
    env.validate()?;
    let links: Vec<_> = std::iter::once(env.user_link)
        .chain((0..jammers.len()).map(|i| env.jammer_links.get(i).copied().unwrap_or_default()))
        .collect();
    if links.iter().any(|l| l.fading != FadingMode::Deterministic) {
        return Err(Error::config(
            "env",
            "the oracle requires deterministic links",
        ));
    }
    let schedules = jammers
        .iter()
        .map(|j| Schedule::new(j, env))
        .collect::<Result<Vec<_>>>()?;
    let signal = 10f64.powf(env.user_power_dbm / 10.0) * links[0].distance.powf(-links[0].alpha_d);
    let noise = 10f64.powf(env.noise_dbm / 10.0);
    let threshold = 10f64.powf(env.sinr_threshold_db / 10.0);
    let jam_power: Vec<f64> = jammers
        .iter()
        .zip(&links[1..])
        .map(|(j, l)| 10f64.powf(j.power_dbm / 10.0) * l.distance.powf(-l.alpha_d))
        .collect();

    let acked = |hop: u64, channel: usize| -> bool {
        (0..env.slots_per_hop as u64).all(|slot| {
            let jam: f64 = schedules
                .iter()
                .zip(&jam_power)
                .map(|(s, p)| {
                    let n = s
                        .jammed(s.cfg.mode, hop, slot)
                        .iter()
                        .filter(|&&c| c == channel)
                        .count();
                    n as f64 * p
                })
                .sum();
            signal >= threshold * (jam + noise)
        })
    };

    let mut rng = stream_rng(seed, 0x6f72_6163_6c65);
    let mut acks = 0u64;
    for hop in 0..hops {
        let channel = rng.random_range(0..env.channels);
        acks += u64::from(acked(hop, channel));
    }

    let period = schedules.iter().fold(1, |p, s| lcm(p, s.period_hops()));
    let exact = (period <= 100_000).then(|| {
        let clean: u64 = (0..period)
            .map(|hop| (0..env.channels).filter(|&c| acked(hop, c)).count() as u64)
            .sum();
        clean as f64 / (period * env.channels as u64) as f64
    });

    Ok(OracleReport {
        hops,
        monte_carlo: acks as f64 / hops.max(1) as f64,
        exact,
    })
}
