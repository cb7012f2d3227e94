//! Subframe-level delivery of one content item over a formed configuration.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::formation::{AreaId, FormationConfiguration};
use crate::frame::{CarrierGrid, SubframeKind, TddConfiguration, SUBFRAME_DURATION_S};
use crate::radio::{rate_per_rb, RadioModel};
use crate::topology::UserId;

/// 20 MB in decimal bytes.
pub const DEFAULT_CONTENT_BYTES: u64 = 20_000_000;

/// Store-and-forward state shared by all relays of one area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayBuffer {
    pub area: AreaId,
    pub relays: Vec<UserId>,
    pub buffered_bits: f64,
    pub ingested_bits: f64,
    pub forwarded_bits: f64,
}

#[derive(Debug, Clone)]
struct AreaStream {
    /// bits per D subframe reaching each MBSFN user
    mbsfn_gain: f64,
    mbsfn_users: Vec<UserId>,
    mbsfn_received: f64,
    mbsfn_done_ms: Option<u64>,
    /// bits per RB per U subframe on the sidelink
    d2d_rate: f64,
    d2d_users: Vec<UserId>,
    d2d_done_ms: Option<u64>,
    buffer: RelayBuffer,
}

impl AreaStream {
    fn d2d_active(&self) -> bool {
        !self.d2d_users.is_empty() && self.d2d_done_ms.is_none()
    }
}

#[derive(Debug, Clone)]
struct UnicastStream {
    user: UserId,
    gain: f64,
    received: f64,
    done_ms: Option<u64>,
}

/// Progress of a delivery run, advanced one subframe at a time.
#[derive(Debug, Clone)]
pub struct DeliveryState {
    tdd: TddConfiguration,
    n_rb_ul: u32,
    content_bits: f64,
    elapsed_ms: u64,
    areas: Vec<AreaStream>,
    unicast: Vec<UnicastStream>,
    pub ul_rb_used: u64,
    pub ul_rb_available: u64,
}

fn service_rate(cqi: u8, rbs: u32, user: UserId, radio: &RadioModel) -> Result<f64> {
    match rate_per_rb(cqi, &radio.cqi) {
        Ok(r) if rbs > 0 => Ok(r * f64::from(rbs)),
        _ => Err(Error::UnservableUser(user)),
    }
}

impl DeliveryState {
    pub fn new(
        cfg: &FormationConfiguration,
        tdd: &TddConfiguration,
        grid: &CarrierGrid,
        radio: &RadioModel,
        content_bytes: u64,
    ) -> Result<Self> {
        if content_bytes == 0 {
            return invalid("content must hold at least one byte");
        }
        let mut areas = Vec::with_capacity(cfg.areas.len());
        for a in &cfg.areas {
            let mbsfn_users: Vec<UserId> = cfg
                .mbsfn_users
                .iter()
                .filter(|(_, m)| m.area == a.id)
                .map(|(u, _)| *u)
                .collect();
            let d2d_users: Vec<UserId> = cfg
                .d2d_users
                .iter()
                .filter(|(_, d)| d.area == a.id)
                .map(|(u, _)| *u)
                .collect();
            let mbsfn_gain = match mbsfn_users.first() {
                Some(&u) => service_rate(a.mcs, a.rb_b, u, radio)?,
                None if !d2d_users.is_empty() => return Err(Error::UnservableUser(d2d_users[0])),
                None => 0.0,
            };
            let d2d_rate = match d2d_users.first() {
                Some(&u) => service_rate(a.d2d_mcs, 1, u, radio)?,
                None => 0.0,
            };
            let relays = cfg
                .d2d_users
                .values()
                .filter(|d| d.area == a.id)
                .map(|d| d.relay)
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            areas.push(AreaStream {
                mbsfn_gain,
                mbsfn_users,
                mbsfn_received: 0.0,
                mbsfn_done_ms: None,
                d2d_rate,
                d2d_users,
                d2d_done_ms: None,
                buffer: RelayBuffer {
                    area: a.id,
                    relays,
                    buffered_bits: 0.0,
                    ingested_bits: 0.0,
                    forwarded_bits: 0.0,
                },
            });
        }
        let unicast = cfg
            .unicast_users
            .iter()
            .map(|(&user, g)| {
                Ok(UnicastStream {
                    user,
                    gain: service_rate(g.cqi, g.rbs, user, radio)?,
                    received: 0.0,
                    done_ms: None,
                })
            })
            .collect::<Result<_>>()?;
        if tdd.n_downlink() == 0 {
            return invalid("TDD configuration has no downlink subframe");
        }
        Ok(Self {
            tdd: *tdd,
            n_rb_ul: grid.n_rb_ul(),
            content_bits: content_bytes as f64 * 8.0,
            elapsed_ms: 0,
            areas,
            unicast,
            ul_rb_used: 0,
            ul_rb_available: 0,
        })
    }

    pub fn elapsed_ms(&self) -> u64 {
        self.elapsed_ms
    }

    pub fn content_bits(&self) -> f64 {
        self.content_bits
    }

    pub fn relay_buffers(&self) -> impl Iterator<Item = &RelayBuffer> {
        self.areas.iter().map(|a| &a.buffer)
    }

    pub fn is_complete(&self) -> bool {
        self.areas
            .iter()
            .all(|a| (a.mbsfn_users.is_empty() || a.mbsfn_done_ms.is_some()) && !a.d2d_active())
            && self.unicast.iter().all(|u| u.done_ms.is_some())
    }

    /// Bits `user` holds so far, or `None` if the user is not part of the run.
    pub fn received_bits(&self, user: UserId) -> Option<f64> {
        for a in &self.areas {
            if a.mbsfn_users.binary_search(&user).is_ok() {
                return Some(a.mbsfn_received);
            }
            if a.d2d_users.binary_search(&user).is_ok() {
                return Some(a.buffer.forwarded_bits);
            }
        }
        self.unicast.iter().find(|u| u.user == user).map(|u| u.received)
    }

    /// Sum of bits held by every user.
    pub fn delivered_bits(&self) -> f64 {
        let areas: f64 = self
            .areas
            .iter()
            .map(|a| a.mbsfn_received * a.mbsfn_users.len() as f64 + a.buffer.forwarded_bits * a.d2d_users.len() as f64)
            .sum();
        areas + self.unicast.iter().map(|u| u.received).sum::<f64>()
    }

    /// Advances one subframe.
    pub fn step(&mut self) {
        let kind = self.tdd.kind_at(self.elapsed_ms);
        self.elapsed_ms += 1;
        let now = self.elapsed_ms;
        let c = self.content_bits;
        match kind {
            SubframeKind::Downlink => {
                for a in &mut self.areas {
                    if a.mbsfn_done_ms.is_none() && !a.mbsfn_users.is_empty() {
                        let before = a.mbsfn_received;
                        if before + a.mbsfn_gain >= c {
                            a.mbsfn_received = c;
                            a.mbsfn_done_ms = Some(now);
                        } else {
                            a.mbsfn_received += a.mbsfn_gain;
                        }
                        if !a.d2d_users.is_empty() {
                            a.buffer.buffered_bits += a.mbsfn_received - before;
                            a.buffer.ingested_bits = a.mbsfn_received;
                        }
                    }
                }
                for u in &mut self.unicast {
                    if u.done_ms.is_none() {
                        if u.received + u.gain >= c {
                            u.received = c;
                            u.done_ms = Some(now);
                        } else {
                            u.received += u.gain;
                        }
                    }
                }
            }
            SubframeKind::Uplink => {
                let pool = f64::from(self.n_rb_ul);
                for a in &mut self.areas {
                    if !a.d2d_active() {
                        continue;
                    }
                    self.ul_rb_available += u64::from(self.n_rb_ul);
                    let sent = a.buffer.buffered_bits.min(pool * a.d2d_rate);
                    if sent > 0.0 {
                        let rbs = ((sent / a.d2d_rate) - 1e-9).ceil().clamp(1.0, pool);
                        self.ul_rb_used += rbs as u64;
                        if sent == a.buffer.buffered_bits {
                            a.buffer.buffered_bits = 0.0;
                            a.buffer.forwarded_bits = a.buffer.ingested_bits;
                        } else {
                            a.buffer.buffered_bits -= sent;
                            a.buffer.forwarded_bits += sent;
                        }
                    }
                    if a.mbsfn_done_ms.is_some() && a.buffer.buffered_bits == 0.0 {
                        a.d2d_done_ms = Some(now);
                    }
                }
            }
            SubframeKind::Special => {}
        }
    }

    /// Completion time in ms of every user, once the run is complete.
    fn completion_ms(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for a in &self.areas {
            if let Some(t) = a.mbsfn_done_ms {
                out.extend(std::iter::repeat_n(t, a.mbsfn_users.len()));
            }
            if let Some(t) = a.d2d_done_ms {
                out.extend(std::iter::repeat_n(t, a.d2d_users.len()));
            }
        }
        out.extend(self.unicast.iter().filter_map(|u| u.done_ms));
        out
    }
}

/// Percentage of offered uplink RBs that carried D2D traffic; 0 when none were offered.
pub fn used_rb_for_d2d(state: &DeliveryState) -> f64 {
    if state.ul_rb_available == 0 {
        0.0
    } else {
        100.0 * state.ul_rb_used as f64 / state.ul_rb_available as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    /// bit/s
    pub adr: f64,
    pub adr_b: f64,
    pub adr_u: f64,
    pub adr_d2d: f64,
    /// Mean over users of content size over own completion time, bit/s.
    pub avg_throughput: f64,
    /// Mean completion time, s.
    pub delivery_time: f64,
    pub used_d2d_rb_pct: f64,
}

/// Runs the delivery to completion and reports the per-run metrics.
pub fn simulate_delivery(
    cfg: &FormationConfiguration,
    tdd: &TddConfiguration,
    grid: &CarrierGrid,
    radio: &RadioModel,
    content_bytes: u64,
) -> Result<MetricsReport> {
    let mut state = DeliveryState::new(cfg, tdd, grid, radio, content_bytes)?;
    while !state.is_complete() {
        state.step();
    }
    let done = state.completion_ms();
    let (delivery_time, avg_throughput) = if done.is_empty() {
        (0.0, 0.0)
    } else {
        let n = done.len() as f64;
        let secs = |t: u64| t as f64 * SUBFRAME_DURATION_S;
        (
            done.iter().map(|&t| secs(t)).sum::<f64>() / n,
            done.iter().map(|&t| state.content_bits / secs(t)).sum::<f64>() / n,
        )
    };
    Ok(MetricsReport {
        adr: cfg.adr.total,
        adr_b: cfg.adr.mbsfn,
        adr_u: cfg.adr.unicast,
        adr_d2d: cfg.adr.d2d,
        avg_throughput,
        delivery_time,
        used_d2d_rb_pct: used_rb_for_d2d(&state),
    })
}
