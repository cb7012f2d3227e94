//! Downlink RB split between the MBSFN transmission and inband unicast.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::topology::UserId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "fraction")]
pub enum MbsfnShareRule {
    /// MBSFN share proportional to its share of downlink-served users.
    Proportional,
    /// Fixed fraction of the pool goes to MBSFN whenever unicast users exist.
    FixedFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocationPolicy {
    pub mbsfn_share_rule: MbsfnShareRule,
    /// RBs handed to each unicast user per round-robin round.
    pub rr_granularity: u32,
}

impl Default for AllocationPolicy {
    fn default() -> Self {
        Self {
            mbsfn_share_rule: MbsfnShareRule::Proportional,
            rr_granularity: 1,
        }
    }
}

impl AllocationPolicy {
    pub fn validate(&self) -> Result<()> {
        if let MbsfnShareRule::FixedFraction(f) = self.mbsfn_share_rule {
            if !(f > 0.0 && f <= 1.0) {
                return invalid(format!("fixed MBSFN fraction must be in (0,1], got {f}"));
            }
        }
        if self.rr_granularity == 0 {
            return invalid("round-robin granularity must be at least one RB");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlAllocation {
    pub rb_b: u32,
    /// Unicast grants in ascending user order.
    pub grants: Vec<(UserId, u32)>,
}

impl DlAllocation {
    pub fn total(&self) -> u32 {
        self.rb_b + self.grants.iter().map(|(_, n)| n).sum::<u32>()
    }
}

/// Splits one downlink pool.
///
/// `unicast_users` must be sorted ascending; the RBs left after the MBSFN
/// share are dealt round-robin in that order until the pool is exhausted.
/// Fails with a constraint violation when a unicast user would get no RB.
pub fn allocate_downlink(
    n_mbsfn_users: usize,
    unicast_users: &[UserId],
    n_rb_dl: u32,
    policy: &AllocationPolicy,
) -> Result<DlAllocation> {
    if n_rb_dl == 0 {
        return invalid("downlink pool is empty");
    }
    debug_assert!(unicast_users.windows(2).all(|w| w[0] < w[1]));
    let n_u = unicast_users.len();
    let rb_b = match (n_mbsfn_users, n_u) {
        (0, _) => 0,
        (_, 0) => n_rb_dl,
        (b, u) => {
            let share = match policy.mbsfn_share_rule {
                MbsfnShareRule::Proportional => f64::from(n_rb_dl) * b as f64 / (b + u) as f64,
                MbsfnShareRule::FixedFraction(f) => f64::from(n_rb_dl) * f,
            };
            (share.round() as u32).clamp(1, n_rb_dl)
        }
    };
    let left = n_rb_dl - rb_b;
    if (left as usize) < n_u {
        return Err(Error::ConstraintViolation(format!(
            "{n_u} unicast users cannot each get an RB from the {left} left after {rb_b} MBSFN RBs"
        )));
    }
    let mut grants: Vec<(UserId, u32)> = unicast_users.iter().map(|&u| (u, 0)).collect();
    if n_u > 0 {
        let step = policy.rr_granularity.max(1);
        let mut left = left;
        'deal: loop {
            for grant in grants.iter_mut() {
                if left == 0 {
                    break 'deal;
                }
                let give = step.min(left);
                grant.1 += give;
                left -= give;
            }
        }
    }
    Ok(DlAllocation { rb_b, grants })
}
