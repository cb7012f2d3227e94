use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::adr::check_pools;
use super::{FormationConfiguration, MAX_AREAS, MAX_AREAS_PER_CELL};
use crate::error::{Error, Result};
use crate::frame::CarrierGrid;
use crate::topology::{adjacent_subsets, CellId, SynchronizationArea, UserId, UserTerminal};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: &'static str,
    pub entity: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.constraint, self.entity)
    }
}

fn v(constraint: &'static str, entity: impl Into<String>) -> Violation {
    Violation {
        constraint,
        entity: entity.into(),
    }
}

/// Checks every structural constraint of `cfg` and lists what it breaks.
///
/// An empty result means the configuration is feasible.
pub fn validate(
    cfg: &FormationConfiguration,
    area: &SynchronizationArea,
    users: &[UserTerminal],
    grid: &CarrierGrid,
) -> Vec<Violation> {
    let mut out = Vec::new();

    let all: BTreeSet<UserId> = users.iter().map(|u| u.id).collect();
    let mut seen: BTreeMap<UserId, usize> = BTreeMap::new();
    for u in cfg
        .mbsfn_users
        .keys()
        .chain(cfg.unicast_users.keys())
        .chain(cfg.d2d_users.keys())
    {
        *seen.entry(*u).or_default() += 1;
    }
    for (u, n) in &seen {
        if *n > 1 {
            out.push(v("partition", format!("{u} is in {n} sets")));
        }
        if !all.contains(u) {
            out.push(v("partition", format!("{u} is not a known user")));
        }
    }
    for u in all.iter().filter(|u| !seen.contains_key(u)) {
        out.push(v("partition", format!("{u} is unassigned")));
    }

    let referenced: BTreeSet<UserId> = cfg.d2d_users.values().map(|d| d.relay).collect();
    if referenced != cfg.relays {
        out.push(v("relays", "relay set differs from the relays D2D users reference"));
    }
    for r in &cfg.relays {
        if !cfg.mbsfn_users.contains_key(r) {
            out.push(v("relays", format!("relay {r} is not MBSFN-served")));
        }
    }
    for (u, d) in &cfg.d2d_users {
        if d.csi == 0 {
            out.push(v("d2d-csi", format!("{u} has a zero CSI entry to {}", d.relay)));
        }
        if d.combined_cqi == 0 {
            out.push(v("servable", format!("{u} has an unusable sidelink")));
        }
        if let Some(m) = cfg.mbsfn_users.get(&d.relay) {
            if m.area != d.area {
                out.push(v(
                    "d2d-area",
                    format!("{u} is in area {} but its relay is in {}", d.area, m.area),
                ));
            }
        }
    }

    if cfg.n_rb_dl != grid.n_rb_dl() || cfg.n_rb_ul != grid.n_rb_ul() {
        out.push(v("pool", "RB pool sizes do not match the carrier"));
    }
    if let Err(msg) = check_pools(cfg) {
        out.push(v("pool", msg));
    }

    if cfg.areas.len() > MAX_AREAS {
        out.push(v("area-count", format!("{} areas", cfg.areas.len())));
    }
    let mut per_cell: BTreeMap<CellId, usize> = BTreeMap::new();
    for a in &cfg.areas {
        for c in &a.member_cells {
            *per_cell.entry(*c).or_default() += 1;
            if !area.contains(*c) {
                out.push(v("cells", format!("area {} holds unknown {c}", a.id)));
            }
        }
        if a.member_cells.is_empty() {
            out.push(v("connected", format!("area {} is empty", a.id)));
        } else if a.member_cells.iter().all(|c| area.contains(*c)) {
            match adjacent_subsets(area, &a.member_cells) {
                Ok(parts) if parts.len() == 1 => {}
                _ => out.push(v("connected", format!("area {} is not one adjacent group", a.id))),
            }
        }
        let mcs = cfg.mbsfn_users.values().filter(|m| m.area == a.id).map(|m| m.cqi).min();
        if mcs.unwrap_or(0) != a.mcs {
            out.push(v(
                "area-mcs",
                format!("area {} runs CQI {} instead of {}", a.id, a.mcs, mcs.unwrap_or(0)),
            ));
        }
        if mcs.is_some() && a.rb_b == 0 {
            out.push(v("rb-b", format!("area {} has MBSFN users and no RBs", a.id)));
        }
    }
    for (c, n) in per_cell {
        if n > MAX_AREAS_PER_CELL {
            out.push(v("areas-per-cell", format!("{c} is in {n} areas")));
        }
    }

    for (u, m) in &cfg.mbsfn_users {
        if m.cqi == 0 {
            out.push(v("servable", format!("{u} has MBSFN CQI 0")));
        }
        match cfg.area(m.area) {
            Some(a) if a.member_cells.contains(&m.cell) => {}
            _ => out.push(v("mbsfn-area", format!("{u} is outside area {}", m.area))),
        }
    }
    for (u, g) in &cfg.unicast_users {
        if g.cqi == 0 {
            out.push(v("servable", format!("{u} has unicast CQI 0")));
        }
        if g.rbs == 0 {
            out.push(v("unicast-rb", format!("{u} has no downlink RB")));
        }
    }
    out
}

/// [`validate`], turned into an error when anything is violated.
pub fn ensure_valid(
    cfg: &FormationConfiguration,
    area: &SynchronizationArea,
    users: &[UserTerminal],
    grid: &CarrierGrid,
) -> Result<()> {
    let found = validate(cfg, area, users, grid);
    if found.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(found.iter().map(ToString::to_string).collect()))
    }
}
