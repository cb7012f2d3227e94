//! MBSFN area formation.
//!
//! A [`FormationConfiguration`] partitions the users into three delivery
//! paths: the MBSFN transmission of their area, a unicast link from their
//! home cell, or a D2D sidelink from a relay that is itself an MBSFN user.
//! [`d2d_maf`] evolves a basic configuration by peeling the lowest CQI level
//! off the MBSFN-served set while the aggregate data rate does not drop;
//! [`scf`] runs the same loop with unicast as the only fallback path.

mod adr;
mod alloc;
mod csi;
mod engine;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::radio::Cqi;
use crate::topology::{CellId, UserId};

pub use adr::{compute_adr, AdrBreakdown, AreaAdr, CellAdr};
pub use alloc::{allocate_downlink, AllocationPolicy, DlAllocation, MbsfnShareRule};
pub use csi::{best_relays, compute_d2d_csi, find_relays_and_d2d, D2dCsiMatrix, RelayAssignment};
pub use engine::{
    build_basic_configuration, d2d_maf, order_user_mcs, run_formation, run_formation_with_links, scf, Algorithm,
    FormationInput, FormationRun, LinkTable,
};
pub use validate::{ensure_valid, validate, Violation};

/// 3GPP limit on MBSFN areas per synchronization area.
pub const MAX_AREAS: usize = 256;
/// 3GPP limit on MBSFN areas a single cell may belong to.
pub const MAX_AREAS_PER_CELL: usize = 8;

pub type AreaId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbsfnArea {
    pub id: AreaId,
    pub member_cells: BTreeSet<CellId>,
    /// Lowest MBSFN CQI among the area's MBSFN users; 0 when it has none.
    pub mcs: Cqi,
    /// Downlink RBs carrying the MBSFN transmission.
    pub rb_b: u32,
    /// Lowest combined sidelink CQI among the area's D2D users; 0 when none.
    pub d2d_mcs: Cqi,
    /// Uplink RBs per U subframe used by the area's relays.
    pub rb_d2d: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MbsfnMember {
    pub area: AreaId,
    pub cell: CellId,
    pub cqi: Cqi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnicastGrant {
    pub cell: CellId,
    /// Area whose downlink pool the grant draws from; `None` for cells outside every area.
    pub area: Option<AreaId>,
    pub cqi: Cqi,
    pub rbs: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct D2dLink {
    pub relay: UserId,
    pub area: AreaId,
    pub cell: CellId,
    /// Single-relay CSI entry between the relay and this user.
    pub csi: Cqi,
    /// CQI of the combined single-frequency sidelink from all relays of the area.
    pub combined_cqi: Cqi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationConfiguration {
    pub areas: Vec<MbsfnArea>,
    pub mbsfn_users: BTreeMap<UserId, MbsfnMember>,
    pub unicast_users: BTreeMap<UserId, UnicastGrant>,
    pub d2d_users: BTreeMap<UserId, D2dLink>,
    pub relays: BTreeSet<UserId>,
    pub n_rb_dl: u32,
    pub n_rb_ul: u32,
    pub adr: AdrBreakdown,
}

impl FormationConfiguration {
    pub fn area(&self, id: AreaId) -> Option<&MbsfnArea> {
        self.areas.iter().find(|a| a.id == id)
    }

    pub fn mbsfn_count(&self, area: AreaId) -> usize {
        self.mbsfn_users.values().filter(|m| m.area == area).count()
    }

    pub fn d2d_count(&self, area: AreaId) -> usize {
        self.d2d_users.values().filter(|d| d.area == area).count()
    }

    pub fn user_count(&self) -> usize {
        self.mbsfn_users.len() + self.unicast_users.len() + self.d2d_users.len()
    }

    /// Area containing `cell`, if any.
    pub fn area_of_cell(&self, cell: CellId) -> Option<AreaId> {
        self.areas.iter().find(|a| a.member_cells.contains(&cell)).map(|a| a.id)
    }

    /// Which of the three sets holds `user`.
    pub fn path_of(&self, user: UserId) -> Option<DeliveryPath> {
        if let Some(m) = self.mbsfn_users.get(&user) {
            Some(DeliveryPath::Mbsfn { area: m.area })
        } else if self.unicast_users.contains_key(&user) {
            Some(DeliveryPath::Unicast)
        } else {
            self.d2d_users.get(&user).map(|d| DeliveryPath::D2d {
                relay: d.relay,
                area: d.area,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryPath {
    Mbsfn { area: AreaId },
    Unicast,
    D2d { relay: UserId, area: AreaId },
}
