use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::adr::{compute_adr, d2d_rb_need};
use super::alloc::{allocate_downlink, AllocationPolicy, DlAllocation};
use super::csi::best_relays;
use super::{AreaId, D2dLink, FormationConfiguration, MbsfnArea, MbsfnMember, UnicastGrant};
use crate::error::{invalid, Error, Result};
use crate::frame::{CarrierGrid, TddConfiguration};
use crate::radio::{self, Cqi, RadioModel, MAX_CQI};
use crate::topology::{adjacent_subsets, CellId, CellSite, SynchronizationArea, UserId, UserTerminal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "d2d-maf")]
    D2dMaf,
    #[serde(rename = "scf")]
    Scf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::D2dMaf, Algorithm::Scf];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::D2dMaf => "d2d-maf",
            Algorithm::Scf => "scf",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "d2d-maf" | "d2dmaf" | "d2d_maf" => Ok(Algorithm::D2dMaf),
            "scf" => Ok(Algorithm::Scf),
            other => invalid(format!("unknown algorithm {other:?}")),
        }
    }
}

/// Everything one formation run reads.
#[derive(Debug, Clone, Copy)]
pub struct FormationInput<'a> {
    pub area: &'a SynchronizationArea,
    pub users: &'a [UserTerminal],
    pub tdd: TddConfiguration,
    pub grid: CarrierGrid,
    pub radio: &'a RadioModel,
    pub policy: AllocationPolicy,
}

impl FormationInput<'_> {
    fn check(&self) -> Result<()> {
        self.radio.validate()?;
        self.policy.validate()?;
        for (i, u) in self.users.iter().enumerate() {
            if u.id != UserId(i as u32) {
                return invalid(format!(
                    "user ids must be dense and ordered; position {i} holds {}",
                    u.id
                ));
            }
            if !self.area.contains(u.home_cell) {
                return invalid(format!("{} has unknown home {}", u.id, u.home_cell));
            }
        }
        Ok(())
    }
}

/// Per-user link qualities, fixed once the MBSFN areas are known.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    /// Member cells of each MBSFN area, indexed by area id.
    pub areas: Vec<BTreeSet<CellId>>,
    pub cell_area: Vec<Option<AreaId>>,
    /// Cells with at least two users.
    pub candidate_cells: BTreeSet<CellId>,
    /// MBSFN CQI towards the user's area; 0 when its cell is outside every area.
    pub mbsfn_cqi: Vec<Cqi>,
    pub unicast_cqi: Vec<Cqi>,
}

impl LinkTable {
    pub fn build(input: &FormationInput<'_>) -> Result<Self> {
        let area = input.area;
        let mut per_cell = vec![0usize; area.len()];
        for u in input.users {
            per_cell[u.home_cell.index()] += 1;
        }
        let candidate_cells: BTreeSet<CellId> = area
            .cells
            .iter()
            .filter(|c| per_cell[c.id.index()] >= 2)
            .map(|c| c.id)
            .collect();
        let areas = adjacent_subsets(area, &candidate_cells)?;
        let mut cell_area = vec![None; area.len()];
        for (i, cells) in areas.iter().enumerate() {
            for c in cells {
                cell_area[c.index()] = Some(i as AreaId);
            }
        }
        let sites: Vec<CellSite> = area.all_sites().cloned().collect();
        let n_rb = input.grid.n_rb_dl();
        let mut mbsfn_cqi = Vec::with_capacity(input.users.len());
        let mut unicast_cqi = Vec::with_capacity(input.users.len());
        for u in input.users {
            let home = &area.cells[u.home_cell.index()];
            let uni = radio::unicast_sample(u, home, &sites, input.radio, n_rb)?;
            unicast_cqi.push(input.radio.cqi_for(uni.ratio()));
            let mb = match cell_area[u.home_cell.index()] {
                Some(a) => {
                    let s = radio::mbsfn_sample(u, &areas[a as usize], &sites, input.radio, n_rb)?;
                    input.radio.cqi_for(s.ratio())
                }
                None => 0,
            };
            mbsfn_cqi.push(mb);
        }
        Ok(Self {
            areas,
            cell_area,
            candidate_cells,
            mbsfn_cqi,
            unicast_cqi,
        })
    }

    pub fn area_of(&self, user: &UserTerminal) -> Option<AreaId> {
        self.cell_area[user.home_cell.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Mbsfn,
    Unicast,
    D2d { relay: UserId, csi: Cqi },
}

/// Outcome of a full formation run, including its acceptance history.
#[derive(Debug, Clone)]
pub struct FormationRun {
    pub algorithm: Algorithm,
    pub config: FormationConfiguration,
    pub links: LinkTable,
    /// ADR of every accepted configuration, the basic one first.
    pub accepted_adr: Vec<f64>,
    /// CQI level peeled to reach each accepted configuration after the basic one.
    pub accepted_levels: Vec<Cqi>,
    /// Accepted configurations in order, when tracing was requested.
    pub states: Vec<FormationConfiguration>,
}

struct Engine<'a> {
    input: FormationInput<'a>,
    links: LinkTable,
}

impl<'a> Engine<'a> {
    fn new(input: FormationInput<'a>) -> Result<Self> {
        input.check()?;
        let links = LinkTable::build(&input)?;
        Ok(Self { input, links })
    }

    fn basic_roles(&self) -> Vec<Role> {
        self.input
            .users
            .iter()
            .map(|u| {
                let in_area = self.links.area_of(u).is_some();
                if in_area && self.links.mbsfn_cqi[u.id.index()] > 0 {
                    Role::Mbsfn
                } else {
                    Role::Unicast
                }
            })
            .collect()
    }

    /// Builds the configuration described by `roles`.
    ///
    /// With `strict`, the candidate fails when a pool cannot give every
    /// unicast user an RB or when any user would sit on a CQI-0 link.
    /// Without it, pools fall back to one RB per unicast user first.
    fn evaluate(&self, roles: &[Role], strict: bool) -> Result<FormationConfiguration> {
        let users = self.input.users;
        let links = &self.links;
        let radio = self.input.radio;
        let n_rb_dl = self.input.grid.n_rb_dl();
        let n_rb_ul = self.input.grid.n_rb_ul();
        let n_areas = links.areas.len();

        let mut mbsfn_users = BTreeMap::new();
        let mut area_members = vec![0usize; n_areas];
        let mut area_mcs: Vec<Cqi> = vec![0; n_areas];
        let mut area_unicast: Vec<Vec<UserId>> = vec![Vec::new(); n_areas];
        let mut cell_unicast: BTreeMap<CellId, Vec<UserId>> = BTreeMap::new();
        let mut relays = BTreeSet::new();
        for (u, role) in users.iter().zip(roles) {
            match *role {
                Role::Mbsfn => {
                    let Some(a) = links.area_of(u) else {
                        return invalid(format!("{} is MBSFN-served outside every area", u.id));
                    };
                    let cqi = links.mbsfn_cqi[u.id.index()];
                    mbsfn_users.insert(
                        u.id,
                        MbsfnMember {
                            area: a,
                            cell: u.home_cell,
                            cqi,
                        },
                    );
                    let ai = a as usize;
                    area_mcs[ai] = if area_members[ai] == 0 {
                        cqi
                    } else {
                        area_mcs[ai].min(cqi)
                    };
                    area_members[ai] += 1;
                }
                Role::Unicast => {
                    if strict && links.unicast_cqi[u.id.index()] == 0 {
                        return Err(Error::UnservableUser(u.id));
                    }
                    match links.area_of(u) {
                        Some(a) => area_unicast[a as usize].push(u.id),
                        None => cell_unicast.entry(u.home_cell).or_default().push(u.id),
                    }
                }
                Role::D2d { relay, .. } => {
                    relays.insert(relay);
                }
            }
        }

        let mut unicast_users = BTreeMap::new();
        let mut rb_b = vec![0u32; n_areas];
        let mut grant = |alloc: DlAllocation, area: Option<AreaId>| {
            for (user, rbs) in alloc.grants {
                let u = &users[user.index()];
                let cqi = links.unicast_cqi[user.index()];
                unicast_users.insert(
                    user,
                    UnicastGrant {
                        cell: u.home_cell,
                        area,
                        cqi,
                        rbs,
                    },
                );
            }
            alloc.rb_b
        };
        for (ai, uni) in area_unicast.iter().enumerate() {
            let alloc = self.allocate(area_members[ai], uni, n_rb_dl, strict)?;
            rb_b[ai] = grant(alloc, Some(ai as AreaId));
        }
        for uni in cell_unicast.values() {
            let alloc = self.allocate(0, uni, n_rb_dl, strict)?;
            grant(alloc, None);
        }

        // relays grouped by area, ascending ids within each group
        let mut area_relays: Vec<Vec<&UserTerminal>> = vec![Vec::new(); n_areas];
        for r in &relays {
            let relay = &users[r.index()];
            match (roles[r.index()], links.area_of(relay)) {
                (Role::Mbsfn, Some(a)) => area_relays[a as usize].push(relay),
                _ => return invalid(format!("relay {r} is not MBSFN-served")),
            }
        }
        let mut d2d_users = BTreeMap::new();
        let mut d2d_mcs: Vec<Cqi> = vec![0; n_areas];
        let mut d2d_seen = vec![false; n_areas];
        let mut foreign_cache: Vec<Option<Vec<&UserTerminal>>> = vec![None; n_areas];
        for (u, role) in users.iter().zip(roles) {
            let Role::D2d { relay, csi } = *role else { continue };
            let a = links.area_of(&users[relay.index()]).expect("relay area checked above");
            let ai = a as usize;
            let foreign = foreign_cache[ai].get_or_insert_with(|| {
                area_relays
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != ai)
                    .flat_map(|(_, rs)| rs.iter().copied())
                    .collect::<Vec<_>>()
            });
            // combining can only raise the single-relay SINR, so a top entry stays on top
            let combined = if foreign.is_empty() && csi == MAX_CQI {
                MAX_CQI
            } else if foreign.is_empty() {
                combined_without_interference(u, &area_relays[ai], radio, n_rb_ul)?
            } else {
                let s = radio::d2d_sample(
                    u,
                    area_relays[ai].iter().copied(),
                    foreign.iter().copied(),
                    radio,
                    n_rb_ul,
                )?;
                radio.cqi_for(s.ratio())
            };
            if strict && combined == 0 {
                return Err(Error::UnservableUser(u.id));
            }
            d2d_mcs[ai] = if d2d_seen[ai] {
                d2d_mcs[ai].min(combined)
            } else {
                combined
            };
            d2d_seen[ai] = true;
            d2d_users.insert(
                u.id,
                D2dLink {
                    relay,
                    area: a,
                    cell: u.home_cell,
                    csi,
                    combined_cqi: combined,
                },
            );
        }

        let tdd = &self.input.tdd;
        let areas: Vec<MbsfnArea> = links
            .areas
            .iter()
            .enumerate()
            .map(|(ai, cells)| {
                let mut area = MbsfnArea {
                    id: ai as AreaId,
                    member_cells: cells.clone(),
                    mcs: area_mcs[ai],
                    rb_b: rb_b[ai],
                    d2d_mcs: d2d_mcs[ai],
                    rb_d2d: 0,
                };
                area.rb_d2d = d2d_rb_need(&area, n_rb_ul, tdd, &radio.cqi);
                area
            })
            .collect();

        let mut cfg = FormationConfiguration {
            areas,
            mbsfn_users,
            unicast_users,
            d2d_users,
            relays,
            n_rb_dl,
            n_rb_ul,
            adr: Default::default(),
        };
        cfg.adr = compute_adr(&cfg, tdd, &radio.cqi)?;
        Ok(cfg)
    }

    fn allocate(&self, n_mbsfn: usize, unicast: &[UserId], n_rb: u32, strict: bool) -> Result<DlAllocation> {
        match allocate_downlink(n_mbsfn, unicast, n_rb, &self.input.policy) {
            Ok(a) => Ok(a),
            Err(Error::ConstraintViolation(_)) if !strict => Ok(minimum_unicast_first(n_mbsfn, unicast, n_rb)),
            Err(e) => Err(e),
        }
    }

    fn run(&self, algorithm: Algorithm, trace: bool) -> Result<FormationRun> {
        let users = self.input.users;
        let mut roles = self.basic_roles();
        let mut current = self.evaluate(&roles, false)?;
        let mut accepted_adr = vec![current.adr.total];
        let mut accepted_levels = Vec::new();
        let mut states = Vec::new();
        if trace {
            states.push(current.clone());
        }

        for level in order_user_mcs(&current) {
            let peeled: Vec<UserId> = current
                .mbsfn_users
                .iter()
                .filter(|(_, m)| m.cqi == level)
                .map(|(u, _)| *u)
                .collect();
            if peeled.is_empty() {
                continue;
            }
            let mut candidate = roles.clone();
            for u in &peeled {
                candidate[u.index()] = Role::Unicast;
            }
            if algorithm == Algorithm::D2dMaf {
                let peeled_set: BTreeSet<UserId> = peeled.iter().copied().collect();
                // users whose relay was just peeled are matched again
                let mut excluded: Vec<&UserTerminal> = peeled.iter().map(|u| &users[u.index()]).collect();
                for (u, role) in users.iter().zip(&roles) {
                    if let Role::D2d { relay, .. } = role {
                        if peeled_set.contains(relay) {
                            excluded.push(u);
                            candidate[u.id.index()] = Role::Unicast;
                        }
                    }
                }
                let relays: Vec<&UserTerminal> = users
                    .iter()
                    .zip(&candidate)
                    .filter(|(_, r)| **r == Role::Mbsfn)
                    .map(|(u, _)| u)
                    .collect();
                let found = best_relays(&relays, &excluded, self.input.radio, self.input.grid.n_rb_ul())?;
                for (user, (relay, csi)) in found.assignment {
                    candidate[user.index()] = Role::D2d { relay, csi };
                }
            }
            let outcome = match self.evaluate(&candidate, true) {
                Ok(cfg) => Some(cfg),
                Err(Error::ConstraintViolation(_) | Error::UnservableUser(_)) => None,
                Err(e) => return Err(e),
            };
            match outcome {
                Some(cfg) if cfg.adr.total >= current.adr.total => {
                    log::debug!(
                        "{algorithm}: peeled CQI {level}, ADR {:.4e} -> {:.4e}",
                        current.adr.total,
                        cfg.adr.total
                    );
                    roles = candidate;
                    current = cfg;
                    accepted_adr.push(current.adr.total);
                    accepted_levels.push(level);
                    if trace {
                        states.push(current.clone());
                    }
                }
                _ => break,
            }
        }
        Ok(FormationRun {
            algorithm,
            config: current,
            links: self.links.clone(),
            accepted_adr,
            accepted_levels,
            states,
        })
    }
}

/// Combined sidelink CQI when no other area has relays.
///
/// Sums in the same order as [`radio::d2d_sample`]; a prefix already at the
/// top CQI settles the answer since adding positive terms never lowers a sum.
fn combined_without_interference(
    ue: &UserTerminal,
    relays: &[&UserTerminal],
    radio: &RadioModel,
    n_rb_ul: u32,
) -> Result<Cqi> {
    let noise = radio.noise_mw(n_rb_ul, ue.noise_figure)?;
    let mut signal = 0.0;
    for (i, r) in relays.iter().enumerate() {
        signal += radio.sidelink_rx_mw(r, ue);
        if i % 16 == 15 && radio.cqi_for(signal / noise) == MAX_CQI {
            return Ok(MAX_CQI);
        }
    }
    let s = radio::d2d_sample(ue, relays.iter().copied(), [], radio, n_rb_ul)?;
    Ok(radio.cqi_for(s.ratio()))
}

/// Fallback split for the basic configuration: one RB per unicast user, rest to MBSFN.
fn minimum_unicast_first(n_mbsfn: usize, unicast: &[UserId], n_rb: u32) -> DlAllocation {
    let n_u = unicast.len() as u32;
    let rb_b = if n_mbsfn > 0 {
        n_rb.saturating_sub(n_u).max(1)
    } else {
        0
    };
    let mut left = n_rb.saturating_sub(rb_b);
    let grants = unicast
        .iter()
        .map(|&u| {
            let g = u32::from(left > 0);
            left -= g;
            (u, g)
        })
        .collect();
    DlAllocation { rb_b, grants }
}

/// Distinct MBSFN CQI levels present among the MBSFN-served users, ascending.
pub fn order_user_mcs(cfg: &FormationConfiguration) -> Vec<Cqi> {
    let levels: BTreeSet<Cqi> = cfg.mbsfn_users.values().map(|m| m.cqi).collect();
    levels.into_iter().collect()
}

/// Cells with two or more users form MBSFN areas per connected component;
/// lone users and users the MBSFN transmission cannot reach go unicast.
pub fn build_basic_configuration(input: &FormationInput<'_>) -> Result<FormationConfiguration> {
    let engine = Engine::new(*input)?;
    let roles = engine.basic_roles();
    engine.evaluate(&roles, false)
}

pub fn run_formation(input: &FormationInput<'_>, algorithm: Algorithm, trace: bool) -> Result<FormationRun> {
    Engine::new(*input)?.run(algorithm, trace)
}

/// [`run_formation`] reusing a link table built from the same area, users,
/// radio model and carrier. The TDD configuration and algorithm may differ.
pub fn run_formation_with_links(
    input: &FormationInput<'_>,
    links: &LinkTable,
    algorithm: Algorithm,
    trace: bool,
) -> Result<FormationRun> {
    input.check()?;
    if links.mbsfn_cqi.len() != input.users.len() || links.cell_area.len() != input.area.len() {
        return invalid("link table was built for a different deployment");
    }
    Engine {
        input: *input,
        links: links.clone(),
    }
    .run(algorithm, trace)
}

pub fn d2d_maf(input: &FormationInput<'_>) -> Result<FormationConfiguration> {
    run_formation(input, Algorithm::D2dMaf, false).map(|r| r.config)
}

pub fn scf(input: &FormationInput<'_>) -> Result<FormationConfiguration> {
    run_formation(input, Algorithm::Scf, false).map(|r| r.config)
}
