//! Shared fixtures: random instances and an unoptimized reference formation.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mbsfn_core::formation::{
    compute_d2d_csi, find_relays_and_d2d, AllocationPolicy, FormationConfiguration, FormationInput,
};
use mbsfn_core::frame::{tdd_config, CarrierGrid, TddConfiguration, FRAME_DURATION_S, SUPPORTED_BANDWIDTHS_MHZ};
use mbsfn_core::radio::{self, Cqi, RadioModel};
use mbsfn_core::topology::{build_hex_grid, CellId, CellSite, Point, SynchronizationArea, UserId, UserTerminal};

pub struct Instance {
    pub area: SynchronizationArea,
    pub users: Vec<UserTerminal>,
    pub tdd: TddConfiguration,
    pub grid: CarrierGrid,
    pub radio: RadioModel,
}

impl Instance {
    pub fn input(&self) -> FormationInput<'_> {
        FormationInput {
            area: &self.area,
            users: &self.users,
            tdd: self.tdd,
            grid: self.grid,
            radio: &self.radio,
            policy: AllocationPolicy::default(),
        }
    }
}

fn in_disk(rng: &mut ChaCha8Rng, c: Point, r: f64) -> Point {
    let rad = r * rng.random::<f64>().sqrt();
    let th = std::f64::consts::TAU * rng.random::<f64>();
    Point::new(c.x + rad * th.cos(), c.y + rad * th.sin())
}

fn random_frame(rng: &mut ChaCha8Rng) -> (TddConfiguration, CarrierGrid) {
    let tdd = tdd_config(rng.random_range(0..7)).unwrap();
    let bw = SUPPORTED_BANDWIDTHS_MHZ[rng.random_range(0..SUPPORTED_BANDWIDTHS_MHZ.len())];
    (tdd, CarrierGrid::new(bw).unwrap())
}

/// Up to `max_cells` cells and `max_users` users in total, some placed in
/// tight clusters so that sidelinks are likely.
pub fn small_instance(seed: u64, max_cells: usize, max_users: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cells = rng.random_range(1..=max_cells);
    let mut area = build_hex_grid(n_cells, 500.0).unwrap();
    if rng.random_bool(0.7) {
        area = area.with_interferer_ring();
    }
    let n_users = rng.random_range(1..=max_users);
    let mut users: Vec<UserTerminal> = Vec::with_capacity(n_users);
    for i in 0..n_users {
        let (cell, pos) = if !users.is_empty() && rng.random_bool(0.35) {
            let anchor = &users[rng.random_range(0..users.len())];
            (anchor.home_cell, in_disk(&mut rng, anchor.position, 40.0))
        } else {
            let c = CellId(rng.random_range(0..n_cells as u32));
            (c, in_disk(&mut rng, area.cells[c.index()].center, 250.0))
        };
        users.push(UserTerminal::new(UserId(i as u32), cell, pos));
    }
    let (tdd, grid) = random_frame(&mut rng);
    Instance {
        area,
        users,
        tdd,
        grid,
        radio: RadioModel::default(),
    }
}

/// Up to `max_cells` cells with an independent user count in 0..=`max_per_cell` each.
pub fn random_instance(seed: u64, max_cells: usize, max_per_cell: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cells = rng.random_range(1..=max_cells);
    let mut area = build_hex_grid(n_cells, 500.0).unwrap();
    if rng.random_bool(0.7) {
        area = area.with_interferer_ring();
    }
    let mut users = Vec::new();
    for c in 0..n_cells {
        let n = rng.random_range(0..=max_per_cell);
        for _ in 0..n {
            let pos = in_disk(&mut rng, area.cells[c].center, 250.0);
            users.push(UserTerminal::new(UserId(users.len() as u32), CellId(c as u32), pos));
        }
    }
    let (tdd, grid) = random_frame(&mut rng);
    Instance {
        area,
        users,
        tdd,
        grid,
        radio: RadioModel::default(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefArea {
    pub cells: BTreeSet<CellId>,
    pub mcs: Cqi,
    pub rb_b: u32,
    pub d2d_mcs: Cqi,
    pub rb_d2d: u32,
}

/// Flattened view of a configuration, comparable across implementations.
#[derive(Debug, Clone, PartialEq)]
pub struct RefState {
    pub areas: Vec<RefArea>,
    /// user -> (area, cqi)
    pub mbsfn: BTreeMap<UserId, (u32, Cqi)>,
    /// user -> (cqi, rbs)
    pub unicast: BTreeMap<UserId, (Cqi, u32)>,
    /// user -> (relay, csi, combined cqi)
    pub d2d: BTreeMap<UserId, (UserId, Cqi, Cqi)>,
    pub relays: BTreeSet<UserId>,
    pub adr: f64,
}

pub fn from_engine(cfg: &FormationConfiguration) -> RefState {
    RefState {
        areas: cfg
            .areas
            .iter()
            .map(|a| RefArea {
                cells: a.member_cells.clone(),
                mcs: a.mcs,
                rb_b: a.rb_b,
                d2d_mcs: a.d2d_mcs,
                rb_d2d: a.rb_d2d,
            })
            .collect(),
        mbsfn: cfg.mbsfn_users.iter().map(|(u, m)| (*u, (m.area, m.cqi))).collect(),
        unicast: cfg.unicast_users.iter().map(|(u, g)| (*u, (g.cqi, g.rbs))).collect(),
        d2d: cfg
            .d2d_users
            .iter()
            .map(|(u, d)| (*u, (d.relay, d.csi, d.combined_cqi)))
            .collect(),
        relays: cfg.relays.clone(),
        adr: cfg.adr.total,
    }
}

/// Link data the reference derives once per instance.
pub struct Links {
    pub comps: Vec<BTreeSet<CellId>>,
    pub cell_area: BTreeMap<CellId, u32>,
    pub mb_cqi: Vec<Cqi>,
    pub uc_cqi: Vec<Cqi>,
    pub initial_mbsfn: BTreeSet<UserId>,
    pub initial_unicast: BTreeSet<UserId>,
}

fn components(area: &SynchronizationArea, p: &BTreeSet<CellId>) -> Vec<BTreeSet<CellId>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in p {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for &o in p {
                if !seen.contains(&o) && area.is_adjacent(c, o) {
                    seen.insert(o);
                    comp.insert(o);
                    queue.push_back(o);
                }
            }
        }
        out.push(comp);
    }
    out
}

pub fn links(inst: &Instance) -> Links {
    let sites: Vec<CellSite> = inst.area.all_sites().cloned().collect();
    let n_dl = inst.grid.n_rb_dl();
    let mut count: BTreeMap<CellId, usize> = BTreeMap::new();
    for u in &inst.users {
        *count.entry(u.home_cell).or_default() += 1;
    }
    let p: BTreeSet<CellId> = count.iter().filter(|(_, &n)| n >= 2).map(|(c, _)| *c).collect();
    let comps = components(&inst.area, &p);
    let mut cell_area = BTreeMap::new();
    for (i, comp) in comps.iter().enumerate() {
        for c in comp {
            cell_area.insert(*c, i as u32);
        }
    }
    let mut mb_cqi = Vec::new();
    let mut uc_cqi = Vec::new();
    let (mut initial_mbsfn, mut initial_unicast) = (BTreeSet::new(), BTreeSet::new());
    for u in &inst.users {
        let home = &sites[u.home_cell.index()];
        uc_cqi.push(
            inst.radio
                .cqi_for(radio::sinr_unicast(u, home, &sites, &inst.radio, n_dl).unwrap()),
        );
        let mb = match cell_area.get(&u.home_cell) {
            Some(&a) => inst
                .radio
                .cqi_for(radio::sinr_mbsfn(u, &comps[a as usize], &sites, &inst.radio, n_dl).unwrap()),
            None => 0,
        };
        mb_cqi.push(mb);
        if mb > 0 {
            initial_mbsfn.insert(u.id);
        } else {
            initial_unicast.insert(u.id);
        }
    }
    Links {
        comps,
        cell_area,
        mb_cqi,
        uc_cqi,
        initial_mbsfn,
        initial_unicast,
    }
}

fn rate(cqi: Cqi, radio: &RadioModel) -> f64 {
    if cqi == 0 {
        0.0
    } else {
        12.0 * 14.0 * radio.cqi.efficiencies[usize::from(cqi) - 1]
    }
}

/// Deals one downlink pool; `None` when a unicast user would get nothing and `strict` is set.
fn split_pool(n: u32, b: usize, unicast: &[UserId], strict: bool) -> Option<(u32, Vec<(UserId, u32)>)> {
    let u = unicast.len();
    let mut rb_b = if b == 0 {
        0
    } else if u == 0 {
        n
    } else {
        ((f64::from(n) * b as f64 / (b + u) as f64).round() as u32).clamp(1, n)
    };
    if ((n - rb_b) as usize) < u {
        if strict {
            return None;
        }
        rb_b = if b > 0 { n.saturating_sub(u as u32).max(1) } else { 0 };
    }
    let mut left = n - rb_b;
    let mut grants: Vec<(UserId, u32)> = unicast.iter().map(|&x| (x, 0)).collect();
    while left > 0 && !grants.is_empty() {
        for g in grants.iter_mut() {
            if left == 0 {
                break;
            }
            g.1 += 1;
            left -= 1;
        }
    }
    Some((rb_b, grants))
}

/// Full configuration for a role assignment, or `None` when it is infeasible.
pub fn evaluate(
    inst: &Instance,
    l: &Links,
    mbsfn: &BTreeSet<UserId>,
    unicast: &BTreeSet<UserId>,
    d2d: &BTreeMap<UserId, (UserId, Cqi)>,
    strict: bool,
) -> Option<RefState> {
    let n_dl = inst.grid.n_rb_dl();
    let n_ul = inst.grid.n_rb_ul();
    let users = &inst.users;
    let area_of = |u: UserId| l.cell_area.get(&users[u.index()].home_cell).copied();

    let mut areas: Vec<RefArea> = l
        .comps
        .iter()
        .map(|c| RefArea {
            cells: c.clone(),
            mcs: 0,
            rb_b: 0,
            d2d_mcs: 0,
            rb_d2d: 0,
        })
        .collect();
    let mut mb = BTreeMap::new();
    for &u in mbsfn {
        let a = area_of(u)?;
        let q = l.mb_cqi[u.index()];
        let area = &mut areas[a as usize];
        area.mcs = if area.mcs == 0 { q } else { area.mcs.min(q) };
        mb.insert(u, (a, q));
    }
    let mut uc = BTreeMap::new();
    for (ai, area) in areas.iter_mut().enumerate() {
        let b = mb.values().filter(|(a, _)| *a == ai as u32).count();
        let list: Vec<UserId> = unicast
            .iter()
            .copied()
            .filter(|&u| area_of(u) == Some(ai as u32))
            .collect();
        let (rb_b, grants) = split_pool(n_dl, b, &list, strict)?;
        area.rb_b = rb_b;
        for (u, r) in grants {
            uc.insert(u, (l.uc_cqi[u.index()], r));
        }
    }
    let mut lone: BTreeMap<CellId, Vec<UserId>> = BTreeMap::new();
    for &u in unicast {
        if area_of(u).is_none() {
            lone.entry(users[u.index()].home_cell).or_default().push(u);
        }
    }
    for list in lone.values() {
        let (_, grants) = split_pool(n_dl, 0, list, strict)?;
        for (u, r) in grants {
            uc.insert(u, (l.uc_cqi[u.index()], r));
        }
    }
    if strict && uc.values().any(|(q, _)| *q == 0) {
        return None;
    }

    let relays: BTreeSet<UserId> = d2d.values().map(|(r, _)| *r).collect();
    let mut dd = BTreeMap::new();
    for (&x, &(r, csi)) in d2d {
        let a = area_of(r)?;
        let same: Vec<&UserTerminal> = relays
            .iter()
            .filter(|&&o| area_of(o) == Some(a))
            .map(|o| &users[o.index()])
            .collect();
        let other: Vec<&UserTerminal> = relays
            .iter()
            .filter(|&&o| area_of(o) != Some(a))
            .map(|o| &users[o.index()])
            .collect();
        let s = radio::sinr_d2d(&users[x.index()], same, other, &inst.radio, n_ul).unwrap();
        let q = inst.radio.cqi_for(s);
        if strict && q == 0 {
            return None;
        }
        let area = &mut areas[a as usize];
        area.d2d_mcs = if dd.values().any(|&(_, _, _, aa)| aa == a) {
            area.d2d_mcs.min(q)
        } else {
            q
        };
        dd.insert(x, (r, csi, q, a));
    }

    let n_d = f64::from(inst.tdd.n_downlink());
    let n_u = f64::from(inst.tdd.n_uplink());
    let fps = 1.0 / FRAME_DURATION_S;
    let flow = |a: &RefArea| {
        let ingress = rate(a.mcs, &inst.radio) * f64::from(a.rb_b) * n_d;
        let cap = rate(a.d2d_mcs, &inst.radio) * f64::from(n_ul) * n_u;
        ingress.min(cap)
    };
    for a in areas.iter_mut() {
        let rd = rate(a.d2d_mcs, &inst.radio);
        a.rb_d2d = if rd == 0.0 || n_u == 0.0 {
            0
        } else {
            ((flow(a) / (rd * n_u)).ceil() as u32).min(n_ul)
        };
    }
    let mut s_b = 0.0;
    for &(a, _) in mb.values() {
        let area = &areas[a as usize];
        s_b += rate(area.mcs, &inst.radio) * f64::from(area.rb_b) * n_d * fps;
    }
    let mut s_u = 0.0;
    for &(q, r) in uc.values() {
        s_u += rate(q, &inst.radio) * f64::from(r) * n_d * fps;
    }
    let mut s_d = 0.0;
    for &(_, _, _, a) in dd.values() {
        s_d += flow(&areas[a as usize]) * fps;
    }
    Some(RefState {
        areas,
        mbsfn: mb,
        unicast: uc,
        d2d: dd.into_iter().map(|(x, (r, c, q, _))| (x, (r, c, q))).collect(),
        relays,
        adr: s_b + s_u + s_d,
    })
}

/// Accepted states of a literal run of the peeling loop, basic configuration first.
pub fn reference_run(inst: &Instance, with_d2d: bool) -> Vec<RefState> {
    let l = links(inst);
    let mut mbsfn = l.initial_mbsfn.clone();
    let mut unicast = l.initial_unicast.clone();
    let mut d2d: BTreeMap<UserId, (UserId, Cqi)> = BTreeMap::new();
    let mut states = vec![evaluate(inst, &l, &mbsfn, &unicast, &d2d, false).expect("basic configuration")];
    let levels: BTreeSet<Cqi> = mbsfn.iter().map(|u| l.mb_cqi[u.index()]).collect();
    for level in levels {
        let peeled: BTreeSet<UserId> = mbsfn.iter().copied().filter(|u| l.mb_cqi[u.index()] == level).collect();
        let new_b: BTreeSet<UserId> = mbsfn.difference(&peeled).copied().collect();
        let mut new_u = unicast.clone();
        let mut new_d = d2d.clone();
        if with_d2d {
            let orphans: Vec<UserId> = new_d
                .iter()
                .filter(|(_, (r, _))| peeled.contains(r))
                .map(|(u, _)| *u)
                .collect();
            for o in &orphans {
                new_d.remove(o);
            }
            let excluded: BTreeSet<UserId> = peeled.iter().chain(&orphans).copied().collect();
            let rows: Vec<&UserTerminal> = new_b.iter().map(|u| &inst.users[u.index()]).collect();
            let cols: Vec<&UserTerminal> = excluded.iter().map(|u| &inst.users[u.index()]).collect();
            let m = compute_d2d_csi(&rows, &cols, &inst.radio, inst.grid.n_rb_ul()).unwrap();
            let found = find_relays_and_d2d(&m);
            for x in excluded {
                match found.assignment.get(&x) {
                    Some(&(r, csi)) => {
                        new_d.insert(x, (r, csi));
                    }
                    None => {
                        new_u.insert(x);
                    }
                }
            }
        } else {
            new_u.extend(peeled.iter().copied());
        }
        let current = states.last().unwrap().adr;
        match evaluate(inst, &l, &new_b, &new_u, &new_d, true) {
            Some(s) if s.adr >= current => {
                mbsfn = new_b;
                unicast = new_u;
                d2d = new_d;
                states.push(s);
            }
            _ => break,
        }
    }
    states
}

/// Every (cut level, assignment) state reachable at `cut` peeled levels, with its ADR.
///
/// Each excluded user goes unicast or to any remaining MBSFN user whose
/// single-relay CQI towards it is positive. Infeasible states are skipped.
pub fn enumerate_cut(inst: &Instance, l: &Links, cut: usize) -> Vec<RefState> {
    let levels: Vec<Cqi> = l
        .initial_mbsfn
        .iter()
        .map(|u| l.mb_cqi[u.index()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let top = if cut == 0 { 0 } else { levels[cut - 1] };
    let (excluded, mbsfn): (Vec<UserId>, Vec<UserId>) = l
        .initial_mbsfn
        .iter()
        .copied()
        .partition(|u| l.mb_cqi[u.index()] <= top);
    let mbsfn: BTreeSet<UserId> = mbsfn.into_iter().collect();
    let n_ul = inst.grid.n_rb_ul();
    let options: Vec<Vec<Option<(UserId, Cqi)>>> = excluded
        .iter()
        .map(|&x| {
            let mut opts = vec![None];
            for &r in &mbsfn {
                let s =
                    radio::sinr_d2d(&inst.users[x.index()], [&inst.users[r.index()]], [], &inst.radio, n_ul).unwrap();
                let q = inst.radio.cqi_for(s);
                if q > 0 {
                    opts.push(Some((r, q)));
                }
            }
            opts
        })
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; excluded.len()];
    loop {
        let mut unicast = l.initial_unicast.clone();
        let mut d2d = BTreeMap::new();
        for (k, &x) in excluded.iter().enumerate() {
            match options[k][idx[k]] {
                None => {
                    unicast.insert(x);
                }
                Some(link) => {
                    d2d.insert(x, link);
                }
            }
        }
        if let Some(s) = evaluate(inst, l, &mbsfn, &unicast, &d2d, cut > 0) {
            out.push(s);
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == idx.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Number of states `enumerate_cut` would visit, feasible or not.
pub fn enumeration_size(inst: &Instance, l: &Links, cut: usize) -> u64 {
    let levels: Vec<Cqi> = l
        .initial_mbsfn
        .iter()
        .map(|u| l.mb_cqi[u.index()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let top = if cut == 0 { 0 } else { levels[cut - 1] };
    let n_ul = inst.grid.n_rb_ul();
    let mbsfn: Vec<UserId> = l
        .initial_mbsfn
        .iter()
        .copied()
        .filter(|u| l.mb_cqi[u.index()] > top)
        .collect();
    l.initial_mbsfn
        .iter()
        .filter(|u| l.mb_cqi[u.index()] <= top)
        .map(|x| {
            1 + mbsfn
                .iter()
                .filter(|r| {
                    let s = radio::sinr_d2d(&inst.users[x.index()], [&inst.users[r.index()]], [], &inst.radio, n_ul)
                        .unwrap();
                    inst.radio.cqi_for(s) > 0
                })
                .count() as u64
        })
        .product()
}

/// Checks one instance: engine vs reference sequence, and every accepted
/// state's ADR against the enumerator. Returns a description of the first mismatch.
pub fn check_oracle(inst: &Instance) -> Result<usize, String> {
    use mbsfn_core::formation::{run_formation, Algorithm};
    let l = links(inst);
    let mut enumerated = 0;
    for (algo, with_d2d) in [(Algorithm::D2dMaf, true), (Algorithm::Scf, false)] {
        let run = run_formation(&inst.input(), algo, true).map_err(|e| format!("{algo}: engine error {e}"))?;
        let engine: Vec<RefState> = run.states.iter().map(from_engine).collect();
        let reference = reference_run(inst, with_d2d);
        if engine != reference {
            return Err(format!("{algo}: engine {engine:#?}\nreference {reference:#?}"));
        }
        if from_engine(&run.config) != *reference.last().unwrap() {
            return Err(format!("{algo}: final configuration differs"));
        }
        for (cut, state) in engine.iter().enumerate() {
            let all = enumerate_cut(inst, &l, cut);
            enumerated += all.len();
            let hit = all
                .iter()
                .find(|s| s.d2d == state.d2d && s.unicast.keys().eq(state.unicast.keys()))
                .ok_or_else(|| format!("{algo}: accepted state {cut} missing from enumeration"))?;
            let rel = (hit.adr - state.adr).abs() / state.adr.abs().max(f64::MIN_POSITIVE);
            if rel > 1e-9 {
                return Err(format!(
                    "{algo}: step {cut} ADR {} vs enumerated {}",
                    state.adr, hit.adr
                ));
            }
        }
    }
    Ok(enumerated)
}
