//! Hexagonal synchronization area, user drops and cell adjacency.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Maximum number of cells a generated grid may hold.
pub const MAX_CELLS: usize = 256;

/// Slack, in meters, when matching inter-center distances against the ISD.
pub const ADJACENCY_TOLERANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cell {}", self.0)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "user {}", self.0)
    }
}

impl UserId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl CellId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSite {
    pub id: CellId,
    pub center: Point,
    /// Coverage radius in meters.
    pub radius: f64,
    /// Transmit power in dBm.
    pub tx_power: f64,
    /// Antenna gain in dBi.
    pub antenna_gain: f64,
}

impl CellSite {
    pub const DEFAULT_RADIUS_M: f64 = 250.0;
    pub const DEFAULT_TX_POWER_DBM: f64 = 46.0;
    pub const DEFAULT_ANTENNA_GAIN_DBI: f64 = 15.0;

    pub fn new(id: CellId, center: Point) -> Self {
        Self {
            id,
            center,
            radius: Self::DEFAULT_RADIUS_M,
            tx_power: Self::DEFAULT_TX_POWER_DBM,
            antenna_gain: Self::DEFAULT_ANTENNA_GAIN_DBI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTerminal {
    pub id: UserId,
    pub home_cell: CellId,
    pub position: Point,
    /// dBi
    pub antenna_gain: f64,
    /// dB
    pub noise_figure: f64,
    /// Sidelink transmit power in dBm.
    pub tx_power_d2d: f64,
}

impl UserTerminal {
    pub const DEFAULT_ANTENNA_GAIN_DBI: f64 = 0.0;
    pub const DEFAULT_NOISE_FIGURE_DB: f64 = 9.0;
    pub const DEFAULT_TX_POWER_D2D_DBM: f64 = 23.0;

    pub fn new(id: UserId, home_cell: CellId, position: Point) -> Self {
        Self {
            id,
            home_cell,
            position,
            antenna_gain: Self::DEFAULT_ANTENNA_GAIN_DBI,
            noise_figure: Self::DEFAULT_NOISE_FIGURE_DB,
            tx_power_d2d: Self::DEFAULT_TX_POWER_D2D_DBM,
        }
    }
}

/// The set of time-synchronized cells that may host MBSFN areas.
///
/// `interferers` are co-channel sites surrounding the area. They never join
/// an MBSFN area and host no users, but they transmit at full power and are
/// counted as interference by every SINR model. A bare [`build_hex_grid`]
/// has none; [`SynchronizationArea::with_interferer_ring`] adds one tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynchronizationArea {
    pub cells: Vec<CellSite>,
    pub isd: f64,
    pub adjacency: Vec<Vec<bool>>,
    #[serde(default)]
    pub interferers: Vec<CellSite>,
}

impl SynchronizationArea {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, id: CellId) -> Option<&CellSite> {
        self.cells.get(id.index()).filter(|c| c.id == id)
    }

    pub fn contains(&self, id: CellId) -> bool {
        self.cell(id).is_some()
    }

    pub fn is_adjacent(&self, a: CellId, b: CellId) -> bool {
        self.adjacency
            .get(a.index())
            .and_then(|row| row.get(b.index()))
            .copied()
            .unwrap_or(false)
    }

    pub fn neighbors(&self, id: CellId) -> impl Iterator<Item = CellId> + '_ {
        self.adjacency[id.index()]
            .iter()
            .enumerate()
            .filter(|(_, adj)| **adj)
            .map(|(j, _)| CellId(j as u32))
    }

    /// Every transmitting site: member cells first, then the interferer tier.
    pub fn all_sites(&self) -> impl Iterator<Item = &CellSite> {
        self.cells.iter().chain(self.interferers.iter())
    }

    /// Adds the first tier of hex sites around the area as interferers.
    pub fn with_interferer_ring(mut self) -> Self {
        let n = self.cells.len();
        let members: HashSet<Axial> = spiral(n).into_iter().collect();
        let mut ring = Vec::new();
        // The grid fits inside a spiral of radius k, so its neighbors fit in k + 1.
        for a in spiral(spiral_len_covering(n)) {
            if !members.contains(&a) && a.neighbors().iter().any(|nb| members.contains(nb)) {
                ring.push(a);
            }
        }
        self.interferers = ring
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                let mut site = CellSite::new(CellId((n + i) as u32), a.to_point(self.isd));
                if let Some(first) = self.cells.first() {
                    site.tx_power = first.tx_power;
                    site.antenna_gain = first.antenna_gain;
                    site.radius = first.radius;
                }
                site
            })
            .collect();
        self
    }
}

/// Axial hex coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Axial {
    q: i32,
    r: i32,
}

const AXIAL_DIRECTIONS: [Axial; 6] = [
    Axial { q: 1, r: 0 },
    Axial { q: 1, r: -1 },
    Axial { q: 0, r: -1 },
    Axial { q: -1, r: 0 },
    Axial { q: -1, r: 1 },
    Axial { q: 0, r: 1 },
];

impl Axial {
    fn add(self, o: Axial) -> Axial {
        Axial {
            q: self.q + o.q,
            r: self.r + o.r,
        }
    }

    fn scale(self, k: i32) -> Axial {
        Axial {
            q: self.q * k,
            r: self.r * k,
        }
    }

    fn neighbors(self) -> [Axial; 6] {
        AXIAL_DIRECTIONS.map(|d| self.add(d))
    }

    fn to_point(self, isd: f64) -> Point {
        let q = f64::from(self.q);
        let r = f64::from(self.r);
        Point::new(isd * (q + r / 2.0), isd * r * 3f64.sqrt() / 2.0)
    }
}

/// First `n` hexes of the outward spiral: origin, then ring 1, ring 2, ...
fn spiral(n: usize) -> Vec<Axial> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(Axial { q: 0, r: 0 });
    let mut radius = 1;
    while out.len() < n {
        let mut hex = AXIAL_DIRECTIONS[4].scale(radius);
        for dir in AXIAL_DIRECTIONS {
            for _ in 0..radius {
                if out.len() == n {
                    return out;
                }
                out.push(hex);
                hex = hex.add(dir);
            }
        }
        radius += 1;
    }
    out
}

/// Number of hexes in the smallest full spiral containing `n` hexes plus one more ring.
fn spiral_len_covering(n: usize) -> usize {
    let mut k = 0usize;
    while 1 + 3 * k * (k + 1) < n {
        k += 1;
    }
    let k = k + 1;
    1 + 3 * k * (k + 1)
}

/// Builds `n_cells` sites on a hexagonal lattice spiraling out from the origin.
pub fn build_hex_grid(n_cells: usize, isd: f64) -> Result<SynchronizationArea> {
    if n_cells == 0 || n_cells > MAX_CELLS {
        return invalid(format!("n_cells must be in 1..={MAX_CELLS}, got {n_cells}"));
    }
    if !(isd.is_finite() && isd > 0.0) {
        return invalid(format!("isd must be positive, got {isd}"));
    }
    let cells: Vec<CellSite> = spiral(n_cells)
        .into_iter()
        .enumerate()
        .map(|(i, a)| CellSite::new(CellId(i as u32), a.to_point(isd)))
        .collect();
    let adjacency = cells
        .iter()
        .map(|a| {
            cells
                .iter()
                .map(|b| a.id != b.id && (a.center.distance_to(&b.center) - isd).abs() <= ADJACENCY_TOLERANCE_M)
                .collect()
        })
        .collect();
    Ok(SynchronizationArea {
        cells,
        isd,
        adjacency,
        interferers: Vec::new(),
    })
}

/// Drops `users_per_cell` users uniformly over each cell disk.
///
/// User ids are dense and assigned in cell order, so `users[i].id == UserId(i)`.
pub fn place_users(area: &SynchronizationArea, users_per_cell: usize, rng_seed: u64) -> Vec<UserTerminal> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut users = Vec::with_capacity(area.cells.len() * users_per_cell);
    for cell in &area.cells {
        for _ in 0..users_per_cell {
            let rho = cell.radius * rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            let position = Point::new(cell.center.x + rho * theta.cos(), cell.center.y + rho * theta.sin());
            let id = UserId(users.len() as u32);
            users.push(UserTerminal::new(id, cell.id, position));
        }
    }
    users
}

/// Connected components of the adjacency subgraph induced by `cell_ids`.
///
/// Components are sorted internally and ordered by their lowest member.
pub fn adjacent_subsets(area: &SynchronizationArea, cell_ids: &BTreeSet<CellId>) -> Result<Vec<BTreeSet<CellId>>> {
    if let Some(bad) = cell_ids.iter().find(|id| !area.contains(**id)) {
        return invalid(format!("unknown {bad}"));
    }
    let mut seen: BTreeSet<CellId> = BTreeSet::new();
    let mut components = Vec::new();
    for &start in cell_ids {
        if seen.contains(&start) {
            continue;
        }
        let mut component = BTreeSet::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(c) = stack.pop() {
            component.insert(c);
            for nb in area.neighbors(c) {
                if cell_ids.contains(&nb) && seen.insert(nb) {
                    stack.push(nb);
                }
            }
        }
        components.push(component);
    }
    Ok(components)
}
