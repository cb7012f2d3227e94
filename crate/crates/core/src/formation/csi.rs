use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{invalid, Result};
use crate::radio::{self, linear_to_db, Cqi, RadioModel};
use crate::topology::{UserId, UserTerminal};

/// CQI of every single-relay sidelink between candidate relays (rows) and
/// users excluded from the MBSFN transmission (columns).
///
/// Rows and columns are kept in ascending user-id order. Only positive
/// entries are stored; every other entry reads as 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct D2dCsiMatrix {
    relays: Vec<UserId>,
    excluded: Vec<UserId>,
    /// Per column, `(row, cqi)` with `cqi > 0`, ascending by row.
    columns: Vec<Vec<(u32, Cqi)>>,
}

impl D2dCsiMatrix {
    /// Builds a matrix from a dense row-major entry table.
    pub fn from_dense(relays: Vec<UserId>, excluded: Vec<UserId>, entries: &[Vec<Cqi>]) -> Result<Self> {
        if entries.len() != relays.len() || entries.iter().any(|row| row.len() != excluded.len()) {
            return invalid("dense CSI table does not match its row/column labels");
        }
        if !relays.windows(2).all(|w| w[0] < w[1]) || !excluded.windows(2).all(|w| w[0] < w[1]) {
            return invalid("CSI labels must be strictly ascending");
        }
        if entries.iter().flatten().any(|&e| e > radio::MAX_CQI) {
            return invalid("CSI entries must be in 0..=15");
        }
        let columns = (0..excluded.len())
            .map(|c| {
                entries
                    .iter()
                    .enumerate()
                    .filter(|(_, row)| row[c] > 0)
                    .map(|(r, row)| (r as u32, row[c]))
                    .collect()
            })
            .collect();
        Ok(Self {
            relays,
            excluded,
            columns,
        })
    }

    pub fn relays(&self) -> &[UserId] {
        &self.relays
    }

    pub fn excluded(&self) -> &[UserId] {
        &self.excluded
    }

    pub fn n_rows(&self) -> usize {
        self.relays.len()
    }

    pub fn n_cols(&self) -> usize {
        self.excluded.len()
    }

    pub fn entry(&self, row: usize, col: usize) -> Cqi {
        self.columns[col]
            .binary_search_by_key(&(row as u32), |(r, _)| *r)
            .map(|i| self.columns[col][i].1)
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<Vec<Cqi>> {
        let mut out = vec![vec![0; self.n_cols()]; self.n_rows()];
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                out[r as usize][c] = v;
            }
        }
        out
    }

    pub fn is_all_zero(&self) -> bool {
        self.columns.iter().all(Vec::is_empty)
    }
}

/// Relay set plus the relay chosen for every connectable excluded user.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelayAssignment {
    pub relays: BTreeSet<UserId>,
    /// excluded user -> (relay, CSI entry)
    pub assignment: BTreeMap<UserId, (UserId, Cqi)>,
}

type Sides<'a> = (Vec<&'a UserTerminal>, Vec<&'a UserTerminal>);

fn sorted_inputs<'a>(candidate_relays: &[&'a UserTerminal], excluded: &[&'a UserTerminal]) -> Result<Sides<'a>> {
    let mut rows: Vec<&UserTerminal> = candidate_relays.to_vec();
    rows.sort_by_key(|u| u.id);
    let mut cols: Vec<&UserTerminal> = excluded.to_vec();
    cols.sort_by_key(|u| u.id);
    if rows.windows(2).any(|w| w[0].id == w[1].id) || cols.windows(2).any(|w| w[0].id == w[1].id) {
        return invalid("duplicate user in CSI input");
    }
    let row_ids: BTreeSet<UserId> = rows.iter().map(|u| u.id).collect();
    if let Some(both) = cols.iter().find(|u| row_ids.contains(&u.id)) {
        return invalid(format!("{} is both a candidate relay and excluded", both.id));
    }
    Ok((rows, cols))
}

/// Fills the D2D CSI matrix of `excluded` users against `candidate_relays`.
///
/// Entry `(r, d)` is the CQI of `d` listening to relay `r` alone over the
/// uplink carrier of `n_rb_ul` RBs. Pairs beyond the range at which even the
/// strongest candidate could reach CQI 1 are skipped through a bucket grid.
pub fn compute_d2d_csi(
    candidate_relays: &[&UserTerminal],
    excluded: &[&UserTerminal],
    radio: &RadioModel,
    n_rb_ul: u32,
) -> Result<D2dCsiMatrix> {
    let (rows, cols) = sorted_inputs(candidate_relays, excluded)?;

    let mut columns: Vec<Vec<(u32, Cqi)>> = vec![Vec::new(); cols.len()];
    if !rows.is_empty() && !cols.is_empty() {
        let max_eirp = rows
            .iter()
            .map(|r| r.tx_power_d2d + r.antenna_gain)
            .fold(f64::NEG_INFINITY, f64::max);
        let threshold_db = radio.cqi.sinr_thresholds[0];
        let cutoffs: Vec<f64> = cols
            .iter()
            .map(|d| {
                let noise_dbm = radio::noise_dbm(n_rb_ul, &radio.params, d.noise_figure)?;
                let max_pl = max_eirp + d.antenna_gain - noise_dbm - threshold_db;
                let km = 10f64.powf((max_pl - 128.1) / 37.6);
                Ok((km * 1000.0).max(radio.params.min_distance_m) * 1.01 + 1.0)
            })
            .collect::<Result<_>>()?;
        let bucket = cutoffs.iter().copied().fold(0.0, f64::max);
        let key = |x: f64, y: f64| ((x / bucket).floor() as i64, (y / bucket).floor() as i64);
        let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, r) in rows.iter().enumerate() {
            grid.entry(key(r.position.x, r.position.y)).or_default().push(i as u32);
        }
        for (c, d) in cols.iter().enumerate() {
            let (kx, ky) = key(d.position.x, d.position.y);
            let column = &mut columns[c];
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(bucket_rows) = grid.get(&(kx + dx, ky + dy)) else {
                        continue;
                    };
                    for &ri in bucket_rows {
                        let r = rows[ri as usize];
                        if r.position.distance_to(&d.position) > cutoffs[c] {
                            continue;
                        }
                        let sinr = radio::d2d_sample(d, [r], [], radio, n_rb_ul)?.ratio();
                        let cqi = radio::sinr_to_cqi(linear_to_db(sinr), &radio.cqi);
                        if cqi > 0 {
                            column.push((ri, cqi));
                        }
                    }
                }
            }
            column.sort_unstable_by_key(|(r, _)| *r);
        }
    }
    Ok(D2dCsiMatrix {
        relays: rows.iter().map(|u| u.id).collect(),
        excluded: cols.iter().map(|u| u.id).collect(),
        columns,
    })
}

/// Picks, for every excluded user with a positive entry, the relay with the
/// highest entry (lowest relay id on ties). Relays nobody picked are dropped.
pub fn find_relays_and_d2d(matrix: &D2dCsiMatrix) -> RelayAssignment {
    let mut out = RelayAssignment::default();
    for (c, col) in matrix.columns.iter().enumerate() {
        // rows are ascending, so a strict comparison keeps the lowest id on ties
        let best = col.iter().fold(None, |best: Option<(u32, Cqi)>, &(r, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((r, v)),
        });
        if let Some((r, v)) = best {
            let relay = matrix.relays[r as usize];
            out.relays.insert(relay);
            out.assignment.insert(matrix.excluded[c], (relay, v));
        }
    }
    out
}

/// Same result as `find_relays_and_d2d(&compute_d2d_csi(..))`, without filling the matrix.
///
/// Relays are visited in rings of buckets around each excluded user, nearest
/// ring first, until no farther relay could still match the best CQI found.
pub fn best_relays(
    candidate_relays: &[&UserTerminal],
    excluded: &[&UserTerminal],
    radio: &RadioModel,
    n_rb_ul: u32,
) -> Result<RelayAssignment> {
    const BUCKET_M: f64 = 50.0;
    let (rows, cols) = sorted_inputs(candidate_relays, excluded)?;
    let mut out = RelayAssignment::default();
    if rows.is_empty() || cols.is_empty() {
        return Ok(out);
    }
    let max_eirp = rows
        .iter()
        .map(|r| r.tx_power_d2d + r.antenna_gain)
        .fold(f64::NEG_INFINITY, f64::max);
    let key = |x: f64, y: f64| ((x / BUCKET_M).floor() as i64, (y / BUCKET_M).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    let (mut lo, mut hi) = ((i64::MAX, i64::MAX), (i64::MIN, i64::MIN));
    for (i, r) in rows.iter().enumerate() {
        let k = key(r.position.x, r.position.y);
        lo = (lo.0.min(k.0), lo.1.min(k.1));
        hi = (hi.0.max(k.0), hi.1.max(k.1));
        grid.entry(k).or_default().push(i as u32);
    }
    for d in cols {
        let noise = radio.noise_mw(n_rb_ul, d.noise_figure)?;
        // CQI no relay at least `dist` away can exceed; 1 m of slack absorbs rounding
        let bound = |dist: f64| {
            let pl = radio.pathloss_m((dist - 1.0).max(0.0));
            radio.cqi_for(radio::dbm_to_mw(max_eirp + d.antenna_gain - pl) / noise)
        };
        let (kx, ky) = key(d.position.x, d.position.y);
        let mut best: Option<(u32, Cqi)> = None;
        for k in 0i64.. {
            if k >= 1 && bound((k - 1) as f64 * BUCKET_M) < best.map_or(1, |b| b.1) {
                break;
            }
            for dx in -k..=k {
                let step = if dx.abs() == k { 1 } else { 2 * k as usize };
                for dy in (-k..=k).step_by(step.max(1)) {
                    let Some(bucket) = grid.get(&(kx + dx, ky + dy)) else {
                        continue;
                    };
                    for &ri in bucket {
                        let sinr = radio::d2d_sample(d, [rows[ri as usize]], [], radio, n_rb_ul)?.ratio();
                        let q = radio::sinr_to_cqi(linear_to_db(sinr), &radio.cqi);
                        if q == 0 {
                            continue;
                        }
                        best = match best {
                            Some((br, bq)) if bq > q || (bq == q && br < ri) => Some((br, bq)),
                            _ => Some((ri, q)),
                        };
                    }
                }
            }
            if kx - k <= lo.0 && kx + k >= hi.0 && ky - k <= lo.1 && ky + k >= hi.1 {
                break;
            }
        }
        if let Some((r, q)) = best {
            let relay = rows[r as usize].id;
            out.relays.insert(relay);
            out.assignment.insert(d.id, (relay, q));
        }
    }
    Ok(out)
}
