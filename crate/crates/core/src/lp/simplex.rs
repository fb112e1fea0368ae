//! Dense two-phase tableau simplex with Dantzig pricing and Bland's rule as
//! the anti-cycling fallback.
//!
//! Rows are normalized to a non-negative right-hand side. `≤` rows start with
//! their slack basic. A `≥` or `=` row starts with a structural column that
//! is non-zero in that row only (scaled to a unit column) when one exists,
//! and with an artificial variable otherwise. Phase one drives the artificials
//! to zero; phase two optimizes the real objective.

use std::collections::{HashMap, HashSet};

use super::problem::{LpProblem, LpSolution, LpStatus, Relation};
use crate::error::Result;

pub const PIVOT_TOL: f64 = 1e-9;
pub const FEASIBILITY_TOL: f64 = 1e-7;
const RATIO_TIE_TOL: f64 = 1e-12;

struct Tableau {
    rows: usize,
    /// Columns excluding the right-hand side.
    cols: usize,
    data: Vec<f64>,
    cost: Vec<f64>,
    /// Negated objective value.
    cost_rhs: f64,
    basis: Vec<usize>,
    /// Reduced costs above `-cost_tol` count as non-negative.
    cost_tol: f64,
    /// `mirror[j] = Some(k)` when structural column `k` is `−1 ×` column `j`.
    mirror: Vec<Option<usize>>,
    /// Original cost of each column for the current phase.
    base_cost: Vec<f64>,
    /// Scratch list of non-zero pivot-row columns.
    nz: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn stride(&self) -> usize {
        self.cols + 1
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.stride() + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.stride() + self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let stride = self.stride();
        let inv = 1.0 / self.at(r, c);
        let (before, rest) = self.data.split_at_mut(r * stride);
        let (prow, after) = rest.split_at_mut(stride);
        for v in prow.iter_mut() {
            *v *= inv;
        }
        prow[c] = 1.0;
        // Tableau rows are mostly sparse here; touch only the pivot row's
        // non-zero columns.
        self.nz.clear();
        self.nz.extend(
            prow.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, _)| j),
        );
        let nz = &self.nz;
        for row in before
            .chunks_exact_mut(stride)
            .chain(after.chunks_exact_mut(stride))
        {
            let factor = row[c];
            if factor != 0.0 {
                for &j in nz {
                    row[j] -= factor * prow[j];
                }
                row[c] = 0.0;
            }
        }
        let factor = self.cost[c];
        if factor != 0.0 {
            for &j in nz.iter().filter(|&&j| j < self.cols) {
                self.cost[j] -= factor * prow[j];
            }
            self.cost_rhs -= factor * prow[self.cols];
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
        // With `c` basic its mirror's column is exactly `−e_r` and its reduced
        // cost is the sum of both original costs; store that instead of the
        // accumulated roundoff.
        if let Some(k) = self.mirror.get(c).copied().flatten() {
            for i in 0..self.rows {
                let idx = i * stride + k;
                self.data[idx] = if i == r { -1.0 } else { 0.0 };
            }
            self.cost[k] = self.base_cost[k] + self.base_cost[c];
        }
    }

    fn ratio_row(&self, c: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, c);
            if a > PIVOT_TOL {
                let ratio = self.rhs(r).max(0.0) / a;
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        if ratio < bratio - RATIO_TIE_TOL
                            || (ratio <= bratio + RATIO_TIE_TOL && self.basis[r] < self.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
        }
        best.map(|(r, _)| r)
    }

    /// Entering column and leaving row. Dantzig pricing takes the most
    /// negative reduced cost; Bland takes the lowest-index improving column.
    /// Either way the row is the minimum ratio, lowest-index basic variable
    /// among ties.
    ///
    /// A column without a positive entry whose reduced cost is only roundoff
    /// away from zero is skipped rather than reported as an unbounded ray;
    /// this happens to the mirror half of a split free variable.
    fn choose_pivot(&self, allowed_cols: usize, bland: bool) -> Option<(usize, Option<usize>)> {
        let mut improving: Vec<usize> = (0..allowed_cols)
            .filter(|&j| self.cost[j] < -self.cost_tol)
            .collect();
        if !bland {
            improving.sort_by(|&a, &b| self.cost[a].total_cmp(&self.cost[b]).then(a.cmp(&b)));
        }
        for c in improving {
            match self.ratio_row(c) {
                Some(r) => return Some((c, Some(r))),
                None if self.cost[c] < -self.cost_tol * (FEASIBILITY_TOL / PIVOT_TOL) => {
                    return Some((c, None))
                }
                None => {}
            }
        }
        None
    }

    /// Order-independent hash of the basic set.
    fn basis_hash(&self) -> u64 {
        self.basis.iter().fold(0, |h, &b| h ^ mix(b as u64))
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

/// Runs one phase with Dantzig pricing. A basis that repeats within a run
/// of degenerate pivots means the method is cycling, and the phase finishes
/// under Bland's rule, which cannot cycle. Bland alone is far slower on the
/// highly degenerate rigid-fit programs.
fn run_phase(
    t: &mut Tableau,
    allowed_cols: usize,
    iterations: &mut usize,
    max_iters: usize,
) -> PhaseEnd {
    let mut bland = false;
    let mut stalled: HashSet<u64> = HashSet::new();
    let mut hash = t.basis_hash();
    loop {
        match t.choose_pivot(allowed_cols, bland) {
            None => return PhaseEnd::Optimal,
            Some((_, None)) => return PhaseEnd::Unbounded,
            Some((c, Some(r))) => {
                if *iterations >= max_iters {
                    return PhaseEnd::IterationLimit;
                }
                let degenerate = t.rhs(r) <= PIVOT_TOL;
                if !bland {
                    if !degenerate {
                        stalled.clear();
                    } else if !stalled.insert(hash) {
                        bland = true;
                        continue;
                    }
                }
                hash ^= mix(t.basis[r] as u64) ^ mix(c as u64);
                t.pivot(r, c);
                *iterations += 1;
            }
        }
    }
}

/// Solves `p` with at most `max_iters` pivots.
pub fn solve(p: &LpProblem, max_iters: usize) -> Result<LpSolution> {
    p.validate()?;
    let n = p.num_vars();
    let m = p.num_constraints();

    // Normalize so every rhs is non-negative.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = p
        .constraints()
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let rel = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|v| -v).collect(), rel, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();

    // Structural columns that are non-zero in exactly one row.
    let mut nonzero_rows = vec![0usize; n];
    let mut last_row = vec![usize::MAX; n];
    for (i, (coeffs, _, _)) in rows.iter().enumerate() {
        for (j, &a) in coeffs.iter().enumerate() {
            if a != 0.0 {
                nonzero_rows[j] += 1;
                last_row[j] = i;
            }
        }
    }
    let mut crash_used = vec![false; n];
    let mut crash: Vec<Option<usize>> = vec![None; m];
    for (i, (coeffs, rel, _)) in rows.iter_mut().enumerate() {
        if *rel == Relation::Le {
            continue;
        }
        if let Some(j) = (0..n).find(|&j| {
            !crash_used[j] && nonzero_rows[j] == 1 && last_row[j] == i && coeffs[j] > 0.0
        }) {
            crash_used[j] = true;
            crash[i] = Some(j);
        }
    }

    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows
        .iter()
        .zip(&crash)
        .filter(|(r, c)| r.1 != Relation::Le && c.is_none())
        .count();
    let cols = n + n_slack + n_art;
    let stride = cols + 1;
    let mut t = Tableau {
        rows: m,
        cols,
        data: vec![0.0; m * stride],
        cost: vec![0.0; cols],
        cost_rhs: 0.0,
        basis: vec![0; m],
        cost_tol: PIVOT_TOL,
        mirror: mirror_columns(&rows, n),
        base_cost: vec![0.0; cols],
        nz: Vec::new(),
    };

    let mut slack = n;
    let mut art = n + n_slack;
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        let row = &mut t.data[i * stride..(i + 1) * stride];
        row[..n].copy_from_slice(coeffs);
        row[cols] = *rhs;
        match rel {
            Relation::Le => {
                row[slack] = 1.0;
                t.basis[i] = slack;
                slack += 1;
            }
            Relation::Ge | Relation::Eq => {
                if *rel == Relation::Ge {
                    row[slack] = -1.0;
                    slack += 1;
                }
                if let Some(j) = crash[i] {
                    let inv = 1.0 / row[j];
                    for v in row.iter_mut() {
                        *v *= inv;
                    }
                    row[j] = 1.0;
                    t.basis[i] = j;
                } else {
                    row[art] = 1.0;
                    t.basis[i] = art;
                    art += 1;
                }
            }
        }
    }

    let real_cols = n + n_slack;
    let mut iterations = 0;

    // Phase one: minimize the sum of artificials.
    if n_art > 0 {
        for i in 0..m {
            if t.basis[i] >= real_cols {
                for j in 0..cols {
                    t.cost[j] -= t.data[i * stride + j];
                }
                t.cost_rhs -= t.data[i * stride + cols];
            }
        }
        for j in real_cols..cols {
            t.cost[j] += 1.0;
            t.base_cost[j] = 1.0;
        }
        match run_phase(&mut t, cols, &mut iterations, max_iters) {
            PhaseEnd::IterationLimit => {
                return Ok(finish(p, &t, n, LpStatus::IterationLimit, iterations));
            }
            // The phase-one objective is bounded below by zero.
            PhaseEnd::Unbounded | PhaseEnd::Optimal => {}
        }
        if -t.cost_rhs > FEASIBILITY_TOL {
            return Ok(finish(p, &t, n, LpStatus::Infeasible, iterations));
        }
        // Pivot remaining (zero-valued) artificials out where possible; rows
        // where that fails are redundant and keep a zero artificial.
        for r in 0..m {
            if t.basis[r] >= real_cols {
                if let Some(c) = (0..real_cols).find(|&c| t.at(r, c).abs() > PIVOT_TOL) {
                    t.pivot(r, c);
                }
            }
        }
    }

    // Phase two.
    t.cost_tol = PIVOT_TOL * p.objective().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    t.cost.iter_mut().for_each(|v| *v = 0.0);
    t.cost[..n].copy_from_slice(p.objective());
    t.base_cost.iter_mut().for_each(|v| *v = 0.0);
    t.base_cost[..n].copy_from_slice(p.objective());
    t.cost_rhs = 0.0;
    for r in 0..m {
        let b = t.basis[r];
        let cb = if b < n { p.objective()[b] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..cols {
                t.cost[j] -= cb * t.data[r * stride + j];
            }
            t.cost_rhs -= cb * t.data[r * stride + cols];
        }
    }
    let status = match run_phase(&mut t, real_cols, &mut iterations, max_iters) {
        PhaseEnd::Optimal => LpStatus::Optimal,
        PhaseEnd::Unbounded => LpStatus::Unbounded,
        PhaseEnd::IterationLimit => LpStatus::IterationLimit,
    };
    Ok(finish(p, &t, n, status, iterations))
}

/// Pairs of structural columns that are exact negatives of each other, as
/// produced by splitting a free variable. Both directions are recorded.
fn mirror_columns(rows: &[(Vec<f64>, Relation, f64)], n: usize) -> Vec<Option<usize>> {
    let column = |j: usize, sign: f64| -> Vec<(usize, u64)> {
        rows.iter()
            .enumerate()
            .filter(|(_, r)| r.0[j] != 0.0)
            .map(|(i, r)| (i, (sign * r.0[j]).to_bits()))
            .collect()
    };
    let mut seen: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
    let mut mirror = vec![None; n];
    for j in 0..n {
        let col = column(j, 1.0);
        if col.is_empty() {
            continue;
        }
        if let Some(&k) = seen.get(&column(j, -1.0)) {
            if mirror[k].is_none() {
                mirror[j] = Some(k);
                mirror[k] = Some(j);
                continue;
            }
        }
        seen.entry(col).or_insert(j);
    }
    mirror
}

fn finish(p: &LpProblem, t: &Tableau, n: usize, status: LpStatus, iterations: usize) -> LpSolution {
    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs(r).max(0.0);
        }
    }
    LpSolution {
        status,
        objective: p.evaluate(&x),
        x,
        iterations,
        reduced_costs: t.cost[..n].to_vec(),
    }
}
