//! Budget-aware Monte Carlo tree search for a single robot.
//!
//! One call to [`plan_next`] grows a fresh tree rooted at the robot's current
//! location and returns the next location to visit. Each iteration selects a
//! leaf with UCB, expands one child, scores it with a random rollout, and
//! backs the return up the selected path.
//!
//! Moves are drawn from a bounded children map: the `M/2` nearest candidates,
//! `M/2 - 1` random others, and the final location. A move to `g` from a node
//! with remaining budget `b` is admissible only if the worst-case cost of
//! reaching `g` and then the final location fits in `b`, so no node in the
//! tree can end up with a negative budget.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{manhattan_distance, Location, LocationSet};
use crate::error::{Error, Result};
use crate::gp::VarianceMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostParams {
    /// Energy per cell of Manhattan distance.
    pub alpha: f64,
    /// Upper end of the uniform energy noise added to every move.
    pub lambda_max: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            alpha: 0.5,
            lambda_max: 1.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.lambda_max >= 0.0 && self.lambda_max.is_finite()) {
            return Err(Error::param(format!(
                "lambda_max must be >= 0, got {}",
                self.lambda_max
            )));
        }
        Ok(())
    }

    /// Largest energy a move from `a` to `b` can cost.
    pub fn worst_cost(&self, a: Location, b: Location) -> f64 {
        self.alpha * manhattan_distance(a, b) as f64 + self.lambda_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    /// Branching limit of the children map; must be even.
    pub branching: usize,
    pub exploration: f64,
    /// Discount applied per step of a return.
    pub discount: f64,
    /// Tree nodes added per planning call.
    pub iterations: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            branching: 30,
            exploration: 3.0,
            discount: 1.0,
            iterations: 1000,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        if self.branching < 2 || !self.branching.is_multiple_of(2) {
            return Err(Error::param(format!(
                "branching must be an even number >= 2, got {}",
                self.branching
            )));
        }
        if !(self.exploration >= 0.0 && self.exploration.is_finite()) {
            return Err(Error::param(format!(
                "exploration must be >= 0, got {}",
                self.exploration
            )));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::param(format!(
                "discount must lie in [0, 1], got {}",
                self.discount
            )));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Reward for sampling a cell with posterior `variance` at travel distance `dist`.
///
/// Panics if `dist` is zero; the children map never offers the current cell.
pub fn reward(variance: f64, dist: u32) -> f64 {
    assert!(dist > 0, "reward requested for a zero-length move");
    variance / dist as f64
}

/// Upper confidence bound of a child with `visits` visits under a parent
/// visited `parent_visits` times. Untried children score `+inf`.
pub fn ucb(value: f64, visits: u32, parent_visits: u32, exploration: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    value + exploration * ((parent_visits as f64).ln() / visits as f64).sqrt()
}

/// Simulated energy of a move: `alpha·d + U[0, lambda_max]`.
pub fn gen_cost<R: Rng + ?Sized>(a: Location, b: Location, cost: &CostParams, rng: &mut R) -> f64 {
    let noise = if cost.lambda_max > 0.0 {
        rng.random_range(0.0..=cost.lambda_max)
    } else {
        0.0
    };
    cost.alpha * manhattan_distance(a, b) as f64 + noise
}

/// Everything one planning call needs. `variances` is a frozen snapshot and
/// must cover every member of `candidates`.
#[derive(Clone, Debug)]
pub struct PlanningContext {
    pub current: Location,
    pub remaining_budget: f64,
    pub final_loc: Location,
    pub candidates: LocationSet,
    pub variances: VarianceMap,
    pub cost: CostParams,
    pub params: PlannerParams,
}

/// The candidate pool compiled into dense slots. Slots `0..n_base` are the
/// candidates; the final location and the root location get extra slots
/// when they are not candidates themselves.
#[derive(Clone, Debug)]
struct SlotTable {
    locs: Vec<Location>,
    variance: Vec<f64>,
    worst_to_final: Vec<f64>,
    n_base: usize,
    final_slot: u32,
    root_slot: u32,
    branching: usize,
    cost: CostParams,
}

impl SlotTable {
    fn new(ctx: &PlanningContext) -> Self {
        let mut locs: Vec<Location> = ctx.candidates.iter().copied().collect();
        let n_base = locs.len();
        let slot_of = |locs: &mut Vec<Location>, l: Location| -> u32 {
            match locs.iter().position(|&c| c == l) {
                Some(i) => i as u32,
                None => {
                    locs.push(l);
                    (locs.len() - 1) as u32
                }
            }
        };
        let final_slot = slot_of(&mut locs, ctx.final_loc);
        let root_slot = slot_of(&mut locs, ctx.current);
        let variance = locs
            .iter()
            .map(|l| {
                if *l == ctx.final_loc {
                    0.0
                } else {
                    ctx.variances.get(l).copied().unwrap_or(0.0)
                }
            })
            .collect();
        let worst_to_final = locs
            .iter()
            .map(|&l| ctx.cost.worst_cost(l, ctx.final_loc))
            .collect();
        SlotTable {
            locs,
            variance,
            worst_to_final,
            n_base,
            final_slot,
            root_slot,
            branching: ctx.params.branching,
            cost: ctx.cost,
        }
    }

    fn admissible(&self, from: u32, budget: f64, to: u32) -> bool {
        let leg = self.cost.worst_cost(self.locs[from as usize], self.locs[to as usize]);
        if to == self.final_slot {
            leg <= budget
        } else {
            leg + self.worst_to_final[to as usize] <= budget
        }
    }

    fn reward(&self, from: u32, to: u32) -> f64 {
        if to == self.final_slot {
            return 0.0;
        }
        reward(
            self.variance[to as usize],
            manhattan_distance(self.locs[from as usize], self.locs[to as usize]),
        )
    }

    /// Children map of `from` into `out`: nearest half, random half, final.
    fn children_map<R: Rng + ?Sized>(
        &self,
        from: u32,
        consumed: &[bool],
        rng: &mut R,
        scratch: &mut Vec<(u64, u32)>,
        out: &mut Vec<u32>,
    ) {
        out.clear();
        scratch.clear();
        let origin = self.locs[from as usize];
        for s in 0..self.n_base as u32 {
            if s == from || consumed[s as usize] {
                continue;
            }
            let l = self.locs[s as usize];
            if l == origin {
                continue;
            }
            // Unique per cell: distance, then row, then column.
            let key = ((manhattan_distance(origin, l) as u64) << 42) | ((l.y as u64) << 21) | l.x as u64;
            scratch.push((key, s));
        }

        let half = self.branching / 2;
        if scratch.len() > half {
            scratch.select_nth_unstable_by_key(half, |e| e.0);
        }
        let near_len = half.min(scratch.len());
        let (near, rest) = scratch.split_at_mut(near_len);
        near.sort_unstable_by_key(|e| e.0);
        out.extend(near.iter().map(|e| e.1));

        // The remainder's order depends on the selection above, so sort it
        // before drawing to keep the draw a function of the set alone.
        rest.sort_unstable_by_key(|e| e.0);
        let extra = (half - 1).min(rest.len());
        let (picked, _) = rest.partial_shuffle(rng, extra);
        out.extend(picked.iter().map(|e| e.1));

        if !out.contains(&self.final_slot) && from != self.final_slot {
            out.push(self.final_slot);
        }
    }
}

pub type NodeId = usize;

#[derive(Clone, Debug)]
pub struct TreeNode {
    loc: Location,
    slot: u32,
    remaining_budget: f64,
    /// Reward collected on arriving here; zero for the root and the final location.
    reward: f64,
    visits: u32,
    value: f64,
    children: Vec<NodeId>,
    /// Admissible moves not yet expanded; `None` until first expansion.
    untried: Option<Vec<u32>>,
    parent: Option<NodeId>,
}

impl TreeNode {
    pub fn loc(&self) -> Location {
        self.loc
    }

    pub fn remaining_budget(&self) -> f64 {
        self.remaining_budget
    }

    pub fn reward(&self) -> f64 {
        self.reward
    }

    pub fn visits(&self) -> u32 {
        self.visits
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn children(&self) -> &[NodeId] {
        &self.children
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    /// Admissible children not yet added, if the node has been expanded.
    pub fn untried_count(&self) -> Option<usize> {
        self.untried.as_ref().map(Vec::len)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub iterations: usize,
    /// Iterations whose selected path never left the root.
    pub root_only_iterations: usize,
    /// Descents into a tried child while the parent still had untried ones.
    pub exploration_violations: usize,
}

/// One planning call's tree. Discarded after the call.
#[derive(Clone, Debug)]
pub struct SearchTree {
    nodes: Vec<TreeNode>,
    table: SlotTable,
    final_loc: Location,
    params: PlannerParams,
    stats: SearchStats,
    consumed: Vec<bool>,
    scratch: Vec<(u64, u32)>,
    moves: Vec<u32>,
}

impl SearchTree {
    pub fn new(ctx: &PlanningContext) -> Self {
        let table = SlotTable::new(ctx);
        let root = TreeNode {
            loc: ctx.current,
            slot: table.root_slot,
            remaining_budget: ctx.remaining_budget,
            reward: 0.0,
            visits: 0,
            value: 0.0,
            children: Vec::new(),
            untried: None,
            parent: None,
        };
        let slots = table.locs.len();
        SearchTree {
            nodes: vec![root],
            table,
            final_loc: ctx.final_loc,
            params: ctx.params,
            stats: SearchStats::default(),
            consumed: vec![false; slots],
            scratch: Vec::with_capacity(slots),
            moves: Vec::with_capacity(ctx.params.branching + 1),
        }
    }

    pub const ROOT: NodeId = 0;

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn stats(&self) -> SearchStats {
        self.stats
    }

    /// Locations consumed on the root-to-`id` path, root excluded.
    pub fn visited_along_path(&self, id: NodeId) -> LocationSet {
        let mut path = Vec::new();
        let mut cur = Some(id);
        while let Some(n) = cur {
            if n != Self::ROOT {
                path.push(self.nodes[n].loc);
            }
            cur = self.nodes[n].parent;
        }
        path.into_iter().rev().collect()
    }

    fn is_terminal(&self, id: NodeId) -> bool {
        self.nodes[id].loc == self.final_loc
    }

    fn mark_path(&mut self, id: NodeId) {
        self.consumed.iter_mut().for_each(|c| *c = false);
        let mut cur = Some(id);
        while let Some(n) = cur {
            if n != Self::ROOT {
                self.consumed[self.nodes[n].slot as usize] = true;
            }
            cur = self.nodes[n].parent;
        }
    }

    /// Descends by UCB until a node that is unexpanded, still has untried
    /// admissible children, or has no children at all.
    pub fn select(&mut self) -> Vec<NodeId> {
        let c = self.params.exploration;
        let mut path = vec![Self::ROOT];
        let mut cur = Self::ROOT;
        loop {
            let node = &self.nodes[cur];
            if self.is_terminal(cur) || node.children.is_empty() {
                break;
            }
            match &node.untried {
                Some(u) if u.is_empty() => {}
                _ => break,
            }
            let t = node.visits;
            let mut best = node.children[0];
            let mut best_score = f64::NEG_INFINITY;
            for &ch in &node.children {
                let n = &self.nodes[ch];
                let score = ucb(n.value, n.visits, t, c);
                if score > best_score {
                    best_score = score;
                    best = ch;
                }
            }
            if self.nodes[cur].untried.as_ref().is_some_and(|u| !u.is_empty()) {
                self.stats.exploration_violations += 1;
            }
            path.push(best);
            cur = best;
        }
        path
    }

    /// Adds one child under `leaf`, chosen uniformly among its untried
    /// admissible moves. Returns `None` at terminal or exhausted leaves.
    pub fn expand<R: Rng + ?Sized>(&mut self, leaf: NodeId, rng: &mut R) -> Option<NodeId> {
        if self.is_terminal(leaf) {
            return None;
        }
        if self.nodes[leaf].untried.is_none() {
            self.mark_path(leaf);
            let from = self.nodes[leaf].slot;
            let budget = self.nodes[leaf].remaining_budget;
            let mut moves = std::mem::take(&mut self.moves);
            self.table
                .children_map(from, &self.consumed, rng, &mut self.scratch, &mut moves);
            let untried: Vec<u32> = moves
                .iter()
                .copied()
                .filter(|&to| self.table.admissible(from, budget, to))
                .collect();
            self.moves = moves;
            self.nodes[leaf].untried = Some(untried);
        }

        let untried = self.nodes[leaf].untried.as_mut().expect("computed above");
        if untried.is_empty() {
            return None;
        }
        let pick = rng.random_range(0..untried.len());
        let to = untried.swap_remove(pick);

        let parent = &self.nodes[leaf];
        let from_loc = parent.loc;
        let to_loc = self.table.locs[to as usize];
        let spent = gen_cost(from_loc, to_loc, &self.table.cost, rng);
        let child = TreeNode {
            loc: to_loc,
            slot: to,
            remaining_budget: parent.remaining_budget - spent,
            reward: self.table.reward(parent.slot, to),
            visits: 0,
            value: 0.0,
            children: Vec::new(),
            untried: None,
            parent: Some(leaf),
        };
        let id = self.nodes.len();
        self.nodes.push(child);
        self.nodes[leaf].children.push(id);
        Some(id)
    }

    /// Discounted return of a random episode starting at `start`. The start
    /// node's own reward has weight 1 and the k-th later reward `discount^k`.
    pub fn rollout<R: Rng + ?Sized>(&mut self, start: NodeId, rng: &mut R) -> f64 {
        self.rollout_traced(start, rng, None)
    }

    pub(crate) fn rollout_traced<R: Rng + ?Sized>(
        &mut self,
        start: NodeId,
        rng: &mut R,
        mut trace: Option<&mut Vec<Location>>,
    ) -> f64 {
        let mut ret = self.nodes[start].reward;
        if self.is_terminal(start) {
            return ret;
        }
        self.mark_path(start);
        let mut cur = self.nodes[start].slot;
        let mut budget = self.nodes[start].remaining_budget;
        let mut weight = 1.0;
        let max_depth = self.table.n_base + 1;
        let mut moves = std::mem::take(&mut self.moves);
        for _ in 0..max_depth {
            self.table
                .children_map(cur, &self.consumed, rng, &mut self.scratch, &mut moves);
            moves.retain(|&to| self.table.admissible(cur, budget, to));
            if moves.is_empty() {
                break;
            }
            let to = moves[rng.random_range(0..moves.len())];
            budget -= gen_cost(
                self.table.locs[cur as usize],
                self.table.locs[to as usize],
                &self.table.cost,
                rng,
            );
            weight *= self.params.discount;
            ret += weight * self.table.reward(cur, to);
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.table.locs[to as usize]);
            }
            if to == self.table.final_slot {
                break;
            }
            self.consumed[to as usize] = true;
            cur = to;
        }
        self.moves = moves;
        ret
    }

    /// Updates visit counts and running-mean values along `path`.
    ///
    /// `leaf_return` is the return seen from the last node. Each ancestor is
    /// credited with its own reward plus the discounted return of its child
    /// on the path, so a node's value estimates the return of the move that
    /// created it.
    pub fn backup(&mut self, path: &[NodeId], leaf_return: f64) {
        let discount = self.params.discount;
        let mut ret = leaf_return;
        for (i, &id) in path.iter().rev().enumerate() {
            let node = &mut self.nodes[id];
            if i > 0 {
                ret = node.reward + discount * ret;
            }
            node.visits += 1;
            node.value += (ret - node.value) / node.visits as f64;
        }
    }

    /// One select/expand/rollout/backup round.
    pub fn iterate<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut path = self.select();
        let leaf = *path.last().expect("path starts at the root");
        if let Some(child) = self.expand(leaf, rng) {
            path.push(child);
        }
        let last = *path.last().expect("nonempty");
        let ret = self.rollout(last, rng);
        self.backup(&path, ret);
        self.stats.iterations += 1;
        if path.len() == 1 {
            self.stats.root_only_iterations += 1;
        }
    }

    /// Most-visited root child; ties go to the earliest child.
    pub fn best_root_child(&self) -> Option<Location> {
        let root = &self.nodes[Self::ROOT];
        let mut best: Option<NodeId> = None;
        for &ch in &root.children {
            if best.is_none_or(|b| self.nodes[ch].visits > self.nodes[b].visits) {
                best = Some(ch);
            }
        }
        best.map(|b| self.nodes[b].loc)
    }

    /// Counts nodes that still have untried children yet were passed
    /// through more than once. Zero whenever untried children are always
    /// expanded before any sibling is revisited.
    pub fn count_premature_descents(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.untried.as_ref().is_some_and(|u| !u.is_empty()))
            .map(|n| {
                n.children
                    .iter()
                    .filter(|&&c| self.nodes[c].visits > 1)
                    .count()
            })
            .sum()
    }
}

/// Builds a tree for `ctx` and returns it with the chosen next location.
pub fn plan_with_tree<R: Rng + ?Sized>(ctx: &PlanningContext, rng: &mut R) -> (Location, SearchTree) {
    let mut tree = SearchTree::new(ctx);
    if ctx.current == ctx.final_loc {
        return (ctx.final_loc, tree);
    }
    for _ in 0..ctx.params.iterations {
        tree.iterate(rng);
    }
    let choice = tree.best_root_child().unwrap_or(ctx.final_loc);
    (choice, tree)
}

/// Next location to visit. Falls back to the final location when the root
/// has no admissible move.
pub fn plan_next<R: Rng + ?Sized>(ctx: &PlanningContext, rng: &mut R) -> Location {
    plan_with_tree(ctx, rng).0
}

/// Children map of `from` given the locations already consumed on the path.
pub fn children_map<R: Rng + ?Sized>(
    ctx: &PlanningContext,
    from: Location,
    consumed: &LocationSet,
    rng: &mut R,
) -> Vec<Location> {
    let probe = PlanningContext {
        current: from,
        ..ctx.clone()
    };
    let table = SlotTable::new(&probe);
    let mask: Vec<bool> = table.locs.iter().map(|l| consumed.contains(l)).collect();
    let mut scratch = Vec::new();
    let mut out = Vec::new();
    table.children_map(table.root_slot, &mask, rng, &mut scratch, &mut out);
    out.into_iter().map(|s| table.locs[s as usize]).collect()
}
