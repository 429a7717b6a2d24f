use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{
    solve_bounded, Branching, LpData, LpSolution, LpStatus, NodeOrder, Solution, SolveStats, SolveStatus, SolverError,
    SolverOptions,
};
use crate::milp::MilpModel;

struct Node {
    bound: f64,
    seq: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    lp: LpSolution,
}

// min-heap on bound, then creation order
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

enum Frontier {
    Heap(BinaryHeap<Node>),
    Stack(Vec<Node>),
}

impl Frontier {
    fn push(&mut self, node: Node) {
        match self {
            Frontier::Heap(h) => h.push(node),
            Frontier::Stack(s) => s.push(node),
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            Frontier::Heap(h) => h.pop(),
            Frontier::Stack(s) => s.pop(),
        }
    }

    fn min_bound(&self) -> Option<f64> {
        match self {
            Frontier::Heap(h) => h.peek().map(|n| n.bound),
            Frontier::Stack(s) => s.iter().map(|n| n.bound).min_by(f64::total_cmp),
        }
    }
}

/// Branch-and-bound over the binary columns of `model`.
///
/// Deterministic for fixed options: ties in branching go to the lowest
/// column index and ties in node selection to the oldest node.
pub fn solve_milp(model: &MilpModel, opts: &SolverOptions) -> Result<Solution, SolverError> {
    let data = LpData::from_model(model);
    let lp_opts = opts.lp_options();
    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_binary())
        .map(|(j, _)| j)
        .collect();

    let mut stats = SolveStats::default();
    let root = solve_bounded(&data, &data.lower, &data.upper, &lp_opts)?;
    stats.nodes = 1;
    stats.pivots = root.pivots;
    match root.status {
        LpStatus::Infeasible => {
            stats.best_bound = f64::INFINITY;
            return Ok(Solution::without_incumbent(SolveStatus::Infeasible, data.n, stats));
        }
        LpStatus::Unbounded => {
            stats.best_bound = f64::NEG_INFINITY;
            return Ok(Solution::without_incumbent(SolveStatus::Unbounded, data.n, stats));
        }
        LpStatus::Optimal => {}
    }

    let mut frontier = match opts.node_order {
        NodeOrder::BestBound => Frontier::Heap(BinaryHeap::new()),
        NodeOrder::DepthFirst => Frontier::Stack(Vec::new()),
    };
    let mut seq = 0u64;
    frontier.push(Node {
        bound: root.objective,
        seq,
        lower: data.lower.clone(),
        upper: data.upper.clone(),
        lp: root,
    });

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut hit_limit = false;

    while let Some(node) = frontier.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - opts.optimality_gap {
                continue;
            }
        }

        let branch_col = select_branch(&binaries, &node.lp.values, opts);
        let Some(col) = branch_col else {
            // integral: re-solve with binaries pinned for clean continuous values
            let mut lo = node.lower.clone();
            let mut up = node.upper.clone();
            for &j in &binaries {
                let v = node.lp.values[j].round();
                lo[j] = v;
                up[j] = v;
            }
            let polished = solve_bounded(&data, &lo, &up, &lp_opts)?;
            stats.pivots += polished.pivots;
            let (obj, values) = if polished.status == LpStatus::Optimal {
                (polished.objective, polished.values)
            } else {
                let mut v = node.lp.values.clone();
                for &j in &binaries {
                    v[j] = v[j].round();
                }
                (model.objective_value(&v), v)
            };
            if incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
                incumbent = Some((obj, values));
            }
            continue;
        };

        if stats.nodes + 2 > opts.node_limit {
            frontier.push(node);
            hit_limit = true;
            break;
        }

        // up branch explored first on ties: popped first from the heap by
        // seq, and from the stack by being pushed last
        let order = match opts.node_order {
            NodeOrder::BestBound => [1.0, 0.0],
            NodeOrder::DepthFirst => [0.0, 1.0],
        };
        for fixed in order {
            let mut lower = node.lower.clone();
            let mut upper = node.upper.clone();
            lower[col] = fixed;
            upper[col] = fixed;
            let lp = solve_bounded(&data, &lower, &upper, &lp_opts)?;
            stats.nodes += 1;
            stats.pivots += lp.pivots;
            if lp.status != LpStatus::Optimal {
                continue;
            }
            if let Some((best, _)) = &incumbent {
                if lp.objective >= best - opts.optimality_gap {
                    continue;
                }
            }
            seq += 1;
            frontier.push(Node {
                bound: lp.objective.max(node.bound),
                seq,
                lower,
                upper,
                lp,
            });
        }
    }

    let open_bound = frontier.min_bound();
    Ok(match incumbent {
        Some((objective, values)) => {
            stats.best_bound = open_bound.map_or(objective, |b| b.min(objective));
            Solution {
                status: if hit_limit {
                    SolveStatus::NodeLimit
                } else {
                    SolveStatus::Optimal
                },
                values,
                objective,
                stats,
            }
        }
        None => {
            stats.best_bound = open_bound.unwrap_or(f64::INFINITY);
            let status = if hit_limit {
                SolveStatus::NodeLimit
            } else {
                SolveStatus::Infeasible
            };
            Solution::without_incumbent(status, data.n, stats)
        }
    })
}

fn select_branch(binaries: &[usize], values: &[f64], opts: &SolverOptions) -> Option<usize> {
    let fractional = binaries.iter().copied().filter_map(|j| {
        let v = values[j];
        let frac = (v - v.floor()).min(v.ceil() - v);
        (frac > opts.integrality_tol).then_some((j, frac))
    });
    match opts.branching {
        Branching::LowestIndex => fractional.map(|(j, _)| j).next(),
        Branching::MostFractional => fractional
            .fold(None, |best: Option<(usize, f64)>, (j, frac)| match best {
                Some((_, f)) if f >= frac => best,
                _ => Some((j, frac)),
            })
            .map(|(j, _)| j),
    }
}
