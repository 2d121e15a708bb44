//! Warning search: a forward-simulated decision tree over (scenario state,
//! driver policy) pairs with Bellman back-propagation.
//!
//! Warnings are optimized only along the spine where the driver is still
//! blind; every branch where the driver is reacting (safe, brake, or a
//! delayed switch) is rolled out to the horizon under no further warnings.
//! That keeps the frontier linear in the horizon instead of exponential.
//! When every delayed reaction from a spine state already ends in a
//! collision while an immediate forced brake does not, the take-over is
//! committed right there rather than at the reward-optimal latest step.

use crate::belief::{extract_estimate, Belief};
use crate::config::EngineConfig;
use crate::policy::{advance_one, canonicalize, policy_action, DriverModel, PolicyState};
use crate::reward::{step_outcome, warning_cost, COLLISION_REWARD};
use crate::sim::advance_scenario;
use crate::state::{ScenarioState, Warning};

/// Planner context: full engine configuration plus the derived driver model.
/// The surrounding-agent prediction is the same scripted model the
/// simulator runs, so the planner sees the hazard maneuver exactly.
#[derive(Debug, Clone, Copy)]
pub struct WorldModel<'a> {
    pub cfg: &'a EngineConfig,
    pub model: DriverModel,
}

impl<'a> WorldModel<'a> {
    pub fn new(cfg: &'a EngineConfig) -> Self {
        WorldModel {
            cfg,
            model: cfg.driver_model(),
        }
    }
}

/// Edge to a child reached by one post-warning policy. `child` is `None`
/// past a collision or where the spine was cut by a forced take-over; such
/// futures back up as the collision sentinel.
#[derive(Debug, Clone)]
pub struct Edge {
    pub policy_aw: PolicyState,
    pub reward: f64,
    pub collided: bool,
    /// The subtree below this edge ends in a collision somewhere.
    pub future_collides: bool,
    pub child: Option<usize>,
}

/// One tree node: an MDP state (scenario state plus pre-warning policy).
#[derive(Debug, Clone)]
pub struct SearchNode {
    pub state: ScenarioState,
    pub policy_bw: PolicyState,
    pub depth: usize,
    pub parent: Option<usize>,
    pub edges: Vec<Edge>,
    /// Q-value per warning (severity order); only on decision nodes.
    pub q: Option<[f64; 5]>,
    pub value: f64,
    pub best_warning: Warning,
    /// Node lies on a rolled-out branch with the warning fixed to none.
    pub rollout: bool,
    /// Every delayed reaction from here collides while an immediate brake
    /// does not; the take-over is committed at this depth.
    pub forced_take_over: bool,
}

/// Arena-allocated search tree. Children always follow their parents in the
/// arena, so a reverse scan visits children first.
#[derive(Debug, Clone)]
pub struct SearchTree {
    pub nodes: Vec<SearchNode>,
    pub root: usize,
    /// Spine node indices, root first.
    pub spine: Vec<usize>,
}

impl SearchTree {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root_q(&self) -> [f64; 5] {
        self.nodes[self.root].q.expect("root is a decision node")
    }

    /// Deepest spine node (the all-blind leaf when nothing cut the spine).
    pub fn spine_leaf(&self) -> usize {
        *self.spine.last().expect("spine contains at least the root")
    }

    /// One node per line: depth, policy, value, best warning.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                n.depth, n.policy_bw, n.value, n.best_warning
            ));
        }
        out
    }
}

fn blank_node(
    state: ScenarioState,
    policy_bw: PolicyState,
    depth: usize,
    parent: Option<usize>,
    rollout: bool,
) -> SearchNode {
    SearchNode {
        state,
        policy_bw,
        depth,
        parent,
        edges: Vec::new(),
        q: None,
        value: 0.0,
        best_warning: Warning::NoWarning,
        rollout,
        forced_take_over: false,
    }
}

/// Step a state forward under a policy's most probable action.
fn step_mean(
    state: &ScenarioState,
    pi: PolicyState,
    world: &WorldModel,
) -> (ScenarioState, f64, bool) {
    let mean = policy_action(pi, state, &world.model).mean;
    let next = advance_scenario(state, &mean, world.cfg);
    let (reward, collided) = step_outcome(state, &next, &world.cfg.rewards, &world.cfg.geometry);
    (next, reward, collided)
}

/// Does driving this policy from here to the horizon hit a collision?
fn rollout_collides(
    state: &ScenarioState,
    mut pi: PolicyState,
    depth: usize,
    world: &WorldModel,
) -> bool {
    let mut state = state.clone();
    for _ in depth..world.cfg.planner.horizon {
        let (next, _, collided) = step_mean(&state, pi, world);
        if collided {
            return true;
        }
        state = next;
        pi = advance_one(pi, &world.model.driver);
    }
    false
}

/// Forward simulation: build the spine and its rolled-out branches.
pub fn forward_simulation(
    state0: &ScenarioState,
    pi_hat: PolicyState,
    world: &WorldModel,
) -> SearchTree {
    let horizon = world.cfg.planner.horizon;
    let pi_root = canonicalize(pi_hat, &world.model.driver);
    let mut tree = SearchTree {
        nodes: vec![blank_node(state0.clone(), pi_root, 0, None, false)],
        root: 0,
        spine: vec![0],
    };

    let mut current = 0usize;
    loop {
        let depth = tree.nodes[current].depth;
        if depth >= horizon {
            break;
        }
        let pi_bw = tree.nodes[current].policy_bw;
        let state = tree.nodes[current].state.clone();

        // outcomes reachable under any warning; the blind continuation (if
        // any) is the spine, everything else rolls out with no warnings
        let outcomes = world.cfg.transition.reachable(pi_bw);
        let non_to_outcomes: Vec<PolicyState> = {
            let mut set = std::collections::BTreeSet::new();
            for w in Warning::ALL {
                if w == Warning::TakeOver {
                    continue;
                }
                for (pi, p) in world.cfg.transition.query(pi_bw, w) {
                    if p > 0.0 {
                        set.insert(pi);
                    }
                }
            }
            set.into_iter().collect()
        };
        let take_over_outcome = world.cfg.transition.query(pi_bw, Warning::TakeOver)[0].0;

        let mut spine_candidate: Option<(ScenarioState, f64, bool)> = None;
        for pi_aw in outcomes {
            let (next, reward, collided) = step_mean(&state, pi_aw, world);
            if pi_bw.is_blind() && pi_aw.is_blind() {
                // spine continuation, attached after the forced check
                spine_candidate = Some((next, reward, collided));
                continue;
            }
            let child_bw = advance_one(pi_aw, &world.model.driver);
            let (child, future_collides) = if collided {
                (None, true)
            } else {
                build_chain(&mut tree, next, child_bw, depth + 1, current, world)
            };
            tree.nodes[current].edges.push(Edge {
                policy_aw: pi_aw,
                reward: if collided { COLLISION_REWARD } else { reward },
                collided,
                future_collides,
                child,
            });
        }

        // feasibility: every outcome still reachable without a take-over
        // collides, while the forced brake stays clean
        let blind_future_collides = spine_candidate
            .as_ref()
            .map(|(next, _, collided)| {
                *collided || rollout_collides(next, PolicyState::blind(), depth + 1, world)
            })
            .unwrap_or(false);
        let all_non_to_collide = !non_to_outcomes.is_empty()
            && non_to_outcomes.iter().all(|pi| {
                if pi.is_blind() {
                    blind_future_collides
                } else {
                    tree.nodes[current]
                        .edges
                        .iter()
                        .find(|e| e.policy_aw == *pi)
                        .map(|e| e.future_collides)
                        .unwrap_or(true)
                }
            });
        let take_over_clean = tree.nodes[current]
            .edges
            .iter()
            .find(|e| e.policy_aw == take_over_outcome)
            .map(|e| !e.future_collides)
            .unwrap_or(false);
        let forced =
            world.cfg.planner.early_take_over && all_non_to_collide && take_over_clean;
        tree.nodes[current].forced_take_over = forced;

        let Some((next, reward, collided)) = spine_candidate else {
            break; // non-blind root: single decision node, branches only
        };
        if forced || collided {
            // spine ends here; the blind continuation backs up as unsafe
            tree.nodes[current].edges.push(Edge {
                policy_aw: PolicyState::blind(),
                reward: if collided { COLLISION_REWARD } else { reward },
                collided,
                future_collides: true,
                child: None,
            });
            tree.nodes[current].edges.sort_by_key(|e| e.policy_aw);
            break;
        }
        let child = tree.nodes.len();
        tree.nodes
            .push(blank_node(next, PolicyState::blind(), depth + 1, Some(current), false));
        tree.nodes[current].edges.push(Edge {
            policy_aw: PolicyState::blind(),
            reward,
            collided: false,
            future_collides: blind_future_collides,
            child: Some(child),
        });
        tree.nodes[current].edges.sort_by_key(|e| e.policy_aw);
        tree.spine.push(child);
        current = child;
    }
    tree.nodes[current].edges.sort_by_key(|e| e.policy_aw);
    tree
}

/// Roll a branch out to the horizon under no further warnings; the policy
/// evolves only through its own timers. Returns the branch head and whether
/// the branch collides anywhere.
fn build_chain(
    tree: &mut SearchTree,
    state: ScenarioState,
    pi_bw: PolicyState,
    depth: usize,
    parent: usize,
    world: &WorldModel,
) -> (Option<usize>, bool) {
    let horizon = world.cfg.planner.horizon;
    let head = tree.nodes.len();
    tree.nodes
        .push(blank_node(state, pi_bw, depth, Some(parent), true));

    let mut current = head;
    let mut collided_anywhere = false;
    while tree.nodes[current].depth < horizon {
        let pi = tree.nodes[current].policy_bw;
        let state = tree.nodes[current].state.clone();
        let (next, reward, collided) = step_mean(&state, pi, world);
        if collided {
            tree.nodes[current].edges.push(Edge {
                policy_aw: pi,
                reward: COLLISION_REWARD,
                collided: true,
                future_collides: true,
                child: None,
            });
            collided_anywhere = true;
            break;
        }
        let child_bw = advance_one(pi, &world.model.driver);
        let child = tree.nodes.len();
        let child_depth = tree.nodes[current].depth + 1;
        tree.nodes
            .push(blank_node(next, child_bw, child_depth, Some(current), true));
        tree.nodes[current].edges.push(Edge {
            policy_aw: pi,
            reward,
            collided: false,
            future_collides: false,
            child: Some(child),
        });
        current = child;
    }
    (Some(head), collided_anywhere)
}

/// Value of an edge's future: immediate reward plus the discounted child
/// value, with missing or collided futures backing up as the sentinel.
fn edge_term(edge: &Edge, child_value: Option<f64>, gamma: f64) -> f64 {
    match (edge.reward == COLLISION_REWARD, child_value) {
        (true, _) | (false, None) => COLLISION_REWARD,
        (false, Some(v)) if v == COLLISION_REWARD => COLLISION_REWARD,
        (false, Some(v)) => edge.reward + gamma * v,
    }
}

/// Back-propagation: horizon values are zero; rolled-out nodes back up
/// their single continuation; decision nodes take the best warning, ties
/// broken toward the less severe one. Returns the spine warning sequence
/// padded with no-warnings to the horizon.
pub fn back_propagation(tree: &mut SearchTree, world: &WorldModel) -> Vec<Warning> {
    let gamma = world.cfg.rewards.gamma;
    for i in (0..tree.nodes.len()).rev() {
        if tree.nodes[i].edges.is_empty() {
            tree.nodes[i].value = 0.0;
            continue;
        }
        if tree.nodes[i].rollout {
            let edge = &tree.nodes[i].edges[0];
            let child_v = edge.child.map(|c| tree.nodes[c].value);
            tree.nodes[i].value = edge_term(edge, child_v, gamma);
            continue;
        }
        // decision node
        let pi_bw = tree.nodes[i].policy_bw;
        let mut q = [0.0f64; 5];
        for w in Warning::ALL {
            let mut acc = warning_cost(w, &world.cfg.rewards);
            for (pi_aw, p) in world.cfg.transition.query(pi_bw, w) {
                if p == 0.0 {
                    continue;
                }
                let edge = tree.nodes[i]
                    .edges
                    .iter()
                    .find(|e| e.policy_aw == pi_aw)
                    .expect("edge exists for every reachable outcome");
                let child_v = edge.child.map(|c| tree.nodes[c].value);
                let term = edge_term(edge, child_v, gamma);
                if term == COLLISION_REWARD {
                    acc = COLLISION_REWARD;
                    break;
                }
                acc += p * term;
            }
            q[w.severity()] = acc;
        }
        let mut best = Warning::NoWarning;
        let mut best_q = q[0];
        for w in Warning::ALL {
            if q[w.severity()] > best_q {
                best_q = q[w.severity()];
                best = w;
            }
        }
        tree.nodes[i].q = Some(q);
        tree.nodes[i].value = best_q;
        tree.nodes[i].best_warning = best;
        debug_assert!(tree.nodes[i].value == q.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }

    let horizon = world.cfg.planner.horizon;
    let mut warnings: Vec<Warning> = tree
        .spine
        .iter()
        .filter(|&&n| tree.nodes[n].depth < horizon)
        .map(|&n| tree.nodes[n].best_warning)
        .collect();
    warnings.resize(horizon, Warning::NoWarning);
    warnings
}

/// Result of one planning query.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub tree: SearchTree,
    /// Optimal warning sequence along the blind spine; only the first entry
    /// is executed under replanning.
    pub warnings: Vec<Warning>,
}

impl SearchResult {
    pub fn first(&self) -> Warning {
        self.warnings[0]
    }
}

/// Build the tree for an estimated driver policy and back-propagate.
pub fn search(state0: &ScenarioState, pi_hat: PolicyState, world: &WorldModel) -> SearchResult {
    let mut tree = forward_simulation(state0, pi_hat, world);
    let warnings = back_propagation(&mut tree, world);
    SearchResult { tree, warnings }
}

/// Warning selection planning for the thresholded point estimate.
pub fn select_warning_mdp(b: &Belief, state: &ScenarioState, world: &WorldModel) -> Warning {
    let pi_hat = extract_estimate(b, world.cfg.estimator.th_safety, &world.model.driver);
    search(state, pi_hat, world).first()
}

/// Warning selection maximizing the belief-weighted expected root Q-value.
/// Support below the cutoff is skipped and the rest renormalized.
pub fn select_warning_pomdp(b: &Belief, state: &ScenarioState, world: &WorldModel) -> Warning {
    let cutoff = world.cfg.planner.support_cutoff;
    let support: Vec<(PolicyState, f64)> = b
        .iter()
        .filter(|(_, &p)| p >= cutoff)
        .map(|(&pi, &p)| (pi, p))
        .collect();
    let total: f64 = support.iter().map(|(_, p)| p).sum();
    debug_assert!(total > 0.0);

    let mut expected = [0.0f64; 5];
    for (pi, p) in &support {
        let q = search(state, *pi, world).tree.root_q();
        let weight = p / total;
        for w in Warning::ALL {
            let term = q[w.severity()];
            if term == COLLISION_REWARD {
                expected[w.severity()] = COLLISION_REWARD;
            } else if expected[w.severity()] != COLLISION_REWARD {
                expected[w.severity()] += weight * term;
            }
        }
    }

    let mut best = Warning::NoWarning;
    let mut best_q = expected[0];
    for w in Warning::ALL {
        if expected[w.severity()] > best_q {
            best_q = expected[w.severity()];
            best = w;
        }
    }
    best
}

/// Node count of the tree an unsimplified expansion would build: every
/// (warning, transition outcome) pair spawns a child at every node. Used to
/// demonstrate the width reduction; never built, only counted.
pub fn unsimplified_node_count(
    pi: PolicyState,
    depth: usize,
    horizon: usize,
    world: &WorldModel,
) -> u64 {
    if depth >= horizon {
        return 1;
    }
    let mut count = 1u64;
    for w in Warning::ALL {
        for (pi_aw, p) in world.cfg.transition.query(pi, w) {
            if p > 0.0 {
                let child = advance_one(pi_aw, &world.model.driver);
                count += unsimplified_node_count(child, depth + 1, horizon, world);
            }
        }
    }
    count
}

/// Closed-form bound on the simplified tree size: the spine plus, per spine
/// node, one rolled-out branch per non-spine outcome.
pub fn simplified_node_bound(horizon: usize, max_outcomes: usize) -> usize {
    let h = horizon;
    (h + 1) + (max_outcomes - 1) * h * (h + 1) / 2
}
