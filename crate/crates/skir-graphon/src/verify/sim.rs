use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::VerifyError;
use crate::model::{self, Aggregates, BlockGraphon, GroupParams, Policy, StateId};
use crate::solver::{EquilibriumResult, FlowGrid, TimeGrid};

/// Simulation scheme for the finite-player jump process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMethod {
    /// Event-driven simulation; all rates are recomputed after every jump
    /// and at every grid node.
    ExactGillespie,
    /// Rates frozen over windows of length `tau`; per-class jump counts are
    /// drawn binomially so populations stay nonnegative.
    TauLeap,
}

/// Configuration of one finite-player simulation run.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub n_agents: usize,
    pub seed: u64,
    pub method: SimMethod,
    /// Window length for [`SimMethod::TauLeap`]; ignored otherwise.
    pub tau: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_agents: 1000,
            seed: 42,
            method: SimMethod::ExactGillespie,
            tau: 0.01,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), VerifyError> {
        if self.n_agents == 0 {
            return Err(VerifyError::InvalidSimConfig("n_agents = 0".into()));
        }
        if self.method == SimMethod::TauLeap && !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(VerifyError::InvalidSimConfig(format!(
                "tau = {} must be positive for tau-leaping",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Occupancy fractions and realized costs of one simulation run.
#[derive(Debug, Clone)]
pub struct SimResult {
    n_nodes: usize,
    n_blocks: usize,
    /// Fraction of the whole population in each (block, state), per node.
    /// Sums to one over all (block, state) pairs at every node.
    pub empirical_p: Vec<[f64; 4]>,
    /// Realized number of agents per block.
    pub block_counts: Vec<usize>,
    /// Block index of each agent.
    pub agent_block: Vec<u32>,
    /// Realized running-plus-terminal cost of each agent.
    pub per_agent_cost: Vec<f64>,
    /// Mean realized cost per block (`NaN` for empty blocks).
    pub mean_cost_per_block: Vec<f64>,
}

impl SimResult {
    /// Whole-population occupancy fractions of one block at one node.
    pub fn occupancy(&self, node: usize, block: usize) -> [f64; 4] {
        self.empirical_p[node * self.n_blocks + block]
    }

    /// Occupancy conditional on membership in `block` (comparable to the
    /// per-block mean-field distribution). `None` if the block is empty.
    pub fn conditional_occupancy(&self, node: usize, block: usize) -> Option<[f64; 4]> {
        let n_b = self.block_counts[block];
        if n_b == 0 {
            return None;
        }
        let share = n_b as f64 / self.agent_block.len() as f64;
        let raw = self.occupancy(node, block);
        Some([raw[0] / share, raw[1] / share, raw[2] / share, raw[3] / share])
    }

    /// Largest deviation of the conditional occupancy from a mean-field
    /// flow, over all nodes, blocks, and states. Empty blocks are skipped.
    pub fn max_conditional_deviation(&self, flows: &FlowGrid) -> f64 {
        let mut worst = 0.0f64;
        for node in 0..self.n_nodes {
            for block in 0..self.n_blocks {
                if let Some(cond) = self.conditional_occupancy(node, block) {
                    let p = flows.p_node(node)[block];
                    for e in 0..4 {
                        worst = worst.max((cond[e] - p[e]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Mean, standard error, and size of one block's realized costs.
    pub fn block_cost_stats(&self, block: usize) -> Option<(f64, f64, usize)> {
        let costs: Vec<f64> = self
            .agent_block
            .iter()
            .zip(self.per_agent_cost.iter())
            .filter(|(b, _)| **b as usize == block)
            .map(|(_, c)| *c)
            .collect();
        let n = costs.len();
        if n == 0 {
            return None;
        }
        let mean = costs.iter().sum::<f64>() / n as f64;
        let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n as f64;
        Some((mean, (var / n as f64).sqrt(), n))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Substream seed for one agent; block assignment and the initial state are
/// drawn from a per-agent generator so they do not depend on scheduling.
fn agent_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1)))
}

fn sample_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last_positive = i;
            if target < *w {
                return i;
            }
            target -= *w;
        }
    }
    last_positive
}

/// Agent bookkeeping grouped by (block, state) class. All agents in a class
/// share the same control and jump rates, so class tallies drive both the
/// aggregates and the event selection.
struct Population {
    state: Vec<u8>,
    block: Vec<u32>,
    members: Vec<Vec<u32>>,
    pos: Vec<u32>,
    counts: Vec<[usize; 4]>,
}

impl Population {
    fn class(block: usize, state: usize) -> usize {
        block * 4 + state
    }

    fn new(n_blocks: usize, block: Vec<u32>, state: Vec<u8>) -> Self {
        let n = block.len();
        let mut members = vec![Vec::new(); n_blocks * 4];
        let mut pos = vec![0u32; n];
        let mut counts = vec![[0usize; 4]; n_blocks];
        for agent in 0..n {
            let class = Self::class(block[agent] as usize, state[agent] as usize);
            pos[agent] = members[class].len() as u32;
            members[class].push(agent as u32);
            counts[block[agent] as usize][state[agent] as usize] += 1;
        }
        Population {
            state,
            block,
            members,
            pos,
            counts,
        }
    }

    /// Removes one agent from its class without assigning a new one.
    fn detach(&mut self, agent: u32) {
        let b = self.block[agent as usize] as usize;
        let e = self.state[agent as usize] as usize;
        let class = Self::class(b, e);
        let at = self.pos[agent as usize] as usize;
        let list = &mut self.members[class];
        list.swap_remove(at);
        if at < list.len() {
            let moved = list[at];
            self.pos[moved as usize] = at as u32;
        }
        self.counts[b][e] -= 1;
    }

    /// Puts a detached agent into a new state.
    fn attach(&mut self, agent: u32, new_state: usize) {
        let b = self.block[agent as usize] as usize;
        let class = Self::class(b, new_state);
        self.pos[agent as usize] = self.members[class].len() as u32;
        self.members[class].push(agent);
        self.state[agent as usize] = new_state as u8;
        self.counts[b][new_state] += 1;
    }

    fn random_member(&self, rng: &mut ChaCha8Rng, block: usize, state: usize) -> u32 {
        let list = &self.members[Self::class(block, state)];
        list[rng.random_range(0..list.len())]
    }
}

/// Cumulative running-cost integrals per (block, state), so each agent's
/// realized cost is a sum of table lookups at its transition times.
struct CostLedger {
    dt: f64,
    n_blocks: usize,
    f_nodes: Vec<[f64; 4]>,
    f_cum: Vec<[f64; 4]>,
    cost: Vec<f64>,
    t_entry: Vec<f64>,
}

impl CostLedger {
    fn new(
        grid: &TimeGrid,
        flows: &FlowGrid,
        params: &[GroupParams],
        policy: &Policy,
        n_agents: usize,
    ) -> Self {
        let nb = params.len();
        let n_nodes = grid.n_nodes();
        let mut f_nodes = vec![[0.0; 4]; n_nodes * nb];
        for node in 0..n_nodes {
            let t = grid.node_time(node);
            for b in 0..nb {
                let phi = flows.phi[node * nb + b];
                for e in StateId::ALL {
                    f_nodes[node * nb + b][e.index()] =
                        model::running_cost(t, e, phi[e.index()], policy);
                }
            }
        }
        let mut f_cum = vec![[0.0; 4]; n_nodes * nb];
        let dt = grid.dt();
        for node in 1..n_nodes {
            for b in 0..nb {
                for e in 0..4 {
                    f_cum[node * nb + b][e] = f_cum[(node - 1) * nb + b][e]
                        + 0.5 * dt * (f_nodes[(node - 1) * nb + b][e] + f_nodes[node * nb + b][e]);
                }
            }
        }
        CostLedger {
            dt,
            n_blocks: nb,
            f_nodes,
            f_cum,
            cost: vec![0.0; n_agents],
            t_entry: vec![0.0; n_agents],
        }
    }

    /// Integral of the running cost from 0 to `t` for class (block, e).
    fn cum_at(&self, grid: &TimeGrid, block: usize, e: usize, t: f64) -> f64 {
        let (i, frac) = grid.locate(t);
        let lo = self.f_nodes[i * self.n_blocks + block][e];
        let hi = self.f_nodes[(i + 1) * self.n_blocks + block][e];
        self.f_cum[i * self.n_blocks + block][e]
            + self.dt * frac * (lo + 0.5 * frac * (hi - lo))
    }

    fn on_transition(&mut self, grid: &TimeGrid, agent: u32, block: usize, e_from: usize, t: f64) {
        let a = agent as usize;
        self.cost[a] += self.cum_at(grid, block, e_from, t)
            - self.cum_at(grid, block, e_from, self.t_entry[a]);
        self.t_entry[a] = t;
    }

    fn close_out(&mut self, grid: &TimeGrid, pop: &Population, params: &[GroupParams]) {
        let t_end = grid.t_horizon();
        for agent in 0..self.cost.len() {
            let b = pop.block[agent] as usize;
            let e = pop.state[agent] as usize;
            self.cost[agent] +=
                self.cum_at(grid, b, e, t_end) - self.cum_at(grid, b, e, self.t_entry[agent]);
            self.cost[agent] +=
                model::terminal_cost(StateId::from_index(e).unwrap(), &params[b]);
        }
    }
}

/// Control of one block-state class at an arbitrary time, interpolated
/// linearly between grid nodes.
fn phi_at(flows: &FlowGrid, grid: &TimeGrid, t: f64, block: usize, e: usize) -> f64 {
    let nb = flows.n_blocks();
    let (i, frac) = grid.locate(t);
    let lo = flows.phi[i * nb + block][e];
    let hi = flows.phi[(i + 1) * nb + block][e];
    lo + frac * (hi - lo)
}

/// Finite-population aggregates at time `t`, built from the class tallies
/// with the `1/N` normalization of the finite-player dynamics (the jumping
/// agent's own term included).
fn finite_aggregates(
    graphon: &BlockGraphon,
    pop: &Population,
    flows: &FlowGrid,
    grid: &TimeGrid,
    t: f64,
    n_agents: usize,
    out: &mut [Aggregates],
) {
    let nb = graphon.n_blocks();
    let k_idx = StateId::K.index();
    let i_idx = StateId::I.index();
    let mut comm_k = vec![0.0; nb];
    let mut comm_i = vec![0.0; nb];
    for l in 0..nb {
        comm_k[l] = pop.counts[l][k_idx] as f64 * phi_at(flows, grid, t, l, k_idx);
        comm_i[l] = pop.counts[l][i_idx] as f64 * phi_at(flows, grid, t, l, i_idx);
    }
    let inv_n = 1.0 / n_agents as f64;
    for (b, agg) in out.iter_mut().enumerate() {
        let row = graphon.row(b);
        let mut z_k = 0.0;
        let mut z_i = 0.0;
        for l in 0..nb {
            z_k += row[l] * comm_k[l];
            z_i += row[l] * comm_i[l];
        }
        *agg = Aggregates::new(z_k * inv_n, z_i * inv_n);
    }
}

/// Per-agent off-diagonal jump rates of one class.
fn class_rates(
    params: &GroupParams,
    e: usize,
    alpha: f64,
    z: Aggregates,
) -> ([f64; 4], f64) {
    let row = model::q_row(
        params,
        StateId::from_index(e).unwrap(),
        alpha,
        z,
    );
    let mut rates = row;
    rates[e] = 0.0;
    (rates, -row[e])
}

/// Simulates the N-player jump process with every agent playing the
/// equilibrium feedback control of its block, and accumulates realized
/// costs. Deterministic for a fixed seed and method: agent setup uses
/// per-agent substreams derived from `(seed, index)` via splitmix64, event
/// randomness a dedicated stream.
pub fn simulate_finite_player(
    eq: &EquilibriumResult,
    grid: &TimeGrid,
    graphon: &BlockGraphon,
    params: &[GroupParams],
    policy: &Policy,
    sim: &SimConfig,
) -> Result<SimResult, VerifyError> {
    sim.validate()?;
    if !eq.converged {
        return Err(VerifyError::Precondition(
            "simulation requires a converged equilibrium".into(),
        ));
    }
    let nb = graphon.n_blocks();
    if params.len() != nb || eq.flows.n_blocks() != nb || eq.flows.n_nodes() != grid.n_nodes() {
        return Err(VerifyError::Precondition(
            "equilibrium, graphon, and parameters disagree on shape".into(),
        ));
    }

    let n = sim.n_agents;
    let mut block = vec![0u32; n];
    let mut state = vec![0u8; n];
    for agent in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(agent_seed(sim.seed, agent as u64));
        let b = sample_index(&mut rng, graphon.masses());
        block[agent] = b as u32;
        state[agent] = sample_index(&mut rng, &params[b].p0) as u8;
    }
    let mut pop = Population::new(nb, block, state);
    let mut ledger = CostLedger::new(grid, &eq.flows, params, policy, n);
    let mut rng = ChaCha8Rng::seed_from_u64(agent_seed(sim.seed, u64::MAX));

    let n_nodes = grid.n_nodes();
    let mut empirical = vec![[0.0; 4]; n_nodes * nb];
    let record = |empirical: &mut Vec<[f64; 4]>, node: usize, pop: &Population| {
        for b in 0..nb {
            for e in 0..4 {
                empirical[node * nb + b][e] = pop.counts[b][e] as f64 / n as f64;
            }
        }
    };
    record(&mut empirical, 0, &pop);

    match sim.method {
        SimMethod::ExactGillespie => run_gillespie(
            eq, grid, graphon, params, sim, &mut pop, &mut ledger, &mut rng, &mut empirical,
            &record,
        ),
        SimMethod::TauLeap => run_tau_leap(
            eq, grid, graphon, params, sim, &mut pop, &mut ledger, &mut rng, &mut empirical,
            &record,
        ),
    }

    ledger.close_out(grid, &pop, params);

    let mut block_counts = vec![0usize; nb];
    for b in pop.block.iter() {
        block_counts[*b as usize] += 1;
    }
    let mut mean_cost = vec![f64::NAN; nb];
    for b in 0..nb {
        if block_counts[b] > 0 {
            let sum: f64 = pop
                .block
                .iter()
                .zip(ledger.cost.iter())
                .filter(|(bb, _)| **bb as usize == b)
                .map(|(_, c)| *c)
                .sum();
            mean_cost[b] = sum / block_counts[b] as f64;
        }
    }

    Ok(SimResult {
        n_nodes,
        n_blocks: nb,
        empirical_p: empirical,
        block_counts,
        agent_block: pop.block,
        per_agent_cost: ledger.cost,
        mean_cost_per_block: mean_cost,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_gillespie(
    eq: &EquilibriumResult,
    grid: &TimeGrid,
    graphon: &BlockGraphon,
    params: &[GroupParams],
    sim: &SimConfig,
    pop: &mut Population,
    ledger: &mut CostLedger,
    rng: &mut ChaCha8Rng,
    empirical: &mut Vec<[f64; 4]>,
    record: &impl Fn(&mut Vec<[f64; 4]>, usize, &Population),
) {
    let nb = graphon.n_blocks();
    let mut agg = vec![Aggregates::ZERO; nb];
    let mut class_total = vec![[0.0f64; 4]; nb];
    let mut t = 0.0;
    for node in 0..grid.n_steps() {
        let t_node_end = grid.node_time(node + 1);
        loop {
            finite_aggregates(graphon, pop, &eq.flows, grid, t, sim.n_agents, &mut agg);
            for row in class_total.iter_mut() {
                *row = [0.0; 4];
            }
            let mut grand_total = 0.0;
            for b in 0..nb {
                for e in 0..4 {
                    let count = pop.counts[b][e];
                    if count == 0 {
                        continue;
                    }
                    let alpha = phi_at(&eq.flows, grid, t, b, e);
                    let (_, outflow) = class_rates(&params[b], e, alpha, agg[b]);
                    let total = count as f64 * outflow;
                    class_total[b][e] = total;
                    grand_total += total;
                }
            }
            if grand_total <= 0.0 {
                break;
            }
            let wait = -(1.0 - rng.random::<f64>()).ln() / grand_total;
            if t + wait >= t_node_end {
                break;
            }
            t += wait;

            // class, then destination channel, then a uniform member
            let mut target = rng.random::<f64>() * grand_total;
            let mut picked = (0usize, 0usize);
            'outer: for b in 0..nb {
                for e in 0..4 {
                    let w = class_total[b][e];
                    if w > 0.0 {
                        picked = (b, e);
                        if target < w {
                            break 'outer;
                        }
                        target -= w;
                    }
                }
            }
            let (b, e) = picked;
            let alpha = phi_at(&eq.flows, grid, t, b, e);
            let (rates, _) = class_rates(&params[b], e, alpha, agg[b]);
            let e_to = sample_index_f64(rng, &rates);
            let agent = pop.random_member(rng, b, e);
            ledger.on_transition(grid, agent, b, e, t);
            pop.detach(agent);
            pop.attach(agent, e_to);
        }
        t = t_node_end;
        record(empirical, node + 1, pop);
    }
}

#[allow(clippy::too_many_arguments)]
fn run_tau_leap(
    eq: &EquilibriumResult,
    grid: &TimeGrid,
    graphon: &BlockGraphon,
    params: &[GroupParams],
    sim: &SimConfig,
    pop: &mut Population,
    ledger: &mut CostLedger,
    rng: &mut ChaCha8Rng,
    empirical: &mut Vec<[f64; 4]>,
    record: &impl Fn(&mut Vec<[f64; 4]>, usize, &Population),
) {
    let nb = graphon.n_blocks();
    let mut agg = vec![Aggregates::ZERO; nb];
    let mut t = 0.0;
    let mut moves: Vec<(u32, usize, usize, usize)> = Vec::new();
    for node in 0..grid.n_steps() {
        let t_node_end = grid.node_time(node + 1);
        while t < t_node_end {
            let step_end = (t + sim.tau).min(t_node_end);
            let h = step_end - t;
            finite_aggregates(graphon, pop, &eq.flows, grid, t, sim.n_agents, &mut agg);
            moves.clear();
            for b in 0..nb {
                for e in 0..4 {
                    let count = pop.counts[b][e];
                    if count == 0 {
                        continue;
                    }
                    let alpha = phi_at(&eq.flows, grid, t, b, e);
                    let (rates, outflow) = class_rates(&params[b], e, alpha, agg[b]);
                    if outflow <= 0.0 {
                        continue;
                    }
                    let p_jump = 1.0 - (-outflow * h).exp();
                    let n_jump = Binomial::new(count as u64, p_jump)
                        .expect("valid binomial")
                        .sample(rng);
                    if n_jump == 0 {
                        continue;
                    }
                    // split jumpers across destinations, then pick distinct
                    // agents; detaching as we pick prevents double jumps
                    let channels: Vec<(usize, f64)> = (0..4)
                        .filter(|e_to| rates[*e_to] > 0.0)
                        .map(|e_to| (e_to, rates[e_to]))
                        .collect();
                    let mut remaining = n_jump;
                    let mut rate_left = outflow;
                    for (ci, (e_to, r)) in channels.iter().enumerate() {
                        if remaining == 0 {
                            break;
                        }
                        let n_here = if ci + 1 == channels.len() {
                            remaining
                        } else {
                            let share = (r / rate_left).clamp(0.0, 1.0);
                            Binomial::new(remaining, share)
                                .expect("valid binomial")
                                .sample(rng)
                        };
                        rate_left -= r;
                        for _ in 0..n_here {
                            let agent = pop.random_member(rng, b, e);
                            pop.detach(agent);
                            moves.push((agent, b, e, *e_to));
                        }
                        remaining -= n_here;
                    }
                }
            }
            for (agent, b, e_from, e_to) in moves.drain(..) {
                ledger.on_transition(grid, agent, b, e_from, step_end);
                pop.attach(agent, e_to);
            }
            t = step_end;
        }
        record(empirical, node + 1, pop);
    }
}

fn sample_index_f64(rng: &mut ChaCha8Rng, weights: &[f64; 4]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last_positive = i;
            if target < *w {
                return i;
            }
            target -= *w;
        }
    }
    last_positive
}
