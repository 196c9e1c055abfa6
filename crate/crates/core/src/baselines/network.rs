//! Stochastic SEIR on a contact network with discrete daily steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::seir::SeirParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compartment {
    S,
    E,
    I,
    R,
}

/// Undirected contact graph without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactNetwork {
    adjacency: Vec<Vec<usize>>,
}

impl ContactNetwork {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::config(format!("edge ({a}, {b}) outside {n} nodes")));
            }
            if a == b {
                return Err(Error::config(format!("self-loop on node {a}")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adjacency })
    }

    pub fn complete(n: usize) -> Self {
        let adjacency = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        Self { adjacency }
    }

    pub fn edgeless(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Configuration-model graph with Poisson degrees; self-loops and
    /// multi-edges produced by the stub matching are dropped.
    pub fn configuration_poisson(n: usize, mean_degree: f64, seed: u64) -> Result<Self> {
        if !(mean_degree > 0.0) {
            return Err(Error::config("mean degree must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poisson = Poisson::new(mean_degree).map_err(|e| Error::config(e.to_string()))?;
        let mut stubs: Vec<usize> = Vec::new();
        for node in 0..n {
            let k: f64 = poisson.sample(&mut rng);
            stubs.extend(std::iter::repeat(node).take(k as usize));
        }
        if stubs.len() % 2 == 1 {
            stubs.pop();
        }
        rand::seq::SliceRandom::shuffle(stubs.as_mut_slice(), &mut rng);
        let edges: Vec<(usize, usize)> = stubs
            .chunks_exact(2)
            .filter(|p| p[0] != p[1])
            .map(|p| (p[0], p[1]))
            .collect();
        Self::from_edges(n, &edges)
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn mean_degree(&self) -> f64 {
        let total: usize = self.adjacency.iter().map(Vec::len).sum();
        total as f64 / self.len().max(1) as f64
    }

    pub fn is_symmetric(&self) -> bool {
        self.adjacency.iter().enumerate().all(|(a, list)| {
            list.iter()
                .all(|&b| b != a && self.adjacency[b].binary_search(&a).is_ok())
        })
    }
}

/// Days on which a node entered each later compartment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeTimeline {
    pub exposed: Option<usize>,
    pub infectious: Option<usize>,
    pub recovered: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRun {
    /// `[S, E, I, R]` counts for days `0..=horizon`.
    pub counts: Vec<[usize; 4]>,
    /// Nodes that became infectious during each day (entry 0 is 0).
    pub daily_new_cases: Vec<usize>,
    pub timelines: Vec<NodeTimeline>,
}

impl NetworkRun {
    pub fn infectious(&self) -> Vec<f64> {
        self.counts.iter().map(|c| c[2] as f64).collect()
    }
}

fn tally(states: &[Compartment]) -> [usize; 4] {
    let mut c = [0; 4];
    for s in states {
        c[*s as usize] += 1;
    }
    c
}

/// Daily discrete-time stochastic SEIR.
///
/// A susceptible node with `k` infectious neighbours is exposed with
/// probability `1 − (1 − p)^k`, `p = 1 − exp(−β / ⟨degree⟩)`; E → I and
/// I → R happen with probabilities `1 − exp(−σ)` and `1 − exp(−γ)`. All
/// transitions of a day are decided from the state at the start of the day.
/// `params.population` is ignored; the node count is the population.
pub fn simulate_network_seir(
    network: &ContactNetwork,
    params: &SeirParams,
    initial_infected: &[usize],
    horizon: usize,
    seed: u64,
) -> Result<NetworkRun> {
    let n = network.len();
    if n == 0 {
        return Err(Error::precondition("simulate_network_seir", "empty network"));
    }
    if initial_infected.is_empty() {
        return Err(Error::precondition(
            "simulate_network_seir",
            "no initially infected nodes",
        ));
    }
    let mut rates = *params;
    rates.population = n as f64;
    rates.validate()?;
    let mut states = vec![Compartment::S; n];
    let mut timelines = vec![NodeTimeline::default(); n];
    for &node in initial_infected {
        if node >= n {
            return Err(Error::config(format!("initial node {node} outside {n} nodes")));
        }
        states[node] = Compartment::I;
        timelines[node].infectious = Some(0);
    }
    let mean_degree = network.mean_degree();
    let p_contact = if mean_degree > 0.0 {
        1.0 - (-rates.beta / mean_degree).exp()
    } else {
        0.0
    };
    let p_onset = 1.0 - (-rates.sigma).exp();
    let p_recover = 1.0 - (-rates.gamma).exp();

    // infectious neighbours of every node, updated as nodes enter and leave I
    let mut pressure = vec![0usize; n];
    for node in (0..n).filter(|&v| states[v] == Compartment::I) {
        for &m in network.neighbors(node) {
            pressure[m] += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![tally(&states)];
    let mut daily = vec![0];
    let mut entered_i = Vec::new();
    let mut left_i = Vec::new();
    for day in 1..=horizon {
        let mut next = states.clone();
        let mut onsets = 0;
        entered_i.clear();
        left_i.clear();
        for node in 0..n {
            match states[node] {
                Compartment::S => {
                    let k = pressure[node];
                    if p_contact == 0.0 || k == 0 {
                        continue;
                    }
                    if rng.gen::<f64>() < 1.0 - (1.0 - p_contact).powi(k as i32) {
                        next[node] = Compartment::E;
                        timelines[node].exposed = Some(day);
                    }
                }
                Compartment::E => {
                    if rng.gen::<f64>() < p_onset {
                        next[node] = Compartment::I;
                        timelines[node].infectious = Some(day);
                        entered_i.push(node);
                        onsets += 1;
                    }
                }
                Compartment::I => {
                    if rng.gen::<f64>() < p_recover {
                        next[node] = Compartment::R;
                        timelines[node].recovered = Some(day);
                        left_i.push(node);
                    }
                }
                Compartment::R => {}
            }
        }
        for &node in &entered_i {
            for &m in network.neighbors(node) {
                pressure[m] += 1;
            }
        }
        for &node in &left_i {
            for &m in network.neighbors(node) {
                pressure[m] -= 1;
            }
        }
        states = next;
        counts.push(tally(&states));
        daily.push(onsets);
    }
    Ok(NetworkRun {
        counts,
        daily_new_cases: daily,
        timelines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_transmission_keeps_susceptibles() {
        let net = ContactNetwork::complete(50);
        let p = SeirParams {
            beta: 0.0,
            ..SeirParams::default()
        };
        let run = simulate_network_seir(&net, &p, &[0, 1], 60, 3).unwrap();
        assert!(run.counts.iter().all(|c| c[0] == 48));
    }

    #[test]
    fn isolated_node_progresses_alone() {
        let net = ContactNetwork::edgeless(20);
        let run = simulate_network_seir(&net, &SeirParams::default(), &[7], 200, 1).unwrap();
        assert_eq!(run.counts.last().unwrap(), &[19, 0, 0, 1]);
        for (node, t) in run.timelines.iter().enumerate() {
            if node == 7 {
                assert!(t.recovered.is_some());
            } else {
                assert_eq!(*t, NodeTimeline::default());
            }
        }
    }

    #[test]
    fn counts_sum_and_monotone_transitions() {
        let net = ContactNetwork::configuration_poisson(300, 6.0, 11).unwrap();
        assert!(net.is_symmetric());
        let run = simulate_network_seir(&net, &SeirParams::default(), &[0, 1, 2], 120, 5).unwrap();
        for c in &run.counts {
            assert_eq!(c.iter().sum::<usize>(), 300);
        }
        for w in run.counts.windows(2) {
            // S never grows, R never shrinks
            assert!(w[1][0] <= w[0][0]);
            assert!(w[1][3] >= w[0][3]);
        }
        for t in &run.timelines {
            if let (Some(e), Some(i)) = (t.exposed, t.infectious) {
                assert!(e < i);
            }
            if let (Some(i), Some(r)) = (t.infectious, t.recovered) {
                assert!(i < r);
            }
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let net = ContactNetwork::configuration_poisson(200, 4.0, 2).unwrap();
        let a = simulate_network_seir(&net, &SeirParams::default(), &[0], 80, 9).unwrap();
        let b = simulate_network_seir(&net, &SeirParams::default(), &[0], 80, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_network_rejected() {
        let net = ContactNetwork::edgeless(0);
        assert!(simulate_network_seir(&net, &SeirParams::default(), &[0], 5, 0).is_err());
    }
}
