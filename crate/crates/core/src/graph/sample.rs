//! Feature-independent minibatch samplers.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{induced_subgraph, Graph, NodeId, Subgraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMethod {
    /// Uniform node sampling without replacement.
    UniformNode,
    /// Fixed-length random walks from uniformly drawn roots; the sample is
    /// the union of visited nodes, truncated in visit order.
    FrontierRandomWalk { roots: usize, walk_length: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    /// Node budget |V_s|.
    pub target_nodes: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self, parent_nodes: usize) -> Result<(), String> {
        if self.target_nodes == 0 {
            return Err("target_nodes must be at least 1".into());
        }
        if self.target_nodes > parent_nodes {
            return Err(format!(
                "target_nodes {} exceeds graph size {parent_nodes}",
                self.target_nodes
            ));
        }
        if let SamplerMethod::FrontierRandomWalk { roots, .. } = self.method {
            if roots == 0 {
                return Err("random walk needs at least one root".into());
            }
        }
        Ok(())
    }
}

/// A sampler owns its RNG; successive calls yield successive minibatches.
#[derive(Debug, Clone)]
pub struct Sampler {
    cfg: SamplerConfig,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(cfg: SamplerConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
        }
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Sampled node ids (unsorted, distinct).
    pub fn sample_nodes(&mut self, g: &Graph) -> Vec<NodeId> {
        let n = g.num_nodes();
        let target = self.cfg.target_nodes.min(n);
        if target == 0 {
            return Vec::new();
        }
        match self.cfg.method {
            SamplerMethod::UniformNode => index::sample(&mut self.rng, n, target)
                .into_iter()
                .map(|i| i as NodeId)
                .collect(),
            SamplerMethod::FrontierRandomWalk { roots, walk_length } => {
                let roots = roots.min(n);
                let mut seen = vec![false; n];
                let mut order = Vec::with_capacity(target);
                let starts: Vec<usize> = index::sample(&mut self.rng, n, roots).into_vec();
                'walks: for start in starts {
                    let mut cur = start as NodeId;
                    for step in 0..=walk_length {
                        if !seen[cur as usize] {
                            seen[cur as usize] = true;
                            order.push(cur);
                            if order.len() == target {
                                break 'walks;
                            }
                        }
                        if step == walk_length {
                            break;
                        }
                        let nbrs = g.neighbors(cur);
                        if nbrs.is_empty() {
                            break;
                        }
                        cur = nbrs[self.rng.gen_range(0..nbrs.len())];
                    }
                }
                order
            }
        }
    }

    pub fn sample(&mut self, g: &Graph) -> Subgraph {
        let nodes = self.sample_nodes(g);
        induced_subgraph(g, &nodes).expect("sampled ids are in range")
    }
}

/// One-shot sampling with a fresh RNG seeded from `cfg.seed`.
pub fn sample_subgraph(g: &Graph, cfg: &SamplerConfig) -> Subgraph {
    Sampler::new(*cfg).sample(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::mean_degree;
    use crate::synth;

    fn path(n: u32) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n as usize, &edges, false).unwrap().0
    }

    #[test]
    fn uniform_sample_is_induced_and_sized() {
        let g = path(10);
        let cfg = SamplerConfig {
            method: SamplerMethod::UniformNode,
            target_nodes: 5,
            seed: 7,
        };
        let s = sample_subgraph(&g, &cfg);
        assert_eq!(s.num_nodes(), 5);
        for v in 0..5u32 {
            for &u in s.local.neighbors(v) {
                let (a, b) = (s.parent_ids[u as usize], s.parent_ids[v as usize]);
                assert_eq!(a.abs_diff(b), 1);
            }
        }
        // Adjacent sampled pairs must be connected.
        for w in s.parent_ids.windows(2) {
            if w[1] == w[0] + 1 {
                let i = s.parent_ids.binary_search(&w[0]).unwrap() as u32;
                assert!(s.local.has_edge(i, i + 1));
            }
        }
        assert_eq!(sample_subgraph(&g, &cfg), s);
    }

    #[test]
    fn successive_samples_differ_but_replay() {
        let g = path(50);
        let cfg = SamplerConfig {
            method: SamplerMethod::UniformNode,
            target_nodes: 10,
            seed: 1,
        };
        let mut a = Sampler::new(cfg);
        let mut b = Sampler::new(cfg);
        let a1 = a.sample(&g);
        let a2 = a.sample(&g);
        assert_ne!(a1, a2);
        assert_eq!(b.sample(&g), a1);
        assert_eq!(b.sample(&g), a2);
    }

    #[test]
    fn random_walk_on_planted_partition() {
        let pp = synth::planted_partition(1000, 4, 0.04, 0.002, 3);
        let parent_dbar = mean_degree(&pp.graph).unwrap();
        let cfg = SamplerConfig {
            method: SamplerMethod::FrontierRandomWalk {
                roots: 50,
                walk_length: 4,
            },
            target_nodes: 200,
            seed: 11,
        };
        let s = sample_subgraph(&pp.graph, &cfg);
        assert!(s.num_nodes() <= 200 && s.num_nodes() > 100);
        let dbar = mean_degree(&s.local).unwrap();
        assert!((1.0..=parent_dbar).contains(&dbar), "d̄ = {dbar}, parent {parent_dbar}");
    }

    #[test]
    fn random_walk_stops_at_isolated_nodes() {
        let g = Graph::empty(6, false);
        let cfg = SamplerConfig {
            method: SamplerMethod::FrontierRandomWalk {
                roots: 3,
                walk_length: 10,
            },
            target_nodes: 6,
            seed: 0,
        };
        let s = sample_subgraph(&g, &cfg);
        assert_eq!(s.num_nodes(), 3);
        assert_eq!(s.local.num_edge_endpoints(), 0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SamplerConfig {
            method: SamplerMethod::UniformNode,
            target_nodes: 0,
            seed: 0,
        };
        assert!(cfg.validate(10).is_err());
        cfg.target_nodes = 11;
        assert!(cfg.validate(10).is_err());
        cfg.target_nodes = 10;
        assert!(cfg.validate(10).is_ok());
    }

    #[test]
    fn empty_graph_yields_empty_sample() {
        let cfg = SamplerConfig {
            method: SamplerMethod::UniformNode,
            target_nodes: 3,
            seed: 0,
        };
        assert!(sample_subgraph(&Graph::empty(0, false), &cfg).is_empty());
    }
}
