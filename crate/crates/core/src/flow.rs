//! Small integer max-flow (Dinic) used by the capacitated k-center
//! feasibility test. Edges store residual capacity; the flow pushed through
//! a forward edge equals the residual capacity of its paired reverse edge.

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    residual: u64,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(n_nodes: usize) -> Self {
        FlowNetwork {
            edges: Vec::new(),
            adj: vec![Vec::new(); n_nodes],
        }
    }

    /// Returns the edge id; the reverse edge is id + 1.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: u64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, residual: cap });
        self.edges.push(Edge {
            to: from,
            residual: 0,
        });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Flow currently routed through a forward edge.
    pub fn edge_flow(&self, id: usize) -> u64 {
        self.edges[id ^ 1].residual
    }

    pub fn max_flow(&mut self, source: usize, sink: usize) -> u64 {
        let n = self.adj.len();
        let mut total = 0u64;
        loop {
            let mut level = vec![usize::MAX; n];
            level[source] = 0;
            let mut queue = std::collections::VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                for &eid in &self.adj[u] {
                    let e = &self.edges[eid];
                    if e.residual > 0 && level[e.to] == usize::MAX {
                        level[e.to] = level[u] + 1;
                        queue.push_back(e.to);
                    }
                }
            }
            if level[sink] == usize::MAX {
                return total;
            }
            let mut iter = vec![0usize; n];
            loop {
                let pushed = self.dfs(source, sink, u64::MAX, &level, &mut iter);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn dfs(
        &mut self,
        u: usize,
        sink: usize,
        limit: u64,
        level: &[usize],
        iter: &mut [usize],
    ) -> u64 {
        if u == sink {
            return limit;
        }
        while iter[u] < self.adj[u].len() {
            let eid = self.adj[u][iter[u]];
            let (to, residual) = {
                let e = &self.edges[eid];
                (e.to, e.residual)
            };
            if residual > 0 && level[to] == level[u] + 1 {
                let pushed = self.dfs(to, sink, limit.min(residual), level, iter);
                if pushed > 0 {
                    self.edges[eid].residual -= pushed;
                    self.edges[eid ^ 1].residual += pushed;
                    return pushed;
                }
            }
            iter[u] += 1;
        }
        0
    }
}
