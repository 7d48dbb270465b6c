use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid road network: {0}")]
    InvalidNetwork(String),

    #[error("no path from vertex {from} to vertex {to}")]
    Unreachable { from: u64, to: u64 },

    #[error("shortest-path query needs at least one source and one target")]
    EmptyEndpoints,

    #[error("invalid provider shares: {0}")]
    InvalidShares(String),

    #[error("depot capacity {capacity} is short of {customers} customers by {shortfall}")]
    InsufficientCapacity {
        capacity: u64,
        customers: u64,
        shortfall: u64,
    },

    #[error("node {node} violates {bound}")]
    InfeasibleNode { node: usize, bound: String },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("exact TSP limited to {max} nodes, got {size}; use the heuristic solver")]
    TspTooLarge { size: usize, max: usize },

    #[error("route {route} references unknown node {node}")]
    UnknownNode { route: usize, node: usize },

    #[error("arc values contain a subtour among customers {0:?}")]
    Subtour(Vec<usize>),

    #[error("malformed arc values: {0}")]
    MalformedArcs(String),

    #[error("no feasible route can serve node {node}")]
    Construction { node: usize },

    #[error("gap undefined: {0}")]
    Gap(&'static str),

    #[error("solution for {0} failed validation")]
    Unvalidated(String),

    #[error("MPS parse error on line {line}: {msg}")]
    Mps { line: usize, msg: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
