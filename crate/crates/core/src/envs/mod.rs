//! Trading and grid-world environments.

mod bachelier;
mod gridworld;

pub use bachelier::{
    analytic_gaussian_solution, analytic_quadratic_solution, bachelier_call_price, bachelier_step, bachelier_transition,
    probe_states, rmse_vs_analytic, AnalyticValue, BachelierParams, MarketState, TradingEnv, TradingRewardSpec,
    PROBES_PER_LAYER,
};
pub use gridworld::{
    gridworld_shifted, gridworld_step, gridworld_tabularize, Cell, GridAction, GridKey, GridState, GridWorldConfig,
    TabularGrid, TABULAR_CAPACITY,
};
