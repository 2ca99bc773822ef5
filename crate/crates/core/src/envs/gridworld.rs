//! Item-delivery grid world.
//!
//! The agent walks a `width × height` grid, picks up items that appear at
//! random and carries one at a time to the delivery cell. Every movement costs
//! `move_reward`; a delivery earns `delivery_reward`. Items expire after
//! `item_lifetime` steps.
//!
//! Step order: move (walls clamp), pick up, deliver, age and expire items,
//! spawn. The delivery cell never holds an item.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::mdp::{FiniteMdp, MdpSpec, TransitionSpec};

/// State-count ceiling for [`gridworld_tabularize`].
pub const TABULAR_CAPACITY: usize = 200_000;

pub type Cell = (usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWorldConfig {
    pub width: usize,
    pub height: usize,
    pub spawn_prob: f64,
    pub item_lifetime: usize,
    pub delivery_cell: Cell,
    pub start_cell: Cell,
    pub move_reward: f64,
    pub delivery_reward: f64,
    pub episode_length: usize,
}

impl Default for GridWorldConfig {
    fn default() -> Self {
        Self::square(5)
    }
}

impl GridWorldConfig {
    /// `n × n` grid with delivery at the centre and the default dynamics.
    pub fn square(n: usize) -> Self {
        Self {
            width: n,
            height: n,
            spawn_prob: 0.05,
            item_lifetime: 8,
            delivery_cell: (n / 2, n / 2),
            start_cell: (0, 0),
            move_reward: -1.0,
            delivery_reward: 15.0,
            episode_length: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.width * self.height < 2 {
            return input("the grid needs at least two cells");
        }
        if !(0.0..=1.0).contains(&self.spawn_prob) {
            return input(format!("spawn probability {} is outside [0, 1]", self.spawn_prob));
        }
        if self.item_lifetime == 0 || self.episode_length == 0 {
            return input("item lifetime and episode length must be positive");
        }
        for (name, c) in [("delivery", self.delivery_cell), ("start", self.start_cell)] {
            if c.0 >= self.width || c.1 >= self.height {
                return input(format!("{name} cell {c:?} is off the grid"));
            }
        }
        if !(self.move_reward.is_finite() && self.delivery_reward.is_finite()) {
            return input("rewards must be finite");
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    fn cell_at(&self, i: usize) -> Cell {
        (i % self.width, i / self.width)
    }

    /// Cells where items may appear.
    fn spawn_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells()).map(|i| self.cell_at(i)).filter(|&c| c != self.delivery_cell)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl GridAction {
    pub const ALL: [GridAction; 5] = [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right, GridAction::Stay];

    pub fn index(self) -> usize {
        self as usize
    }

    fn apply(self, (x, y): Cell, cfg: &GridWorldConfig) -> Cell {
        match self {
            GridAction::Up => (x, y.saturating_sub(1)),
            GridAction::Down => (x, (y + 1).min(cfg.height - 1)),
            GridAction::Left => (x.saturating_sub(1), y),
            GridAction::Right => ((x + 1).min(cfg.width - 1), y),
            GridAction::Stay => (x, y),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridState {
    pub t: usize,
    pub agent: Cell,
    pub carrying: bool,
    /// Items on the grid with their ages.
    pub items: BTreeMap<Cell, usize>,
}

impl GridState {
    pub fn initial(cfg: &GridWorldConfig) -> Self {
        Self { t: 0, agent: cfg.start_cell, carrying: false, items: BTreeMap::new() }
    }

    pub fn is_done(&self, cfg: &GridWorldConfig) -> bool {
        self.t >= cfg.episode_length
    }
}

/// Movement, pickup and delivery; returns the reward.
fn act(agent: &mut Cell, carrying: &mut bool, item_at: impl FnOnce(Cell) -> bool, action: GridAction, cfg: &GridWorldConfig) -> f64 {
    let mut reward = 0.0;
    if action != GridAction::Stay {
        reward += cfg.move_reward;
    }
    *agent = action.apply(*agent, cfg);
    if !*carrying && item_at(*agent) {
        *carrying = true;
    }
    if *carrying && *agent == cfg.delivery_cell {
        *carrying = false;
        reward += cfg.delivery_reward;
    }
    reward
}

pub fn gridworld_step<R: Rng + ?Sized>(state: &GridState, action: GridAction, cfg: &GridWorldConfig, rng: &mut R) -> Result<(GridState, f64)> {
    if state.is_done(cfg) {
        return input(format!("episode already ended at t = {}", state.t));
    }
    let mut next = state.clone();
    let was_carrying = next.carrying;
    let reward = act(&mut next.agent, &mut next.carrying, |c| state.items.contains_key(&c), action, cfg);
    if !was_carrying && next.carrying || (next.carrying && next.agent == cfg.delivery_cell) {
        next.items.remove(&next.agent);
    }
    next.items.retain(|_, age| {
        *age += 1;
        *age < cfg.item_lifetime
    });
    for c in cfg.spawn_cells() {
        if !next.items.contains_key(&c) && rng.random::<f64>() < cfg.spawn_prob {
            next.items.insert(c, 0);
        }
    }
    next.t += 1;
    Ok((next, reward))
}

/// Same dynamics with the spawn probability scaled by `factor`.
pub fn gridworld_shifted(cfg: &GridWorldConfig, factor: f64) -> Result<GridWorldConfig> {
    let p = cfg.spawn_prob * factor;
    if !(0.0..=1.0).contains(&p) {
        return input(format!("shifted spawn probability {p} is outside [0, 1]"));
    }
    Ok(GridWorldConfig { spawn_prob: p, ..cfg.clone() })
}

/// A non-terminal state of the single-item reduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridKey {
    pub t: usize,
    pub agent: Cell,
    pub carrying: bool,
    /// The one item allowed on the grid, with its age.
    pub item: Option<(Cell, usize)>,
}

/// Exact finite encoding of the single-item grid world.
///
/// State `i < keys.len()` decodes to `keys[i]`; index `keys.len()` is the
/// shared terminal state reached at `t = episode_length`. Indices follow a
/// breadth-first enumeration of every structurally reachable key, which does
/// not depend on `spawn_prob`, so configurations that differ only in spawn
/// probability share one indexing. Actions are indexed as in [`GridAction::ALL`].
#[derive(Clone, Debug)]
pub struct TabularGrid {
    pub mdp: FiniteMdp,
    pub keys: Vec<GridKey>,
}

impl TabularGrid {
    pub fn terminal_state(&self) -> usize {
        self.keys.len()
    }

    pub fn index_of(&self, key: &GridKey) -> Option<usize> {
        self.keys.iter().position(|k| k == key)
    }
}

/// Successors of `key` under `action`: reward and `(next key or terminal, probability)` pairs.
///
/// While no item is on the grid, one appears with probability `1 − (1 − p)^k`
/// at a uniformly chosen spawn cell, `k` being the number of spawn cells.
fn reduced_successors(key: &GridKey, action: GridAction, cfg: &GridWorldConfig) -> (f64, Vec<(Option<GridKey>, f64)>) {
    let mut agent = key.agent;
    let mut carrying = key.carrying;
    let was_carrying = carrying;
    let reward = act(&mut agent, &mut carrying, |c| key.item.is_some_and(|(ic, _)| ic == c), action, cfg);
    let mut item = key.item;
    if !was_carrying && carrying {
        item = None;
    }
    item = item.and_then(|(c, age)| (age + 1 < cfg.item_lifetime).then_some((c, age + 1)));
    let t = key.t + 1;
    if t >= cfg.episode_length {
        return (reward, vec![(None, 1.0)]);
    }
    let base = GridKey { t, agent, carrying, item };
    if item.is_some() {
        return (reward, vec![(Some(base), 1.0)]);
    }
    let cells: Vec<Cell> = cfg.spawn_cells().collect();
    let q = 1.0 - (1.0 - cfg.spawn_prob).powi(cells.len() as i32);
    let mut out = vec![(Some(base), 1.0 - q)];
    out.extend(cells.iter().map(|&c| (Some(GridKey { item: Some((c, 0)), ..base }), q / cells.len() as f64)));
    (reward, out)
}

/// Exact tabular reduction with at most one item on the grid at a time.
pub fn gridworld_tabularize(cfg: &GridWorldConfig) -> Result<TabularGrid> {
    cfg.validate()?;
    let cells = cfg.num_cells();
    let bound = cfg.episode_length * cells * 2 * (cells * cfg.item_lifetime + 1);
    if bound > TABULAR_CAPACITY {
        return Err(Error::Capacity(format!(
            "grid encoding needs up to {bound} states (limit {TABULAR_CAPACITY}); shrink the grid, the item lifetime or the episode length"
        )));
    }
    let start = GridKey { t: 0, agent: cfg.start_cell, carrying: false, item: None };
    let mut ids: HashMap<GridKey, usize> = HashMap::from([(start, 0)]);
    let mut keys = vec![start];
    let mut queue = VecDeque::from([start]);
    let mut edges: Vec<(usize, usize, Option<GridKey>, f64, f64)> = Vec::new();
    while let Some(key) = queue.pop_front() {
        let s = ids[&key];
        for action in GridAction::ALL {
            let (reward, succ) = reduced_successors(&key, action, cfg);
            for (next, prob) in succ {
                if let Some(nk) = next {
                    if !ids.contains_key(&nk) {
                        ids.insert(nk, keys.len());
                        keys.push(nk);
                        queue.push_back(nk);
                    }
                }
                if prob > 0.0 {
                    edges.push((s, action.index(), next, prob, reward));
                }
            }
        }
    }
    let terminal = keys.len();
    let transitions = edges
        .into_iter()
        .map(|(state, action, next, prob, reward)| TransitionSpec {
            state,
            action,
            next: next.map_or(terminal, |k| ids[&k]),
            prob,
            reward,
        })
        .collect();
    let mdp = FiniteMdp::new(MdpSpec {
        num_states: terminal + 1,
        num_actions: GridAction::ALL.len(),
        initial_state: 0,
        horizon: cfg.episode_length,
        terminal: vec![terminal],
        transitions,
    })?;
    Ok(TabularGrid { mdp, keys })
}
