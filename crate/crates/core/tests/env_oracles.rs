use entropic_core::envs::{
    analytic_gaussian_solution, analytic_quadratic_solution, bachelier_call_price, bachelier_step, gridworld_shifted,
    gridworld_step, gridworld_tabularize, BachelierParams, GridAction, GridState, GridWorldConfig, MarketState,
    TradingRewardSpec,
};
use entropic_core::mdp::{entropic_value_iteration, risk_neutral_value_iteration};
use entropic_core::{certainty_equivalent, DiscreteDistribution, RiskAversion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ra(a: f64) -> RiskAversion {
    RiskAversion::new(a).unwrap()
}

/// Increment law N(μ, σ²) on 201 Simpson nodes over ±8σ.
fn increments(p: &BachelierParams) -> (Vec<f64>, Vec<f64>) {
    let n = 201;
    let h = 16.0 / (n - 1) as f64;
    let mut z = Vec::new();
    let mut w = Vec::new();
    for i in 0..n {
        let u = -8.0 + i as f64 * h;
        let simpson = if i == 0 || i == n - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        z.push(p.mu + p.sigma * u);
        w.push(simpson * (-0.5 * u * u).exp());
    }
    let total: f64 = w.iter().sum();
    (z, w.into_iter().map(|x| x / total).collect())
}

fn one_step_ce(p: &BachelierParams, a: f64, reward: impl Fn(f64) -> f64) -> f64 {
    let (z, w) = increments(p);
    let outcomes = z.iter().map(|&z| reward(z)).collect();
    certainty_equivalent(&DiscreteDistribution::new(outcomes, w).unwrap(), ra(a)).unwrap()
}

#[test]
fn quadrature_confirms_quadratic_policy_and_penalty_sign() {
    let p = BachelierParams::reference(0.0);
    let alpha = 100.0;
    for t in [0, 4, 9] {
        for x in [-0.1, 0.0, 0.05, 0.2] {
            let s = p.s0 + x;
            // Bellman step against the closed-form continuation value
            let q = |a: f64| {
                one_step_ce(&p, alpha, |z| {
                    let next = s + z;
                    let cont = if t + 1 == p.horizon {
                        -0.5 * (next - p.s0).powi(2)
                    } else {
                        analytic_quadratic_solution(t + 1, next, &p, ra(alpha)).unwrap().1
                    };
                    a * z + cont
                })
            };
            let grid: Vec<f64> = (-100..=100).map(|k| x + 0.002 * k as f64).collect();
            let best = grid.iter().cloned().max_by(|a, b| q(*a).total_cmp(&q(*b))).unwrap();
            let (action, value) = analytic_quadratic_solution(t, s, &p, ra(alpha)).unwrap();
            assert!((best - action).abs() <= 0.002, "t={t} x={x}: argmax {best} vs {action}");
            assert!((q(action) - value).abs() <= 1e-8, "t={t} x={x}: {} vs {value}", q(action));
        }
    }
    let v0 = analytic_quadratic_solution(0, p.s0, &p, ra(100.0)).unwrap().1;
    assert!((v0 - 0.05 * 0.6f64.ln()).abs() < 1e-12);
}

#[test]
fn gaussian_action_is_a_strict_one_step_maximum() {
    let p = BachelierParams::reference(0.03);
    let (a_star, v0) = analytic_gaussian_solution(0, &p, ra(1.0)).unwrap();
    assert!((a_star - 7.5).abs() < 1e-12 && (v0 - 1.125).abs() < 1e-12);
    let ce = |a: f64| one_step_ce(&p, 1.0, |z| a * z);
    assert!((ce(a_star) * p.horizon as f64 - v0).abs() < 1e-10);
    assert!(ce(0.9 * a_star) < ce(a_star));
    assert!(ce(1.1 * a_star) < ce(a_star));
}

#[test]
fn call_price_matches_monte_carlo() {
    let p = BachelierParams::reference(0.0);
    let spec = TradingRewardSpec::CallHedging { strike: p.s0 };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 1_000_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n {
        let mut s = MarketState::initial(&p);
        let mut total = 0.0;
        while !s.is_terminal(&p) {
            let (next, r) = bachelier_step(s, 0.0, &p, spec, &mut rng).unwrap();
            total += r;
            s = next;
        }
        // with no hedge the only reward is the short call payoff
        let payoff = -total;
        sum += payoff;
        sum2 += payoff * payoff;
    }
    let mean = sum / n as f64;
    let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
    let exact = bachelier_call_price(&p).unwrap();
    assert!((exact - 0.2 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact} (se {se})");
}

fn play(cfg: &GridWorldConfig, seed: u64) -> (f64, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = GridState::initial(cfg);
    let (mut ret, mut moves, mut deliveries) = (0.0, 0, 0);
    while !s.is_done(cfg) {
        let a = GridAction::ALL[rng.random_range(0..5)];
        let (next, r) = gridworld_step(&s, a, cfg, &mut rng).unwrap();
        if a != GridAction::Stay {
            moves += 1;
        }
        if s.carrying && !next.carrying {
            deliveries += 1;
        }
        ret += r;
        s = next;
    }
    (ret, moves, deliveries)
}

#[test]
fn grid_returns_account_for_moves_and_deliveries() {
    let cfg = GridWorldConfig { spawn_prob: 0.2, ..GridWorldConfig::square(4) };
    let mut delivered = 0;
    for seed in 0..500 {
        let (ret, moves, deliveries) = play(&cfg, seed);
        assert_eq!(ret, 15.0 * deliveries as f64 - moves as f64);
        delivered += deliveries;
    }
    assert!(delivered > 0);
    let quiet = gridworld_shifted(&cfg, 0.0).unwrap();
    for seed in 0..50 {
        let (ret, moves, deliveries) = play(&quiet, seed);
        assert_eq!((ret, deliveries), (-(moves as f64), 0));
    }
}

#[test]
fn small_grid_reduction() {
    let cfg = GridWorldConfig { item_lifetime: 3, episode_length: 12, spawn_prob: 0.1, ..GridWorldConfig::square(3) };
    let grid = gridworld_tabularize(&cfg).unwrap();
    assert!(grid.mdp.num_states() <= 9 * 2 * (9 * 3 + 1) * 12 + 1);
    assert!(grid.mdp.horizon() <= 12);
    let neutral = risk_neutral_value_iteration(&grid.mdp).unwrap();
    let zero = entropic_value_iteration(&grid.mdp, ra(0.0)).unwrap();
    for (a, b) in neutral.v_star.iter().zip(&zero.v_star) {
        assert!((a - b).abs() <= 1e-12);
    }
    let averse = entropic_value_iteration(&grid.mdp, ra(1.0)).unwrap();
    assert!(averse.v_star[grid.mdp.initial_state()] <= neutral.v_star[grid.mdp.initial_state()] + 1e-12);

    let still = gridworld_tabularize(&gridworld_shifted(&cfg, 0.0).unwrap()).unwrap();
    for s in 0..still.mdp.num_states() {
        for a in still.mdp.available_actions(s) {
            let live: Vec<_> = still.mdp.transitions(s, a).iter().filter(|t| t.prob > 0.0).collect();
            assert_eq!(live.len(), 1);
        }
    }
    // no items ever appear, so the best plan is to stand still
    assert_eq!(risk_neutral_value_iteration(&still.mdp).unwrap().v_star[still.mdp.initial_state()], 0.0);
}
