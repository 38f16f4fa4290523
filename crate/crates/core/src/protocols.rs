//! Sequential and blackboard interaction among n nodes, with exact
//! transcript-level Fisher information on small instances.
//!
//! Messages are released round by round, nodes in index order within a round.
//! The public history seen by a node is the list of symbol indices released
//! before it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{make_krr, random_ldp_channel, FiniteChannel};
use crate::error::{Error, Result};
use crate::models::StatModel;
use crate::rng::seeded;

/// Transcripts with more leaves than this are not enumerated.
pub const TRANSCRIPT_CAP: usize = 10_000;

const BUDGET_TOL: f64 = 1e-12;

/// A node's mechanism as a function of the public history.
pub trait NodeStrategy: Send + Sync {
    /// Total privacy budget of the node across rounds.
    fn eps(&self) -> f64;

    fn channel(&self, round: usize, history: &[usize]) -> Result<FiniteChannel>;
}

/// Same channel every round, whatever the history.
#[derive(Clone, Debug)]
pub struct Constant {
    pub channel: FiniteChannel,
}

impl NodeStrategy for Constant {
    fn eps(&self) -> f64 {
        self.channel.eps_nominal()
    }

    fn channel(&self, _round: usize, _history: &[usize]) -> Result<FiniteChannel> {
        Ok(self.channel.clone())
    }
}

/// Uses `base`, or `base` with its output symbols reversed when the most
/// recent public message equals `trigger`.
#[derive(Clone, Debug)]
pub struct BiasFlip {
    pub base: FiniteChannel,
    flipped: FiniteChannel,
    pub trigger: usize,
}

impl BiasFlip {
    pub fn new(base: FiniteChannel, trigger: usize) -> Result<Self> {
        let flipped_rows = base.rows().into_iter().map(|mut r| {
            r.reverse();
            r
        });
        let flipped = FiniteChannel::new(flipped_rows.collect(), base.eps_nominal())?;
        Ok(BiasFlip { base, flipped, trigger })
    }
}

impl NodeStrategy for BiasFlip {
    fn eps(&self) -> f64 {
        self.base.eps_nominal()
    }

    fn channel(&self, _round: usize, history: &[usize]) -> Result<FiniteChannel> {
        Ok(if history.last() == Some(&self.trigger) { self.flipped.clone() } else { self.base.clone() })
    }
}

/// k-RR at ε/T in each of T rounds.
#[derive(Clone, Debug)]
pub struct BudgetSplit {
    pub eps: f64,
    pub rounds: usize,
    per_round: FiniteChannel,
}

impl BudgetSplit {
    pub fn new(k: usize, eps: f64, rounds: usize) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::invalid("budget split needs at least one round"));
        }
        Ok(BudgetSplit { eps, rounds, per_round: make_krr(k, eps / rounds as f64)?.materialize()? })
    }
}

impl NodeStrategy for BudgetSplit {
    fn eps(&self) -> f64 {
        self.eps
    }

    fn channel(&self, round: usize, _history: &[usize]) -> Result<FiniteChannel> {
        if round >= self.rounds {
            return abstain(self.per_round.n_inputs());
        }
        Ok(self.per_round.clone())
    }
}

/// A random ε/T-DP channel for each (round, history), fixed by `seed`, over
/// `rounds` rounds. Abstains afterwards.
#[derive(Clone, Debug)]
pub struct RandomAdaptive {
    pub eps: f64,
    pub rounds: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub seed: u64,
}

impl NodeStrategy for RandomAdaptive {
    fn eps(&self) -> f64 {
        self.eps
    }

    fn channel(&self, round: usize, history: &[usize]) -> Result<FiniteChannel> {
        if round >= self.rounds {
            return abstain(self.n_inputs);
        }
        let mut key = self.seed ^ 0x51_7cc1_b727_220a;
        for v in std::iter::once(round).chain(history.iter().copied()) {
            key = (key.rotate_left(23) ^ (v as u64 + 1)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        }
        random_ldp_channel(self.n_inputs, self.n_outputs, self.eps / self.rounds as f64, &mut seeded(key))
    }
}

/// Deterministic null message: a single output symbol, zero budget.
pub fn abstain(n_inputs: usize) -> Result<FiniteChannel> {
    FiniteChannel::uniform(n_inputs, 1)
}

/// Named strategy templates for configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "snake_case")]
pub enum StrategyTemplate {
    /// k-RR over the model alphabet.
    Constant { eps: f64 },
    /// k-RR over the model alphabet, outputs reversed after `trigger`.
    BiasFlip { eps: f64, trigger: usize },
    BudgetSplit { eps: f64, rounds: usize },
}

impl StrategyTemplate {
    pub fn build(&self, alphabet: usize) -> Result<Box<dyn NodeStrategy>> {
        Ok(match *self {
            StrategyTemplate::Constant { eps } => Box::new(Constant { channel: make_krr(alphabet, eps)?.materialize()? }),
            StrategyTemplate::BiasFlip { eps, trigger } => {
                Box::new(BiasFlip::new(make_krr(alphabet, eps)?.materialize()?, trigger)?)
            }
            StrategyTemplate::BudgetSplit { eps, rounds } => Box::new(BudgetSplit::new(alphabet, eps, rounds)?),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub node: usize,
    pub round: usize,
    pub symbol: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub n: usize,
    pub rounds: usize,
    /// In release order.
    pub messages: Vec<Message>,
}

impl Transcript {
    pub fn symbols(&self) -> Vec<usize> {
        self.messages.iter().map(|m| m.symbol).collect()
    }

    /// Messages of round t (the board B_t).
    pub fn board(&self, round: usize) -> Vec<usize> {
        self.messages.iter().filter(|m| m.round == round).map(|m| m.symbol).collect()
    }
}

fn model_alphabet(model: &StatModel) -> Result<usize> {
    model
        .alphabet_size()
        .ok_or_else(|| Error::Unsupported(format!("interactive protocols need a finite model, got {}", model.name())))
}

fn check_channel(ch: &FiniteChannel, nx: usize, eps: f64) -> Result<()> {
    if ch.n_inputs() != nx {
        return Err(Error::DimensionMismatch { expected: nx, got: ch.n_inputs() });
    }
    let star = ch.eps_star();
    if star > eps + BUDGET_TOL * eps.max(1.0) {
        return Err(Error::EpsViolation { certified: star, nominal: eps });
    }
    Ok(())
}

/// ln max_x p(x) − ln min_x p(x) for the node's accumulated likelihood
/// factors, i.e. the realized privacy loss over its messages so far.
fn realized_loss(p: &[f64]) -> f64 {
    let hi = p.iter().copied().fold(0.0, f64::max);
    let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    if hi == 0.0 {
        0.0
    } else if lo == 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).ln()
    }
}

fn check_budget(node: usize, p: &[f64], eps: f64, history: &[usize]) -> Result<()> {
    let loss = realized_loss(p);
    if loss > eps + BUDGET_TOL * eps.max(1.0) {
        return Err(Error::BudgetExceeded { node, log_ratio: loss, eps, history: history.to_vec() });
    }
    Ok(())
}

/// Blackboard protocol over `rounds` rounds. Each node's realized loss
/// ln max_x Π_t Q_t(y_t|h_t,x) / min_x Π_t Q_t(y_t|h_t,x) is checked against
/// its budget after every message.
pub fn run_blackboard<R: Rng + ?Sized>(
    strategies: &[Box<dyn NodeStrategy>],
    rounds: usize,
    model: &StatModel,
    theta: &[f64],
    rng: &mut R,
) -> Result<Transcript> {
    let nx = model_alphabet(model)?;
    let n = strategies.len();
    let xs: Vec<usize> = (0..n)
        .map(|_| model.sample(theta, rng).and_then(|s| model.symbol_index(&s)))
        .collect::<Result<_>>()?;
    let mut factors = vec![vec![1.0; nx]; n];
    let mut history = Vec::with_capacity(n * rounds);
    let mut messages = Vec::with_capacity(n * rounds);
    for round in 0..rounds {
        for (node, strat) in strategies.iter().enumerate() {
            let ch = strat.channel(round, &history)?;
            check_channel(&ch, nx, strat.eps())?;
            let y = ch.sample(xs[node], rng);
            for (x, f) in factors[node].iter_mut().enumerate() {
                *f *= ch.prob(x, y);
            }
            history.push(y);
            check_budget(node, &factors[node], strat.eps(), &history)?;
            messages.push(Message { node, round, symbol: y });
        }
    }
    Ok(Transcript { n, rounds, messages })
}

/// One round in which node i's mechanism may depend on Y₁,…,Y_{i−1}.
pub fn run_sequential<R: Rng + ?Sized>(
    strategies: &[Box<dyn NodeStrategy>],
    model: &StatModel,
    theta: &[f64],
    rng: &mut R,
) -> Result<Transcript> {
    run_blackboard(strategies, 1, model, theta, rng)
}

/// Exact transcript quantities from one enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptFisher {
    /// Tr I_Z(θ) = E_Z Σ_i ‖E[S(X_i) p_{i,Z}(X_i)] / E[p_{i,Z}(X_i)]‖².
    pub trace: f64,
    /// Σ_m E[Tr I_{Y_m | Y_<m}], the chain-rule decomposition.
    pub chain_sum: f64,
    pub leaves: usize,
    /// Largest realized per-node loss over all transcripts.
    pub max_loss: f64,
}

struct Enumerator<'a> {
    strategies: &'a [Box<dyn NodeStrategy>],
    rounds: usize,
    nx: usize,
    px: Vec<f64>,
    scores: Vec<Vec<f64>>,
    d: usize,
    leaves: usize,
    out: TranscriptFisher,
}

impl Enumerator<'_> {
    /// E[g(X)] and E[S(X) g(X)] under the model.
    fn moments(&self, g: impl Fn(usize) -> f64) -> (f64, Vec<f64>) {
        let mut e = 0.0;
        let mut es = vec![0.0; self.d];
        for x in 0..self.nx {
            let w = self.px[x] * g(x);
            if w == 0.0 {
                continue;
            }
            e += w;
            for (a, s) in es.iter_mut().zip(&self.scores[x]) {
                *a += w * s;
            }
        }
        (e, es)
    }

    fn visit(&mut self, pos: usize, prob: f64, factors: &mut Vec<Vec<f64>>, history: &mut Vec<usize>) -> Result<()> {
        let n = self.strategies.len();
        if pos == n * self.rounds {
            self.leaves += 1;
            if self.leaves > TRANSCRIPT_CAP {
                return Err(Error::CapExceeded { size: self.leaves as f64, cap: TRANSCRIPT_CAP });
            }
            let mut term = 0.0;
            for f in factors.iter() {
                let (e, es) = self.moments(|x| f[x]);
                term += es.iter().map(|v| v * v).sum::<f64>() / (e * e);
            }
            self.out.trace += prob * term;
            return Ok(());
        }
        let (node, round) = (pos % n, pos / n);
        let strat = &self.strategies[node];
        let ch = strat.channel(round, history)?;
        check_channel(&ch, self.nx, strat.eps())?;
        let (e_prev, es_prev) = self.moments(|x| factors[node][x]);
        let base: Vec<f64> = es_prev.iter().map(|v| v / e_prev).collect();
        let mut cond = 0.0;
        for y in 0..ch.n_outputs() {
            let (e_y, es_y) = self.moments(|x| factors[node][x] * ch.prob(x, y));
            if e_y <= 0.0 {
                continue;
            }
            // f(y | past) = e_y / e_prev; its log-gradient is es_y/e_y − es_prev/e_prev
            let fy = e_y / e_prev;
            cond += fy * es_y.iter().zip(&base).map(|(a, b)| (a / e_y - b).powi(2)).sum::<f64>();
            let saved = factors[node].clone();
            for (x, f) in factors[node].iter_mut().enumerate() {
                *f *= ch.prob(x, y);
            }
            history.push(y);
            let loss = realized_loss(&factors[node]);
            self.out.max_loss = self.out.max_loss.max(loss);
            check_budget(node, &factors[node], strat.eps(), history)?;
            self.visit(pos + 1, prob * fy, factors, history)?;
            history.pop();
            factors[node] = saved;
        }
        self.out.chain_sum += prob * cond;
        Ok(())
    }
}

/// Enumerates every transcript of the protocol and returns Tr I_Z(θ) together
/// with the chain-rule sum, checking each node's realized budget on every
/// transcript.
pub fn transcript_fisher(
    strategies: &[Box<dyn NodeStrategy>],
    rounds: usize,
    model: &StatModel,
    theta: &[f64],
) -> Result<TranscriptFisher> {
    let nx = model_alphabet(model)?;
    model.check_interior(theta)?;
    let px = model.pmf(theta)?;
    let scores = model.score_table(theta)?.into_iter().map(|s| s.0).collect();
    let mut en = Enumerator {
        strategies,
        rounds,
        nx,
        px,
        scores,
        d: model.dim(),
        leaves: 0,
        out: TranscriptFisher { trace: 0.0, chain_sum: 0.0, leaves: 0, max_loss: 0.0 },
    };
    let mut factors = vec![vec![1.0; nx]; strategies.len()];
    en.visit(0, 1.0, &mut factors, &mut Vec::new())?;
    en.out.leaves = en.leaves;
    Ok(en.out)
}

pub fn transcript_trace_exact(
    strategies: &[Box<dyn NodeStrategy>],
    rounds: usize,
    model: &StatModel,
    theta: &[f64],
) -> Result<f64> {
    Ok(transcript_fisher(strategies, rounds, model, theta)?.trace)
}

/// Both sides of Tr I_{Y₁…Y_n} = Σ_i E[Tr I_{Y_i | Y_<i}], by enumeration.
pub fn verify_chain_rule(
    strategies: &[Box<dyn NodeStrategy>],
    rounds: usize,
    model: &StatModel,
    theta: &[f64],
) -> Result<(f64, f64)> {
    let tf = transcript_fisher(strategies, rounds, model, theta)?;
    Ok((tf.trace, tf.chain_sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::make_binary_rr;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    fn rr(eps: f64) -> FiniteChannel {
        make_binary_rr(eps).unwrap().materialize().unwrap()
    }

    fn static_trace(ch: &FiniteChannel, t: f64) -> f64 {
        // m(θ) = θ q11 + (1−θ) q01; I = m'² / (m(1−m))
        let (q01, q11) = (ch.prob(0, 1), ch.prob(1, 1));
        let m = t * q11 + (1.0 - t) * q01;
        (q11 - q01).powi(2) / (m * (1.0 - m))
    }

    #[test]
    fn constant_strategies_add_up() {
        let m = StatModel::bernoulli(1).unwrap();
        let ch = rr(1.0);
        for n in [1, 2, 3] {
            let strats: Vec<Box<dyn NodeStrategy>> =
                (0..n).map(|_| Box::new(Constant { channel: ch.clone() }) as Box<dyn NodeStrategy>).collect();
            let (lhs, rhs) = verify_chain_rule(&strats, 1, &m, &[0.3]).unwrap();
            assert_relative_eq!(lhs, n as f64 * static_trace(&ch, 0.3), max_relative = 1e-12);
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        }
        assert_eq!(transcript_trace_exact(&[], 1, &m, &[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn adaptive_chain_rule() {
        let m = StatModel::bernoulli(1).unwrap();
        let base = FiniteChannel::new(vec![vec![0.6, 0.4], vec![0.3, 0.7]], 2f64.ln() + 1e-12).unwrap();
        let strats: Vec<Box<dyn NodeStrategy>> = vec![
            Box::new(Constant { channel: base.clone() }),
            Box::new(BiasFlip::new(base.clone(), 1).unwrap()),
            Box::new(BiasFlip::new(base, 0).unwrap()),
        ];
        let (lhs, rhs) = verify_chain_rule(&strats, 1, &m, &[0.35]).unwrap();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-10);
    }

    #[test]
    fn zero_information() {
        let m = StatModel::bernoulli(1).unwrap();
        let strats: Vec<Box<dyn NodeStrategy>> =
            (0..3).map(|_| Box::new(Constant { channel: FiniteChannel::uniform(2, 3).unwrap() }) as Box<dyn NodeStrategy>).collect();
        assert!(transcript_trace_exact(&strats, 1, &m, &[0.4]).unwrap().abs() < 1e-14);
    }

    #[test]
    fn budget_split_spends_exactly_eps() {
        let m = StatModel::bernoulli(1).unwrap();
        let strats: Vec<Box<dyn NodeStrategy>> =
            (0..2).map(|_| Box::new(BudgetSplit::new(2, 1.0, 2).unwrap()) as Box<dyn NodeStrategy>).collect();
        let tf = transcript_fisher(&strats, 2, &m, &[0.4]).unwrap();
        assert_relative_eq!(tf.max_loss, 1.0, epsilon = 1e-12);
        assert_eq!(tf.leaves, 16);
        assert_relative_eq!(tf.trace, tf.chain_sum, epsilon = 1e-12);
        let mut rng = seeded(0);
        let t = run_blackboard(&strats, 2, &m, &[0.4], &mut rng).unwrap();
        assert_eq!(t.messages.len(), 4);
        assert_eq!(t.board(1).len(), 2);
    }

    #[test]
    fn overspending_is_caught() {
        let m = StatModel::bernoulli(1).unwrap();
        // two full-budget rounds under a budget of ε
        let strats: Vec<Box<dyn NodeStrategy>> = vec![Box::new(Constant { channel: rr(1.0) })];
        let err = transcript_fisher(&strats, 2, &m, &[0.4]).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { node: 0, .. }));
        let mut rng = seeded(1);
        assert!(run_blackboard(&strats, 2, &m, &[0.4], &mut rng).is_err());
    }

    #[test]
    fn sequential_frequencies_match_enumeration() {
        let m = StatModel::bernoulli(1).unwrap();
        let base = rr(1.0);
        let strats: Vec<Box<dyn NodeStrategy>> =
            vec![Box::new(Constant { channel: base.clone() }), Box::new(BiasFlip::new(base.clone(), 1).unwrap())];
        let t = 0.3;
        let m1 = t * base.prob(1, 1) + (1.0 - t) * base.prob(0, 1);
        // node 2 reports 1 − RR(x) after y₁ = 1
        let joint = |y1: usize, y2: usize| {
            let p1 = if y1 == 1 { m1 } else { 1.0 - m1 };
            let p2_one = if y1 == 1 { 1.0 - m1 } else { m1 };
            p1 * if y2 == 1 { p2_one } else { 1.0 - p2_one }
        };
        let mut rng = seeded(12);
        let n = 100_000;
        let mut counts = [[0usize; 2]; 2];
        for _ in 0..n {
            let tr = run_sequential(&strats, &m, &[t], &mut rng).unwrap();
            counts[tr.messages[0].symbol][tr.messages[1].symbol] += 1;
        }
        for (a, row) in counts.iter().enumerate() {
            for (b, &c) in row.iter().enumerate() {
                let p = joint(a, b);
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!((c as f64 / n as f64 - p).abs() < 4.0 * se);
            }
        }
        let empty: Vec<Box<dyn NodeStrategy>> = Vec::new();
        assert!(run_sequential(&empty, &m, &[t], &mut rng).unwrap().messages.is_empty());
    }

    #[test]
    fn random_adaptive_is_deterministic_and_within_budget() {
        let m = StatModel::multinomial(2).unwrap();
        let mk = |seed| -> Box<dyn NodeStrategy> {
            Box::new(RandomAdaptive { eps: 1.5, rounds: 2, n_inputs: 3, n_outputs: 3, seed })
        };
        let strats = vec![mk(1), mk(2)];
        let a = transcript_fisher(&strats, 2, &m, &[0.3, 0.3]).unwrap();
        let b = transcript_fisher(&strats, 2, &m, &[0.3, 0.3]).unwrap();
        assert_eq!(a, b);
        assert!(a.max_loss <= 1.5 + 1e-12);
        assert_relative_eq!(a.trace, a.chain_sum, epsilon = 1e-10);
        assert_ne!(strats[1].channel(0, &[0]).unwrap(), strats[1].channel(0, &[1]).unwrap());
    }

    #[test]
    fn templates_build() {
        let t: StrategyTemplate = serde_json::from_str(r#"{"template":"budget_split","eps":1.0,"rounds":2}"#).unwrap();
        let s = t.build(2).unwrap();
        assert_eq!(s.eps(), 1.0);
        assert_eq!(s.channel(5, &[]).unwrap().n_outputs(), 1);
    }
}
