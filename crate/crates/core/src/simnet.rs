//! Round-synchronized message passing: every agent is an isolated process
//! that sees only its own fields and the messages delivered to it.
//!
//! A round has two phases. First every agent publishes a message built from
//! its pre-round state; then every agent updates from its mailbox alone.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::engine::{
    check_alpha, check_compatible, check_finite, check_residual, check_run_args, mix_estimate,
    mix_tracker, trace_record, ConvergenceTrace, Initialization, RunReport, StopCriteria,
    TrackerBlocks, Wiring,
};
use crate::error::{Error, Result};
use crate::game::{ClusterGameSpec, ConsensualPoint};
use crate::topology::CompositeMixing;

pub type AgentId = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct RoundMessage {
    pub sender: AgentId,
    /// Full stacked estimate `x_(ij)`.
    pub estimate: Vec<f64>,
    /// `v_ij`; stripped on inter-cluster links.
    pub tracker: Option<Vec<f64>>,
}

/// What an agent read during a round, for locality audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadEvent {
    pub round: usize,
    pub reader: AgentId,
    pub source: AgentId,
    pub tracker: bool,
}

#[derive(Debug, Clone)]
pub struct AgentProcess {
    id: AgentId,
    estimate: Vec<f64>,
    tracker: Vec<f64>,
    gradient: Vec<f64>,
    /// Intra-cluster neighbors `(l, a_i^{jl})`, self included.
    intra: Vec<(usize, f64)>,
    /// Inter-cluster neighbors `(h, a₀^{ih})`, self included; empty unless representative.
    inter: Vec<(usize, f64)>,
    mailbox: BTreeMap<AgentId, RoundMessage>,
}

impl AgentProcess {
    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn is_representative(&self) -> bool {
        self.id.1 == 0
    }

    pub fn estimate(&self) -> &[f64] {
        &self.estimate
    }

    pub fn tracker(&self) -> &[f64] {
        &self.tracker
    }

    /// Agents this process receives from, excluding itself.
    pub fn intra_neighbors(&self) -> Vec<AgentId> {
        self.intra
            .iter()
            .filter(|(l, _)| *l != self.id.1)
            .map(|&(l, _)| (self.id.0, l))
            .collect()
    }

    pub fn inter_neighbors(&self) -> Vec<AgentId> {
        self.inter
            .iter()
            .filter(|(h, _)| *h != self.id.0)
            .map(|&(h, _)| (h, 0))
            .collect()
    }

    fn publish(&self) -> RoundMessage {
        RoundMessage {
            sender: self.id,
            estimate: self.estimate.clone(),
            tracker: Some(self.tracker.clone()),
        }
    }

    fn received(&self, from: AgentId) -> Result<&RoundMessage> {
        self.mailbox.get(&from).ok_or_else(|| {
            Error::Protocol(format!("agent {:?} expected a message from {:?}", self.id, from))
        })
    }

    /// Phase two: the new estimate, tracker and gradient from own state and
    /// the mailbox only.
    fn update(&mut self, game: &ClusterGameSpec, alpha: f64, round: usize, log: &mut Vec<ReadEvent>) -> Result<()> {
        let (i, j) = self.id;
        let mut reads = Vec::new();

        let mut intra_x: Vec<(f64, &[f64])> = Vec::with_capacity(self.intra.len());
        let mut intra_v: Vec<(f64, &[f64])> = Vec::with_capacity(self.intra.len());
        for &(l, w) in &self.intra {
            if l == j {
                intra_x.push((w, &self.estimate));
                intra_v.push((w, &self.tracker));
                continue;
            }
            let msg = self.received((i, l))?;
            let v = msg.tracker.as_deref().ok_or_else(|| {
                Error::Protocol(format!("message from {:?} to {:?} lacks a tracker", (i, l), self.id))
            })?;
            intra_x.push((w, &msg.estimate));
            intra_v.push((w, v));
            reads.push(((i, l), true));
        }
        let inter_x = if self.is_representative() {
            let mut out: Vec<(f64, &[f64])> = Vec::with_capacity(self.inter.len());
            for &(h, w) in &self.inter {
                if h == i {
                    out.push((w, &self.estimate));
                } else {
                    out.push((w, &self.received((h, 0))?.estimate));
                    reads.push(((h, 0), false));
                }
            }
            Some(out)
        } else {
            None
        };

        let mut x = vec![0.0; self.estimate.len()];
        mix_estimate(&intra_x, inter_x.as_deref(), &mut x);
        for (c, k) in game.block_range(i).enumerate() {
            x[k] -= alpha * self.tracker[c];
        }
        let mut g = vec![0.0; self.gradient.len()];
        game.gradient_into(i, j, &x, &mut g);
        let mut v = vec![0.0; self.tracker.len()];
        mix_tracker(&intra_v, &g, &self.gradient, &mut v);

        log.extend(reads.into_iter().map(|(source, tracker)| ReadEvent {
            round,
            reader: self.id,
            source,
            tracker,
        }));
        self.estimate = x;
        self.tracker = v;
        self.gradient = g;
        self.mailbox.clear();
        Ok(())
    }
}

/// All agent processes plus the observer-side trace.
#[derive(Debug, Clone)]
pub struct Network {
    game: ClusterGameSpec,
    mixing: CompositeMixing,
    agents: Vec<AgentProcess>,
    reference: Option<ConsensualPoint>,
    round: usize,
    trace: ConvergenceTrace,
    read_log: Option<Vec<ReadEvent>>,
}

/// One process per agent; the first agent of every cluster is its representative.
pub fn spawn_network(
    game: &ClusterGameSpec,
    mixing: &CompositeMixing,
    init: Initialization,
    reference: Option<ConsensualPoint>,
) -> Result<Network> {
    check_compatible(game, mixing, reference.as_ref())?;
    let x = init.resolve(game)?.into_inner();
    let wiring = Wiring::new(mixing);
    let mut agents = Vec::with_capacity(game.agent_count());
    for i in 0..game.cluster_count() {
        for j in 0..game.cluster_sizes()[i] {
            let estimate: Vec<f64> = x.row(mixing.global_index(i, j)).iter().copied().collect();
            let gradient = game.gradient(i, j, &estimate);
            agents.push(AgentProcess {
                id: (i, j),
                estimate,
                tracker: gradient.clone(),
                gradient,
                intra: wiring.intra[i][j].clone(),
                inter: if j == 0 { wiring.inter[i].clone() } else { Vec::new() },
                mailbox: BTreeMap::new(),
            });
        }
    }
    let mut net = Network {
        game: game.clone(),
        mixing: mixing.clone(),
        agents,
        reference,
        round: 0,
        trace: ConvergenceTrace::default(),
        read_log: None,
    };
    let rec = net.record();
    net.trace.push(rec);
    Ok(net)
}

impl Network {
    pub fn agents(&self) -> &[AgentProcess] {
        &self.agents
    }

    pub fn agent(&self, cluster: usize, agent: usize) -> &AgentProcess {
        &self.agents[self.mixing.global_index(cluster, agent)]
    }

    pub fn rounds(&self) -> usize {
        self.round
    }

    pub fn trace(&self) -> &ConvergenceTrace {
        &self.trace
    }

    /// Starts recording every message read.
    pub fn enable_read_log(&mut self) {
        self.read_log.get_or_insert_with(Vec::new);
    }

    pub fn read_log(&self) -> &[ReadEvent] {
        self.read_log.as_deref().unwrap_or(&[])
    }

    /// Checks every logged read against the communication graphs: intra reads
    /// stay inside the cluster along an edge, inter reads go representative to
    /// representative along an inter-cluster edge and never carry trackers.
    pub fn verify_locality(&self) -> Result<()> {
        for ev in self.read_log() {
            let ((ri, rj), (si, sj)) = (ev.reader, ev.source);
            let ok = if ri == si {
                self.mixing.intra(ri).weight(rj, sj) > 0.0 && rj != sj
            } else {
                !ev.tracker && rj == 0 && sj == 0 && self.mixing.inter().weight(ri, si) > 0.0
            };
            if !ok {
                return Err(Error::Protocol(format!(
                    "round {}: agent {:?} read {} from non-neighbor {:?}",
                    ev.round,
                    ev.reader,
                    if ev.tracker { "a tracker" } else { "an estimate" },
                    ev.source
                )));
            }
        }
        Ok(())
    }

    /// Observer view: rows stacked in global order.
    pub fn estimates(&self) -> DMatrix<f64> {
        let q = self.game.total_dim();
        let mut x = DMatrix::zeros(self.agents.len(), q);
        for (r, a) in self.agents.iter().enumerate() {
            for (c, v) in a.estimate.iter().enumerate() {
                x[(r, c)] = *v;
            }
        }
        x
    }

    pub fn trackers(&self) -> TrackerBlocks {
        let blocks = (0..self.game.cluster_count())
            .map(|i| {
                let o = self.mixing.offsets()[i];
                let ni = self.game.cluster_sizes()[i];
                let qi = self.game.strategy_dims()[i];
                DMatrix::from_fn(ni, qi, |j, c| self.agents[o + j].tracker[c])
            })
            .collect();
        TrackerBlocks::from_blocks(blocks)
    }

    /// `x̄_π` of the current estimates.
    pub fn average_point(&self) -> ConsensualPoint {
        let avg: DVector<f64> = (self.mixing.pi().transpose() * self.estimates()).transpose();
        ConsensualPoint::new(&self.game, avg).expect("dimensions fixed at spawn")
    }

    fn record(&self) -> crate::engine::TraceRecord {
        trace_record(
            &self.game,
            &self.mixing,
            &self.estimates(),
            &self.trackers(),
            self.reference.as_ref(),
            self.round,
        )
    }

    /// Delivers one message to every recipient the sender's links reach.
    fn deliver(&mut self, messages: Vec<RoundMessage>) {
        for msg in messages {
            let (i, j) = msg.sender;
            let sender = &self.agents[self.mixing.global_index(i, j)];
            let intra = sender.intra_neighbors();
            let inter = sender.inter_neighbors();
            for to in intra {
                let r = self.mixing.global_index(to.0, to.1);
                self.agents[r].mailbox.insert(msg.sender, msg.clone());
            }
            for to in inter {
                let r = self.mixing.global_index(to.0, to.1);
                let stripped = RoundMessage {
                    tracker: None,
                    ..msg.clone()
                };
                self.agents[r].mailbox.insert(msg.sender, stripped);
            }
        }
    }

    /// One synchronous round.
    pub fn round(&mut self, alpha: f64) -> Result<()> {
        check_alpha(alpha)?;
        let messages: Vec<RoundMessage> = self.agents.iter().map(AgentProcess::publish).collect();
        self.deliver(messages);
        // barrier: every mailbox is full before anyone updates
        let round = self.round + 1;
        let mut log = Vec::new();
        for a in &mut self.agents {
            a.update(&self.game, alpha, round, &mut log)?;
        }
        if let Some(l) = &mut self.read_log {
            l.extend(log);
        }
        self.round = round;
        let x = self.estimates();
        let trackers = self.trackers();
        check_finite(&x, trackers.blocks(), round)?;
        let rec = trace_record(&self.game, &self.mixing, &x, &trackers, self.reference.as_ref(), round);
        check_residual(&rec)?;
        self.trace.push(rec);
        Ok(())
    }

    /// Rounds until the residual of `x̄_π` reaches the tolerance.
    pub fn run(&mut self, alpha: f64, stop: StopCriteria) -> Result<RunReport> {
        check_run_args(alpha, stop)?;
        let start = self.round;
        let mut residual = self.trace.last().map_or(f64::INFINITY, |r| r.ne_residual);
        while residual > stop.residual_tol && self.round - start < stop.max_iters {
            self.round(alpha)?;
            residual = self.trace.last().expect("record pushed").ne_residual;
        }
        Ok(RunReport {
            iterations: self.round - start,
            converged: residual <= stop.residual_tol,
            final_residual: residual,
            empirical_rate: self.trace.empirical_rate(),
        })
    }

    /// Drops one pending message, to exercise protocol checks.
    #[cfg(test)]
    fn round_dropping(&mut self, alpha: f64, victim: AgentId, from: AgentId) -> Result<()> {
        let messages: Vec<RoundMessage> = self.agents.iter().map(AgentProcess::publish).collect();
        self.deliver(messages);
        let r = self.mixing.global_index(victim.0, victim.1);
        self.agents[r].mailbox.remove(&from);
        let mut log = Vec::new();
        for a in &mut self.agents {
            a.update(&self.game, alpha, self.round + 1, &mut log)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{DgtState, EstimateMatrix};
    use crate::game::{build_cournot, quadratic_identity, CournotParams};
    use crate::topology::{compose_adjacency, GraphKind, GraphTopology};

    fn cournot() -> (ClusterGameSpec, CompositeMixing) {
        let inter = GraphTopology::uniform_complete(5).unwrap();
        let game = build_cournot(CournotParams::default(), &inter).unwrap();
        let intra = (0..5).map(|_| GraphKind::Ring.metropolis(20).unwrap()).collect();
        (game, compose_adjacency(inter, intra).unwrap())
    }

    #[test]
    fn cournot_network_shape() {
        let (game, mixing) = cournot();
        let net = spawn_network(&game, &mixing, Initialization::seeded(0), None).unwrap();
        assert_eq!(net.agents().len(), 100);
        let linked = net.agents().iter().filter(|a| !a.inter_neighbors().is_empty()).count();
        assert_eq!(linked, 5);
        assert_eq!(net.agent(2, 0).inter_neighbors(), vec![(0, 0), (1, 0), (3, 0), (4, 0)]);
        assert_eq!(net.agent(2, 5).intra_neighbors(), vec![(2, 4), (2, 6)]);
    }

    #[test]
    fn degenerate_networks() {
        let single = quadratic_identity(&[1], &[1]).unwrap().into_spec().unwrap();
        let m1 = compose_adjacency(
            GraphTopology::uniform_complete(1).unwrap(),
            vec![GraphTopology::uniform_complete(1).unwrap()],
        )
        .unwrap();
        let net = spawn_network(&single, &m1, Initialization::seeded(0), None).unwrap();
        assert_eq!(net.agents().len(), 1);
        assert!(net.agents()[0].intra_neighbors().is_empty());
        assert!(net.agents()[0].inter_neighbors().is_empty());

        let pair = quadratic_identity(&[1, 1], &[1, 1]).unwrap().into_spec().unwrap();
        let m2 = compose_adjacency(
            GraphKind::Path.metropolis(2).unwrap(),
            vec![GraphTopology::uniform_complete(1).unwrap(); 2],
        )
        .unwrap();
        let net = spawn_network(&pair, &m2, Initialization::seeded(0), None).unwrap();
        assert_eq!(net.agents().len(), 2);
        assert!(net.agents().iter().all(|a| a.intra_neighbors().is_empty()));
        assert_eq!(net.agents()[0].inter_neighbors(), vec![(1, 0)]);
    }

    #[test]
    fn round_matches_agentwise_step_exactly() {
        let (game, mixing) = cournot();
        let x0 = EstimateMatrix::seeded(&game, 4, 0.0, 10.0).unwrap();
        let mut net = spawn_network(&game, &mixing, Initialization::Matrix(x0.clone()), None).unwrap();
        let mut state = DgtState::init(&game, &mixing, Initialization::Matrix(x0), None).unwrap();
        for _ in 0..10 {
            net.round(0.02).unwrap();
            state.step_agentwise(0.02).unwrap();
            assert_eq!(&net.estimates(), state.estimates());
            assert_eq!(&net.trackers(), state.trackers());
        }
    }

    #[test]
    fn zero_step_round_is_pure_mixing() {
        let (game, mixing) = cournot();
        let mut net = spawn_network(&game, &mixing, Initialization::seeded(9), None).unwrap();
        let expect = mixing.matrix() * net.estimates();
        net.round(0.0).unwrap();
        assert!((net.estimates() - expect).amax() < 1e-13);
    }

    #[test]
    fn reads_respect_the_graphs() {
        let (game, mixing) = cournot();
        let mut net = spawn_network(&game, &mixing, Initialization::seeded(1), None).unwrap();
        net.enable_read_log();
        for _ in 0..3 {
            net.round(0.02).unwrap();
        }
        // ring: two intra reads each; representatives add four inter reads
        assert_eq!(net.read_log().len(), 3 * (100 * 2 + 5 * 4));
        net.verify_locality().unwrap();
        assert!(net.read_log().iter().filter(|e| e.reader.0 != e.source.0).all(|e| !e.tracker));
    }

    #[test]
    fn missing_message_is_a_protocol_error() {
        let (game, mixing) = cournot();
        let mut net = spawn_network(&game, &mixing, Initialization::seeded(1), None).unwrap();
        let err = net.round_dropping(0.02, (1, 3), (1, 4)).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
        let mut net = spawn_network(&game, &mixing, Initialization::seeded(1), None).unwrap();
        let err = net.round_dropping(0.02, (0, 0), (3, 0)).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
    }
}
