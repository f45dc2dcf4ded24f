//! Simulated message passing between logical ranks.
//!
//! A [`RankProgram`] runs as a sequence of barriered phases. In each phase
//! every rank receives the messages sent to it during the previous phase,
//! computes, and queues outgoing messages. Ranks are mapped onto a pool of
//! `workers` threads; a rank's state is touched by one worker at a time and
//! ranks interact only through the batches delivered at barriers.
//!
//! Delivery order into an inbox is by sender rank, then send order, so a
//! program whose logic depends only on its rank id, its own RNG stream and
//! its inbox produces the same output for every worker count.

use std::io::Write;

use rayon::prelude::*;

use crate::{Error, RankId, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MessageKind {
    /// Single-element payload: a number of items the sender will need.
    CountAnnouncement,
    /// A list of vertex ids answering an earlier announcement.
    EndpointList,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub from: RankId,
    pub to: RankId,
    /// Phase in which the message was sent.
    pub phase: usize,
    pub kind: MessageKind,
    pub payload: Vec<u64>,
}

impl Message {
    pub fn byte_len(&self) -> u64 {
        8 * self.payload.len() as u64
    }
}

/// Outgoing queue of one rank for one phase.
#[derive(Debug)]
pub struct Outbox {
    from: RankId,
    phase: usize,
    ranks: usize,
    messages: Vec<Message>,
}

impl Outbox {
    fn new(from: RankId, phase: usize, ranks: usize) -> Self {
        Outbox {
            from,
            phase,
            ranks,
            messages: Vec::new(),
        }
    }

    pub fn send(&mut self, to: RankId, kind: MessageKind, payload: Vec<u64>) -> Result<()> {
        if to >= self.ranks {
            return Err(Error::protocol(format!(
                "rank {} sent to rank {to}, but only {} ranks exist",
                self.from, self.ranks
            )));
        }
        if kind == MessageKind::CountAnnouncement && payload.len() != 1 {
            return Err(Error::protocol(format!(
                "count announcement from rank {} carries {} values",
                self.from,
                payload.len()
            )));
        }
        self.messages.push(Message {
            from: self.from,
            to,
            phase: self.phase,
            kind,
            payload,
        });
        Ok(())
    }
}

/// Messages delivered to one rank at a barrier.
#[derive(Debug, Default)]
pub struct Inbox {
    messages: Vec<Message>,
}

impl Inbox {
    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    /// Messages ordered by sender rank, then send order.
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn into_messages(self) -> Vec<Message> {
        self.messages
    }
}

/// Per-rank logic executed by [`run_ranks`].
pub trait RankProgram: Sync {
    type State: Send;
    type Output: Send;

    /// Number of compute/exchange phases before [`RankProgram::finish`].
    fn phase_count(&self) -> usize;

    fn init(&self, rank: RankId) -> Result<Self::State>;

    /// Phase `phase` on `rank`. `inbox` holds what was sent during `phase - 1`
    /// (empty in phase 0).
    fn step(
        &self,
        phase: usize,
        rank: RankId,
        state: &mut Self::State,
        inbox: Inbox,
        outbox: &mut Outbox,
    ) -> Result<()>;

    /// Receives the messages of the last phase and produces the rank's output.
    fn finish(&self, rank: RankId, state: Self::State, inbox: Inbox) -> Result<Self::Output>;
}

/// Volume sent from one rank to another in one phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrafficRecord {
    pub phase: usize,
    pub from: RankId,
    pub to: RankId,
    pub bytes: u64,
}

#[derive(Debug)]
pub struct RunReport<O> {
    pub outputs: Vec<O>,
    pub traffic: Vec<TrafficRecord>,
}

/// Runs `program` on `ranks` logical ranks using `workers` threads.
///
/// A failing rank aborts the run; when several fail in the same phase the
/// lowest rank id is reported.
pub fn run_ranks<P: RankProgram>(
    ranks: usize,
    workers: usize,
    program: &P,
) -> Result<RunReport<P::Output>> {
    if ranks == 0 {
        return Err(Error::config("at least one rank is required"));
    }
    if workers == 0 {
        return Err(Error::config("at least one worker is required"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;

    pool.install(|| {
        let mut states = (0..ranks)
            .into_par_iter()
            .map(|rank| program.init(rank).map_err(|e| rank_failed(rank, e)))
            .collect::<Result<Vec<_>>>()?;

        let mut inboxes: Vec<Inbox> = (0..ranks).map(|_| Inbox::default()).collect();
        let mut traffic = Vec::new();

        for phase in 0..program.phase_count() {
            let outboxes = states
                .par_iter_mut()
                .zip(inboxes.into_par_iter())
                .enumerate()
                .map(|(rank, (state, inbox))| {
                    let mut outbox = Outbox::new(rank, phase, ranks);
                    program
                        .step(phase, rank, state, inbox, &mut outbox)
                        .map(|()| outbox)
                        .map_err(|e| rank_failed(rank, e))
                })
                .collect::<Result<Vec<_>>>()?;
            inboxes = deliver(ranks, outboxes, &mut traffic);
        }

        let outputs = states
            .into_par_iter()
            .zip(inboxes.into_par_iter())
            .enumerate()
            .map(|(rank, (state, inbox))| {
                program
                    .finish(rank, state, inbox)
                    .map_err(|e| rank_failed(rank, e))
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(RunReport { outputs, traffic })
    })
}

fn rank_failed(rank: RankId, source: Error) -> Error {
    match source {
        already @ Error::RankFailed { .. } => already,
        source => Error::RankFailed {
            rank,
            source: Box::new(source),
        },
    }
}

/// Routes outboxes (indexed by sender) into inboxes (indexed by receiver).
fn deliver(ranks: usize, outboxes: Vec<Outbox>, traffic: &mut Vec<TrafficRecord>) -> Vec<Inbox> {
    let mut inboxes: Vec<Inbox> = (0..ranks).map(|_| Inbox::default()).collect();
    for outbox in outboxes {
        let mut volume: Vec<(RankId, u64)> = Vec::new();
        for message in outbox.messages {
            match volume.iter_mut().find(|(to, _)| *to == message.to) {
                Some((_, bytes)) => *bytes += message.byte_len(),
                None => volume.push((message.to, message.byte_len())),
            }
            inboxes[message.to].messages.push(message);
        }
        volume.sort_unstable_by_key(|&(to, _)| to);
        traffic.extend(volume.into_iter().map(|(to, bytes)| TrafficRecord {
            phase: outbox.phase,
            from: outbox.from,
            to,
            bytes,
        }));
    }
    inboxes
}

/// Dumps traffic records as `phase,from,to,bytes` lines.
pub fn write_traffic_csv<W: Write>(records: &[TrafficRecord], mut out: W) -> Result<()> {
    writeln!(out, "phase,from,to,bytes")?;
    for r in records {
        writeln!(out, "{},{},{},{}", r.phase, r.from, r.to, r.bytes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rank_rng;
    use rand::Rng;

    struct EmitRank;

    impl RankProgram for EmitRank {
        type State = ();
        type Output = RankId;

        fn phase_count(&self) -> usize {
            0
        }
        fn init(&self, _: RankId) -> Result<()> {
            Ok(())
        }
        fn step(&self, _: usize, _: RankId, _: &mut (), _: Inbox, _: &mut Outbox) -> Result<()> {
            unreachable!()
        }
        fn finish(&self, rank: RankId, _: (), _: Inbox) -> Result<RankId> {
            Ok(rank)
        }
    }

    #[test]
    fn single_rank() {
        assert_eq!(run_ranks(1, 1, &EmitRank).unwrap().outputs, vec![0]);
    }

    struct SumToZero;

    impl RankProgram for SumToZero {
        type State = ();
        type Output = Option<u64>;

        fn phase_count(&self) -> usize {
            1
        }
        fn init(&self, _: RankId) -> Result<()> {
            Ok(())
        }
        fn step(
            &self,
            _: usize,
            rank: RankId,
            _: &mut (),
            _: Inbox,
            out: &mut Outbox,
        ) -> Result<()> {
            out.send(0, MessageKind::CountAnnouncement, vec![rank as u64])
        }
        fn finish(&self, rank: RankId, _: (), inbox: Inbox) -> Result<Option<u64>> {
            Ok((rank == 0).then(|| inbox.messages().iter().map(|m| m.payload[0]).sum()))
        }
    }

    #[test]
    fn four_ranks_sum_at_root() {
        let report = run_ranks(4, 2, &SumToZero).unwrap();
        assert_eq!(report.outputs, vec![Some(6), None, None, None]);
        assert_eq!(report.traffic.len(), 4);
        assert!(report.traffic.iter().all(|t| t.to == 0 && t.bytes == 8));
    }

    /// Every rank sends a random-length burst to random peers each phase and
    /// records what it sees; checks barrier tagging and FIFO per pair.
    struct Gossip {
        phases: usize,
        seed: u64,
    }

    impl RankProgram for Gossip {
        type State = (crate::rng::StreamRng, Vec<(usize, RankId, u64)>);
        type Output = Vec<(usize, RankId, u64)>;

        fn phase_count(&self) -> usize {
            self.phases
        }
        fn init(&self, rank: RankId) -> Result<Self::State> {
            Ok((rank_rng(self.seed, rank), Vec::new()))
        }
        fn step(
            &self,
            phase: usize,
            _rank: RankId,
            (rng, seen): &mut Self::State,
            inbox: Inbox,
            out: &mut Outbox,
        ) -> Result<()> {
            for m in inbox.messages() {
                assert_eq!(m.phase + 1, phase, "message leaked across a barrier");
                seen.push((m.phase, m.from, m.payload[0]));
            }
            let mut last_from: Option<(RankId, u64)> = None;
            for m in inbox.messages() {
                if let Some((from, seq)) = last_from {
                    assert!(m.from > from || (m.from == from && m.payload[0] > seq));
                }
                last_from = Some((m.from, m.payload[0]));
            }
            for seq in 0..rng.random_range(0..6u64) {
                let to = rng.random_range(0..out.ranks);
                out.send(to, MessageKind::EndpointList, vec![seq, rng.random()])?;
            }
            Ok(())
        }
        fn finish(
            &self,
            _: RankId,
            (_, mut seen): Self::State,
            inbox: Inbox,
        ) -> Result<Self::Output> {
            seen.extend(
                inbox
                    .messages()
                    .iter()
                    .map(|m| (m.phase, m.from, m.payload[0])),
            );
            Ok(seen)
        }
    }

    #[test]
    fn schedule_independent_and_barriered() {
        let program = Gossip {
            phases: 5,
            seed: 11,
        };
        let one = run_ranks(9, 1, &program).unwrap();
        let many = run_ranks(9, 8, &program).unwrap();
        assert_eq!(one.outputs, many.outputs);
        assert_eq!(one.traffic, many.traffic);
    }

    struct BadSend;

    impl RankProgram for BadSend {
        type State = ();
        type Output = ();
        fn phase_count(&self) -> usize {
            1
        }
        fn init(&self, _: RankId) -> Result<()> {
            Ok(())
        }
        fn step(
            &self,
            _: usize,
            rank: RankId,
            _: &mut (),
            _: Inbox,
            out: &mut Outbox,
        ) -> Result<()> {
            if rank >= 2 {
                out.send(10, MessageKind::EndpointList, vec![])?;
            }
            Ok(())
        }
        fn finish(&self, _: RankId, _: (), _: Inbox) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn out_of_range_send_identifies_lowest_failing_rank() {
        match run_ranks(4, 4, &BadSend).unwrap_err() {
            Error::RankFailed { rank, source } => {
                assert_eq!(rank, 2);
                assert!(matches!(*source, Error::Protocol(_)));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn announcement_needs_single_value() {
        let mut out = Outbox::new(0, 0, 2);
        assert!(out
            .send(1, MessageKind::CountAnnouncement, vec![1, 2])
            .is_err());
        assert!(out.send(1, MessageKind::CountAnnouncement, vec![1]).is_ok());
    }

    #[test]
    fn rejects_zero_ranks_or_workers() {
        assert!(run_ranks(0, 1, &EmitRank).is_err());
        assert!(run_ranks(1, 0, &EmitRank).is_err());
    }

    #[test]
    fn traffic_csv() {
        let mut out = Vec::new();
        let records = [TrafficRecord {
            phase: 0,
            from: 1,
            to: 0,
            bytes: 8,
        }];
        write_traffic_csv(&records, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "phase,from,to,bytes\n0,1,0,8\n"
        );
    }
}
