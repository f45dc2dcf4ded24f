//! Parallel Barabási–Albert generation with two-phase preferential attachment.
//!
//! Each rank owns `n` consecutive vertices and creates `k` edges per local
//! vertex. In phase one a rank only decides which *rank* each edge points to:
//! the first `s` edges are bound to the members of the rank's factions, and
//! every later edge copies the target of a uniformly chosen earlier edge
//! (preferential attachment over ranks), or with probability `q` targets a
//! random rank outside the rank's factions. Ranks then announce how many
//! endpoints they need from each peer. In phase two every rank draws the
//! requested endpoints among its own vertices by preferential attachment and
//! replies with the lists; the requester substitutes them in order.

use std::collections::BTreeMap;

use rand::Rng;

use crate::graph::{EdgeList, Partition, RankId, VertexId};
use crate::rng::{rank_rng, StreamRng};
use crate::transport::{self, Inbox, MessageKind, Outbox, RankProgram, TrafficRecord};
use crate::{Error, Result};

/// Assignment of ranks to factions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactionConfig {
    ranks: usize,
    factions: Vec<Vec<RankId>>,
    membership: Vec<Vec<usize>>,
}

impl FactionConfig {
    /// Factions where every rank belongs to the factions that list it.
    pub fn new(ranks: usize, factions: Vec<Vec<RankId>>) -> Result<Self> {
        FactionConfig::with_memberships(ranks, factions, &[])
    }

    /// Like [`FactionConfig::new`], but the listed ranks belong exactly to the
    /// given faction indices instead. Membership need not imply being listed
    /// in the faction.
    pub fn with_memberships(
        ranks: usize,
        factions: Vec<Vec<RankId>>,
        memberships: &[(RankId, Vec<usize>)],
    ) -> Result<Self> {
        if ranks == 0 {
            return Err(Error::config("faction config needs at least one rank"));
        }
        let mut membership = vec![Vec::new(); ranks];
        for (i, faction) in factions.iter().enumerate() {
            if faction.is_empty() {
                return Err(Error::config(format!("faction {i} is empty")));
            }
            for (pos, &rank) in faction.iter().enumerate() {
                if rank >= ranks {
                    return Err(Error::config(format!(
                        "faction {i} names rank {rank}, but only {ranks} ranks exist"
                    )));
                }
                if faction[..pos].contains(&rank) {
                    return Err(Error::config(format!(
                        "faction {i} lists rank {rank} twice"
                    )));
                }
                membership[rank].push(i);
            }
        }
        let mut overridden = vec![false; ranks];
        for (rank, list) in memberships {
            let rank = *rank;
            if rank >= ranks {
                return Err(Error::config(format!(
                    "membership given for rank {rank}, but only {ranks} ranks exist"
                )));
            }
            if std::mem::replace(&mut overridden[rank], true) {
                return Err(Error::config(format!(
                    "membership of rank {rank} given twice"
                )));
            }
            for (pos, &f) in list.iter().enumerate() {
                if f >= factions.len() {
                    return Err(Error::config(format!(
                        "rank {rank} joins faction {f}, but only {} factions exist",
                        factions.len()
                    )));
                }
                if list[..pos].contains(&f) {
                    return Err(Error::config(format!(
                        "rank {rank} joins faction {f} twice"
                    )));
                }
            }
            membership[rank] = list.clone();
        }
        if let Some(rank) = membership.iter().position(Vec::is_empty) {
            return Err(Error::config(format!("rank {rank} belongs to no faction")));
        }
        Ok(FactionConfig {
            ranks,
            factions,
            membership,
        })
    }

    /// One faction holding every rank.
    pub fn all(ranks: usize) -> Result<Self> {
        FactionConfig::new(ranks, vec![(0..ranks).collect()])
    }

    /// Consecutive blocks of `block` ranks (the last may be shorter).
    pub fn blocks(ranks: usize, block: usize) -> Result<Self> {
        if block == 0 {
            return Err(Error::config("faction block size must be at least 1"));
        }
        let factions = (0..ranks)
            .collect::<Vec<_>>()
            .chunks(block)
            .map(<[RankId]>::to_vec)
            .collect();
        FactionConfig::new(ranks, factions)
    }

    /// Parses the shorthand forms `all` and `blocks:<m>`.
    pub fn from_shorthand(spec: &str, ranks: usize) -> Result<Self> {
        match spec.split_once(':') {
            None if spec == "all" => FactionConfig::all(ranks),
            Some(("blocks", m)) => {
                let m = m
                    .parse()
                    .map_err(|_| Error::config(format!("bad block size in {spec:?}")))?;
                FactionConfig::blocks(ranks, m)
            }
            _ => Err(Error::config(format!(
                "unknown faction shorthand {spec:?} (expected all or blocks:<m>)"
            ))),
        }
    }

    pub fn parse_file_contents(bytes: &[u8], ranks: usize) -> Result<Self> {
        let file = crate::io::parse_factions(bytes)?;
        FactionConfig::with_memberships(ranks, file.factions, &file.memberships)
    }

    pub fn ranks(&self) -> usize {
        self.ranks
    }

    pub fn factions(&self) -> &[Vec<RankId>] {
        &self.factions
    }

    /// Indices of the factions `rank` belongs to, in membership order.
    pub fn membership(&self, rank: RankId) -> &[usize] {
        &self.membership[rank]
    }

    /// Concatenation of `rank`'s factions in membership order.
    pub fn prefix(&self, rank: RankId) -> Vec<RankId> {
        self.membership[rank]
            .iter()
            .flat_map(|&f| self.factions[f].iter().copied())
            .collect()
    }

    /// `s(p)`: summed sizes of `rank`'s factions.
    pub fn prefix_len(&self, rank: RankId) -> usize {
        self.membership[rank]
            .iter()
            .map(|&f| self.factions[f].len())
            .sum()
    }

    /// Ranks that share no faction with `rank`, ascending.
    pub fn outside(&self, rank: RankId) -> Vec<RankId> {
        let mut inside = vec![false; self.ranks];
        for r in self.prefix(rank) {
            inside[r] = true;
        }
        (0..self.ranks).filter(|&r| !inside[r]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PbaParams {
    pub vertices_per_rank: u64,
    pub edges_per_vertex: u64,
    pub inter_faction_prob: f64,
    pub master_seed: u64,
}

impl PbaParams {
    pub fn validate(&self, factions: &FactionConfig) -> Result<()> {
        if self.vertices_per_rank == 0 {
            return Err(Error::config("vertices per rank must be at least 1"));
        }
        if self.edges_per_vertex == 0 {
            return Err(Error::config("edges per vertex must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.inter_faction_prob) {
            return Err(Error::config(format!(
                "inter-faction probability {} outside [0, 1]",
                self.inter_faction_prob
            )));
        }
        let budget = self.local_edges()?;
        Partition::new(factions.ranks(), self.vertices_per_rank)?;
        for rank in 0..factions.ranks() {
            let s = factions.prefix_len(rank) as u64;
            if s > budget {
                return Err(Error::config(format!(
                    "rank {rank} has a faction prefix of {s} edges but only {budget} local edges"
                )));
            }
        }
        Ok(())
    }

    /// `n * k`, the number of edges each rank creates.
    pub fn local_edges(&self) -> Result<u64> {
        self.vertices_per_rank
            .checked_mul(self.edges_per_vertex)
            .filter(|&e| usize::try_from(e).is_ok())
            .ok_or_else(|| Error::Size("edges per rank overflow".into()))
    }
}

/// Endpoint of an association entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// Unresolved: the endpoint will be chosen by this rank.
    Rank(RankId),
    Vertex(VertexId),
}

/// A rank's working edge list: entry `j` belongs to local vertex `j / k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssocList {
    first_vertex: VertexId,
    edges_per_vertex: u64,
    targets: Vec<Target>,
}

impl AssocList {
    pub fn new(first_vertex: VertexId, edges_per_vertex: u64) -> Self {
        AssocList {
            first_vertex,
            edges_per_vertex,
            targets: Vec::new(),
        }
    }

    pub fn from_targets(
        first_vertex: VertexId,
        edges_per_vertex: u64,
        targets: Vec<Target>,
    ) -> Self {
        AssocList {
            first_vertex,
            edges_per_vertex,
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn vertex_of(&self, j: usize) -> VertexId {
        self.first_vertex + j as u64 / self.edges_per_vertex
    }

    pub fn entries(&self) -> impl Iterator<Item = (VertexId, Target)> + '_ {
        self.targets
            .iter()
            .enumerate()
            .map(|(j, &t)| (self.vertex_of(j), t))
    }

    /// Occurrences of each unresolved target rank, indexed by rank.
    pub fn rank_counts(&self, ranks: usize) -> Vec<u64> {
        let mut counts = vec![0; ranks];
        for t in &self.targets {
            if let Target::Rank(r) = *t {
                counts[r] += 1;
            }
        }
        counts
    }
}

/// Installs the faction prefix: entry `j < s` targets the `j`-th rank of the
/// concatenated faction list.
pub fn init_faction_prefix(
    rank: RankId,
    factions: &FactionConfig,
    params: &PbaParams,
) -> Result<AssocList> {
    let budget = params.local_edges()?;
    let prefix = factions.prefix(rank);
    if prefix.len() as u64 > budget {
        return Err(Error::config(format!(
            "rank {rank}: faction prefix of {} exceeds {budget} local edges",
            prefix.len()
        )));
    }
    let mut targets = Vec::with_capacity(budget as usize);
    targets.extend(prefix.into_iter().map(Target::Rank));
    Ok(AssocList::from_targets(
        rank as u64 * params.vertices_per_rank,
        params.edges_per_vertex,
        targets,
    ))
}

/// Fills the association list up to `n * k` entries and returns it with the
/// per-rank occurrence counts.
///
/// Each new entry copies the target of a uniformly drawn earlier entry. When
/// `inter_faction_prob > 0` a Bernoulli draw first decides whether to instead
/// pick uniformly among ranks outside the rank's factions; if every rank is
/// inside, no such draw is made.
pub fn phase1_associate(
    rank: RankId,
    params: &PbaParams,
    factions: &FactionConfig,
    mut assoc: AssocList,
    rng: &mut impl Rng,
) -> Result<(AssocList, Vec<u64>)> {
    let budget = params.local_edges()? as usize;
    if assoc.is_empty() {
        return Err(Error::config(format!(
            "rank {rank}: phase one needs the faction prefix installed"
        )));
    }
    let outside = factions.outside(rank);
    let q = params.inter_faction_prob;
    if q > 0.0 && outside.is_empty() {
        log::warn!(
            "rank {rank}: inter-faction probability {q} ignored, every rank shares a faction with it"
        );
    }
    let inter = q > 0.0 && !outside.is_empty();
    for j in assoc.len()..budget {
        let target = if inter && rng.random_bool(q) {
            Target::Rank(outside[rng.random_range(0..outside.len())])
        } else {
            assoc.targets[rng.random_range(0..j)]
        };
        assoc.targets.push(target);
    }
    let counts = assoc.rank_counts(factions.ranks());
    Ok((assoc, counts))
}

/// Local vertices available for preferential endpoint selection.
///
/// Vertices join in creation order, spread evenly over the draws: vertex `i`
/// is admitted before draw `d` once `i * D <= d * n` (for `D` total draws).
/// Each joins with `weight` copies, one per edge it already owns, and every
/// draw adds one more copy of the drawn vertex.
#[derive(Clone, Debug)]
pub struct EndpointPool {
    first_vertex: VertexId,
    vertices: u64,
    weight: u64,
    total_draws: u64,
    admitted: u64,
    drawn: u64,
    slots: Vec<VertexId>,
}

impl EndpointPool {
    pub fn new(
        first_vertex: VertexId,
        vertices: u64,
        weight: u64,
        total_draws: u64,
    ) -> Result<Self> {
        if vertices == 0 || weight == 0 {
            return Err(Error::config(
                "endpoint pool needs vertices with nonzero weight",
            ));
        }
        let capacity = vertices.saturating_mul(weight).saturating_add(total_draws);
        Ok(EndpointPool {
            first_vertex,
            vertices,
            weight,
            total_draws,
            admitted: 0,
            drawn: 0,
            slots: Vec::with_capacity(usize::try_from(capacity).unwrap_or(0).min(1 << 28)),
        })
    }

    pub fn draw(&mut self, rng: &mut impl Rng) -> Result<VertexId> {
        if self.drawn >= self.total_draws {
            return Err(Error::protocol("endpoint pool exhausted its draw budget"));
        }
        let d = self.drawn as u128;
        while self.admitted < self.vertices
            && self.admitted as u128 * self.total_draws as u128 <= d * self.vertices as u128
        {
            let v = self.first_vertex + self.admitted;
            self.slots
                .extend(std::iter::repeat_n(v, self.weight as usize));
            self.admitted += 1;
        }
        let v = self.slots[rng.random_range(0..self.slots.len())];
        self.slots.push(v);
        self.drawn += 1;
        Ok(v)
    }
}

/// Serves endpoint requests `(requester, count)` in ascending requester
/// order from a single shared pool.
pub fn phase2_serve(
    rank: RankId,
    partition: &Partition,
    edges_per_vertex: u64,
    requests: &[(RankId, u64)],
    rng: &mut impl Rng,
) -> Result<Vec<(RankId, Vec<VertexId>)>> {
    let mut ordered = requests.to_vec();
    ordered.sort_unstable_by_key(|&(r, _)| r);
    for pair in ordered.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::protocol(format!(
                "rank {rank} received two requests from rank {}",
                pair[0].0
            )));
        }
    }
    if let Some(&(r, _)) = ordered.iter().find(|&&(r, _)| r >= partition.ranks()) {
        return Err(Error::protocol(format!(
            "rank {rank} received a request from unknown rank {r}"
        )));
    }
    let total: u64 = ordered.iter().map(|&(_, c)| c).sum();
    let mut pool = EndpointPool::new(
        partition.first_vertex(rank),
        partition.vertices_per_rank(),
        edges_per_vertex,
        total,
    )?;
    ordered
        .into_iter()
        .map(|(requester, count)| {
            let list = (0..count)
                .map(|_| pool.draw(rng))
                .collect::<Result<Vec<_>>>()?;
            Ok((requester, list))
        })
        .collect()
}

/// Replaces the `i`-th occurrence of target rank `q` with `replies[q][i]`.
pub fn phase2_substitute(
    assoc: &AssocList,
    replies: &BTreeMap<RankId, Vec<VertexId>>,
) -> Result<Vec<(VertexId, VertexId)>> {
    let mut cursors: BTreeMap<RankId, usize> = BTreeMap::new();
    let edges = assoc
        .entries()
        .map(|(u, target)| match target {
            Target::Vertex(v) => Ok((u, v)),
            Target::Rank(q) => {
                let cursor = cursors.entry(q).or_insert(0);
                let v = replies
                    .get(&q)
                    .and_then(|list| list.get(*cursor))
                    .ok_or_else(|| {
                        Error::protocol(format!(
                            "rank {q} supplied {} endpoints, more are needed",
                            replies.get(&q).map_or(0, Vec::len)
                        ))
                    })?;
                *cursor += 1;
                Ok((u, *v))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    for (q, list) in replies {
        let used = cursors.get(q).copied().unwrap_or(0);
        if used != list.len() {
            return Err(Error::protocol(format!(
                "rank {q} supplied {} endpoints but {used} were requested",
                list.len()
            )));
        }
    }
    Ok(edges)
}

/// What one rank did during a run, for protocol inspection.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RankTrace {
    /// First `s` association targets.
    pub prefix: Vec<RankId>,
    /// Counts this rank announced, `(target rank, count)`.
    pub announced: Vec<(RankId, u64)>,
    /// Lengths of the endpoint lists this rank served, `(requester, len)`.
    pub served: Vec<(RankId, usize)>,
    /// Lengths of the endpoint lists this rank received, `(server, len)`.
    pub received: Vec<(RankId, usize)>,
}

#[derive(Debug)]
pub struct PbaRun {
    pub graph: EdgeList,
    pub traces: Vec<RankTrace>,
    pub traffic: Vec<TrafficRecord>,
}

impl PbaRun {
    /// Checks that for every ordered pair `(p, q)` the count `p` announced to
    /// `q`, the list `q` served to `p`, the list `p` received from `q`, and
    /// the number of `p`'s edges ending on `q`'s vertices all agree.
    pub fn check_reply_conservation(&self, partition: &Partition) -> Result<()> {
        let ranks = self.traces.len();
        let mut announced = vec![vec![0u64; ranks]; ranks];
        let mut served = vec![vec![0u64; ranks]; ranks];
        let mut received = vec![vec![0u64; ranks]; ranks];
        let mut landed = vec![vec![0u64; ranks]; ranks];
        for (p, trace) in self.traces.iter().enumerate() {
            for &(q, c) in &trace.announced {
                announced[p][q] = c;
            }
            for &(requester, len) in &trace.served {
                served[requester][p] = len as u64;
            }
            for &(q, len) in &trace.received {
                received[p][q] = len as u64;
            }
        }
        for &(u, v) in self.graph.edges() {
            landed[partition.owner_of(u)?][partition.owner_of(v)?] += 1;
        }
        for p in 0..ranks {
            for q in 0..ranks {
                let a = announced[p][q];
                if a != served[p][q] || a != received[p][q] || a != landed[p][q] {
                    return Err(Error::protocol(format!(
                        "ranks {p}->{q}: announced {a}, served {}, received {}, landed {}",
                        served[p][q], received[p][q], landed[p][q]
                    )));
                }
            }
        }
        Ok(())
    }
}

struct PbaProgram<'a> {
    params: PbaParams,
    factions: &'a FactionConfig,
    partition: Partition,
}

struct PbaState {
    rng: StreamRng,
    assoc: AssocList,
    trace: RankTrace,
}

impl RankProgram for PbaProgram<'_> {
    type State = PbaState;
    type Output = (Vec<(VertexId, VertexId)>, RankTrace);

    fn phase_count(&self) -> usize {
        2
    }

    fn init(&self, rank: RankId) -> Result<PbaState> {
        let assoc = init_faction_prefix(rank, self.factions, &self.params)?;
        let trace = RankTrace {
            prefix: self.factions.prefix(rank),
            ..RankTrace::default()
        };
        Ok(PbaState {
            rng: rank_rng(self.params.master_seed, rank),
            assoc,
            trace,
        })
    }

    fn step(
        &self,
        phase: usize,
        rank: RankId,
        state: &mut PbaState,
        inbox: Inbox,
        outbox: &mut Outbox,
    ) -> Result<()> {
        match phase {
            0 => {
                let assoc = std::mem::replace(&mut state.assoc, AssocList::new(0, 1));
                let (assoc, counts) =
                    phase1_associate(rank, &self.params, self.factions, assoc, &mut state.rng)?;
                state.assoc = assoc;
                for (q, &count) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
                    outbox.send(q, MessageKind::CountAnnouncement, vec![count])?;
                    state.trace.announced.push((q, count));
                }
                Ok(())
            }
            1 => {
                let requests = inbox
                    .into_messages()
                    .into_iter()
                    .map(|m| match m.kind {
                        MessageKind::CountAnnouncement => Ok((m.from, m.payload[0])),
                        other => Err(Error::protocol(format!(
                            "rank {rank} expected count announcements, got {other:?}"
                        ))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let replies = phase2_serve(
                    rank,
                    &self.partition,
                    self.params.edges_per_vertex,
                    &requests,
                    &mut state.rng,
                )?;
                for (requester, list) in replies {
                    state.trace.served.push((requester, list.len()));
                    outbox.send(requester, MessageKind::EndpointList, list)?;
                }
                Ok(())
            }
            _ => unreachable!("PBA has two phases"),
        }
    }

    fn finish(&self, rank: RankId, mut state: PbaState, inbox: Inbox) -> Result<Self::Output> {
        let mut replies = BTreeMap::new();
        for m in inbox.into_messages() {
            if m.kind != MessageKind::EndpointList {
                return Err(Error::protocol(format!(
                    "rank {rank} expected endpoint lists, got {:?}",
                    m.kind
                )));
            }
            state.trace.received.push((m.from, m.payload.len()));
            if replies.insert(m.from, m.payload).is_some() {
                return Err(Error::protocol(format!(
                    "rank {rank} received two endpoint lists from rank {}",
                    m.from
                )));
            }
        }
        let edges = phase2_substitute(&state.assoc, &replies)?;
        Ok((edges, state.trace))
    }
}

/// Runs the full two-phase protocol on `ranks` ranks and `workers` threads.
pub fn generate_pba(
    ranks: usize,
    workers: usize,
    params: &PbaParams,
    factions: &FactionConfig,
) -> Result<PbaRun> {
    if factions.ranks() != ranks {
        return Err(Error::config(format!(
            "faction config covers {} ranks, run uses {ranks}",
            factions.ranks()
        )));
    }
    params.validate(factions)?;
    let program = PbaProgram {
        params: *params,
        factions,
        partition: Partition::new(ranks, params.vertices_per_rank)?,
    };
    let report = transport::run_ranks(ranks, workers, &program)?;
    let (segments, traces): (Vec<_>, Vec<_>) = report.outputs.into_iter().unzip();
    let graph = EdgeList::from_segments(segments, program.partition.vertex_count(), false)?;
    Ok(PbaRun {
        graph,
        traces,
        traffic: report.traffic,
    })
}
