//! Consistency-radius minimization over the full optimal-control sheaf.
//!
//! *Constrained* mode searches over one feasible labeling per time step and
//! fills every other layer from it, so the `𝒩` copies always carry global
//! sections. *Relaxed* mode lets every stalk value move freely.
//!
//! Both use the same seeded multi-start coordinate descent: discrete slots
//! try every option, Boolean coordinates flip, real coordinates move by
//! `±step`. The step scales by `1/shrink` after a sweep that improves and by
//! `shrink` after one that does not; a start ends when the step drops below
//! the tolerance or the objective reaches zero.
//! Small finite constrained instances are enumerated instead.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encode::EncodedProblem;
use crate::error::{Error, Result};
use crate::netmodel::{assemble_state, Labeling};
use crate::scalar::{dist2, Scalar};
use crate::sheaf::{assignment_distance, consistency_radius, Assignment, Sheaf, SECTION_TOL};
use crate::space::{Coord, Domain, Point, Space};

/// Stalks with at most this many points are searched as discrete choices.
pub const DISCRETE_STALK_LIMIT: usize = 4_096;
/// Random draws tried when looking for a feasible continuous start.
pub const FEASIBLE_DRAWS: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Constrained,
    Relaxed,
}

#[derive(Clone, Debug)]
pub struct SolveRequest<S> {
    pub mode: Mode,
    /// Objective evaluations allowed per start (and for enumeration).
    pub budget: usize,
    pub seed: u64,
    /// Descent stops once the step falls below this.
    pub tolerance: S,
    pub starts: usize,
    pub initial_step: S,
    pub shrink: S,
    /// Enumerate when the number of section candidates is at most this.
    pub exhaustive_limit: usize,
    /// Worker threads for the multi-starts; `1` runs them in order.
    pub threads: usize,
    /// Extra relaxed start, typically the constrained optimum.
    pub warm_start: Option<Assignment<S>>,
}

impl<S: Scalar> SolveRequest<S> {
    pub fn new(mode: Mode) -> Self {
        SolveRequest {
            mode,
            budget: 200_000,
            seed: 0,
            tolerance: S::lit(1e-6),
            starts: 8,
            initial_step: S::lit(0.5),
            shrink: S::lit(0.5),
            exhaustive_limit: 4_096,
            threads: 1,
            warm_start: None,
        }
    }

    fn check(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidProblem("budget must be positive".into()));
        }
        if self.starts == 0 {
            return Err(Error::InvalidProblem("at least one start is needed".into()));
        }
        if !(self.shrink > S::zero() && self.shrink < S::one()) {
            return Err(Error::InvalidProblem("shrink factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Objective after each sweep of one start.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry<S> {
    pub start: usize,
    pub sweep: usize,
    pub step: S,
    pub evaluations: usize,
    pub objective: S,
}

#[derive(Clone, Debug)]
pub struct SolveResult<S> {
    pub mode: Mode,
    pub assignment: Assignment<S>,
    /// Consistency radius of `assignment` on `𝒮`.
    pub objective: S,
    /// Local consistency radius on each `𝒩_n`.
    pub local_cr_n: Vec<S>,
    /// One labeling per step, constrained mode only.
    pub labelings: Option<Vec<Labeling<S>>>,
    pub exhaustive: bool,
    pub budget_exhausted: bool,
    pub evaluations: usize,
    pub best_start: usize,
    pub trace: Vec<TraceEntry<S>>,
}

pub fn solve<S: Scalar>(enc: &EncodedProblem<S>, req: &SolveRequest<S>) -> Result<SolveResult<S>> {
    match req.mode {
        Mode::Constrained => solve_constrained(enc, req),
        Mode::Relaxed => solve_relaxed(enc, req),
    }
}

fn finish<S: Scalar>(
    enc: &EncodedProblem<S>,
    mode: Mode,
    assignment: Assignment<S>,
    labelings: Option<Vec<Labeling<S>>>,
    outcome: Outcome<S>,
) -> Result<SolveResult<S>> {
    Ok(SolveResult {
        mode,
        objective: consistency_radius(&enc.s.sheaf, &assignment)?,
        local_cr_n: enc.local_cr_n(&assignment)?,
        assignment,
        labelings,
        exhaustive: outcome.exhaustive,
        budget_exhausted: outcome.exhausted,
        evaluations: outcome.evaluations,
        best_start: outcome.best_start,
        trace: outcome.trace,
    })
}

struct Outcome<S> {
    exhaustive: bool,
    exhausted: bool,
    evaluations: usize,
    best_start: usize,
    trace: Vec<TraceEntry<S>>,
}

// ---------------------------------------------------------------------------
// descent

/// A coordinate-descent landscape. Scores are compared, never interpreted,
/// so any monotone function of the objective works.
trait Landscape<S: Scalar>: Sync {
    type State: Clone + Send;
    type Move: Clone;

    fn slots(&self) -> usize;
    fn has_continuous(&self) -> bool;
    fn candidates(&self, st: &Self::State, slot: usize, step: S) -> Vec<Self::Move>;
    /// `None` when the move leaves the search space.
    fn score(&self, st: &Self::State, slot: usize, mv: &Self::Move) -> Option<S>;
    fn apply(&self, st: &mut Self::State, slot: usize, mv: Self::Move);
    fn initial_score(&self, st: &Self::State) -> S;
}

struct StartResult<T, S> {
    state: T,
    score: S,
    evaluations: usize,
    exhausted: bool,
    trace: Vec<TraceEntry<S>>,
}

fn descend<S: Scalar, L: Landscape<S>>(
    land: &L,
    mut st: L::State,
    start: usize,
    req: &SolveRequest<S>,
) -> StartResult<L::State, S> {
    let mut score = land.initial_score(&st);
    let mut evaluations = 1;
    let mut step = req.initial_step;
    let mut trace = Vec::new();
    let mut exhausted = false;
    let mut sweep = 0;
    'outer: loop {
        let mut improved = false;
        for slot in 0..land.slots() {
            let mut best: Option<(S, L::Move)> = None;
            for mv in land.candidates(&st, slot, step) {
                if evaluations >= req.budget {
                    exhausted = true;
                    if let Some((s, m)) = best.take() {
                        land.apply(&mut st, slot, m);
                        score = s;
                    }
                    break 'outer;
                }
                evaluations += 1;
                if let Some(s) = land.score(&st, slot, &mv) {
                    let bar = best.as_ref().map_or(score, |(b, _)| *b);
                    if s < bar {
                        best = Some((s, mv));
                    }
                }
            }
            if let Some((s, m)) = best {
                land.apply(&mut st, slot, m);
                score = s;
                improved = true;
            }
        }
        trace.push(TraceEntry {
            start,
            sweep,
            step,
            evaluations,
            objective: score,
        });
        sweep += 1;
        if score <= S::zero() {
            break;
        }
        if improved {
            if land.has_continuous() && step < req.initial_step * S::lit(1048576.0) {
                step = step / req.shrink;
            }
        } else {
            if !land.has_continuous() {
                break;
            }
            step = step * req.shrink;
            if step < req.tolerance {
                break;
            }
        }
    }
    if exhausted {
        trace.push(TraceEntry {
            start,
            sweep,
            step,
            evaluations,
            objective: score,
        });
    }
    StartResult {
        state: st,
        score,
        evaluations,
        exhausted,
        trace,
    }
}

/// Runs every start (in parallel when asked) and keeps the lowest score,
/// earliest start on ties.
fn multistart<S: Scalar, L: Landscape<S>>(
    land: &L,
    starts: Vec<L::State>,
    req: &SolveRequest<S>,
) -> Result<(L::State, Outcome<S>)> {
    let run = |(i, st): (usize, L::State)| descend(land, st, i, req);
    let indexed: Vec<(usize, L::State)> = starts.into_iter().enumerate().collect();
    let results: Vec<StartResult<L::State, S>> = if req.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(req.threads)
            .build()
            .map_err(|e| Error::InvalidProblem(format!("thread pool: {e}")))?;
        pool.install(|| indexed.into_par_iter().map(run).collect())
    } else {
        indexed.into_iter().map(run).collect()
    };
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.score < results[best].score {
            best = i;
        }
    }
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    let exhausted = results.iter().any(|r| r.exhausted);
    let trace = results.iter().flat_map(|r| r.trace.iter().cloned()).collect();
    let state = results
        .into_iter()
        .nth(best)
        .expect("at least one start")
        .state;
    Ok((
        state,
        Outcome {
            exhaustive: false,
            exhausted,
            evaluations,
            best_start: best,
            trace,
        },
    ))
}

fn start_rng(seed: u64, start: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (start as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Candidate values of one point of `space` near `current`: every other
/// point of a small finite space, otherwise one coordinate at a time
/// (Boolean flips, real `±step`) kept only if still inside the space.
fn point_moves<S: Scalar>(space: &Space<S>, current: &Point<S>, step: S) -> Vec<Point<S>> {
    if let Some(pts) = small_finite(space) {
        return pts.into_iter().filter(|p| p != current).collect();
    }
    let tol = S::lit(1e-12);
    let mut out = Vec::new();
    for (i, c) in space.signature().iter().enumerate() {
        let mut push = |x: S| {
            let mut p = current.clone();
            p.0[i] = x;
            if space.contains(&p, tol) {
                out.push(p);
            }
        };
        match c {
            Coord::Boolean => push(S::one() - current.0[i]),
            Coord::Real => {
                push(current.0[i] + step);
                push(current.0[i] - step);
            }
        }
    }
    out
}

fn small_finite<S: Scalar>(space: &Space<S>) -> Option<Vec<Point<S>>> {
    match space.finite_len() {
        Some(n) if n <= DISCRETE_STALK_LIMIT => space.enumerate(),
        _ => None,
    }
}

fn has_real_freedom<S: Scalar>(space: &Space<S>) -> bool {
    small_finite(space).is_none() && space.signature().contains(&Coord::Real)
}

/// The default point of a space: Boolean coordinates at `bit`, real ones at
/// the box midpoint (or 0). Finite spaces snap to their nearest point.
fn default_point<S: Scalar>(space: &Space<S>, bit: S) -> Point<S> {
    let raw: Vec<S> = match space.domain() {
        Domain::Box { lo, hi } => space
            .signature()
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(c, (&l, &h))| match c {
                Coord::Boolean => bit,
                Coord::Real => (l + h) / (S::one() + S::one()),
            })
            .collect(),
        _ => space
            .signature()
            .iter()
            .map(|c| match c {
                Coord::Boolean => bit,
                Coord::Real => S::zero(),
            })
            .collect(),
    };
    let raw = Point::new(raw);
    if let Domain::Product(factors) = space.domain() {
        let mut at = 0;
        let mut parts = Vec::new();
        for f in factors {
            let d = f.dim();
            let sub = Point::new(raw.0[at..at + d].to_vec());
            parts.push(snap(f, sub));
            at += d;
        }
        return Point::concat(&parts.iter().collect::<Vec<_>>());
    }
    snap(space, raw)
}

fn snap<S: Scalar>(space: &Space<S>, raw: Point<S>) -> Point<S> {
    match space.enumerate() {
        Some(pts) if !pts.is_empty() && matches!(space.domain(), Domain::Finite(_)) => {
            let mut best = pts[0].clone();
            let mut bd = dist2(&best.0, &raw.0);
            for p in pts.into_iter().skip(1) {
                let d = dist2(&p.0, &raw.0);
                if d < bd {
                    bd = d;
                    best = p;
                }
            }
            best
        }
        _ => raw,
    }
}

// ---------------------------------------------------------------------------
// constrained

/// Section candidates: per-step labelings when `𝒩` has finitely many
/// sections, `None` otherwise.
fn enumerable_labelings<S: Scalar>(enc: &EncodedProblem<S>) -> Option<Vec<Labeling<S>>> {
    enc.problem.feasible_labelings(DISCRETE_STALK_LIMIT)
}

fn objective_of<S: Scalar>(enc: &EncodedProblem<S>, labs: &[Labeling<S>]) -> Option<S> {
    let a = enc.assignment_from_labelings(&enc.s, labs).ok()?;
    consistency_radius(&enc.s.sheaf, &a).ok()
}

fn feasible_at<S: Scalar>(enc: &EncodedProblem<S>, lab: &Labeling<S>) -> bool {
    let tol = S::lit(SECTION_TOL);
    enc.problem.vertices().all(|v| {
        let Ok(m) = enc.problem.model(v) else {
            return false;
        };
        assemble_state(&enc.problem, v, &lab.controls, &lab.states)
            .map(|x| m.feasible.contains(&x, tol))
            .unwrap_or(false)
    })
}

/// Whole labelings per step, chosen from an enumerated list.
struct StepChoice<'a, S> {
    enc: &'a EncodedProblem<S>,
    labs: &'a [Labeling<S>],
}

impl<S: Scalar> Landscape<S> for StepChoice<'_, S> {
    type State = Vec<usize>;
    type Move = usize;

    fn slots(&self) -> usize {
        self.enc.horizon()
    }

    fn has_continuous(&self) -> bool {
        false
    }

    fn candidates(&self, st: &Vec<usize>, slot: usize, _: S) -> Vec<usize> {
        (0..self.labs.len()).filter(|&i| i != st[slot]).collect()
    }

    fn score(&self, st: &Vec<usize>, slot: usize, mv: &usize) -> Option<S> {
        let mut idx = st.clone();
        idx[slot] = *mv;
        objective_of(self.enc, &self.pick(&idx))
    }

    fn apply(&self, st: &mut Vec<usize>, slot: usize, mv: usize) {
        st[slot] = mv;
    }

    fn initial_score(&self, st: &Vec<usize>) -> S {
        objective_of(self.enc, &self.pick(st)).unwrap_or_else(S::infinity)
    }
}

impl<S: Scalar> StepChoice<'_, S> {
    fn pick(&self, idx: &[usize]) -> Vec<Labeling<S>> {
        idx.iter().map(|&i| self.labs[i].clone()).collect()
    }
}

#[derive(Clone, Copy, Debug)]
enum Part {
    Control,
    State,
}

/// One control or state of one vertex at one step.
struct VertexSlots<'a, S> {
    enc: &'a EncodedProblem<S>,
    slots: Vec<(usize, String, Part)>,
}

impl<'a, S: Scalar> VertexSlots<'a, S> {
    fn new(enc: &'a EncodedProblem<S>) -> Self {
        let mut slots = Vec::new();
        for k in 0..enc.horizon() {
            for v in enc.problem.vertices() {
                slots.push((k, v.clone(), Part::Control));
                slots.push((k, v.clone(), Part::State));
            }
        }
        VertexSlots { enc, slots }
    }

    fn space(&self, slot: usize) -> &Space<S> {
        let (_, v, part) = &self.slots[slot];
        let m = self.enc.problem.model(v).expect("known vertex");
        match part {
            Part::Control => &m.control_space,
            Part::State => &m.state_space,
        }
    }

    fn value<'b>(&self, st: &'b [Labeling<S>], slot: usize) -> &'b Point<S> {
        let (k, v, part) = &self.slots[slot];
        match part {
            Part::Control => &st[*k].controls[v],
            Part::State => &st[*k].states[v],
        }
    }

    fn set(&self, st: &mut [Labeling<S>], slot: usize, p: Point<S>) {
        let (k, v, part) = &self.slots[slot];
        match part {
            Part::Control => st[*k].controls.insert(v.clone(), p),
            Part::State => st[*k].states.insert(v.clone(), p),
        };
    }
}

impl<S: Scalar> Landscape<S> for VertexSlots<'_, S> {
    type State = Vec<Labeling<S>>;
    type Move = Point<S>;

    fn slots(&self) -> usize {
        self.slots.len()
    }

    fn has_continuous(&self) -> bool {
        (0..self.slots.len()).any(|i| has_real_freedom(self.space(i)))
    }

    fn candidates(&self, st: &Vec<Labeling<S>>, slot: usize, step: S) -> Vec<Point<S>> {
        point_moves(self.space(slot), self.value(st, slot), step)
    }

    fn score(&self, st: &Vec<Labeling<S>>, slot: usize, mv: &Point<S>) -> Option<S> {
        let mut next = st.clone();
        self.set(&mut next, slot, mv.clone());
        if !feasible_at(self.enc, &next[self.slots[slot].0]) {
            return None;
        }
        objective_of(self.enc, &next)
    }

    fn apply(&self, st: &mut Vec<Labeling<S>>, slot: usize, mv: Point<S>) {
        self.set(st, slot, mv);
    }

    fn initial_score(&self, st: &Vec<Labeling<S>>) -> S {
        objective_of(self.enc, st).unwrap_or_else(S::infinity)
    }
}

fn default_labeling<S: Scalar>(enc: &EncodedProblem<S>, bit: S) -> Result<Labeling<S>> {
    let mut lab = Labeling {
        controls: Default::default(),
        states: Default::default(),
    };
    for v in enc.problem.vertices() {
        let m = enc.problem.model(v)?;
        lab.controls.insert(v.clone(), default_point(&m.control_space, bit));
        lab.states.insert(v.clone(), default_point(&m.state_space, bit));
    }
    Ok(lab)
}

fn random_labeling<S: Scalar, R: Rng + ?Sized>(enc: &EncodedProblem<S>, rng: &mut R) -> Result<Labeling<S>> {
    let mut lab = Labeling {
        controls: Default::default(),
        states: Default::default(),
    };
    for v in enc.problem.vertices() {
        let m = enc.problem.model(v)?;
        lab.controls.insert(v.clone(), m.control_space.sample(rng));
        lab.states.insert(v.clone(), m.state_space.sample(rng));
    }
    Ok(lab)
}

/// Minimizes `c_𝒮` over assignments whose `𝒩` copies are global sections.
///
/// When every step has finitely many feasible labelings and their product
/// has at most `exhaustive_limit` elements, all of them are enumerated in
/// lexicographic order and the first minimum wins. Otherwise each start
/// runs coordinate descent, over whole per-step labelings when those are
/// enumerable and over single controls and states (with feasibility
/// rejection) when not.
pub fn solve_constrained<S: Scalar>(
    enc: &EncodedProblem<S>,
    req: &SolveRequest<S>,
) -> Result<SolveResult<S>> {
    req.check()?;
    let h = enc.horizon();
    if let Some(labs) = enumerable_labelings(enc) {
        if labs.is_empty() {
            return Err(Error::InfeasibleProblem(
                "𝒩 has no global section".into(),
            ));
        }
        let total = u32::try_from(h)
            .ok()
            .and_then(|e| labs.len().checked_pow(e));
        if let Some(total) = total.filter(|&t| t <= req.exhaustive_limit) {
            return enumerate(enc, &labs, total, req);
        }
        let land = StepChoice { enc, labs: &labs };
        let mut starts = vec![vec![0; h]];
        for i in 1..req.starts {
            let mut rng = start_rng(req.seed, i);
            starts.push((0..h).map(|_| rng.gen_range(0..labs.len())).collect());
        }
        let (best, outcome) = multistart(&land, starts, req)?;
        let chosen = land.pick(&best);
        let a = enc.assignment_from_labelings(&enc.s, &chosen)?;
        return finish(enc, Mode::Constrained, a, Some(chosen), outcome);
    }

    let land = VertexSlots::new(enc);
    let mut starts = Vec::new();
    for i in 0..req.starts {
        let mut rng = start_rng(req.seed, i);
        let first = match i {
            0 => Some(default_labeling(enc, S::one())?),
            1 => Some(default_labeling(enc, S::zero())?),
            _ => None,
        };
        let mut found = first.filter(|l| feasible_at(enc, l));
        for _ in 0..FEASIBLE_DRAWS {
            if found.is_some() {
                break;
            }
            let l = random_labeling(enc, &mut rng)?;
            if feasible_at(enc, &l) {
                found = Some(l);
            }
        }
        if let Some(l) = found {
            starts.push(vec![l; h]);
        }
    }
    if starts.is_empty() {
        return Err(Error::InfeasibleProblem(
            "no feasible labeling found for any start".into(),
        ));
    }
    let (best, outcome) = multistart(&land, starts, req)?;
    let a = enc.assignment_from_labelings(&enc.s, &best)?;
    finish(enc, Mode::Constrained, a, Some(best), outcome)
}

fn enumerate<S: Scalar>(
    enc: &EncodedProblem<S>,
    labs: &[Labeling<S>],
    total: usize,
    req: &SolveRequest<S>,
) -> Result<SolveResult<S>> {
    let h = enc.horizon();
    let mut idx = vec![0usize; h];
    let mut best: Option<(S, Vec<usize>)> = None;
    let mut evaluations = 0;
    let mut exhausted = false;
    let mut trace = Vec::new();
    for n in 0..total {
        if evaluations >= req.budget {
            exhausted = true;
            break;
        }
        // step 0 is the most significant digit
        let mut rem = n;
        for k in (0..h).rev() {
            idx[k] = rem % labs.len();
            rem /= labs.len();
        }
        let chosen: Vec<Labeling<S>> = idx.iter().map(|&i| labs[i].clone()).collect();
        let a = enc.assignment_from_labelings(&enc.s, &chosen)?;
        let c = consistency_radius(&enc.s.sheaf, &a)?;
        evaluations += 1;
        if best.as_ref().map_or(true, |(b, _)| c < *b) {
            best = Some((c, idx.clone()));
            trace.push(TraceEntry {
                start: 0,
                sweep: n,
                step: S::zero(),
                evaluations,
                objective: c,
            });
        }
    }
    let (_, idx) = best.ok_or_else(|| Error::InfeasibleProblem("no candidate evaluated".into()))?;
    let chosen: Vec<Labeling<S>> = idx.iter().map(|&i| labs[i].clone()).collect();
    let a = enc.assignment_from_labelings(&enc.s, &chosen)?;
    finish(
        enc,
        Mode::Constrained,
        a,
        Some(chosen),
        Outcome {
            exhaustive: !exhausted,
            exhausted,
            evaluations,
            best_start: 0,
            trace,
        },
    )
}

/// Every section candidate in enumeration order. Useful for checking
/// [`solve_constrained`] against brute force.
pub fn section_candidates<S: Scalar>(enc: &EncodedProblem<S>) -> Option<Vec<Vec<Labeling<S>>>> {
    let labs = enumerable_labelings(enc)?;
    let h = enc.horizon();
    let total = labs.len().checked_pow(u32::try_from(h).ok()?)?;
    if total > DISCRETE_STALK_LIMIT * 16 {
        return None;
    }
    let mut out = Vec::with_capacity(total);
    for n in 0..total {
        let mut rem = n;
        let mut pick = vec![0usize; h];
        for k in (0..h).rev() {
            pick[k] = rem % labs.len();
            rem /= labs.len();
        }
        out.push(pick.iter().map(|&i| labs[i].clone()).collect());
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// relaxed

/// Squared restriction gaps of every strict pair, updated one element at a
/// time. Sums run in the same pair order as [`consistency_radius`], so the
/// total is bit-identical to the recomputed objective squared.
struct PairCache<S> {
    sheaf: Arc<Sheaf<S>>,
    pairs: Vec<(usize, usize)>,
    touching: Vec<Vec<usize>>,
}

impl<S: Scalar> PairCache<S> {
    fn new(sheaf: Arc<Sheaf<S>>) -> Self {
        let pairs: Vec<(usize, usize)> = sheaf.base().strict_relations().collect();
        let mut touching = vec![Vec::new(); sheaf.len()];
        for (k, &(x, y)) in pairs.iter().enumerate() {
            touching[x].push(k);
            touching[y].push(k);
        }
        PairCache {
            sheaf,
            pairs,
            touching,
        }
    }

    fn gap(&self, values: &[Point<S>], k: usize, at: usize, cand: Option<&Point<S>>) -> S {
        let (x, y) = self.pairs[k];
        let pick = |i: usize| match cand {
            Some(c) if i == at => c,
            _ => &values[i],
        };
        let d = dist2(&pick(y).0, &self.sheaf.restrict(x, y, pick(x)).0);
        d * d
    }

    fn gaps(&self, values: &[Point<S>]) -> Vec<S> {
        (0..self.pairs.len()).map(|k| self.gap(values, k, 0, None)).collect()
    }

    fn total(gaps: &[S]) -> S {
        gaps.iter().fold(S::zero(), |acc, &g| acc + g)
    }
}

#[derive(Clone)]
struct RelaxedState<S> {
    values: Vec<Point<S>>,
    gaps: Vec<S>,
}

/// Every stalk value of `𝒮` is a slot.
struct FreeValues<S> {
    cache: PairCache<S>,
    slots: Vec<usize>,
}

impl<S: Scalar> Landscape<S> for FreeValues<S> {
    type State = RelaxedState<S>;
    type Move = Point<S>;

    fn slots(&self) -> usize {
        self.slots.len()
    }

    fn has_continuous(&self) -> bool {
        self.slots
            .iter()
            .any(|&i| has_real_freedom(self.cache.sheaf.stalk(i)))
    }

    fn candidates(&self, st: &RelaxedState<S>, slot: usize, step: S) -> Vec<Point<S>> {
        let i = self.slots[slot];
        point_moves(self.cache.sheaf.stalk(i), &st.values[i], step)
    }

    fn score(&self, st: &RelaxedState<S>, slot: usize, mv: &Point<S>) -> Option<S> {
        let i = self.slots[slot];
        let mut gaps = st.gaps.clone();
        for &k in &self.cache.touching[i] {
            gaps[k] = self.cache.gap(&st.values, k, i, Some(mv));
        }
        Some(PairCache::total(&gaps))
    }

    fn apply(&self, st: &mut RelaxedState<S>, slot: usize, mv: Point<S>) {
        let i = self.slots[slot];
        st.values[i] = mv;
        for &k in &self.cache.touching[i] {
            st.gaps[k] = self.cache.gap(&st.values, k, i, None);
        }
    }

    fn initial_score(&self, st: &RelaxedState<S>) -> S {
        PairCache::total(&st.gaps)
    }
}

/// Minimizes `c_𝒮` over all assignments. Starts, in order: the warm start
/// (or, if none is given, the constrained optimum when one exists), Boolean
/// coordinates all ones, all zeros, then seeded random draws from every
/// stalk. Descent never increases the objective, so the result is never
/// worse than the warm start.
pub fn solve_relaxed<S: Scalar>(enc: &EncodedProblem<S>, req: &SolveRequest<S>) -> Result<SolveResult<S>> {
    req.check()?;
    let sheaf = enc.s.sheaf.clone();
    let warm = match &req.warm_start {
        Some(a) => Some(a.clone()),
        None => match solve_constrained(enc, &SolveRequest {
            mode: Mode::Constrained,
            warm_start: None,
            ..req.clone()
        }) {
            Ok(r) => Some(r.assignment),
            Err(Error::InfeasibleProblem(_)) => None,
            Err(e) => return Err(e),
        },
    };
    let land = FreeValues {
        slots: (0..sheaf.len())
            .filter(|&i| sheaf.stalk(i).dim() > 0)
            .collect(),
        cache: PairCache::new(sheaf.clone()),
    };
    let mut raw: Vec<Vec<Point<S>>> = Vec::new();
    if let Some(a) = warm {
        if !a.is_global() || a.len() != sheaf.len() {
            return Err(Error::NotGlobal("warm start".into()));
        }
        raw.push(a.values().iter().map(|v| v.clone().expect("global")).collect());
    }
    for bit in [S::one(), S::zero()] {
        if raw.len() < req.starts {
            raw.push((0..sheaf.len()).map(|i| default_point(sheaf.stalk(i), bit)).collect());
        }
    }
    while raw.len() < req.starts {
        let mut rng = start_rng(req.seed, raw.len());
        raw.push((0..sheaf.len()).map(|i| sheaf.stalk(i).sample(&mut rng)).collect());
    }
    let starts = raw
        .into_iter()
        .map(|values| RelaxedState {
            gaps: land.cache.gaps(&values),
            values,
        })
        .collect();
    let (best, outcome) = multistart(&land, starts, req)?;
    finish(enc, Mode::Relaxed, Assignment::global(best.values), None, outcome)
}

// ---------------------------------------------------------------------------
// relaxation gap

#[derive(Clone, Debug, PartialEq)]
pub struct GapRow<S> {
    pub step: usize,
    /// `c_𝒩(b′)`
    pub c_relaxed: S,
    /// `d_𝒩(a′, b′)`
    pub d_n: S,
    /// `c_𝒩(b′) ≤ 2 d_𝒩(a′, b′)`
    pub section_bound: bool,
    /// `d_𝒩(a′, b′) ≤ d_𝒮(a, b)`
    pub restriction_bound: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapReport<S> {
    pub rows: Vec<GapRow<S>>,
    /// `d_𝒮(a, b)`
    pub d_s: S,
    pub c_constrained: S,
    pub c_relaxed: S,
    /// relaxed objective is at most the constrained one
    pub relaxation_bound: bool,
}

impl<S: Scalar> GapReport<S> {
    pub fn all_pass(&self) -> bool {
        self.relaxation_bound
            && self
                .rows
                .iter()
                .all(|r| r.section_bound && r.restriction_bound)
    }
}

/// The chain `c_𝒩(b′) ≤ 2 d_𝒩(a′, b′) ≤ 2 d_𝒮(a, b)` per step, where `a`
/// is constrained (so `a′` is a section) and `b` relaxed. Flags use a 1e-9
/// slack.
pub fn relaxation_gap<S: Scalar>(
    enc: &EncodedProblem<S>,
    constrained: &SolveResult<S>,
    relaxed: &SolveResult<S>,
) -> Result<GapReport<S>> {
    let slack = S::lit(SECTION_TOL);
    let two = S::one() + S::one();
    let d_s = assignment_distance(&enc.s.sheaf, &constrained.assignment, &relaxed.assignment)?;
    let mut rows = Vec::new();
    for k in 0..enc.horizon() {
        let a = enc.n_part(&constrained.assignment, k);
        let b = enc.n_part(&relaxed.assignment, k);
        let c_relaxed = consistency_radius(&enc.n, &b)?;
        let d_n = assignment_distance(&enc.n, &a, &b)?;
        rows.push(GapRow {
            step: k,
            c_relaxed,
            d_n,
            section_bound: c_relaxed <= two * d_n + slack,
            restriction_bound: d_n <= d_s + slack,
        });
    }
    Ok(GapReport {
        rows,
        d_s,
        c_constrained: constrained.objective,
        c_relaxed: relaxed.objective,
        relaxation_bound: relaxed.objective <= constrained.objective + slack,
    })
}
