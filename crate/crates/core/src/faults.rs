//! Fail-stop fault model: erasures of row/column index sets at iteration
//! boundaries, with the cumulative state the reconstituted operators need.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coding::CodingMatrix;
use crate::error::{Error, Result};

/// One erasure event: a nonempty set of rows lost at an iteration boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub iteration: usize,
    pub rows: Vec<usize>,
}

impl FaultEvent {
    pub fn new(iteration: usize, mut rows: Vec<usize>) -> Result<Self> {
        rows.sort_unstable();
        rows.dedup();
        if rows.is_empty() {
            return Err(Error::InvalidDimensions("fault event needs at least one row".into()));
        }
        if iteration == 0 {
            return Err(Error::InvalidDimensions(
                "fault iterations are 1-based; 0 is before the solve starts".into(),
            ));
        }
        Ok(Self { iteration, rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    None,
    Single,
    MultiRandom,
}

/// A materialized fault schedule: events sorted by strictly increasing
/// iteration. Serializes to `{mode, seed, events: [{iteration, rows}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSchedule {
    pub mode: ScheduleMode,
    pub seed: u64,
    pub events: Vec<FaultEvent>,
}

impl FaultSchedule {
    pub fn none() -> Self {
        Self { mode: ScheduleMode::None, seed: 0, events: Vec::new() }
    }

    pub fn total_erasures(&self) -> usize {
        self.events.iter().map(|e| e.rows.len()).sum()
    }

    pub fn events_at(&self, iteration: usize) -> impl Iterator<Item = &FaultEvent> {
        self.events.iter().filter(move |e| e.iteration == iteration)
    }

    /// Structural validation: indices in range, rows disjoint across events,
    /// iterations strictly increasing. Capacity is *not* checked here; the
    /// solver enforces it as faults arrive, since a real run cannot know the
    /// future fault count.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut last_iter = 0usize;
        let mut seen = vec![false; n];
        for ev in &self.events {
            if ev.iteration <= last_iter {
                return Err(Error::InvalidDimensions(
                    "fault iterations must be strictly increasing".into(),
                ));
            }
            last_iter = ev.iteration;
            if ev.rows.is_empty() {
                return Err(Error::InvalidDimensions("empty fault event".into()));
            }
            for &r in &ev.rows {
                if r >= n {
                    return Err(Error::IndexOutOfRange { index: r, n });
                }
                if seen[r] {
                    return Err(Error::DuplicateFault(r));
                }
                seen[r] = true;
            }
        }
        Ok(())
    }
}

/// Parameters for randomly generated multi-fault schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiRandomParams {
    pub events: usize,
    pub rows_per_event: usize,
    /// Inclusive iteration range the events are drawn from.
    pub iteration_range: (usize, usize),
}

/// What to generate; `generate_schedule` materializes it deterministically.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    None,
    Single { iteration: usize, rows: Vec<usize> },
    MultiRandom(MultiRandomParams),
}

/// Deterministically build a schedule for a problem of `n` rows and fault
/// capacity `k`. Requested totals beyond `k` are rejected here: a *generated*
/// scenario is under the experimenter's control, unlike arriving faults.
pub fn generate_schedule(spec: &ScheduleSpec, n: usize, k: usize, seed: u64) -> Result<FaultSchedule> {
    match spec {
        ScheduleSpec::None => Ok(FaultSchedule::none()),
        ScheduleSpec::Single { iteration, rows } => {
            let ev = FaultEvent::new(*iteration, rows.clone())?;
            if ev.rows.len() > k {
                return Err(Error::CapacityExceeded { requested: ev.rows.len(), capacity: k });
            }
            let s = FaultSchedule { mode: ScheduleMode::Single, seed, events: vec![ev] };
            s.validate(n)?;
            Ok(s)
        }
        ScheduleSpec::MultiRandom(p) => {
            let total = p.events * p.rows_per_event;
            if total > k {
                return Err(Error::CapacityExceeded { requested: total, capacity: k });
            }
            if total > n {
                return Err(Error::InvalidDimensions(format!(
                    "{total} erasures requested from {n} rows"
                )));
            }
            let (lo, hi) = p.iteration_range;
            if lo == 0 || hi < lo {
                return Err(Error::InvalidDimensions("bad iteration range".into()));
            }
            if hi - lo + 1 < p.events {
                return Err(Error::InvalidDimensions(format!(
                    "cannot place {} events at distinct iterations in [{lo}, {hi}]",
                    p.events
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut iterations = Vec::with_capacity(p.events);
            while iterations.len() < p.events {
                let it = rng.gen_range(lo..=hi);
                if !iterations.contains(&it) {
                    iterations.push(it);
                }
            }
            iterations.sort_unstable();
            let mut used = vec![false; n];
            let mut events = Vec::with_capacity(p.events);
            for &it in &iterations {
                let mut rows = Vec::with_capacity(p.rows_per_event);
                while rows.len() < p.rows_per_event {
                    let r = rng.gen_range(0..n);
                    if !used[r] {
                        used[r] = true;
                        rows.push(r);
                    }
                }
                events.push(FaultEvent::new(it, rows)?);
            }
            let s = FaultSchedule { mode: ScheduleMode::MultiRandom, seed, events };
            s.validate(n)?;
            Ok(s)
        }
    }
}

/// Cumulative fault state.
///
/// The fault set is kept sorted and the j-th smallest faulty row is served by
/// coding column j, so the active redundancy is always the leading `l`
/// columns of `E`/`R` and the leading `l x l` blocks of `S`/`T`. `chol`
/// caches the Cholesky factor of `E_F^T E_F` for the square submatrix `E_F`
/// of `E` at the faulty rows and those leading columns; it is recomputed on
/// every fault event.
#[derive(Debug, Clone)]
pub struct FaultState {
    capacity: usize,
    faulty: Vec<usize>,
    events: Vec<FaultEvent>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl FaultState {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, faulty: Vec::new(), events: Vec::new(), chol: None }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Sorted faulty row indices.
    pub fn faulty_rows(&self) -> &[usize] {
        &self.faulty
    }

    pub fn len(&self) -> usize {
        self.faulty.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faulty.is_empty()
    }

    pub fn is_faulty(&self, row: usize) -> bool {
        self.faulty.binary_search(&row).is_ok()
    }

    pub fn events(&self) -> &[FaultEvent] {
        &self.events
    }

    /// Coding column serving `row`: its rank in the sorted fault set.
    pub fn assigned_column(&self, row: usize) -> Option<usize> {
        self.faulty.binary_search(&row).ok()
    }

    /// Cached factor of `E_F^T E_F`; present whenever faults are active.
    pub fn chol_ef(&self) -> Option<&Cholesky<f64, Dyn>> {
        self.chol.as_ref()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &r in &self.faulty {
            m[r] = true;
        }
        m
    }
}

/// Extend the fault state with a new event and refresh the cached
/// factorization from the coding matrix rows.
pub fn apply_fault(state: &FaultState, event: &FaultEvent, e: &CodingMatrix) -> Result<FaultState> {
    let mut next = state.clone();
    for &r in &event.rows {
        if r >= e.n() {
            return Err(Error::IndexOutOfRange { index: r, n: e.n() });
        }
        if next.is_faulty(r) {
            return Err(Error::DuplicateFault(r));
        }
        if next.faulty.len() + 1 > next.capacity {
            return Err(Error::CapacityExceeded {
                requested: state.len() + event.rows.len(),
                capacity: next.capacity,
            });
        }
        let pos = next.faulty.partition_point(|&x| x < r);
        next.faulty.insert(pos, r);
    }
    next.events.push(event.clone());
    next.chol = Some(factor_ef(&next, e)?);
    Ok(next)
}

fn factor_ef(state: &FaultState, e: &CodingMatrix) -> Result<Cholesky<f64, Dyn>> {
    let ef = faulty_submatrix(state, e)?;
    let gram = ef.transpose() * &ef;
    Cholesky::new(gram).ok_or(Error::SingularEncodingSubmatrix)
}

/// The square `E_F` submatrix the state factorizes: faulty rows against the
/// leading `l` coding columns.
pub fn faulty_submatrix(state: &FaultState, e: &CodingMatrix) -> Result<DMatrix<f64>> {
    let cols: Vec<usize> = (0..state.len()).collect();
    e.dense_submatrix(state.faulty_rows(), &cols)
}
