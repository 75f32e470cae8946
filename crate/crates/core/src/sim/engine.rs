//! Event loop shared by every strategy. Lanes are regions (or resident
//! modules for ASIC plans); each works through a fixed job list. One PR
//! server serves lanes first come, first served.

use std::collections::VecDeque;

use crate::rational::Rational;

use super::{BlockedReport, Event, EventKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Job {
    /// Load `task` into the lane. `admit` frames enter the system when the
    /// load is requested; `run` labels the first run it serves.
    Pr { task: usize, run: u32, admit: u32 },
    /// One run of `task` on frame `run`; `admit` brings the frame in at start.
    Run { task: usize, run: u32, admit: bool },
}

#[derive(Debug, Clone)]
pub(crate) struct Lane {
    pub region: u32,
    /// Earliest time the lane may begin its first job.
    pub offset: Rational,
    pub jobs: Vec<Job>,
}

pub(crate) struct Input<'a> {
    pub task_names: &'a [String],
    /// Duration of one run of each task at full rate, ms.
    pub run_ms: Vec<Rational>,
    pub bandwidth: Vec<Rational>,
    pub pr_ms: Rational,
    pub lanes: Vec<Lane>,
    /// Frame r may not enter the chain before frame r-1 has left it.
    pub one_in_flight: bool,
    /// Bytes held per frame waiting for, or running on, each task.
    pub stream_bytes: Vec<u64>,
    pub capacity: u64,
    /// Memory bandwidth shared by concurrently running modules, if modeled.
    pub shared_bandwidth: Option<Rational>,
    pub horizon: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Trace {
    pub timeline: Vec<Event>,
    /// Compute time per lane, excluding reconfiguration.
    pub busy_ms: Vec<Rational>,
    pub makespan_ms: Rational,
    pub peak_buffer_bytes: u64,
    pub blocked: Option<BlockedReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Idle,
    WaitingPr,
    Loading,
    Running { task: usize, run: u32, remaining: Rational, started: Rational },
    Done,
}

struct Sim<'a> {
    input: &'a Input<'a>,
    now: Rational,
    states: Vec<State>,
    next_job: Vec<usize>,
    server: Option<(usize, Rational)>,
    queue: VecDeque<usize>,
    done: Vec<Vec<bool>>,
    occupancy: u64,
    peak: u64,
    timeline: Vec<Event>,
    busy: Vec<Rational>,
    /// Last capacity refusal, reported if the loop stalls.
    refused: Option<BlockedReport>,
}

impl<'a> Sim<'a> {
    fn emit(&mut self, kind: EventKind, lane: usize, task: usize, run: u32) {
        self.timeline.push(Event {
            time_ms: self.now,
            kind,
            region: self.input.lanes[lane].region,
            task: self.input.task_names[task].clone(),
            run,
        });
    }

    fn head(&self, lane: usize) -> Option<Job> {
        self.input.lanes[lane].jobs.get(self.next_job[lane]).copied()
    }

    fn finish_job(&mut self, lane: usize) {
        self.next_job[lane] += 1;
        self.states[lane] = if self.head(lane).is_some() { State::Idle } else { State::Done };
    }

    fn reserve(&mut self, bytes: u64, lane: usize, what: String) -> bool {
        if self.occupancy + bytes > self.input.capacity {
            self.refused = Some(BlockedReport {
                time_ms: self.now,
                region: self.input.lanes[lane].region,
                waiting_for: what,
                required_bytes: self.occupancy + bytes,
                capacity_bytes: self.input.capacity,
            });
            return false;
        }
        self.occupancy += bytes;
        self.peak = self.peak.max(self.occupancy);
        true
    }

    fn deps_met(&self, task: usize, run: u32) -> bool {
        let r = run as usize;
        if task > 0 && !self.done[task - 1][r] {
            return false;
        }
        if self.input.one_in_flight && task == 0 && r > 0 && !self.done[self.done.len() - 1][r - 1] {
            return false;
        }
        true
    }

    /// Starts whatever can start at `now`: PR requests, then the PR server,
    /// then runs, lanes in region order.
    fn settle(&mut self) {
        let n_lanes = self.input.lanes.len();
        self.refused = None;
        let mut progress = true;
        while progress {
            progress = false;
            for lane in 0..n_lanes {
                if self.states[lane] != State::Idle || self.input.lanes[lane].offset > self.now {
                    continue;
                }
                if let Some(Job::Pr { task, admit, .. }) = self.head(lane) {
                    let bytes = self.input.stream_bytes[0] * admit as u64;
                    let what = format!("admission of {admit} frames for {}", self.input.task_names[task]);
                    if bytes > 0 && !self.reserve(bytes, lane, what) {
                        continue;
                    }
                    self.states[lane] = State::WaitingPr;
                    self.queue.push_back(lane);
                    progress = true;
                }
            }
            if self.server.is_none() {
                if let Some(lane) = self.queue.pop_front() {
                    if let Some(Job::Pr { task, run, .. }) = self.head(lane) {
                        self.emit(EventKind::PrStart, lane, task, run);
                        self.server = Some((lane, self.now + self.input.pr_ms));
                        self.states[lane] = State::Loading;
                        progress = true;
                    }
                }
            }
            for lane in 0..n_lanes {
                if self.states[lane] != State::Idle || self.input.lanes[lane].offset > self.now {
                    continue;
                }
                let Some(Job::Run { task, run, admit }) = self.head(lane) else { continue };
                if !self.deps_met(task, run) {
                    continue;
                }
                let n = self.input.stream_bytes.len();
                let mut bytes = if task + 1 < n { self.input.stream_bytes[task + 1] } else { 0 };
                if admit {
                    bytes += self.input.stream_bytes[0];
                }
                let name = &self.input.task_names[task];
                if bytes > 0 && !self.reserve(bytes, lane, format!("run {run} of {name}")) {
                    continue;
                }
                self.emit(EventKind::RunStart, lane, task, run);
                self.states[lane] = State::Running { task, run, remaining: self.input.run_ms[task], started: self.now };
                progress = true;
            }
        }
    }

    fn rate(&self) -> Rational {
        let Some(total) = self.input.shared_bandwidth else { return Rational::ONE };
        let demand: Rational = self
            .states
            .iter()
            .filter_map(|s| match s {
                State::Running { task, .. } => Some(self.input.bandwidth[*task]),
                _ => None,
            })
            .sum();
        if demand > total {
            total / demand
        } else {
            Rational::ONE
        }
    }

    fn next_time(&self, rate: Rational) -> Option<Rational> {
        let mut next: Option<Rational> = self.server.map(|(_, end)| end);
        let mut consider = |t: Rational| next = Some(next.map_or(t, |n: Rational| n.min(t)));
        for (lane, s) in self.states.iter().enumerate() {
            match s {
                State::Running { remaining, .. } => consider(self.now + *remaining / rate),
                State::Idle if self.input.lanes[lane].offset > self.now => consider(self.input.lanes[lane].offset),
                _ => {}
            }
        }
        next
    }

    fn advance(&mut self, t: Rational, rate: Rational) {
        let dt = t - self.now;
        self.now = t;
        if let Some((lane, end)) = self.server {
            if end == t {
                if let Some(Job::Pr { task, run, .. }) = self.head(lane) {
                    self.emit(EventKind::PrEnd, lane, task, run);
                }
                self.server = None;
                self.finish_job(lane);
            }
        }
        for lane in 0..self.states.len() {
            if let State::Running { task, run, remaining, started } = self.states[lane] {
                let left = remaining - dt * rate;
                if left.is_positive() {
                    self.states[lane] = State::Running { task, run, remaining: left, started };
                    continue;
                }
                self.emit(EventKind::RunEnd, lane, task, run);
                self.busy[lane] += self.now - started;
                self.occupancy -= self.input.stream_bytes[task];
                self.done[task][run as usize] = true;
                self.finish_job(lane);
            }
        }
    }
}

/// Runs every lane to completion. A stall caused by buffer capacity ends the
/// trace early with a report; any other stall is a deadlock and an error.
pub(crate) fn run(input: &Input<'_>) -> Result<Trace, String> {
    let n_tasks = input.run_ms.len();
    let mut sim = Sim {
        input,
        now: Rational::ZERO,
        states: vec![State::Idle; input.lanes.len()],
        next_job: vec![0; input.lanes.len()],
        server: None,
        queue: VecDeque::new(),
        done: vec![vec![false; input.horizon as usize]; n_tasks],
        occupancy: 0,
        peak: 0,
        timeline: Vec::new(),
        busy: vec![Rational::ZERO; input.lanes.len()],
        refused: None,
    };
    for lane in 0..input.lanes.len() {
        if input.lanes[lane].jobs.is_empty() {
            sim.states[lane] = State::Done;
        }
    }
    let mut blocked = None;
    loop {
        sim.settle();
        let rate = sim.rate();
        match sim.next_time(rate) {
            Some(t) => sim.advance(t, rate),
            None if sim.states.iter().all(|s| *s == State::Done) => break,
            None => {
                match sim.refused.take() {
                    Some(report) => blocked = Some(report),
                    None => {
                        let stuck: Vec<String> = (0..sim.states.len())
                            .filter(|&l| sim.states[l] != State::Done)
                            .map(|l| format!("region {} at job {}", input.lanes[l].region, sim.next_job[l]))
                            .collect();
                        return Err(stuck.join(", "));
                    }
                }
                break;
            }
        }
    }
    Ok(Trace { makespan_ms: sim.now, timeline: sim.timeline, busy_ms: sim.busy, peak_buffer_bytes: sim.peak, blocked })
}
