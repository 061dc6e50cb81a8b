//! Discrete-event simulation of one shared channel.
//!
//! Each meter holds at most one telegram in service; later arrivals queue
//! behind it, so a meter never overlaps its own frames. Events are ordered by
//! `(time, meter, sequence)`, which makes every run a pure function of
//! `(scenario, seed)`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AccessPolicy, ChannelError, Outcome, SimMetrics, SimTime, TxAttempt};
use crate::mbus::MeterAddress;
use crate::scenario::Scenario;
use crate::traffic::{
    draw_first_offset_s, draw_interval_s, meter_rng, MeterConfig, MeterKind, MeterState,
};

/// Leading share of the run excluded from metrics.
pub const WARMUP_FRACTION: f64 = 0.05;
const BATCHES: usize = 20;
const BACKOFF_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    pub record_attempts: bool,
    pub record_receptions: bool,
    pub event_log: bool,
}

impl SimOptions {
    pub fn everything() -> Self {
        Self {
            record_attempts: true,
            record_receptions: true,
            event_log: true,
        }
    }
}

/// A frame that reached the MUC, intact or garbled by a collision.
#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    /// End of the frame.
    pub time_s: f64,
    /// Meter that put the frame on air (the repeater, for relayed copies).
    pub transmitter: usize,
    /// Meter whose telegram the frame carries.
    pub origin: usize,
    pub address: MeterAddress,
    pub access_number: u8,
    pub attempt_no: u32,
    pub relayed: bool,
    pub intact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogEvent {
    TxStart,
    TxEnd,
    Ack,
    Timeout,
    Collision,
    Drop,
}

impl LogEvent {
    pub fn name(self) -> &'static str {
        match self {
            LogEvent::TxStart => "tx_start",
            LogEvent::TxEnd => "tx_end",
            LogEvent::Ack => "ack",
            LogEvent::Timeout => "timeout",
            LogEvent::Collision => "collision",
            LogEvent::Drop => "drop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub time: SimTime,
    pub meter: usize,
    pub attempt_no: u32,
    pub event: LogEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub metrics: SimMetrics,
    pub attempts: Vec<TxAttempt>,
    pub receptions: Vec<Reception>,
    pub log: Vec<LogEntry>,
}

/// CSV dump: `time_s,meter,attempt_no,event`.
pub fn write_event_log<W: Write>(log: &[LogEntry], mut out: W) -> io::Result<()> {
    writeln!(out, "time_s,meter,attempt_no,event")?;
    for e in log {
        writeln!(
            out,
            "{},{},{},{}",
            e.time,
            e.meter,
            e.attempt_no,
            e.event.name()
        )?;
    }
    Ok(())
}

pub fn run_sim(scenario: &Scenario, seed: u64) -> Result<SimMetrics, ChannelError> {
    run_sim_with(scenario, seed, SimOptions::default()).map(|out| out.metrics)
}

pub fn run_sim_with(
    scenario: &Scenario,
    seed: u64,
    options: SimOptions,
) -> Result<SimOutput, ChannelError> {
    if scenario.meter_count() == 0 {
        return Err(ChannelError::InvalidScenario("no meters".into()));
    }
    let violations = scenario.violations();
    if !violations.is_empty() {
        return Err(ChannelError::InvalidScenario(violations.join("; ")));
    }
    let mut sim = Simulator::new(scenario, seed, options);
    sim.run();
    Ok(sim.finish())
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    origin: usize,
    access_number: u8,
    generated: SimTime,
    attempt_no: u32,
    relayed: bool,
    in_window: bool,
}

struct Meter<'a> {
    state: MeterState,
    config: &'a MeterConfig,
    arrivals: ChaCha8Rng,
    backoff: ChaCha8Rng,
    queue: VecDeque<Packet>,
    current: Option<Packet>,
    expects_ack: bool,
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Arrival,
    Access,
    TxEnd { tx: u64 },
    AckReceived,
    AckTimeout,
    Relay(Packet),
}

struct Event {
    time: SimTime,
    meter: usize,
    seq: u64,
    action: Action,
}

impl Event {
    fn key(&self) -> (SimTime, usize, u64) {
        (self.time, self.meter, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

struct OnAir {
    id: u64,
    start: SimTime,
    end: SimTime,
    collided: bool,
    ended: bool,
    packet: Packet,
}

#[derive(Default)]
struct Counters {
    transmissions: u64,
    delivered: u64,
    collisions: u64,
    retransmissions: u64,
    deferrals: u64,
    drops: u64,
    packets: u64,
    delivered_packets: u64,
    delay_sum_s: f64,
    delivered_by_batch: [u64; BATCHES],
}

struct Simulator<'a> {
    policy: AccessPolicy,
    airtime: SimTime,
    slot: SimTime,
    tau: SimTime,
    ack_timeout: SimTime,
    ack_airtime: SimTime,
    backoff_window_s: f64,
    max_retries: u8,
    repeater_delay: SimTime,
    warmup: SimTime,
    end: SimTime,
    g_offered: f64,

    meters: Vec<Meter<'a>>,
    repeaters: Vec<usize>,
    queue: BinaryHeap<Event>,
    seq: u64,
    on_air: Vec<OnAir>,
    next_tx: u64,

    counters: Counters,
    options: SimOptions,
    attempts: Vec<TxAttempt>,
    /// Index into `attempts` for each transmission id.
    attempt_of_tx: Vec<usize>,
    receptions: Vec<Reception>,
    log: Vec<LogEntry>,
}

impl<'a> Simulator<'a> {
    fn new(scenario: &'a Scenario, seed: u64, options: SimOptions) -> Self {
        let channel = &scenario.channel;
        let mut meters = Vec::with_capacity(scenario.meter_count());
        let mut repeaters = Vec::new();
        for group in &scenario.meters {
            for address in group.addresses() {
                let index = meters.len();
                if group.config.kind == MeterKind::Repeater {
                    repeaters.push(index);
                }
                let mut backoff = meter_rng(seed, 0);
                backoff.set_stream(BACKOFF_STREAM | index as u64);
                meters.push(Meter {
                    state: MeterState::new(address),
                    config: &group.config,
                    arrivals: meter_rng(seed, index),
                    backoff,
                    queue: VecDeque::new(),
                    current: None,
                    expects_ack: channel.ack.enabled && group.config.mode.is_bidirectional(),
                });
            }
        }

        let end = SimTime::from_secs(scenario.duration_s);
        let mut sim = Self {
            policy: channel.policy,
            airtime: SimTime::from_millis(channel.airtime_ms),
            slot: SimTime::from_millis(channel.slot_ms()),
            tau: SimTime::from_millis(channel.cca_turnaround_ms),
            ack_timeout: SimTime::from_millis(channel.ack.timeout_ms),
            ack_airtime: SimTime::from_millis(channel.ack.airtime_ms),
            backoff_window_s: channel.ack.backoff_window_ms / 1e3,
            max_retries: channel.ack.max_retries,
            repeater_delay: SimTime::from_millis(channel.repeater_delay_ms),
            warmup: SimTime::from_secs(scenario.duration_s * WARMUP_FRACTION),
            end,
            g_offered: scenario.offered_load(),
            meters,
            repeaters,
            queue: BinaryHeap::new(),
            seq: 0,
            on_air: Vec::new(),
            next_tx: 0,
            counters: Counters::default(),
            options,
            attempts: Vec::new(),
            attempt_of_tx: Vec::new(),
            receptions: Vec::new(),
            log: Vec::new(),
        };

        for index in 0..sim.meters.len() {
            let meter = &mut sim.meters[index];
            let first = SimTime::from_secs(draw_first_offset_s(meter.config, &mut meter.arrivals));
            meter.state.next_tx_s = first.as_secs();
            if first < end {
                sim.schedule(first, index, Action::Arrival);
            }
        }
        sim
    }

    fn schedule(&mut self, time: SimTime, meter: usize, action: Action) {
        self.seq += 1;
        self.queue.push(Event {
            time,
            meter,
            seq: self.seq,
            action,
        });
    }

    fn in_window(&self, t: SimTime) -> bool {
        t >= self.warmup && t < self.end
    }

    fn log(&mut self, time: SimTime, meter: usize, attempt_no: u32, event: LogEvent) {
        if self.options.event_log {
            self.log.push(LogEntry {
                time,
                meter,
                attempt_no,
                event,
            });
        }
    }

    fn run(&mut self) {
        while let Some(event) = self.queue.pop() {
            let now = event.time;
            let m = event.meter;
            match event.action {
                Action::Arrival => self.on_arrival(m, now),
                Action::Access => self.access(m, now),
                Action::TxEnd { tx } => self.on_tx_end(m, tx, now),
                Action::AckReceived => {
                    let attempt_no = self.meters[m].current.map_or(0, |p| p.attempt_no);
                    self.log(now, m, attempt_no, LogEvent::Ack);
                    self.complete(m, now);
                }
                Action::AckTimeout => self.on_ack_timeout(m, now),
                Action::Relay(packet) => {
                    self.meters[m].queue.push_back(packet);
                    self.start_next(m, now);
                }
            }
        }
    }

    fn on_arrival(&mut self, m: usize, now: SimTime) {
        let in_window = self.in_window(now);
        let meter = &mut self.meters[m];
        let packet = Packet {
            origin: m,
            access_number: meter.state.take_access_number(),
            generated: now,
            attempt_no: 1,
            relayed: false,
            in_window,
        };
        meter.queue.push_back(packet);
        let gap = SimTime::from_secs(draw_interval_s(meter.config, &mut meter.arrivals));
        let next = now + gap.max(SimTime(1));
        meter.state.next_tx_s = next.as_secs();
        if in_window {
            self.counters.packets += 1;
        }
        if next < self.end {
            self.schedule(next, m, Action::Arrival);
        }
        self.start_next(m, now);
    }

    fn start_next(&mut self, m: usize, now: SimTime) {
        let max_retries = self.max_retries;
        let meter = &mut self.meters[m];
        if meter.current.is_some() {
            return;
        }
        if let Some(packet) = meter.queue.pop_front() {
            meter.current = Some(packet);
            meter.state.retries_left = max_retries;
            self.access(m, now);
        }
    }

    fn complete(&mut self, m: usize, now: SimTime) {
        self.meters[m].current = None;
        self.start_next(m, now);
    }

    fn draw_backoff(&mut self, m: usize) -> SimTime {
        let u: f64 = self.meters[m].backoff.random();
        SimTime::from_secs(u * self.backoff_window_s).max(SimTime(1))
    }

    /// Frame from another meter detectable at `now`: started at least τ ago and
    /// its trailing edge has not yet passed the sensing delay.
    fn channel_busy(&mut self, now: SimTime) -> bool {
        let tau = self.tau;
        self.on_air.retain(|tx| !(tx.ended && tx.end + tau <= now));
        self.on_air
            .iter()
            .any(|tx| tx.start + tau <= now && now < tx.end + tau)
    }

    fn access(&mut self, m: usize, now: SimTime) {
        match self.policy {
            AccessPolicy::PureAloha => self.transmit(m, now),
            AccessPolicy::SlottedAloha => {
                let boundary = now.ceil_to(self.slot);
                if boundary == now {
                    self.transmit(m, now);
                } else {
                    self.schedule(boundary, m, Action::Access);
                }
            }
            AccessPolicy::CsmaCa => {
                if self.channel_busy(now) {
                    if self.in_window(now) {
                        self.counters.deferrals += 1;
                    }
                    if self.options.record_attempts {
                        let attempt_no = self.meters[m].current.map_or(0, |p| p.attempt_no);
                        self.attempts.push(TxAttempt {
                            meter: m,
                            start_s: now.as_secs(),
                            end_s: (now + self.airtime).as_secs(),
                            attempt_no,
                            outcome: Outcome::Deferred,
                        });
                    }
                    let delay = self.draw_backoff(m);
                    self.schedule(now + delay, m, Action::Access);
                } else {
                    self.transmit(m, now);
                }
            }
        }
    }

    fn transmit(&mut self, m: usize, now: SimTime) {
        let packet = self.meters[m].current.expect("transmit without a packet");
        let end = now + self.airtime;
        let id = self.next_tx;
        self.next_tx += 1;

        let tau = self.tau;
        self.on_air.retain(|tx| !(tx.ended && tx.end + tau <= now));
        let mut collided = false;
        for other in self.on_air.iter_mut().filter(|tx| tx.end > now) {
            other.collided = true;
            collided = true;
        }
        self.on_air.push(OnAir {
            id,
            start: now,
            end,
            collided,
            ended: false,
            packet,
        });

        if self.in_window(now) {
            self.counters.transmissions += 1;
            if packet.attempt_no > 1 {
                self.counters.retransmissions += 1;
            }
        }
        if self.options.record_attempts {
            self.attempt_of_tx.push(self.attempts.len());
            self.attempts.push(TxAttempt {
                meter: m,
                start_s: now.as_secs(),
                end_s: end.as_secs(),
                attempt_no: packet.attempt_no,
                outcome: Outcome::Delivered,
            });
        }
        self.log(now, m, packet.attempt_no, LogEvent::TxStart);
        self.schedule(end, m, Action::TxEnd { tx: id });
    }

    fn on_tx_end(&mut self, m: usize, id: u64, now: SimTime) {
        let tx = self
            .on_air
            .iter_mut()
            .find(|tx| tx.id == id)
            .expect("ending transmission is on air");
        tx.ended = true;
        let (start, collided, packet) = (tx.start, tx.collided, tx.packet);

        self.log(now, m, packet.attempt_no, LogEvent::TxEnd);
        if collided {
            self.log(now, m, packet.attempt_no, LogEvent::Collision);
        }
        if self.options.record_attempts {
            let index = self.attempt_of_tx[id as usize];
            self.attempts[index].outcome = if collided {
                Outcome::Collided
            } else {
                Outcome::Delivered
            };
        }

        if self.in_window(start) {
            if collided {
                self.counters.collisions += 1;
            } else {
                self.counters.delivered += 1;
                let window = (self.end - self.warmup).as_nanos() as u128;
                let offset = (start - self.warmup).as_nanos() as u128;
                let batch = (offset * BATCHES as u128 / window) as usize;
                self.counters.delivered_by_batch[batch.min(BATCHES - 1)] += 1;
            }
        }

        if self.options.record_receptions {
            self.receptions.push(Reception {
                time_s: now.as_secs(),
                transmitter: m,
                origin: packet.origin,
                address: self.meters[packet.origin].state.address,
                access_number: packet.access_number,
                attempt_no: packet.attempt_no,
                relayed: packet.relayed,
                intact: !collided,
            });
        }
        if !collided {
            if !packet.relayed && packet.in_window {
                self.counters.delivered_packets += 1;
                self.counters.delay_sum_s += (now - packet.generated).as_secs();
            }
            if !packet.relayed {
                for r in self.repeaters.clone() {
                    if r != m {
                        let copy = Packet {
                            attempt_no: 1,
                            relayed: true,
                            generated: now + self.repeater_delay,
                            ..packet
                        };
                        self.schedule(now + self.repeater_delay, r, Action::Relay(copy));
                    }
                }
            }
        }

        if self.meters[m].expects_ack && !packet.relayed {
            if collided {
                self.schedule(now + self.ack_timeout, m, Action::AckTimeout);
            } else {
                self.schedule(now + self.ack_airtime, m, Action::AckReceived);
            }
        } else {
            self.complete(m, now);
        }
    }

    fn on_ack_timeout(&mut self, m: usize, now: SimTime) {
        let mut packet = self.meters[m].current.expect("timeout without a packet");
        self.log(now, m, packet.attempt_no, LogEvent::Timeout);
        if self.meters[m].state.retries_left > 0 {
            self.meters[m].state.retries_left -= 1;
            packet.attempt_no += 1;
            self.meters[m].current = Some(packet);
            let delay = self.draw_backoff(m);
            self.schedule(now + delay, m, Action::Access);
        } else {
            self.log(now, m, packet.attempt_no, LogEvent::Drop);
            if packet.in_window {
                self.counters.drops += 1;
            }
            if self.options.record_attempts {
                if let Some(last) = self
                    .attempts
                    .iter_mut()
                    .rev()
                    .find(|a| a.meter == m && a.outcome == Outcome::Collided)
                {
                    last.outcome = Outcome::Dropped;
                }
            }
            self.complete(m, now);
        }
    }

    fn finish(self) -> SimOutput {
        let c = &self.counters;
        let window_s = (self.end - self.warmup).as_secs();
        let airtime_s = self.airtime.as_secs();
        let load = |count: u64| count as f64 * airtime_s / window_s;

        let batch_len = window_s / BATCHES as f64;
        let batch_s: Vec<f64> = c
            .delivered_by_batch
            .iter()
            .map(|&d| d as f64 * airtime_s / batch_len)
            .collect();
        let mean = batch_s.iter().sum::<f64>() / BATCHES as f64;
        let var = batch_s.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;

        let metrics = SimMetrics {
            g_offered: self.g_offered,
            g_measured: load(c.transmissions),
            g_access: load(c.transmissions + c.deferrals),
            s_throughput: load(c.delivered),
            s_std_error: (var / BATCHES as f64).sqrt(),
            pdr: if c.packets == 0 {
                1.0
            } else {
                c.delivered_packets as f64 / c.packets as f64
            },
            transmissions: c.transmissions,
            delivered: c.delivered,
            collisions: c.collisions,
            retransmissions: c.retransmissions,
            deferrals: c.deferrals,
            drops: c.drops,
            packets: c.packets,
            mean_delivery_delay_s: if c.delivered_packets == 0 {
                0.0
            } else {
                c.delay_sum_s / c.delivered_packets as f64
            },
            window_s,
        };
        SimOutput {
            metrics,
            attempts: self.attempts,
            receptions: self.receptions,
            log: self.log,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{detect_outcomes, ChannelParams};
    use crate::traffic::{default_profile, Arrival, Mode};

    fn poisson_scenario(policy: AccessPolicy, meters: u32, g: f64, duration_s: f64) -> Scenario {
        let channel = ChannelParams::with_policy(policy);
        let config = MeterConfig {
            count: meters,
            interval_min: f64::from(meters) * channel.airtime_ms / 1e3 / g / 60.0,
            arrival: Arrival::Poisson,
            ..default_profile(MeterKind::Electricity)
        };
        Scenario::new(duration_s, 1, channel, vec![config])
    }

    #[test]
    fn lone_meter_never_collides() {
        for policy in AccessPolicy::ALL {
            let mut s = poisson_scenario(policy, 1, 0.5, 200.0);
            s.channel.ack.enabled = true;
            s.meters[0].config.mode = Mode::T2;
            let m = run_sim(&s, 9).unwrap();
            assert_eq!(m.pdr, 1.0, "{policy:?}");
            assert_eq!(m.collisions, 0);
            assert_eq!(m.drops, 0);
            assert!(m.packets > 1000);
        }
    }

    #[test]
    fn rejects_invalid_scenarios() {
        let mut s = poisson_scenario(AccessPolicy::PureAloha, 1, 0.1, 10.0);
        s.meters.clear();
        assert!(matches!(
            run_sim(&s, 1),
            Err(ChannelError::InvalidScenario(_))
        ));
        let mut s = poisson_scenario(AccessPolicy::PureAloha, 1, 0.1, 10.0);
        s.duration_s = 0.0;
        assert!(matches!(
            run_sim(&s, 1),
            Err(ChannelError::InvalidScenario(_))
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        for policy in AccessPolicy::ALL {
            let mut s = poisson_scenario(policy, 50, 0.6, 60.0);
            s.channel.ack.enabled = true;
            s.meters[0].config.mode = Mode::S2;
            let a = run_sim_with(&s, 4, SimOptions::everything()).unwrap();
            let b = run_sim_with(&s, 4, SimOptions::everything()).unwrap();
            assert_eq!(a, b);
            let c = run_sim_with(&s, 5, SimOptions::everything()).unwrap();
            assert_ne!(a.log, c.log);
        }
    }

    #[test]
    fn online_outcomes_match_interval_rule() {
        for policy in AccessPolicy::ALL {
            let s = poisson_scenario(policy, 200, 0.8, 30.0);
            let out = run_sim_with(&s, 2, SimOptions::everything()).unwrap();
            let sent: Vec<&TxAttempt> = out
                .attempts
                .iter()
                .filter(|a| a.outcome != Outcome::Deferred)
                .collect();
            let intervals: Vec<(f64, f64)> = sent.iter().map(|a| (a.start_s, a.end_s)).collect();
            let expected = detect_outcomes(&intervals);
            let collided = sent.iter().zip(&expected).filter(|(a, e)| {
                assert_eq!(a.outcome, **e, "{policy:?} {a:?}");
                **e == Outcome::Collided
            });
            assert!(collided.count() > 10, "{policy:?}");
        }
    }

    #[test]
    fn conservation_with_retries() {
        let mut s = poisson_scenario(AccessPolicy::PureAloha, 300, 0.6, 120.0);
        s.channel.ack.enabled = true;
        s.channel.ack.max_retries = 2;
        s.meters[0].config.mode = Mode::T2;
        let out = run_sim_with(&s, 3, SimOptions::everything()).unwrap();
        let count = |o| out.attempts.iter().filter(|a| a.outcome == o).count();
        let sent = out.attempts.len() - count(Outcome::Deferred);
        assert_eq!(
            count(Outcome::Delivered) + count(Outcome::Collided) + count(Outcome::Dropped),
            sent
        );
        assert!(count(Outcome::Dropped) > 0);
        assert!(out.attempts.iter().all(|a| a.attempt_no <= 3));

        let m = &out.metrics;
        assert_eq!(m.delivered + m.collisions, m.transmissions);
        assert!(m.retransmissions > 0);
        assert!(m.g_measured > m.g_offered * 1.1);
        assert!(m.s_throughput <= m.g_measured.min(1.0));
        assert!((0.0..=1.0).contains(&m.pdr));
        let log_drops = out.log.iter().filter(|e| e.event == LogEvent::Drop).count();
        assert_eq!(log_drops, count(Outcome::Dropped));
    }

    #[test]
    fn without_ack_measured_load_tracks_offered() {
        let s = poisson_scenario(AccessPolicy::PureAloha, 1000, 0.4, 2000.0);
        let m = run_sim(&s, 8).unwrap();
        assert_eq!(m.retransmissions, 0);
        assert!((m.g_measured / m.g_offered - 1.0).abs() < 0.02, "{m:?}");
        assert_eq!(m.g_access, m.g_measured);
    }

    #[test]
    fn ack_retries_lift_pdr_at_low_load() {
        let mut s = poisson_scenario(AccessPolicy::PureAloha, 500, 0.05, 4000.0);
        let plain = run_sim(&s, 6).unwrap();
        s.channel.ack.enabled = true;
        s.channel.ack.max_retries = 8;
        s.meters[0].config.mode = Mode::T2;
        let acked = run_sim(&s, 6).unwrap();
        assert!(plain.pdr < 0.95);
        assert!(acked.pdr > 0.9999, "{acked:?}");
        assert!(acked.mean_delivery_delay_s > plain.mean_delivery_delay_s);
    }

    #[test]
    fn slotted_starts_on_boundaries() {
        let s = poisson_scenario(AccessPolicy::SlottedAloha, 100, 0.5, 30.0);
        let out = run_sim_with(&s, 1, SimOptions::everything()).unwrap();
        for e in out.log.iter().filter(|e| e.event == LogEvent::TxStart) {
            assert_eq!(e.time.as_nanos() % 10_000_000, 0);
        }
    }

    #[test]
    fn csma_collisions_only_within_turnaround() {
        let s = poisson_scenario(AccessPolicy::CsmaCa, 200, 1.0, 60.0);
        let out = run_sim_with(&s, 1, SimOptions::everything()).unwrap();
        let mut sent: Vec<&TxAttempt> = out
            .attempts
            .iter()
            .filter(|a| a.outcome != Outcome::Deferred)
            .collect();
        sent.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        let tau = 1e-3 + 1e-9;
        let mut overlaps = 0;
        for pair in sent.windows(2) {
            let gap = pair[1].start_s - pair[0].start_s;
            if gap < 0.010 {
                overlaps += 1;
                assert!(gap < tau, "start gap {gap} exceeds sensing delay");
            }
        }
        assert!(overlaps > 0);
        assert!(out.metrics.deferrals > 0);
    }

    #[test]
    fn meters_never_overlap_themselves() {
        let s = poisson_scenario(AccessPolicy::PureAloha, 3, 0.9, 60.0);
        let out = run_sim_with(&s, 1, SimOptions::everything()).unwrap();
        for meter in 0..3 {
            let starts: Vec<f64> = out
                .attempts
                .iter()
                .filter(|a| a.meter == meter)
                .map(|a| a.start_s)
                .collect();
            for w in starts.windows(2) {
                assert!(w[1] - w[0] >= 0.010 - 1e-12);
            }
        }
    }

    #[test]
    fn event_log_csv() {
        let s = poisson_scenario(AccessPolicy::PureAloha, 2, 0.1, 1.0);
        let out = run_sim_with(&s, 1, SimOptions::everything()).unwrap();
        let mut buf = Vec::new();
        write_event_log(&out.log, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("time_s,meter,attempt_no,event"));
        let first = lines.next().unwrap();
        assert!(first.ends_with(",1,tx_start"), "{first}");
    }
}
