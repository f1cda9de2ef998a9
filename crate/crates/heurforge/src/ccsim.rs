//! Single-bottleneck congestion-control evaluator: a discrete-event
//! drop-tail link simulator whose sender window logic is a kernel-mode
//! program, invoked on every ACK (with a loss flag when a drop is detected
//! via a 3-duplicate-ACK analog).
//!
//! The link is a FIFO server at `rate_bps` with `one_way_delay_ms`
//! propagation each way; an ACK for a packet enqueued at t returns at
//! (service completion of t) + 2 x propagation.

use std::collections::BinaryHeap;
use std::cmp::Reverse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{check_program, eval_kernel, CheckReport, KernelCtx, Mode, Program};
use crate::util::splitmix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub rate_bps: u64,
    pub one_way_delay_ms: u64,
    /// Drop-tail buffer in bytes; `None` means 1 x BDP.
    pub queue_capacity_bytes: Option<u64>,
    pub mss_bytes: u64,
    pub duration_s: u64,
    pub flows: usize,
    pub rng_seed: u64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            rate_bps: 12_000_000,
            one_way_delay_ms: 20,
            queue_capacity_bytes: None,
            mss_bytes: 1500,
            duration_s: 60,
            flows: 1,
            rng_seed: 0,
        }
    }
}

impl LinkConfig {
    /// Bandwidth-delay product: rate x round-trip propagation.
    pub fn bdp_bytes(&self) -> u64 {
        self.rate_bps / 8 * 2 * self.one_way_delay_ms / 1000
    }

    pub fn queue_capacity(&self) -> u64 {
        self.queue_capacity_bytes.unwrap_or_else(|| self.bdp_bytes())
    }

    fn validate(&self) -> Result<(), CcError> {
        for (name, v) in [
            ("rate_bps", self.rate_bps),
            ("one_way_delay_ms", self.one_way_delay_ms),
            ("mss_bytes", self.mss_bytes),
            ("duration_s", self.duration_s),
            ("flows", self.flows as u64),
            ("queue_capacity_bytes", self.queue_capacity()),
        ] {
            if v == 0 {
                return Err(CcError::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CcError {
    #[error("program failed validation: {0:?}")]
    CheckFailed(CheckReport),
    #[error("cc template requires a kernel-mode program")]
    WrongMode,
    #[error("invalid link config: {0}")]
    Config(String),
}

pub const HISTORY_SLOTS: usize = 10;

/// Per-RTT-interval smoothed samples; slot 0 is the most recent completed
/// interval. Values are EWMA-smoothed across intervals with gain 1/8.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistoryRing {
    pub cwnd: [i64; HISTORY_SLOTS],
    pub srtt: [i64; HISTORY_SLOTS],
    /// Delivery rate in bytes/sec.
    pub rate: [i64; HISTORY_SLOTS],
    pub loss: [i64; HISTORY_SLOTS],
}

impl HistoryRing {
    fn push(&mut self, cwnd: i64, srtt: i64, rate: i64, loss: i64) {
        for arr in [&mut self.cwnd, &mut self.srtt, &mut self.rate, &mut self.loss] {
            arr.rotate_right(1);
        }
        self.cwnd[0] = cwnd;
        self.srtt[0] = srtt;
        self.rate[0] = rate;
        self.loss[0] = loss;
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub cwnd_bytes: u64,
    pub prev_cwnd_bytes: u64,
    pub inflight_bytes: u64,
    pub srtt_us: u64,
    pub min_rtt_us: u64,
    pub delivered_bytes: u64,
    pub loss_events: u64,
    pub history: HistoryRing,
    // interval bookkeeping
    interval_end_us: u64,
    interval_acked: u64,
    interval_losses: u64,
    interval_start_us: u64,
    smoothed: Option<(f64, f64, f64, f64)>, // (cwnd, srtt, rate, loss)
    // loss detection
    pending_drops: usize,
    dup_acks: u32,
    // lifetime accounting
    sent_bytes: u64,
    sent_packets: u64,
    dropped_packets: u64,
    lost_detected_bytes: u64,
    retransmits: u64,
    start_us: u64,
}

impl FlowState {
    fn new(initial_cwnd: u64, start_us: u64) -> Self {
        FlowState {
            cwnd_bytes: initial_cwnd,
            prev_cwnd_bytes: initial_cwnd,
            inflight_bytes: 0,
            srtt_us: 0,
            min_rtt_us: u64::MAX,
            delivered_bytes: 0,
            loss_events: 0,
            history: HistoryRing::default(),
            interval_end_us: 0,
            interval_acked: 0,
            interval_losses: 0,
            interval_start_us: start_us,
            smoothed: None,
            pending_drops: 0,
            dup_acks: 0,
            sent_bytes: 0,
            sent_packets: 0,
            dropped_packets: 0,
            lost_detected_bytes: 0,
            retransmits: 0,
            start_us,
        }
    }
}

/// The kernel-mode evaluation context for one decision.
struct CcCtx<'a> {
    flow: &'a FlowState,
    mss: u64,
    acked_bytes: u64,
    rtt_us: u64,
    loss_flag: bool,
}

impl KernelCtx for CcCtx<'_> {
    fn scalar(&self, name: &str) -> i64 {
        if let Some(rest) = name.strip_prefix("cwnd_h") {
            return slot(&self.flow.history.cwnd, rest);
        }
        if let Some(rest) = name.strip_prefix("srtt_h") {
            return slot(&self.flow.history.srtt, rest);
        }
        if let Some(rest) = name.strip_prefix("rate_h") {
            return slot(&self.flow.history.rate, rest);
        }
        if let Some(rest) = name.strip_prefix("loss_h") {
            return slot(&self.flow.history.loss, rest);
        }
        match name {
            "cwnd" => self.flow.cwnd_bytes as i64,
            "prev_cwnd" => self.flow.prev_cwnd_bytes as i64,
            "srtt_us" => self.flow.srtt_us as i64,
            "rtt_us" => self.rtt_us as i64,
            "min_rtt_us" => self.flow.min_rtt_us.min(i64::MAX as u64) as i64,
            "inflight_bytes" => self.flow.inflight_bytes as i64,
            "mss" => self.mss as i64,
            "acked_bytes" => self.acked_bytes as i64,
            "loss_flag" => self.loss_flag as i64,
            _ => 0,
        }
    }
}

fn slot(arr: &[i64; HISTORY_SLOTS], idx: &str) -> i64 {
    idx.parse::<usize>()
        .ok()
        .filter(|&i| i < HISTORY_SLOTS)
        .map_or(0, |i| arr[i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcMetrics {
    /// delivered_bytes / (link capacity x duration).
    pub utilization: f64,
    pub avg_queue_delay_ms: f64,
    pub p95_queue_delay_ms: f64,
    /// Dropped packets / sent packets.
    pub loss_rate: f64,
    pub retransmits: u64,
    // telemetry beyond the headline metrics
    pub delivered_bytes: u64,
    pub sent_bytes: u64,
    pub lost_detected_bytes: u64,
    pub inflight_bytes_end: u64,
    pub min_rtt_us: u64,
    pub loss_events: u64,
}

/// Run `program` as the cwnd decision function over a simulated link.
/// Deterministic given (program, link).
pub fn run_cc(program: &Program, link: &LinkConfig) -> Result<CcMetrics, CcError> {
    if program.mode != Mode::Kernel {
        return Err(CcError::WrongMode);
    }
    let report = check_program(program);
    if !report.ok {
        return Err(CcError::CheckFailed(report));
    }
    link.validate()?;
    Ok(Sim::new(program, link).run())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct AckEvent {
    time_us: u64,
    seq: u64,
    flow: usize,
    send_time_us: u64,
}

struct Sim<'a> {
    program: &'a Program,
    link: &'a LinkConfig,
    mss: u64,
    prop_us: u64,
    service_us: u64,
    duration_us: u64,
    cwnd_max: u64,
    queue_cap: u64,
    server_free_at_us: u64,
    flows: Vec<FlowState>,
    heap: BinaryHeap<Reverse<AckEvent>>,
    next_seq: u64,
    queue_delays_us: Vec<u64>,
}

impl<'a> Sim<'a> {
    fn new(program: &'a Program, link: &'a LinkConfig) -> Self {
        let mss = link.mss_bytes;
        let bdp = link.bdp_bytes().max(mss);
        let mut flows = Vec::with_capacity(link.flows);
        for i in 0..link.flows {
            // Stagger flow starts deterministically inside the first RTT.
            let jitter = splitmix64(link.rng_seed ^ i as u64) % (2 * link.one_way_delay_ms * 1000 + 1);
            flows.push(FlowState::new(10 * mss, i as u64 + jitter));
        }
        Sim {
            program,
            link,
            mss,
            prop_us: link.one_way_delay_ms * 1000,
            service_us: (mss * 8 * 1_000_000).div_ceil(link.rate_bps),
            duration_us: link.duration_s * 1_000_000,
            cwnd_max: 10 * bdp,
            queue_cap: link.queue_capacity(),
            server_free_at_us: 0,
            flows,
            heap: BinaryHeap::new(),
            next_seq: 0,
            queue_delays_us: Vec::new(),
        }
    }

    fn run(mut self) -> CcMetrics {
        let starts: Vec<u64> = self.flows.iter().map(|f| f.start_us).collect();
        for (i, s) in starts.into_iter().enumerate() {
            self.try_send(i, s);
        }
        while let Some(Reverse(ev)) = self.heap.pop() {
            if ev.time_us > self.duration_us {
                break;
            }
            self.on_ack(ev);
        }
        self.metrics()
    }

    fn decide(&mut self, flow: usize, rtt_us: u64, acked: u64, loss: bool) {
        let f = &self.flows[flow];
        let ctx = CcCtx {
            flow: f,
            mss: self.mss,
            acked_bytes: acked,
            rtt_us,
            loss_flag: loss,
        };
        let out = eval_kernel(self.program, &ctx);
        let f = &mut self.flows[flow];
        f.prev_cwnd_bytes = f.cwnd_bytes;
        f.cwnd_bytes = (out.max(0) as u64).clamp(self.mss, self.cwnd_max);
    }

    fn on_ack(&mut self, ev: AckEvent) {
        let now = ev.time_us;
        let flow = ev.flow;
        let rtt = now - ev.send_time_us;
        {
            let f = &mut self.flows[flow];
            f.inflight_bytes -= self.mss;
            f.delivered_bytes += self.mss;
            f.interval_acked += self.mss;
            f.min_rtt_us = f.min_rtt_us.min(rtt);
            // srtt EWMA with gain 1/8; first sample initializes.
            f.srtt_us = if f.srtt_us == 0 {
                rtt
            } else {
                let s = f.srtt_us as i64;
                (s + (rtt as i64 - s) / 8).max(1) as u64
            };
        }
        self.sample_history(flow, now);

        // 3-duplicate-ACK analog: a drop is declared lost after three
        // subsequent ACKs arrive.
        let mut loss = false;
        {
            let f = &mut self.flows[flow];
            if f.pending_drops > 0 {
                f.dup_acks += 1;
                if f.dup_acks >= 3 {
                    f.dup_acks = 0;
                    f.pending_drops -= 1;
                    f.inflight_bytes -= self.mss;
                    f.lost_detected_bytes += self.mss;
                    f.loss_events += 1;
                    f.interval_losses += 1;
                    f.retransmits += 1;
                    loss = true;
                }
            }
        }
        self.decide(flow, rtt, self.mss, loss);
        self.try_send(flow, now);
    }

    /// Close any completed srtt interval and push smoothed samples.
    fn sample_history(&mut self, flow: usize, now: u64) {
        let srtt = self.flows[flow].srtt_us.max(1);
        let f = &mut self.flows[flow];
        if f.interval_end_us == 0 {
            f.interval_end_us = f.interval_start_us + srtt;
            return;
        }
        if now < f.interval_end_us {
            return;
        }
        let span = (now - f.interval_start_us).max(1);
        let raw_rate = f.interval_acked as f64 * 1_000_000.0 / span as f64;
        let raw = (
            f.cwnd_bytes as f64,
            f.srtt_us as f64,
            raw_rate,
            f.interval_losses as f64,
        );
        let sm = match f.smoothed {
            None => raw,
            Some((c, s, r, l)) => (
                c + (raw.0 - c) / 8.0,
                s + (raw.1 - s) / 8.0,
                r + (raw.2 - r) / 8.0,
                l + (raw.3 - l) / 8.0,
            ),
        };
        f.smoothed = Some(sm);
        f.history.push(sm.0 as i64, sm.1 as i64, sm.2 as i64, sm.3 as i64);
        f.interval_acked = 0;
        f.interval_losses = 0;
        f.interval_start_us = now;
        f.interval_end_us = now + srtt;
    }

    fn try_send(&mut self, flow: usize, now: u64) {
        while self.flows[flow].inflight_bytes + self.mss <= self.flows[flow].cwnd_bytes
            && now < self.duration_us
        {
            let backlog_us = self.server_free_at_us.saturating_sub(now);
            let backlog_bytes = backlog_us * self.link.rate_bps / 8_000_000;
            let f = &mut self.flows[flow];
            f.sent_bytes += self.mss;
            f.sent_packets += 1;
            f.inflight_bytes += self.mss;
            if backlog_bytes + self.mss <= self.queue_cap {
                self.queue_delays_us.push(backlog_us);
                self.server_free_at_us = self.server_free_at_us.max(now) + self.service_us;
                let ack = AckEvent {
                    time_us: self.server_free_at_us + 2 * self.prop_us,
                    seq: self.next_seq,
                    flow,
                    send_time_us: now,
                };
                self.next_seq += 1;
                self.heap.push(Reverse(ack));
            } else {
                f.dropped_packets += 1;
                f.pending_drops += 1;
            }
        }
    }

    fn metrics(&self) -> CcMetrics {
        let delivered: u64 = self.flows.iter().map(|f| f.delivered_bytes).sum();
        let sent: u64 = self.flows.iter().map(|f| f.sent_bytes).sum();
        let sent_packets: u64 = self.flows.iter().map(|f| f.sent_packets).sum();
        let dropped: u64 = self.flows.iter().map(|f| f.dropped_packets).sum();
        let capacity = (self.link.rate_bps / 8) * self.link.duration_s;
        let mut delays = self.queue_delays_us.clone();
        delays.sort_unstable();
        let avg = if delays.is_empty() {
            0.0
        } else {
            delays.iter().sum::<u64>() as f64 / delays.len() as f64 / 1000.0
        };
        let p95 = if delays.is_empty() {
            0.0
        } else {
            let rank = ((0.95 * delays.len() as f64).ceil() as usize).clamp(1, delays.len());
            delays[rank - 1] as f64 / 1000.0
        };
        CcMetrics {
            utilization: delivered as f64 / capacity as f64,
            avg_queue_delay_ms: avg,
            p95_queue_delay_ms: p95,
            loss_rate: if sent_packets == 0 {
                0.0
            } else {
                dropped as f64 / sent_packets as f64
            },
            retransmits: self.flows.iter().map(|f| f.retransmits).sum(),
            delivered_bytes: delivered,
            sent_bytes: sent,
            lost_detected_bytes: self.flows.iter().map(|f| f.lost_detected_bytes).sum(),
            inflight_bytes_end: self.flows.iter().map(|f| f.inflight_bytes).sum(),
            min_rtt_us: self.flows.iter().map(|f| f.min_rtt_us).min().unwrap_or(0),
            loss_events: self.flows.iter().map(|f| f.loss_events).sum(),
        }
    }
}

/// Additive-increase / multiplicative-decrease in window bytes.
pub const AIMD_SEED: &str =
    "let incr = mss * mss / max(1, cwnd); return loss_flag ? max(mss, cwnd / 2) : cwnd + incr;";

/// Constant two-packet window.
pub const FIXED_CWND_SEED: &str = "return 2 * mss;";

/// Built-in kernel-mode seed programs; both pass the checker.
pub fn cc_seed_programs() -> Vec<(&'static str, Program)> {
    use crate::dsl::parse;
    vec![
        ("aimd", parse(AIMD_SEED, Mode::Kernel).expect("aimd seed parses")),
        (
            "fixed-cwnd",
            parse(FIXED_CWND_SEED, Mode::Kernel).expect("fixed seed parses"),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn kernel(src: &str) -> Program {
        parse(src, Mode::Kernel).unwrap()
    }

    fn conservation_holds(m: &CcMetrics) -> bool {
        m.sent_bytes == m.delivered_bytes + m.inflight_bytes_end + m.lost_detected_bytes
    }

    #[test]
    fn fixed_two_packet_window_utilization() {
        let link = LinkConfig::default();
        let m = run_cc(&kernel(FIXED_CWND_SEED), &link).unwrap();
        // Throughput = cwnd / RTT = 3000 B / 41 ms ~ 4.88% of 1.5 MB/s.
        let expected = 2.0 * 1500.0 / (0.041 * 1_500_000.0);
        assert!((m.utilization - expected).abs() < 0.005, "{}", m.utilization);
        assert_eq!(m.min_rtt_us, 41_000);
        assert_eq!(m.loss_rate, 0.0);
        assert!(conservation_holds(&m));
    }

    #[test]
    fn aimd_fills_the_pipe() {
        let link = LinkConfig::default();
        let m = run_cc(&kernel(AIMD_SEED), &link).unwrap();
        assert!(m.utilization >= 0.80, "utilization {}", m.utilization);
        assert!(m.utilization <= 1.02);
        assert!(conservation_holds(&m));
        // A 1xBDP drop-tail buffer forces periodic losses under AIMD.
        assert!(m.loss_events > 0);
        assert_eq!(m.retransmits, m.loss_events);
    }

    #[test]
    fn one_packet_buffer_bounds_queue_delay() {
        let link = LinkConfig {
            queue_capacity_bytes: Some(1500),
            duration_s: 10,
            ..Default::default()
        };
        let m = run_cc(&kernel("return cwnd + acked_bytes;"), &link).unwrap();
        // Max wait is one packet's service time: 1500*8/12e6 = 1 ms.
        assert!(m.avg_queue_delay_ms <= 1.0, "{}", m.avg_queue_delay_ms);
        assert!(m.p95_queue_delay_ms <= 1.0);
    }

    #[test]
    fn aggressive_program_is_clamped_and_lossy() {
        let link = LinkConfig {
            duration_s: 20,
            ..Default::default()
        };
        let m = run_cc(&kernel("return cwnd * 2;"), &link).unwrap();
        assert!(m.utilization <= 1.02);
        assert!(m.loss_rate > 0.0);
        assert!(conservation_holds(&m));
        // Queue delay cannot exceed the buffer drain time (1xBDP = 40 ms).
        assert!(m.p95_queue_delay_ms <= 40.0 + 1.0);
    }

    #[test]
    fn seeds_pass_checker_and_unguarded_variant_fails() {
        for (name, p) in cc_seed_programs() {
            assert!(check_program(&p).ok, "{name}");
        }
        let bad = parse(
            "let incr = mss * mss / cwnd; return loss_flag ? max(mss, cwnd / 2) : cwnd + incr;",
            Mode::Kernel,
        )
        .unwrap();
        let err = run_cc(&bad, &LinkConfig::default()).unwrap_err();
        assert!(matches!(err, CcError::CheckFailed(_)));
    }

    #[test]
    fn runs_are_deterministic() {
        let link = LinkConfig {
            flows: 3,
            duration_s: 15,
            rng_seed: 9,
            ..Default::default()
        };
        let a = run_cc(&kernel(AIMD_SEED), &link).unwrap();
        let b = run_cc(&kernel(AIMD_SEED), &link).unwrap();
        assert_eq!(a, b);
        assert!(a.utilization <= 1.02);
        assert!(conservation_holds(&a));
    }

    #[test]
    fn invalid_config_and_mode_rejected() {
        let link = LinkConfig {
            rate_bps: 0,
            ..Default::default()
        };
        assert!(matches!(
            run_cc(&kernel(AIMD_SEED), &link),
            Err(CcError::Config(_))
        ));
        let cache_prog = parse("return count;", Mode::Cache).unwrap();
        assert!(matches!(
            run_cc(&cache_prog, &LinkConfig::default()),
            Err(CcError::WrongMode)
        ));
    }

    #[test]
    fn history_and_flow_invariants() {
        let link = LinkConfig {
            duration_s: 30,
            ..Default::default()
        };
        let program = kernel(AIMD_SEED);
        let mut sim = Sim::new(&program, &link);
        let starts: Vec<u64> = sim.flows.iter().map(|f| f.start_us).collect();
        for (i, s) in starts.into_iter().enumerate() {
            sim.try_send(i, s);
        }
        while let Some(Reverse(ev)) = sim.heap.pop() {
            if ev.time_us > sim.duration_us {
                break;
            }
            sim.on_ack(ev);
            let f = &sim.flows[0];
            // Sends respect the window, so inflight never exceeds the
            // largest window the clamp allows (plus the burst in progress).
            assert!(f.inflight_bytes <= sim.cwnd_max + 10 * 1500);
            assert!(f.min_rtt_us <= f.srtt_us || f.srtt_us == 0);
        }
        let f = &sim.flows[0];
        assert!(f.min_rtt_us >= 2 * 20_000); // RTT floor: propagation bound
        assert!(f.history.cwnd[0] > 0); // intervals were sampled
        assert!(f.history.srtt[0] >= 41_000);
        assert!(f.history.rate[0] > 0);
    }

    #[test]
    fn bdp_arithmetic() {
        let link = LinkConfig::default();
        assert_eq!(link.bdp_bytes(), 60_000);
        assert_eq!(link.queue_capacity(), 60_000);
    }
}
