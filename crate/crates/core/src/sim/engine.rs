use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SimConfig, SimError, SimStats, Traffic};
use crate::routing::{
    assign_vcs_limit, fat_tree_route, ugal_select, Algorithm, MinRoutes, QueueView, Route, RoutingError,
};
use crate::split_seed;
use crate::topology::{EndpointId, RouterId, Topology};

/// Longest route (in router ports, ejection included) a flit can carry.
const MAX_PORTS: usize = 8;

#[derive(Debug, Clone, Copy)]
struct Flit {
    dst: EndpointId,
    created: u64,
    /// Earliest cycle the flit may leave its current buffer.
    ready: u64,
    /// Index of the router the flit is at, along its route.
    hop: u8,
    len: u8,
    ports: [u16; MAX_PORTS],
    measured: bool,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    /// Flit reaches a router input port.
    Arrive { port: u32, vc: u8, flit: Flit },
    /// Credit reaches a router output port.
    Credit { port: u32, vc: u8 },
    /// Credit reaches an endpoint's injection channel.
    EndpointCredit { endpoint: u32 },
    /// Flit reaches its destination endpoint.
    Deliver { flit: Flit },
}

/// Occupancy of router output ports as seen through their credits.
struct CreditView<'b> {
    base: &'b [u32],
    credits: &'b [u32],
    vcs: usize,
    cap: u32,
}

impl QueueView for CreditView<'_> {
    fn port_occupancy(&self, router: RouterId, port: usize) -> u32 {
        let gp = (self.base[router as usize] as usize + port) * self.vcs;
        self.credits[gp..gp + self.vcs].iter().map(|&c| self.cap - c).sum()
    }
}

#[derive(Default)]
struct Window {
    latency_sum: u64,
    delivered: u64,
}

/// Full simulator state for one run.
pub struct Network<'a> {
    topo: &'a Topology,
    cfg: SimConfig,
    traffic: &'a Traffic,
    routes: MinRoutes<'a>,
    vcs: usize,
    vc_cap: u32,
    inj_cap: u32,
    now: u64,

    /// First global port of each router (network ports, then endpoint ports).
    base: Vec<u32>,
    port_router: Vec<u32>,
    /// Network output: downstream input port. Endpoint port: endpoint ID.
    peer: Vec<u32>,
    /// Network input: upstream output port feeding it.
    upstream: Vec<u32>,
    inputs: Vec<VecDeque<Flit>>,
    credits: Vec<u32>,
    outq: Vec<VecDeque<Flit>>,
    rr_vc: Vec<u8>,
    rr_in: Vec<u16>,
    buffered: Vec<u32>,
    queued: Vec<u32>,

    sources: Vec<EndpointId>,
    source_queue: Vec<VecDeque<Flit>>,
    inj_credits: Vec<u32>,
    next_gen: Vec<u64>,

    wheel: Vec<Vec<Event>>,
    traffic_rng: ChaCha8Rng,
    route_rng: ChaCha8Rng,
    requests: Vec<(u16, u16, u16, u8)>,

    injecting: bool,
    in_network: u64,
    last_move: u64,
    measure: Option<(u64, u64)>,
    window: Window,
    latencies: Vec<u64>,
    hop_sum: u64,
    generated_in_measure: u64,
    delivered_in_measure: u64,
    outstanding_measured: u64,
    channel_sends: Vec<u64>,
}

fn default_vcs(algorithm: Algorithm, diameter: u32, cap_three: bool) -> u32 {
    match algorithm {
        Algorithm::Min => diameter.max(1),
        Algorithm::NearestCommonAncestor => 4,
        Algorithm::Valiant if cap_three => 3.max(diameter),
        _ => 2 * diameter.max(1),
    }
}

impl<'a> Network<'a> {
    pub fn new(topo: &'a Topology, cfg: &SimConfig, traffic: &'a Traffic) -> Result<Self, SimError> {
        cfg.validate()?;
        if cfg.routing == Algorithm::NearestCommonAncestor && topo.kind() != crate::topology::TopologyKind::FatTree3 {
            return Err(RoutingError::NotAFatTree(cfg.routing).into());
        }
        let routes = MinRoutes::new(topo);
        let n = topo.num_routers();
        let mut diameter = 0u32;
        for s in 0..n as RouterId {
            for d in 0..n as RouterId {
                let h = routes.distance(s, d);
                if h == u8::MAX && topo.endpoint_count(s) > 0 && topo.endpoint_count(d) > 0 {
                    return Err(RoutingError::NoPath { from: s, to: d }.into());
                }
                if h != u8::MAX {
                    diameter = diameter.max(h as u32);
                }
            }
        }
        let vcs = cfg.vc_count.unwrap_or_else(|| default_vcs(cfg.routing, diameter, cfg.valiant_cap_three)) as usize;
        if cfg.buffer_flits_per_port < vcs as u32 {
            return Err(SimError::BadConfig(format!(
                "{} buffer flits cannot be split across {vcs} VCs",
                cfg.buffer_flits_per_port
            )));
        }
        let vc_cap = cfg.buffer_flits_per_port / vcs as u32;

        let mut base = Vec::with_capacity(n + 1);
        let mut port_router = Vec::new();
        base.push(0u32);
        for r in 0..n as RouterId {
            let ports = topo.degree(r) as u32 + topo.endpoint_count(r);
            port_router.extend(std::iter::repeat(r).take(ports as usize));
            base.push(base[r as usize] + ports);
        }
        let total = *base.last().unwrap() as usize;
        let mut peer = vec![0u32; total];
        let mut upstream = vec![u32::MAX; total];
        for r in 0..n as RouterId {
            let b = base[r as usize];
            for (j, &v) in topo.neighbors(r).iter().enumerate() {
                let back = topo.port_to(v, r).expect("links are symmetric") as u32;
                peer[(b + j as u32) as usize] = base[v as usize] + back;
                upstream[(base[v as usize] + back) as usize] = b + j as u32;
            }
            let deg = topo.degree(r) as u32;
            for (j, e) in topo.endpoints_of(r).enumerate() {
                peer[(b + deg + j as u32) as usize] = e;
            }
        }
        let mut credits = vec![0u32; total * vcs];
        for r in 0..n as RouterId {
            let b = base[r as usize] as usize;
            for j in 0..topo.degree(r) {
                credits[(b + j) * vcs..(b + j + 1) * vcs].fill(vc_cap);
            }
        }

        let ne = topo.num_endpoints();
        let sources = traffic.sources();
        let wheel_len = (cfg.credit_delay + cfg.channel_latency).max(cfg.channel_latency) as usize + 1;
        let mut net = Network {
            topo,
            cfg: cfg.clone(),
            traffic,
            routes,
            vcs,
            vc_cap,
            inj_cap: cfg.buffer_flits_per_port,
            now: 0,
            base,
            port_router,
            peer,
            upstream,
            inputs: (0..total * vcs).map(|_| VecDeque::new()).collect(),
            credits,
            outq: (0..total).map(|_| VecDeque::new()).collect(),
            rr_vc: vec![0; total],
            rr_in: vec![0; total],
            buffered: vec![0; n],
            queued: vec![0; n],
            sources,
            source_queue: (0..ne).map(|_| VecDeque::new()).collect(),
            inj_credits: vec![cfg.buffer_flits_per_port; ne],
            next_gen: vec![u64::MAX; ne],
            wheel: vec![Vec::new(); wheel_len],
            traffic_rng: ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, 1)),
            route_rng: ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, 2)),
            requests: Vec::new(),
            injecting: true,
            in_network: 0,
            last_move: 0,
            measure: None,
            window: Window::default(),
            latencies: Vec::new(),
            hop_sum: 0,
            generated_in_measure: 0,
            delivered_in_measure: 0,
            outstanding_measured: 0,
            channel_sends: vec![0; total],
        };
        for i in 0..net.sources.len() {
            let e = net.sources[i] as usize;
            net.next_gen[e] = net.gap() - 1;
        }
        Ok(net)
    }

    /// Cycles until the next Bernoulli arrival (at least 1).
    fn gap(&mut self) -> u64 {
        let rate = self.cfg.injection_rate;
        if rate >= 1.0 {
            return 1;
        }
        let u: f64 = 1.0 - self.traffic_rng.gen::<f64>();
        1 + (u.ln() / (1.0 - rate).ln()).floor() as u64
    }

    pub fn vc_count(&self) -> usize {
        self.vcs
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Flits injected into the network and not yet delivered.
    pub fn in_network(&self) -> u64 {
        self.in_network
    }

    pub fn queued_at_sources(&self) -> usize {
        self.source_queue.iter().map(VecDeque::len).sum()
    }

    fn schedule(&mut self, delay: u32, ev: Event) {
        let slot = ((self.now + delay as u64) % self.wheel.len() as u64) as usize;
        self.wheel[slot].push(ev);
    }

    fn route_for(&mut self, router: RouterId, dst: EndpointId) -> Result<Route, RoutingError> {
        let dst_router = self.topo.router_of(dst);
        let view = CreditView { base: &self.base, credits: &self.credits, vcs: self.vcs, cap: self.vc_cap };
        let route = if router == dst_router {
            Route { hops: vec![router], vcs: Vec::new(), algorithm: self.cfg.routing }
        } else {
            match self.cfg.routing {
                Algorithm::Min => self.routes.route(router, dst_router)?,
                Algorithm::Valiant => {
                    self.routes.valiant(router, dst_router, self.cfg.valiant_cap_three, &mut self.route_rng)?
                }
                Algorithm::UgalLocal | Algorithm::UgalGlobal => ugal_select(
                    &self.routes,
                    router,
                    dst_router,
                    &view,
                    self.cfg.routing == Algorithm::UgalGlobal,
                    self.cfg.ugal_candidates,
                    &mut self.route_rng,
                )?,
                Algorithm::NearestCommonAncestor => fat_tree_route(self.topo, router, dst_router, &view)?,
            }
        };
        assign_vcs_limit(route, self.vcs.min(MAX_PORTS - 1))
    }

    fn process_events(&mut self) -> Result<(), SimError> {
        let slot = (self.now % self.wheel.len() as u64) as usize;
        let mut events = std::mem::take(&mut self.wheel[slot]);
        for ev in events.drain(..) {
            match ev {
                Event::Arrive { port, vc, mut flit } => {
                    let r = self.port_router[port as usize];
                    let local = port - self.base[r as usize];
                    if local as usize >= self.topo.degree(r) {
                        let route = self.route_for(r, flit.dst)?;
                        let dst_router = *route.hops.last().unwrap();
                        for (k, (u, v)) in route.links().enumerate() {
                            flit.ports[k] = self.topo.port_to(u, v).expect("route follows links") as u16;
                        }
                        let eject = self.topo.degree(dst_router) as u32
                            + (flit.dst - self.topo.endpoints_of(dst_router).start);
                        flit.ports[route.len()] = eject as u16;
                        flit.len = route.len() as u8 + 1;
                        flit.hop = 0;
                    }
                    flit.ready = self.now + self.cfg.va_delay as u64;
                    let q = &mut self.inputs[port as usize * self.vcs + vc as usize];
                    q.push_back(flit);
                    debug_assert!(
                        q.len() as u32 <= if local as usize >= self.topo.degree(r) { self.inj_cap } else { self.vc_cap }
                    );
                    self.buffered[r as usize] += 1;
                }
                Event::Credit { port, vc } => {
                    let c = &mut self.credits[port as usize * self.vcs + vc as usize];
                    *c += 1;
                    debug_assert!(*c <= self.vc_cap);
                }
                Event::EndpointCredit { endpoint } => self.inj_credits[endpoint as usize] += 1,
                Event::Deliver { flit } => {
                    self.in_network -= 1;
                    self.last_move = self.now;
                    let latency = self.now - flit.created;
                    self.window.latency_sum += latency;
                    self.window.delivered += 1;
                    if let Some((start, end)) = self.measure {
                        if self.now >= start && self.now < end {
                            self.delivered_in_measure += 1;
                        }
                    }
                    if flit.measured {
                        self.latencies.push(latency);
                        self.hop_sum += flit.len as u64 - 1;
                        self.outstanding_measured -= 1;
                    }
                }
            }
        }
        self.wheel[slot] = events;
        Ok(())
    }

    fn inject(&mut self) {
        let now = self.now;
        let measuring = self.measure.is_some_and(|(s, e)| now >= s && now < e);
        for i in 0..self.sources.len() {
            let e = self.sources[i];
            if self.injecting {
                while self.next_gen[e as usize] <= now {
                    let dst = self.traffic.destination(e, &mut self.traffic_rng);
                    self.source_queue[e as usize].push_back(Flit {
                        dst,
                        created: now,
                        ready: now,
                        hop: 0,
                        len: 0,
                        ports: [0; MAX_PORTS],
                        measured: measuring,
                    });
                    if measuring {
                        self.generated_in_measure += 1;
                        self.outstanding_measured += 1;
                    }
                    let g = self.gap();
                    self.next_gen[e as usize] += g;
                }
            }
            for _ in 0..self.cfg.io_speedup {
                if self.inj_credits[e as usize] == 0 {
                    break;
                }
                let Some(flit) = self.source_queue[e as usize].pop_front() else { break };
                self.inj_credits[e as usize] -= 1;
                self.in_network += 1;
                self.last_move = now;
                let r = self.topo.router_of(e);
                let port = self.base[r as usize]
                    + self.topo.degree(r) as u32
                    + (e - self.topo.endpoints_of(r).start);
                self.schedule(self.cfg.channel_latency, Event::Arrive { port, vc: 0, flit });
            }
        }
    }

    fn allocate(&mut self, r: RouterId) {
        let b = self.base[r as usize] as usize;
        let nports = self.base[r as usize + 1] as usize - b;
        let deg = self.topo.degree(r);
        let now = self.now;
        let xbar = (self.cfg.sa_delay + self.cfg.crossbar_delay) as u64;
        let credit_delay = self.cfg.credit_delay + self.cfg.channel_latency;
        for _ in 0..self.cfg.internal_speedup {
            if self.buffered[r as usize] == 0 {
                break;
            }
            self.requests.clear();
            for i in 0..nports {
                let gp = b + i;
                let nvc = if i < deg { self.vcs } else { 1 };
                for k in 0..nvc {
                    let vc = (self.rr_vc[gp] as usize + k) % nvc;
                    let Some(f) = self.inputs[gp * self.vcs + vc].front() else { continue };
                    if f.ready > now {
                        continue;
                    }
                    let o = f.ports[f.hop as usize] as usize;
                    if self.outq[b + o].len() >= self.cfg.output_buffer_flits as usize {
                        continue;
                    }
                    if o < deg && self.credits[(b + o) * self.vcs + f.hop as usize] == 0 {
                        continue;
                    }
                    let rank = ((i + nports - self.rr_in[b + o] as usize) % nports) as u16;
                    self.requests.push((o as u16, rank, i as u16, vc as u8));
                    break;
                }
            }
            if self.requests.is_empty() {
                break;
            }
            self.requests.sort_unstable();
            let mut last_out = u16::MAX;
            for idx in 0..self.requests.len() {
                let (o, _, i, vc) = self.requests[idx];
                if o == last_out {
                    continue;
                }
                last_out = o;
                let (o, i) = (o as usize, i as usize);
                let gp = b + i;
                let mut flit = self.inputs[gp * self.vcs + vc as usize].pop_front().unwrap();
                self.buffered[r as usize] -= 1;
                if o < deg {
                    self.credits[(b + o) * self.vcs + flit.hop as usize] -= 1;
                }
                flit.ready = now + xbar;
                self.outq[b + o].push_back(flit);
                self.queued[r as usize] += 1;
                let nvc = if i < deg { self.vcs } else { 1 };
                self.rr_vc[gp] = ((vc as usize + 1) % nvc) as u8;
                self.rr_in[b + o] = ((i + 1) % nports) as u16;
                self.last_move = now;
                if i < deg {
                    let up = self.upstream[gp];
                    self.schedule(credit_delay, Event::Credit { port: up, vc });
                } else {
                    let endpoint = self.peer[gp];
                    self.schedule(credit_delay, Event::EndpointCredit { endpoint });
                }
            }
        }
    }

    fn transmit(&mut self, r: RouterId) {
        let b = self.base[r as usize] as usize;
        let nports = self.base[r as usize + 1] as usize - b;
        let deg = self.topo.degree(r);
        let measuring = self.measure.is_some_and(|(s, e)| self.now >= s && self.now < e);
        for o in 0..nports {
            let gp = b + o;
            if !self.outq[gp].front().is_some_and(|f| f.ready <= self.now) {
                continue;
            }
            let mut flit = self.outq[gp].pop_front().unwrap();
            self.queued[r as usize] -= 1;
            self.last_move = self.now;
            if o < deg {
                let vc = flit.hop;
                flit.hop += 1;
                if measuring {
                    self.channel_sends[gp] += 1;
                }
                let port = self.peer[gp];
                self.schedule(self.cfg.channel_latency, Event::Arrive { port, vc, flit });
            } else {
                self.schedule(self.cfg.channel_latency, Event::Deliver { flit });
            }
        }
    }

    /// Advance one cycle.
    pub fn step(&mut self) -> Result<(), SimError> {
        self.process_events()?;
        self.inject();
        for r in 0..self.topo.num_routers() as RouterId {
            if self.buffered[r as usize] > 0 {
                self.allocate(r);
            }
        }
        for r in 0..self.topo.num_routers() as RouterId {
            if self.queued[r as usize] > 0 {
                self.transmit(r);
            }
        }
        if self.in_network > 0 && self.now - self.last_move > self.cfg.watchdog_cycles {
            return Err(SimError::Deadlock {
                cycle: self.now,
                idle: self.now - self.last_move,
                buffered: self.in_network,
            });
        }
        self.now += 1;
        Ok(())
    }

    /// Stop generating packets; queued packets still drain.
    pub fn stop_injection(&mut self) {
        self.injecting = false;
    }

    fn max_source_queue(&self) -> usize {
        self.sources.iter().map(|&e| self.source_queue[e as usize].len()).max().unwrap_or(0)
    }

    /// Check that every `(link, VC)` accounts for exactly its buffer capacity:
    /// credits held upstream, credits returning, flits in the output queue,
    /// flits on the wire and flits in the downstream buffer.
    pub fn check_credit_conservation(&self) -> Result<(), String> {
        let total = self.peer.len();
        let mut pending = vec![0u32; total * self.vcs];
        let mut wire = vec![0u32; total * self.vcs];
        for ev in self.wheel.iter().flatten() {
            match *ev {
                Event::Credit { port, vc } => pending[port as usize * self.vcs + vc as usize] += 1,
                Event::Arrive { port, vc, .. } => wire[port as usize * self.vcs + vc as usize] += 1,
                _ => {}
            }
        }
        for r in 0..self.topo.num_routers() as RouterId {
            let b = self.base[r as usize] as usize;
            for o in 0..self.topo.degree(r) {
                let gp = b + o;
                let down = self.peer[gp] as usize;
                for vc in 0..self.vcs {
                    let queued = self.outq[gp].iter().filter(|f| f.hop as usize == vc).count() as u32;
                    let sum = self.credits[gp * self.vcs + vc]
                        + pending[gp * self.vcs + vc]
                        + queued
                        + wire[down * self.vcs + vc]
                        + self.inputs[down * self.vcs + vc].len() as u32;
                    if sum != self.vc_cap {
                        return Err(format!("router {r} port {o} vc {vc}: {sum} != {}", self.vc_cap));
                    }
                }
            }
        }
        Ok(())
    }

    fn run_window(&mut self, cycles: u64) -> Result<(), SimError> {
        for _ in 0..cycles {
            self.step()?;
        }
        Ok(())
    }

    /// Warm up, measure, then drain.
    pub fn run(mut self) -> Result<SimStats, SimError> {
        let cfg = self.cfg.clone();
        let mut previous: Option<f64> = None;
        let mut steady = false;
        let mut overflow = false;
        while self.now < cfg.warmup_max_cycles {
            self.window = Window::default();
            self.run_window(cfg.warmup_window)?;
            if self.max_source_queue() > cfg.source_queue_limit {
                overflow = true;
                break;
            }
            if self.window.delivered == 0 {
                continue;
            }
            let mean = self.window.latency_sum as f64 / self.window.delivered as f64;
            if let Some(prev) = previous {
                if (mean - prev).abs() <= cfg.warmup_tolerance * prev {
                    steady = true;
                    break;
                }
            }
            previous = Some(mean);
        }
        let warmup_cycles = self.now;

        let start = self.now;
        let end = start + cfg.measure_cycles;
        self.measure = Some((start, end));
        self.run_window(cfg.measure_cycles)?;
        if self.max_source_queue() > cfg.source_queue_limit {
            overflow = true;
        }

        let mut drained = false;
        if !overflow {
            let cap = self.now + cfg.drain_max_cycles;
            while self.outstanding_measured > 0 && self.now < cap {
                self.step()?;
            }
            self.stop_injection();
            let cap = self.now + cfg.drain_max_cycles;
            while (self.in_network > 0 || self.queued_at_sources() > 0) && self.now < cap {
                self.step()?;
            }
            drained = self.outstanding_measured == 0 && self.in_network == 0 && self.queued_at_sources() == 0;
        }

        let sources = self.sources.len().max(1) as f64;
        let window = cfg.measure_cycles as f64;
        let measured_offered = self.generated_in_measure as f64 / (sources * window);
        let accepted = self.delivered_in_measure as f64 / (sources * window);
        self.latencies.sort_unstable();
        let lat = &self.latencies;
        let pct = |q: f64| -> f64 {
            if lat.is_empty() {
                return f64::NAN;
            }
            lat[((lat.len() as f64 * q).ceil() as usize).clamp(1, lat.len()) - 1] as f64
        };
        let mut histogram = vec![0u32; 10];
        let mut max_util = 0.0f64;
        for r in 0..self.topo.num_routers() as RouterId {
            let b = self.base[r as usize] as usize;
            for o in 0..self.topo.degree(r) {
                let util = self.channel_sends[b + o] as f64 / window;
                max_util = max_util.max(util);
                histogram[((util * 10.0) as usize).min(9)] += 1;
            }
        }
        let n = lat.len() as f64;
        let steady = steady && !overflow;
        Ok(SimStats {
            routing: cfg.routing,
            pattern: self.traffic.pattern,
            offered: cfg.injection_rate,
            measured_offered,
            accepted,
            mean_latency: if lat.is_empty() { f64::NAN } else { lat.iter().sum::<u64>() as f64 / n },
            p50_latency: pct(0.5),
            p99_latency: pct(0.99),
            max_latency: lat.last().copied().unwrap_or(0),
            min_latency: lat.first().copied().unwrap_or(0),
            mean_hops: if lat.is_empty() { f64::NAN } else { self.hop_sum as f64 / n },
            packets_measured: lat.len() as u64,
            active_sources: self.sources.len(),
            warmup_cycles,
            steady,
            drained,
            saturated: !steady || !drained || accepted < 0.99 * measured_offered,
            max_channel_utilization: max_util,
            channel_utilization_histogram: histogram,
            total_cycles: self.now,
        })
    }
}
