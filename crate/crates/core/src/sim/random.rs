//! Seeded generators of small networks and conforming traffic.
//!
//! Parameters are drawn from sets that keep every transmission time,
//! regulator spacing and credit recovery time a whole number of picoseconds.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curve::TokenBucket;
use crate::network::{
    has_errors, validate, CbsConfig, CbsSlopes, Class, FlowSpec, LinkId, LinkParams, NetworkSpec, Node, Regulator, Role,
};
use crate::rational::{int, Rational, PS_PER_SECOND};

use super::scenario::{BeInjection, CdtInjection, DelayPolicy, PacketInjection, Scenario};

const MBPS: i64 = 1_000_000;

/// Builds a random valid and stable spec with at most six nodes and eight
/// flows. Retries internally until the draw is stable.
pub fn random_spec(seed: u64) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(spec) = try_spec(&mut rng) {
            return spec;
        }
    }
}

fn try_spec(rng: &mut ChaCha8Rng) -> Option<NetworkSpec> {
    let n_switch = rng.gen_range(1..=3usize);
    let n_host = rng.gen_range(2..=(6 - n_switch).min(4));
    let switches: Vec<String> = (1..=n_switch).map(|i| format!("S{i}")).collect();
    let hosts: Vec<String> = (1..=n_host).map(|i| format!("H{i}")).collect();
    let mut adj: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut connect = |a: &str, b: &str| {
        adj.entry(a.into()).or_default().push(b.into());
        adj.entry(b.into()).or_default().push(a.into());
    };
    for w in switches.windows(2) {
        connect(&w[0], &w[1]);
    }
    if n_switch == 3 && rng.gen_bool(0.5) {
        connect(&switches[2], &switches[0]);
    }
    for h in &hosts {
        let s = switches.choose(rng).expect("switch").clone();
        connect(h, &s);
    }

    let n_flow = rng.gen_range(1..=8usize);
    let mut flows = Vec::new();
    for k in 0..n_flow {
        let src = hosts.choose(rng).expect("host");
        let dst = hosts.iter().filter(|h| *h != src).collect::<Vec<_>>();
        let dst = (*dst.choose(rng)?).clone();
        let path = shortest_path(&adj, src, &dst)?;
        let class = if rng.gen_bool(0.6) { Class::A } else { Class::B };
        let regulator = if rng.gen_bool(0.5) { Regulator::Lrq } else { Regulator::Lb };
        let rate = int(*[5, 10, 20].choose(rng).expect("rate") * MBPS);
        let l = rng.gen_range(5..=20) * 100;
        let m = rng.gen_range(l / 2..=l);
        let burst = match regulator {
            Regulator::Lrq => l,
            Regulator::Lb => rng.gen_range(l..=3 * l),
        };
        flows.push(FlowSpec {
            id: format!("f{}", k + 1),
            class,
            path,
            regulator,
            rate,
            burst: int(burst),
            max_packet: int(l),
            min_packet: int(m),
        });
    }

    let mut links: Vec<LinkParams> = Vec::new();
    let mut seen = BTreeMap::new();
    for f in &flows {
        for w in f.path.windows(2) {
            let id = LinkId::new(w[0].clone(), w[1].clone());
            if seen.contains_key(&id) {
                continue;
            }
            seen.insert(id, ());
            links.push(random_link(rng, &w[0], &w[1]));
        }
    }
    let nodes = hosts
        .iter()
        .map(|h| Node { id: h.clone(), role: Role::Host })
        .chain(switches.iter().map(|s| Node { id: s.clone(), role: Role::Switch }))
        .collect();
    let spec = NetworkSpec::new(nodes, links, flows);
    let diags = validate(&spec);
    if has_errors(&diags) || diags.iter().any(|d| d.code == "unstable") {
        return None;
    }
    Some(spec)
}

fn random_link(rng: &mut ChaCha8Rng, from: &str, to: &str) -> LinkParams {
    let c = *[100, 200].choose(rng).expect("capacity");
    // (c - I) / I is an integer for every choice, so credit recovery after a
    // whole-picosecond transmission takes whole picoseconds.
    let (ia, ib) = if c == 100 {
        (50, *[25, 20].choose(rng).expect("slope"))
    } else {
        (*[100, 50, 40].choose(rng).expect("slope"), *[40, 25].choose(rng).expect("slope"))
    };
    let slopes = |i: i64| CbsSlopes { idle_slope: int(i * MBPS), send_slope: int((i - c) * MBPS) };
    let tv_max = rng.gen_range(0..=3) * 1_000_000;
    let tp_max = rng.gen_range(0..=2) * 1_000_000;
    LinkParams {
        from: from.into(),
        to: to.into(),
        capacity: int(c * MBPS),
        t_proc: [rng.gen_range(0..=tp_max), tp_max],
        t_var: [rng.gen_range(0..=tv_max), tv_max],
        be_max_packet: int(*[0, 500, 1500, 2000, 12000].choose(rng).expect("be")),
        cdt: TokenBucket {
            rate: int(*[0, 10, 20].choose(rng).expect("cdt") * MBPS),
            burst: int(*[0, 1000, 4000].choose(rng).expect("cdt")),
        },
        cbs: CbsConfig { a: Some(slopes(ia)), b: Some(slopes(ib)) },
    }
}

fn shortest_path(adj: &BTreeMap<String, Vec<String>>, src: &str, dst: &str) -> Option<Vec<String>> {
    let mut prev: BTreeMap<&str, &str> = BTreeMap::new();
    let mut queue = VecDeque::from([src]);
    prev.insert(src, src);
    while let Some(u) = queue.pop_front() {
        if u == dst {
            break;
        }
        for v in adj.get(u).into_iter().flatten() {
            // Hosts only appear at the ends of a path.
            let host = v.starts_with('H');
            if prev.contains_key(v.as_str()) || (host && v != dst) {
                continue;
            }
            prev.insert(v, u);
            queue.push_back(v);
        }
    }
    prev.get(dst)?;
    let mut path = vec![dst.to_string()];
    let mut cur = dst;
    while cur != src {
        cur = prev[cur];
        path.push(cur.to_string());
    }
    path.reverse();
    Some(path)
}

fn ceil_ps(seconds: &Rational) -> u64 {
    (seconds * int(PS_PER_SECOND)).ceil().to_integer().try_into().expect("time fits")
}

/// Bucket level after `dt_ps` of refill at `rate`, capped at `cap`.
fn grow(tokens: &Rational, rate: &Rational, dt_ps: u64, cap: &Rational) -> Rational {
    let v = tokens + rate * Rational::new(dt_ps.into(), PS_PER_SECOND.into());
    if &v > cap {
        cap.clone()
    } else {
        v
    }
}

/// Conforming traffic for every flow, packetized CDT within each link's
/// bucket and random BE frames, over roughly `span_ps`.
pub fn random_scenario(spec: &NetworkSpec, seed: u64, span_ps: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sc = Scenario::empty();
    sc.delays = DelayPolicy::Seeded { seed: rng.gen() };
    for f in &spec.flows {
        let l_max: i64 = f.max_packet.to_integer().try_into().expect("bits");
        let l_min: i64 = f.min_packet.to_integer().try_into().expect("bits");
        let greedy = rng.gen_bool(0.5);
        let mut t: u64 = rng.gen_range(0..span_ps / 4);
        // Token bucket level `tokens` as of `tok_at`.
        let mut tokens = f.burst.clone();
        let mut tok_at = t;
        while t < span_ps {
            let l = if rng.gen_bool(0.5) { l_max } else { rng.gen_range(l_min..=l_max) };
            let at = match f.regulator {
                Regulator::Lrq => t,
                Regulator::Lb => {
                    let have = grow(&tokens, &f.rate, t - tok_at, &f.burst);
                    if have >= int(l) {
                        t
                    } else {
                        t + ceil_ps(&((int(l) - have) / &f.rate))
                    }
                }
            };
            sc.packets.push(PacketInjection { flow: f.id.clone(), time_ps: at, bits: l as u64, hop: 0 });
            if f.regulator == Regulator::Lb {
                tokens = grow(&tokens, &f.rate, at - tok_at, &f.burst) - int(l);
                tok_at = at;
            }
            let gap = match f.regulator {
                Regulator::Lrq => ceil_ps(&(int(l) / &f.rate)),
                Regulator::Lb => 0,
            };
            let idle = if greedy || rng.gen_bool(0.6) { 0 } else { rng.gen_range(0..=200) * 1_000_000 };
            t = at + gap + idle;
        }
    }
    for link in &spec.links {
        let id = link.id();
        let r = &link.cdt.rate;
        let b = &link.cdt.burst;
        if b > &int(0) && r > &int(0) {
            let b_i: i64 = b.to_integer().try_into().expect("bits");
            let mut tokens = b.clone();
            let mut t: u64 = rng.gen_range(0..span_ps / 4);
            let mut tok_at = t;
            while t < span_ps {
                let l = rng.gen_range(1..=(b_i.min(1500) / 100).max(1)) * 100;
                let have = grow(&tokens, r, t - tok_at, b);
                let at = if have >= int(l) { t } else { t + ceil_ps(&((int(l) - have) / r)) };
                sc.cdt.push(CdtInjection { link: id.clone(), time_ps: at, bits: l as u64, rate: None, late: false });
                tokens = grow(&tokens, r, at - tok_at, b) - int(l);
                tok_at = at;
                let idle = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..=100) * 1_000_000 };
                t = at + idle;
            }
        }
        let le: i64 = link.be_max_packet.to_integer().try_into().expect("bits");
        if le >= 100 {
            let n = rng.gen_range(0..=span_ps / 50_000_000);
            for _ in 0..n {
                let t = rng.gen_range(0..span_ps);
                let l = rng.gen_range(1..=le / 100) * 100;
                sc.be.push(BeInjection { link: id.clone(), time_ps: t, bits: l as u64, late: rng.gen_bool(0.2) });
            }
        }
    }
    sc
}
