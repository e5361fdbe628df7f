//! Recomputes every reported bound from the raw spec fields with code that
//! shares nothing with the library beyond the data types, then checks the
//! library's report matches exactly.

use std::collections::BTreeMap;

use tsnbound::bounds::full_report;
use tsnbound::network::{Class, FlowSpec, LinkParams, NetworkSpec, Regulator};
use tsnbound::rational::{from_us, int, Rational};
use tsnbound::sim::random::random_spec;

fn load(name: &str) -> NetworkSpec {
    let path = format!("{}/../../specs/{name}.json", env!("CARGO_MANIFEST_DIR"));
    NetworkSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap().spec
}

fn ps(v: i64) -> Rational {
    Rational::new(v.into(), 1_000_000_000_000i64.into())
}

fn big(a: &Rational, b: &Rational) -> Rational {
    if a > b { a.clone() } else { b.clone() }
}

struct Oracle<'a> {
    spec: &'a NetworkSpec,
}

impl<'a> Oracle<'a> {
    fn link(&self, i: &str, j: &str) -> &'a LinkParams {
        self.spec.links.iter().find(|l| l.from == i && l.to == j).unwrap()
    }

    fn on_link(&self, i: &str, j: &str, x: Class) -> Vec<&'a FlowSpec> {
        self.spec
            .flows
            .iter()
            .filter(|f| f.class == x && f.path.windows(2).any(|w| w[0] == i && w[1] == j))
            .collect()
    }

    fn next(f: &FlowSpec, i: &str, j: &str) -> Option<String> {
        f.path.windows(3).find(|w| w[0] == i && w[1] == j).map(|w| w[2].clone())
    }

    fn largest(&self, i: &str, j: &str, x: Class) -> Rational {
        self.on_link(i, j, x).iter().fold(int(0), |m, f| big(&m, &f.max_packet))
    }

    /// (R, T) of the class on the link.
    fn curve(&self, i: &str, j: &str, x: Class) -> (Rational, Rational) {
        let l = self.link(i, j);
        let (la, lb, le) = (self.largest(i, j, Class::A), self.largest(i, j, Class::B), l.be_max_packet.clone());
        let below_a = big(&lb, &le);
        let all = big(&la, &below_a);
        let a = l.cbs.a.as_ref().unwrap();
        let cdt = &l.cdt.burst + &l.cdt.rate * &all / &l.capacity;
        let free = &l.capacity - &l.cdt.rate;
        let (slopes, interference) = match x {
            Class::A => (a, below_a),
            Class::B => {
                let from_a = &below_a * &a.idle_slope / -&a.send_slope;
                (l.cbs.b.as_ref().unwrap(), &le + &la + from_a)
            }
        };
        let rate = &free * &slopes.idle_slope / (&slopes.idle_slope - &slopes.send_slope);
        (rate, (interference + cdt) / free)
    }

    fn psi(f: &FlowSpec) -> &Rational {
        if f.regulator == Regulator::Lrq { &f.max_packet } else { &f.min_packet }
    }

    fn s(&self, f: &FlowSpec, i: &str, j: &str) -> Rational {
        let l = self.link(i, j);
        let (r, t) = self.curve(i, j, f.class);
        let total = self.on_link(i, j, f.class).iter().fold(int(0), |acc, g| acc + &g.burst);
        let psi = Self::psi(f);
        t + (total - psi) / &r + psi / &l.capacity + ps(l.t_var[1])
    }

    fn c(&self, i: &str, j: &str, k: &str, x: Class) -> Rational {
        let worst = self
            .on_link(i, j, x)
            .into_iter()
            .filter(|g| Self::next(g, i, j).as_deref() == Some(k))
            .map(|g| self.s(g, i, j))
            .max()
            .unwrap();
        worst + ps(self.link(i, j).t_proc[1])
    }

    fn h(&self, f: &FlowSpec, i: &str, j: &str, k: &str) -> Rational {
        let l = self.link(i, j);
        let v = self.c(i, j, k, f.class) - &f.min_packet / &l.capacity - ps(l.t_var[0]) - ps(l.t_proc[0]);
        big(&v, &int(0))
    }

    fn e2e(&self, f: &FlowSpec) -> Rational {
        let p = &f.path;
        let n = p.len();
        let mut total = self.s(f, &p[n - 2], &p[n - 1]);
        for w in p.windows(3) {
            total += self.c(&w[0], &w[1], &w[2], f.class);
        }
        total
    }

    fn additive(&self, f: &FlowSpec) -> Rational {
        let p = &f.path;
        let mut total = self.s(f, &p[0], &p[1]);
        for w in p.windows(3) {
            total += self.h(f, &w[0], &w[1], &w[2]) + self.s(f, &w[1], &w[2]) + ps(self.link(&w[0], &w[1]).t_proc[1]);
        }
        total
    }

    fn ir_backlog(&self, i: &str, j: &str, k: &str, x: Class) -> Rational {
        let l = self.link(i, j);
        let flows = self.on_link(i, j, x);
        let (shared, others): (Vec<&FlowSpec>, Vec<&FlowSpec>) =
            flows.into_iter().partition(|g| Self::next(g, i, j).as_deref() == Some(k));
        let d = shared.iter().map(|g| self.h(g, i, j, k)).max().unwrap();
        let rs = shared.iter().fold(int(0), |a, g| a + &g.rate);
        let bs = shared.iter().fold(int(0), |a, g| a + &g.burst);
        let lmax = shared.iter().fold(int(0), |m, g| big(&m, &g.max_packet));
        // Flows ending at j never reach a regulator.
        let bw = others
            .iter()
            .filter(|g| Self::next(g, i, j).is_some())
            .fold(int(0), |a, g| a + &g.burst);
        let (r, t) = self.curve(i, j, x);
        let line = &l.capacity * &d + lmax;
        let bucket = &rs * &d + bs + &rs * (t + bw / r);
        if line < bucket { line } else { bucket }
    }
}

fn check(spec: &NetworkSpec) {
    let o = Oracle { spec };
    let rep = full_report(spec).unwrap();
    for f in &spec.flows {
        let fr = rep.flow(&f.id).unwrap();
        for (n, hop) in fr.hops.iter().enumerate() {
            let (i, j) = (&f.path[n], &f.path[n + 1]);
            assert_eq!(hop.cbfs_response.0, o.s(f, i, j), "{} S@({i},{j})", f.id);
            if let Some(ir) = &hop.regulator {
                assert_eq!(ir.combined.0, o.c(i, j, &ir.next, f.class));
                assert_eq!(ir.response.0, o.h(f, i, j, &ir.next), "{} H@{j}", f.id);
            }
        }
        assert_eq!(fr.e2e.0, o.e2e(f), "{} e2e", f.id);
        assert_eq!(fr.additive_e2e.0, o.additive(f), "{} additive", f.id);
    }
    for q in &rep.ir_queues {
        assert_eq!(q.backlog.0, o.ir_backlog(&q.link.from, &q.link.to, &q.next, q.class));
    }
    let mut cbfs: BTreeMap<(String, String, Class), Rational> = BTreeMap::new();
    for q in &rep.cbfs_queues {
        cbfs.insert((q.link.from.clone(), q.link.to.clone(), q.class), q.backlog.0.clone());
    }
    for ((i, j, x), b) in cbfs {
        let flows = o.on_link(&i, &j, x);
        let (_, t) = o.curve(&i, &j, x);
        let want = flows.iter().fold(int(0), |a, g| a + &g.burst) + flows.iter().fold(int(0), |a, g| a + &g.rate) * t;
        assert_eq!(b, want, "cbfs ({i},{j})");
    }
}

#[test]
fn cs1_hand_values() {
    let spec = load("cs1");
    let o = Oracle { spec: &spec };
    let f = |id: &str| spec.flows.iter().find(|g| g.id == id).unwrap();
    assert_eq!(o.curve("H1", "1", Class::A), (int(40_000_000), from_us(80)));
    assert_eq!(o.s(f("f1"), "H1", "1"), from_us(140));
    assert_eq!(o.s(f("f2"), "H1", "1"), from_us(125));
    assert_eq!(o.h(f("f1"), "H1", "1", "2"), from_us(130));
    assert_eq!(o.h(f("f2"), "H1", "1", "2"), from_us(120));
    assert_eq!(o.e2e(f("f1")), from_us(700));
    assert_eq!(o.additive(f("f1")), from_us(1220));
    assert_eq!(o.ir_backlog("H1", "1", "2", Class::A), int(11_400));
    check(&spec);
}

#[test]
fn cs2_hand_values() {
    let spec = load("cs2");
    let o = Oracle { spec: &spec };
    let f = |id: &str| spec.flows.iter().find(|g| g.id == id).unwrap();
    assert_eq!(o.e2e(f("f1")), from_us(700));
    assert_eq!(o.e2e(f("f2")), from_us(225));
    assert_eq!(o.e2e(f("f6")), from_us(225));
    assert_eq!(o.h(f("f3"), "H2", "1", "2"), from_us(80));
    check(&spec);
}

#[test]
fn random_specs_match_oracle() {
    for seed in 0..200 {
        check(&random_spec(seed));
    }
}
