//! Seeded random MiniC programs for soundness testing.
//!
//! Programs are well-typed by construction: loops are counter-bounded by a
//! small constant or a length parameter, calls only target earlier
//! functions, and every function ends in a return.

use crate::lang::InputDomain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_functions: usize,
    pub max_loops: usize,
    /// Values per entry parameter.
    pub domain_size: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_functions: 3, max_loops: 2, domain_size: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub seed: u64,
    pub source: String,
    pub domain: InputDomain,
}

const INT_POOL: [i32; 8] = [i32::MIN, -3, -1, 0, 1, 2, 7, i32::MAX];
const ARRAY_POOL: [&[i32]; 5] = [&[], &[4], &[0, -2], &[1, 2, 3], &[i32::MAX, 0, 5]];
const LEN_POOL: [i32; 5] = [0, 1, 2, 3, 4];

#[derive(Clone)]
struct Sig {
    name: String,
    /// `true` for an array parameter (followed by its length).
    arrays: usize,
    ints: usize,
}

#[derive(Clone, Default)]
struct Scope {
    ints: Vec<String>,
    /// Assignable locals (loop counters excluded).
    mutable: Vec<String>,
    /// Arrays with a known constant length, if local.
    arrays: Vec<(String, Option<u32>)>,
}

struct Gen {
    rng: ChaCha8Rng,
    fresh: usize,
    loops_left: usize,
    out: String,
}

impl Gen {
    fn name(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    fn line(&mut self, depth: usize, s: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn constant(&mut self) -> String {
        let v = INT_POOL[self.rng.random_range(0..INT_POOL.len())];
        match v {
            i32::MIN => "INT_MIN".into(),
            i32::MAX => "INT_MAX".into(),
            v if v < 0 => format!("({v})"),
            v => v.to_string(),
        }
    }

    fn expr(&mut self, sc: &Scope, depth: usize) -> String {
        let leaf = depth == 0 || self.rng.random_bool(0.35);
        if leaf {
            if !sc.ints.is_empty() && self.rng.random_bool(0.7) {
                return sc.ints[self.rng.random_range(0..sc.ints.len())].clone();
            }
            return self.constant();
        }
        match self.rng.random_range(0..10) {
            0..=5 => {
                let op = ["+", "-", "*", "/", "%", "+"][self.rng.random_range(0..6)];
                let l = self.expr(sc, depth - 1);
                let r = self.expr(sc, depth - 1);
                format!("({l} {op} {r})")
            }
            6 => format!("-({})", self.expr(sc, depth - 1)),
            _ if !sc.arrays.is_empty() => {
                let (a, _) = sc.arrays[self.rng.random_range(0..sc.arrays.len())].clone();
                let i = self.expr(sc, depth - 1);
                format!("{a}[{i}]")
            }
            _ => self.expr(sc, depth - 1),
        }
    }

    fn cond(&mut self, sc: &Scope, depth: usize) -> String {
        if depth > 0 && self.rng.random_bool(0.25) {
            let op = if self.rng.random_bool(0.5) { "&&" } else { "||" };
            let l = self.cond(sc, depth - 1);
            let r = self.cond(sc, depth - 1);
            return format!("({l} {op} {r})");
        }
        let op = ["<", "<=", ">", ">=", "==", "!="][self.rng.random_range(0..6)];
        let l = self.expr(sc, 1);
        let r = self.expr(sc, 1);
        format!("{l} {op} {r}")
    }

    fn block(&mut self, sc: &mut Scope, callees: &[Sig], depth: usize, n: usize) {
        for _ in 0..n {
            self.stmt(sc, callees, depth);
        }
    }

    fn stmt(&mut self, sc: &mut Scope, callees: &[Sig], depth: usize) {
        let nested = depth < 3;
        match self.rng.random_range(0..12) {
            0..=2 => {
                let v = self.name("v");
                let e = self.expr(sc, 2);
                self.line(depth, &format!("int {v} = {e};"));
                sc.ints.push(v.clone());
                sc.mutable.push(v);
            }
            3 if !sc.mutable.is_empty() => {
                let v = sc.mutable[self.rng.random_range(0..sc.mutable.len())].clone();
                let e = self.expr(sc, 2);
                self.line(depth, &format!("{v} = {e};"));
            }
            4 => {
                // Possibly-uninitialized scalar: assigned only on one branch.
                let v = self.name("u");
                self.line(depth, &format!("int {v};"));
                let c = self.cond(sc, 1);
                let e = self.expr(sc, 1);
                self.line(depth, &format!("if ({c}) {{"));
                self.line(depth + 1, &format!("{v} = {e};"));
                self.line(depth, "}");
                sc.ints.push(v.clone());
                sc.mutable.push(v);
            }
            5 if nested => {
                let c = self.cond(sc, 1);
                self.line(depth, &format!("if ({c}) {{"));
                let mut inner = sc.clone();
                let k = self.rng.random_range(1..3);
                self.block(&mut inner, callees, depth + 1, k);
                if self.rng.random_bool(0.3) {
                    let e = self.expr(&inner, 1);
                    self.line(depth + 1, &format!("return {e};"));
                }
                if self.rng.random_bool(0.5) {
                    self.line(depth, "} else {");
                    let mut other = sc.clone();
                    self.block(&mut other, callees, depth + 1, 1);
                }
                self.line(depth, "}");
            }
            6 | 7 if nested && self.loops_left > 0 => {
                self.loops_left -= 1;
                let i = self.name("i");
                let lens: Vec<String> = sc.ints.iter().filter(|v| v.starts_with('n')).cloned().collect();
                let bound = if !lens.is_empty() && self.rng.random_bool(0.5) {
                    lens[self.rng.random_range(0..lens.len())].clone()
                } else {
                    self.rng.random_range(0..5).to_string()
                };
                self.line(depth, &format!("int {i} = 0;"));
                self.line(depth, &format!("while ({i} < {bound}) {{"));
                let mut inner = sc.clone();
                inner.ints.push(i.clone());
                let k = self.rng.random_range(1..3);
                self.block(&mut inner, callees, depth + 1, k);
                self.line(depth + 1, &format!("{i} = {i} + 1;"));
                self.line(depth, "}");
                sc.ints.push(i);
            }
            8 => {
                let a = self.name("b");
                let len = self.rng.random_range(1..4u32);
                self.line(depth, &format!("int {a}[{len}];"));
                let fill = self.rng.random_range(0..=len);
                for k in 0..fill {
                    let e = self.expr(sc, 1);
                    self.line(depth, &format!("{a}[{k}] = {e};"));
                }
                sc.arrays.push((a, Some(len)));
            }
            9 if !sc.arrays.is_empty() => {
                let (a, _) = sc.arrays[self.rng.random_range(0..sc.arrays.len())].clone();
                let i = self.expr(sc, 1);
                let e = self.expr(sc, 1);
                self.line(depth, &format!("{a}[{i}] = {e};"));
            }
            10 | 11 if !callees.is_empty() => {
                let g = callees[self.rng.random_range(0..callees.len())].clone();
                let mut args = Vec::new();
                for _ in 0..g.arrays {
                    match sc.arrays.len() {
                        0 => {
                            let a = self.name("b");
                            self.line(depth, &format!("int {a}[2];"));
                            self.line(depth, &format!("{a}[0] = 1;"));
                            self.line(depth, &format!("{a}[1] = 2;"));
                            sc.arrays.push((a.clone(), Some(2)));
                            args.push(a);
                            args.push("2".into());
                        }
                        k => {
                            let (a, len) = sc.arrays[self.rng.random_range(0..k)].clone();
                            args.push(a);
                            args.push(match len {
                                Some(l) if self.rng.random_bool(0.7) => l.to_string(),
                                _ => self.expr(sc, 1),
                            });
                        }
                    }
                }
                for _ in 0..g.ints {
                    args.push(self.expr(sc, 1));
                }
                let v = self.name("r");
                self.line(depth, &format!("int {v} = {}({});", g.name, args.join(", ")));
                sc.ints.push(v.clone());
                sc.mutable.push(v);
            }
            _ => {
                let v = self.name("v");
                let e = self.expr(sc, 1);
                self.line(depth, &format!("int {v} = {e};"));
                sc.ints.push(v.clone());
                sc.mutable.push(v);
            }
        }
    }

    fn function(&mut self, sig: &Sig, callees: &[Sig]) {
        let mut sc = Scope::default();
        let mut params = Vec::new();
        for k in 0..sig.arrays {
            let (a, n) = (format!("a{k}"), format!("n{k}"));
            params.push(format!("int {a}[]"));
            params.push(format!("int {n}"));
            sc.arrays.push((a, None));
            sc.ints.push(n);
        }
        for k in 0..sig.ints {
            let x = format!("x{k}");
            params.push(format!("int {x}"));
            sc.ints.push(x);
        }
        self.line(0, &format!("int {}({}) {{", sig.name, params.join(", ")));
        let k = self.rng.random_range(1..5);
        self.block(&mut sc, callees, 1, k);
        let e = self.expr(&sc, 2);
        self.line(1, &format!("return {e};"));
        self.line(0, "}");
    }
}

/// Generates one program whose entry is `main`, with its input domain.
pub fn random_program(seed: u64, cfg: &GenConfig) -> Generated {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        fresh: 0,
        loops_left: cfg.max_loops,
        out: String::new(),
    };
    let nfun = g.rng.random_range(1..=cfg.max_functions.max(1));
    let mut sigs: Vec<Sig> = Vec::new();
    for k in 0..nfun {
        let last = k + 1 == nfun;
        let name = if last { "main".to_string() } else { format!("g{k}") };
        let arrays = usize::from(g.rng.random_bool(if last { 0.3 } else { 0.4 }));
        let ints = g.rng.random_range(if arrays == 0 { 1 } else { 0 }..=2);
        let sig = Sig { name, arrays, ints };
        let callees = sigs.clone();
        g.function(&sig, &callees);
        if !last {
            g.out.push('\n');
        }
        sigs.push(sig);
    }
    let main = sigs.last().expect("at least one function").clone();
    let mut domain = InputDomain::new();
    let size = cfg.domain_size.max(1);
    for k in 0..main.arrays {
        let mut arrs: Vec<Vec<i32>> = ARRAY_POOL.iter().map(|a| a.to_vec()).collect();
        shuffle_take(&mut g.rng, &mut arrs, size);
        domain = domain.arrays(&format!("a{k}"), arrs);
        let mut lens = LEN_POOL.to_vec();
        shuffle_take(&mut g.rng, &mut lens, size);
        domain = domain.ints(&format!("n{k}"), &lens);
    }
    for k in 0..main.ints {
        let mut vals = INT_POOL.to_vec();
        shuffle_take(&mut g.rng, &mut vals, size);
        vals.sort();
        domain = domain.ints(&format!("x{k}"), &vals);
    }
    Generated { seed, source: g.out, domain }
}

fn shuffle_take<T>(rng: &mut ChaCha8Rng, xs: &mut Vec<T>, n: usize) {
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
    xs.truncate(n);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    #[test]
    fn generated_programs_parse() {
        for seed in 0..300 {
            let g = random_program(seed, &GenConfig::default());
            let p = parse_program(&g.source).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", g.source));
            assert!(p.functions.len() <= 3);
            let loops = p
                .locations()
                .filter(|l| p.loc_info(l).is_some_and(|i| i.is_loop))
                .count();
            assert!(loops <= 2, "seed {seed}");
            assert!(g.domain.values.values().all(|v| v.len() <= 5));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = random_program(42, &GenConfig::default());
        let b = random_program(42, &GenConfig::default());
        assert_eq!(a.source, b.source);
    }
}
