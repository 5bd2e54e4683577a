//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wfa_mps::automaton::pauli;
use wfa_mps::grid2d::{
    dense_grid_operator, enumerate_accepted, grid_weight, snake_automaton_four_x, sparse_grid_operator, Env2d,
    EnvKind, Peps,
};
use wfa_mps::mps::expectation_counted;
use wfa_mps::oracle::{dense_operator, digits, exact_ground, kron_chain, sparse_operator};
use wfa_mps::variational::{local_problem_uncached, SweepOptions};
use wfa_mps::*;

type C64 = num_complex::Complex64;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// `Σ_w f(w) · ⊗ symbol(w_k)` for an operator automaton.
fn operator_oracle(a: &WeightedAutomaton, n: usize, periodic: bool) -> DMatrix<C64> {
    let base = a.symbols().len();
    let d = a.symbols().dim();
    let mut m = DMatrix::zeros(d.pow(n as u32), d.pow(n as u32));
    for k in 0..base.pow(n as u32) {
        let w = digits(k, base, n);
        let f = if periodic { a.evaluate_periodic(&w) } else { a.evaluate(&w) }.unwrap();
        if f != C64::new(0.0, 0.0) {
            let ops: Vec<_> = w.iter().map(|&s| a.symbols().value(s).clone()).collect();
            m += kron_chain(&ops) * f;
        }
    }
    m
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (_, a) in corpus::standard() {
        let base = a.symbols().len();
        for n in 1..=8 {
            let diagram = unroll(&a, n).unwrap();
            let realized = match a.symbols().kind() {
                SymbolKind::State => Some(diagram.to_mps().unwrap()),
                SymbolKind::Operator => None,
            };
            for k in 0..base.pow(n as u32) {
                let w = digits(k, base, n);
                let f = a.evaluate(&w).unwrap();
                worst = worst.max((diagram.amplitude(&w).unwrap() - f).norm());
                if let Some(s) = &realized {
                    worst = worst.max((s.amplitude(&w).unwrap() - f).norm());
                }
            }
            if a.symbols().kind() == SymbolKind::Operator && n <= 6 {
                let dense = dense_operator(&diagram.to_mpo().unwrap()).unwrap();
                worst = worst.max((dense - operator_oracle(&a, n, false)).camax());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-12 && secs < 10.0, format!("max deviation {worst:.1e}, {secs:.2} s"))
}

fn criterion_2() -> Outcome {
    let s = unroll(&corpus::w_state(), 4).unwrap().to_mps().unwrap();
    let mut ones = Vec::new();
    let mut stray = 0;
    for k in 0..16 {
        let w = digits(k, 2, 4);
        let a = s.amplitude(&w).unwrap();
        if a == C64::new(1.0, 0.0) {
            ones.push(w.iter().map(|d| d.to_string()).collect::<String>());
        } else if a != C64::new(0.0, 0.0) {
            stray += 1;
        }
    }
    let expect = ["0001", "0010", "0100", "1000"];
    outcome(ones == expect && stray == 0, format!("unit amplitudes at {ones:?}, {stray} other nonzero"))
}

fn criterion_3() -> Outcome {
    let (i, x, z) = (pauli("I").unwrap(), pauli("X").unwrap(), pauli("Z").unwrap());
    let ixz = SymbolTable::paulis(&["I", "X", "Z"]);
    let mut worst = 0.0f64;
    for n in 4..=6 {
        let pair = |k: usize, second: &DMatrix<C64>| {
            let ops: Vec<_> = (0..n)
                .map(|j| if j == k { x.clone() } else if j == k + 1 { second.clone() } else { i.clone() })
                .collect();
            kron_chain(&ops)
        };
        let mut neighbor = DMatrix::zeros(1 << n, 1 << n);
        let mut boxed = DMatrix::zeros(1 << n, 1 << n);
        let mut field = DMatrix::zeros(1 << n, 1 << n);
        for k in 0..n - 1 {
            neighbor += pair(k, &x);
            boxed += pair(k, if k == 1 { &z } else { &x });
        }
        for k in 0..n {
            let ops: Vec<_> = (0..n).map(|j| if j == k { z.clone() } else { i.clone() }).collect();
            field += kron_chain(&ops);
        }
        let nc = corpus::neighbor_coupling();
        let got = dense_operator(&unroll(&nc, n).unwrap().to_mpo().unwrap()).unwrap();
        worst = worst.max((got - neighbor).camax());
        let edited = unroll(&nc.extend_alphabet(&ixz).unwrap(), n)
            .unwrap()
            .edit_site_from_state(2, "X", "Z", "B")
            .unwrap();
        worst = worst.max((dense_operator(&edited.to_mpo().unwrap()).unwrap() - boxed).camax());
        let got = dense_operator(&unroll(&corpus::magnetic_field(), n).unwrap().to_mpo().unwrap()).unwrap();
        worst = worst.max((got - field).camax());
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.1e} over n = 4..6"))
}

fn expectation_cost(n: usize, bond: usize, boundary: Boundary) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = MatrixProductState::random(n, 2, bond, boundary, &mut rng).unwrap();
    let ising = corpus::transverse_ising(1.0);
    let d = match boundary {
        Boundary::Open => unroll(&ising, n),
        Boundary::Periodic => unroll_periodic(&ising, n),
    };
    expectation_counted(&s, &d.unwrap().to_mpo().unwrap(), &s).unwrap().1
}

fn ratios(bond: usize, boundary: Boundary) -> Vec<f64> {
    [8, 16, 32]
        .iter()
        .map(|&n| expectation_cost(2 * n, bond, boundary) as f64 / expectation_cost(n, bond, boundary) as f64)
        .collect()
}

fn criterion_4() -> Outcome {
    let mut detail = String::new();
    let mut pass = true;
    for bond in [2, 4, 8] {
        let r = ratios(bond, Boundary::Periodic);
        pass &= r.iter().all(|x| (1.8..=2.2).contains(x));
        detail += &format!("χ={bond}: {:.3?} ", r);
    }
    outcome(pass, format!("cost(2n)/cost(n), uniform bonds, n = 8, 16, 32: {}", detail.trim_end()))
}

fn criterion_4_open_chains() -> String {
    [2, 8]
        .iter()
        .map(|&bond| format!("χ={bond}: {:.3?}", ratios(bond, Boundary::Open)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    let mut worst = 0.0f64;
    for n in [8, 16, 32] {
        let h = unroll(&corpus::transverse_ising(1.0), n).unwrap().to_mpo().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let s0 = MatrixProductState::random(n, 2, 8, Boundary::Open, &mut rng).unwrap();
        let (_, report) = sweep(&h, &s0, 2, 0.0).unwrap();
        let per_step: Vec<u64> = report.steps.iter().map(|s| s.absorptions).collect();
        pass &= per_step.iter().all(|&a| a == 1);
        detail.push(format!(
            "n={n}: setup {} absorptions, steps {}..{}",
            report.setup_absorptions,
            per_step.iter().min().unwrap(),
            per_step.iter().max().unwrap()
        ));

        // local forms from the cache track site edits exactly
        let mut cache = EnvironmentCache::new(&h, s0.clone()).unwrap();
        for k in 0..n {
            let (hc, nc) = cache.local_problem(k).unwrap();
            let (hu, nu) = local_problem_uncached(&h, cache.state(), k).unwrap();
            worst = worst.max(hc.max_abs_diff(&hu).unwrap()).max(nc.max_abs_diff(&nu).unwrap());
            let t = cache.state().site(k).clone();
            let dims = t.dims().to_vec();
            let fresh = Tensor::from_fn(["l", "p", "r"], dims, |_| C64::new(rng.random(), rng.random())).unwrap();
            cache.set_site(k, fresh).unwrap();
        }
    }
    pass &= worst <= 1e-12;
    outcome(pass, format!("{}; cached vs fresh local forms {worst:.1e}", detail.join("; ")))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for g in [0.5, 1.0, 1.5] {
        let h = unroll(&corpus::transverse_ising(g), 8).unwrap().to_mpo().unwrap();
        let (exact, _) = exact_ground(&dense_operator(&h).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s0 = MatrixProductState::random(8, 2, 8, Boundary::Open, &mut rng).unwrap();
        let opts = SweepOptions { max_sweeps: 30, tol: 1e-12, ..SweepOptions::default() };
        let (_, report) = variational::sweep_with(&h, &s0, &opts).unwrap();
        let e = report.final_energy().unwrap();
        let monotone = report.energies.windows(2).all(|w| w[1] <= w[0] + 1e-9)
            && report.global_energies.windows(2).all(|w| w[1] <= w[0] + 1e-9);
        pass &= (e - exact).abs() <= 1e-8 && monotone;
        detail.push(format!("g={g}: |E−E₀|={:.1e} after {} sweeps", (e - exact).abs(), report.energies.len()));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    outcome(pass, format!("{}, {secs:.2} s", detail.join(", ")))
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<C64> {
    DMatrix::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut restored = 0;
    let mut enlargements = 0;
    for trial in 0..100 {
        let n = rng.random_range(2..=8);
        let s = MatrixProductState::random(n, 2, 4, Boundary::Open, &mut rng).unwrap();
        let bond = rng.random_range(1..n);
        let e = s.bond_extents()[bond];
        let id = DMatrix::<C64>::identity(e, e);
        let (x, x_inv) = match trial % 3 {
            0 => {
                let x = id + random_matrix(&mut rng, e, e, 0.5);
                let inv = x.clone().try_inverse().unwrap();
                (x, inv)
            }
            1 => {
                let mut shear = id;
                for r in 0..e {
                    for c in r + 1..e {
                        shear[(r, c)] = C64::new(rng.random::<f64>() * 2.0 - 1.0, 0.0);
                    }
                }
                let inv = shear.clone().try_inverse().unwrap();
                (shear, inv)
            }
            _ => {
                let extra = rng.random_range(1..=3);
                let m = DMatrix::<C64>::identity(e, e) + random_matrix(&mut rng, e, e, 0.5);
                let m_inv = m.clone().try_inverse().unwrap();
                let mut x = DMatrix::zeros(e, e + extra);
                x.view_mut((0, 0), (e, e)).copy_from(&m);
                let tail = &m * random_matrix(&mut rng, e, extra, 1.0);
                x.view_mut((0, e), (e, extra)).copy_from(&tail);
                let mut x_inv = DMatrix::zeros(e + extra, e);
                x_inv.view_mut((0, 0), (e, e)).copy_from(&m_inv);
                (x, x_inv)
            }
        };
        let g = s.apply_gauge(bond, &x, &x_inv).unwrap();
        for k in 0..1usize << n {
            let w = digits(k, 2, n);
            let (a, b) = (s.amplitude(&w).unwrap(), g.amplitude(&w).unwrap());
            worst = worst.max((a - b).norm() / a.norm().max(1.0));
        }
        if trial % 3 == 2 {
            enlargements += 1;
            let c = g.compress_bond(bond, 1e-12).unwrap();
            if c.bond_extents() == s.bond_extents() {
                restored += 1;
            }
        }
    }
    outcome(
        worst <= 1e-10 && restored == enlargements,
        format!("max relative deviation {worst:.1e}; compression restored {restored}/{enlargements} enlarged bonds"),
    )
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    let mut shift_ok = true;
    for (_, a) in corpus::standard() {
        let base = a.symbols().len();
        for n in 1..=6 {
            let diagram = unroll_periodic(&a, n).unwrap();
            let realized = match a.symbols().kind() {
                SymbolKind::State => Some(diagram.to_mps().unwrap()),
                SymbolKind::Operator => None,
            };
            for k in 0..base.pow(n as u32) {
                let w = digits(k, base, n);
                let f = a.evaluate_periodic(&w).unwrap();
                let amp = diagram.amplitude(&w).unwrap();
                worst = worst.max((amp - f).norm());
                if let Some(s) = &realized {
                    worst = worst.max((s.amplitude(&w).unwrap() - f).norm());
                }
                let mut rotated = w.clone();
                rotated.rotate_left(1);
                shift_ok &= (diagram.amplitude(&rotated).unwrap() - amp).norm() <= 1e-12;
            }
            if a.symbols().kind() == SymbolKind::Operator && n <= 5 {
                let dense = dense_operator(&diagram.to_mpo().unwrap()).unwrap();
                worst = worst.max((dense - operator_oracle(&a, n, true)).camax());
            }
        }
    }
    outcome(worst <= 1e-12 && shift_ok, format!("max deviation {worst:.1e}, cyclic shifts invariant: {shift_ok}"))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let g = compile_grid(&four_x_agent(), 4, 4).unwrap();
    let accepted = enumerate_accepted(&g, Execution::default()).unwrap();
    let mut placements = Vec::new();
    for r in 0..3 {
        for c in 0..3 {
            let mut cfg = vec![0; 16];
            for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                cfg[(r + dr) * 4 + c + dc] = 1;
            }
            placements.push(cfg);
        }
    }
    placements.sort();
    let configs: Vec<Vec<usize>> = accepted.iter().map(|(c, _)| c.clone()).collect();
    let unit = accepted.iter().all(|(_, w)| *w == C64::new(1.0, 0.0));
    let secs = start.elapsed().as_secs_f64();

    let big = compile_grid(&four_x_agent(), 6, 6).unwrap();
    let crossing = big.parse_config("IIIXXI/IIIXXI/IIIIII/XXIIII/XXIIII/IIIIII").unwrap();
    let alone = big.parse_config("IIIXXI/IIIXXI/IIIIII/IIIIII/IIIIII/IIIIII").unwrap();
    let rejected = grid_weight(&big, &crossing).unwrap() == C64::new(0.0, 0.0);
    let single = grid_weight(&big, &alone).unwrap() == C64::new(1.0, 0.0);
    outcome(
        configs == placements && unit && rejected && single && secs < 120.0,
        format!(
            "{} accepted of 65536 (unit weights: {unit}), {secs:.2} s; 6×6 intersecting boundaries rejected: {rejected}",
            accepted.len()
        ),
    )
}

fn criterion_10() -> Outcome {
    let agent = four_x_agent();
    let mut same = true;
    let g3 = compile_grid(&agent, 3, 3).unwrap();
    let s3 = unroll(&snake_automaton_four_x(3).unwrap(), 9).unwrap().to_mpo().unwrap();
    same &= dense_operator(&s3).unwrap() == dense_grid_operator(&g3).unwrap();
    let g4 = compile_grid(&agent, 4, 4).unwrap();
    let s4 = unroll(&snake_automaton_four_x(4).unwrap(), 16).unwrap().to_mpo().unwrap();
    let nonzeros = sparse_grid_operator(&g4, Execution::default()).unwrap();
    same &= sparse_operator(&s4).unwrap() == nonzeros;
    let counts: Vec<usize> = (2..=8).map(|c| snake_automaton_four_x(c).unwrap().num_states()).collect();
    let increasing = counts.windows(2).all(|w| w[1] > w[0]);
    let signals = agent.signals().len();
    outcome(
        same && increasing && signals == 5,
        format!(
            "3×3 and 4×4 operators equal: {same} ({} nonzeros on 4×4); snake states for cols 2..8: {counts:?}; agent signals: {signals}",
            nonzeros.len()
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = compile_grid(&four_x_agent(), 3, 3).unwrap();
    let p = Peps::random(3, 3, 2, 1, &mut rng).unwrap();
    let mut env = Env2d::new(&g, p.clone(), p).unwrap();
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let cached = env.o(i, j).unwrap();
            worst = worst.max(cached.max_abs_diff(&env.o_uncached(i, j).unwrap()).unwrap());
        }
    }
    let g4 = compile_grid(&four_x_agent(), 4, 4).unwrap();
    let p4 = Peps::random(4, 4, 2, 1, &mut rng).unwrap();
    let mut env4 = Env2d::new(&g4, p4.clone(), p4).unwrap();
    env4.o(2, 2).unwrap();
    env4.take_log();
    env4.o(3, 2).unwrap();
    let log = env4.take_log();
    let expect = vec![(EnvKind::C, 2, 2), (EnvKind::L, 3, 2)];
    outcome(
        worst <= 1e-12 && log == expect,
        format!("cached vs full contraction {worst:.1e}; move (3,3)→(4,3) computed {log:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("automaton and chain amplitudes agree", criterion_1),
        ("W state factorization", criterion_2),
        ("operator factorizations", criterion_3),
        ("linear expectation cost", criterion_4),
        ("one absorption per sweep step", criterion_5),
        ("variational ground energies", criterion_6),
        ("gauge freedom", criterion_7),
        ("periodic chains", criterion_8),
        ("2D agent accepts the nine placements", criterion_9),
        ("snake automaton matches the agent", criterion_10),
        ("2D environment recursion", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status}  {name}: {}", k + 1, o.detail);
        if k == 3 {
            println!("criterion  4 info  open chains, not gated: {}", criterion_4_open_chains());
        }
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
