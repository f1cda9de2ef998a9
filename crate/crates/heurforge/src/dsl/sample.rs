//! Random program and context generators: fresh candidates for the mock
//! generator, and fuzz inputs for the totality suite.
//!
//! Sampled programs are built to satisfy the checker by construction
//! (mode-legal literals, guarded division, bound identifiers); callers still
//! re-check as a backstop.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ast::{render, BinOp, Expr, Lit, Mode, Program, ProgramAst, Stmt};
use super::check::{kernel_scalars, CACHE_SCALARS, CACHE_SERIES};
use super::eval::{MapCacheCtx, MapKernelCtx};

const CMP_OPS: &[BinOp] = &[
    BinOp::Lt,
    BinOp::Le,
    BinOp::Gt,
    BinOp::Ge,
    BinOp::Eq,
    BinOp::Ne,
];

pub fn random_scalar_name(rng: &mut ChaCha8Rng, mode: Mode) -> String {
    match mode {
        Mode::Cache => CACHE_SCALARS[rng.random_range(0..CACHE_SCALARS.len())].to_string(),
        Mode::Kernel => {
            let names = kernel_scalars();
            names[rng.random_range(0..names.len())].clone()
        }
    }
}

fn random_percentile_p(rng: &mut ChaCha8Rng) -> f64 {
    // One-decimal values keep renders short and stable.
    (rng.random_range(1..=9) as f64) / 10.0
}

fn random_cmp(rng: &mut ChaCha8Rng) -> BinOp {
    CMP_OPS[rng.random_range(0..CMP_OPS.len())]
}

/// A random expression legal for `mode`. Depth is structurally bounded.
pub fn sample_expr(rng: &mut ChaCha8Rng, mode: Mode, depth: usize) -> Expr {
    if depth == 0 {
        return sample_leaf(rng, mode);
    }
    match rng.random_range(0..10u32) {
        0..=2 => sample_leaf(rng, mode),
        3..=5 => {
            let op = match rng.random_range(0..5u32) {
                0 => BinOp::Add,
                1 => BinOp::Sub,
                2 => BinOp::Mul,
                3 => BinOp::Div,
                _ => BinOp::Mod,
            };
            let a = sample_expr(rng, mode, depth - 1);
            let b = if matches!(op, BinOp::Div | BinOp::Mod) {
                sample_divisor(rng, mode, depth - 1)
            } else {
                sample_expr(rng, mode, depth - 1)
            };
            Expr::bin(op, a, b)
        }
        6 => {
            let cond = Expr::bin(
                random_cmp(rng),
                sample_leaf(rng, mode),
                sample_leaf(rng, mode),
            );
            Expr::Ternary(
                Box::new(cond),
                Box::new(sample_expr(rng, mode, depth - 1)),
                Box::new(sample_expr(rng, mode, depth - 1)),
            )
        }
        7 => {
            let name = if rng.random_bool(0.5) { "min" } else { "max" };
            Expr::Call(
                name.to_string(),
                vec![
                    sample_expr(rng, mode, depth - 1),
                    sample_expr(rng, mode, depth - 1),
                ],
            )
        }
        8 => Expr::Call(
            "abs".to_string(),
            vec![sample_expr(rng, mode, depth - 1)],
        ),
        _ => match mode {
            Mode::Cache => sample_cache_feature_call(rng),
            Mode::Kernel => sample_leaf(rng, mode),
        },
    }
}

fn sample_leaf(rng: &mut ChaCha8Rng, mode: Mode) -> Expr {
    match rng.random_range(0..3u32) {
        0 => Expr::Ident(random_scalar_name(rng, mode)),
        1 => Expr::Lit(Lit::Int(rng.random_range(0..1000))),
        _ => match mode {
            Mode::Cache if rng.random_bool(0.3) => {
                Expr::Lit(Lit::Float(rng.random_range(1..100) as f64 / 10.0))
            }
            _ => Expr::Ident(random_scalar_name(rng, mode)),
        },
    }
}

// Divisors must stay checkable in kernel mode.
fn sample_divisor(rng: &mut ChaCha8Rng, mode: Mode, depth: usize) -> Expr {
    if rng.random_bool(0.5) {
        Expr::Lit(Lit::Int(rng.random_range(1..1000)))
    } else {
        match mode {
            Mode::Cache => sample_expr(rng, mode, depth),
            Mode::Kernel => Expr::Call(
                "max".to_string(),
                vec![Expr::Lit(Lit::Int(1)), sample_expr(rng, mode, depth)],
            ),
        }
    }
}

fn sample_cache_feature_call(rng: &mut ChaCha8Rng) -> Expr {
    match rng.random_range(0..4u32) {
        0 => Expr::Call(
            "percentile".to_string(),
            vec![
                Expr::ident(CACHE_SERIES[rng.random_range(0..CACHE_SERIES.len())]),
                Expr::Lit(Lit::Float(random_percentile_p(rng))),
            ],
        ),
        1 => Expr::Call("history_contains".to_string(), vec![Expr::ident("obj_id")]),
        2 => Expr::Call("history_count".to_string(), vec![Expr::ident("obj_id")]),
        _ => Expr::Call(
            "history_age_at_eviction".to_string(),
            vec![Expr::ident("obj_id")],
        ),
    }
}

// A "term" with heuristic shape: a feature, optionally scaled or aged.
fn sample_term(rng: &mut ChaCha8Rng, mode: Mode) -> Expr {
    match mode {
        Mode::Cache => match rng.random_range(0..6u32) {
            0 => Expr::ident("last_access_time"),
            1 => Expr::bin(
                BinOp::Mul,
                Expr::ident("count"),
                Expr::int(rng.random_range(1..50)),
            ),
            2 => Expr::bin(BinOp::Sub, Expr::ident("now"), Expr::ident("last_access_time")),
            3 => Expr::bin(
                BinOp::Div,
                Expr::ident("size"),
                Expr::int(rng.random_range(1..1000)),
            ),
            4 => sample_cache_feature_call(rng),
            _ => Expr::Ident(random_scalar_name(rng, Mode::Cache)),
        },
        Mode::Kernel => match rng.random_range(0..4u32) {
            0 => Expr::ident("cwnd"),
            1 => Expr::bin(
                BinOp::Mul,
                Expr::ident("mss"),
                Expr::int(rng.random_range(1..32)),
            ),
            2 => Expr::bin(
                BinOp::Div,
                Expr::bin(BinOp::Mul, Expr::ident("mss"), Expr::ident("mss")),
                Expr::Call(
                    "max".to_string(),
                    vec![Expr::Lit(Lit::Int(1)), Expr::ident("cwnd")],
                ),
            ),
            _ => Expr::Ident(random_scalar_name(rng, Mode::Kernel)),
        },
    }
}

/// A fresh random program for `mode`. Shapes mirror common heuristic
/// structure: a base score plus conditional adjustments.
pub fn sample_program(rng: &mut ChaCha8Rng, mode: Mode) -> Program {
    let ast = if rng.random_bool(0.55) {
        // Plain expression return.
        let mut e = sample_term(rng, mode);
        for _ in 0..rng.random_range(0..3u32) {
            let op = if rng.random_bool(0.6) { BinOp::Add } else { BinOp::Sub };
            e = Expr::bin(op, e, sample_term(rng, mode));
        }
        if rng.random_bool(0.35) {
            // Conditional regime switch around the base expression.
            let cond = Expr::bin(
                random_cmp(rng),
                sample_term(rng, mode),
                if rng.random_bool(0.5) {
                    Expr::int(rng.random_range(0..2000))
                } else {
                    sample_term(rng, mode)
                },
            );
            let alt = if rng.random_bool(0.5) {
                Expr::bin(
                    BinOp::Sub,
                    e.clone(),
                    Expr::int(rng.random_range(1..2_000_000)),
                )
            } else {
                sample_term(rng, mode)
            };
            e = Expr::Ternary(Box::new(cond), Box::new(e), Box::new(alt));
        }
        ProgramAst { stmts: Vec::new(), ret: e }
    } else {
        // Score variable with if-based adjustments.
        let mut stmts = vec![Stmt::Let("score".to_string(), sample_term(rng, mode))];
        for _ in 0..rng.random_range(1..4u32) {
            let cond = Expr::bin(
                random_cmp(rng),
                sample_term(rng, mode),
                if rng.random_bool(0.5) {
                    Expr::int(rng.random_range(0..2000))
                } else {
                    sample_term(rng, mode)
                },
            );
            let delta = Expr::int(rng.random_range(1..100_000));
            let adjust = if rng.random_bool(0.5) {
                Stmt::AddAssign("score".to_string(), delta)
            } else {
                Stmt::SubAssign("score".to_string(), delta)
            };
            let else_b = if rng.random_bool(0.3) {
                let delta = Expr::int(rng.random_range(1..100_000));
                vec![if rng.random_bool(0.5) {
                    Stmt::AddAssign("score".to_string(), delta)
                } else {
                    Stmt::SubAssign("score".to_string(), delta)
                }]
            } else {
                Vec::new()
            };
            stmts.push(Stmt::If(cond, vec![adjust], else_b));
        }
        ProgramAst {
            stmts,
            ret: Expr::ident("score"),
        }
    };
    program_from_ast(ast, mode)
}

/// Build a [`Program`] whose source is the canonical render of `ast`.
pub fn program_from_ast(ast: ProgramAst, mode: Mode) -> Program {
    let mut p = Program {
        source: String::new(),
        ast,
        mode,
    };
    p.source = render(&p);
    p
}

/// Random but well-formed cache feature environment for fuzzing.
pub fn random_cache_ctx(rng: &mut ChaCha8Rng) -> MapCacheCtx {
    let now = rng.random_range(1000..2_000_000) as f64;
    let last = rng.random_range(0..now as u64) as f64;
    let insert = rng.random_range(0..=last as u64) as f64;
    let mut ctx = MapCacheCtx::with_scalars(&[
        ("now", now),
        ("obj_id", rng.random_range(0..100_000) as f64),
        ("count", rng.random_range(1..10_000) as f64),
        ("last_access_time", last),
        ("insert_time", insert),
        ("size", rng.random_range(1..1_000_000) as f64),
    ]);
    for name in CACHE_SERIES {
        let n = rng.random_range(0..50usize);
        let vals: Vec<f64> = (0..n).map(|_| rng.random_range(0..1_000_000) as f64).collect();
        ctx.set_series(name, vals);
    }
    for _ in 0..rng.random_range(0..20u32) {
        ctx.history.insert(
            rng.random_range(0..100_000),
            (
                rng.random_range(1..1000) as f64,
                rng.random_range(0..1_000_000) as f64,
            ),
        );
    }
    ctx
}

/// Random kernel feature environment for fuzzing.
pub fn random_kernel_ctx(rng: &mut ChaCha8Rng) -> MapKernelCtx {
    let mut ctx = MapKernelCtx::default();
    for name in kernel_scalars() {
        ctx.scalars
            .insert(name.clone(), rng.random_range(0..100_000_000));
    }
    ctx.scalars
        .insert("loss_flag".to_string(), rng.random_range(0..2));
    ctx.scalars.insert("mss".to_string(), 1500);
    ctx
}
