//! Structural mutation and crossover over checked programs.
//!
//! Edits are drawn from a small set of AST rewrites; every result is
//! re-checked and edits that fail checking are retried a bounded number of
//! times before falling back to the unmodified input. All operators are
//! deterministic per seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ast::{BinOp, Expr, Lit, Mode, Program, ProgramAst, Stmt};
use super::check::check_program;
use super::sample::{program_from_ast, random_scalar_name, sample_expr};

const MAX_ATTEMPTS: usize = 30;

/// Apply `intensity` random AST edits. `intensity == 0` returns the input
/// unchanged.
pub fn mutate(p: &Program, rng_seed: u64, intensity: u32) -> Program {
    if intensity == 0 {
        return p.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut ast = p.ast.clone();
        for _ in 0..intensity {
            apply_random_edit(&mut ast, &mut rng, p.mode);
        }
        let cand = program_from_ast(ast, p.mode);
        if check_program(&cand).ok {
            return cand;
        }
    }
    p.clone()
}

/// Homologous crossover: replace the expression at a common preorder index
/// in `a` with the corresponding expression of `b`. Self-crossover of
/// identical trees is the identity.
pub fn crossover(a: &Program, b: &Program, rng_seed: u64) -> Program {
    debug_assert_eq!(a.mode, b.mode);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = count_exprs(&a.ast).min(count_exprs(&b.ast));
    if n == 0 {
        return a.clone();
    }
    for _ in 0..MAX_ATTEMPTS {
        let idx = rng.random_range(0..n);
        let Some(donor) = get_expr(&b.ast, idx).cloned() else {
            continue;
        };
        let mut ast = a.ast.clone();
        replace_expr(&mut ast, idx, donor);
        let cand = program_from_ast(ast, a.mode);
        if check_program(&cand).ok {
            return cand;
        }
    }
    a.clone()
}

fn apply_random_edit(ast: &mut ProgramAst, rng: &mut ChaCha8Rng, mode: Mode) {
    match rng.random_range(0..7u32) {
        0 => perturb_literal(ast, rng, mode),
        1 => swap_comparison(ast, rng),
        2 => wrap_weighted_sum(ast, rng, mode),
        3 => insert_ternary_adjust(ast, rng, mode),
        4 => remove_ternary(ast, rng),
        5 => replace_ident(ast, rng, mode),
        _ => graft_subtree(ast, rng, mode),
    }
}

fn pick_index<F: Fn(&Expr) -> bool>(
    ast: &ProgramAst,
    rng: &mut ChaCha8Rng,
    pred: F,
) -> Option<usize> {
    let mut matches = Vec::new();
    let mut idx = 0usize;
    visit_exprs(ast, &mut |e| {
        if pred(e) {
            matches.push(idx);
        }
        idx += 1;
    });
    if matches.is_empty() {
        None
    } else {
        Some(matches[rng.random_range(0..matches.len())])
    }
}

fn perturb_literal(ast: &mut ProgramAst, rng: &mut ChaCha8Rng, mode: Mode) {
    let Some(idx) = pick_index(ast, rng, |e| matches!(e, Expr::Lit(_))) else {
        // No literals to perturb; add one instead.
        wrap_weighted_sum(ast, rng, mode);
        return;
    };
    let choice = rng.random_range(0..4u32);
    with_expr_mut(ast, idx, |e| {
        if let Expr::Lit(lit) = e {
            match lit {
                Lit::Int(v) => {
                    let nv = match choice {
                        0 => v.saturating_add(1),
                        1 => v.saturating_sub(1),
                        2 => v.saturating_mul(2),
                        _ => *v / 2,
                    };
                    *e = Expr::int(nv.clamp(-1_000_000_000_000, 1_000_000_000_000));
                }
                Lit::Float(v) => {
                    let f = 1.1 + 0.9 * (choice as f64) / 3.0;
                    let nv = if choice % 2 == 0 { *v * f } else { *v / f };
                    if nv.is_finite() {
                        *lit = Lit::Float(nv.clamp(0.0, 1.0e12));
                    }
                }
            }
        }
    });
}

fn swap_comparison(ast: &mut ProgramAst, rng: &mut ChaCha8Rng) {
    let Some(idx) = pick_index(ast, rng, |e| {
        matches!(e, Expr::Binary(op, _, _) if op.is_comparison())
    }) else {
        return;
    };
    const OPS: &[BinOp] = &[
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Eq,
        BinOp::Ne,
    ];
    let new_op = OPS[rng.random_range(0..OPS.len())];
    with_expr_mut(ast, idx, |e| {
        if let Expr::Binary(op, _, _) = e {
            *op = new_op;
        }
    });
}

fn wrap_weighted_sum(ast: &mut ProgramAst, rng: &mut ChaCha8Rng, mode: Mode) {
    let Some(idx) = pick_index(ast, rng, |_| true) else {
        return;
    };
    let feature = Expr::Ident(random_scalar_name(rng, mode));
    let weight = Expr::int(rng.random_range(1..64));
    let add = rng.random_bool(0.5);
    with_expr_mut(ast, idx, |e| {
        let base = e.clone();
        let term = Expr::bin(BinOp::Mul, weight, feature);
        *e = Expr::bin(if add { BinOp::Add } else { BinOp::Sub }, base, term);
    });
}

fn insert_ternary_adjust(ast: &mut ProgramAst, rng: &mut ChaCha8Rng, mode: Mode) {
    let Some(idx) = pick_index(ast, rng, |_| true) else {
        return;
    };
    const OPS: &[BinOp] = &[BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge];
    let cmp = OPS[rng.random_range(0..OPS.len())];
    let lhs = Expr::Ident(random_scalar_name(rng, mode));
    let rhs = if rng.random_bool(0.5) {
        Expr::int(rng.random_range(0..5000))
    } else {
        Expr::Ident(random_scalar_name(rng, mode))
    };
    let delta = Expr::int(rng.random_range(1..1_000_000));
    let add = rng.random_bool(0.5);
    with_expr_mut(ast, idx, |e| {
        let base = e.clone();
        let adjusted = Expr::bin(if add { BinOp::Add } else { BinOp::Sub }, base.clone(), delta);
        *e = Expr::Ternary(
            Box::new(Expr::bin(cmp, lhs, rhs)),
            Box::new(adjusted),
            Box::new(base),
        );
    });
}

fn remove_ternary(ast: &mut ProgramAst, rng: &mut ChaCha8Rng) {
    let Some(idx) = pick_index(ast, rng, |e| matches!(e, Expr::Ternary(..))) else {
        return;
    };
    let keep_then = rng.random_bool(0.5);
    with_expr_mut(ast, idx, |e| {
        if let Expr::Ternary(_, a, b) = e {
            *e = if keep_then {
                (**a).clone()
            } else {
                (**b).clone()
            };
        }
    });
}

fn replace_ident(ast: &mut ProgramAst, rng: &mut ChaCha8Rng, mode: Mode) {
    let Some(idx) = pick_index(ast, rng, |e| matches!(e, Expr::Ident(_))) else {
        return;
    };
    let name = random_scalar_name(rng, mode);
    with_expr_mut(ast, idx, |e| {
        if let Expr::Ident(n) = e {
            *n = name;
        }
    });
}

fn graft_subtree(ast: &mut ProgramAst, rng: &mut ChaCha8Rng, mode: Mode) {
    let donor = if rng.random_bool(0.5) {
        let n = count_exprs(ast);
        if n == 0 {
            return;
        }
        let src = rng.random_range(0..n);
        match get_expr(ast, src) {
            Some(e) => e.clone(),
            None => return,
        }
    } else {
        sample_expr(rng, mode, 2)
    };
    let Some(idx) = pick_index(ast, rng, |_| true) else {
        return;
    };
    replace_expr(ast, idx, donor);
}

// --- preorder expression indexing ---------------------------------------

/// Number of expression nodes in preorder over the whole program.
pub fn count_exprs(ast: &ProgramAst) -> usize {
    let mut n = 0;
    visit_exprs(ast, &mut |_| n += 1);
    n
}

fn visit_exprs(ast: &ProgramAst, f: &mut impl FnMut(&Expr)) {
    fn walk_expr(e: &Expr, f: &mut impl FnMut(&Expr)) {
        f(e);
        match e {
            Expr::Lit(_) | Expr::Ident(_) => {}
            Expr::Unary(_, a) => walk_expr(a, f),
            Expr::Binary(_, a, b) => {
                walk_expr(a, f);
                walk_expr(b, f);
            }
            Expr::Ternary(c, a, b) => {
                walk_expr(c, f);
                walk_expr(a, f);
                walk_expr(b, f);
            }
            Expr::Call(_, args) => {
                for a in args {
                    walk_expr(a, f);
                }
            }
        }
    }
    fn walk_stmts(stmts: &[Stmt], f: &mut impl FnMut(&Expr)) {
        for s in stmts {
            match s {
                Stmt::Let(_, e)
                | Stmt::Assign(_, e)
                | Stmt::AddAssign(_, e)
                | Stmt::SubAssign(_, e) => walk_expr(e, f),
                Stmt::If(c, t, el) => {
                    walk_expr(c, f);
                    walk_stmts(t, f);
                    walk_stmts(el, f);
                }
            }
        }
    }
    walk_stmts(&ast.stmts, f);
    walk_expr(&ast.ret, f);
}

/// Expression at preorder index `idx`.
pub fn get_expr(ast: &ProgramAst, idx: usize) -> Option<&Expr> {
    let mut i = 0usize;
    let mut found: Option<&Expr> = None;
    // Non-short-circuiting walk; programs are small.
    visit_exprs_ref(ast, &mut |e| {
        if i == idx {
            found = Some(e);
        }
        i += 1;
    });
    found
}

fn visit_exprs_ref<'a>(ast: &'a ProgramAst, f: &mut impl FnMut(&'a Expr)) {
    fn walk_expr<'a>(e: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
        f(e);
        match e {
            Expr::Lit(_) | Expr::Ident(_) => {}
            Expr::Unary(_, a) => walk_expr(a, f),
            Expr::Binary(_, a, b) => {
                walk_expr(a, f);
                walk_expr(b, f);
            }
            Expr::Ternary(c, a, b) => {
                walk_expr(c, f);
                walk_expr(a, f);
                walk_expr(b, f);
            }
            Expr::Call(_, args) => {
                for a in args {
                    walk_expr(a, f);
                }
            }
        }
    }
    fn walk_stmts<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a Expr)) {
        for s in stmts {
            match s {
                Stmt::Let(_, e)
                | Stmt::Assign(_, e)
                | Stmt::AddAssign(_, e)
                | Stmt::SubAssign(_, e) => walk_expr(e, f),
                Stmt::If(c, t, el) => {
                    walk_expr(c, f);
                    walk_stmts(t, f);
                    walk_stmts(el, f);
                }
            }
        }
    }
    walk_stmts(&ast.stmts, f);
    walk_expr(&ast.ret, f);
}

/// Apply `f` to the expression at preorder index `idx`.
pub fn with_expr_mut(ast: &mut ProgramAst, idx: usize, f: impl FnOnce(&mut Expr)) -> bool {
    let mut i = 0usize;
    let mut f = Some(f);
    fn walk_expr(
        e: &mut Expr,
        i: &mut usize,
        idx: usize,
        f: &mut Option<impl FnOnce(&mut Expr)>,
    ) {
        if f.is_none() {
            return;
        }
        if *i == idx {
            if let Some(f) = f.take() {
                f(e);
            }
            *i += 1;
            return;
        }
        *i += 1;
        match e {
            Expr::Lit(_) | Expr::Ident(_) => {}
            Expr::Unary(_, a) => walk_expr(a, i, idx, f),
            Expr::Binary(_, a, b) => {
                walk_expr(a, i, idx, f);
                walk_expr(b, i, idx, f);
            }
            Expr::Ternary(c, a, b) => {
                walk_expr(c, i, idx, f);
                walk_expr(a, i, idx, f);
                walk_expr(b, i, idx, f);
            }
            Expr::Call(_, args) => {
                for a in args {
                    walk_expr(a, i, idx, f);
                }
            }
        }
    }
    fn walk_stmts(
        stmts: &mut [Stmt],
        i: &mut usize,
        idx: usize,
        f: &mut Option<impl FnOnce(&mut Expr)>,
    ) {
        for s in stmts {
            if f.is_none() {
                return;
            }
            match s {
                Stmt::Let(_, e)
                | Stmt::Assign(_, e)
                | Stmt::AddAssign(_, e)
                | Stmt::SubAssign(_, e) => walk_expr(e, i, idx, f),
                Stmt::If(c, t, el) => {
                    walk_expr(c, i, idx, f);
                    walk_stmts(t, i, idx, f);
                    walk_stmts(el, i, idx, f);
                }
            }
        }
    }
    walk_stmts(&mut ast.stmts, &mut i, idx, &mut f);
    if f.is_some() {
        walk_expr(&mut ast.ret, &mut i, idx, &mut f);
    }
    f.is_none()
}

fn replace_expr(ast: &mut ProgramAst, idx: usize, new: Expr) -> bool {
    with_expr_mut(ast, idx, |e| *e = new)
}
