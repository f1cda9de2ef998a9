//! Total evaluation of checked programs.
//!
//! Cache mode computes in 64-bit reals; division or modulo by a runtime zero
//! yields 0 for that subexpression. Kernel mode computes in saturating
//! 64-bit integers. Neither mode can trap.

use std::collections::HashMap;

use super::ast::{BinOp, Expr, Lit, Mode, Program, Stmt, UnOp};

/// Feature environment for cache-mode programs.
pub trait CacheCtx {
    fn scalar(&self, name: &str) -> f64;
    fn percentile(&self, series: &str, p: f64) -> f64;
    fn history_contains(&self, id: u64) -> bool;
    fn history_count(&self, id: u64) -> f64;
    fn history_age_at_eviction(&self, id: u64) -> f64;
}

/// Feature environment for kernel-mode programs.
pub trait KernelCtx {
    fn scalar(&self, name: &str) -> i64;
}

/// Evaluate a cache-mode program. The caller must have run the checker;
/// evaluation is still total for unchecked input (unknowns read as 0).
pub fn eval_cache(p: &Program, ctx: &dyn CacheCtx) -> f64 {
    debug_assert_eq!(p.mode, Mode::Cache);
    let mut ev = CacheEval {
        ctx,
        scopes: vec![HashMap::new()],
    };
    ev.run_stmts_in_scope(&p.ast.stmts);
    ev.expr(&p.ast.ret)
}

/// Evaluate a kernel-mode program in saturating integer arithmetic.
pub fn eval_kernel(p: &Program, ctx: &dyn KernelCtx) -> i64 {
    debug_assert_eq!(p.mode, Mode::Kernel);
    let mut ev = KernelEval {
        ctx,
        scopes: vec![HashMap::new()],
    };
    ev.run_stmts_in_scope(&p.ast.stmts);
    ev.expr(&p.ast.ret)
}

macro_rules! impl_scopes {
    ($t:ident, $val:ty) => {
        impl<'a> $t<'a> {
            fn read_local(&self, name: &str) -> Option<$val> {
                for s in self.scopes.iter().rev() {
                    if let Some(v) = s.get(name) {
                        return Some(*v);
                    }
                }
                None
            }

            fn write(&mut self, name: &str, v: $val) {
                for s in self.scopes.iter_mut().rev() {
                    if let Some(slot) = s.get_mut(name) {
                        *slot = v;
                        return;
                    }
                }
                self.scopes.last_mut().unwrap().insert(name.to_string(), v);
            }

            fn run_stmts(&mut self, stmts: &[Stmt]) {
                self.scopes.push(HashMap::new());
                self.run_stmts_in_scope(stmts);
                self.scopes.pop();
            }

            fn run_stmts_in_scope(&mut self, stmts: &[Stmt]) {
                for s in stmts {
                    match s {
                        Stmt::Let(name, e) => {
                            let v = self.expr(e);
                            self.scopes.last_mut().unwrap().insert(name.clone(), v);
                        }
                        Stmt::Assign(name, e) => {
                            let v = self.expr(e);
                            self.write(name, v);
                        }
                        Stmt::AddAssign(name, e) => {
                            let v = self.expr(e);
                            let cur = self.read_local(name).unwrap_or_default();
                            self.write(name, Self::add(cur, v));
                        }
                        Stmt::SubAssign(name, e) => {
                            let v = self.expr(e);
                            let cur = self.read_local(name).unwrap_or_default();
                            self.write(name, Self::sub(cur, v));
                        }
                        Stmt::If(cond, then_b, else_b) => {
                            if Self::truthy(self.expr(cond)) {
                                self.run_stmts(then_b);
                            } else {
                                self.run_stmts(else_b);
                            }
                        }
                    }
                }
            }
        }
    };
}

struct CacheEval<'a> {
    ctx: &'a dyn CacheCtx,
    scopes: Vec<HashMap<String, f64>>,
}

impl_scopes!(CacheEval, f64);

impl<'a> CacheEval<'a> {
    fn add(a: f64, b: f64) -> f64 {
        a + b
    }

    fn sub(a: f64, b: f64) -> f64 {
        a - b
    }

    fn truthy(v: f64) -> bool {
        v != 0.0
    }

    fn expr(&mut self, e: &Expr) -> f64 {
        match e {
            Expr::Lit(Lit::Int(v)) => *v as f64,
            Expr::Lit(Lit::Float(v)) => *v,
            Expr::Ident(name) => self
                .read_local(name)
                .unwrap_or_else(|| self.ctx.scalar(name)),
            Expr::Unary(UnOp::Neg, inner) => -self.expr(inner),
            Expr::Unary(UnOp::Not, inner) => bool_val(!Self::truthy(self.expr(inner))),
            Expr::Binary(op, a, b) => {
                let x = self.expr(a);
                let y = self.expr(b);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            0.0
                        } else {
                            x / y
                        }
                    }
                    BinOp::Mod => {
                        if y == 0.0 {
                            0.0
                        } else {
                            x % y
                        }
                    }
                    BinOp::Lt => bool_val(x < y),
                    BinOp::Le => bool_val(x <= y),
                    BinOp::Gt => bool_val(x > y),
                    BinOp::Ge => bool_val(x >= y),
                    BinOp::Eq => bool_val(x == y),
                    BinOp::Ne => bool_val(x != y),
                    BinOp::And => bool_val(Self::truthy(x) && Self::truthy(y)),
                    BinOp::Or => bool_val(Self::truthy(x) || Self::truthy(y)),
                }
            }
            Expr::Ternary(c, a, b) => {
                if Self::truthy(self.expr(c)) {
                    self.expr(a)
                } else {
                    self.expr(b)
                }
            }
            Expr::Call(name, args) => match name.as_str() {
                "min" if args.len() == 2 => {
                    let a = self.expr(&args[0]);
                    let b = self.expr(&args[1]);
                    if a <= b {
                        a
                    } else {
                        b
                    }
                }
                "max" if args.len() == 2 => {
                    let a = self.expr(&args[0]);
                    let b = self.expr(&args[1]);
                    if a >= b {
                        a
                    } else {
                        b
                    }
                }
                "abs" if args.len() == 1 => self.expr(&args[0]).abs(),
                "percentile" if args.len() == 2 => {
                    let series = match &args[0] {
                        Expr::Ident(s) => s.as_str(),
                        _ => return 0.0,
                    };
                    let p = self.expr(&args[1]);
                    self.ctx.percentile(series, p)
                }
                "history_contains" if args.len() == 1 => {
                    let id = to_id(self.expr(&args[0]));
                    bool_val(self.ctx.history_contains(id))
                }
                "history_count" if args.len() == 1 => {
                    let id = to_id(self.expr(&args[0]));
                    self.ctx.history_count(id)
                }
                "history_age_at_eviction" if args.len() == 1 => {
                    let id = to_id(self.expr(&args[0]));
                    self.ctx.history_age_at_eviction(id)
                }
                _ => 0.0,
            },
        }
    }
}

fn bool_val(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn to_id(v: f64) -> u64 {
    if v.is_finite() && v >= 0.0 {
        v as u64
    } else {
        0
    }
}

struct KernelEval<'a> {
    ctx: &'a dyn KernelCtx,
    scopes: Vec<HashMap<String, i64>>,
}

impl_scopes!(KernelEval, i64);

impl<'a> KernelEval<'a> {
    fn add(a: i64, b: i64) -> i64 {
        a.saturating_add(b)
    }

    fn sub(a: i64, b: i64) -> i64 {
        a.saturating_sub(b)
    }

    fn truthy(v: i64) -> bool {
        v != 0
    }

    fn expr(&mut self, e: &Expr) -> i64 {
        match e {
            Expr::Lit(Lit::Int(v)) => *v,
            // Unreachable for checked programs; truncate so eval stays total.
            Expr::Lit(Lit::Float(v)) => *v as i64,
            Expr::Ident(name) => self
                .read_local(name)
                .unwrap_or_else(|| self.ctx.scalar(name)),
            Expr::Unary(UnOp::Neg, inner) => self.expr(inner).saturating_neg(),
            Expr::Unary(UnOp::Not, inner) => (!Self::truthy(self.expr(inner))) as i64,
            Expr::Binary(op, a, b) => {
                let x = self.expr(a);
                let y = self.expr(b);
                match op {
                    BinOp::Add => x.saturating_add(y),
                    BinOp::Sub => x.saturating_sub(y),
                    BinOp::Mul => x.saturating_mul(y),
                    BinOp::Div => {
                        if y == 0 {
                            0
                        } else {
                            x.checked_div(y).unwrap_or(i64::MAX)
                        }
                    }
                    BinOp::Mod => {
                        if y == 0 {
                            0
                        } else {
                            x.checked_rem(y).unwrap_or(0)
                        }
                    }
                    BinOp::Lt => (x < y) as i64,
                    BinOp::Le => (x <= y) as i64,
                    BinOp::Gt => (x > y) as i64,
                    BinOp::Ge => (x >= y) as i64,
                    BinOp::Eq => (x == y) as i64,
                    BinOp::Ne => (x != y) as i64,
                    BinOp::And => (Self::truthy(x) && Self::truthy(y)) as i64,
                    BinOp::Or => (Self::truthy(x) || Self::truthy(y)) as i64,
                }
            }
            Expr::Ternary(c, a, b) => {
                if Self::truthy(self.expr(c)) {
                    self.expr(a)
                } else {
                    self.expr(b)
                }
            }
            Expr::Call(name, args) => match name.as_str() {
                "min" if args.len() == 2 => self.expr(&args[0]).min(self.expr(&args[1])),
                "max" if args.len() == 2 => self.expr(&args[0]).max(self.expr(&args[1])),
                "abs" if args.len() == 1 => self.expr(&args[0]).saturating_abs(),
                // Cache-only features read as 0 in kernel mode.
                _ => 0,
            },
        }
    }
}

/// Map-backed cache context for tests, tooling, and offline evaluation.
/// Series percentiles use nearest-rank over the stored (sorted) values.
#[derive(Debug, Clone, Default)]
pub struct MapCacheCtx {
    pub scalars: HashMap<String, f64>,
    pub series: HashMap<String, Vec<f64>>,
    /// id -> (count_at_eviction, age_at_eviction)
    pub history: HashMap<u64, (f64, f64)>,
}

impl MapCacheCtx {
    pub fn with_scalars(pairs: &[(&str, f64)]) -> Self {
        MapCacheCtx {
            scalars: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            ..Default::default()
        }
    }

    pub fn set_series(&mut self, name: &str, mut values: Vec<f64>) {
        values.sort_by(f64::total_cmp);
        self.series.insert(name.to_string(), values);
    }
}

/// Nearest-rank percentile: element at 1-based index ceil(p*n); p=0 gives
/// the minimum, an empty series gives 0.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

impl CacheCtx for MapCacheCtx {
    fn scalar(&self, name: &str) -> f64 {
        self.scalars.get(name).copied().unwrap_or(0.0)
    }

    fn percentile(&self, series: &str, p: f64) -> f64 {
        match self.series.get(series) {
            Some(v) => nearest_rank(v, p),
            None => 0.0,
        }
    }

    fn history_contains(&self, id: u64) -> bool {
        self.history.contains_key(&id)
    }

    fn history_count(&self, id: u64) -> f64 {
        self.history.get(&id).map(|&(c, _)| c).unwrap_or(0.0)
    }

    fn history_age_at_eviction(&self, id: u64) -> f64 {
        self.history.get(&id).map(|&(_, a)| a).unwrap_or(0.0)
    }
}

/// Map-backed kernel context for tests and tooling.
#[derive(Debug, Clone, Default)]
pub struct MapKernelCtx {
    pub scalars: HashMap<String, i64>,
}

impl MapKernelCtx {
    pub fn with_scalars(pairs: &[(&str, i64)]) -> Self {
        MapKernelCtx {
            scalars: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

impl KernelCtx for MapKernelCtx {
    fn scalar(&self, name: &str) -> i64 {
        self.scalars.get(name).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::parse;

    #[test]
    fn identity_feature() {
        let p = parse("return count;", Mode::Cache).unwrap();
        let ctx = MapCacheCtx::with_scalars(&[("count", 3.0)]);
        assert_eq!(eval_cache(&p, &ctx), 3.0);
    }

    #[test]
    fn division_by_zero_is_zero() {
        let p = parse("return 10 / 0;", Mode::Cache).unwrap();
        assert_eq!(eval_cache(&p, &MapCacheCtx::default()), 0.0);
        let p = parse("return 10 % 0;", Mode::Cache).unwrap();
        assert_eq!(eval_cache(&p, &MapCacheCtx::default()), 0.0);
    }

    #[test]
    fn statements_and_branches() {
        let src = "let s = count * 20; if (s > 50) { s -= 10; } else { s += 10; } return s;";
        let p = parse(src, Mode::Cache).unwrap();
        let ctx = MapCacheCtx::with_scalars(&[("count", 5.0)]);
        assert_eq!(eval_cache(&p, &ctx), 90.0);
        let ctx = MapCacheCtx::with_scalars(&[("count", 1.0)]);
        assert_eq!(eval_cache(&p, &ctx), 30.0);
    }

    #[test]
    fn branch_locals_do_not_leak() {
        // `x` inside the branch is a new binding; outer x is untouched only
        // for `let`, while plain assignment writes through.
        let src = "let x = 1; if (1) { let x = 2; } return x;";
        let p = parse(src, Mode::Cache).unwrap();
        assert_eq!(eval_cache(&p, &MapCacheCtx::default()), 1.0);
        let src = "let x = 1; if (1) { x = 2; } return x;";
        let p = parse(src, Mode::Cache).unwrap();
        assert_eq!(eval_cache(&p, &MapCacheCtx::default()), 2.0);
    }

    #[test]
    fn percentile_nearest_rank() {
        assert_eq!(nearest_rank(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.0);
        assert_eq!(nearest_rank(&[1.0, 2.0, 3.0, 4.0], 1.0), 4.0);
        assert_eq!(nearest_rank(&[1.0, 2.0, 3.0, 4.0], 0.0), 1.0);
        assert_eq!(nearest_rank(&[], 0.5), 0.0);
    }

    #[test]
    fn history_functions() {
        let p = parse(
            "return history_contains(obj_id) ? history_count(obj_id) : -1;",
            Mode::Cache,
        )
        .unwrap();
        let mut ctx = MapCacheCtx::with_scalars(&[("obj_id", 7.0)]);
        ctx.history.insert(7, (5.0, 30.0));
        assert_eq!(eval_cache(&p, &ctx), 5.0);
        ctx.history.clear();
        assert_eq!(eval_cache(&p, &ctx), -1.0);
    }

    #[test]
    fn kernel_saturating_arithmetic() {
        let p = parse("return cwnd * cwnd;", Mode::Kernel).unwrap();
        let ctx = MapKernelCtx::with_scalars(&[("cwnd", i64::MAX)]);
        assert_eq!(eval_kernel(&p, &ctx), i64::MAX);
        let p = parse("return 0 - cwnd - cwnd;", Mode::Kernel).unwrap();
        assert_eq!(eval_kernel(&p, &ctx), i64::MIN);
    }

    #[test]
    fn kernel_division_truncates() {
        let p = parse("return cwnd / max(1, rtt_us);", Mode::Kernel).unwrap();
        let ctx = MapKernelCtx::with_scalars(&[("cwnd", 7), ("rtt_us", 2)]);
        assert_eq!(eval_kernel(&p, &ctx), 3);
        let ctx = MapKernelCtx::with_scalars(&[("cwnd", 7), ("rtt_us", 0)]);
        assert_eq!(eval_kernel(&p, &ctx), 7);
    }

    #[test]
    fn composite_scorer_golden_value() {
        let p = parse(crate::dsl::COMPOSITE_SCORER, Mode::Cache).unwrap();
        assert!(crate::dsl::check_program(&p).ok);
        let mut ctx = MapCacheCtx::with_scalars(&[
            ("now", 2000.0),
            ("obj_id", 42.0),
            ("count", 5.0),
            ("last_access_time", 1800.0),
            ("insert_time", 100.0),
            ("size", 400.0),
        ]);
        // History miss; percentiles pinned so every branch is determined:
        // p75(ages)=500, p75(sizes)=600, p70(counts)=4.
        ctx.set_series("ages", vec![500.0]);
        ctx.set_series("sizes", vec![600.0]);
        ctx.set_series("counts", vec![4.0]);
        // 100 - 200/300 - 400/500 - 40 + 10 + 50 + 25 = 2153/15
        let got = eval_cache(&p, &ctx);
        assert!((got - 2153.0 / 15.0).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn min_max_abs() {
        let p = parse("return min(3, 5) + max(3, 5) + abs(0 - 2);", Mode::Cache).unwrap();
        assert_eq!(eval_cache(&p, &MapCacheCtx::default()), 10.0);
    }
}
