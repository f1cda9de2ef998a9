//! Static checker: identifier binding, call arities, percentile literal
//! ranges, and the kernel-mode rules (integer-only literals, statically
//! guarded division).
//!
//! Diagnostics are data, not failures; the generator feedback loop consumes
//! their machine-readable categories.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, Lit, Mode, Program, Stmt};

/// Scalar bindings available to cache-mode programs.
pub const CACHE_SCALARS: &[&str] = &[
    "now",
    "obj_id",
    "count",
    "last_access_time",
    "insert_time",
    "size",
];

/// Aggregate series available to cache-mode `percentile()`.
pub const CACHE_SERIES: &[&str] = &["counts", "ages", "sizes"];

/// Base scalar bindings available to kernel-mode programs. History slots
/// (`cwnd_h0..h9`, `srtt_h0..h9`, `rate_h0..h9`, `loss_h0..h9`) are appended
/// by [`kernel_scalars`].
pub const KERNEL_BASE_SCALARS: &[&str] = &[
    "cwnd",
    "prev_cwnd",
    "srtt_us",
    "rtt_us",
    "min_rtt_us",
    "inflight_bytes",
    "mss",
    "acked_bytes",
    "loss_flag",
];

/// Metric prefixes for the kernel-mode 10-slot history arrays.
pub const KERNEL_HISTORY_METRICS: &[&str] = &["cwnd", "srtt", "rate", "loss"];

/// Number of history slots per metric.
pub const KERNEL_HISTORY_SLOTS: usize = 10;

/// All scalar names bound in kernel mode, history slots included.
pub fn kernel_scalars() -> &'static [String] {
    use std::sync::OnceLock;
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut v: Vec<String> = KERNEL_BASE_SCALARS.iter().map(|s| s.to_string()).collect();
        for m in KERNEL_HISTORY_METRICS {
            for i in 0..KERNEL_HISTORY_SLOTS {
                v.push(format!("{m}_h{i}"));
            }
        }
        v
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Syntax,
    UnknownIdentifier,
    Type,
    ForbiddenConstruct,
    UnguardedDivision,
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Category::Syntax => "syntax",
            Category::UnknownIdentifier => "unknown-identifier",
            Category::Type => "type",
            Category::ForbiddenConstruct => "forbidden-construct",
            Category::UnguardedDivision => "unguarded-division",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub location: String,
    pub category: Category,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}: {}", self.category, self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl CheckReport {
    fn from_diags(diagnostics: Vec<Diagnostic>) -> Self {
        CheckReport {
            ok: diagnostics.is_empty(),
            diagnostics,
        }
    }
}

struct Checker<'a> {
    mode: Mode,
    scalars: HashSet<&'a str>,
    series: HashSet<&'a str>,
    // Local variables, innermost scope last.
    scopes: Vec<HashSet<String>>,
    // Expressions proven nonzero by an enclosing `!= 0` guard.
    guards: Vec<Expr>,
    diags: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn diag(&mut self, category: Category, location: &str, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            location: location.to_string(),
            category,
            message: message.into(),
        });
    }

    fn is_defined(&self, name: &str) -> bool {
        self.scalars.contains(name) || self.scopes.iter().any(|s| s.contains(name))
    }

    fn is_local(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name))
    }

    fn check_stmts(&mut self, stmts: &[Stmt], loc: &str) {
        self.scopes.push(HashSet::new());
        self.check_stmts_in_scope(stmts, loc);
        self.scopes.pop();
    }

    fn check_stmts_in_scope(&mut self, stmts: &[Stmt], loc: &str) {
        for (i, s) in stmts.iter().enumerate() {
            let here = format!("{loc}.{i}");
            match s {
                Stmt::Let(name, e) => {
                    self.check_expr(e, &here);
                    if self.scalars.contains(name.as_str()) || self.series.contains(name.as_str())
                    {
                        self.diag(
                            Category::Type,
                            &here,
                            format!("'{name}' shadows a context binding"),
                        );
                    }
                    self.scopes.last_mut().unwrap().insert(name.clone());
                }
                Stmt::Assign(name, e) => {
                    self.check_expr(e, &here);
                    if self.scalars.contains(name.as_str()) || self.series.contains(name.as_str())
                    {
                        self.diag(
                            Category::Type,
                            &here,
                            format!("cannot assign to context binding '{name}'"),
                        );
                    } else if !self.is_local(name) {
                        // First assignment defines the variable.
                        self.scopes.last_mut().unwrap().insert(name.clone());
                    }
                }
                Stmt::AddAssign(name, e) | Stmt::SubAssign(name, e) => {
                    self.check_expr(e, &here);
                    if !self.is_local(name) {
                        self.diag(
                            Category::UnknownIdentifier,
                            &here,
                            format!("compound assignment to undefined variable '{name}'"),
                        );
                    }
                }
                Stmt::If(cond, then_b, else_b) => {
                    self.check_expr(cond, &here);
                    let guard = nonzero_guard(cond);
                    if let Some(g) = &guard {
                        self.guards.push(g.clone());
                    }
                    self.check_stmts(then_b, &format!("{here}.then"));
                    if guard.is_some() {
                        self.guards.pop();
                    }
                    self.check_stmts(else_b, &format!("{here}.else"));
                }
            }
        }
    }

    fn check_expr(&mut self, e: &Expr, loc: &str) {
        match e {
            Expr::Lit(Lit::Float(_)) => {
                if self.mode == Mode::Kernel {
                    self.diag(
                        Category::ForbiddenConstruct,
                        loc,
                        "fractional literals are not allowed in kernel mode",
                    );
                }
            }
            Expr::Lit(Lit::Int(_)) => {}
            Expr::Ident(name) => {
                if !self.is_defined(name) {
                    let msg = if self.series.contains(name.as_str()) {
                        format!("'{name}' is a series and cannot be used as a scalar")
                    } else {
                        format!("unknown identifier '{name}'")
                    };
                    let cat = if self.series.contains(name.as_str()) {
                        Category::Type
                    } else {
                        Category::UnknownIdentifier
                    };
                    self.diag(cat, loc, msg);
                }
            }
            Expr::Unary(_, inner) => self.check_expr(inner, loc),
            Expr::Binary(op, a, b) => {
                self.check_expr(a, loc);
                self.check_expr(b, loc);
                if self.mode == Mode::Kernel && matches!(op, BinOp::Div | BinOp::Mod) {
                    self.check_divisor(b, loc);
                }
            }
            Expr::Ternary(c, a, b) => {
                self.check_expr(c, loc);
                let guard = nonzero_guard(c);
                if let Some(g) = &guard {
                    self.guards.push(g.clone());
                }
                self.check_expr(a, loc);
                if guard.is_some() {
                    self.guards.pop();
                }
                self.check_expr(b, loc);
            }
            Expr::Call(name, args) => self.check_call(name, args, loc),
        }
    }

    fn check_call(&mut self, name: &str, args: &[Expr], loc: &str) {
        let arity = |me: &mut Self, n: usize| {
            if args.len() != n {
                me.diag(
                    Category::Type,
                    loc,
                    format!("'{name}' expects {n} argument(s), got {}", args.len()),
                );
                false
            } else {
                true
            }
        };
        match name {
            "min" | "max" => {
                if arity(self, 2) {
                    self.check_expr(&args[0], loc);
                    self.check_expr(&args[1], loc);
                }
            }
            "abs" => {
                if arity(self, 1) {
                    self.check_expr(&args[0], loc);
                }
            }
            "percentile" => {
                if self.mode == Mode::Kernel {
                    self.diag(
                        Category::ForbiddenConstruct,
                        loc,
                        "'percentile' is not available in kernel mode",
                    );
                    return;
                }
                if !arity(self, 2) {
                    return;
                }
                match &args[0] {
                    Expr::Ident(s) if self.series.contains(s.as_str()) => {}
                    Expr::Ident(s) => self.diag(
                        Category::UnknownIdentifier,
                        loc,
                        format!("'{s}' is not an aggregate series"),
                    ),
                    _ => self.diag(
                        Category::Type,
                        loc,
                        "first argument of 'percentile' must be a series name",
                    ),
                }
                let p = match &args[1] {
                    Expr::Lit(Lit::Float(v)) => Some(*v),
                    Expr::Lit(Lit::Int(v)) => Some(*v as f64),
                    _ => None,
                };
                match p {
                    Some(v) if (0.0..=1.0).contains(&v) => {}
                    Some(v) => self.diag(
                        Category::Type,
                        loc,
                        format!("percentile argument {v} is outside [0, 1]"),
                    ),
                    None => self.diag(
                        Category::Type,
                        loc,
                        "percentile argument must be a literal in [0, 1]",
                    ),
                }
            }
            "history_contains" | "history_count" | "history_age_at_eviction" => {
                if self.mode == Mode::Kernel {
                    self.diag(
                        Category::ForbiddenConstruct,
                        loc,
                        format!("'{name}' is not available in kernel mode"),
                    );
                    return;
                }
                if arity(self, 1) {
                    self.check_expr(&args[0], loc);
                }
            }
            _ => {
                self.diag(
                    Category::UnknownIdentifier,
                    loc,
                    format!("unknown function '{name}'"),
                );
                for a in args {
                    self.check_expr(a, loc);
                }
            }
        }
    }

    // Kernel rule: a divisor must be a nonzero integer literal, a
    // `max(k, ...)` with positive literal k, or syntactically covered by an
    // enclosing `<divisor> != 0` guard.
    fn check_divisor(&mut self, d: &Expr, loc: &str) {
        let ok = match d {
            Expr::Lit(Lit::Int(v)) => *v != 0,
            Expr::Unary(super::ast::UnOp::Neg, inner) => {
                matches!(**inner, Expr::Lit(Lit::Int(v)) if v != 0)
            }
            Expr::Call(name, args) if name == "max" && args.len() == 2 => {
                matches!(args[0], Expr::Lit(Lit::Int(v)) if v >= 1)
            }
            _ => self.guards.iter().any(|g| g == d),
        };
        if !ok {
            self.diag(
                Category::UnguardedDivision,
                loc,
                "divisor must be a nonzero literal, max(1, ...), or guarded by 'if (divisor != 0)'",
            );
        }
    }
}

// Recognize `e != 0` / `0 != e` conditions; the guarded expression is `e`.
fn nonzero_guard(cond: &Expr) -> Option<Expr> {
    if let Expr::Binary(BinOp::Ne, a, b) = cond {
        if matches!(**b, Expr::Lit(Lit::Int(0))) {
            return Some((**a).clone());
        }
        if matches!(**a, Expr::Lit(Lit::Int(0))) {
            return Some((**b).clone());
        }
    }
    None
}

/// Validate a parsed program against its mode's binding surface and rules.
pub fn check_program(p: &Program) -> CheckReport {
    let (scalars, series): (HashSet<&str>, HashSet<&str>) = match p.mode {
        Mode::Cache => (
            CACHE_SCALARS.iter().copied().collect(),
            CACHE_SERIES.iter().copied().collect(),
        ),
        Mode::Kernel => (
            kernel_scalars().iter().map(|s| s.as_str()).collect(),
            HashSet::new(),
        ),
    };
    let mut checker = Checker {
        mode: p.mode,
        scalars,
        series,
        scopes: Vec::new(),
        guards: Vec::new(),
        diags: Vec::new(),
    };
    // Statements and the return expression share the top-level scope.
    checker.scopes.push(HashSet::new());
    checker.check_stmts_in_scope(&p.ast.stmts, "stmt");
    checker.check_expr(&p.ast.ret, "return");
    CheckReport::from_diags(checker.diags)
}
