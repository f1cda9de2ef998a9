//! AST for the heuristic expression language, plus the canonical renderer.
//!
//! Programs are a sequence of statements followed by a single `return`;
//! there are no loops, user functions, or recursion, so evaluation cost is
//! bounded by the tree size.

use std::fmt;

/// Which feature surface and arithmetic a program targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Cache priority function: 64-bit real arithmetic, Table-style object,
    /// aggregate, and eviction-history features.
    Cache,
    /// Congestion-control decision function: integer-only saturating
    /// arithmetic with statically guarded division.
    Kernel,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Cache => write!(f, "cache"),
            Mode::Kernel => write!(f, "kernel"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lit {
    Int(i64),
    Float(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Lit),
    Ident(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        if v < 0 {
            Expr::Unary(UnOp::Neg, Box::new(Expr::Lit(Lit::Int(-v))))
        } else {
            Expr::Lit(Lit::Int(v))
        }
    }

    pub fn ident(name: &str) -> Expr {
        Expr::Ident(name.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Let(String, Expr),
    Assign(String, Expr),
    AddAssign(String, Expr),
    SubAssign(String, Expr),
    /// Condition, then-block, else-block (empty when absent).
    If(Expr, Vec<Stmt>, Vec<Stmt>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramAst {
    pub stmts: Vec<Stmt>,
    pub ret: Expr,
}

/// A parsed candidate heuristic: source text, typed AST, and target mode.
#[derive(Debug, Clone)]
pub struct Program {
    pub source: String,
    pub ast: ProgramAst,
    pub mode: Mode,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode && self.ast == other.ast
    }
}

/// Canonical pretty-printer. `parse(render(p))` reproduces `p`'s AST.
pub fn render(p: &Program) -> String {
    let mut out = String::new();
    for s in &p.ast.stmts {
        render_stmt(s, 0, &mut out);
    }
    out.push_str("return ");
    render_expr(&p.ast.ret, 0, &mut out);
    out.push_str(";\n");
    out
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn render_stmt(s: &Stmt, level: usize, out: &mut String) {
    indent(level, out);
    match s {
        Stmt::Let(name, e) => {
            out.push_str("let ");
            out.push_str(name);
            out.push_str(" = ");
            render_expr(e, 0, out);
            out.push_str(";\n");
        }
        Stmt::Assign(name, e) => {
            out.push_str(name);
            out.push_str(" = ");
            render_expr(e, 0, out);
            out.push_str(";\n");
        }
        Stmt::AddAssign(name, e) => {
            out.push_str(name);
            out.push_str(" += ");
            render_expr(e, 0, out);
            out.push_str(";\n");
        }
        Stmt::SubAssign(name, e) => {
            out.push_str(name);
            out.push_str(" -= ");
            render_expr(e, 0, out);
            out.push_str(";\n");
        }
        Stmt::If(cond, then_b, else_b) => {
            out.push_str("if (");
            render_expr(cond, 0, out);
            out.push_str(") {\n");
            for s in then_b {
                render_stmt(s, level + 1, out);
            }
            indent(level, out);
            if else_b.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                for s in else_b {
                    render_stmt(s, level + 1, out);
                }
                indent(level, out);
                out.push_str("}\n");
            }
        }
    }
}

// `min_prec` is the loosest precedence allowed without parentheses.
fn render_expr(e: &Expr, min_prec: u8, out: &mut String) {
    match e {
        Expr::Lit(Lit::Int(v)) => {
            let _ = std::fmt::write(out, format_args!("{v}"));
        }
        Expr::Lit(Lit::Float(v)) => {
            if v.fract() == 0.0 {
                let _ = std::fmt::write(out, format_args!("{v:.1}"));
            } else {
                let _ = std::fmt::write(out, format_args!("{v}"));
            }
        }
        Expr::Ident(name) => out.push_str(name),
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            render_expr(inner, 7, out);
        }
        Expr::Binary(op, a, b) => {
            let prec = op.precedence();
            let parens = prec < min_prec;
            if parens {
                out.push('(');
            }
            // Left-associative: left child at same level, right child tighter.
            // Comparisons are non-associative, so both children are tighter.
            let (lp, rp) = if op.is_comparison() {
                (prec + 1, prec + 1)
            } else {
                (prec, prec + 1)
            };
            render_expr(a, lp, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            render_expr(b, rp, out);
            if parens {
                out.push(')');
            }
        }
        Expr::Ternary(c, a, b) => {
            let parens = min_prec > 1;
            if parens {
                out.push('(');
            }
            render_expr(c, 2, out);
            out.push_str(" ? ");
            render_expr(a, 1, out);
            out.push_str(" : ");
            render_expr(b, 1, out);
            if parens {
                out.push(')');
            }
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render_expr(a, 0, out);
            }
            out.push(')');
        }
    }
}
