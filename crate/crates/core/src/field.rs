//! Scalar fields `f: ℝ^d → ℝ` given by expressions, with exact symbolic
//! mixed partial derivatives.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' INT)?          -- '^' is right-associative
//! atom   := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')' | '-' factor
//! VAR    := 'x' DIGIT+               -- x1 … xd
//! FUNC   := exp | sin | cos | log
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)`.
//!
//! Derivatives are built symbolically with constant folding, cached per
//! multi-index, and compiled into a hash-consed instruction tape for fast
//! floating-point evaluation.  Numeric literals are exact rationals, so
//! polynomial fields can also be evaluated exactly.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};
use thiserror::Error;

/// Default highest guaranteed derivative order.
pub const DEFAULT_MAX_ORDER: u32 = 16;

/// Errors from parsing, differentiating, or composing fields.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    /// Malformed input at a byte offset.
    #[error("syntax error at position {pos}: {msg}")]
    Syntax {
        /// Byte offset into the source.
        pos: usize,
        /// Description.
        msg: String,
    },
    /// An identifier that is neither a variable nor a known function.
    #[error("unknown identifier '{name}' at position {pos}")]
    UnknownIdentifier {
        /// The identifier.
        name: String,
        /// Byte offset into the source.
        pos: usize,
    },
    /// A variable index outside `1..=d`.
    #[error("unknown variable 'x{index}' at position {pos} (dimension {d})")]
    UnknownVariable {
        /// 1-based index as written.
        index: usize,
        /// Field dimension.
        d: usize,
        /// Byte offset into the source.
        pos: usize,
    },
    /// A function applied to the wrong number of arguments.
    #[error("function '{name}' takes exactly one argument (position {pos})")]
    Arity {
        /// Function name.
        name: String,
        /// Byte offset into the source.
        pos: usize,
    },
    /// Derivative order beyond the declared maximum.
    #[error("derivative order {order} exceeds the maximum {max}")]
    OrderExceeded {
        /// Requested total order.
        order: u32,
        /// Declared maximum.
        max: u32,
    },
    /// Inconsistent shapes in a call.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Elementary functions of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    /// Natural exponential.
    Exp,
    /// Sine.
    Sin,
    /// Cosine.
    Cos,
    /// Natural logarithm.
    Log,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Log => "log",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Log => x.ln(),
        }
    }
}

/// Expression tree with shared subtrees.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    /// Exact rational constant.
    Const(BigRational),
    /// Variable `x_{k+1}` (0-based index `k`).
    Var(usize),
    /// Sum.
    Add(Arc<Expr>, Arc<Expr>),
    /// Difference.
    Sub(Arc<Expr>, Arc<Expr>),
    /// Product.
    Mul(Arc<Expr>, Arc<Expr>),
    /// Quotient.
    Div(Arc<Expr>, Arc<Expr>),
    /// Negation.
    Neg(Arc<Expr>),
    /// Integer power.
    Pow(Arc<Expr>, i64),
    /// Elementary function.
    Func(Func, Arc<Expr>),
}

type E = Arc<Expr>;

fn konst(c: BigRational) -> E {
    Arc::new(Expr::Const(c))
}

fn int(c: i64) -> E {
    konst(BigRational::from_integer(BigInt::from(c)))
}

fn as_const(e: &Expr) -> Option<&BigRational> {
    match e {
        Expr::Const(c) => Some(c),
        _ => None,
    }
}

fn add(a: E, b: E) -> E {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x + y),
        (Some(x), None) if x.is_zero() => b,
        (None, Some(y)) if y.is_zero() => a,
        _ => Arc::new(Expr::Add(a, b)),
    }
}

fn sub(a: E, b: E) -> E {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => konst(x - y),
        (None, Some(y)) if y.is_zero() => a,
        (Some(x), None) if x.is_zero() => neg(b),
        _ => Arc::new(Expr::Sub(a, b)),
    }
}

fn neg(a: E) -> E {
    match &*a {
        Expr::Const(c) => konst(-c),
        Expr::Neg(inner) => inner.clone(),
        Expr::Mul(c, e) if as_const(c).is_some() => mul(konst(-as_const(c).unwrap()), e.clone()),
        _ => Arc::new(Expr::Neg(a)),
    }
}

fn mul(a: E, b: E) -> E {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => return konst(x * y),
        (Some(x), _) if x.is_zero() => return int(0),
        (_, Some(y)) if y.is_zero() => return int(0),
        (Some(x), _) if x.is_one() => return b,
        (_, Some(y)) if y.is_one() => return a,
        (None, Some(_)) => return mul(b, a),
        _ => {}
    }
    if let Some(x) = as_const(&a) {
        // Fold nested constant factors: c1 * (c2 * e) = (c1 c2) * e.
        if let Expr::Mul(c2, e) = &*b {
            if let Some(y) = as_const(c2) {
                return mul(konst(x * y), e.clone());
            }
        }
        if let Expr::Neg(e) = &*b {
            return mul(konst(-x), e.clone());
        }
    }
    Arc::new(Expr::Mul(a, b))
}

fn div(a: E, b: E) -> E {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) if !y.is_zero() => konst(x / y),
        (Some(x), _) if x.is_zero() => int(0),
        (_, Some(y)) if y.is_one() => a,
        (_, Some(y)) if !y.is_zero() => mul(konst(y.recip()), a),
        _ => Arc::new(Expr::Div(a, b)),
    }
}

fn pow(a: E, n: i64) -> E {
    if n == 0 {
        return int(1);
    }
    if n == 1 {
        return a;
    }
    if let Some(c) = as_const(&a) {
        if !(c.is_zero() && n < 0) {
            return konst(Pow::pow(c, n as i32));
        }
    }
    Arc::new(Expr::Pow(a, n))
}

fn func(f: Func, a: E) -> E {
    if let Some(c) = as_const(&a) {
        let folded = match f {
            Func::Exp | Func::Cos if c.is_zero() => Some(1),
            Func::Sin if c.is_zero() => Some(0),
            Func::Log if c.is_one() => Some(0),
            _ => None,
        };
        if let Some(v) = folded {
            return int(v);
        }
    }
    Arc::new(Expr::Func(f, a))
}

/// Symbolic partial derivative with respect to variable `k` (0-based).
fn derive(e: &E, k: usize) -> E {
    match &**e {
        Expr::Const(_) => int(0),
        Expr::Var(j) => int(i64::from(*j == k)),
        Expr::Add(a, b) => add(derive(a, k), derive(b, k)),
        Expr::Sub(a, b) => sub(derive(a, k), derive(b, k)),
        Expr::Neg(a) => neg(derive(a, k)),
        Expr::Mul(a, b) => add(mul(derive(a, k), b.clone()), mul(a.clone(), derive(b, k))),
        Expr::Div(a, b) => {
            let da = derive(a, k);
            let db = derive(b, k);
            sub(
                div(da, b.clone()),
                div(mul(a.clone(), db), pow(b.clone(), 2)),
            )
        }
        Expr::Pow(a, n) => mul(mul(int(*n), pow(a.clone(), n - 1)), derive(a, k)),
        Expr::Func(f, a) => {
            let da = derive(a, k);
            match f {
                Func::Exp => mul(da, e.clone()),
                Func::Sin => mul(da, func(Func::Cos, a.clone())),
                Func::Cos => neg(mul(da, func(Func::Sin, a.clone()))),
                Func::Log => div(da, a.clone()),
            }
        }
    }
}

/// Replaces every variable by the given expressions.
fn substitute(e: &E, vars: &[E]) -> E {
    match &**e {
        Expr::Const(_) => e.clone(),
        Expr::Var(j) => vars[*j].clone(),
        Expr::Add(a, b) => add(substitute(a, vars), substitute(b, vars)),
        Expr::Sub(a, b) => sub(substitute(a, vars), substitute(b, vars)),
        Expr::Neg(a) => neg(substitute(a, vars)),
        Expr::Mul(a, b) => mul(substitute(a, vars), substitute(b, vars)),
        Expr::Div(a, b) => div(substitute(a, vars), substitute(b, vars)),
        Expr::Pow(a, n) => pow(substitute(a, vars), *n),
        Expr::Func(f, a) => func(*f, substitute(a, vars)),
    }
}

fn eval_exact(e: &Expr, x: &[BigRational]) -> Option<BigRational> {
    Some(match e {
        Expr::Const(c) => c.clone(),
        Expr::Var(j) => x[*j].clone(),
        Expr::Add(a, b) => eval_exact(a, x)? + eval_exact(b, x)?,
        Expr::Sub(a, b) => eval_exact(a, x)? - eval_exact(b, x)?,
        Expr::Mul(a, b) => eval_exact(a, x)? * eval_exact(b, x)?,
        Expr::Div(a, b) => {
            let den = eval_exact(b, x)?;
            if den.is_zero() {
                return None;
            }
            eval_exact(a, x)? / den
        }
        Expr::Neg(a) => -eval_exact(a, x)?,
        Expr::Pow(a, n) => {
            let base = eval_exact(a, x)?;
            if base.is_zero() && *n < 0 {
                return None;
            }
            Pow::pow(&base, *n as i32)
        }
        Expr::Func(..) => return None,
    })
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_integer() {
                    write!(f, "{}", c.numer())
                } else {
                    write!(f, "({}/{})", c.numer(), c.denom())
                }
            }
            Expr::Var(j) => write!(f, "x{}", j + 1),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Pow(a, n) => write!(f, "({a}^{n})"),
            Expr::Func(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation tape
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    Const(u64),
    Var(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Powi(usize, i64),
    Func(Func, usize),
}

/// A compiled expression: straight-line code over slots, with structurally
/// identical subexpressions merged (hash-consing).
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
}

impl Tape {
    fn compile(e: &Expr) -> Tape {
        let mut ops = Vec::new();
        let mut index: HashMap<Op, usize> = HashMap::new();
        fn emit(op: Op, ops: &mut Vec<Op>, index: &mut HashMap<Op, usize>) -> usize {
            *index.entry(op).or_insert_with(|| {
                ops.push(op);
                ops.len() - 1
            })
        }
        fn go(e: &Expr, ops: &mut Vec<Op>, index: &mut HashMap<Op, usize>) -> usize {
            let op = match e {
                Expr::Const(c) => Op::Const(c.to_f64().unwrap_or(f64::NAN).to_bits()),
                Expr::Var(j) => Op::Var(*j),
                Expr::Add(a, b) => Op::Add(go(a, ops, index), go(b, ops, index)),
                Expr::Sub(a, b) => Op::Sub(go(a, ops, index), go(b, ops, index)),
                Expr::Mul(a, b) => Op::Mul(go(a, ops, index), go(b, ops, index)),
                Expr::Div(a, b) => Op::Div(go(a, ops, index), go(b, ops, index)),
                Expr::Neg(a) => Op::Neg(go(a, ops, index)),
                Expr::Pow(a, n) => Op::Powi(go(a, ops, index), *n),
                Expr::Func(f, a) => Op::Func(*f, go(a, ops, index)),
            };
            emit(op, ops, index)
        }
        go(e, &mut ops, &mut index);
        Tape { ops }
    }

    /// Evaluates at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut slots: Vec<f64> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(bits) => f64::from_bits(bits),
                Op::Var(j) => x[j],
                Op::Add(a, b) => slots[a] + slots[b],
                Op::Sub(a, b) => slots[a] - slots[b],
                Op::Mul(a, b) => slots[a] * slots[b],
                Op::Div(a, b) => slots[a] / slots[b],
                Op::Neg(a) => -slots[a],
                Op::Powi(a, n) => slots[a].powi(n as i32),
                Op::Func(f, a) => f.apply(slots[a]),
            };
            slots.push(v);
        }
        *slots.last().expect("non-empty tape")
    }

    /// Number of instructions.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    /// Whether the tape is empty (never true for compiled expressions).
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Scalar field
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
struct DerivCache {
    exprs: HashMap<Vec<u32>, E>,
    tapes: HashMap<Vec<u32>, Arc<Tape>>,
}

/// A field `f: ℝ^d → ℝ` with exact mixed partials up to `max_order`.
#[derive(Debug, Clone)]
pub struct ScalarField {
    d: usize,
    expr: E,
    max_order: u32,
    cache: Arc<Mutex<DerivCache>>,
}

impl ScalarField {
    /// Wraps an expression (variables must be below `d`).
    pub fn from_expr(expr: Expr, d: usize, max_order: u32) -> Self {
        ScalarField {
            d,
            expr: Arc::new(expr),
            max_order,
            cache: Arc::new(Mutex::new(DerivCache::default())),
        }
    }

    /// The constant field.
    pub fn constant(value: BigRational, d: usize) -> Self {
        Self::from_expr(Expr::Const(value), d, DEFAULT_MAX_ORDER)
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Highest guaranteed derivative order.
    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    /// A copy with a different derivative cap.
    pub fn with_max_order(&self, max_order: u32) -> Self {
        ScalarField {
            max_order,
            ..self.clone()
        }
    }

    /// Underlying expression.
    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    fn check(&self, alpha: &[u32]) -> Result<(), FieldError> {
        if alpha.len() != self.d {
            return Err(FieldError::ShapeMismatch(format!(
                "multi-index of length {} for a field of dimension {}",
                alpha.len(),
                self.d
            )));
        }
        let order: u32 = alpha.iter().sum();
        if order > self.max_order {
            return Err(FieldError::OrderExceeded {
                order,
                max: self.max_order,
            });
        }
        Ok(())
    }

    fn derivative_expr(&self, alpha: &[u32], cache: &mut DerivCache) -> E {
        if alpha.iter().all(|a| *a == 0) {
            return self.expr.clone();
        }
        if let Some(e) = cache.exprs.get(alpha) {
            return e.clone();
        }
        let k = alpha
            .iter()
            .rposition(|a| *a > 0)
            .expect("non-zero multi-index");
        let mut lower = alpha.to_vec();
        lower[k] -= 1;
        let base = self.derivative_expr(&lower, cache);
        let e = derive(&base, k);
        cache.exprs.insert(alpha.to_vec(), e.clone());
        e
    }

    /// Symbolic `∂^α f`.
    pub fn partial_expr(&self, alpha: &[u32]) -> Result<Expr, FieldError> {
        self.check(alpha)?;
        let mut cache = self.cache.lock().expect("derivative cache");
        Ok((*self.derivative_expr(alpha, &mut cache)).clone())
    }

    /// Compiled `∂^α f` (cached).
    pub fn partial_tape(&self, alpha: &[u32]) -> Result<Arc<Tape>, FieldError> {
        self.check(alpha)?;
        let mut cache = self.cache.lock().expect("derivative cache");
        if let Some(t) = cache.tapes.get(alpha) {
            return Ok(t.clone());
        }
        let e = self.derivative_expr(alpha, &mut cache);
        let tape = Arc::new(Tape::compile(&e));
        cache.tapes.insert(alpha.to_vec(), tape.clone());
        Ok(tape)
    }

    /// `∂^α f (x)`.
    pub fn eval_partial(&self, alpha: &[u32], x: &[f64]) -> Result<f64, FieldError> {
        if x.len() != self.d {
            return Err(FieldError::ShapeMismatch(format!(
                "point of length {} for a field of dimension {}",
                x.len(),
                self.d
            )));
        }
        Ok(self.partial_tape(alpha)?.eval(x))
    }

    /// `f(x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.partial_tape(&vec![0; self.d])
            .expect("order zero is always available")
            .eval(x)
    }

    /// Exact `∂^α f (x)` for rational `x`, if `∂^α f` is rational there
    /// (i.e. contains no transcendental function).
    pub fn eval_partial_exact(
        &self,
        alpha: &[u32],
        x: &[BigRational],
    ) -> Result<Option<BigRational>, FieldError> {
        let e = self.partial_expr(alpha)?;
        Ok(eval_exact(&e, x))
    }

    /// `g(y) = f(A y + b)` where `A` is `d × d'` and `b ∈ ℝ^d`.
    pub fn compose_affine(
        &self,
        a: &[Vec<BigRational>],
        b: &[BigRational],
    ) -> Result<ScalarField, FieldError> {
        if a.len() != self.d || b.len() != self.d {
            return Err(FieldError::ShapeMismatch(format!(
                "affine map with {} rows and offset of length {} for dimension {}",
                a.len(),
                b.len(),
                self.d
            )));
        }
        let d_new = a.first().map(|r| r.len()).unwrap_or(0);
        if a.iter().any(|r| r.len() != d_new) {
            return Err(FieldError::ShapeMismatch("ragged matrix".into()));
        }
        let vars: Vec<E> = a
            .iter()
            .zip(b)
            .map(|(row, bk)| {
                let mut acc = konst(bk.clone());
                for (j, c) in row.iter().enumerate() {
                    acc = add(acc, mul(konst(c.clone()), Arc::new(Expr::Var(j))));
                }
                acc
            })
            .collect();
        let expr = substitute(&self.expr, &vars);
        Ok(ScalarField {
            d: d_new,
            expr,
            max_order: self.max_order,
            cache: Arc::new(Mutex::new(DerivCache::default())),
        })
    }

    /// [`Self::compose_affine`] with floating-point data (converted exactly).
    pub fn compose_affine_f64(&self, a: &[Vec<f64>], b: &[f64]) -> Result<ScalarField, FieldError> {
        let ar: Vec<Vec<BigRational>> = a
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| crate::linalg::rational_from_f64(*v))
                    .collect()
            })
            .collect();
        let br: Vec<BigRational> = b
            .iter()
            .map(|v| crate::linalg::rational_from_f64(*v))
            .collect();
        self.compose_affine(&ar, &br)
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Sym(char),
    End,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, FieldError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value = parse_decimal(text).ok_or_else(|| FieldError::Syntax {
                pos: start,
                msg: format!("malformed number '{text}'"),
            })?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(FieldError::Syntax {
                pos: i,
                msg: format!("unexpected character '{c}'"),
            });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

/// Exact rational value of a decimal literal such as `2.5e-3`.
fn parse_decimal(text: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(p) => (&text[..p], text[p + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(p) => (&mantissa[..p], &mantissa[p + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() || frac_part.contains('.') {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().ok()?;
    let ten = BigRational::from_integer(BigInt::from(10));
    let scale = exponent - frac_part.len() as i32;
    Some(BigRational::from_integer(num) * Pow::pow(&ten, scale))
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    d: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, c: char) -> Result<(), FieldError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(FieldError::Syntax {
                pos: self.offset(),
                msg: format!("expected '{c}'"),
            })
        }
    }

    fn expr(&mut self) -> Result<E, FieldError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.bump();
                    acc = add(acc, self.term()?);
                }
                Tok::Sym('-') => {
                    self.bump();
                    acc = sub(acc, self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<E, FieldError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Sym('*') => {
                    self.bump();
                    acc = mul(acc, self.factor()?);
                }
                Tok::Sym('/') => {
                    self.bump();
                    acc = div(acc, self.factor()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<E, FieldError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let n = self.exponent()?;
            return Ok(pow(base, n));
        }
        Ok(base)
    }

    /// Right-associative chain of integer literals: `2^3^2 = 2^(3^2)`.
    fn exponent(&mut self) -> Result<i64, FieldError> {
        let pos = self.offset();
        let value = match self.bump() {
            Tok::Num(v) if v.is_integer() => v.to_integer().to_i64(),
            _ => None,
        }
        .ok_or(FieldError::Syntax {
            pos,
            msg: "exponent must be a non-negative integer literal".into(),
        })?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let rest = self.exponent()?;
            return u32::try_from(rest)
                .ok()
                .and_then(|r| value.checked_pow(r))
                .ok_or(FieldError::Syntax {
                    pos,
                    msg: "exponent overflow".into(),
                });
        }
        Ok(value)
    }

    fn atom(&mut self) -> Result<E, FieldError> {
        let pos = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(konst(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Sym('-') => Ok(neg(self.factor()?)),
            Tok::Ident(name) => self.identifier(name, pos),
            Tok::End => Err(FieldError::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
            Tok::Sym(c) => Err(FieldError::Syntax {
                pos,
                msg: format!("unexpected '{c}'"),
            }),
        }
    }

    fn identifier(&mut self, name: String, pos: usize) -> Result<E, FieldError> {
        let f = match name.as_str() {
            "exp" => Some(Func::Exp),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "log" => Some(Func::Log),
            _ => None,
        };
        if let Some(f) = f {
            if *self.peek() != Tok::Sym('(') {
                return Err(FieldError::Arity { name, pos });
            }
            self.bump();
            if *self.peek() == Tok::Sym(')') {
                return Err(FieldError::Arity { name, pos });
            }
            let arg = self.expr()?;
            if *self.peek() == Tok::Sym(',') {
                return Err(FieldError::Arity { name, pos });
            }
            self.expect(')')?;
            return Ok(func(f, arg));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().map_err(|_| FieldError::UnknownIdentifier {
                    name: name.clone(),
                    pos,
                })?;
                if index == 0 || index > self.d {
                    return Err(FieldError::UnknownVariable {
                        index,
                        d: self.d,
                        pos,
                    });
                }
                return Ok(Arc::new(Expr::Var(index - 1)));
            }
        }
        Err(FieldError::UnknownIdentifier { name, pos })
    }
}

/// Parses `src` into a field of dimension `d` with the default derivative cap.
pub fn parse(src: &str, d: usize) -> Result<ScalarField, FieldError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, d };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(FieldError::Syntax {
            pos: p.offset(),
            msg: "trailing input".into(),
        });
    }
    Ok(ScalarField {
        d,
        expr: e,
        max_order: DEFAULT_MAX_ORDER,
        cache: Arc::new(Mutex::new(DerivCache::default())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn parse_examples() {
        assert!(parse("exp(x1+x2)", 2).is_ok());
        let p = parse("x1^2*x2 - 3", 2).unwrap();
        assert_eq!(p.eval(&[2.0, 5.0]), 17.0);
        assert!(matches!(
            parse("x3", 2),
            Err(FieldError::UnknownVariable { index: 3, .. })
        ));
        assert!(matches!(
            parse("x1 +* 2", 1),
            Err(FieldError::Syntax { pos: 4, .. })
        ));
        assert!(matches!(
            parse("foo(x1)", 1),
            Err(FieldError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("exp(x1, x1)", 1),
            Err(FieldError::Arity { .. })
        ));
        assert!(matches!(parse("exp()", 1), Err(FieldError::Arity { .. })));
    }

    #[test]
    fn precedence() {
        let f = parse("-x1^2", 1).unwrap();
        assert_eq!(f.eval(&[3.0]), -9.0);
        let g = parse("2^3^2", 1).unwrap();
        assert_eq!(g.eval(&[0.0]), 512.0);
        let h = parse("1 - 2 - 3", 1).unwrap();
        assert_eq!(h.eval(&[0.0]), -4.0);
        let q = parse("8 / 4 / 2", 1).unwrap();
        assert_eq!(q.eval(&[0.0]), 1.0);
        let lit = parse("2.5e-1", 1).unwrap();
        assert_eq!(lit.eval(&[0.0]), 0.25);
    }

    #[test]
    fn partial_examples() {
        let f = parse("exp(x1+x2)", 2).unwrap();
        assert!((f.eval_partial(&[3, 2], &[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let g = parse("x1^2*x2", 2).unwrap();
        assert_eq!(g.eval_partial(&[1, 1], &[2.0, 5.0]).unwrap(), 4.0);
        let s = parse("sin(x1)", 1).unwrap();
        assert_eq!(s.eval_partial(&[2], &[0.0]).unwrap(), 0.0);
        assert!(matches!(
            s.eval_partial(&[17], &[0.0]),
            Err(FieldError::OrderExceeded { order: 17, max: 16 })
        ));
    }

    #[test]
    fn exact_polynomial_evaluation() {
        let g = parse("x1^3/3 - x1*x2 + 1/7", 2).unwrap();
        let x = [BigRational::new(1.into(), 2.into()), r(3)];
        let v = g.eval_partial_exact(&[0, 0], &x).unwrap().unwrap();
        assert_eq!(
            v,
            BigRational::new(1.into(), 24.into()) - BigRational::new(3.into(), 2.into())
                + BigRational::new(1.into(), 7.into())
        );
        assert!(parse("exp(x1)", 1)
            .unwrap()
            .eval_partial_exact(&[0], &[r(1)])
            .unwrap()
            .is_none());
    }

    #[test]
    fn compose_examples() {
        let f = parse("exp(x1)", 1).unwrap();
        let g = f.compose_affine(&[vec![r(2)]], &[r(0)]).unwrap();
        assert_eq!(g.eval_partial(&[1], &[0.0]).unwrap(), 2.0);
        let id = f.compose_affine(&[vec![r(1)]], &[r(0)]).unwrap();
        assert_eq!(id.eval(&[0.7]), f.eval(&[0.7]));
        let lin = parse("x1+x2", 2).unwrap();
        let a = vec![vec![r(3), r(0)], vec![r(0), r(3)]];
        let h = lin.compose_affine(&a, &[r(0), r(0)]).unwrap();
        assert_eq!(h.eval(&[1.0, 2.0]), 9.0);
        assert!(lin.compose_affine(&[vec![r(1)]], &[r(0)]).is_err());
    }

    #[test]
    fn derivative_stays_small_for_exponentials() {
        let f = parse("exp(x1+x2)", 2).unwrap();
        let a = vec![vec![r(5), r(0)], vec![r(0), r(5)]];
        let g = f.compose_affine(&a, &[r(0), r(0)]).unwrap();
        let tape = g.partial_tape(&[8, 8]).unwrap();
        assert!(tape.len() < 20, "tape has {} ops", tape.len());
        let v = g.eval_partial(&[8, 8], &[0.0, 0.0]).unwrap();
        assert!((v / 5f64.powi(16) - 1.0).abs() < 1e-14);
    }
}
