//! Small arithmetic expression language used for coefficients and jump maps.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?          right-associative
//! atom   := number | 'pi' | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables come from `x, y, t, l, th, n`; each parse declares which of them
//! are allowed. Functions: `sin cos exp sqrt abs` (one argument) and `pow`
//! (two). Evaluation reports domain errors instead of producing NaN.

use std::fmt;

use thiserror::Error;

/// Variable names understood by the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    T,
    L,
    Th,
    N,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::X, Var::Y, Var::T, Var::L, Var::Th, Var::N];

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::T => "t",
            Var::L => "l",
            Var::Th => "th",
            Var::N => "n",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Pow,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Pow => "pow",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn precedence(&self) -> u8 {
        match self {
            Node::Bin(op, _, _) => op.precedence(),
            Node::Neg(_) => 3,
            _ => 5,
        }
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Node,
    source: String,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result in `{0}`")]
    Overflow(String),
    #[error("variable `{0}` is not bound")]
    Unbound(&'static str),
}

/// Values for the expression variables. Unset variables are unbound.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings {
    values: [Option<f64>; 6],
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.values[var.index()] = Some(value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.values[var.index()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.values[var.index()]
    }
}

impl Expr {
    /// Parses `src`, accepting only variables listed in `allowed`.
    pub fn parse(src: &str, allowed: &[Var]) -> Result<Expr, ParseError> {
        let tokens = lex(src)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            allowed,
            end: src.len(),
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected `{}`", tok.kind),
            });
        }
        Ok(Expr {
            root,
            source: src.to_string(),
        })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the expression is the literal zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.root, Node::Num(v) if v == 0.0)
    }

    /// True when the expression mentions `var`.
    pub fn uses(&self, var: Var) -> bool {
        fn walk(node: &Node, var: Var) -> bool {
            match node {
                Node::Var(v) => *v == var,
                Node::Num(_) | Node::Pi => false,
                Node::Neg(a) => walk(a, var),
                Node::Bin(_, a, b) => walk(a, var) || walk(b, var),
                Node::Call(_, args) => args.iter().any(|a| walk(a, var)),
            }
        }
        walk(&self.root, var)
    }

    pub fn eval(&self, bindings: &Bindings) -> Result<f64, EvalError> {
        eval_node(&self.root, bindings)
    }

    /// Central difference in `var` with one Richardson extrapolation level.
    ///
    /// The default step is `1e-5 * max(1, |value|)`.
    pub fn numeric_partial(
        &self,
        var: Var,
        bindings: &Bindings,
        step: Option<f64>,
    ) -> Result<f64, EvalError> {
        let centre = bindings.get(var).ok_or(EvalError::Unbound(var.name()))?;
        let h = step.unwrap_or(1e-5 * centre.abs().max(1.0));
        richardson_central(|v| self.eval(&bindings.with(var, v)), centre, h)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root)
    }
}

/// `(4 D(h/2) - D(h)) / 3` where `D` is the symmetric difference quotient.
pub fn richardson_central<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    centre: f64,
    h: f64,
) -> Result<f64, E> {
    let mut diff = |h: f64| -> Result<f64, E> { Ok((f(centre + h)? - f(centre - h)?) / (2.0 * h)) };
    let coarse = diff(h)?;
    let fine = diff(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn checked(value: f64, what: &str) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::Overflow(what.to_string()))
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(EvalError::Domain(format!(
            "negative base {base} with non-integer exponent {exponent}"
        )));
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    let value = if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    };
    checked(value, "^")
}

fn eval_node(node: &Node, b: &Bindings) -> Result<f64, EvalError> {
    match node {
        Node::Num(v) => Ok(*v),
        Node::Pi => Ok(std::f64::consts::PI),
        Node::Var(v) => b.get(*v).ok_or(EvalError::Unbound(v.name())),
        Node::Neg(a) => Ok(-eval_node(a, b)?),
        Node::Bin(op, lhs, rhs) => {
            let l = eval_node(lhs, b)?;
            let r = eval_node(rhs, b)?;
            match op {
                BinOp::Add => checked(l + r, "+"),
                BinOp::Sub => checked(l - r, "-"),
                BinOp::Mul => checked(l * r, "*"),
                BinOp::Div => {
                    if r == 0.0 {
                        Err(EvalError::DivisionByZero)
                    } else {
                        checked(l / r, "/")
                    }
                }
                BinOp::Pow => power(l, r),
            }
        }
        Node::Call(func, args) => {
            let a = eval_node(&args[0], b)?;
            match func {
                Func::Sin => Ok(a.sin()),
                Func::Cos => Ok(a.cos()),
                Func::Exp => checked(a.exp(), "exp"),
                Func::Abs => Ok(a.abs()),
                Func::Sqrt => {
                    if a < 0.0 {
                        Err(EvalError::Domain(format!("sqrt of negative value {a}")))
                    } else {
                        Ok(a.sqrt())
                    }
                }
                Func::Pow => power(a, eval_node(&args[1], b)?),
            }
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, node: &Node, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "(")?;
        write_node(f, node)?;
        write!(f, ")")
    } else {
        write_node(f, node)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node) -> fmt::Result {
    match node {
        Node::Num(v) => write!(f, "{v}"),
        Node::Pi => write!(f, "pi"),
        Node::Var(v) => write!(f, "{}", v.name()),
        Node::Neg(a) => {
            write!(f, "-")?;
            write_child(f, a, a.precedence() < 3)
        }
        Node::Bin(BinOp::Pow, base, exp) => {
            write_child(f, base, base.precedence() <= 4)?;
            write!(f, "^")?;
            write_child(f, exp, exp.precedence() < 3)
        }
        Node::Bin(op, lhs, rhs) => {
            let p = op.precedence();
            write_child(f, lhs, lhs.precedence() < p)?;
            write!(f, "{}", op.symbol())?;
            write_child(f, rhs, rhs.precedence() <= p)
        }
        Node::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write_node(f, a)?;
            }
            write!(f, ")")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "{v}"),
            TokenKind::Ident(s) => write!(f, "{s}"),
            TokenKind::Op(c) => write!(f, "{c}"),
            TokenKind::LParen => write!(f, "("),
            TokenKind::RParen => write!(f, ")"),
            TokenKind::Comma => write!(f, ","),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if c.is_ascii_digit() || c == '.' {
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
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            TokenKind::Num(value)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            TokenKind::Ident(src[start..i].to_string())
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                ',' => TokenKind::Comma,
                _ => {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    allowed: &'a [Var],
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ParseError::Syntax {
                offset: self.offset(),
                message: format!("expected {what}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Node::Neg(Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(ParseError::Syntax {
                offset: self.end,
                message: "unexpected end of input".into(),
            });
        };
        self.pos += 1;
        match tok.kind {
            TokenKind::Num(v) => Ok(Node::Num(v)),
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(TokenKind::LParen, "`(` after function name")?;
                    let mut args = vec![self.expr()?];
                    while matches!(
                        self.peek(),
                        Some(Token {
                            kind: TokenKind::Comma,
                            ..
                        })
                    ) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    if args.len() != func.arity() {
                        return Err(ParseError::Syntax {
                            offset: tok.offset,
                            message: format!(
                                "`{name}` takes {} argument(s), got {}",
                                func.arity(),
                                args.len()
                            ),
                        });
                    }
                    self.expect(TokenKind::RParen, "`)`")?;
                    Ok(Node::Call(func, args))
                } else if name == "pi" {
                    Ok(Node::Pi)
                } else {
                    match Var::from_name(&name) {
                        Some(v) if self.allowed.contains(&v) => Ok(Node::Var(v)),
                        _ => Err(ParseError::UnknownIdentifier {
                            name,
                            offset: tok.offset,
                        }),
                    }
                }
            }
            other => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected `{other}`"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn eval_at(src: &str, var: Var, v: f64) -> Result<f64, EvalError> {
        Expr::parse(src, &Var::ALL)
            .unwrap()
            .eval(&Bindings::new().with(var, v))
    }

    #[test]
    fn sine_coefficient_parses_and_evaluates() {
        let e = Expr::parse("sin(2*pi*t)", &[Var::T]).unwrap();
        let v = e.eval(&Bindings::new().with(Var::T, 0.25)).unwrap();
        assert!((v - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn power_binds_tighter_than_division() {
        let e = Expr::parse("1/l^2", &[Var::L]).unwrap();
        let expected = Node::Bin(
            BinOp::Div,
            Box::new(Node::Num(1.0)),
            Box::new(Node::Bin(
                BinOp::Pow,
                Box::new(Node::Var(Var::L)),
                Box::new(Node::Num(2.0)),
            )),
        );
        assert_eq!(e.root(), &expected);
        assert_eq!(eval_at("1/l^2", Var::L, 2.0).unwrap(), 0.25);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval_at("-2^2", Var::X, 0.0).unwrap(), -4.0);
        assert_eq!(eval_at("2^3^2", Var::X, 0.0).unwrap(), 512.0);
        assert_eq!(eval_at("8-3-2", Var::X, 0.0).unwrap(), 3.0);
        assert_eq!(eval_at("8/4/2", Var::X, 0.0).unwrap(), 1.0);
        assert_eq!(eval_at("2^-1", Var::X, 0.0).unwrap(), 0.5);
        assert_eq!(eval_at("2*-x", Var::X, 3.0).unwrap(), -6.0);
        assert_eq!(eval_at("pow(x, 3) + 1e-1", Var::X, 2.0).unwrap(), 8.1);
    }

    #[test]
    fn malformed_input_reports_offset() {
        let err = Expr::parse("1+*2", &[]).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 2, .. }), "{err}");
        let err = Expr::parse("sin(x", &[Var::X]).unwrap_err();
        assert_eq!(err.offset(), 5);
        assert!(Expr::parse("", &[]).is_err());
        assert!(Expr::parse("1 2", &[]).is_err());
        assert!(Expr::parse("pow(1)", &[]).is_err());
        assert!(Expr::parse("3 $ 4", &[]).is_err());
    }

    #[test]
    fn unknown_or_disallowed_identifiers() {
        let err = Expr::parse("foo + 1", &Var::ALL).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "foo".into(),
                offset: 0
            }
        );
        let err = Expr::parse("x + th", &[Var::X]).unwrap_err();
        assert!(matches!(
            err,
            ParseError::UnknownIdentifier { offset: 4, .. }
        ));
    }

    #[test]
    fn domain_errors_are_reported() {
        assert!(matches!(
            eval_at("sqrt(x)", Var::X, -1.0),
            Err(EvalError::Domain(_))
        ));
        assert_eq!(eval_at("1/x", Var::X, 0.0), Err(EvalError::DivisionByZero));
        assert!(matches!(
            eval_at("x^0.5", Var::X, -2.0),
            Err(EvalError::Domain(_))
        ));
        assert_eq!(eval_at("x^-1", Var::X, 0.0), Err(EvalError::DivisionByZero));
        assert!(matches!(
            eval_at("exp(x)", Var::X, 1000.0),
            Err(EvalError::Overflow(_))
        ));
        assert_eq!(eval_at("x^3", Var::X, -2.0).unwrap(), -8.0);
        let e = Expr::parse("x + y", &Var::ALL).unwrap();
        assert_eq!(
            e.eval(&Bindings::new().with(Var::X, 1.0)),
            Err(EvalError::Unbound("y"))
        );
    }

    #[test]
    fn numeric_partials() {
        let b = |v, x| Bindings::new().with(v, x);
        let e = Expr::parse("x^2", &[Var::X]).unwrap();
        assert!((e.numeric_partial(Var::X, &b(Var::X, 3.0), None).unwrap() - 6.0).abs() < 1e-8);
        let e = Expr::parse("sin(2*pi*t)", &[Var::T]).unwrap();
        let d = e.numeric_partial(Var::T, &b(Var::T, 0.0), None).unwrap();
        assert!((d - 2.0 * PI).abs() < 1e-7);
        let e = Expr::parse("1/l^2", &[Var::L]).unwrap();
        let d = e.numeric_partial(Var::L, &b(Var::L, 2.0), None).unwrap();
        assert!((d + 0.25).abs() < 1e-8);
    }

    #[test]
    fn numeric_partial_matches_exact_derivatives() {
        // (expression, exact derivative in x)
        let corpus: [(&str, fn(f64) -> f64); 6] = [
            ("x^5 - 3*x^2 + 7", |x| 5.0 * x.powi(4) - 6.0 * x),
            ("sin(3*x)", |x| 3.0 * (3.0 * x).cos()),
            ("cos(x)^2", |x| -2.0 * x.cos() * x.sin()),
            ("exp(-x^2)", |x| -2.0 * x * (-x * x).exp()),
            ("x*sin(x) + sqrt(1+x^2)", |x| {
                x.sin() + x * x.cos() + x / (1.0 + x * x).sqrt()
            }),
            ("pow(x, 7)/100", |x| 7.0 * x.powi(6) / 100.0),
        ];
        for (src, exact) in corpus {
            let e = Expr::parse(src, &[Var::X]).unwrap();
            for &x in &[-2.3, -0.7, 0.4, 1.1, 3.9] {
                let d = e
                    .numeric_partial(Var::X, &Bindings::new().with(Var::X, x), None)
                    .unwrap();
                let want = exact(x);
                assert!(
                    (d - want).abs() <= 1e-7 * want.abs().max(1.0),
                    "{src} at {x}: {d} vs {want}"
                );
            }
        }
    }

    #[test]
    fn printing_keeps_structure() {
        for src in [
            "-(x+1)^2", "(x^2)^3", "a", "x-(y-t)", "x/(y*t)", "-x^-2", "2^(1+x)",
        ] {
            let Ok(e) = Expr::parse(src, &Var::ALL) else {
                continue;
            };
            let again = Expr::parse(&e.to_string(), &Var::ALL).unwrap();
            assert_eq!(e, again, "{src} printed as {e}");
        }
        assert_eq!(
            Expr::parse("x - (y - t)", &Var::ALL).unwrap().to_string(),
            "x-(y-t)"
        );
    }

    #[test]
    fn uses_and_zero_detection() {
        let e = Expr::parse("0", &[]).unwrap();
        assert!(e.is_zero());
        let e = Expr::parse("1/l^2 + n", &[Var::L, Var::N]).unwrap();
        assert!(e.uses(Var::L) && e.uses(Var::N) && !e.uses(Var::X));
    }
}
