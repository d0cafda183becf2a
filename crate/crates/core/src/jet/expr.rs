//! Small expression language for potentials, Gram entries and transition maps.

use std::fmt;

use super::{C64, Jet, JetContext};
use crate::error::{Error, Result};

/// Symbol an expression can be differentiated against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sym {
    Unknown,
    Var(usize),
    ConjVar(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(C64),
    /// Holomorphic coordinate `z_j` (zero-based).
    Var(usize),
    /// Antiholomorphic coordinate `zbar_j`.
    ConjVar(usize),
    /// The unknown of an implicit equation.
    Unknown,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Powi(Box<Expr>, i32),
    Powf(Box<Expr>, f64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Conj(Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if c.im == 0.0 => write!(f, "{}", c.re),
            Expr::Const(c) => write!(f, "({}+{}*i)", c.re, c.im),
            Expr::Var(j) => write!(f, "z{}", j + 1),
            Expr::ConjVar(j) => write!(f, "zb{}", j + 1),
            Expr::Unknown => write!(f, "u"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => write!(f, "{a}/({b})"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Powi(a, k) => write!(f, "({a})^{k}"),
            Expr::Powf(a, r) => write!(f, "({a})^{r}"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Conj(a) => write!(f, "conj({a})"),
        }
    }
}

fn bx(e: Expr) -> Box<Expr> {
    Box::new(e)
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!("unexpected trailing input in `{src}`")));
        }
        Ok(e)
    }

    pub fn real(c: f64) -> Expr {
        Expr::Const(C64::new(c, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.re == 0.0 && c.im == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.re == 1.0 && c.im == 0.0)
    }

    /// Largest variable index mentioned plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Var(j) | Expr::ConjVar(j) => j + 1,
            Expr::Const(_) | Expr::Unknown => 0,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
            Expr::Neg(a)
            | Expr::Powi(a, _)
            | Expr::Powf(a, _)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Conj(a) => a.arity(),
        }
    }

    pub fn mentions_unknown(&self) -> bool {
        match self {
            Expr::Unknown => true,
            Expr::Const(_) | Expr::Var(_) | Expr::ConjVar(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.mentions_unknown() || b.mentions_unknown()
            }
            Expr::Neg(a)
            | Expr::Powi(a, _)
            | Expr::Powf(a, _)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Conj(a) => a.mentions_unknown(),
        }
    }

    /// Evaluates on jets: `vars[j]` is the jet of `z_j`, `unknown` the jet of `u`.
    pub fn eval_jet(&self, vars: &[Jet], unknown: Option<&Jet>) -> Result<Jet> {
        let ctx = vars
            .first()
            .map(|v| v.context().clone())
            .or_else(|| unknown.map(|u| u.context().clone()))
            .ok_or_else(|| Error::ContextMismatch("expression evaluated without variables".into()))?;
        let conj: Vec<Jet> = vars.iter().map(|v| v.conj()).collect();
        self.eval_inner(&ctx, vars, &conj, unknown)
    }

    fn eval_inner(&self, ctx: &JetContext, v: &[Jet], cv: &[Jet], u: Option<&Jet>) -> Result<Jet> {
        let var = |j: usize, set: &[Jet]| {
            set.get(j).cloned().ok_or_else(|| {
                Error::ContextMismatch(format!("variable z{} not available ({} given)", j + 1, set.len()))
            })
        };
        Ok(match self {
            Expr::Const(c) => Jet::constant(ctx, *c),
            Expr::Var(j) => var(*j, v)?,
            Expr::ConjVar(j) => var(*j, cv)?,
            Expr::Unknown => u
                .cloned()
                .ok_or_else(|| Error::Parse("unknown `u` used outside an implicit equation".into()))?,
            Expr::Add(a, b) => a.eval_inner(ctx, v, cv, u)? + b.eval_inner(ctx, v, cv, u)?,
            Expr::Sub(a, b) => a.eval_inner(ctx, v, cv, u)? - b.eval_inner(ctx, v, cv, u)?,
            Expr::Mul(a, b) => a.eval_inner(ctx, v, cv, u)? * b.eval_inner(ctx, v, cv, u)?,
            Expr::Div(a, b) => a.eval_inner(ctx, v, cv, u)?.div(&b.eval_inner(ctx, v, cv, u)?)?,
            Expr::Neg(a) => -a.eval_inner(ctx, v, cv, u)?,
            Expr::Powi(a, k) => a.eval_inner(ctx, v, cv, u)?.powi(*k)?,
            Expr::Powf(a, r) => a.eval_inner(ctx, v, cv, u)?.powf(*r)?,
            Expr::Exp(a) => a.eval_inner(ctx, v, cv, u)?.exp(),
            Expr::Log(a) => a.eval_inner(ctx, v, cv, u)?.ln()?,
            Expr::Conj(a) => a.eval_inner(ctx, v, cv, u)?.conj(),
        })
    }

    /// Numeric evaluation; `zbar` is supplied independently so that
    /// Wirtinger finite differences can perturb the two slots separately.
    pub fn eval_value(&self, z: &[C64], zbar: &[C64], u: Option<C64>) -> Result<C64> {
        let get = |j: usize, set: &[C64]| {
            set.get(j).copied().ok_or_else(|| {
                Error::ContextMismatch(format!("variable z{} not available", j + 1))
            })
        };
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(j) => get(*j, z)?,
            Expr::ConjVar(j) => get(*j, zbar)?,
            Expr::Unknown => u.ok_or_else(|| Error::Parse("unknown `u` without a value".into()))?,
            Expr::Add(a, b) => a.eval_value(z, zbar, u)? + b.eval_value(z, zbar, u)?,
            Expr::Sub(a, b) => a.eval_value(z, zbar, u)? - b.eval_value(z, zbar, u)?,
            Expr::Mul(a, b) => a.eval_value(z, zbar, u)? * b.eval_value(z, zbar, u)?,
            Expr::Div(a, b) => {
                let d = b.eval_value(z, zbar, u)?;
                if d.norm() == 0.0 {
                    return Err(Error::DivisionByZeroJet);
                }
                a.eval_value(z, zbar, u)? / d
            }
            Expr::Neg(a) => -a.eval_value(z, zbar, u)?,
            Expr::Powi(a, k) => a.eval_value(z, zbar, u)?.powi(*k),
            Expr::Powf(a, r) => {
                let x = a.eval_value(z, zbar, u)?;
                if x.re <= 0.0 {
                    return Err(Error::Domain(format!("non-integer power of {x}")));
                }
                x.powf(*r)
            }
            Expr::Exp(a) => a.eval_value(z, zbar, u)?.exp(),
            Expr::Log(a) => {
                let x = a.eval_value(z, zbar, u)?;
                if x.norm() == 0.0 {
                    return Err(Error::SingularArgument("log argument"));
                }
                x.ln()
            }
            // With independent slots, conj swaps them.
            Expr::Conj(a) => {
                let zc: Vec<C64> = zbar.iter().map(|x| x.conj()).collect();
                let zbc: Vec<C64> = z.iter().map(|x| x.conj()).collect();
                a.eval_value(&zc, &zbc, u.map(|x| x.conj()))?.conj()
            }
        })
    }

    /// Symbolic derivative with light simplification.
    pub fn diff(&self, s: Sym) -> Expr {
        use Expr::*;
        match self {
            Const(_) => Expr::real(0.0),
            Var(j) => Expr::real(if s == Sym::Var(*j) { 1.0 } else { 0.0 }),
            ConjVar(j) => Expr::real(if s == Sym::ConjVar(*j) { 1.0 } else { 0.0 }),
            Unknown => Expr::real(if s == Sym::Unknown { 1.0 } else { 0.0 }),
            Add(a, b) => add(a.diff(s), b.diff(s)),
            Sub(a, b) => sub(a.diff(s), b.diff(s)),
            Mul(a, b) => add(mul(a.diff(s), (**b).clone()), mul((**a).clone(), b.diff(s))),
            Div(a, b) => {
                let num = sub(mul(a.diff(s), (**b).clone()), mul((**a).clone(), b.diff(s)));
                if num.is_zero() {
                    num
                } else {
                    Div(bx(num), bx(Powi(b.clone(), 2)))
                }
            }
            Neg(a) => {
                let d = a.diff(s);
                if d.is_zero() { d } else { Neg(bx(d)) }
            }
            Powi(a, k) => {
                let d = a.diff(s);
                let outer = if *k == 1 {
                    Expr::real(1.0)
                } else {
                    mul(Expr::real(*k as f64), Powi(a.clone(), k - 1))
                };
                mul(outer, d)
            }
            Powf(a, r) => mul(mul(Expr::real(*r), Powf(a.clone(), r - 1.0)), a.diff(s)),
            Exp(a) => mul(self.clone(), a.diff(s)),
            Log(a) => {
                let d = a.diff(s);
                if d.is_zero() { d } else { Div(bx(d), a.clone()) }
            }
            Conj(a) => {
                // d/dz conj(g) = conj(d g / d zbar), and so on.
                let dual = match s {
                    Sym::Var(j) => Sym::ConjVar(j),
                    Sym::ConjVar(j) => Sym::Var(j),
                    // The unknown of an implicit equation is a real field.
                    Sym::Unknown => Sym::Unknown,
                };
                let d = a.diff(dual);
                if d.is_zero() { d } else { Conj(bx(d)) }
            }
        }
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        b
    } else if b.is_zero() {
        a
    } else {
        Expr::Add(bx(a), bx(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_zero() {
        a
    } else if a.is_zero() {
        Expr::Neg(bx(b))
    } else {
        Expr::Sub(bx(a), bx(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_zero() || b.is_zero() {
        Expr::real(0.0)
    } else if a.is_one() {
        b
    } else if b.is_one() {
        a
    } else {
        Expr::Mul(bx(a), bx(b))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
            out.push(Tok::Num(v));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(ch) {
            out.push(Tok::Op(ch));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character `{ch}` in `{src}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(Error::Parse(format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(bx(lhs), bx(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(bx(lhs), bx(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(bx(lhs), bx(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(bx(lhs), bx(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(bx(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let exponent = self.unary()?;
        let k = exponent
            .eval_value(&[], &[], None)
            .map_err(|_| Error::Parse(format!("exponent `{exponent}` must be a real constant")))?;
        if k.im != 0.0 {
            return Err(Error::Parse(format!("complex exponent `{exponent}`")));
        }
        let r = k.re;
        if r.fract() == 0.0 && r.abs() <= 64.0 {
            Ok(Expr::Powi(bx(base), r as i32))
        } else {
            Ok(Expr::Powf(bx(base), r))
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.peek().cloned().ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::real(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(c) => Err(Error::Parse(format!("unexpected `{c}`"))),
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::Op('(')) {
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return match name.as_str() {
                        "exp" => Ok(Expr::Exp(bx(arg))),
                        "log" | "ln" => Ok(Expr::Log(bx(arg))),
                        "sqrt" => Ok(Expr::Powf(bx(arg), 0.5)),
                        "conj" => Ok(Expr::Conj(bx(arg))),
                        "abs2" => Ok(Expr::Mul(bx(arg.clone()), bx(Expr::Conj(bx(arg))))),
                        _ => Err(Error::Parse(format!("unknown function `{name}`"))),
                    };
                }
                ident(&name)
            }
        }
    }
}

fn ident(name: &str) -> Result<Expr> {
    match name {
        "i" => return Ok(Expr::Const(C64::new(0.0, 1.0))),
        "pi" => return Ok(Expr::real(std::f64::consts::PI)),
        "u" => return Ok(Expr::Unknown),
        "z" | "w" => return Ok(Expr::Var(0)),
        "zb" | "wb" => return Ok(Expr::ConjVar(0)),
        _ => {}
    }
    for (prefix, conj) in [("zb", true), ("wb", true), ("z", false), ("w", false)] {
        if let Some(rest) = name.strip_prefix(prefix) {
            if let Ok(k) = rest.parse::<usize>() {
                if (1..=super::MAX_PAIRS).contains(&k) {
                    return Ok(if conj { Expr::ConjVar(k - 1) } else { Expr::Var(k - 1) });
                }
            }
        }
    }
    Err(Error::Parse(format!("unknown identifier `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("0.5*log(1 + z1*zb1 + 2*z2*zb2) - i*z1^2").unwrap();
        let z = [v(0.3, 0.1), v(-0.2, 0.4)];
        let zb: Vec<C64> = z.iter().map(|x| x.conj()).collect();
        let expected = 0.5 * (1.0 + z[0].norm_sqr() + 2.0 * z[1].norm_sqr()).ln() - v(0.0, 1.0) * z[0] * z[0];
        assert!((e.eval_value(&z, &zb, None).unwrap() - expected).norm() < 1e-15);
        assert_eq!(e.arity(), 2);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("z1 +").is_err());
        assert!(Expr::parse("foo(z1)").is_err());
        assert!(Expr::parse("z7").is_err());
        assert!(Expr::parse("z^z").is_err());
    }

    #[test]
    fn symbolic_derivative_matches_jet() {
        let e = Expr::parse("u^2 + exp(u)*z*zb - 1").unwrap();
        let du = e.diff(Sym::Unknown);
        let z = [v(0.2, -0.1)];
        let zb = [z[0].conj()];
        let u0 = v(0.7, 0.0);
        let h = 1e-6;
        let fd = (e.eval_value(&z, &zb, Some(u0 + h)).unwrap() - e.eval_value(&z, &zb, Some(u0 - h)).unwrap()) / (2.0 * h);
        assert!((du.eval_value(&z, &zb, Some(u0)).unwrap() - fd).norm() < 1e-8);
    }

    #[test]
    fn conj_derivative() {
        let e = Expr::parse("conj(z^2*zb)").unwrap(); // = zb^2 z
        let d = e.diff(Sym::Var(0));
        let z = [v(0.4, 0.3)];
        let zb = [z[0].conj()];
        let expected = zb[0] * zb[0];
        assert!((d.eval_value(&z, &zb, None).unwrap() - expected).norm() < 1e-15);
    }

    #[test]
    fn jet_evaluation_agrees_with_values() {
        let e = Expr::parse("sqrt(1 + z1*zb1)/(2 - z2)").unwrap();
        let ctx = JetContext::new(2, 3).unwrap();
        let base = [v(0.1, 0.2), v(0.3, -0.1)];
        let vars = Jet::variables(&ctx, &base);
        let j = e.eval_jet(&vars, None).unwrap();
        let zb: Vec<C64> = base.iter().map(|x| x.conj()).collect();
        assert!((j.value() - e.eval_value(&base, &zb, None).unwrap()).norm() < 1e-15);
    }
}
