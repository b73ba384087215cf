//! Text grammar and printers for tensor expressions and graded symbols.
//!
//! A source file is a sequence of declarations followed by either one
//! expression or one `symbol` block:
//!
//! ```text
//! bundle E                      # declare a bundle identifier
//! sym u [^^E __E] phase         # declare a symbol head and its slot kinds
//! (-1) * eps^-2 * g_inv[^m ^n] * p[_m] * p[_n]
//! ```
//!
//! Expressions are sums of terms joined by `+` or `-`; a term is a
//! `*`-separated product of coefficient literals (`p/q`, `i`, `eps^k`,
//! `gamma^k`) and factors `Head[slots]`. Slot marks: `^m` upper coordinate,
//! `_m` lower coordinate, `^^A` / `__A` upper and lower bundle frame. A `;`
//! inside the brackets separates base slots from covariant derivative
//! slots. `H(_m, e)` and `V(^m, e)` apply the horizontal and vertical
//! derivatives to a subexpression. Built-in heads: `g`, `g_inv`, `delta`,
//! `p`, `Riemann`, `Ricci`, `R`, `dim`, `F(E)`, `id(E)`, `Gamma(E)`;
//! `F(coT)` names the cotangent realization. A `+` directly after a head
//! name marks the adjoint flag, as in `Gamma+(E)` or `u+`. Any head that
//! is not built in must be declared with `sym` before use; declared names
//! may reuse `F`, `id`, and `Gamma`, since the built-in form is always
//! followed by a parenthesized bundle.
//!
//! A `symbol` block declares operator wiring and per-grade components:
//!
//! ```text
//! symbol wave [] -> []
//! grade -2: (-1) * g_inv[^m ^n] * p[_m] * p[_n]
//! grade 0: 1/3 * gamma * R[]
//! ```
//!
//! Codomain legs sit in the left bracket (`_a` coordinate, `^^E:x`
//! bundle), domain legs in the right (`^b`, `__E:y`). Grade components
//! are eps-free; the grade index carries the eps power.
//!
//! Printing supports three formats. Canonical text reparses to the same
//! value modulo `canonicalize`, and is a byte fixed point on already
//! canonical input. LaTeX places horizontal derivative slots low and
//! vertical ones high. JSON is a versioned one-to-one encoding of the
//! term list.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::coeff::{Coefficient, GammaPoly, Rational};
use crate::expr::{hderiv, vderiv, ExprError, TensorExpr, Term};
use crate::factor::TensorFactor;
use crate::head::{GenericHead, Head, SlotSig, SlotSym};
use crate::index::{BundleId, IndexKind, IndexSlot, Label, Variance, COTANGENT};
use crate::symbol::{GradedSymbol, Signature, Wiring};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LangError {
    /// Byte offset of the offending token plus what was expected there.
    Syntax { pos: usize, msg: String },
    UnknownHead { pos: usize, name: String },
    Arity { pos: usize, head: String, expected: usize, got: usize },
    Variance { pos: usize, msg: String },
    /// A label occurs twice with the same variance, or more than twice.
    Unbalanced { pos: usize, label: Label },
}

impl fmt::Display for LangError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LangError::Syntax { pos, msg } => write!(f, "syntax error at byte {pos}: {msg}"),
            LangError::UnknownHead { pos, name } => {
                write!(f, "unknown head `{name}` at byte {pos}; declare it with `sym` first")
            }
            LangError::Arity { pos, head, expected, got } => {
                write!(f, "arity error at byte {pos}: {head} takes {expected} slots, got {got}")
            }
            LangError::Variance { pos, msg } => write!(f, "variance error at byte {pos}: {msg}"),
            LangError::Unbalanced { pos, label } => {
                write!(f, "unbalanced index `{label}` at byte {pos}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Parsed {
    Expr(TensorExpr),
    Symbol { name: String, symbol: GradedSymbol },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    CanonicalText,
    Latex,
    Json,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    CaretCaret,
    Under,
    UnderUnder,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Semi,
    Colon,
    Comma,
    Arrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(s) => format!("number `{s}`"),
            Tok::Plus => "`+`".to_string(),
            Tok::Minus => "`-`".to_string(),
            Tok::Star => "`*`".to_string(),
            Tok::Slash => "`/`".to_string(),
            Tok::Caret => "`^`".to_string(),
            Tok::CaretCaret => "`^^`".to_string(),
            Tok::Under => "`_`".to_string(),
            Tok::UnderUnder => "`__`".to_string(),
            Tok::LBracket => "`[`".to_string(),
            Tok::RBracket => "`]`".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::Semi => "`;`".to_string(),
            Tok::Colon => "`:`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Arrow => "`->`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, LangError> {
    let cs: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let (pos, c) = cs[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < cs.len() && cs[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() {
            let mut s = String::new();
            while i < cs.len() && (cs[i].1.is_ascii_alphanumeric() || cs[i].1 == '_') {
                s.push(cs[i].1);
                i += 1;
            }
            out.push((pos, Tok::Ident(s)));
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < cs.len() && cs[i].1.is_ascii_digit() {
                s.push(cs[i].1);
                i += 1;
            }
            out.push((pos, Tok::Int(s)));
            continue;
        }
        let two = |ch: char| i + 1 < cs.len() && cs[i + 1].1 == ch;
        let tok = match c {
            '+' => Tok::Plus,
            '-' if two('>') => {
                i += 1;
                Tok::Arrow
            }
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' if two('^') => {
                i += 1;
                Tok::CaretCaret
            }
            '^' => Tok::Caret,
            '_' if two('_') => {
                i += 1;
                Tok::UnderUnder
            }
            '_' => Tok::Under,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            other => {
                return Err(LangError::Syntax {
                    pos,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((pos, tok));
        i += 1;
    }
    out.push((src.len(), Tok::Eof));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

/// Names a `sym` declaration may not take. The parameterized built-ins
/// `F`, `id`, and `Gamma` are declarable because their built-in use is
/// always followed by a parenthesized bundle, which keeps parsing LL(1).
const RESERVED: &[&str] = &[
    "i", "eps", "gamma", "H", "V", "bundle", "sym", "symbol", "grade", "phase", "const",
    "sympair", "g", "g_inv", "delta", "p", "Riemann", "Ricci", "R", "dim",
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    Up,
    Down,
    BundleUp,
    BundleDown,
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
    bundles: BTreeSet<BundleId>,
    syms: BTreeMap<String, GenericHead>,
}

pub fn parse(src: &str) -> Result<Parsed, LangError> {
    let toks = lex(src)?;
    Parser { toks, i: 0, bundles: BTreeSet::new(), syms: BTreeMap::new() }.file()
}

/// Parses a source that must contain a bare expression.
pub fn parse_expr(src: &str) -> Result<TensorExpr, LangError> {
    match parse(src)? {
        Parsed::Expr(e) => Ok(e),
        Parsed::Symbol { .. } => {
            Err(LangError::Syntax { pos: 0, msg: "expected an expression, found a symbol block".to_string() })
        }
    }
}

/// Parses a source that must contain a `symbol` block.
pub fn parse_symbol(src: &str) -> Result<(String, GradedSymbol), LangError> {
    match parse(src)? {
        Parsed::Symbol { name, symbol } => Ok((name, symbol)),
        Parsed::Expr(_) => {
            Err(LangError::Syntax { pos: 0, msg: "expected a symbol block, found an expression".to_string() })
        }
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].1
    }

    fn pos(&self) -> usize {
        self.toks[self.i].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].1.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<(), LangError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(LangError::Syntax {
                pos: self.pos(),
                msg: format!("expected {}, found {}", t.describe(), self.peek().describe()),
            })
        }
    }

    fn ident(&mut self) -> Result<(usize, String), LangError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Ident(s) => Ok((pos, s)),
            other => Err(LangError::Syntax {
                pos,
                msg: format!("expected an identifier, found {}", other.describe()),
            }),
        }
    }

    fn int(&mut self) -> Result<(usize, String), LangError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Int(s) => Ok((pos, s)),
            other => Err(LangError::Syntax {
                pos,
                msg: format!("expected a number, found {}", other.describe()),
            }),
        }
    }

    fn signed_small_int(&mut self) -> Result<(usize, i32), LangError> {
        let neg = self.eat(&Tok::Minus);
        let (pos, s) = self.int()?;
        let v: i32 = s
            .parse()
            .map_err(|_| LangError::Syntax { pos, msg: format!("number `{s}` out of range") })?;
        Ok((pos, if neg { -v } else { v }))
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn file(&mut self) -> Result<Parsed, LangError> {
        loop {
            if self.at_kw("bundle") {
                self.decl_bundle()?;
            } else if self.at_kw("sym") {
                self.decl_sym()?;
            } else {
                break;
            }
        }
        if self.at_kw("symbol") {
            let (name, symbol) = self.symbol_block()?;
            self.expect(&Tok::Eof)?;
            return Ok(Parsed::Symbol { name, symbol });
        }
        if *self.peek() == Tok::Eof {
            return Err(LangError::Syntax {
                pos: self.pos(),
                msg: "expected an expression or a symbol block".to_string(),
            });
        }
        let start = self.pos();
        let e = self.sum()?;
        self.expect(&Tok::Eof)?;
        validate_balance(&e, start)?;
        if let Err(err) = e.free_signature() {
            return Err(map_expr_err(err, start));
        }
        Ok(Parsed::Expr(e))
    }

    fn decl_bundle(&mut self) -> Result<(), LangError> {
        self.bump();
        let (pos, id) = self.ident()?;
        if !self.bundles.insert(id.clone()) {
            return Err(LangError::Syntax { pos, msg: format!("bundle `{id}` already declared") });
        }
        Ok(())
    }

    fn known_bundle(&self, pos: usize, id: &str) -> Result<(), LangError> {
        if id == COTANGENT || self.bundles.contains(id) {
            Ok(())
        } else {
            Err(LangError::Syntax { pos, msg: format!("undeclared bundle `{id}`") })
        }
    }

    fn decl_sym(&mut self) -> Result<(), LangError> {
        self.bump();
        let (npos, name) = self.ident()?;
        if RESERVED.contains(&name.as_str()) {
            return Err(LangError::Syntax {
                pos: npos,
                msg: format!("`{name}` is reserved and cannot be declared"),
            });
        }
        if self.syms.contains_key(&name) {
            return Err(LangError::Syntax { pos: npos, msg: format!("`{name}` already declared") });
        }
        self.expect(&Tok::LBracket)?;
        let mut sig = Vec::new();
        while *self.peek() != Tok::RBracket {
            let (mark, _mpos) = self.mark()?;
            let (ipos, id) = self.ident()?;
            sig.push(match mark {
                Mark::Up => SlotSig::coord(Variance::Up),
                Mark::Down => SlotSig::coord(Variance::Down),
                Mark::BundleUp | Mark::BundleDown => {
                    self.known_bundle(ipos, &id)?;
                    let v = if mark == Mark::BundleUp { Variance::Up } else { Variance::Down };
                    SlotSig::bundle(v, id)
                }
            });
        }
        self.bump();
        let mut head = GenericHead::position(name.clone(), sig);
        loop {
            if self.at_kw("phase") {
                self.bump();
                head.phase = true;
            } else if self.at_kw("const") {
                self.bump();
                head.constant = true;
            } else if self.at_kw("sympair") {
                self.bump();
                self.expect(&Tok::LParen)?;
                let (apos, a) = self.signed_small_int()?;
                self.expect(&Tok::Comma)?;
                let (_, b) = self.signed_small_int()?;
                self.expect(&Tok::Comma)?;
                let (spos, s) = self.signed_small_int()?;
                self.expect(&Tok::RParen)?;
                let n = head.sig.len() as i32;
                if a < 0 || b < 0 || a >= n || b >= n {
                    return Err(LangError::Syntax {
                        pos: apos,
                        msg: "sympair positions out of range".to_string(),
                    });
                }
                if s != 1 && s != -1 {
                    return Err(LangError::Syntax {
                        pos: spos,
                        msg: "sympair sign must be 1 or -1".to_string(),
                    });
                }
                head.syms.push(SlotSym { a: a as usize, b: b as usize, sign: s as i8 });
            } else {
                break;
            }
        }
        self.syms.insert(name, head);
        Ok(())
    }

    fn mark(&mut self) -> Result<(Mark, usize), LangError> {
        let pos = self.pos();
        let m = match self.bump() {
            Tok::Caret => Mark::Up,
            Tok::Under => Mark::Down,
            Tok::CaretCaret => Mark::BundleUp,
            Tok::UnderUnder => Mark::BundleDown,
            other => {
                return Err(LangError::Syntax {
                    pos,
                    msg: format!("expected a slot mark, found {}", other.describe()),
                })
            }
        };
        Ok((m, pos))
    }

    fn symbol_block(&mut self) -> Result<(String, GradedSymbol), LangError> {
        self.bump();
        let (_, name) = self.ident()?;
        self.expect(&Tok::LBracket)?;
        let cod = self.wiring(true)?;
        self.expect(&Tok::RBracket)?;
        self.expect(&Tok::Arrow)?;
        self.expect(&Tok::LBracket)?;
        let dom = self.wiring(false)?;
        self.expect(&Tok::RBracket)?;
        let sig = Signature { dom, cod };
        let mut sym = GradedSymbol::new(sig);
        while self.at_kw("grade") {
            self.bump();
            let (_, g) = self.signed_small_int()?;
            self.expect(&Tok::Colon)?;
            let epos = self.pos();
            let e = self.sum()?;
            validate_balance(&e, epos)?;
            sym.insert_component(g, &e).map_err(|err| map_expr_err(err, epos))?;
        }
        Ok((name, sym))
    }

    /// Parses one wiring bracket. Codomain coordinate legs are lower and
    /// carry an upper bundle frame; the domain is the mirror image.
    fn wiring(&mut self, cod: bool) -> Result<Wiring, LangError> {
        let mut w = Wiring::trivial();
        while *self.peek() != Tok::RBracket {
            let (mark, mpos) = self.mark()?;
            match mark {
                Mark::Up | Mark::Down => {
                    let want = if cod { Mark::Down } else { Mark::Up };
                    if mark != want {
                        return Err(LangError::Variance {
                            pos: mpos,
                            msg: if cod {
                                "codomain coordinate legs are lower".to_string()
                            } else {
                                "domain coordinate legs are upper".to_string()
                            },
                        });
                    }
                    let (_, l) = self.ident()?;
                    w.coords.push(l);
                }
                Mark::BundleUp | Mark::BundleDown => {
                    let want = if cod { Mark::BundleUp } else { Mark::BundleDown };
                    if mark != want {
                        return Err(LangError::Variance {
                            pos: mpos,
                            msg: if cod {
                                "codomain bundle legs are upper".to_string()
                            } else {
                                "domain bundle legs are lower".to_string()
                            },
                        });
                    }
                    let (ipos, id) = self.ident()?;
                    self.known_bundle(ipos, &id)?;
                    self.expect(&Tok::Colon)?;
                    let (_, l) = self.ident()?;
                    if w.bundle.is_some() {
                        return Err(LangError::Syntax {
                            pos: ipos,
                            msg: "a wiring side carries at most one bundle leg".to_string(),
                        });
                    }
                    w.bundle = Some((id, l));
                }
            }
        }
        Ok(w)
    }

    fn sum(&mut self) -> Result<TensorExpr, LangError> {
        let mut acc = TensorExpr::zero();
        let mut neg = self.eat(&Tok::Minus);
        loop {
            let t = self.term()?;
            acc = if neg { acc.sub(&t) } else { acc.add(&t) };
            if self.eat(&Tok::Plus) {
                neg = false;
            } else if self.eat(&Tok::Minus) {
                neg = true;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<TensorExpr, LangError> {
        let mut acc = TensorExpr::one();
        loop {
            let a = self.atom()?;
            acc = acc.mul(&a);
            if !self.eat(&Tok::Star) {
                return Ok(acc);
            }
        }
    }

    fn atom(&mut self) -> Result<TensorExpr, LangError> {
        match self.peek().clone() {
            Tok::Int(_) => {
                let c = self.rational(false)?;
                Ok(TensorExpr::scalar(c))
            }
            Tok::Minus => {
                self.bump();
                let c = self.rational(true)?;
                Ok(TensorExpr::scalar(c))
            }
            Tok::LParen => {
                self.bump();
                let neg = self.eat(&Tok::Minus);
                let c = self.rational(neg)?;
                self.expect(&Tok::RParen)?;
                Ok(TensorExpr::scalar(c))
            }
            Tok::Ident(name) => {
                let pos = self.pos();
                self.bump();
                self.ident_atom(pos, &name)
            }
            other => Err(LangError::Syntax {
                pos: self.pos(),
                msg: format!("expected a coefficient or factor, found {}", other.describe()),
            }),
        }
    }

    fn rational(&mut self, neg: bool) -> Result<Coefficient, LangError> {
        let (npos, ns) = self.int()?;
        let num = BigInt::from_str(&ns)
            .map_err(|_| LangError::Syntax { pos: npos, msg: "bad integer".to_string() })?;
        let den = if self.eat(&Tok::Slash) {
            let (dpos, ds) = self.int()?;
            let d = BigInt::from_str(&ds)
                .map_err(|_| LangError::Syntax { pos: dpos, msg: "bad integer".to_string() })?;
            if d.is_zero() {
                return Err(LangError::Syntax { pos: dpos, msg: "zero denominator".to_string() });
            }
            d
        } else {
            BigInt::one()
        };
        let q = Rational::new(if neg { -num } else { num }, den);
        Ok(Coefficient::from_rational(q))
    }

    fn ident_atom(&mut self, pos: usize, name: &str) -> Result<TensorExpr, LangError> {
        match name {
            "i" => return Ok(TensorExpr::scalar(Coefficient::i())),
            "eps" => {
                let k = if self.eat(&Tok::Caret) { self.signed_small_int()?.1 } else { 1 };
                return Ok(TensorExpr::scalar(Coefficient::eps_pow(k)));
            }
            "gamma" => {
                let k = if self.eat(&Tok::Caret) {
                    let (kpos, k) = self.signed_small_int()?;
                    if k < 0 {
                        return Err(LangError::Syntax {
                            pos: kpos,
                            msg: "gamma exponent must be nonnegative".to_string(),
                        });
                    }
                    k as u32
                } else {
                    1
                };
                return Ok(TensorExpr::scalar(Coefficient::gamma_pow(k)));
            }
            "H" => {
                self.expect(&Tok::LParen)?;
                let (m, mpos) = self.mark()?;
                if m != Mark::Down {
                    return Err(LangError::Variance {
                        pos: mpos,
                        msg: "horizontal derivative slots are lower coordinate".to_string(),
                    });
                }
                let (_, l) = self.ident()?;
                self.expect(&Tok::Comma)?;
                let e = self.sum()?;
                self.expect(&Tok::RParen)?;
                return Ok(hderiv(&e, &l));
            }
            "V" => {
                self.expect(&Tok::LParen)?;
                let (m, mpos) = self.mark()?;
                if m != Mark::Up {
                    return Err(LangError::Variance {
                        pos: mpos,
                        msg: "vertical derivative slots are upper coordinate".to_string(),
                    });
                }
                let (_, l) = self.ident()?;
                self.expect(&Tok::Comma)?;
                let e = self.sum()?;
                self.expect(&Tok::RParen)?;
                return Ok(vderiv(&e, &l));
            }
            _ => {}
        }
        let head = self.head_for(pos, name)?;
        let f = self.factor_body(pos, head)?;
        Ok(TensorExpr::from_factor(f))
    }

    fn head_for(&mut self, pos: usize, name: &str) -> Result<Head, LangError> {
        let head = match name {
            "g" => Head::Metric,
            "g_inv" => Head::MetricInv,
            "delta" => Head::Delta,
            "p" => Head::Momentum,
            "Riemann" => Head::Riemann,
            "Ricci" => Head::Ricci,
            "R" => Head::RicciScalar,
            "dim" => Head::Dim,
            "F" | "id" | "Gamma" => {
                let dagger = self.eat(&Tok::Plus);
                if *self.peek() == Tok::LParen {
                    if dagger && name != "Gamma" {
                        return Err(LangError::Syntax {
                            pos,
                            msg: format!("`{name}` takes no adjoint mark"),
                        });
                    }
                    let (ipos, id) = self.bundle_param()?;
                    self.known_bundle(ipos, &id)?;
                    match name {
                        "F" => Head::BundleCurv(id),
                        "id" => Head::BundleDelta(id),
                        _ => Head::Gamma { bundle: id, dagger },
                    }
                } else {
                    self.generic_head(pos, name, dagger)?
                }
            }
            other => {
                let dagger = self.eat(&Tok::Plus);
                self.generic_head(pos, other, dagger)?
            }
        };
        Ok(head)
    }

    fn generic_head(&self, pos: usize, name: &str, dagger: bool) -> Result<Head, LangError> {
        match self.syms.get(name) {
            Some(g) => {
                let mut g = g.clone();
                g.dagger = dagger;
                Ok(Head::Generic(g))
            }
            None => Err(LangError::UnknownHead { pos, name: name.to_string() }),
        }
    }

    fn bundle_param(&mut self) -> Result<(usize, BundleId), LangError> {
        self.expect(&Tok::LParen)?;
        let (pos, id) = self.ident()?;
        self.expect(&Tok::RParen)?;
        Ok((pos, id))
    }

    fn factor_body(&mut self, hpos: usize, head: Head) -> Result<TensorFactor, LangError> {
        self.expect(&Tok::LBracket)?;
        let mut base: Vec<(Mark, usize, String)> = Vec::new();
        let mut cov: Vec<(Mark, usize, String)> = Vec::new();
        let mut in_cov = false;
        while *self.peek() != Tok::RBracket {
            if self.eat(&Tok::Semi) {
                if in_cov {
                    return Err(LangError::Syntax {
                        pos: self.pos(),
                        msg: "only one `;` per bracket".to_string(),
                    });
                }
                in_cov = true;
                continue;
            }
            let (m, mpos) = self.mark()?;
            let (_, l) = self.ident()?;
            if in_cov {
                cov.push((m, mpos, l));
            } else {
                base.push((m, mpos, l));
            }
        }
        self.bump();
        let sig = head.signature();
        if sig.len() != base.len() {
            return Err(LangError::Arity {
                pos: hpos,
                head: head.key(),
                expected: sig.len(),
                got: base.len(),
            });
        }
        let mut slots = Vec::with_capacity(base.len());
        for ((m, mpos, l), want) in base.into_iter().zip(sig.iter()) {
            let slot = match (m, &want.kind) {
                (Mark::Up, IndexKind::Coord) => IndexSlot::up(l),
                (Mark::Down, IndexKind::Coord) => IndexSlot::down(l),
                (Mark::BundleUp, IndexKind::Bundle(id)) => IndexSlot::bundle_up(id.clone(), l),
                (Mark::BundleDown, IndexKind::Bundle(id)) => {
                    IndexSlot::bundle_down(id.clone(), l)
                }
                _ => {
                    return Err(LangError::Variance {
                        pos: mpos,
                        msg: format!(
                            "slot `{l}` on {} must be {}",
                            head.key(),
                            match &want.kind {
                                IndexKind::Coord => "coordinate",
                                IndexKind::Bundle(_) => "a bundle frame",
                            }
                        ),
                    });
                }
            };
            slots.push(slot);
        }
        let mut f = TensorFactor::new(head, slots);
        for (m, mpos, l) in cov {
            let slot = match m {
                Mark::Up => IndexSlot::up(l),
                Mark::Down => IndexSlot::down(l),
                _ => {
                    return Err(LangError::Variance {
                        pos: mpos,
                        msg: "covariant derivative slots are coordinate".to_string(),
                    });
                }
            };
            f.cov.push(slot);
        }
        f.validate().map_err(|err| map_expr_err(err, hpos))?;
        Ok(f)
    }
}

fn map_expr_err(err: ExprError, pos: usize) -> LangError {
    match err {
        ExprError::Arity { head, expected, got } => LangError::Arity { pos, head, expected, got },
        ExprError::IndexCollision(l) => LangError::Unbalanced { pos, label: l },
        ExprError::SignatureMismatch(m) if m.contains("eps") => LangError::Syntax { pos, msg: m },
        ExprError::SignatureMismatch(m) | ExprError::MalformedIndex(m) => {
            LangError::Variance { pos, msg: m }
        }
        ExprError::IndexNotFree(l) => {
            LangError::Variance { pos, msg: format!("label {l} is not a free index") }
        }
    }
}

fn validate_balance(e: &TensorExpr, pos: usize) -> Result<(), LangError> {
    for t in &e.terms {
        let mut seen: BTreeMap<&Label, Vec<(&IndexKind, Variance)>> = BTreeMap::new();
        for f in &t.factors {
            for s in f.slots.iter().chain(&f.cov).chain(&f.h).chain(&f.v) {
                seen.entry(&s.label).or_default().push((&s.kind, s.variance));
            }
        }
        for (label, occ) in seen {
            let bad = match occ.as_slice() {
                [_] => false,
                [a, b] => a.1 == b.1 || a.0 != b.0,
                _ => true,
            };
            if bad {
                return Err(LangError::Unbalanced { pos, label: label.clone() });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Canonical text printer
// ---------------------------------------------------------------------------

#[derive(Default)]
struct Decls {
    bundles: BTreeSet<BundleId>,
    syms: BTreeMap<String, GenericHead>,
}

impl Decls {
    fn add_expr(&mut self, e: &TensorExpr) {
        for t in &e.terms {
            for f in &t.factors {
                match &f.head {
                    Head::BundleCurv(id) if id != COTANGENT => {
                        self.bundles.insert(id.clone());
                    }
                    Head::BundleDelta(id) => {
                        self.bundles.insert(id.clone());
                    }
                    Head::Gamma { bundle, .. } => {
                        self.bundles.insert(bundle.clone());
                    }
                    Head::Generic(g) => {
                        for s in &g.sig {
                            if let IndexKind::Bundle(id) = &s.kind {
                                self.bundles.insert(id.clone());
                            }
                        }
                        let mut base = g.clone();
                        base.dagger = false;
                        self.syms.entry(g.name.clone()).or_insert(base);
                    }
                    _ => {}
                }
            }
        }
    }

    fn add_sig(&mut self, sig: &Signature) {
        for w in [&sig.cod, &sig.dom] {
            if let Some((id, _)) = &w.bundle {
                self.bundles.insert(id.clone());
            }
        }
    }

    fn render(&self) -> String {
        let mut out = String::new();
        for b in &self.bundles {
            out.push_str(&format!("bundle {b}\n"));
        }
        for (name, g) in &self.syms {
            out.push_str(&format!("sym {name} ["));
            for (i, s) in g.sig.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                match (&s.kind, s.variance) {
                    (IndexKind::Coord, Variance::Up) => out.push_str(&format!("^c{i}")),
                    (IndexKind::Coord, Variance::Down) => out.push_str(&format!("_c{i}")),
                    (IndexKind::Bundle(id), Variance::Up) => out.push_str(&format!("^^{id}")),
                    (IndexKind::Bundle(id), Variance::Down) => out.push_str(&format!("__{id}")),
                }
            }
            out.push(']');
            if g.phase {
                out.push_str(" phase");
            }
            if g.constant {
                out.push_str(" const");
            }
            for s in &g.syms {
                out.push_str(&format!(" sympair({},{},{})", s.a, s.b, s.sign));
            }
            out.push('\n');
        }
        out
    }
}

/// Renames canonical `!NN` dummies to parsable names, avoiding collisions
/// with labels already present.
fn dummy_renamer(labels: &[Label]) -> BTreeMap<Label, String> {
    let mut prefix = String::from("d");
    let clash = |p: &str, ls: &[Label]| {
        ls.iter().any(|l| {
            !l.starts_with('!')
                && l.len() > p.len()
                && l.starts_with(p)
                && l[p.len()..].bytes().all(|b| b.is_ascii_digit())
        })
    };
    while clash(&prefix, labels) {
        prefix.push('_');
    }
    let mut map = BTreeMap::new();
    for l in labels {
        let new = if let Some(rest) = l.strip_prefix('!') {
            format!("{prefix}{rest}")
        } else {
            l.clone()
        };
        map.insert(l.clone(), new);
    }
    map
}

fn labels_of_expr(e: &TensorExpr, out: &mut Vec<Label>) {
    for t in &e.terms {
        for f in &t.factors {
            f.for_each_slot(|s| {
                if !out.contains(&s.label) {
                    out.push(s.label.clone());
                }
            });
        }
    }
}

fn head_text(h: &Head) -> String {
    match h {
        Head::Metric => "g".to_string(),
        Head::MetricInv => "g_inv".to_string(),
        Head::Delta => "delta".to_string(),
        Head::Momentum => "p".to_string(),
        Head::Riemann => "Riemann".to_string(),
        Head::Ricci => "Ricci".to_string(),
        Head::RicciScalar => "R".to_string(),
        Head::Dim => "dim".to_string(),
        Head::BundleCurv(id) => format!("F({id})"),
        Head::BundleDelta(id) => format!("id({id})"),
        Head::Gamma { bundle, dagger } => {
            format!("Gamma{}({bundle})", if *dagger { "+" } else { "" })
        }
        Head::Generic(g) => format!("{}{}", g.name, if g.dagger { "+" } else { "" }),
    }
}

fn slot_text(s: &IndexSlot, names: &BTreeMap<Label, String>) -> String {
    let name = names.get(&s.label).cloned().unwrap_or_else(|| s.label.clone());
    let mark = match (&s.kind, s.variance) {
        (IndexKind::Coord, Variance::Up) => "^",
        (IndexKind::Coord, Variance::Down) => "_",
        (IndexKind::Bundle(_), Variance::Up) => "^^",
        (IndexKind::Bundle(_), Variance::Down) => "__",
    };
    format!("{mark}{name}")
}

fn factor_text(f: &TensorFactor, names: &BTreeMap<Label, String>) -> String {
    let mut body = head_text(&f.head);
    body.push('[');
    let base: Vec<String> = f.slots.iter().map(|s| slot_text(s, names)).collect();
    body.push_str(&base.join(" "));
    if !f.cov.is_empty() {
        body.push_str(" ; ");
        let covs: Vec<String> = f.cov.iter().map(|s| slot_text(s, names)).collect();
        body.push_str(&covs.join(" "));
    }
    body.push(']');
    for s in &f.h {
        let name = names.get(&s.label).cloned().unwrap_or_else(|| s.label.clone());
        body = format!("H(_{name}, {body})");
    }
    for s in &f.v {
        let name = names.get(&s.label).cloned().unwrap_or_else(|| s.label.clone());
        body = format!("V(^{name}, {body})");
    }
    body
}

fn rational_text(q: &Rational) -> String {
    if q.is_negative() {
        format!("(-{})", -q.clone())
    } else {
        format!("{q}")
    }
}

/// One text term per gamma degree; `canonicalize` re-merges the split.
fn expr_text(e: &TensorExpr, names: &BTreeMap<Label, String>) -> String {
    if e.is_zero() {
        return "0".to_string();
    }
    let mut terms = Vec::new();
    for t in &e.terms {
        let poly = t.coeff.raw_poly();
        let factors: Vec<String> = t.factors.iter().map(|f| factor_text(f, names)).collect();
        for k in 0..=poly.degree() {
            let ck = poly.coeff(k);
            if ck.is_zero() {
                continue;
            }
            let mut pieces = Vec::new();
            let has_other = t.coeff.i_power() == 1
                || t.coeff.eps_power() != 0
                || k > 0
                || !factors.is_empty();
            if !(ck.is_one() && has_other) {
                pieces.push(rational_text(&ck));
            }
            if t.coeff.i_power() == 1 {
                pieces.push("i".to_string());
            }
            match t.coeff.eps_power() {
                0 => {}
                1 => pieces.push("eps".to_string()),
                m => pieces.push(format!("eps^{m}")),
            }
            match k {
                0 => {}
                1 => pieces.push("gamma".to_string()),
                _ => pieces.push(format!("gamma^{k}")),
            }
            pieces.extend(factors.iter().cloned());
            terms.push(pieces.join(" * "));
        }
    }
    terms.join(" + ")
}

fn canonical_expr(e: &TensorExpr) -> String {
    let mut decls = Decls::default();
    decls.add_expr(e);
    let mut labels = Vec::new();
    labels_of_expr(e, &mut labels);
    let names = dummy_renamer(&labels);
    format!("{}{}", decls.render(), expr_text(e, &names))
}

fn wiring_text(w: &Wiring, cod: bool) -> String {
    let mut parts = Vec::new();
    for l in &w.coords {
        parts.push(if cod { format!("_{l}") } else { format!("^{l}") });
    }
    if let Some((id, l)) = &w.bundle {
        parts.push(if cod { format!("^^{id}:{l}") } else { format!("__{id}:{l}") });
    }
    parts.join(" ")
}

fn canonical_symbol(name: &str, s: &GradedSymbol) -> String {
    let mut decls = Decls::default();
    decls.add_sig(s.sig());
    let mut labels = Vec::new();
    for w in [&s.sig().cod, &s.sig().dom] {
        for l in w.labels() {
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
    }
    for g in s.grades() {
        let comp = s.component(g);
        decls.add_expr(&comp);
        labels_of_expr(&comp, &mut labels);
    }
    let names = dummy_renamer(&labels);
    let mut out = decls.render();
    out.push_str(&format!(
        "symbol {name} [{}] -> [{}]\n",
        wiring_text(&s.sig().cod, true),
        wiring_text(&s.sig().dom, false)
    ));
    for g in s.grades() {
        out.push_str(&format!("grade {g}: {}\n", expr_text(&s.component(g), &names)));
    }
    out
}

// ---------------------------------------------------------------------------
// LaTeX printer
// ---------------------------------------------------------------------------

const GREEK: &[(&str, &str)] = &[
    ("alpha", "\\alpha"),
    ("beta", "\\beta"),
    ("gamma", "\\gamma"),
    ("delta", "\\delta"),
    ("epsilon", "\\epsilon"),
    ("zeta", "\\zeta"),
    ("eta", "\\eta"),
    ("theta", "\\theta"),
    ("kappa", "\\kappa"),
    ("lambda", "\\lambda"),
    ("mu", "\\mu"),
    ("nu", "\\nu"),
    ("xi", "\\xi"),
    ("rho", "\\rho"),
    ("sigma", "\\sigma"),
    ("tau", "\\tau"),
    ("phi", "\\phi"),
    ("chi", "\\chi"),
    ("psi", "\\psi"),
    ("omega", "\\omega"),
];

const COORD_POOL: &[&str] = &[
    "\\mu", "\\nu", "\\rho", "\\sigma", "\\alpha", "\\beta", "\\lambda", "\\kappa", "\\tau",
    "\\chi", "\\xi", "\\zeta", "\\eta", "\\theta", "\\phi", "\\psi", "\\omega",
];

const FRAME_POOL: &[&str] =
    &["A", "B", "C", "D", "G", "I", "J", "K", "L", "M", "N", "P", "Q", "S", "T", "U", "W"];

fn latex_free_label(l: &str) -> String {
    for (name, tex) in GREEK {
        if l == *name {
            return (*tex).to_string();
        }
    }
    if l.len() == 1 {
        l.to_string()
    } else {
        format!("\\mathrm{{{l}}}")
    }
}

/// Dummies draw from fixed pools in order of appearance; free labels keep
/// their spelled names.
fn latex_labels(e: &TensorExpr) -> BTreeMap<Label, String> {
    let mut map: BTreeMap<Label, String> = BTreeMap::new();
    let mut used: BTreeSet<String> = BTreeSet::new();
    for t in &e.terms {
        for f in &t.factors {
            f.for_each_slot(|s| {
                if !s.label.starts_with('!') && !map.contains_key(&s.label) {
                    let tex = latex_free_label(&s.label);
                    used.insert(tex.clone());
                    map.insert(s.label.clone(), tex);
                }
            });
        }
    }
    let mut next = |pool: &[&str], used: &mut BTreeSet<String>| -> String {
        for cand in pool {
            if !used.contains(*cand) {
                used.insert((*cand).to_string());
                return (*cand).to_string();
            }
        }
        let mut k = 1;
        loop {
            let cand = format!("{}_{{{k}}}", pool[0]);
            if !used.contains(&cand) {
                used.insert(cand.clone());
                return cand;
            }
            k += 1;
        }
    };
    for t in &e.terms {
        for f in &t.factors {
            f.for_each_slot(|s| {
                if s.label.starts_with('!') && !map.contains_key(&s.label) {
                    let pool = if s.is_coord() { COORD_POOL } else { FRAME_POOL };
                    let tex = next(pool, &mut used);
                    map.insert(s.label.clone(), tex);
                }
            });
        }
    }
    map
}

fn pow_tex(base: &str, k: i64) -> String {
    if k == 1 {
        base.to_string()
    } else if (0..10).contains(&k) {
        format!("{base}^{k}")
    } else {
        format!("{base}^{{{k}}}")
    }
}

fn rational_tex(q: &Rational) -> String {
    if q.denom().is_one() {
        format!("{}", q.numer())
    } else {
        format!("\\frac{{{}}}{{{}}}", q.numer(), q.denom())
    }
}

/// Splits a coefficient into an explicit sign and an unsigned body; the
/// body is empty when the coefficient is plus or minus one.
fn coeff_tex(c: &Coefficient) -> (bool, String) {
    let poly = c.raw_poly();
    let nonzero: Vec<usize> = (0..=poly.degree()).filter(|&k| !poly.coeff(k).is_zero()).collect();
    if nonzero.len() == 1 {
        let k = nonzero[0];
        let q = poly.coeff(k);
        let neg = q.is_negative();
        let qa = if neg { -q } else { q };
        let mut num = Vec::new();
        let mut den = Vec::new();
        if !qa.numer().is_one() {
            num.push(format!("{}", qa.numer()));
        }
        if c.i_power() == 1 {
            num.push("i".to_string());
        }
        if k > 0 {
            num.push(pow_tex("\\gamma", k as i64));
        }
        let m = c.eps_power();
        if m > 0 {
            num.push(pow_tex("\\epsilon", m as i64));
        }
        if !qa.denom().is_one() {
            den.push(format!("{}", qa.denom()));
        }
        if m < 0 {
            den.push(pow_tex("\\epsilon", -m as i64));
        }
        let body = if den.is_empty() {
            num.join(" ")
        } else {
            let n = if num.is_empty() { "1".to_string() } else { num.join(" ") };
            format!("\\frac{{{n}}}{{{}}}", den.join(" "))
        };
        (neg, body)
    } else {
        let mut prefix = Vec::new();
        if c.i_power() == 1 {
            prefix.push("i".to_string());
        }
        let m = c.eps_power();
        let pre = if m < 0 {
            let n = if prefix.is_empty() { "1".to_string() } else { prefix.join(" ") };
            format!("\\frac{{{n}}}{{{}}}", pow_tex("\\epsilon", -m as i64))
        } else {
            if m > 0 {
                prefix.push(pow_tex("\\epsilon", m as i64));
            }
            prefix.join(" ")
        };
        let mut body = String::new();
        for (j, &k) in nonzero.iter().enumerate() {
            let q = poly.coeff(k);
            let neg = q.is_negative();
            let qa = if neg { -q } else { q };
            if j == 0 {
                if neg {
                    body.push('-');
                }
            } else {
                body.push_str(if neg { " - " } else { " + " });
            }
            if !(qa.is_one() && k > 0) {
                body.push_str(&rational_tex(&qa));
                if k > 0 {
                    body.push(' ');
                }
            }
            if k > 0 {
                body.push_str(&pow_tex("\\gamma", k as i64));
            }
        }
        let wrapped = format!("\\left({body}\\right)");
        (false, if pre.is_empty() { wrapped } else { format!("{pre} {wrapped}") })
    }
}

fn head_tex(h: &Head) -> String {
    match h {
        Head::Metric | Head::MetricInv => "g".to_string(),
        Head::Delta => "\\delta".to_string(),
        Head::Momentum => "p".to_string(),
        Head::Riemann | Head::Ricci | Head::RicciScalar => "R".to_string(),
        Head::Dim => "n".to_string(),
        Head::BundleCurv(_) => "F".to_string(),
        Head::BundleDelta(_) => "\\mathbb{1}".to_string(),
        Head::Gamma { dagger, .. } => {
            if *dagger {
                "{\\gamma^{\\dagger}}".to_string()
            } else {
                "\\gamma".to_string()
            }
        }
        Head::Generic(g) => {
            let base = latex_free_label(&g.name);
            if g.dagger {
                format!("{{{base}^{{\\dagger}}}}")
            } else {
                base
            }
        }
    }
}

fn factor_tex(f: &TensorFactor, names: &BTreeMap<Label, String>) -> String {
    let tex_of = |s: &IndexSlot| names.get(&s.label).cloned().unwrap_or_else(|| s.label.clone());
    let mut prefix = String::new();
    for s in f.cov.iter().rev() {
        let idx = tex_of(s);
        let mark = if s.variance == Variance::Up { '^' } else { '_' };
        prefix.push_str(&format!("\\nabla{mark}{{{idx}}} "));
    }
    // Index order: base slots, then horizontal slots low, vertical high.
    let mut seq: Vec<(Variance, String)> = f.slots.iter().map(|s| (s.variance, tex_of(s))).collect();
    seq.extend(f.h.iter().map(|s| (Variance::Down, tex_of(s))));
    seq.extend(f.v.iter().map(|s| (Variance::Up, tex_of(s))));
    let mut out = head_tex(&f.head);
    let mut i = 0;
    let mut first_run = true;
    while i < seq.len() {
        let var = seq[i].0;
        let mut run = String::new();
        let mut count = 0;
        while i < seq.len() && seq[i].0 == var {
            run.push_str(&seq[i].1);
            count += 1;
            i += 1;
        }
        if !first_run {
            out.push_str("{}");
        }
        first_run = false;
        out.push(if var == Variance::Up { '^' } else { '_' });
        if count == 1 && !run.contains(' ') {
            out.push_str(&run);
        } else {
            out.push_str(&format!("{{{run}}}"));
        }
    }
    format!("{prefix}{out}")
}

fn latex_expr(e: &TensorExpr) -> String {
    if e.is_zero() {
        return "0".to_string();
    }
    let names = latex_labels(e);
    let mut out = String::new();
    for (j, t) in e.terms.iter().enumerate() {
        let (neg, cbody) = coeff_tex(&t.coeff);
        let factors: Vec<String> = t.factors.iter().map(|f| factor_tex(f, &names)).collect();
        let body = match (cbody.is_empty(), factors.is_empty()) {
            (true, true) => "1".to_string(),
            (true, false) => factors.join(" "),
            (false, true) => cbody,
            (false, false) => format!("{cbody} {}", factors.join(" ")),
        };
        if j == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        out.push_str(&body);
    }
    out
}

// ---------------------------------------------------------------------------
// JSON printer
// ---------------------------------------------------------------------------

fn jstr(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn json_slot(s: &IndexSlot) -> String {
    let var = if s.variance == Variance::Up { "up" } else { "down" };
    match &s.kind {
        IndexKind::Coord => format!("{{\"label\":{},\"var\":\"{var}\"}}", jstr(&s.label)),
        IndexKind::Bundle(id) => format!(
            "{{\"label\":{},\"var\":\"{var}\",\"bundle\":{}}}",
            jstr(&s.label),
            jstr(id)
        ),
    }
}

fn json_slot_sig(s: &SlotSig) -> String {
    let var = if s.variance == Variance::Up { "up" } else { "down" };
    match &s.kind {
        IndexKind::Coord => format!("{{\"kind\":\"coord\",\"var\":\"{var}\"}}"),
        IndexKind::Bundle(id) => {
            format!("{{\"kind\":\"bundle\",\"bundle\":{},\"var\":\"{var}\"}}", jstr(id))
        }
    }
}

fn json_head(h: &Head) -> String {
    match h {
        Head::Metric => "{\"name\":\"g\"}".to_string(),
        Head::MetricInv => "{\"name\":\"g_inv\"}".to_string(),
        Head::Delta => "{\"name\":\"delta\"}".to_string(),
        Head::Momentum => "{\"name\":\"p\"}".to_string(),
        Head::Riemann => "{\"name\":\"Riemann\"}".to_string(),
        Head::Ricci => "{\"name\":\"Ricci\"}".to_string(),
        Head::RicciScalar => "{\"name\":\"R\"}".to_string(),
        Head::Dim => "{\"name\":\"dim\"}".to_string(),
        Head::BundleCurv(id) => format!("{{\"name\":\"F\",\"bundle\":{}}}", jstr(id)),
        Head::BundleDelta(id) => format!("{{\"name\":\"id\",\"bundle\":{}}}", jstr(id)),
        Head::Gamma { bundle, dagger } => format!(
            "{{\"name\":\"Gamma\",\"bundle\":{},\"dagger\":{dagger}}}",
            jstr(bundle)
        ),
        Head::Generic(g) => {
            let sig: Vec<String> = g.sig.iter().map(json_slot_sig).collect();
            let syms: Vec<String> = g
                .syms
                .iter()
                .map(|s| format!("{{\"a\":{},\"b\":{},\"sign\":{}}}", s.a, s.b, s.sign))
                .collect();
            format!(
                "{{\"name\":{},\"generic\":{{\"phase\":{},\"const\":{},\"dagger\":{},\"sig\":[{}],\"syms\":[{}]}}}}",
                jstr(&g.name),
                g.phase,
                g.constant,
                g.dagger,
                sig.join(","),
                syms.join(",")
            )
        }
    }
}

fn json_coeff(c: &Coefficient) -> String {
    let gam: Vec<String> =
        c.gamma_poly().coeffs().iter().map(|q| jstr(&format!("{q}"))).collect();
    format!(
        "{{\"rat\":{},\"i\":{},\"eps\":{},\"gamma\":[{}]}}",
        jstr(&format!("{}", c.rational())),
        c.i_power(),
        c.eps_power(),
        gam.join(",")
    )
}

fn json_factor(f: &TensorFactor) -> String {
    let part = |v: &[IndexSlot]| -> String {
        let xs: Vec<String> = v.iter().map(json_slot).collect();
        xs.join(",")
    };
    format!(
        "{{\"head\":{},\"slots\":[{}],\"cov\":[{}],\"h\":[{}],\"v\":[{}]}}",
        json_head(&f.head),
        part(&f.slots),
        part(&f.cov),
        part(&f.h),
        part(&f.v)
    )
}

fn json_terms(e: &TensorExpr) -> String {
    let terms: Vec<String> = e
        .terms
        .iter()
        .map(|t| {
            let fs: Vec<String> = t.factors.iter().map(json_factor).collect();
            format!("{{\"coeff\":{},\"factors\":[{}]}}", json_coeff(&t.coeff), fs.join(","))
        })
        .collect();
    format!("[{}]", terms.join(","))
}

fn json_expr(e: &TensorExpr) -> String {
    format!("{{\"version\":1,\"kind\":\"expr\",\"terms\":{}}}", json_terms(e))
}

fn json_wiring(w: &Wiring) -> String {
    let coords: Vec<String> = w.coords.iter().map(|l| jstr(l)).collect();
    let bundle = match &w.bundle {
        Some((id, l)) => format!("{{\"id\":{},\"label\":{}}}", jstr(id), jstr(l)),
        None => "null".to_string(),
    };
    format!("{{\"coords\":[{}],\"bundle\":{bundle}}}", coords.join(","))
}

fn json_symbol(name: &str, s: &GradedSymbol) -> String {
    format!(
        "{{\"version\":1,\"kind\":\"symbol\",\"name\":{},\"sig\":{{\"cod\":{},\"dom\":{}}},\"terms\":{}}}",
        jstr(name),
        json_wiring(&s.sig().cod),
        json_wiring(&s.sig().dom),
        json_terms(&s.to_expr())
    )
}

// ---------------------------------------------------------------------------
// Public printing entry points
// ---------------------------------------------------------------------------

pub fn print_expr(e: &TensorExpr, format: Format) -> String {
    match format {
        Format::CanonicalText => canonical_expr(e),
        Format::Latex => latex_expr(e),
        Format::Json => json_expr(e),
    }
}

/// The eps power of each printed term equals its grade; components
/// themselves stay eps-free.
pub fn print_symbol(name: &str, s: &GradedSymbol, format: Format) -> String {
    match format {
        Format::CanonicalText => canonical_symbol(name, s),
        Format::Latex => latex_expr(&s.to_expr()),
        Format::Json => json_symbol(name, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::{catalog, CatalogParams};

    fn wave_kinetic() -> TensorExpr {
        let t = Term {
            coeff: Coefficient::from_int(-1, 1).mul(&Coefficient::eps_pow(-2)),
            factors: vec![
                TensorFactor::metric_inv("m", "n"),
                TensorFactor::momentum("m"),
                TensorFactor::momentum("n"),
            ],
        };
        TensorExpr::from_term(t)
    }

    #[test]
    fn parses_wave_kinetic_term() {
        let e = parse_expr("(-1) * eps^-2 * g_inv[^m ^n] * p[_m] * p[_n]").unwrap();
        assert_eq!(e.canonicalize().unwrap(), wave_kinetic().canonicalize().unwrap());
    }

    #[test]
    fn missing_riemann_slot_is_an_arity_error() {
        match parse_expr("Riemann[_a _b _c]") {
            Err(LangError::Arity { expected: 4, got: 3, .. }) => {}
            other => panic!("expected arity error, got {other:?}"),
        }
    }

    #[test]
    fn h_operator_appends_one_horizontal_slot() {
        let src = "bundle E\nsym a [__E ^^E] phase\nH(_m, a[__A ^^B])";
        let e = parse_expr(src).unwrap();
        assert_eq!(e.terms.len(), 1);
        let f = &e.terms[0].factors[0];
        assert_eq!(f.h, vec![IndexSlot::down("m")]);
        assert_eq!(f.slots[0], IndexSlot::bundle_down("E", "A"));
        assert_eq!(f.slots[1], IndexSlot::bundle_up("E", "B"));
    }

    #[test]
    fn undeclared_head_is_rejected() {
        match parse_expr("a[__A ^^B]") {
            Err(LangError::UnknownHead { name, .. }) => assert_eq!(name, "a"),
            other => panic!("expected unknown head, got {other:?}"),
        }
    }

    #[test]
    fn momentum_variance_is_pinned() {
        assert!(matches!(parse_expr("p[^m] * p[_m]"), Err(LangError::Variance { .. })));
    }

    #[test]
    fn repeated_lower_label_is_unbalanced() {
        match parse_expr("p[_m] * p[_m]") {
            Err(LangError::Unbalanced { label, .. }) => assert_eq!(label, "m"),
            other => panic!("expected unbalanced index, got {other:?}"),
        }
    }

    #[test]
    fn zero_prints_as_zero() {
        let z = TensorExpr::zero();
        assert_eq!(print_expr(&z, Format::CanonicalText), "0");
        assert_eq!(print_expr(&z, Format::Latex), "0");
    }

    #[test]
    fn wave_symbol_latex_is_the_printed_form() {
        let entry = catalog("wave", &CatalogParams::default()).unwrap();
        assert_eq!(
            print_symbol("wave", &entry.symbol, Format::Latex),
            "-\\frac{1}{\\epsilon^2} g^{\\mu\\nu} p_\\mu p_\\nu + \\frac{\\gamma}{3} R"
        );
    }

    #[test]
    fn canonical_text_round_trips_a_curved_expression() {
        let src = "bundle E\n\
                   sym u [^^E __E] phase\n\
                   sym v [^c0]\n\
                   sym w [^c0]\n\
                   3/4 * gamma^2 * Ricci[_a _b ; _c] * g_inv[^a ^b] * v[^c] \
                   + (-1/6) * i * eps^-1 * F(E)[^^A __B _a _b] * u+[^^B __A] * v[^a] * w[^b]";
        let e = match parse(src) {
            Ok(Parsed::Expr(e)) => e,
            other => panic!("parse failed: {other:?}"),
        };
        let canon = e.canonicalize().unwrap();
        let text = print_expr(&canon, Format::CanonicalText);
        let back = parse_expr(&text).unwrap().canonicalize().unwrap();
        assert_eq!(back, canon, "round trip changed the expression:\n{text}");
    }

    #[test]
    fn gamma_polynomial_coefficients_split_and_remerge() {
        let t = Term {
            coeff: Coefficient::from_parts(
                crate::coeff::rat(1, 12),
                1,
                -1,
                GammaPoly::linear(3, -4, 1),
            ),
            factors: vec![TensorFactor::ricci_scalar()],
        };
        let e = TensorExpr::from_term(t).canonicalize().unwrap();
        let text = print_expr(&e, Format::CanonicalText);
        let back = parse_expr(&text).unwrap().canonicalize().unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn json_encodes_version_and_terms() {
        let e = TensorExpr::from_term(Term {
            coeff: Coefficient::from_int(1, 2),
            factors: vec![TensorFactor::momentum("m")],
        });
        assert_eq!(
            print_expr(&e, Format::Json),
            "{\"version\":1,\"kind\":\"expr\",\"terms\":[{\"coeff\":{\"rat\":\"1/2\",\"i\":0,\
             \"eps\":0,\"gamma\":[\"1\"]},\"factors\":[{\"head\":{\"name\":\"p\"},\"slots\":\
             [{\"label\":\"m\",\"var\":\"down\"}],\"cov\":[],\"h\":[],\"v\":[]}]}]}"
        );
    }

    #[test]
    fn symbol_block_round_trips() {
        let src = "symbol wave [] -> []\n\
                   grade -2: (-1) * g_inv[^m ^n] * p[_m] * p[_n]\n\
                   grade 0: 1/3 * gamma * R[]\n";
        let (name, sym) = parse_symbol(src).unwrap();
        assert_eq!(name, "wave");
        let entry = catalog("wave", &CatalogParams::default()).unwrap();
        assert_eq!(sym, entry.symbol);
        let text = print_symbol(&name, &sym, Format::CanonicalText);
        let (name2, sym2) = parse_symbol(&text).unwrap();
        assert_eq!((name2.as_str(), &sym2), ("wave", &sym));
    }
}
