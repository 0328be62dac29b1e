use super::lexer::{lex, Spanned, Tok};
use super::{Action, DeclKind, Declaration, Program, Span, TypeExpr, ValueSet};
use crate::error::{Error, Result};
use crate::state::{BinOp, EventTerm, Expr, Value};

pub(crate) const KEYWORDS: &[&str] = &[
    "channel", "var", "skip", "stop", "chaos", "miracle", "if", "then", "else", "while", "do",
    "true", "false", "and", "or", "not", "int", "bool", "seq", "maxlen", "head", "tail", "proj",
    "tt", "accepts", "accepts_some",
];

/// Parses program text without name resolution.
pub fn parse_unchecked(src: &str) -> Result<Program> {
    let mut p = Parser::new(src)?;
    let prog = p.program()?;
    p.expect_eof()?;
    Ok(prog)
}

/// Parses a standalone expression.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        let t = &self.toks[self.pos];
        Span { line: t.line, col: t.col }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &str) -> Result<T> {
        let t = &self.toks[self.pos];
        Err(Error::Syntax {
            line: t.line,
            col: t.col,
            expected: format!("{expected}, found {}", t.tok.describe()),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.err(&t.describe())
        }
    }

    fn expect_eof(&mut self) -> Result<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.err("end of input")
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(&format!("`{kw}`"))
        }
    }

    fn name(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.err("an identifier"),
        }
    }

    fn int_lit(&mut self) -> Result<i64> {
        let neg = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(if neg { -n } else { n })
            }
            _ => self.err("an integer"),
        }
    }

    // ---- declarations and actions ----

    fn program(&mut self) -> Result<Program> {
        let mut decls = Vec::new();
        loop {
            if self.eat_kw("channel") {
                let names = self.name_list()?;
                let ty = if self.eat(&Tok::Colon) { Some(self.type_expr()?) } else { None };
                for name in names {
                    decls.push(Declaration { kind: DeclKind::Channel, name, ty: ty.clone() });
                }
            } else if self.eat_kw("var") {
                let names = self.name_list()?;
                self.expect(Tok::Colon)?;
                let ty = self.type_expr()?;
                for name in names {
                    decls.push(Declaration { kind: DeclKind::Variable, name, ty: Some(ty.clone()) });
                }
            } else {
                break;
            }
        }
        let body = self.action()?;
        Ok(Program { decls, body })
    }

    fn name_list(&mut self) -> Result<Vec<String>> {
        let mut out = vec![self.name()?];
        while self.eat(&Tok::Comma) {
            out.push(self.name()?);
        }
        Ok(out)
    }

    fn type_expr(&mut self) -> Result<TypeExpr> {
        if self.eat_kw("bool") {
            Ok(TypeExpr::Bool)
        } else if self.eat_kw("int") {
            if self.eat(&Tok::LBrack) {
                let lo = self.int_lit()?;
                self.expect(Tok::DotDot)?;
                let hi = self.int_lit()?;
                self.expect(Tok::RBrack)?;
                Ok(TypeExpr::Int(Some((lo, hi))))
            } else {
                Ok(TypeExpr::Int(None))
            }
        } else if self.eat_kw("seq") {
            let elem = self.type_expr()?;
            let max = if self.eat_kw("maxlen") {
                let n = self.int_lit()?;
                if n < 0 {
                    return self.err("a nonnegative length");
                }
                Some(n as usize)
            } else {
                None
            };
            Ok(TypeExpr::Seq(Box::new(elem), max))
        } else {
            self.err("a type (`bool`, `int[lo..hi]` or `seq T maxlen n`)")
        }
    }

    fn action(&mut self) -> Result<Action> {
        let first = self.seq_action()?;
        let mut cur = first;
        // whether `cur` is a choice built in this loop, and so may absorb more branches
        let mut open: Option<bool> = None;
        loop {
            let ext = match self.peek() {
                Tok::ExtBox => true,
                Tok::IntBox => false,
                _ => break,
            };
            self.bump();
            let next = self.seq_action()?;
            cur = match (open, cur) {
                (Some(e), Action::Ext(mut xs)) if e && ext => {
                    xs.push(next);
                    Action::Ext(xs)
                }
                (Some(e), Action::Int(mut xs)) if !e && !ext => {
                    xs.push(next);
                    Action::Int(xs)
                }
                (_, c) if ext => Action::Ext(vec![c, next]),
                (_, c) => Action::Int(vec![c, next]),
            };
            open = Some(ext);
        }
        Ok(cur)
    }

    fn seq_action(&mut self) -> Result<Action> {
        let mut a = self.prefix_action()?;
        while self.eat(&Tok::Semi) {
            let b = self.prefix_action()?;
            a = Action::Seq(Box::new(a), Box::new(b));
        }
        Ok(a)
    }

    fn prefix_action(&mut self) -> Result<Action> {
        let at = self.span();
        if self.eat_kw("while") {
            let cond = self.expr()?;
            self.expect_kw("do")?;
            let body = self.prefix_action()?;
            return Ok(Action::While { cond, body: Box::new(body), at });
        }
        if self.eat_kw("if") {
            let c = self.expr()?;
            self.expect_kw("then")?;
            let a = self.action()?;
            self.expect_kw("else")?;
            let b = self.prefix_action()?;
            return Ok(Action::If(c, Box::new(a), Box::new(b)));
        }
        if let Tok::Ident(s) = self.peek().clone() {
            if ["skip", "stop", "chaos", "miracle"].contains(&s.as_str()) {
                return self.atom_action();
            }
            if !KEYWORDS.contains(&s.as_str()) {
                match self.peek_at(1) {
                    Tok::Assign | Tok::Comma => return self.atom_action(),
                    Tok::Quest => return self.input(),
                    Tok::Arrow | Tok::Dot | Tok::Bang => {
                        let ev = self.event()?;
                        self.expect(Tok::Arrow)?;
                        let body = self.prefix_action()?;
                        return Ok(Action::Prefix(ev, Box::new(body)));
                    }
                    _ => {}
                }
            }
        }
        let save = self.pos;
        let guard = self.expr();
        match guard {
            Ok(g) if *self.peek() == Tok::Amp => {
                self.bump();
                let body = self.prefix_action()?;
                Ok(Action::Guard(g, Box::new(body)))
            }
            _ if matches!(self.toks[save].tok, Tok::LParen) => {
                self.pos = save;
                self.atom_action()
            }
            Ok(_) => self.err("`&` after a guard condition"),
            Err(e) => {
                self.pos = save;
                if matches!(self.peek(), Tok::Ident(_)) {
                    Err(e)
                } else {
                    self.err("an action")
                }
            }
        }
    }

    fn atom_action(&mut self) -> Result<Action> {
        if self.eat(&Tok::LParen) {
            let a = self.action()?;
            self.expect(Tok::RParen)?;
            return Ok(a);
        }
        for (kw, a) in [
            ("skip", Action::Skip),
            ("stop", Action::Stop),
            ("chaos", Action::Chaos),
            ("miracle", Action::Miracle),
        ] {
            if self.eat_kw(kw) {
                return Ok(a);
            }
        }
        let targets = self.name_list()?;
        self.expect(Tok::Assign)?;
        let mut exprs = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            exprs.push(self.expr()?);
        }
        if exprs.len() != targets.len() {
            return self.err(&format!("{} expressions for the assignment targets", targets.len()));
        }
        Ok(Action::Assign(targets.into_iter().zip(exprs).collect()))
    }

    fn event(&mut self) -> Result<EventTerm> {
        let chan = self.name()?;
        if self.eat(&Tok::Dot) || self.eat(&Tok::Bang) {
            let d = self.primary()?;
            Ok(EventTerm::with(chan, d))
        } else {
            Ok(EventTerm::plain(chan))
        }
    }

    fn input(&mut self) -> Result<Action> {
        let chan = self.name()?;
        self.expect(Tok::Quest)?;
        let var = self.name()?;
        let set = if self.eat(&Tok::Colon) {
            if self.eat(&Tok::LBrace) {
                let mut xs = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    xs.push(self.expr()?);
                    while self.eat(&Tok::Comma) {
                        xs.push(self.expr()?);
                    }
                    self.expect(Tok::RBrace)?;
                }
                Some(ValueSet::Enum(xs))
            } else {
                let lo = self.int_lit()?;
                self.expect(Tok::DotDot)?;
                let hi = self.int_lit()?;
                Some(ValueSet::Range(lo, hi))
            }
        } else {
            None
        };
        self.expect(Tok::Arrow)?;
        let body = self.prefix_action()?;
        Ok(Action::Input { chan, var, set, body: Box::new(body) })
    }

    // ---- expressions ----

    pub(crate) fn expr(&mut self) -> Result<Expr> {
        let a = self.or_expr()?;
        if self.eat(&Tok::Implies) {
            let b = self.expr()?;
            return Ok(Expr::bin(BinOp::Implies, a, b));
        }
        Ok(a)
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut a = self.and_expr()?;
        while self.eat_kw("or") {
            let b = self.and_expr()?;
            a = Expr::bin(BinOp::Or, a, b);
        }
        Ok(a)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut a = self.not_expr()?;
        while self.eat_kw("and") {
            let b = self.not_expr()?;
            a = Expr::bin(BinOp::And, a, b);
        }
        Ok(a)
    }

    fn not_expr(&mut self) -> Result<Expr> {
        if self.eat_kw("not") {
            return Ok(Expr::not(self.not_expr()?));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr> {
        let a = self.add_expr()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(a),
        };
        self.bump();
        let b = self.add_expr()?;
        Ok(Expr::bin(op, a, b))
    }

    fn add_expr(&mut self) -> Result<Expr> {
        let mut a = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                Tok::Caret | Tok::PlusPlus => BinOp::Concat,
                _ => return Ok(a),
            };
            self.bump();
            let b = self.mul_expr()?;
            a = Expr::bin(op, a, b);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr> {
        let mut a = self.unary()?;
        while self.eat(&Tok::Star) {
            let b = self.unary()?;
            a = Expr::bin(BinOp::Mul, a, b);
        }
        Ok(a)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(&Tok::Hash) {
            if self.eat_kw("tt") {
                return Ok(Expr::TraceLen);
            }
            return Ok(Expr::Len(Box::new(self.unary()?)));
        }
        if self.eat(&Tok::Minus) {
            if let Tok::Int(n) = self.peek().clone() {
                self.bump();
                return Ok(Expr::Lit(Value::Int(-n)));
            }
            let e = self.unary()?;
            return Ok(Expr::bin(BinOp::Sub, Expr::int(0), e));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::int(n))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Lt => {
                self.bump();
                let mut xs = Vec::new();
                if !self.eat(&Tok::Gt) {
                    xs.push(self.add_expr()?);
                    while self.eat(&Tok::Comma) {
                        xs.push(self.add_expr()?);
                    }
                    self.expect(Tok::Gt)?;
                }
                if xs.iter().all(|x| matches!(x, Expr::Lit(_))) {
                    let vs = xs
                        .into_iter()
                        .map(|x| match x {
                            Expr::Lit(v) => v,
                            _ => unreachable!(),
                        })
                        .collect();
                    Ok(Expr::Lit(Value::Seq(vs)))
                } else {
                    Ok(Expr::SeqLit(xs))
                }
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Expr::bool(s == "true"))
                }
                "head" | "tail" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let e = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(if s == "head" { Expr::Head(Box::new(e)) } else { Expr::Tail(Box::new(e)) })
                }
                "if" => {
                    self.bump();
                    let c = self.expr()?;
                    self.expect_kw("then")?;
                    let a = self.expr()?;
                    self.expect_kw("else")?;
                    let b = self.expr()?;
                    Ok(Expr::ite(c, a, b))
                }
                "proj" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    self.expect_kw("tt")?;
                    self.expect(Tok::Comma)?;
                    let c = self.name()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Proj(c))
                }
                "accepts" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let ev = self.event()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Accepts(Box::new(ev)))
                }
                "accepts_some" => {
                    self.bump();
                    Ok(Expr::AcceptsSome)
                }
                _ => {
                    let x = self.name()?;
                    if self.eat(&Tok::Prime) {
                        return Ok(Expr::Primed(x));
                    }
                    if *self.peek() == Tok::LParen
                        && self.peek_at(1) == &Tok::Ident("tt".into())
                        && self.peek_at(2) == &Tok::RParen
                    {
                        self.pos += 3;
                        return Ok(Expr::Proj(x));
                    }
                    Ok(Expr::Var(x))
                }
            },
            _ => self.err("an expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choice_chains_flatten() {
        let p = parse_unchecked("a -> skip [] b -> skip [] c -> skip").unwrap();
        assert!(matches!(p.body, Action::Ext(ref xs) if xs.len() == 3));
        let p = parse_unchecked("skip [] stop |~| chaos").unwrap();
        match p.body {
            Action::Int(xs) => assert!(matches!(xs[0], Action::Ext(_))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sequence_binds_tighter_than_choice() {
        let p = parse_unchecked("skip ; stop [] chaos").unwrap();
        match p.body {
            Action::Ext(xs) => assert!(matches!(xs[0], Action::Seq(..))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn guards_and_assignments() {
        let p = parse_unchecked("x > 0 & x := x - 1").unwrap();
        assert!(matches!(p.body, Action::Guard(..)));
        let p = parse_unchecked("(x > 0) & skip").unwrap();
        assert!(matches!(p.body, Action::Guard(..)));
        let p = parse_unchecked("(skip)").unwrap();
        assert_eq!(p.body, Action::Skip);
        let p = parse_unchecked("x, y := 1, 2").unwrap();
        assert!(matches!(p.body, Action::Assign(ref v) if v.len() == 2));
    }

    #[test]
    fn expression_precedence() {
        let e = parse_expr("1 + 2 * 3 = 7 and not b or c => d").unwrap();
        assert_eq!(e.to_string(), "1 + 2 * 3 = 7 and not b or c => d");
        match e {
            Expr::Bin(BinOp::Implies, l, _) => assert!(matches!(*l, Expr::Bin(BinOp::Or, ..))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sequences_and_projections() {
        assert_eq!(parse_expr("<1, 0>").unwrap(), Expr::Lit(Value::Seq(vec![Value::Int(1), Value::Int(0)])));
        assert_eq!(parse_expr("outps(tt)").unwrap(), Expr::Proj("outps".into()));
        assert_eq!(parse_expr("#tt").unwrap(), Expr::TraceLen);
        let e = parse_expr("outps(tt) <= bf ++ inps(tt)").unwrap();
        assert!(matches!(e, Expr::Bin(BinOp::Le, ..)));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_unchecked("channel a\na -> ") {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_unchecked("skip skip").is_err());
        assert!(parse_unchecked("x > 0 skip").is_err());
    }
}
