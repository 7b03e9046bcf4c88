//! Text syntax for conditions and actions, matching the IR dump:
//! `x = v & !(y | z)`, `assert σ[x] = v`, `x := x + 1; y := TRUE`.

use super::expr::{Assignment, BoolExpr, CmpOp, Rhs, Value};
use super::LogicError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Not,
    And,
    Or,
    Implies,
    Cmp(CmpOp),
    Ne,
    Assign,
    Sigma,
    Semi,
    Comma,
    Colon,
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
pub struct Lexed {
    pub tok: Tok,
    pub pos: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '#'
}

pub fn lex(src: &str) -> Result<Vec<Lexed>, LogicError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let next = chars.get(i + 1).map(|&(_, c)| c);
        let after_operand = matches!(
            out.last().map(|l: &Lexed| &l.tok),
            Some(Tok::Ident(_) | Tok::Int(_) | Tok::RParen)
        );
        let mut push = |tok, width: usize| {
            out.push(Lexed { tok, pos });
            width
        };
        let width = match c {
            c if c.is_whitespace() => 1,
            '(' => push(Tok::LParen, 1),
            ')' => push(Tok::RParen, 1),
            '[' => push(Tok::LBracket, 1),
            ']' => push(Tok::RBracket, 1),
            '&' | '∧' => push(Tok::And, if next == Some('&') { 2 } else { 1 }),
            '|' | '∨' => push(Tok::Or, if next == Some('|') { 2 } else { 1 }),
            '¬' => push(Tok::Not, 1),
            '→' => push(Tok::Implies, 1),
            'σ' => push(Tok::Sigma, 1),
            ';' => push(Tok::Semi, 1),
            ',' => push(Tok::Comma, 1),
            '+' => push(Tok::Plus, 1),
            '!' if next == Some('=') => push(Tok::Ne, 2),
            '!' => push(Tok::Not, 1),
            '=' if next == Some('=') => push(Tok::Cmp(CmpOp::Eq), 2),
            '=' => push(Tok::Cmp(CmpOp::Eq), 1),
            ':' if next == Some('=') => push(Tok::Assign, 2),
            ':' => push(Tok::Colon, 1),
            '<' if next == Some('=') => push(Tok::Cmp(CmpOp::Le), 2),
            '<' => push(Tok::Cmp(CmpOp::Lt), 1),
            '>' if next == Some('=') => push(Tok::Cmp(CmpOp::Ge), 2),
            '>' => push(Tok::Cmp(CmpOp::Gt), 1),
            '-' if next == Some('>') => push(Tok::Implies, 2),
            '-' if next.is_some_and(|n| n.is_ascii_digit()) && !after_operand => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
                let text: String = chars[i..j].iter().map(|&(_, c)| c).collect();
                let n = text.parse().map_err(|_| LogicError::Parse {
                    pos,
                    msg: format!("bad integer `{text}`"),
                })?;
                out.push(Lexed {
                    tok: Tok::Int(n),
                    pos,
                });
                j - i
            }
            '-' => push(Tok::Minus, 1),
            c if is_ident_char(c) => {
                let mut j = i;
                while j < chars.len() && is_ident_char(chars[j].1) {
                    j += 1;
                }
                let text: String = chars[i..j].iter().map(|&(_, c)| c).collect();
                let tok = if text.chars().all(|c| c.is_ascii_digit()) {
                    Tok::Int(text.parse().map_err(|_| LogicError::Parse {
                        pos,
                        msg: format!("integer out of range `{text}`"),
                    })?)
                } else {
                    Tok::Ident(text)
                };
                out.push(Lexed { tok, pos });
                j - i
            }
            other => {
                return Err(LogicError::Parse {
                    pos,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        i += width;
    }
    Ok(out)
}

/// Cursor over lexed tokens shared by the expression, action and temporal
/// parsers.
pub struct Cursor<'a> {
    pub toks: &'a [Lexed],
    pub i: usize,
    pub len: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(toks: &'a [Lexed], len: usize) -> Self {
        Cursor { toks, i: 0, len }
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|l| &l.tok)
    }

    pub fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.i + k).map(|l| &l.tok)
    }

    pub fn pos(&self) -> usize {
        self.toks.get(self.i).map(|l| l.pos).unwrap_or(self.len)
    }

    pub fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.i).map(|l| l.tok.clone());
        self.i += 1;
        t
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), LogicError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    pub fn error(&self, msg: String) -> LogicError {
        LogicError::Parse {
            pos: self.pos(),
            msg,
        }
    }

    pub fn at_end(&self) -> bool {
        self.i >= self.toks.len()
    }

    fn value(&mut self) -> Result<Value, LogicError> {
        match self.bump() {
            Some(Tok::Int(n)) => Ok(Value::Int(n)),
            Some(Tok::Ident(s)) if s == "TRUE" => Ok(Value::Bool(true)),
            Some(Tok::Ident(s)) if s == "FALSE" => Ok(Value::Bool(false)),
            Some(Tok::Ident(s)) => Ok(Value::Sym(s)),
            _ => {
                self.i = self.i.saturating_sub(1);
                Err(self.error("expected a value".into()))
            }
        }
    }

    /// `x`, `σ[x]`, with an optional leading `assert`.
    fn var_ref(&mut self) -> Result<String, LogicError> {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == "assert")
            && matches!(self.peek_at(1), Some(Tok::Ident(_) | Tok::Sigma))
        {
            self.i += 1;
        }
        match self.bump() {
            Some(Tok::Sigma) => {
                self.expect(&Tok::LBracket, "`[` after σ")?;
                let name = match self.bump() {
                    Some(Tok::Ident(s)) => s,
                    _ => return Err(self.error("expected variable name".into())),
                };
                self.expect(&Tok::RBracket, "`]`")?;
                Ok(name)
            }
            Some(Tok::Ident(s)) => Ok(s),
            _ => {
                self.i = self.i.saturating_sub(1);
                Err(self.error("expected variable".into()))
            }
        }
    }

    /// Parses one atom: `x`, `x = v`, `x != v`, `x < 3`.
    pub fn atom(&mut self) -> Result<BoolExpr, LogicError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == "TRUE" => {
                self.i += 1;
                return Ok(BoolExpr::True);
            }
            Some(Tok::Ident(s)) if s == "FALSE" => {
                self.i += 1;
                return Ok(BoolExpr::False);
            }
            _ => {}
        }
        let var = self.var_ref()?;
        match self.peek().cloned() {
            Some(Tok::Cmp(op)) => {
                self.i += 1;
                let v = self.value()?;
                if op != CmpOp::Eq && !matches!(v, Value::Int(_)) {
                    return Err(
                        self.error(format!("ordering comparison needs an integer, got `{v}`"))
                    );
                }
                Ok(BoolExpr::cmp(var, op, v))
            }
            Some(Tok::Ne) => {
                self.i += 1;
                let v = self.value()?;
                Ok(BoolExpr::eq(var, v).negate())
            }
            _ => Ok(BoolExpr::flag(var)),
        }
    }

    pub fn expr(&mut self) -> Result<BoolExpr, LogicError> {
        let mut items = vec![self.conj()?];
        while self.eat(&Tok::Or) {
            items.push(self.conj()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            BoolExpr::Or(items)
        })
    }

    fn conj(&mut self) -> Result<BoolExpr, LogicError> {
        let mut items = vec![self.unary()?];
        while self.eat(&Tok::And) {
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            BoolExpr::And(items)
        })
    }

    fn unary(&mut self) -> Result<BoolExpr, LogicError> {
        if self.eat(&Tok::Not) {
            return Ok(BoolExpr::Not(Box::new(self.unary()?)));
        }
        if self.eat(&Tok::LParen) {
            let e = self.expr()?;
            self.expect(&Tok::RParen, "`)`")?;
            return Ok(e);
        }
        self.atom()
    }
}

/// Parses a condition expression.
pub fn parse_expr(src: &str) -> Result<BoolExpr, LogicError> {
    let toks = lex(src)?;
    let mut c = Cursor::new(&toks, src.len());
    let e = c.expr()?;
    if !c.at_end() {
        return Err(c.error("trailing input".into()));
    }
    Ok(e)
}

/// Parses an action list: `x := v; y := y + 1` or the report form
/// `x = v, y = w`. An empty string is an empty list.
pub fn parse_actions(src: &str) -> Result<Vec<Assignment>, LogicError> {
    let toks = lex(src)?;
    let mut c = Cursor::new(&toks, src.len());
    let mut out = Vec::new();
    while !c.at_end() {
        let var = c.var_ref()?;
        match c.bump() {
            Some(Tok::Assign) | Some(Tok::Cmp(CmpOp::Eq)) => {}
            _ => return Err(c.error("expected `:=`".into())),
        }
        let rhs = match (c.peek().cloned(), c.peek_at(1).cloned()) {
            (Some(Tok::Ident(s)), Some(Tok::Plus)) if s == var => {
                c.i += 2;
                expect_one(&mut c)?;
                Rhs::Inc
            }
            (Some(Tok::Ident(s)), Some(Tok::Minus)) if s == var => {
                c.i += 2;
                expect_one(&mut c)?;
                Rhs::Dec
            }
            _ => Rhs::Const(c.value()?),
        };
        out.push(Assignment { var, rhs });
        if !(c.eat(&Tok::Semi) || c.eat(&Tok::Comma)) && !c.at_end() {
            return Err(c.error("expected `;` between actions".into()));
        }
    }
    Ok(out)
}

fn expect_one(c: &mut Cursor<'_>) -> Result<(), LogicError> {
    match c.bump() {
        Some(Tok::Int(1)) => Ok(()),
        _ => Err(c.error("only `+ 1` and `- 1` updates are supported".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ir_condition() {
        let e = parse_expr(
            "timer_t3460_started & timer_t3460_expired & timer_t3460_expire_counter = 1",
        )
        .unwrap();
        assert_eq!(
            e.to_string(),
            "timer_t3460_started & timer_t3460_expired & timer_t3460_expire_counter = 1"
        );
    }

    #[test]
    fn parses_sigma_form() {
        let e =
            parse_expr("assert σ[chan_ue_mme] = auth_reject | assert σ[chan_ue_mme] = tau_reject")
                .unwrap();
        assert_eq!(
            e.to_string(),
            "chan_ue_mme = auth_reject | chan_ue_mme = tau_reject"
        );
    }

    #[test]
    fn not_equal_desugars() {
        let e = parse_expr("x != a").unwrap();
        assert_eq!(e.to_string(), "!x = a");
        assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn parses_both_action_forms() {
        let a =
            parse_actions("nas_security_context_update = TRUE, nas_security_context_valid = TRUE")
                .unwrap();
        assert_eq!(a.len(), 2);
        let b = parse_actions("c := c + 1; d := -2; chan_amf_ue := auth_request").unwrap();
        assert_eq!(b[0].rhs, Rhs::Inc);
        assert_eq!(b[1].rhs, Rhs::Const(Value::Int(-2)));
        assert_eq!(b[2].to_string(), "chan_amf_ue := auth_request");
        assert!(parse_actions("").unwrap().is_empty());
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_expr("a & ").is_err());
        assert!(parse_expr("a b").is_err());
        assert!(parse_expr("x < foo").is_err());
        assert!(parse_actions("x := x + 2").is_err());
    }
}
