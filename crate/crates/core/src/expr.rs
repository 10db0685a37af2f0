//! Named operator generators for scenario files.
//!
//! ```text
//! expr   := [number '*'] call
//! call   := name | name '(' arg (',' arg)* ')'
//! arg    := expr | number
//! ```
//!
//! | generator                     | result                                   |
//! |-------------------------------|------------------------------------------|
//! | `pauli_x`, `pauli_y`, `pauli_z` | Pauli matrices                          |
//! | `identity(n)`, `zero(n)`      | `I_n`, `0_n`                               |
//! | `diag(a, b, …)`               | real diagonal                             |
//! | `spin_x(n)`, `spin_z(n)`      | spin-`(n−1)/2` operators                  |
//! | `kron(A, B, …)`               | Kronecker product, S-major                |
//! | `sum(A, B, …)`                | sum of equal-dimension operators          |
//! | `random_hermitian(n, seed)`   | seeded dense Hermitian                    |
//! | `mixed(n)`                    | `I_n / n`                                 |
//! | `basis(n, k)`                 | `|k⟩⟨k|`                                  |

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianOperator, C64};
use crate::model::random_hermitian;
use crate::rng::model_rng;

/// Evaluates an operator expression.
pub fn parse_operator(src: &str) -> Result<HermitianOperator> {
    let mut p = Parser { src, pos: 0 };
    let value = p.expr()?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    match value {
        Value::Op(op) => Ok(op),
        _ => Err(Error::invalid(format!("`{src}` does not describe an operator"))),
    }
}

enum Value {
    Op(HermitianOperator),
    Number(f64),
    Word,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::invalid(format!("{msg} at offset {} in `{}`", self.pos, self.src))
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Option<f64> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest
            .char_indices()
            .take_while(|&(i, c)| {
                c.is_ascii_digit()
                    || c == '.'
                    || ((c == '-' || c == '+') && (i == 0 || matches!(rest.as_bytes()[i - 1], b'e' | b'E')))
                    || ((c == 'e' || c == 'E') && i > 0)
            })
            .count();
        let x = rest[..len].parse::<f64>().ok()?;
        self.pos += len;
        Some(x)
    }

    fn word(&mut self) -> Option<String> {
        self.skip_ws();
        let len = self.rest().chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').count();
        if len == 0 || self.rest().starts_with(|c: char| c.is_ascii_digit()) {
            return None;
        }
        let w = self.rest()[..len].to_string();
        self.pos += len;
        Some(w)
    }

    fn expr(&mut self) -> Result<Value> {
        if let Some(x) = self.number() {
            if self.eat('*') {
                return match self.expr()? {
                    Value::Op(op) => Ok(Value::Op(op.scaled(x))),
                    _ => Err(self.error("expected an operator after `*`")),
                };
            }
            return Ok(Value::Number(x));
        }
        let name = self.word().ok_or_else(|| self.error("expected a generator name"))?;
        let mut args = Vec::new();
        if self.eat('(') {
            loop {
                args.push(self.expr()?);
                if self.eat(')') {
                    break;
                }
                if !self.eat(',') {
                    return Err(self.error("expected `,` or `)`"));
                }
            }
        }
        self.apply(&name, args)
    }

    fn apply(&self, name: &str, args: Vec<Value>) -> Result<Value> {
        let bad = |what: &str| Error::invalid(format!("`{name}`: {what}"));
        let count = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(bad(&format!("expected {n} argument(s), got {}", args.len())))
            }
        };
        let size = |v: &Value| -> Result<usize> {
            match v {
                Value::Number(x) if *x >= 1.0 && x.fract() == 0.0 => Ok(*x as usize),
                _ => Err(bad("expected a positive integer")),
            }
        };
        let ops = |args: Vec<Value>| -> Result<Vec<HermitianOperator>> {
            if args.is_empty() {
                return Err(bad("expected at least one operator"));
            }
            args.into_iter()
                .map(|a| match a {
                    Value::Op(op) => Ok(op),
                    _ => Err(bad("expected operator arguments")),
                })
                .collect()
        };
        let op = match name {
            "pauli_x" | "pauli_y" | "pauli_z" if !args.is_empty() => return Err(bad("takes no arguments")),
            "pauli_x" => HermitianOperator::pauli_x(),
            "pauli_y" => HermitianOperator::pauli_y(),
            "pauli_z" => HermitianOperator::pauli_z(),
            "identity" => {
                count(1)?;
                HermitianOperator::identity(size(&args[0])?)
            }
            "zero" => {
                count(1)?;
                HermitianOperator::zero(size(&args[0])?)
            }
            "mixed" => {
                count(1)?;
                let n = size(&args[0])?;
                HermitianOperator::identity(n).scaled(1.0 / n as f64)
            }
            "basis" => {
                count(2)?;
                let n = size(&args[0])?;
                let k = match &args[1] {
                    Value::Number(x) if *x >= 0.0 && x.fract() == 0.0 && (*x as usize) < n => *x as usize,
                    _ => return Err(bad("index must be an integer below the dimension")),
                };
                let mut d = vec![0.0; n];
                d[k] = 1.0;
                HermitianOperator::from_real_diagonal(&d)
            }
            "diag" => {
                let d = args
                    .iter()
                    .map(|a| match a {
                        Value::Number(x) => Ok(*x),
                        _ => Err(bad("expected numbers")),
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if d.is_empty() {
                    return Err(bad("expected at least one entry"));
                }
                HermitianOperator::from_real_diagonal(&d)
            }
            "spin_z" | "spin_x" => {
                count(1)?;
                spin(size(&args[0])?, name == "spin_x")
            }
            "kron" => {
                let mut it = ops(args)?.into_iter();
                let first = it.next().expect("non-empty");
                it.fold(first, |acc, op| acc.kron(&op))
            }
            "sum" => {
                let mut it = ops(args)?.into_iter();
                let first = it.next().expect("non-empty");
                it.try_fold(first, |acc, op| acc.plus(&op))?
            }
            "random_hermitian" => {
                count(2)?;
                let n = size(&args[0])?;
                let seed = match &args[1] {
                    Value::Number(x) if *x >= 0.0 && x.fract() == 0.0 => *x as u64,
                    _ => return Err(bad("seed must be a non-negative integer")),
                };
                random_hermitian(n, &mut model_rng(seed))
            }
            _ if args.is_empty() => return Ok(Value::Word),
            _ => return Err(bad("unknown generator")),
        };
        Ok(Value::Op(op))
    }
}

/// `S_z` or `S_x` for spin `(n − 1)/2`.
fn spin(n: usize, x_component: bool) -> HermitianOperator {
    let s = (n as f64 - 1.0) / 2.0;
    if !x_component {
        let d: Vec<f64> = (0..n).map(|k| s - k as f64).collect();
        return HermitianOperator::from_real_diagonal(&d);
    }
    let m = ComplexMatrix::from_fn(n, n, |r, c| {
        let (mr, mc) = (s - r as f64, s - c as f64);
        if (mr - mc).abs() == 1.0 {
            let lo = mr.min(mc);
            C64::new(0.5 * (s * (s + 1.0) - lo * (lo + 1.0)).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    HermitianOperator::new(m).expect("spin matrices are real symmetric")
}
