//! The textual map grammar.
//!
//! ```text
//! spec  := atom ( ('∘' | '*') atom )*
//! atom  := name [ '(' args ')' ]
//! ```
//!
//! Composition is right to left: in `blaschke(z^2;1)∘hopf` the Hopf map is
//! applied first. Atoms:
//!
//! | atom                     | type    | meaning                                 |
//! |--------------------------|---------|-----------------------------------------|
//! | `hopf`                   | S³ → S² | `(2 z w̄, |z|² − |w|²)`                   |
//! | `equator(a1,a2,a3)`      | S³ → S² | `φ_{−a}(x′/|x′|)`, singular at `x₄ = ±1` |
//! | `const(p1,p2,p3)`        | S³ → S² | constant map                            |
//! | `rot(r11,…,r44)`         | S³ → S³ | orthogonal 4×4 matrix, row major         |
//! | `conf(a1,a2,a3,a4)`      | S³ → S³ | Möbius map `φ_a` of S³                   |
//! | `rot3(r11,…,r33)`        | S² → S² | orthogonal 3×3 matrix, row major         |
//! | `mobius(a1,a2,a3)`       | S² → S² | Möbius map `φ_a` of S²                   |
//! | `blaschke(p;q)`          | S² → S² | rational map `p/q` in the chart `σ_N`    |
//! | `antipodal`              | S² → S² | `p ↦ −p`                                 |
//! | `id`                     | S² → S² | identity                                |
//!
//! Polynomials are sums of terms `c`, `c z`, `c z^k` or `c*z^k` in the
//! variable `z`, with coefficients such as `2`, `-1.5`, `3i`, `i` or
//! `(1-2i)`.

use std::fmt;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use num_complex::Complex64;

use super::mobius;
use super::rational::RationalMap;
use crate::error::{Error, Result};

pub const ORTHOGONALITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    S3,
    S2,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Atom {
    Hopf,
    Equator(Vector3<f64>),
    Constant(Vector3<f64>),
    Rotate(Matrix4<f64>),
    Conformal(Vector4<f64>),
    Rotate3(Matrix3<f64>),
    Mobius(Vector3<f64>),
    Rational(RationalMap),
    Antipodal,
    Identity,
}

impl Atom {
    pub fn domain(&self) -> Space {
        match self {
            Atom::Hopf | Atom::Equator(_) | Atom::Constant(_) | Atom::Rotate(_) | Atom::Conformal(_) => Space::S3,
            _ => Space::S2,
        }
    }

    pub fn codomain(&self) -> Space {
        match self {
            Atom::Rotate(_) | Atom::Conformal(_) => Space::S3,
            _ => Space::S2,
        }
    }

    /// Checked constructors for atoms built programmatically.
    pub fn rotate(r: Matrix4<f64>) -> Result<Atom> {
        let e = (r.transpose() * r - Matrix4::identity()).amax();
        if !(e <= ORTHOGONALITY_TOL) {
            return Err(Error::domain(format!("rotation is not orthogonal (|RᵀR − I| = {e:e})")));
        }
        Ok(Atom::Rotate(r))
    }

    pub fn rotate3(r: Matrix3<f64>) -> Result<Atom> {
        let e = (r.transpose() * r - Matrix3::identity()).amax();
        if !(e <= ORTHOGONALITY_TOL) {
            return Err(Error::domain(format!("rotation is not orthogonal (|RᵀR − I| = {e:e})")));
        }
        Ok(Atom::Rotate3(r))
    }

    pub fn conformal(a: Vector4<f64>) -> Result<Atom> {
        mobius::check_parameter(&a)?;
        Ok(Atom::Conformal(a))
    }

    pub fn mobius(a: Vector3<f64>) -> Result<Atom> {
        mobius::check_parameter(&a)?;
        Ok(Atom::Mobius(a))
    }

    pub fn equator(a: Vector3<f64>) -> Result<Atom> {
        mobius::check_parameter(&a)?;
        Ok(Atom::Equator(a))
    }

    pub fn constant(p: Vector3<f64>) -> Result<Atom> {
        let n = p.norm();
        if !((n - 1.0).abs() <= 1e-10) {
            return Err(Error::domain(format!("constant value must be a unit vector (|p| = {n})")));
        }
        Ok(Atom::Constant(p / n))
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, values: impl IntoIterator<Item = f64>) -> fmt::Result {
    for (k, v) in values.into_iter().enumerate() {
        if k > 0 {
            f.write_str(",")?;
        }
        write!(f, "{v}")?;
    }
    Ok(())
}

fn write_poly(f: &mut fmt::Formatter<'_>, c: &[Complex64]) -> fmt::Result {
    let mut first = true;
    for (k, ck) in c.iter().enumerate() {
        if ck.re == 0.0 && ck.im == 0.0 && c.len() > 1 {
            continue;
        }
        if !first {
            f.write_str("+")?;
        }
        first = false;
        write!(f, "({}{:+}i)", ck.re, ck.im)?;
        match k {
            0 => {}
            1 => f.write_str("z")?,
            _ => write!(f, "z^{k}")?,
        }
    }
    if first {
        f.write_str("0")?;
    }
    Ok(())
}

impl fmt::Display for Atom {
    /// Canonical text; re-parses to an equal atom (floats print round-trip).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Hopf => f.write_str("hopf"),
            Atom::Antipodal => f.write_str("antipodal"),
            Atom::Identity => f.write_str("id"),
            Atom::Equator(a) => {
                f.write_str("equator(")?;
                write_list(f, a.iter().copied())?;
                f.write_str(")")
            }
            Atom::Constant(p) => {
                f.write_str("const(")?;
                write_list(f, p.iter().copied())?;
                f.write_str(")")
            }
            Atom::Mobius(a) => {
                f.write_str("mobius(")?;
                write_list(f, a.iter().copied())?;
                f.write_str(")")
            }
            Atom::Conformal(a) => {
                f.write_str("conf(")?;
                write_list(f, a.iter().copied())?;
                f.write_str(")")
            }
            Atom::Rotate(r) => {
                f.write_str("rot(")?;
                write_list(f, r.transpose().iter().copied())?;
                f.write_str(")")
            }
            Atom::Rotate3(r) => {
                f.write_str("rot3(")?;
                write_list(f, r.transpose().iter().copied())?;
                f.write_str(")")
            }
            Atom::Rational(v) => {
                f.write_str("blaschke(")?;
                write_poly(f, v.numerator())?;
                f.write_str(";")?;
                write_poly(f, v.denominator())?;
                f.write_str(")")
            }
        }
    }
}

/// A parsed composition, atoms stored in written order (outermost first).
#[derive(Clone, Debug, PartialEq)]
pub struct MapSpec {
    atoms: Vec<Atom>,
}

impl MapSpec {
    pub fn parse(text: &str) -> Result<MapSpec> {
        Parser::new(text).spec()
    }

    pub fn from_atoms(atoms: Vec<Atom>) -> Result<MapSpec> {
        if atoms.is_empty() {
            return Err(Error::domain("empty composition"));
        }
        let spec = MapSpec { atoms };
        spec.type_check()?;
        Ok(spec)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Domain of the composition (domain of the innermost atom).
    pub fn domain(&self) -> Space {
        self.atoms.last().map_or(Space::S2, Atom::domain)
    }

    pub fn codomain(&self) -> Space {
        self.atoms.first().map_or(Space::S2, Atom::codomain)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &MapSpec) -> Result<MapSpec> {
        let mut atoms = self.atoms.clone();
        atoms.extend(inner.atoms.iter().cloned());
        MapSpec::from_atoms(atoms)
    }

    fn type_check(&self) -> Result<()> {
        for (k, pair) in self.atoms.windows(2).enumerate() {
            let (outer, inner) = (&pair[0], &pair[1]);
            if inner.codomain() != outer.domain() {
                return Err(Error::domain(format!(
                    "cannot compose `{outer}` after `{inner}` (atom {} maps into {:?}, atom {} expects {:?})",
                    k + 2,
                    inner.codomain(),
                    k + 1,
                    outer.domain()
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, a) in self.atoms.iter().enumerate() {
            if k > 0 {
                f.write_str("∘")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for MapSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<MapSpec> {
        MapSpec::parse(s)
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

fn syntax(position: usize, message: impl Into<String>) -> Error {
    Error::Syntax { position, message: message.into() }
}

impl Parser {
    fn new(text: &str) -> Parser {
        Parser { chars: text.chars().collect(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(syntax(self.pos, format!("expected `{c}`")))
        }
    }

    fn spec(&mut self) -> Result<MapSpec> {
        let mut atoms = vec![self.atom()?];
        loop {
            self.skip_ws();
            match self.peek() {
                None => break,
                Some('∘') | Some('*') => {
                    self.pos += 1;
                    atoms.push(self.atom()?);
                }
                Some(c) => return Err(syntax(self.pos, format!("unexpected `{c}`, expected `∘`"))),
            }
        }
        MapSpec::from_atoms(atoms)
    }

    fn ident(&mut self) -> Result<(usize, String)> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(syntax(start, "expected a map atom"));
        }
        Ok((start, self.chars[start..self.pos].iter().collect()))
    }

    fn atom(&mut self) -> Result<Atom> {
        let (start, name) = self.ident()?;
        let at = |e: Error| match e {
            Error::Domain(m) => Error::Domain(format!("in `{name}` at position {start}: {m}")),
            other => other,
        };
        let atom = match name.as_str() {
            "hopf" => Atom::Hopf,
            "antipodal" => Atom::Antipodal,
            "id" => Atom::Identity,
            "equator" => Atom::equator(Vector3::from_column_slice(&self.numbers(3)?)).map_err(at)?,
            "const" => Atom::constant(Vector3::from_column_slice(&self.numbers(3)?)).map_err(at)?,
            "mobius" => Atom::mobius(Vector3::from_column_slice(&self.numbers(3)?)).map_err(at)?,
            "conf" => Atom::conformal(Vector4::from_column_slice(&self.numbers(4)?)).map_err(at)?,
            "rot" => Atom::rotate(Matrix4::from_row_slice(&self.numbers(16)?)).map_err(at)?,
            "rot3" => Atom::rotate3(Matrix3::from_row_slice(&self.numbers(9)?)).map_err(at)?,
            "blaschke" => {
                self.expect('(')?;
                let p = self.poly()?;
                self.expect(';')?;
                let q = self.poly()?;
                self.expect(')')?;
                Atom::Rational(RationalMap::new(p, q).map_err(at)?)
            }
            _ => return Err(syntax(start, format!("unknown map atom `{name}`"))),
        };
        if matches!(atom, Atom::Hopf | Atom::Antipodal | Atom::Identity) {
            self.skip_ws();
            if self.peek() == Some('(') {
                return Err(syntax(self.pos, format!("`{name}` takes no arguments")));
            }
        }
        Ok(atom)
    }

    fn numbers(&mut self, count: usize) -> Result<Vec<f64>> {
        self.expect('(')?;
        let mut out = Vec::with_capacity(count);
        loop {
            out.push(self.signed_number()?);
            if self.eat(',') {
                continue;
            }
            let here = self.pos;
            self.expect(')')?;
            if out.len() != count {
                return Err(syntax(here, format!("expected {count} arguments, found {}", out.len())));
            }
            return Ok(out);
        }
    }

    fn signed_number(&mut self) -> Result<f64> {
        self.skip_ws();
        let neg = match self.peek() {
            Some('-') => {
                self.pos += 1;
                true
            }
            Some('+') => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        let v = self.number()?;
        Ok(if neg { -v } else { v })
    }

    /// Unsigned decimal literal with optional exponent.
    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(syntax(start, "expected a number"));
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let v: f64 = text.parse().map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
        if !v.is_finite() {
            return Err(syntax(start, "number out of range"));
        }
        Ok(v)
    }

    /// A real literal optionally followed by `i`, or a bare `i`.
    fn complex_unit(&mut self) -> Result<Option<Complex64>> {
        self.skip_ws();
        match self.peek() {
            Some('i') => {
                self.pos += 1;
                Ok(Some(Complex64::new(0.0, 1.0)))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let v = self.number()?;
                self.skip_ws();
                if self.peek() == Some('i') {
                    self.pos += 1;
                    Ok(Some(Complex64::new(0.0, v)))
                } else {
                    Ok(Some(Complex64::new(v, 0.0)))
                }
            }
            _ => Ok(None),
        }
    }

    /// Parenthesised complex constant such as `(1-2i)`.
    fn complex_group(&mut self) -> Result<Complex64> {
        self.expect('(')?;
        let mut total = Complex64::new(0.0, 0.0);
        let mut first = true;
        loop {
            self.skip_ws();
            let sign = match self.peek() {
                Some('-') => {
                    self.pos += 1;
                    -1.0
                }
                Some('+') => {
                    self.pos += 1;
                    1.0
                }
                Some(')') if !first => {
                    self.pos += 1;
                    return Ok(total);
                }
                _ if first => 1.0,
                Some(c) => return Err(syntax(self.pos, format!("unexpected `{c}` in complex constant"))),
                None => return Err(syntax(self.pos, "unterminated complex constant")),
            };
            let here = self.pos;
            let v = self.complex_unit()?.ok_or_else(|| syntax(here, "expected a number"))?;
            total += v * sign;
            first = false;
        }
    }

    fn poly(&mut self) -> Result<Vec<Complex64>> {
        let mut coeffs: Vec<Complex64> = Vec::new();
        let mut first = true;
        loop {
            self.skip_ws();
            let sign = match self.peek() {
                Some('-') => {
                    self.pos += 1;
                    -1.0
                }
                Some('+') => {
                    self.pos += 1;
                    1.0
                }
                _ if first => 1.0,
                _ => break,
            };
            let term_start = self.pos;
            self.skip_ws();
            let coef = if self.peek() == Some('(') {
                Some(self.complex_group()?)
            } else {
                self.complex_unit()?
            };
            let explicit_mul = self.eat('*');
            self.skip_ws();
            let power = if self.peek() == Some('z') {
                self.pos += 1;
                if self.eat('^') {
                    self.skip_ws();
                    let here = self.pos;
                    let e = self.number()?;
                    if e.fract() != 0.0 || !(0.0..=64.0).contains(&e) {
                        return Err(syntax(here, "exponent must be an integer in 0..=64"));
                    }
                    e as usize
                } else {
                    1
                }
            } else if coef.is_none() || explicit_mul {
                return Err(syntax(self.pos, "expected a coefficient or `z`"));
            } else {
                0
            };
            if coef.is_none() && power == 0 {
                return Err(syntax(term_start, "empty term"));
            }
            let c = coef.unwrap_or(Complex64::new(1.0, 0.0)) * sign;
            if coeffs.len() <= power {
                coeffs.resize(power + 1, Complex64::new(0.0, 0.0));
            }
            coeffs[power] += c;
            first = false;
        }
        if coeffs.is_empty() {
            return Err(syntax(self.pos, "expected a polynomial"));
        }
        Ok(coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_hopf() {
        let s = MapSpec::parse("hopf").unwrap();
        assert_eq!(s.atoms(), &[Atom::Hopf]);
        assert_eq!(s.domain(), Space::S3);
        assert_eq!(s.codomain(), Space::S2);
    }

    #[test]
    fn postcomposition_order() {
        let s = MapSpec::parse("blaschke(z^2;1)∘hopf").unwrap();
        assert_eq!(s.atoms().len(), 2);
        assert_eq!(s.atoms()[1], Atom::Hopf);
        match &s.atoms()[0] {
            Atom::Rational(v) => {
                assert_eq!(v.numerator(), &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
                assert_eq!(v.denominator(), &[c(1.0, 0.0)]);
            }
            other => panic!("unexpected atom {other:?}"),
        }
        assert_eq!(MapSpec::parse("blaschke(z^2;1) * hopf").unwrap(), s);
    }

    #[test]
    fn equator_atom() {
        let s = MapSpec::parse("equator(0.95,0,0)").unwrap();
        assert_eq!(s.atoms(), &[Atom::Equator(Vector3::new(0.95, 0.0, 0.0))]);
    }

    #[test]
    fn complex_coefficients() {
        let s = MapSpec::parse("blaschke((1-2i)z^3 - 0.5*z + i; 2 + 3i z)∘hopf").unwrap();
        let Atom::Rational(v) = &s.atoms()[0] else { panic!() };
        assert_eq!(v.numerator(), &[c(0.0, 1.0), c(-0.5, 0.0), c(0.0, 0.0), c(1.0, -2.0)]);
        assert_eq!(v.denominator(), &[c(2.0, 0.0), c(0.0, 3.0)]);
    }

    #[test]
    fn syntax_errors_report_position() {
        match MapSpec::parse("hopf ∘ foo") {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 7),
            other => panic!("{other:?}"),
        }
        match MapSpec::parse("equator(0.1,0.2)") {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 15),
            other => panic!("{other:?}"),
        }
        assert!(matches!(MapSpec::parse(""), Err(Error::Syntax { position: 0, .. })));
        assert!(matches!(MapSpec::parse("hopf hopf"), Err(Error::Syntax { position: 5, .. })));
        assert!(matches!(MapSpec::parse("hopf(1)"), Err(Error::Syntax { .. })));
        assert!(matches!(MapSpec::parse("blaschke(z^;1)∘hopf"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(MapSpec::parse("equator(1,0,0)"), Err(Error::Domain(_))));
        assert!(matches!(MapSpec::parse("const(1,1,0)"), Err(Error::Domain(_))));
        assert!(matches!(
            MapSpec::parse("hopf∘rot(1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1.001)"),
            Err(Error::Domain(_))
        ));
        assert!(matches!(MapSpec::parse("blaschke(z^2-1;z-1)∘hopf"), Err(Error::Domain(_))));
    }

    #[test]
    fn type_errors() {
        assert!(MapSpec::parse("hopf∘hopf").is_err());
        assert!(MapSpec::parse("rot3(1,0,0,0,1,0,0,0,1)∘rot(1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1)").is_err());
        assert!(MapSpec::parse("hopf∘conf(0,0,0,0.5)∘rot(1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1)").is_ok());
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "hopf",
            "mobius(0.125,-0.3,0.1)∘blaschke((1-2i)z^3+i;z+0.5)∘hopf∘conf(0.1,0.2,0.3,0.4)",
            "rot3(0,1,0,-1,0,0,0,0,1)∘equator(0.9,0,0)∘rot(0,1,0,0,-1,0,0,0,0,0,1,0,0,0,0,1)",
            "antipodal∘const(0,0,1)",
            "id",
        ] {
            let s = MapSpec::parse(text).unwrap();
            let again = MapSpec::parse(&s.to_string()).unwrap();
            assert_eq!(s, again, "{text} -> {s}");
        }
    }
}
