//! Textual syntax for names, versions, packages and formulae.
//!
//! Every `Display` impl in the crate renders something this module parses
//! back, so `parse(x.to_string()) == x` for all values.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::ext::formulae::PackageFormula;
use crate::name::{
    is_label_char, FormulaNodeId, GranToken, NumericVersion, Package, PackageName, Version,
    VersionSet,
};
use crate::versions::{CmpOp, VersionFormula};

pub fn parse_name(text: &str) -> Result<PackageName> {
    Parser::new(text).complete(Parser::name)
}

pub fn parse_version(text: &str) -> Result<Version> {
    Parser::new(text).complete(Parser::version)
}

pub fn parse_package(text: &str) -> Result<Package> {
    Parser::new(text).complete(Parser::package)
}

/// Parses `{1.0,2}`; braces are optional for a single version.
pub fn parse_version_set(text: &str) -> Result<VersionSet> {
    Parser::new(text).complete(Parser::version_set)
}

pub fn parse_version_formula(text: &str) -> Result<VersionFormula> {
    Parser::new(text).complete(Parser::vf_or)
}

pub fn parse_package_formula(text: &str) -> Result<PackageFormula> {
    Parser::new(text).complete(Parser::pf_or)
}

pub(crate) struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Parser { src, pos: 0 }
    }

    fn complete<T>(mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        self.skip_ws();
        let out = f(&mut self)?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(out)
    }

    /// A parser positioned at byte `pos` of `src`; errors report positions in `src`.
    pub(crate) fn at(src: &'a str, pos: usize) -> Self {
        Parser { src, pos }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> Error {
        Error::parse_at(self.src, self.pos, msg)
    }

    pub(crate) fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub(crate) fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    pub(crate) fn eat(&mut self, token: &str) -> bool {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn label(&mut self) -> Result<&'a str> {
        let rest = self.rest();
        let len = rest.find(|c: char| !is_label_char(c)).unwrap_or(rest.len());
        if len == 0 {
            return Err(self.error("expected a label"));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    pub(crate) fn name(&mut self) -> Result<PackageName> {
        if self.eat("<root>") {
            return Ok(PackageName::Root);
        }
        let start = self.pos;
        let label = self.label()?;
        if !self.eat("<") {
            return Ok(PackageName::Atom(label.to_string()));
        }
        let name = match label {
            "conflict" => {
                let base = self.name()?;
                self.expect(",")?;
                let versions = self.version_set()?;
                PackageName::guard(base, versions)
            }
            "gran" => {
                let base = self.name()?;
                self.expect(",")?;
                let gran = self.gran_token()?;
                PackageName::granular(base, gran)
            }
            "inter" => {
                let owner = self.package()?;
                self.expect(",")?;
                let target = self.name()?;
                PackageName::intermediate(owner, target)
            }
            "feat" => {
                let base = self.name()?;
                self.expect(",")?;
                let feature = self.label()?;
                PackageName::gate(base, feature)
            }
            "or" => {
                let origin = self.package()?;
                self.expect(",")?;
                self.skip_ws();
                let formula = self.pf_or()?;
                self.skip_ws();
                PackageName::Disjunction(Box::new(FormulaNodeId { origin, formula }))
            }
            "global" => PackageName::GlobalVar(self.label()?.to_string()),
            "local" => {
                let pkg = self.package()?;
                self.expect(",")?;
                let var = self.label()?.to_string();
                PackageName::LocalVar {
                    pkg: Box::new(pkg),
                    var,
                }
            }
            "provider" => {
                let depender = self.package()?;
                self.expect(",")?;
                let target = self.name()?;
                PackageName::choice(depender, target)
            }
            other => {
                self.pos = start;
                return Err(self.error(format!("unknown name constructor `{other}`")));
            }
        };
        self.expect(">")?;
        Ok(name)
    }

    fn gran_token(&mut self) -> Result<GranToken> {
        if self.eat("eps") {
            Ok(GranToken::Epsilon)
        } else {
            Ok(GranToken::of(self.version()?))
        }
    }

    pub(crate) fn version(&mut self) -> Result<Version> {
        if self.eat("#0") {
            Ok(Version::Marker0)
        } else if self.eat("#1") {
            Ok(Version::Marker1)
        } else if self.eat("g:") {
            Ok(Version::Gran(self.gran_token()?))
        } else if self.eat("enc:") {
            Ok(Version::Encoded(Box::new(self.package()?)))
        } else if self.eat("val:") {
            Ok(Version::Value(self.label()?.to_string()))
        } else if self.eat("*") {
            Ok(Version::Wildcard)
        } else {
            self.numeric().map(Version::Numeric)
        }
    }

    fn numeric(&mut self) -> Result<NumericVersion> {
        let mut segments = Vec::new();
        loop {
            let rest = self.rest();
            let len = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
            if len == 0 {
                return Err(self.error("expected a version"));
            }
            let seg = rest[..len]
                .parse::<u64>()
                .map_err(|_| self.error("version segment out of range"))?;
            segments.push(seg);
            self.pos += len;
            // A dot only continues the version when a digit follows.
            let r = self.rest();
            if r.starts_with('.') && r[1..].starts_with(|c: char| c.is_ascii_digit()) {
                self.pos += 1;
            } else {
                break;
            }
        }
        NumericVersion::new(segments)
    }

    pub(crate) fn package(&mut self) -> Result<Package> {
        let name = self.name()?;
        self.expect("@")?;
        let version = self.version()?;
        Ok(Package::new(name, version))
    }

    pub(crate) fn version_set(&mut self) -> Result<VersionSet> {
        let mut set = BTreeSet::new();
        if !self.eat("{") {
            set.insert(self.version()?);
            return Ok(set);
        }
        self.skip_ws();
        if self.eat("}") {
            return Ok(set);
        }
        loop {
            self.skip_ws();
            set.insert(self.version()?);
            self.skip_ws();
            if self.eat("}") {
                return Ok(set);
            }
            self.expect(",")?;
        }
    }

    fn cmp_op(&mut self) -> Result<CmpOp> {
        for (tok, op) in [
            (">=", CmpOp::Ge),
            ("<=", CmpOp::Le),
            ("!=", CmpOp::Ne),
            (">", CmpOp::Gt),
            ("<", CmpOp::Lt),
            ("==", CmpOp::Eq),
            ("=", CmpOp::Eq),
        ] {
            if self.eat(tok) {
                return Ok(op);
            }
        }
        Err(self.error("expected a comparison operator"))
    }

    fn vf_or(&mut self) -> Result<VersionFormula> {
        let mut lhs = self.vf_and()?;
        loop {
            self.skip_ws();
            if !self.eat("|") {
                return Ok(lhs);
            }
            self.skip_ws();
            let rhs = self.vf_and()?;
            lhs = VersionFormula::Or(Box::new(lhs), Box::new(rhs));
        }
    }

    fn vf_and(&mut self) -> Result<VersionFormula> {
        let mut lhs = self.vf_atom()?;
        loop {
            self.skip_ws();
            if !self.eat("&") {
                return Ok(lhs);
            }
            self.skip_ws();
            let rhs = self.vf_atom()?;
            lhs = VersionFormula::And(Box::new(lhs), Box::new(rhs));
        }
    }

    fn vf_atom(&mut self) -> Result<VersionFormula> {
        self.skip_ws();
        if self.eat("*") {
            return Ok(VersionFormula::Top);
        }
        if self.eat("(") {
            self.skip_ws();
            let inner = self.vf_or()?;
            self.skip_ws();
            self.expect(")")?;
            return Ok(inner);
        }
        let op = self.cmp_op()?;
        self.skip_ws();
        let v = self.numeric()?;
        Ok(VersionFormula::Cmp(op, Version::Numeric(v)))
    }

    fn pf_or(&mut self) -> Result<PackageFormula> {
        let mut lhs = self.pf_and()?;
        loop {
            self.skip_ws();
            if !self.eat("|") {
                return Ok(lhs);
            }
            self.skip_ws();
            let rhs = self.pf_and()?;
            lhs = PackageFormula::Or(Box::new(lhs), Box::new(rhs));
        }
    }

    fn pf_and(&mut self) -> Result<PackageFormula> {
        let mut lhs = self.pf_unary()?;
        loop {
            self.skip_ws();
            if !self.eat("&") {
                return Ok(lhs);
            }
            self.skip_ws();
            let rhs = self.pf_unary()?;
            lhs = PackageFormula::And(Box::new(lhs), Box::new(rhs));
        }
    }

    fn pf_unary(&mut self) -> Result<PackageFormula> {
        self.skip_ws();
        if self.eat("!") {
            let inner = self.pf_unary()?;
            return Ok(PackageFormula::Not(Box::new(inner)));
        }
        if self.eat("(") {
            self.skip_ws();
            let inner = self.pf_or()?;
            self.skip_ws();
            self.expect(")")?;
            return Ok(inner);
        }
        if self.eat("$") {
            let (var, op, value) = self.var_cmp()?;
            return Ok(PackageFormula::Global { var, op, value });
        }
        if self.eat("%") {
            let (var, op, value) = self.var_cmp()?;
            return Ok(PackageFormula::Local { var, op, value });
        }
        let on = self.name()?;
        self.expect("@")?;
        let versions = self.version_set()?;
        Ok(PackageFormula::Dep { on, versions })
    }

    fn var_cmp(&mut self) -> Result<(String, CmpOp, String)> {
        let var = self.label()?.to_string();
        self.skip_ws();
        let op = self.cmp_op()?;
        self.skip_ws();
        let value = self.label()?.to_string();
        Ok((var, op, value))
    }
}
