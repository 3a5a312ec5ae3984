use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::ExtendedInstance;

/// One lowering pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtensionTag {
    VersionFormulae,
    Conflicts,
    Concurrent,
    Peer,
    Features,
    PackageFormulae,
    VariableFormulae,
    Virtual,
    Optional,
    Singular,
}

impl ExtensionTag {
    pub const ALL: [ExtensionTag; 10] = [
        ExtensionTag::VersionFormulae,
        ExtensionTag::Conflicts,
        ExtensionTag::Concurrent,
        ExtensionTag::Peer,
        ExtensionTag::Features,
        ExtensionTag::PackageFormulae,
        ExtensionTag::VariableFormulae,
        ExtensionTag::Virtual,
        ExtensionTag::Optional,
        ExtensionTag::Singular,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ExtensionTag::VersionFormulae => "version-formulae",
            ExtensionTag::Conflicts => "conflicts",
            ExtensionTag::Concurrent => "concurrent",
            ExtensionTag::Peer => "peer",
            ExtensionTag::Features => "features",
            ExtensionTag::PackageFormulae => "package-formulae",
            ExtensionTag::VariableFormulae => "variable-formulae",
            ExtensionTag::Virtual => "virtual",
            ExtensionTag::Optional => "optional",
            ExtensionTag::Singular => "singular",
        }
    }

    /// Position in the default lowering order.
    fn rank(self) -> usize {
        use ExtensionTag::*;
        [VersionFormulae, Virtual, Features, Concurrent, Peer, Conflicts, PackageFormulae, VariableFormulae, Optional, Singular]
            .iter()
            .position(|t| *t == self)
            .expect("every tag is ranked")
    }
}

impl fmt::Display for ExtensionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ExtensionTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExtensionTag::ALL
            .into_iter()
            .find(|t| t.label() == s)
            .ok_or_else(|| Error::invalid(format!("unknown extension {s:?}")))
    }
}

/// Lowering passes in the order they run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtensionStack(Vec<ExtensionTag>);

impl ExtensionStack {
    pub fn new(tags: impl IntoIterator<Item = ExtensionTag>) -> Self {
        ExtensionStack(tags.into_iter().collect())
    }

    /// The default order for a set of tags.
    pub fn canonical(tags: impl IntoIterator<Item = ExtensionTag>) -> Self {
        let mut tags: Vec<ExtensionTag> = tags.into_iter().collect();
        tags.sort_by_key(|t| t.rank());
        tags.dedup();
        ExtensionStack(tags)
    }

    pub fn tags(&self) -> &[ExtensionTag] {
        &self.0
    }

    pub fn contains(&self, t: ExtensionTag) -> bool {
        self.0.contains(&t)
    }

    fn position(&self, t: ExtensionTag) -> Option<usize> {
        self.0.iter().position(|x| *x == t)
    }
}

impl FromStr for ExtensionStack {
    type Err = Error;

    /// Comma-separated tags; the empty string is the empty stack.
    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()
            .map(ExtensionStack)
    }
}

impl fmt::Display for ExtensionStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<&str> = self.0.iter().map(|t| t.label()).collect();
        f.write_str(&items.join(","))
    }
}

fn reject(rule: &'static str, message: impl Into<String>) -> Error {
    Error::Stack { rule, message: message.into() }
}

/// Checks the ordering rules on their own, without an instance.
pub fn validate_order(stack: &ExtensionStack) -> Result<()> {
    use ExtensionTag::*;
    let at = |t| stack.position(t);
    for (i, t) in stack.0.iter().enumerate() {
        if stack.0[..i].contains(t) {
            return Err(reject("duplicate-pass", format!("{t} appears twice")));
        }
    }
    if at(VersionFormulae).is_some_and(|i| i != 0) {
        return Err(reject("version-formulae-first", "version formulae are evaluated before any other pass"));
    }
    if at(Singular).is_some() {
        if let Some(t) = stack.0.iter().find(|t| !matches!(t, Singular | Optional)) {
            return Err(reject("singular-alone", format!("singular dependencies exclude {t}")));
        }
    }
    if let (Some(f), Some(c)) = (at(Features), at(Concurrent)) {
        if f > c {
            return Err(reject("features-before-concurrent", "features must be lowered before concurrent versions"));
        }
    }
    if let Some(c) = at(Concurrent) {
        for t in [Conflicts, PackageFormulae, VariableFormulae] {
            if at(t).is_some_and(|i| i < c) {
                return Err(reject(
                    "concurrent-before-exclusion",
                    format!("{t} relies on version uniqueness and must come after concurrent"),
                ));
            }
        }
    }
    if let Some(p) = at(Peer) {
        if at(Concurrent).is_none_or(|c| c + 1 != p) {
            return Err(reject("peer-after-concurrent", "peer must directly follow concurrent"));
        }
    }
    if at(Features).is_some() {
        if let Some(t) = [PackageFormulae, VariableFormulae].into_iter().find(|t| at(*t).is_some()) {
            return Err(reject("interacting-extensions", format!("features cannot be combined with {t}")));
        }
    }
    if let Some(v) = at(VariableFormulae) {
        if at(PackageFormulae).is_none_or(|p| p + 1 != v) {
            return Err(reject("variables-after-formulae", "variable-formulae must directly follow package-formulae"));
        }
    }
    if let Some(v) = at(Virtual) {
        if at(Concurrent).is_some() {
            return Err(reject("virtual-without-concurrent", "virtual packages cannot be combined with concurrent versions"));
        }
        if let Some(t) = stack.0[..v].iter().find(|t| !matches!(t, VersionFormulae | Optional)) {
            return Err(reject("virtual-first", format!("virtual must be lowered before {t}")));
        }
    }
    Ok(())
}

/// The ordering rules, plus every extension the instance uses having a pass.
pub fn validate_stack(stack: &ExtensionStack, inst: &ExtendedInstance) -> Result<()> {
    validate_order(stack)?;
    if let Some(t) = inst.uses().into_iter().find(|t| !stack.contains(*t)) {
        return Err(reject("missing-pass", format!("the instance uses {t} but the stack has no such pass")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExtensionTag::*;

    fn check(tags: &[ExtensionTag]) -> std::result::Result<(), &'static str> {
        validate_order(&ExtensionStack::new(tags.iter().copied())).map_err(|e| match e {
            Error::Stack { rule, .. } => rule,
            other => panic!("unexpected {other}"),
        })
    }

    #[test]
    fn named_rules() {
        assert_eq!(check(&[VersionFormulae, Features, Concurrent]), Ok(()));
        assert_eq!(check(&[Concurrent, Features]), Err("features-before-concurrent"));
        assert_eq!(check(&[Concurrent, Conflicts]), Ok(()));
        assert_eq!(check(&[Conflicts, Concurrent]), Err("concurrent-before-exclusion"));
        assert_eq!(check(&[Peer]), Err("peer-after-concurrent"));
        assert_eq!(check(&[Singular, Conflicts]), Err("singular-alone"));
        assert_eq!(check(&[Conflicts, Conflicts]), Err("duplicate-pass"));
        assert_eq!(check(&[]), Ok(()));
    }

    #[test]
    fn canonical_order_is_accepted() {
        let all = ExtensionStack::canonical(ExtensionTag::ALL);
        assert!(validate_order(&all).is_err());
        let cargo = ExtensionStack::canonical([Concurrent, Features, VersionFormulae]);
        assert_eq!(cargo.to_string(), "version-formulae,features,concurrent");
        assert!(validate_order(&cargo).is_ok());
        assert_eq!("features, concurrent".parse::<ExtensionStack>().unwrap().tags(), &[Features, Concurrent]);
    }
}
