//! Package names, versions and packages.
//!
//! Names form a tagged union: user-visible atoms plus one constructor per
//! synthetic name introduced by a lowering pass. Constructors are injective,
//! so a lowered name can always be decoded back into the construct that
//! produced it. The textual form of every constructor is prefixed with a tag
//! and angle brackets (`feat<D,alpha>`), which atoms may not contain.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::ext::formulae::PackageFormula;

pub type VersionSet = BTreeSet<Version>;

/// Dot-separated non-negative integers. Trailing zero segments are
/// insignificant: `1.4` and `1.4.0` compare, hash and test equal.
#[derive(Clone, Debug)]
pub struct NumericVersion(Vec<u64>);

impl NumericVersion {
    pub fn new(segments: Vec<u64>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("numeric version needs at least one segment"));
        }
        Ok(NumericVersion(segments))
    }

    pub fn segments(&self) -> &[u64] {
        &self.0
    }

    pub fn major(&self) -> u64 {
        self.0[0]
    }

    fn significant(&self) -> &[u64] {
        let end = self.0.iter().rposition(|&s| s != 0).map_or(0, |i| i + 1);
        &self.0[..end]
    }
}

impl PartialEq for NumericVersion {
    fn eq(&self, other: &Self) -> bool {
        self.significant() == other.significant()
    }
}

impl Eq for NumericVersion {}

impl Ord for NumericVersion {
    fn cmp(&self, other: &Self) -> Ordering {
        // Comparing the significant prefixes lexicographically is the same as
        // comparing zero-padded sequences segment by segment.
        self.significant().cmp(other.significant())
    }
}

impl PartialOrd for NumericVersion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for NumericVersion {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.significant().hash(state);
    }
}

impl fmt::Display for NumericVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Value of a granularity function.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GranToken {
    /// The constant granularity; every version collapses into one class.
    Epsilon,
    Of(Box<Version>),
}

impl GranToken {
    pub fn of(v: Version) -> Self {
        GranToken::Of(Box::new(v))
    }
}

impl fmt::Display for GranToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GranToken::Epsilon => f.write_str("eps"),
            GranToken::Of(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Version {
    Numeric(NumericVersion),
    /// Guard version selected by the side that must be absent.
    Marker0,
    /// Guard version selected by the side that declares the exclusion.
    Marker1,
    /// Granular version of an intermediate package.
    Gran(GranToken),
    /// A package encoded as the version of a provider-choice package.
    Encoded(Box<Package>),
    /// A variable value, or any other opaque label.
    Value(String),
    /// Matches every version set. Only legal in a provides relation.
    Wildcard,
}

impl Version {
    /// Parses a numeric version such as `1.2.3`. Panics on malformed input;
    /// intended for literals in code and tests.
    pub fn num(text: &str) -> Version {
        crate::text::parse_version(text)
            .ok()
            .filter(|v| matches!(v, Version::Numeric(_)))
            .unwrap_or_else(|| panic!("not a numeric version: {text:?}"))
    }

    pub fn value(label: impl Into<String>) -> Version {
        Version::Value(label.into())
    }

    pub fn as_numeric(&self) -> Option<&NumericVersion> {
        match self {
            Version::Numeric(n) => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Version::Numeric(n) => write!(f, "{n}"),
            Version::Marker0 => f.write_str("#0"),
            Version::Marker1 => f.write_str("#1"),
            Version::Gran(t) => write!(f, "g:{t}"),
            Version::Encoded(p) => write!(f, "enc:{p}"),
            Version::Value(s) => write!(f, "val:{s}"),
            Version::Wildcard => f.write_str("*"),
        }
    }
}

/// Identity of a disjunction node: the package whose formula contains the
/// disjunction, and the (negation-normalised) disjunction itself.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FormulaNodeId {
    pub origin: Package,
    pub formula: PackageFormula,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PackageName {
    /// The reserved synthetic root. First variant so that it sorts first.
    Root,
    Atom(String),
    ConflictGuard {
        base: Box<PackageName>,
        versions: VersionSet,
    },
    Granular {
        base: Box<PackageName>,
        gran: GranToken,
    },
    Intermediate {
        owner: Box<Package>,
        target: Box<PackageName>,
    },
    FeatureGate {
        base: Box<PackageName>,
        feature: String,
    },
    Disjunction(Box<FormulaNodeId>),
    GlobalVar(String),
    LocalVar {
        pkg: Box<Package>,
        var: String,
    },
    ProviderChoice {
        depender: Box<Package>,
        target: Box<PackageName>,
    },
}

pub(crate) fn is_label_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '+' | '-')
}

pub(crate) fn check_label(kind: &str, s: &str) -> Result<()> {
    if s.is_empty() || !s.chars().all(is_label_char) {
        return Err(Error::invalid(format!(
            "{kind} {s:?} must be non-empty and use only [A-Za-z0-9._+-]"
        )));
    }
    Ok(())
}

impl PackageName {
    /// A user-visible name. Panics if the label is not a valid atom; use
    /// [`PackageName::try_atom`] for untrusted input.
    pub fn atom(label: &str) -> PackageName {
        Self::try_atom(label).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn try_atom(label: &str) -> Result<PackageName> {
        check_label("package name", label)?;
        Ok(PackageName::Atom(label.to_string()))
    }

    pub fn guard(base: PackageName, versions: VersionSet) -> PackageName {
        PackageName::ConflictGuard {
            base: Box::new(base),
            versions,
        }
    }

    pub fn granular(base: PackageName, gran: GranToken) -> PackageName {
        PackageName::Granular {
            base: Box::new(base),
            gran,
        }
    }

    pub fn intermediate(owner: Package, target: PackageName) -> PackageName {
        PackageName::Intermediate {
            owner: Box::new(owner),
            target: Box::new(target),
        }
    }

    pub fn gate(base: PackageName, feature: &str) -> PackageName {
        PackageName::FeatureGate {
            base: Box::new(base),
            feature: feature.to_string(),
        }
    }

    pub fn choice(depender: Package, target: PackageName) -> PackageName {
        PackageName::ProviderChoice {
            depender: Box::new(depender),
            target: Box::new(target),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        !matches!(self, PackageName::Atom(_))
    }
}

impl fmt::Display for PackageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PackageName::Root => f.write_str("<root>"),
            PackageName::Atom(s) => f.write_str(s),
            PackageName::ConflictGuard { base, versions } => {
                write!(f, "conflict<{base},{}>", DisplaySet(versions))
            }
            PackageName::Granular { base, gran } => write!(f, "gran<{base},{gran}>"),
            PackageName::Intermediate { owner, target } => write!(f, "inter<{owner},{target}>"),
            PackageName::FeatureGate { base, feature } => write!(f, "feat<{base},{feature}>"),
            PackageName::Disjunction(id) => write!(f, "or<{},{}>", id.origin, id.formula),
            PackageName::GlobalVar(v) => write!(f, "global<{v}>"),
            PackageName::LocalVar { pkg, var } => write!(f, "local<{pkg},{var}>"),
            PackageName::ProviderChoice { depender, target } => {
                write!(f, "provider<{depender},{target}>")
            }
        }
    }
}

/// Renders a version set as `{1,2,3}`.
pub struct DisplaySet<'a>(pub &'a VersionSet);

impl fmt::Display for DisplaySet<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Package {
    pub name: PackageName,
    pub version: Version,
}

impl Package {
    pub fn new(name: PackageName, version: Version) -> Package {
        Package { name, version }
    }

    /// The reserved root package `(<root>, #1)`.
    pub fn root() -> Package {
        Package::new(PackageName::Root, Version::Marker1)
    }

    /// Shorthand for an atom-named package with a numeric version.
    pub fn atom(name: &str, version: &str) -> Package {
        Package::new(PackageName::atom(name), Version::num(version))
    }

    pub fn is_root(&self) -> bool {
        self.name == PackageName::Root
    }
}

impl fmt::Display for Package {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.version)
    }
}

/// Builds a version set from numeric version literals.
pub fn versions(items: &[&str]) -> VersionSet {
    items.iter().map(|s| Version::num(s)).collect()
}
