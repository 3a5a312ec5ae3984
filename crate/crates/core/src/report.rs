use std::fmt;

use crate::name::Package;

/// The resolution condition a violation breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    RootInclusion,
    DependencyClosure,
    VersionUniqueness,
    ConflictAvoidance,
    ParentClosure,
    VersionGranularity,
    PeerSatisfaction,
    FeatureClosure,
    AdditionalClosure,
    FeatureUnification,
    FormulaClosure,
    VirtualClosure,
    /// A witness (parent, provider, feature or assignment entry) that no
    /// condition accounts for.
    Unwitnessed,
}

impl Rule {
    pub fn label(self) -> &'static str {
        match self {
            Rule::RootInclusion => "root-inclusion",
            Rule::DependencyClosure => "dependency-closure",
            Rule::VersionUniqueness => "version-uniqueness",
            Rule::ConflictAvoidance => "conflict-avoidance",
            Rule::ParentClosure => "parent-closure",
            Rule::VersionGranularity => "version-granularity",
            Rule::PeerSatisfaction => "peer-satisfaction",
            Rule::FeatureClosure => "feature-closure",
            Rule::AdditionalClosure => "additional-closure",
            Rule::FeatureUnification => "feature-unification",
            Rule::FormulaClosure => "formula-closure",
            Rule::VirtualClosure => "virtual-closure",
            Rule::Unwitnessed => "unwitnessed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub rule: Rule,
    /// Packages witnessing the violation, e.g. the depender or the clashing pair.
    pub packages: Vec<Package>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule.label(), self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub(crate) fn push(&mut self, rule: Rule, packages: Vec<Package>, detail: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            packages,
            detail: detail.into(),
        });
    }

    pub(crate) fn finish(mut self) -> Self {
        self.violations.sort();
        self.violations.dedup();
        self
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
