//! Feature schemas, instances, rules and the bound constraints rules induce.
//!
//! Every feature has a finite, strictly ascending domain. A [`Rule`] is a
//! conjunction of [`RuleComponent`]s, each of which bounds one feature from
//! above (`<=`) or below (`>=`). Rules used as explanations are *anchored*:
//! each bound equals the explained instance's value on that feature.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("feature {feature}: domain is empty")]
    EmptyDomain { feature: usize },
    #[error("feature {feature}: domain must be strictly ascending and finite")]
    UnsortedDomain { feature: usize },
    #[error("feature at position {position} declares index {index}")]
    BadIndex { position: usize, index: usize },
    #[error("instance has {got} values, schema has {expected} features")]
    Arity { expected: usize, got: usize },
    #[error("feature {feature}: value {value} is not in the domain")]
    OutOfDomain { feature: usize, value: f64 },
    #[error("component on feature {feature} has bound {bound}, anchor value is {anchor}")]
    NotRelevant {
        feature: usize,
        bound: f64,
        anchor: f64,
    },
    #[error("feature {feature} has two {direction} components with different bounds")]
    DuplicateSlot {
        feature: usize,
        direction: Direction,
    },
    #[error("feature index {feature} out of range for {n} features")]
    NoSuchFeature { feature: usize, n: usize },
    #[error("rule line {line}: {detail}")]
    RuleSyntax { line: usize, detail: String },
    #[error("rule admits no instance on feature {feature}")]
    EmptyRestriction { feature: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub index: usize,
    pub name: String,
    domain: Vec<f64>,
    /// Set when the feature collapses a group of one-hot columns.
    pub group: Option<String>,
}

impl FeatureSchema {
    pub fn new(
        index: usize,
        name: impl Into<String>,
        domain: Vec<f64>,
        group: Option<String>,
    ) -> Result<Self, SchemaError> {
        if domain.is_empty() {
            return Err(SchemaError::EmptyDomain { feature: index });
        }
        let ascending = domain.iter().all(|v| v.is_finite())
            && domain.windows(2).all(|w| w[0] < w[1]);
        if !ascending {
            return Err(SchemaError::UnsortedDomain { feature: index });
        }
        Ok(Self {
            index,
            name: name.into(),
            domain,
            group,
        })
    }

    pub fn domain(&self) -> &[f64] {
        &self.domain
    }

    pub fn min(&self) -> f64 {
        self.domain[0]
    }

    pub fn max(&self) -> f64 {
        self.domain[self.domain.len() - 1]
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn position(&self, value: f64) -> Option<usize> {
        self.domain
            .binary_search_by(|probe| probe.total_cmp(&value))
            .ok()
    }

    pub fn contains(&self, value: f64) -> bool {
        self.position(value).is_some()
    }

    /// Inclusive index range of domain values inside `[lower, upper]`.
    pub fn index_range(&self, lower: Option<f64>, upper: Option<f64>) -> Option<(usize, usize)> {
        let lo = match lower {
            Some(b) => self.domain.partition_point(|v| *v < b),
            None => 0,
        };
        let hi_excl = match upper {
            Some(b) => self.domain.partition_point(|v| *v <= b),
            None => self.domain.len(),
        };
        (lo < hi_excl).then(|| (lo, hi_excl - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    features: Vec<FeatureSchema>,
}

impl DatasetSchema {
    pub fn new(features: Vec<FeatureSchema>) -> Result<Self, SchemaError> {
        for (position, f) in features.iter().enumerate() {
            if f.index != position {
                return Err(SchemaError::BadIndex {
                    position,
                    index: f.index,
                });
            }
        }
        Ok(Self { features })
    }

    /// Builds a schema with features named `F0..F{n-1}`.
    pub fn from_domains(domains: Vec<Vec<f64>>) -> Result<Self, SchemaError> {
        let features = domains
            .into_iter()
            .enumerate()
            .map(|(j, d)| FeatureSchema::new(j, format!("F{j}"), d, None))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(features)
    }

    pub fn n(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[FeatureSchema] {
        &self.features
    }

    pub fn feature(&self, j: usize) -> &FeatureSchema {
        &self.features[j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn check(&self, values: &[f64]) -> Result<(), SchemaError> {
        if values.len() != self.n() {
            return Err(SchemaError::Arity {
                expected: self.n(),
                got: values.len(),
            });
        }
        for (j, (&v, f)) in values.iter().zip(&self.features).enumerate() {
            if !f.contains(v) {
                return Err(SchemaError::OutOfDomain {
                    feature: j,
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// `|Inst|` as a float, saturating gracefully for huge spaces.
    pub fn space_size(&self) -> f64 {
        self.features.iter().map(|f| f.domain.len() as f64).product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instance(Vec<f64>);

impl Instance {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn checked(schema: &DatasetSchema, values: Vec<f64>) -> Result<Self, SchemaError> {
        schema.check(&values)?;
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// Feature indices where `self` and `other` differ.
    pub fn diff(&self, other: &Instance) -> Vec<usize> {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .filter(|(_, (a, b))| a.to_bits() != b.to_bits())
            .map(|(j, _)| j)
            .collect()
    }
}

impl From<Vec<f64>> for Instance {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: DatasetSchema,
    instances: Vec<Instance>,
}

impl Dataset {
    pub fn new(schema: DatasetSchema, instances: Vec<Instance>) -> Result<Self, SchemaError> {
        for x in &instances {
            schema.check(x.values())?;
        }
        Ok(Self { schema, instances })
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn m(&self) -> usize {
        self.instances.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "<=")]
    Leq,
    #[serde(rename = ">=")]
    Geq,
}

impl Direction {
    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Leq => "<=",
            Direction::Geq => ">=",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "<=" => Some(Direction::Leq),
            ">=" => Some(Direction::Geq),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A single bound predicate `F_j <= bound` or `F_j >= bound`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RuleComponent {
    pub feature: usize,
    pub direction: Direction,
    pub bound: f64,
}

impl RuleComponent {
    pub fn new(feature: usize, direction: Direction, bound: f64) -> Self {
        Self {
            feature,
            direction,
            bound,
        }
    }

    pub fn leq(feature: usize, bound: f64) -> Self {
        Self::new(feature, Direction::Leq, bound)
    }

    pub fn geq(feature: usize, bound: f64) -> Self {
        Self::new(feature, Direction::Geq, bound)
    }

    /// The component on the same slot whose bound is the anchor's value.
    pub fn anchored_at(self, anchor: &Instance) -> Self {
        Self::new(self.feature, self.direction, anchor.get(self.feature))
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        let v = x[self.feature];
        match self.direction {
            Direction::Leq => v <= self.bound,
            Direction::Geq => v >= self.bound,
        }
    }

    /// Position of this component among the `2n` (feature, direction) slots.
    pub fn slot(&self) -> usize {
        2 * self.feature
            + match self.direction {
                Direction::Leq => 0,
                Direction::Geq => 1,
            }
    }
}

impl PartialEq for RuleComponent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RuleComponent {}

impl Ord for RuleComponent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.feature
            .cmp(&other.feature)
            .then(self.direction.cmp(&other.direction))
            .then(self.bound.total_cmp(&other.bound))
    }
}

impl PartialOrd for RuleComponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for RuleComponent {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.feature.hash(state);
        self.direction.hash(state);
        self.bound.to_bits().hash(state);
    }
}

impl fmt::Display for RuleComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{} {} {}", self.feature, self.direction, self.bound)
    }
}

/// A conjunction of rule components, kept sorted by feature then direction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rule {
    components: Vec<RuleComponent>,
}

impl Rule {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a rule with free bounds, as used for ground-truth classifiers.
    pub fn from_components(
        components: impl IntoIterator<Item = RuleComponent>,
    ) -> Result<Self, SchemaError> {
        let mut components: Vec<RuleComponent> = components.into_iter().collect();
        components.sort();
        components.dedup();
        for w in components.windows(2) {
            if w[0].feature == w[1].feature && w[0].direction == w[1].direction {
                return Err(SchemaError::DuplicateSlot {
                    feature: w[0].feature,
                    direction: w[0].direction,
                });
            }
        }
        Ok(Self { components })
    }

    /// Builds a rule relevant to `anchor`; every bound must equal the anchor value.
    pub fn anchored(
        anchor: &Instance,
        components: impl IntoIterator<Item = RuleComponent>,
    ) -> Result<Self, SchemaError> {
        let rule = Self::from_components(components)?;
        for c in &rule.components {
            if c.feature >= anchor.len() {
                return Err(SchemaError::NoSuchFeature {
                    feature: c.feature,
                    n: anchor.len(),
                });
            }
            let a = anchor.get(c.feature);
            if a.to_bits() != c.bound.to_bits() {
                return Err(SchemaError::NotRelevant {
                    feature: c.feature,
                    bound: c.bound,
                    anchor: a,
                });
            }
        }
        Ok(rule)
    }

    /// All `2n` components relevant to `anchor`.
    pub fn trivial(anchor: &Instance) -> Self {
        Self {
            components: relevant_components(anchor),
        }
    }

    /// Caller guarantees sorted, duplicate-free, at most one bound per slot.
    pub(crate) fn from_sorted_unchecked(components: Vec<RuleComponent>) -> Self {
        debug_assert!(components.windows(2).all(|w| w[0] < w[1]));
        Self { components }
    }

    pub fn components(&self) -> &[RuleComponent] {
        &self.components
    }

    /// Number of components; an equality costs two.
    pub fn cardinality(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn contains(&self, c: &RuleComponent) -> bool {
        self.components.binary_search(c).is_ok()
    }

    pub fn eval(&self, x: &[f64]) -> bool {
        self.components.iter().all(|c| c.holds(x))
    }

    /// Checked evaluation: rejects instances that do not fit the schema.
    pub fn try_eval(&self, schema: &DatasetSchema, x: &Instance) -> Result<bool, SchemaError> {
        schema.check(x.values())?;
        for c in &self.components {
            if c.feature >= schema.n() {
                return Err(SchemaError::NoSuchFeature {
                    feature: c.feature,
                    n: schema.n(),
                });
            }
        }
        Ok(self.eval(x.values()))
    }

    pub fn is_relevant_to(&self, anchor: &Instance) -> bool {
        self.components.iter().all(|c| {
            c.feature < anchor.len() && anchor.get(c.feature).to_bits() == c.bound.to_bits()
        })
    }

    pub fn with(&self, c: RuleComponent) -> Self {
        let mut out = self.clone();
        if let Err(pos) = out.components.binary_search(&c) {
            out.components.insert(pos, c);
        }
        out
    }

    pub fn without(&self, c: &RuleComponent) -> Self {
        let mut out = self.clone();
        if let Ok(pos) = out.components.binary_search(c) {
            out.components.remove(pos);
        }
        out
    }

    pub fn union(&self, other: &Rule) -> Self {
        let mut components: Vec<RuleComponent> = self
            .components
            .iter()
            .chain(&other.components)
            .copied()
            .collect();
        components.sort();
        components.dedup();
        Self { components }
    }

    pub fn is_subset_of(&self, other: &Rule) -> bool {
        self.components.iter().all(|c| other.contains(c))
    }

    pub fn to_plaf(&self) -> PlafConstraint {
        PlafConstraint::from_rule(self)
    }

    /// Renders the rule with schema feature names, one component per line.
    pub fn to_rule_file(&self, schema: &DatasetSchema) -> String {
        let mut out = String::new();
        for c in &self.components {
            out.push_str(&format!(
                "{} {} {}\n",
                schema.feature(c.feature).name,
                c.direction,
                c.bound
            ));
        }
        out
    }

    /// Parses `feature_name op bound` lines; `#` comments and blank lines are skipped.
    pub fn parse_rule_file(text: &str, schema: &DatasetSchema) -> Result<Self, SchemaError> {
        let mut comps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |detail: String| SchemaError::RuleSyntax { line: i + 1, detail };
            let mut parts = line.rsplitn(3, char::is_whitespace);
            let (bound, op, name) = match (parts.next(), parts.next(), parts.next()) {
                (Some(b), Some(o), Some(n)) => (b, o, n.trim()),
                _ => return Err(err(format!("expected `feature op bound`, got {line:?}"))),
            };
            let direction = Direction::parse(op).ok_or_else(|| err(format!("unknown operator {op:?}")))?;
            let bound: f64 = bound
                .parse()
                .ok()
                .filter(|b: &f64| b.is_finite())
                .ok_or_else(|| err(format!("bad bound {bound:?}")))?;
            let feature = schema.index_of(name).ok_or_else(|| err(format!("unknown feature {name:?}")))?;
            comps.push(RuleComponent::new(feature, direction, bound));
        }
        Self::from_components(comps)
    }

    pub fn describe(&self, schema: &DatasetSchema) -> String {
        if self.components.is_empty() {
            return "TRUE".to_string();
        }
        self.components
            .iter()
            .map(|c| format!("{} {} {}", schema.feature(c.feature).name, c.direction, c.bound))
            .collect::<Vec<_>>()
            .join(" AND ")
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return f.write_str("{}");
        }
        f.write_str("{")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("}")
    }
}

/// The `2n` components relevant to `anchor`, in canonical order.
pub fn relevant_components(anchor: &Instance) -> Vec<RuleComponent> {
    anchor
        .values()
        .iter()
        .enumerate()
        .flat_map(|(j, &v)| [RuleComponent::leq(j, v), RuleComponent::geq(j, v)])
        .collect()
}

/// A disjunction of components that all conflict with one instance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DualClause {
    components: Vec<RuleComponent>,
}

impl DualClause {
    pub fn new(components: impl IntoIterator<Item = RuleComponent>) -> Self {
        let mut components: Vec<RuleComponent> = components.into_iter().collect();
        components.sort();
        components.dedup();
        Self { components }
    }

    pub fn components(&self) -> &[RuleComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn is_hit_by(&self, rule: &Rule) -> bool {
        self.components.iter().any(|c| rule.contains(c))
    }

    /// Disjunctive evaluation.
    pub fn eval(&self, x: &[f64]) -> bool {
        self.components.iter().any(|c| c.holds(x))
    }
}

impl fmt::Display for DualClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str(" OR ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Inclusive bounds on one feature.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bounds {
    pub fn allows(&self, v: f64) -> bool {
        self.lower.is_none_or(|b| v >= b) && self.upper.is_none_or(|b| v <= b)
    }

    pub fn frozen(&self) -> Option<f64> {
        match (self.lower, self.upper) {
            (Some(l), Some(u)) if l == u => Some(l),
            _ => None,
        }
    }
}

/// Conjunctive per-feature bound constraints; features without an entry are free.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlafConstraint {
    bounds: BTreeMap<usize, Bounds>,
}

impl PlafConstraint {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn from_rule(rule: &Rule) -> Self {
        let mut bounds: BTreeMap<usize, Bounds> = BTreeMap::new();
        for c in rule.components() {
            let b = bounds.entry(c.feature).or_default();
            match c.direction {
                Direction::Leq => b.upper = Some(b.upper.map_or(c.bound, |u| u.min(c.bound))),
                Direction::Geq => b.lower = Some(b.lower.map_or(c.bound, |l| l.max(c.bound))),
            }
        }
        Self { bounds }
    }

    pub fn bounds(&self, feature: usize) -> Bounds {
        self.bounds.get(&feature).copied().unwrap_or_default()
    }

    pub fn is_unconstrained(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn constrained_features(&self) -> impl Iterator<Item = (usize, Bounds)> + '_ {
        self.bounds.iter().map(|(&j, &b)| (j, b))
    }

    pub fn allows(&self, x: &[f64]) -> bool {
        self.bounds
            .iter()
            .all(|(&j, b)| j < x.len() && b.allows(x[j]))
    }

    /// Per-feature inclusive index ranges of admissible domain values.
    pub fn index_ranges(&self, schema: &DatasetSchema) -> Result<Vec<(usize, usize)>, SchemaError> {
        if let Some((&j, _)) = self.bounds.iter().find(|(&j, _)| j >= schema.n()) {
            return Err(SchemaError::NoSuchFeature {
                feature: j,
                n: schema.n(),
            });
        }
        schema
            .features()
            .iter()
            .map(|f| {
                let b = self.bounds(f.index);
                f.index_range(b.lower, b.upper)
                    .ok_or(SchemaError::EmptyRestriction { feature: f.index })
            })
            .collect()
    }

    /// Number of instances admitted by the constraint.
    pub fn space_size(&self, schema: &DatasetSchema) -> Result<f64, SchemaError> {
        Ok(self
            .index_ranges(schema)?
            .iter()
            .map(|(lo, hi)| (hi - lo + 1) as f64)
            .product())
    }
}
