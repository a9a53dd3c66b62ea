use std::cmp::Ordering;

use super::ScoredRule;
use crate::consistency::{ConsistencyLevel, Level};

/// Fitness in `[0, 1]` from the consistency level and the cardinality.
pub fn fitness(cardinality: usize, n: usize, level: ConsistencyLevel, m: usize, s: usize) -> f64 {
    let size_term = if n == 0 {
        0.25
    } else {
        0.25 * (1.0 - cardinality as f64 / (2 * n) as f64)
    };
    match level.level {
        Level::Fdc => {
            let data_term = if m == 0 { 1.0 } else { 1.0 - level.vd as f64 / m as f64 };
            size_term + 0.25 * data_term
        }
        Level::Fgc => {
            let sample_term = if s == 0 { 1.0 } else { 1.0 - level.vs as f64 / s as f64 };
            size_term + 0.25 * sample_term + 0.25
        }
        Level::Gc => size_term + 0.75,
    }
}

/// Selection order: stronger level first, then higher fitness, then smaller
/// cardinality, then canonical rule order.
pub fn rank_order(a: &ScoredRule, b: &ScoredRule) -> Ordering {
    b.level
        .level
        .cmp(&a.level.level)
        .then(b.score.total_cmp(&a.score))
        .then(a.rule.cardinality().cmp(&b.rule.cardinality()))
        .then_with(|| a.rule.cmp(&b.rule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Rule, RuleComponent};

    fn lvl(vd: usize, vs: usize) -> ConsistencyLevel {
        ConsistencyLevel::from_counts(vd, vs)
    }

    #[test]
    fn formula_values() {
        assert_eq!(fitness(0, 4, lvl(0, 0), 100, 1000), 1.0);
        assert!((fitness(2, 4, lvl(0, 0), 100, 1000) - 0.9375).abs() < 1e-12);
        assert_eq!(fitness(8, 4, lvl(100, 0), 100, 1000), 0.0);
        // FGC: 0.25*(1-2/8) + 0.25*(1-500/1000) + 0.25
        assert!((fitness(2, 4, lvl(0, 500), 100, 1000) - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn raw_formula_ties_across_levels() {
        // FGC with |R| = 0 and VS = 0 would tie GC with |R| = 2n; the level
        // field keeps them apart in the ranking.
        let fgc = ConsistencyLevel { level: Level::Fgc, vd: 0, vs: 0 };
        assert_eq!(fitness(0, 3, fgc, 10, 10), fitness(6, 3, lvl(0, 0), 10, 10));
        let a = ScoredRule { rule: Rule::empty(), level: fgc, score: 0.75, cf_verified: false };
        let b = ScoredRule {
            rule: Rule::from_components([RuleComponent::leq(0, 1.0)]).unwrap(),
            level: lvl(0, 0),
            score: 0.75,
            cf_verified: false,
        };
        assert_eq!(rank_order(&b, &a), Ordering::Less);
    }
}
