use crate::cf::CfError;
use crate::duality::CfContext;
use crate::schema::Rule;

/// Drops components one at a time while the oracle still verifies the rule,
/// until a full pass removes nothing.
pub fn reduce_redundancy(rule: &Rule, ctx: &CfContext<'_>) -> Result<Rule, CfError> {
    let mut current = rule.clone();
    loop {
        let mut removed = false;
        for c in current.components().to_vec() {
            let smaller = current.without(&c);
            if ctx.is_consistent(&smaller)? {
                current = smaller;
                removed = true;
            }
        }
        if !removed {
            return Ok(current);
        }
    }
}
