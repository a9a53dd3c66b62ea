#![allow(dead_code)]

use cfrule::classifier::{is_bad, Classifier, ModelKind, TreeModel, TreeNode};
use cfrule::consistency::for_each_instance;
use cfrule::harness::grid_schema;
use cfrule::schema::{relevant_components, DatasetSchema, Direction, Instance, PlafConstraint, Rule, RuleComponent};
use rand::seq::SliceRandom;
use rand::Rng;

/// Small grid whose full instance space stays enumerable.
pub fn small_schema(rng: &mut impl Rng) -> DatasetSchema {
    let n = rng.gen_range(2..=5);
    let sizes: Vec<usize> = (0..n).map(|_| rng.gen_range(3..=6)).collect();
    grid_schema(n, &sizes).unwrap()
}

pub fn random_truth(schema: &DatasetSchema, rng: &mut impl Rng) -> Rule {
    let slots = 2 * schema.n();
    let k = rng.gen_range(1..=slots.min(4));
    let mut picked: Vec<usize> = (0..slots).collect();
    picked.shuffle(rng);
    let mut comps = Vec::new();
    for &slot in &picked[..k] {
        let j = slot / 2;
        let dom = schema.feature(j).domain();
        let b = dom[rng.gen_range(0..dom.len())];
        comps.push(RuleComponent::new(j, if slot % 2 == 0 { Direction::Leq } else { Direction::Geq }, b));
    }
    // Keep the accepted region non-empty when both bounds land on one feature.
    let mut fixed: Vec<RuleComponent> = Vec::new();
    for c in comps {
        let clash = fixed.iter().position(|o| o.feature == c.feature);
        match clash {
            Some(i) => {
                let o = fixed[i];
                let (lo, hi) = if o.direction == Direction::Geq { (o.bound, c.bound) } else { (c.bound, o.bound) };
                if lo <= hi {
                    fixed.push(c);
                }
            }
            None => fixed.push(c),
        }
    }
    Rule::from_components(fixed).unwrap()
}

/// Random depth-limited tree over the schema, with leaves on both sides of 0.5.
pub fn random_tree(schema: &DatasetSchema, rng: &mut impl Rng) -> Classifier {
    let mut nodes = Vec::new();
    grow(schema, rng, &mut nodes, 0);
    Classifier::new(ModelKind::Tree(TreeModel::new(nodes).unwrap()))
}

fn grow(schema: &DatasetSchema, rng: &mut impl Rng, nodes: &mut Vec<TreeNode>, depth: usize) -> usize {
    let id = nodes.len();
    if depth >= 3 || (depth > 0 && rng.gen_bool(0.3)) {
        let score = if rng.gen_bool(0.6) { rng.gen_range(0.0..0.5) } else { rng.gen_range(0.51..1.0) };
        nodes.push(TreeNode::Leaf { score });
        return id;
    }
    let feature = rng.gen_range(0..schema.n());
    let dom = schema.feature(feature).domain();
    let threshold = dom[rng.gen_range(0..dom.len() - 1)];
    nodes.push(TreeNode::Leaf { score: 0.0 });
    let left = grow(schema, rng, nodes, depth + 1);
    let right = grow(schema, rng, nodes, depth + 1);
    nodes[id] = TreeNode::Split { feature, threshold, left, right };
    id
}

/// Either a rule classifier or a random tree.
pub fn random_model(schema: &DatasetSchema, rng: &mut impl Rng) -> Classifier {
    if rng.gen_bool(0.5) {
        Classifier::from_rule(random_truth(schema, rng))
    } else {
        random_tree(schema, rng)
    }
}

pub fn all_instances(schema: &DatasetSchema) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for_each_instance(&PlafConstraint::unconstrained(), schema, 1_000_000, |x| {
        out.push(x.to_vec());
        true
    })
    .unwrap();
    out
}

/// A bad instance chosen uniformly, if the model has any.
pub fn random_bad(schema: &DatasetSchema, model: &Classifier, rng: &mut impl Rng) -> Option<Instance> {
    let bad: Vec<Vec<f64>> = all_instances(schema).into_iter().filter(|x| is_bad(model.score(x))).collect();
    bad.choose(rng).map(|x| Instance::new(x.clone()))
}

pub fn random_relevant_rule(anchor: &Instance, rng: &mut impl Rng) -> Rule {
    let comps: Vec<RuleComponent> = relevant_components(anchor).into_iter().filter(|_| rng.gen_bool(0.35)).collect();
    Rule::anchored(anchor, comps).unwrap()
}
