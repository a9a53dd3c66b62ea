//! Line-oriented model files.
//!
//! ```text
//! # comments and blank lines are ignored
//! rule                      | tree                          | net
//! 0 <= 10                   | node 0 2 3.5 1 2              | layer 4 3
//! 3 >= 2.5                  | leaf 1 0.2                    | w w w w      (3 rows of 4)
//!                           | leaf 2 0.9                    | bias b b b
//!                           |                               | layer 3 1
//!                           |                               | w w w
//!                           |                               | bias b
//! ```
//!
//! `node id feature threshold left right` sends `x[feature] <= threshold` to
//! `left`. The first tree entry is the root. Net weights are one line per
//! output unit.

use std::collections::HashMap;
use std::path::Path;

use super::{Classifier, Layer, ModelError, ModelKind, NetModel, RuleClassifierModel, TreeModel, TreeNode};
use crate::schema::{Direction, Rule, RuleComponent};

struct Line<'a> {
    number: usize,
    tokens: Vec<&'a str>,
}

fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        (!tokens.is_empty()).then_some(Line {
            number: i + 1,
            tokens,
        })
    })
}

fn number(line: &Line<'_>, token: usize) -> Result<f64, ModelError> {
    let text = line.tokens.get(token).ok_or_else(|| ModelError::Syntax {
        line: line.number,
        detail: format!("expected a value at token {}", token + 1),
    })?;
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ModelError::BadNumber {
            line: line.number,
            token: token + 1,
            text: text.to_string(),
        }),
    }
}

fn index(line: &Line<'_>, token: usize) -> Result<usize, ModelError> {
    let text = line.tokens.get(token).ok_or_else(|| ModelError::Syntax {
        line: line.number,
        detail: format!("expected an integer at token {}", token + 1),
    })?;
    text.parse::<usize>().map_err(|_| ModelError::BadNumber {
        line: line.number,
        token: token + 1,
        text: text.to_string(),
    })
}

fn arity(line: &Line<'_>, expected: usize) -> Result<(), ModelError> {
    if line.tokens.len() != expected {
        return Err(ModelError::Syntax {
            line: line.number,
            detail: format!("expected {expected} tokens, found {}", line.tokens.len()),
        });
    }
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Classifier, ModelError> {
    let text = std::fs::read_to_string(path)?;
    Ok(Classifier::new(parse_model(&text)?))
}

pub fn parse_model(text: &str) -> Result<ModelKind, ModelError> {
    let mut it = lines(text);
    let header = it.next().ok_or_else(|| ModelError::Syntax {
        line: 1,
        detail: "empty model file".into(),
    })?;
    arity(&header, 1)?;
    let body: Vec<Line<'_>> = it.collect();
    match header.tokens[0] {
        "rule" => parse_rule(&body),
        "tree" => parse_tree(&body),
        "net" => parse_net(&body),
        tag => Err(ModelError::UnknownKind {
            line: header.number,
            tag: tag.to_string(),
        }),
    }
}

fn parse_rule(body: &[Line<'_>]) -> Result<ModelKind, ModelError> {
    let mut components = Vec::with_capacity(body.len());
    for line in body {
        arity(line, 3)?;
        let feature = index(line, 0)?;
        let direction = Direction::parse(line.tokens[1]).ok_or_else(|| ModelError::Syntax {
            line: line.number,
            detail: format!("unknown operator `{}`", line.tokens[1]),
        })?;
        components.push(RuleComponent::new(feature, direction, number(line, 2)?));
    }
    let rule = Rule::from_components(components).map_err(|e| ModelError::Invalid(e.to_string()))?;
    Ok(ModelKind::Rule(RuleClassifierModel::new(rule)))
}

enum RawNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

fn parse_tree(body: &[Line<'_>]) -> Result<ModelKind, ModelError> {
    let mut order: Vec<(usize, usize, RawNode)> = Vec::new();
    let mut position: HashMap<usize, usize> = HashMap::new();
    for line in body {
        let (id, node) = match line.tokens[0] {
            "node" => {
                arity(line, 6)?;
                (
                    index(line, 1)?,
                    RawNode::Split {
                        feature: index(line, 2)?,
                        threshold: number(line, 3)?,
                        left: index(line, 4)?,
                        right: index(line, 5)?,
                    },
                )
            }
            "leaf" => {
                arity(line, 3)?;
                (index(line, 1)?, RawNode::Leaf(number(line, 2)?))
            }
            other => {
                return Err(ModelError::Syntax {
                    line: line.number,
                    detail: format!("expected `node` or `leaf`, found `{other}`"),
                })
            }
        };
        if position.insert(id, order.len()).is_some() {
            return Err(ModelError::Syntax {
                line: line.number,
                detail: format!("duplicate node id {id}"),
            });
        }
        order.push((line.number, id, node));
    }
    let resolve = |line: usize, child: usize| {
        position.get(&child).copied().ok_or_else(|| ModelError::Syntax {
            line,
            detail: format!("unknown child id {child}"),
        })
    };
    let mut nodes = Vec::with_capacity(order.len());
    for (line, _, raw) in &order {
        nodes.push(match *raw {
            RawNode::Split {
                feature,
                threshold,
                left,
                right,
            } => TreeNode::Split {
                feature,
                threshold,
                left: resolve(*line, left)?,
                right: resolve(*line, right)?,
            },
            RawNode::Leaf(score) => TreeNode::Leaf { score },
        });
    }
    Ok(ModelKind::Tree(TreeModel::new(nodes)?))
}

fn parse_net(body: &[Line<'_>]) -> Result<ModelKind, ModelError> {
    let mut layers = Vec::new();
    let mut i = 0;
    while i < body.len() {
        let head = &body[i];
        if head.tokens[0] != "layer" {
            return Err(ModelError::Syntax {
                line: head.number,
                detail: format!("expected `layer`, found `{}`", head.tokens[0]),
            });
        }
        arity(head, 3)?;
        let inputs = index(head, 1)?;
        let outputs = index(head, 2)?;
        if inputs == 0 || outputs == 0 {
            return Err(ModelError::DimensionMismatch {
                line: head.number,
                detail: "layer dimensions must be positive".into(),
            });
        }
        if let Some(prev) = layers.last().map(|l: &Layer| l.outputs) {
            if prev != inputs {
                return Err(ModelError::DimensionMismatch {
                    line: head.number,
                    detail: format!("previous layer emits {prev} values, this layer expects {inputs}"),
                });
            }
        }
        i += 1;
        let mut weights = Vec::with_capacity(inputs * outputs);
        for _ in 0..outputs {
            let row = body.get(i).ok_or_else(|| ModelError::Syntax {
                line: head.number,
                detail: "layer ends before all weight rows".into(),
            })?;
            if row.tokens.len() != inputs {
                return Err(ModelError::DimensionMismatch {
                    line: row.number,
                    detail: format!("weight row has {} values, expected {inputs}", row.tokens.len()),
                });
            }
            for t in 0..inputs {
                weights.push(number(row, t)?);
            }
            i += 1;
        }
        let bias_line = body.get(i).ok_or_else(|| ModelError::Syntax {
            line: head.number,
            detail: "layer is missing its bias line".into(),
        })?;
        if bias_line.tokens[0] != "bias" {
            return Err(ModelError::Syntax {
                line: bias_line.number,
                detail: format!("expected `bias`, found `{}`", bias_line.tokens[0]),
            });
        }
        if bias_line.tokens.len() != outputs + 1 {
            return Err(ModelError::DimensionMismatch {
                line: bias_line.number,
                detail: format!("bias has {} values, expected {outputs}", bias_line.tokens.len() - 1),
            });
        }
        let bias = (1..=outputs).map(|t| number(bias_line, t)).collect::<Result<Vec<_>, _>>()?;
        i += 1;
        layers.push(Layer::new(inputs, outputs, weights, bias)?);
    }
    let last_line = body.last().map_or(1, |l| l.number);
    match layers.last() {
        Some(l) if l.outputs != 1 => Err(ModelError::DimensionMismatch {
            line: last_line,
            detail: format!("network output dimension is {}, expected 1", l.outputs),
        }),
        _ => Ok(ModelKind::Net(NetModel::new(layers)?)),
    }
}

/// Serializes a model in the grammar accepted by [`parse_model`].
pub fn write_model(kind: &ModelKind) -> Result<String, ModelError> {
    let mut out = String::new();
    match kind {
        ModelKind::Rule(m) => {
            out.push_str("rule\n");
            for c in m.ground_truth.components() {
                out.push_str(&format!("{} {} {}\n", c.feature, c.direction, c.bound));
            }
        }
        ModelKind::Tree(t) => {
            out.push_str("tree\n");
            for (id, node) in t.nodes().iter().enumerate() {
                match node {
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => out.push_str(&format!("node {id} {feature} {threshold} {left} {right}\n")),
                    TreeNode::Leaf { score } => out.push_str(&format!("leaf {id} {score}\n")),
                }
            }
        }
        ModelKind::Net(n) => {
            out.push_str("net\n");
            for l in n.layers() {
                out.push_str(&format!("layer {} {}\n", l.inputs, l.outputs));
                for row in l.weights.chunks_exact(l.inputs) {
                    let row: Vec<String> = row.iter().map(f64::to_string).collect();
                    out.push_str(&row.join(" "));
                    out.push('\n');
                }
                let bias: Vec<String> = l.bias.iter().map(f64::to_string).collect();
                out.push_str(&format!("bias {}\n", bias.join(" ")));
            }
        }
        ModelKind::Custom { .. } => {
            return Err(ModelError::Invalid("custom models have no file form".into()))
        }
    }
    Ok(out)
}
