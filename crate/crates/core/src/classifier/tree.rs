use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        score: f64,
    },
}

/// Binary decision tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    nodes: Vec<TreeNode>,
}

impl TreeModel {
    pub fn new(nodes: Vec<TreeNode>) -> Result<Self, ModelError> {
        if nodes.is_empty() {
            return Err(ModelError::Invalid("tree has no nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                TreeNode::Split {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if !threshold.is_finite() {
                        return Err(ModelError::Invalid(format!("node {i}: threshold is not finite")));
                    }
                    if left >= nodes.len() || right >= nodes.len() {
                        return Err(ModelError::Invalid(format!("node {i}: child out of range")));
                    }
                }
                TreeNode::Leaf { score } => {
                    if !(0.0..=1.0).contains(&score) {
                        return Err(ModelError::Invalid(format!("leaf {i}: score {score} outside [0, 1]")));
                    }
                }
            }
        }
        // Every node must be reached exactly once from the root: rules out
        // cycles, shared children and orphans.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(ModelError::Invalid(format!("node {i} is reached twice")));
            }
            if let TreeNode::Split { left, right, .. } = nodes[i] {
                stack.push(right);
                stack.push(left);
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(ModelError::Invalid(format!("node {orphan} is unreachable from the root")));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min_features(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(feature + 1),
                TreeNode::Leaf { .. } => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
                TreeNode::Leaf { score } => return score,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cycles_and_orphans() {
        let cyc = TreeModel::new(vec![
            TreeNode::Split { feature: 0, threshold: 1.0, left: 0, right: 1 },
            TreeNode::Leaf { score: 0.0 },
        ]);
        assert!(cyc.is_err());
        let orphan = TreeModel::new(vec![TreeNode::Leaf { score: 0.0 }, TreeNode::Leaf { score: 1.0 }]);
        assert!(orphan.is_err());
        let bad_leaf = TreeModel::new(vec![TreeNode::Leaf { score: 1.5 }]);
        assert!(bad_leaf.is_err());
    }
}
