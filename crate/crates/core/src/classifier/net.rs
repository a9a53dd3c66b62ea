use super::ModelError;

/// Dense layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self, ModelError> {
        if inputs == 0 || outputs == 0 {
            return Err(ModelError::Invalid("layer dimensions must be positive".into()));
        }
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(ModelError::Invalid(format!(
                "layer {inputs}x{outputs} has {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, b)| {
            row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b
        }));
    }
}

/// Feed-forward network: rectifier on hidden layers, sigmoid on the single output.
#[derive(Debug, Clone, PartialEq)]
pub struct NetModel {
    layers: Vec<Layer>,
}

impl NetModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self, ModelError> {
        let Some(last) = layers.last() else {
            return Err(ModelError::Invalid("network has no layers".into()));
        };
        if last.outputs != 1 {
            return Err(ModelError::Invalid(format!(
                "network output dimension is {}, expected 1",
                last.outputs
            )));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].outputs != w[1].inputs {
                return Err(ModelError::Invalid(format!(
                    "layer {i} emits {} values, layer {} expects {}",
                    w[0].outputs,
                    i + 1,
                    w[1].inputs
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        1.0 / (1.0 + (-cur[0]).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_single_layer() {
        let net = NetModel::new(vec![Layer::new(2, 1, vec![1.0, -1.0], vec![0.0]).unwrap()]).unwrap();
        assert!((net.score(&[1.0, 1.0]) - 0.5).abs() < 1e-12);
        assert!(net.score(&[3.0, 0.0]) > 0.95);
    }

    #[test]
    fn hidden_relu() {
        // hidden = relu(x0 - 1), out = sigmoid(2*hidden - 1)
        let net = NetModel::new(vec![
            Layer::new(1, 1, vec![1.0], vec![-1.0]).unwrap(),
            Layer::new(1, 1, vec![2.0], vec![-1.0]).unwrap(),
        ])
        .unwrap();
        let expected = 1.0 / (1.0 + (1.0f64).exp());
        assert!((net.score(&[0.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_layers() {
        let l1 = Layer::new(4, 3, vec![0.0; 12], vec![0.0; 3]).unwrap();
        let l2 = Layer::new(5, 1, vec![0.0; 5], vec![0.0]).unwrap();
        assert!(NetModel::new(vec![l1, l2]).is_err());
    }
}
