use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Hidden-unit activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "tanh")]
    Tanh,
    #[serde(rename = "step")]
    Step,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Step => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One hidden neuron: input weights (plus a trailing bias) and weighted
/// connections to output slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronGene {
    pub unit_id: u32,
    #[serde(with = "exact_weights")]
    pub in_weights: Vec<f64>,
    #[serde(with = "exact_targets")]
    pub out_targets: Vec<(u32, f64)>,
    pub activation: Activation,
}

impl NeuronGene {
    /// Random neuron with one target per output slot.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        unit_id: u32,
        input_dim: usize,
        output_dim: usize,
        scale: f64,
        w_max: f64,
    ) -> Self {
        let normal = Normal::new(0.0, scale).expect("positive scale");
        let mut draw = || normal.sample(rng).clamp(-w_max, w_max);
        let in_weights = (0..=input_dim).map(|_| draw()).collect();
        let out_targets = (0..output_dim as u32).map(|slot| (slot, draw())).collect();
        Self { unit_id, in_weights, out_targets, activation: Activation::Tanh }
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.in_weights.iter().copied().chain(self.out_targets.iter().map(|&(_, w)| w))
    }

    fn weights_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.in_weights.iter_mut().chain(self.out_targets.iter_mut().map(|(_, w)| w))
    }

    /// Gaussian perturbation of each weight with probability `rate`, clamped
    /// to `±w_max`.
    pub fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R, rate: f64, sigma: f64, w_max: f64) {
        let normal = Normal::new(0.0, sigma).expect("positive sigma");
        for w in self.weights_mut() {
            if rng.random::<f64>() < rate {
                *w = (*w + normal.sample(rng)).clamp(-w_max, w_max);
            }
        }
    }

    /// Uniform crossover: each weight comes from either parent with equal
    /// probability. Shape and activation follow `self`.
    pub fn crossover<R: Rng + ?Sized>(&self, other: &NeuronGene, rng: &mut R) -> NeuronGene {
        let mut child = self.clone();
        for (w, o) in child.weights_mut().zip(other.weights()) {
            if rng.random::<bool>() {
                *w = o;
            }
        }
        child
    }

    pub fn is_valid(&self, input_dim: usize, output_dim: usize, w_max: f64) -> bool {
        self.in_weights.len() == input_dim + 1
            && self.out_targets.iter().all(|&(slot, _)| (slot as usize) < output_dim)
            && self.weights().all(|w| w.is_finite() && w.abs() <= w_max)
    }
}

/// 17 significant digits: enough for an exact f64 round trip.
pub fn format_weight(w: f64) -> String {
    format!("{w:.16e}")
}

fn parse_weight<E: serde::de::Error>(text: &str) -> Result<f64, E> {
    text.parse::<f64>().map_err(|e| E::custom(format!("bad weight {text:?}: {e}")))
}

mod exact_weights {
    use super::*;

    pub fn serialize<S: Serializer>(weights: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(weights.iter().map(|&w| format_weight(w)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|t| parse_weight(t)).collect()
    }
}

mod exact_targets {
    use super::*;

    pub fn serialize<S: Serializer>(targets: &[(u32, f64)], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(targets.iter().map(|&(slot, w)| (slot, format_weight(w))))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(u32, f64)>, D::Error> {
        Vec::<(u32, String)>::deserialize(d)?
            .into_iter()
            .map(|(slot, t)| parse_weight(&t).map(|w| (slot, w)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::rng::{substream, Phase};

    #[test]
    fn json_shape() {
        let gene = NeuronGene {
            unit_id: 3,
            in_weights: vec![0.5, -1.0, 0.1],
            out_targets: vec![(0, 2.0)],
            activation: Activation::Step,
        };
        let v = serde_json::to_value(&gene).unwrap();
        assert_eq!(v["unit_id"], 3);
        assert_eq!(v["activation"], "step");
        assert_eq!(v["in_weights"][2], "1.0000000000000001e-1");
        assert_eq!(v["out_targets"][0][0], 0);
        assert_eq!(v["out_targets"][0][1], "2.0000000000000000e0");
        let back: NeuronGene = serde_json::from_value(v).unwrap();
        assert_eq!(back, gene);
    }

    #[test]
    fn mutation_identity_at_zero_rate() {
        let mut rng = substream(1, Phase::Init, 0, 0);
        let gene = NeuronGene::random(&mut rng, 0, 2, 1, 1.0, 5.0);
        let mut copy = gene.clone();
        copy.mutate(&mut rng, 0.0, 1.0, 5.0);
        assert_eq!(copy, gene);
    }

    #[test]
    fn mutation_respects_clamp() {
        let mut rng = substream(2, Phase::Init, 0, 0);
        let mut gene = NeuronGene::random(&mut rng, 0, 4, 4, 1.0, 5.0);
        for _ in 0..50 {
            gene.mutate(&mut rng, 1.0, 10.0, 5.0);
        }
        assert!(gene.is_valid(4, 4, 5.0));
    }

    #[test]
    fn crossover_mixes_only_parent_values() {
        let mut rng = substream(3, Phase::Init, 0, 0);
        let a = NeuronGene::random(&mut rng, 0, 2, 1, 1.0, 5.0);
        let b = NeuronGene::random(&mut rng, 1, 2, 1, 1.0, 5.0);
        let child = a.crossover(&b, &mut rng);
        for ((c, x), y) in child.weights().zip(a.weights()).zip(b.weights()) {
            assert!(c == x || c == y);
        }
    }

    proptest! {
        #[test]
        fn weights_round_trip_exactly(ws in prop::collection::vec(any::<f64>().prop_filter("finite", |w| w.is_finite()), 1..8)) {
            let gene = NeuronGene { unit_id: 0, in_weights: ws.clone(), out_targets: vec![(0, ws[0])], activation: Activation::Tanh };
            let text = serde_json::to_string(&gene).unwrap();
            let back: NeuronGene = serde_json::from_str(&text).unwrap();
            for (a, b) in back.in_weights.iter().zip(&ws) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
