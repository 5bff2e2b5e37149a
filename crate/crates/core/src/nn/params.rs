//! Parameter accounting for models and attention modules.

use crate::real::Real;

use super::attention::{Hsa, Lsa};
use super::layers::{ParamTensor, Params};
use super::model::Model;

#[derive(Clone, Debug, PartialEq)]
pub struct ParamRow {
    pub name: String,
    pub shape: Vec<usize>,
    pub count: usize,
}

/// Per-tensor parameter counts and their total.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamTable {
    pub rows: Vec<ParamRow>,
    pub total: usize,
}

impl ParamTable {
    pub fn from_tensors<T>(tensors: &[ParamTensor<'_, T>]) -> Self {
        let rows: Vec<ParamRow> = tensors
            .iter()
            .map(|t| ParamRow { name: t.name.clone(), shape: t.shape.clone(), count: t.data.len() })
            .collect();
        let total = rows.iter().map(|r| r.count).sum();
        ParamTable { rows, total }
    }

    /// Counts only tensors named `*.weight`.
    pub fn weights_only(&self) -> usize {
        self.rows.iter().filter(|r| r.name.ends_with(".weight")).map(|r| r.count).sum()
    }

    /// Sums rows sharing a layer prefix (the name without `.weight`/`.bias`).
    pub fn by_layer(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for r in &self.rows {
            let layer = r.name.rsplit_once('.').map_or(r.name.as_str(), |(l, _)| l);
            match out.last_mut() {
                Some((name, n)) if name == layer => *n += r.count,
                _ => out.push((layer.to_string(), r.count)),
            }
        }
        out
    }
}

pub fn count_params<T: Real>(model: &Model<T>) -> ParamTable {
    ParamTable::from_tensors(&model.tensors())
}

/// Idealized LSA weight count per attention site, `2(r1²r2² + C²)/d`.
pub fn lsa_weight_formula(channels: usize, r1: usize, r2: usize, reduction: usize) -> f64 {
    let p = (r1 * r2) as f64;
    let c = channels as f64;
    2.0 * (p * p + c * c) / reduction as f64
}

/// Idealized HSA weight count per attention site, `2r1²r2²C²/d`.
pub fn hsa_weight_formula(channels: usize, r1: usize, r2: usize, reduction: usize) -> f64 {
    let n = (r1 * r2 * channels) as f64;
    2.0 * n * n / reduction as f64
}

/// Bias terms of one LSA site: `r1r2 + ⌈r1r2/d⌉ + C + ⌈C/d⌉`.
pub fn lsa_bias_count(channels: usize, r1: usize, r2: usize, reduction: usize) -> usize {
    let p = r1 * r2;
    p + p.div_ceil(reduction).max(1) + channels + channels.div_ceil(reduction).max(1)
}

fn realized<'a>(tensors: Vec<ParamTensor<'a, f32>>, include_bias: bool) -> usize {
    let table = ParamTable::from_tensors(&tensors);
    if include_bias {
        table.total
    } else {
        table.weights_only()
    }
}

/// Realized LSA parameter count, read off the layer shapes of an actual module.
pub fn lsa_param_count(channels: usize, r1: usize, r2: usize, reduction: usize, include_bias: bool) -> usize {
    let m = Lsa::<f32>::zeros(channels, r1, r2, reduction);
    let mut t = Vec::new();
    m.collect("lsa", &mut t);
    realized(t, include_bias)
}

/// Realized HSA parameter count, read off the layer shapes of an actual module.
pub fn hsa_param_count(channels: usize, r1: usize, r2: usize, reduction: usize, include_bias: bool) -> usize {
    let m = Hsa::<f32>::zeros(channels, r1, r2, reduction);
    let mut t = Vec::new();
    m.collect("hsa", &mut t);
    realized(t, include_bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::Dense;
    use crate::nn::{AttentionKind, ModelConfig};

    #[test]
    fn empty_table_is_zero() {
        assert_eq!(ParamTable::from_tensors::<f32>(&[]).total, 0);
    }

    #[test]
    fn dense_three_to_two_has_eight() {
        let d = Dense::<f32>::zeros(3, 2);
        let mut t = Vec::new();
        d.collect("fc", &mut t);
        let table = ParamTable::from_tensors(&t);
        assert_eq!(table.total, 8);
        assert_eq!(table.by_layer(), vec![("fc".to_string(), 8)]);
    }

    #[test]
    fn rows_sum_to_total() {
        let cfg = ModelConfig { bands: 4, r1: 2, r2: 2, channels: 8, blocks: 2, reduction: 2, ..Default::default() };
        let m = Model::<f32>::zeroed(cfg).unwrap();
        let t = count_params(&m);
        assert_eq!(t.rows.iter().map(|r| r.count).sum::<usize>(), t.total);
        assert_eq!(t.by_layer().iter().map(|r| r.1).sum::<usize>(), t.total);
    }

    /// Layer-by-layer hand count: gates r1r2→h→r1r2 and C→h'→C.
    fn shape_enumeration(c: usize, r1: usize, r2: usize, d: usize) -> usize {
        let p = r1 * r2;
        let hp = p.div_ceil(d);
        let hc = c.div_ceil(d);
        p * hp + hp * p + c * hc + hc * c
    }

    #[test]
    fn small_cases_match_formula() {
        assert_eq!(shape_enumeration(8, 2, 2, 2), 80);
        assert_eq!(lsa_param_count(8, 2, 2, 2, false), 80);
        assert_eq!(lsa_weight_formula(8, 2, 2, 2), 80.0);
        assert_eq!(lsa_param_count(1, 1, 1, 1, false), 4);
        assert_eq!(lsa_weight_formula(1, 1, 1, 1), 4.0);
        // space gate alone for r=2, d=2: 2·(4)²/2 = 16
        assert_eq!(lsa_param_count(8, 2, 2, 2, false) - 2 * 8 * 4, 16);
    }

    #[test]
    fn biases_counted_separately() {
        for (c, r, d) in [(64, 5, 4), (8, 2, 2), (1, 1, 1)] {
            assert_eq!(
                lsa_param_count(c, r, r, d, true) - lsa_param_count(c, r, r, d, false),
                lsa_bias_count(c, r, r, d)
            );
        }
    }

    #[test]
    fn default_scale_reduction() {
        let lsa = lsa_param_count(64, 5, 5, 4, false);
        let hsa = hsa_param_count(64, 5, 5, 4, false);
        assert_eq!(hsa, 1_280_000);
        assert_eq!(lsa, shape_enumeration(64, 5, 5, 4));
        assert!((lsa as f64 / hsa as f64) <= 0.002);
    }

    #[test]
    fn model_attention_sites_are_counted() {
        let base = ModelConfig { bands: 4, r1: 2, r2: 2, channels: 8, blocks: 3, reduction: 2, attention: AttentionKind::None, ..Default::default() };
        let with_lsa = ModelConfig { attention: AttentionKind::Lsa, ..base.clone() };
        let a = count_params(&Model::<f32>::zeroed(base).unwrap()).total;
        let b = count_params(&Model::<f32>::zeroed(with_lsa).unwrap()).total;
        assert_eq!(b - a, 3 * lsa_param_count(8, 2, 2, 2, true));
    }
}
