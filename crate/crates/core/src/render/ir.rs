use super::{doc_rng, document, guard, RenderConfig, RenderError, EOS};
use crate::model::{IrPair, Sentinel, SourceKind, TrainingDocument};
use crate::rng::bernoulli;

/// Pairs code with its size- or performance-optimized IR in a random direction.
pub fn render_ir_pair(pair: &IrPair, cfg: &RenderConfig) -> Result<TrainingDocument, RenderError> {
    guard("code", &pair.code)?;
    guard("ir_size_opt", &pair.ir_size_opt)?;
    guard("ir_perf_opt", &pair.ir_perf_opt)?;
    let (seed, mut rng) = doc_rng(cfg.seed, &pair.id, SourceKind::IrPair);
    let ir = if bernoulli(&mut rng, cfg.p_ir_size_opt) { &pair.ir_size_opt } else { &pair.ir_perf_opt };
    let text = if bernoulli(&mut rng, cfg.p_ir_direction_code_first) {
        format!("{}{}{ir}{EOS}", pair.code, Sentinel::CodeToIntermediate)
    } else {
        format!("{ir}{}{}{EOS}", Sentinel::IntermediateToCode, pair.code)
    };
    Ok(document(text, SourceKind::IrPair, vec![pair.id.clone()], seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: usize) -> IrPair {
        IrPair { id: format!("ir{id}"), language: Some("C".into()), code: "C".into(), ir_size_opt: "S".into(), ir_perf_opt: "P".into() }
    }

    #[test]
    fn forced_directions() {
        let c = |size, first| RenderConfig { p_ir_size_opt: size, p_ir_direction_code_first: first, ..RenderConfig::default() };
        assert_eq!(render_ir_pair(&pair(0), &c(1.0, 1.0)).unwrap().text, "C<code_to_intermediate>S<|endoftext|>");
        assert_eq!(render_ir_pair(&pair(0), &c(1.0, 0.0)).unwrap().text, "S<intermediate_to_code>C<|endoftext|>");
        assert_eq!(render_ir_pair(&pair(0), &c(0.0, 0.0)).unwrap().text, "P<intermediate_to_code>C<|endoftext|>");
    }

    #[test]
    fn size_fraction_matches_default() {
        let cfg = RenderConfig { seed: 11, ..RenderConfig::default() };
        let n = 10_000;
        let size = (0..n).filter(|&i| render_ir_pair(&pair(i), &cfg).unwrap().text.contains('S')).count();
        let frac = size as f64 / n as f64;
        assert!((frac - 0.8).abs() <= 0.02, "size fraction {frac}");
        let first = (0..n).filter(|&i| render_ir_pair(&pair(i), &cfg).unwrap().text.starts_with('C')).count();
        assert!((first as f64 / n as f64 - 0.5).abs() <= 0.02);
    }
}
