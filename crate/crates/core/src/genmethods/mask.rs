use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GenError;
use crate::seed::{ceil_ratio, sha256_hex};

pub const DEFAULT_MASK_FRACTION: f64 = 0.3;
pub const PLACEHOLDER_TOKEN: &str = "MASK";

const INFERENCE_KEYWORDS: [&str; 4] = ["therefore", "thus", "hence", "it follows"];

/// Which paragraphs of a proof are hidden from the completing model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPlan {
    pub paragraph_count: usize,
    pub masked_indices: Vec<usize>,
    pub placeholder_token: String,
    /// Hash of the proof the plan was computed for.
    pub proof_hash: String,
}

impl MaskPlan {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |why: &str| Err(GenError::PlanMismatch(why.to_owned()));
        if self.masked_indices.is_empty() {
            return bad("no masked paragraphs");
        }
        if self.masked_indices.contains(&0) {
            return bad("first paragraph is masked");
        }
        if self.masked_indices.len() >= self.paragraph_count {
            return bad("every paragraph is masked");
        }
        if self.masked_indices.windows(2).any(|w| w[1] != w[0] + 1) {
            return bad("masked indices are not contiguous");
        }
        if *self.masked_indices.last().unwrap() >= self.paragraph_count {
            return bad("masked index out of range");
        }
        if self.placeholder_token.is_empty() {
            return bad("empty placeholder token");
        }
        Ok(())
    }
}

/// Splits a proof into paragraphs on blank lines. Paragraphs are trimmed
/// and empty ones are dropped.
pub fn paragraphs(proof: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut end = 0;
    let mut offset = 0;
    for line in proof.split_inclusive('\n') {
        if line.trim().is_empty() {
            if let Some(s) = start.take() {
                out.push(proof[s..end].trim());
            }
        } else {
            if start.is_none() {
                start = Some(offset);
            }
            end = offset + line.len();
        }
        offset += line.len();
    }
    if let Some(s) = start {
        out.push(proof[s..end].trim());
    }
    out
}

fn keyword_count(paragraph: &str) -> usize {
    let lower = paragraph.to_lowercase();
    INFERENCE_KEYWORDS
        .iter()
        .map(|k| lower.matches(k).count())
        .sum()
}

/// Chooses a contiguous block of `ceil(fraction * n)` paragraphs to mask,
/// never including the first paragraph and never masking all of them.
///
/// Each candidate block start is weighted by one plus the number of
/// inference keywords inside the block, so blocks that carry the argument's
/// conclusions are more likely to be hidden.
pub fn plan_mask(proof: &str, mask_fraction: f64, seed: u64) -> Result<MaskPlan, GenError> {
    if !(mask_fraction > 0.0 && mask_fraction < 1.0) {
        return Err(GenError::InvalidFraction(mask_fraction));
    }
    let paras = paragraphs(proof);
    let n = paras.len();
    if n < 3 {
        return Err(GenError::TooShort { paragraphs: n });
    }
    let size = ceil_ratio(mask_fraction, n).clamp(1, n - 1);
    let counts: Vec<usize> = paras.iter().map(|p| keyword_count(p)).collect();
    let starts: Vec<usize> = (1..=n - size).collect();
    let weights: Vec<usize> = starts
        .iter()
        .map(|&s| 1 + counts[s..s + size].iter().sum::<usize>())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = WeightedIndex::new(&weights).expect("weights are positive");
    let start = starts[dist.sample(&mut rng)];
    Ok(MaskPlan {
        paragraph_count: n,
        masked_indices: (start..start + size).collect(),
        placeholder_token: PLACEHOLDER_TOKEN.to_owned(),
        proof_hash: sha256_hex(proof),
    })
}

/// Renders the proof with each masked paragraph replaced by a numbered
/// placeholder such as `[MASK 1]`.
pub fn apply_mask(proof: &str, plan: &MaskPlan) -> Result<String, GenError> {
    plan.validate()?;
    if sha256_hex(proof) != plan.proof_hash {
        return Err(GenError::PlanMismatch(
            "plan was computed for a different proof".into(),
        ));
    }
    let paras = paragraphs(proof);
    if paras.len() != plan.paragraph_count {
        return Err(GenError::PlanMismatch(format!(
            "plan expects {} paragraphs, proof has {}",
            plan.paragraph_count,
            paras.len()
        )));
    }
    let mut gap = 0;
    let rendered: Vec<String> = paras
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if plan.masked_indices.binary_search(&i).is_ok() {
                gap += 1;
                placeholder(&plan.placeholder_token, gap)
            } else {
                (*p).to_owned()
            }
        })
        .collect();
    Ok(rendered.join("\n\n"))
}

pub fn placeholder(token: &str, number: usize) -> String {
    format!("[{token} {number}]")
}

/// Rebuilds a full proof from a completion reply that answers each gap
/// under its placeholder heading. When some gap is not answered, the masked
/// proof is kept and the reply is appended after it.
pub fn assemble_mask_completion(
    proof: &str,
    plan: &MaskPlan,
    reply: &str,
) -> Result<String, GenError> {
    let masked = apply_mask(proof, plan)?;
    let gaps = plan.masked_indices.len();
    let markers: Vec<String> = (1..=gaps)
        .map(|k| placeholder(&plan.placeholder_token, k))
        .collect();
    let mut positions = Vec::with_capacity(gaps);
    let mut from = 0;
    for m in &markers {
        match reply[from..].find(m.as_str()) {
            Some(p) => {
                positions.push(from + p);
                from += p + m.len();
            }
            None => return Ok(format!("{masked}\n\n{}", reply.trim())),
        }
    }
    let mut filled = masked;
    for (k, m) in markers.iter().enumerate() {
        let start = positions[k] + m.len();
        let end = positions.get(k + 1).copied().unwrap_or(reply.len());
        let text = reply[start..end].trim().trim_start_matches(':').trim();
        filled = filled.replacen(m.as_str(), text, 1);
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn proof_of(n: usize) -> String {
        (0..n)
            .map(|i| format!("Paragraph {i} of the argument."))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    #[test]
    fn paragraphs_split_on_blank_lines() {
        let text = "a\nb\n\n  \nc\n\n\nd  \n";
        assert_eq!(paragraphs(text), vec!["a\nb", "c", "d"]);
        assert!(paragraphs("   \n\n").is_empty());
    }

    #[test]
    fn five_paragraphs_at_forty_percent() {
        let plan = plan_mask(&proof_of(5), 0.4, 7).unwrap();
        assert_eq!(plan.masked_indices.len(), 2);
        assert!(!plan.masked_indices.contains(&0));
        assert_eq!(plan.masked_indices[1], plan.masked_indices[0] + 1);
    }

    #[test]
    fn too_short_and_bad_fraction() {
        assert!(matches!(
            plan_mask(&proof_of(2), 0.3, 1),
            Err(GenError::TooShort { paragraphs: 2 })
        ));
        assert!(matches!(
            plan_mask(&proof_of(5), 0.0, 1),
            Err(GenError::InvalidFraction(_))
        ));
        assert!(matches!(
            plan_mask(&proof_of(5), 1.0, 1),
            Err(GenError::InvalidFraction(_))
        ));
    }

    #[test]
    fn keywords_attract_the_mask() {
        let mut paras: Vec<String> = (0..8).map(|i| format!("Plain step {i}.")).collect();
        paras[5] = "Therefore x = 1, thus y = 2, hence z = 3, and it follows that w = 4.".into();
        let proof = paras.join("\n\n");
        let hits = (0..400u64)
            .filter(|&seed| {
                plan_mask(&proof, 0.1, seed)
                    .unwrap()
                    .masked_indices
                    .contains(&5)
            })
            .count();
        // Paragraph 5 has weight 5 against weight 1 for the other six starts.
        assert!(hits > 400 / 3, "keyword paragraph masked only {hits} times");
    }

    #[test]
    fn apply_mask_replaces_only_masked_paragraphs() {
        let proof = proof_of(5);
        let plan = MaskPlan {
            paragraph_count: 5,
            masked_indices: vec![2, 3],
            placeholder_token: PLACEHOLDER_TOKEN.into(),
            proof_hash: sha256_hex(&proof),
        };
        let masked = apply_mask(&proof, &plan).unwrap();
        assert_eq!(masked.matches("[MASK").count(), 2);
        assert!(masked.contains("[MASK 1]") && masked.contains("[MASK 2]"));
        for i in [0, 1, 4] {
            assert!(masked.contains(&format!("Paragraph {i} of the argument.")));
        }
        assert!(!masked.contains("Paragraph 2"));
        assert!(matches!(
            apply_mask(&proof_of(6), &plan),
            Err(GenError::PlanMismatch(_))
        ));
    }

    #[test]
    fn completion_fills_each_gap() {
        let proof = proof_of(5);
        let plan = MaskPlan {
            paragraph_count: 5,
            masked_indices: vec![2, 3],
            placeholder_token: PLACEHOLDER_TOKEN.into(),
            proof_hash: sha256_hex(&proof),
        };
        let reply = "[MASK 1]\nFirst filled step.\n\n[MASK 2]: Second filled step.";
        let full = assemble_mask_completion(&proof, &plan, reply).unwrap();
        assert_eq!(paragraphs(&full)[2], "First filled step.");
        assert_eq!(paragraphs(&full)[3], "Second filled step.");
        assert!(!full.contains("[MASK"));
        let partial = assemble_mask_completion(&proof, &plan, "Only prose.").unwrap();
        assert!(partial.contains("[MASK 1]") && partial.ends_with("Only prose."));
    }

    #[test]
    fn exhaustive_small_corpus_bounds() {
        for n in 3..=12 {
            let proof = proof_of(n);
            for step in 1..20 {
                let fraction = step as f64 / 20.0;
                for seed in 0..10u64 {
                    let plan = plan_mask(&proof, fraction, seed).unwrap();
                    plan.validate().unwrap();
                    let expected = ceil_ratio(fraction, n).clamp(1, n - 1);
                    assert_eq!(plan.masked_indices.len(), expected);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn plans_are_valid_and_deterministic(
            paras in proptest::collection::vec("[a-z ]{1,30}(therefore|thus|)[a-z ]{0,10}", 3..15),
            fraction in 0.01f64..0.99,
            seed in any::<u64>(),
        ) {
            let proof = paras.iter().map(|p| format!("x{p}")).collect::<Vec<_>>().join("\n\n");
            let a = plan_mask(&proof, fraction, seed).unwrap();
            let b = plan_mask(&proof, fraction, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.validate().is_ok());
            prop_assert_eq!(a.paragraph_count, paras.len());
            let masked = apply_mask(&proof, &a).unwrap();
            prop_assert_eq!(masked.matches("[MASK").count(), a.masked_indices.len());
        }
    }
}
