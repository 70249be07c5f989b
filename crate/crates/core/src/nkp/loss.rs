use super::encoder::{backward, forward};
use super::{cosine_similarity, Embedding, EncoderParams, NkpError};
use crate::ais::Features;

/// Per-pair contrastive term on a similarity `d`:
/// `(1 - y) d^2 + y max(0, M - d)^2`.
pub fn pair_loss(d: f64, same: bool, margin: f64) -> f64 {
    if same {
        let gap = (margin - d).max(0.0);
        gap * gap
    } else {
        d * d
    }
}

/// Derivative of [`pair_loss`] with respect to `d`.
fn pair_loss_grad(d: f64, same: bool, margin: f64) -> f64 {
    if same {
        -2.0 * (margin - d).max(0.0)
    } else {
        2.0 * d
    }
}

fn check_batch(n: usize, y: &[bool]) -> Result<(), NkpError> {
    if n == 0 {
        return Err(NkpError::EmptyBatch);
    }
    if n != y.len() {
        return Err(NkpError::ShapeMismatch(format!("{n} pairs but {} flags", y.len())));
    }
    Ok(())
}

/// Mean contrastive loss over embedding pairs; `y[i]` marks pairs sharing
/// a label.
pub fn tcl_loss(pairs: &[(Embedding, Embedding)], y: &[bool], margin: f64) -> Result<f64, NkpError> {
    check_batch(pairs.len(), y)?;
    let mut acc = 0.0;
    for ((a, b), same) in pairs.iter().zip(y) {
        acc += pair_loss(cosine_similarity(a, b)?, *same, margin);
    }
    Ok(acc / pairs.len() as f64)
}

/// Mean contrastive loss over raw feature pairs and its gradient with
/// respect to every encoder parameter.
pub fn tcl_grad(
    pairs: &[(Features, Features)],
    y: &[bool],
    params: &EncoderParams,
    margin: f64,
) -> Result<(f64, Vec<f64>), NkpError> {
    check_batch(pairs.len(), y)?;
    let mut grad = vec![0.0; params.data.len()];
    let mut loss = 0.0;
    let scale = 1.0 / pairs.len() as f64;
    for ((fa, fb), same) in pairs.iter().zip(y) {
        let ta = forward(fa, params)?;
        let tb = forward(fb, params)?;
        let ea = ta.embedding()?;
        let eb = tb.embedding()?;
        // Unclamped dot product: the clamp only ever trims rounding.
        let d: f64 = ea.as_slice().iter().zip(eb.as_slice()).map(|(a, b)| a * b).sum();
        loss += pair_loss(d, *same, margin);
        let gd = pair_loss_grad(d, *same, margin) * scale;
        if gd == 0.0 {
            continue;
        }
        let ga: Vec<f64> = eb.as_slice().iter().map(|v| v * gd).collect();
        let gb: Vec<f64> = ea.as_slice().iter().map(|v| v * gd).collect();
        backward(fa, params, &ta, &ga, &mut grad);
        backward(fb, params, &tb, &gb, &mut grad);
    }
    Ok((loss * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nkp::encode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::from_raw(v.to_vec()).unwrap()
    }

    fn at_angle(d: f64) -> (Embedding, Embedding) {
        (emb(&[1.0, 0.0]), emb(&[d, (1.0 - d * d).sqrt()]))
    }

    #[test]
    fn loss_zeros() {
        assert_eq!(pair_loss(0.5, true, 0.5), 0.0);
        assert_eq!(pair_loss(0.0, false, 0.5), 0.0);
        assert_eq!(pair_loss(0.9, true, 0.5), 0.0);
    }

    #[test]
    fn hand_evaluated_batches() {
        let single = tcl_loss(&[at_angle(0.8)], &[false], 0.5).unwrap();
        assert!((single - 0.64).abs() < 1e-12);
        let batch = tcl_loss(&[at_angle(0.2), at_angle(0.1)], &[true, false], 0.5).unwrap();
        assert!((batch - 0.05).abs() < 1e-12);
        assert!(matches!(tcl_loss(&[], &[], 0.5), Err(NkpError::EmptyBatch)));
    }

    fn features(rows: usize, rng: &mut ChaCha8Rng) -> Features {
        Features {
            rows,
            channels: 4,
            data: (0..rows * 4).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn grad_loss_matches_embedding_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = EncoderParams::init(6, 4, 1);
        let pairs = vec![(features(8, &mut rng), features(8, &mut rng)); 3];
        let y = [true, false, true];
        let (l, _) = tcl_grad(&pairs, &y, &p, 0.5).unwrap();
        let embs: Vec<_> = pairs
            .iter()
            .map(|(a, b)| (encode(a, &p).unwrap(), encode(b, &p).unwrap()))
            .collect();
        assert!((l - tcl_loss(&embs, &y, 0.5).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn inactive_hinge_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = EncoderParams::init(6, 4, 1);
        let f = features(8, &mut rng);
        // Identical inputs give similarity 1 > M.
        let (l, g) = tcl_grad(&[(f.clone(), f)], &[true], &p, 0.5).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn duplicated_pair_has_single_pair_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = EncoderParams::init(6, 4, 1);
        let pair = (features(8, &mut rng), features(8, &mut rng));
        let (l1, g1) = tcl_grad(&[pair.clone()], &[false], &p, 0.5).unwrap();
        let (l2, g2) = tcl_grad(&[pair.clone(), pair], &[false, false], &p, 0.5).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-12 * a.abs() + 1e-18);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = EncoderParams::init(6, 4, 5);
        let pairs: Vec<_> = (0..3).map(|_| (features(8, &mut rng), features(8, &mut rng))).collect();
        let y = [true, false, false];
        let (_, g) = tcl_grad(&pairs, &y, &p, 0.9).unwrap();
        let h = 1e-5;
        for i in 0..p.data.len() {
            let mut plus = p.clone();
            plus.data[i] += h;
            let mut minus = p.clone();
            minus.data[i] -= h;
            let fd = (tcl_grad(&pairs, &y, &plus, 0.9).unwrap().0
                - tcl_grad(&pairs, &y, &minus, 0.9).unwrap().0)
                / (2.0 * h);
            let tol = 1e-4 * g[i].abs().max(fd.abs()) + 1e-8;
            assert!((g[i] - fd).abs() <= tol, "param {i}: analytic {} fd {fd}", g[i]);
        }
    }
}
