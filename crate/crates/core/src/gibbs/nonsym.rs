use crate::error::{HjError, Result};
use crate::gibbs::model::{ModelSpec, Prior};
use crate::nonlinearity::Interaction;

/// Embeds `Y = sqrt(2t/N) X_1 X_2^T + W` into a `K = 2`, `p = 2` model with
/// `X = diag(X_1, X_2)`: rows `0..N` carry `(x_1, 0)` and rows `N..2N` carry
/// `(0, x_2)`. The embedded model has `2N` rows, so its parameter `t`
/// corresponds to `t / 2` in the two-factor channel.
pub fn build_nonsym_spec(n: usize, prior1: &Prior, prior2: &Prior, seed: u64) -> Result<ModelSpec> {
    let embed = |p: &Prior, slot: usize| -> Result<Prior> {
        if p.k() != 1 {
            return Err(HjError::DimensionMismatch {
                expected: 1,
                got: p.k(),
            });
        }
        if p.atoms().iter().any(|a| a[0].abs() > 1.0) {
            return Err(HjError::InvalidArgument(
                "scalar prior atoms must lie in [-1, 1]".into(),
            ));
        }
        let atoms = p
            .atoms()
            .iter()
            .map(|a| {
                if slot == 0 {
                    vec![a[0], 0.0]
                } else {
                    vec![0.0, a[0]]
                }
            })
            .collect();
        Prior::new(2, atoms, p.weights().to_vec())
    };
    let first = embed(prior1, 0)?;
    let second = embed(prior2, 1)?;
    let rows = (0..2 * n)
        .map(|i| if i < n { first.clone() } else { second.clone() })
        .collect();
    ModelSpec::with_row_priors(Interaction::nonsym_demo(), rows, seed)
}
