//! Hidden-Markov covariate rows over a discrete output alphabet.
//!
//! Each row is an emission path of a stationary hidden chain: hidden states
//! step through a row-stochastic transition matrix and every state emits one
//! symbol of the output alphabet. Single-column conditionals
//! `P(X_j = a | X_{-j})` are exact, computed from normalized forward and
//! backward messages; one sweep prices all positions of a row at once.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::ConditionalLaw;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A hidden-Markov emission model for rows of fixed length.
#[derive(Clone, Debug)]
pub struct HmmModel {
    row_length: usize,
    transition: DMatrix<f64>,
    emission: DMatrix<f64>,
    initial: DVector<f64>,
    output_alphabet: Vec<f64>,
}

impl HmmModel {
    /// Validate and build a model with row length 1 (adjust with
    /// [`HmmModel::with_row_length`]).
    pub fn new(
        transition: DMatrix<f64>,
        emission: DMatrix<f64>,
        initial: DVector<f64>,
        output_alphabet: Vec<f64>,
    ) -> Result<Self> {
        let k = transition.nrows();
        if k == 0 || transition.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "transition must be square and non-empty, got {}x{}",
                transition.nrows(),
                transition.ncols()
            )));
        }
        if emission.nrows() != k {
            return Err(Error::DimensionMismatch(format!(
                "emission has {} rows, expected {k}",
                emission.nrows()
            )));
        }
        let m = emission.ncols();
        if output_alphabet.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "alphabet has {} values, emission has {m} columns",
                output_alphabet.len()
            )));
        }
        if initial.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "initial has {} entries, expected {k}",
                initial.len()
            )));
        }
        for (what, rows) in [("transition", &transition), ("emission", &emission)] {
            for i in 0..rows.nrows() {
                let row = rows.row(i);
                if row.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "{what} row {i} has a negative entry"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "{what} row {i} sums to {sum}, expected 1"
                    )));
                }
            }
        }
        if initial.iter().any(|&v| v < 0.0) || (initial.sum() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("initial is not a probability vector".into()));
        }
        for a in 0..m {
            for b in (a + 1)..m {
                if (output_alphabet[a] - output_alphabet[b]).abs() < 1e-9 {
                    return Err(Error::InvalidParameter(
                        "output alphabet values must be distinct".into(),
                    ));
                }
            }
        }
        Ok(Self { row_length: 1, transition, emission, initial, output_alphabet })
    }

    /// The default simulation model: 5 hidden states over symbols `{1, 2, 3}`,
    /// sticky transitions (0.6 stay, 0.1 to each other state), uniform start,
    /// and emission rows that slide preference from symbol 1 to symbol 3.
    pub fn simulation_default() -> Self {
        let transition =
            DMatrix::from_fn(5, 5, |i, j| if i == j { 0.6 } else { 0.1 });
        let emission = DMatrix::from_row_slice(
            5,
            3,
            &[
                2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0,
                5.0 / 12.0, 5.0 / 12.0, 1.0 / 6.0,
                1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0,
                1.0 / 6.0, 5.0 / 12.0, 5.0 / 12.0,
                1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0,
            ],
        );
        let initial = DVector::from_element(5, 0.2);
        Self::new(transition, emission, initial, vec![1.0, 2.0, 3.0])
            .expect("default model is valid")
    }

    /// Same chain, different emitted-row length.
    pub fn with_row_length(mut self, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("row length must be positive".into()));
        }
        self.row_length = p;
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.row_length
    }

    pub fn n_hidden(&self) -> usize {
        self.transition.nrows()
    }

    pub fn n_symbols(&self) -> usize {
        self.emission.ncols()
    }

    pub fn output_alphabet(&self) -> &[f64] {
        &self.output_alphabet
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn emission(&self) -> &DMatrix<f64> {
        &self.emission
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    fn symbol_index(&self, value: f64, position: usize) -> Result<usize> {
        self.output_alphabet
            .iter()
            .position(|&a| (a - value).abs() < 1e-9)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "value {value} at position {position} is not in the output alphabet"
                ))
            })
    }

    /// Sample `n` independent emission paths of length `p`.
    pub fn sample_rows(&self, n: usize, stream: &RngStream) -> DMatrix<f64> {
        let mut rng = stream.rng();
        let p = self.row_length;
        let mut out = DMatrix::zeros(n, p);
        for i in 0..n {
            let mut state = sample_categorical(self.initial.as_slice(), &mut rng);
            for t in 0..p {
                if t > 0 {
                    let probs: Vec<f64> = self.transition.row(state).iter().copied().collect();
                    state = sample_categorical(&probs, &mut rng);
                }
                let probs: Vec<f64> = self.emission.row(state).iter().copied().collect();
                let symbol = sample_categorical(&probs, &mut rng);
                out[(i, t)] = self.output_alphabet[symbol];
            }
        }
        out
    }

    /// Law of entry `j` given the other entries of `row` (`row[j]` ignored).
    ///
    /// If the conditioning event is impossible, the error names the first
    /// position (left to right, skipping `j`) at which the observed symbols
    /// become incompatible with the chain.
    pub fn conditional(&self, row: &[f64], j: usize) -> Result<ConditionalLaw> {
        if j >= row.len() {
            return Err(Error::InvalidParameter(format!("variable index {j} out of range")));
        }
        let forward = self.forward_to(row, j)?;
        let backward = match self.backward_to(row, j) {
            Ok(b) => b,
            Err(Error::ZeroProbability { .. }) => {
                return Err(self.first_impossible_position(row, j))
            }
            Err(e) => return Err(e),
        };
        match self.mix_conditional(&forward, &backward, j) {
            Err(Error::ZeroProbability { .. }) => Err(self.first_impossible_position(row, j)),
            other => other,
        }
    }

    /// Conditional laws of all entries of `row`, sharing one message sweep.
    pub fn conditionals_row(&self, row: &[f64]) -> Result<Vec<ConditionalLaw>> {
        let p = row.len();
        let k = self.n_hidden();
        // forwards[t] ∝ P(Z_t = ·, X_1..X_{t-1}) for every t in one pass.
        let mut forwards = Vec::with_capacity(p);
        let mut f: Vec<f64> = self.initial.iter().copied().collect();
        for t in 0..p {
            forwards.push(f.clone());
            if t + 1 < p {
                f = self.forward_step(&f, row, t)?;
            }
        }
        // backwards[t] ∝ P(X_{t+1}..X_p | Z_t = ·) in one reverse pass.
        let mut backwards = vec![vec![1.0; k]; p];
        for t in (0..p.saturating_sub(1)).rev() {
            let next = backwards[t + 1].clone();
            backwards[t] = self.backward_step(&next, row, t)?;
        }
        (0..p)
            .map(|j| self.mix_conditional(&forwards[j], &backwards[j], j))
            .collect()
    }

    /// Normalized `P(Z_j = ·, X_1..X_{j-1})`.
    fn forward_to(&self, row: &[f64], j: usize) -> Result<Vec<f64>> {
        let mut f: Vec<f64> = self.initial.iter().copied().collect();
        for t in 0..j {
            f = self.forward_step(&f, row, t)?;
        }
        Ok(f)
    }

    /// One forward update: absorb the emission at `t`, advance the chain.
    fn forward_step(&self, f: &[f64], row: &[f64], t: usize) -> Result<Vec<f64>> {
        let k = self.n_hidden();
        let sym = self.symbol_index(row[t], t)?;
        let weighted: Vec<f64> =
            (0..k).map(|z| f[z] * self.emission[(z, sym)]).collect();
        let mass: f64 = weighted.iter().sum();
        if mass <= 0.0 {
            return Err(Error::ZeroProbability { position: t });
        }
        let mut out = vec![0.0; k];
        for z in 0..k {
            let w = weighted[z] / mass;
            if w > 0.0 {
                for (znext, o) in out.iter_mut().enumerate() {
                    *o += w * self.transition[(z, znext)];
                }
            }
        }
        Ok(out)
    }

    /// Normalized `P(X_{j+1}..X_p | Z_j = ·)`.
    fn backward_to(&self, row: &[f64], j: usize) -> Result<Vec<f64>> {
        let k = self.n_hidden();
        let mut b = vec![1.0; k];
        for t in (j..row.len().saturating_sub(1)).rev() {
            b = self.backward_step(&b, row, t)?;
        }
        Ok(b)
    }

    /// One backward update across the emission at `t + 1`.
    fn backward_step(&self, b_next: &[f64], row: &[f64], t: usize) -> Result<Vec<f64>> {
        let k = self.n_hidden();
        let sym = self.symbol_index(row[t + 1], t + 1)?;
        let mut b = vec![0.0; k];
        for z in 0..k {
            let mut acc = 0.0;
            for znext in 0..k {
                acc += self.transition[(z, znext)] * self.emission[(znext, sym)] * b_next[znext];
            }
            b[z] = acc;
        }
        let mass: f64 = b.iter().sum();
        if mass <= 0.0 {
            return Err(Error::ZeroProbability { position: t + 1 });
        }
        for v in &mut b {
            *v /= mass;
        }
        Ok(b)
    }

    /// Left-to-right scan for the first position (excluding `skip`) whose
    /// observed symbol is impossible given the observations before it. Only
    /// called once the conditioning event is known to have zero probability,
    /// so a failing position always exists.
    fn first_impossible_position(&self, row: &[f64], skip: usize) -> Error {
        let k = self.n_hidden();
        let mut f: Vec<f64> = self.initial.iter().copied().collect();
        for t in 0..row.len() {
            if t != skip {
                let sym = match self.symbol_index(row[t], t) {
                    Ok(s) => s,
                    Err(e) => return e,
                };
                let weighted: Vec<f64> = (0..k).map(|z| f[z] * self.emission[(z, sym)]).collect();
                let mass: f64 = weighted.iter().sum();
                if mass <= 0.0 {
                    return Error::ZeroProbability { position: t };
                }
                for z in 0..k {
                    f[z] = weighted[z] / mass;
                }
            }
            if t + 1 < row.len() {
                let mut next = vec![0.0; k];
                for z in 0..k {
                    if f[z] > 0.0 {
                        for (znext, o) in next.iter_mut().enumerate() {
                            *o += f[z] * self.transition[(z, znext)];
                        }
                    }
                }
                f = next;
            }
        }
        Error::ZeroProbability { position: row.len().saturating_sub(1) }
    }

    /// `P(X_j = a | X_{-j}) ∝ Σ_z forward_j(z) · emission(z, a) · backward_j(z)`.
    fn mix_conditional(&self, forward: &[f64], backward: &[f64], j: usize) -> Result<ConditionalLaw> {
        let m = self.n_symbols();
        let k = self.n_hidden();
        let mut probs = vec![0.0; m];
        for s in 0..m {
            let mut acc = 0.0;
            for z in 0..k {
                acc += forward[z] * self.emission[(z, s)] * backward[z];
            }
            probs[s] = acc;
        }
        let mass: f64 = probs.iter().sum();
        if mass <= 0.0 {
            return Err(Error::ZeroProbability { position: j });
        }
        for v in &mut probs {
            *v /= mass;
        }
        Ok(ConditionalLaw::Categorical { values: self.output_alphabet.clone(), probs })
    }
}

fn sample_categorical(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
