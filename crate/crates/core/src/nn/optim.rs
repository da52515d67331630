use super::NnError;

/// Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Result<Self, NnError> {
        Self::with_betas(lr, 0.9, 0.999, 1e-8, n_params)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64, n_params: usize) -> Result<Self, NnError> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(NnError::InvalidHyperparameter(format!("learning rate {lr}")));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
            return Err(NnError::InvalidHyperparameter("adam betas/eps".into()));
        }
        Ok(Self {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update. Nothing changes if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::DimensionMismatch {
                expected: self.m.len(),
                found: if params.len() != self.m.len() { params.len() } else { grads.len() },
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient);
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut opt = Adam::new(0.001, 3).unwrap();
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut opt = Adam::new(0.01, 1).unwrap();
        let mut w = [1.0];
        for _ in 0..5000 {
            let g = [2.0 * w[0]];
            opt.step(&mut w, &g).unwrap();
        }
        assert!(w[0].abs() < 1e-3, "{}", w[0]);
    }

    #[test]
    fn hand_trace_three_steps() {
        // f(w) = w², lr 0.1, from w = 1; reference values from a scalar
        // transcription of the update rule.
        let mut opt = Adam::new(0.1, 1).unwrap();
        let mut w = [1.0];
        let expected = [0.900_000_000_5, 0.800_412_228_691_792_8, 0.701_586_272_946_030_3];
        for e in expected {
            let g = [2.0 * w[0]];
            opt.step(&mut w, &g).unwrap();
            assert!((w[0] - e).abs() < 1e-9, "{} vs {e}", w[0]);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut opt = Adam::new(0.1, 1).unwrap();
        let mut w = [1.0];
        assert_eq!(opt.step(&mut w, &[f64::NAN]), Err(NnError::NonFiniteGradient));
        assert_eq!(w, [1.0]);
        assert!(Adam::new(0.0, 1).is_err());
    }
}
