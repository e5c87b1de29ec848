//! Energy storage state and its one-hour dynamics.
//!
//! Flexibility is signed from the grid's point of view: positive values
//! discharge the device into its bus, negative values charge it. With a
//! one-hour step, `energy' = energy - loss - flex`, with unit efficiency.

use thiserror::Error;

use crate::scalar::{cast, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct StorageSpec<T> {
    pub host_bus: String,
    /// Energy capacity in MWh.
    pub capacity: T,
    /// Charge and discharge limit in MW.
    pub power_bound: T,
    /// Self-discharge per step in MWh.
    pub loss: T,
    /// Initial state of charge as a fraction of capacity.
    pub initial_soc: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageState<T> {
    pub spec: StorageSpec<T>,
    /// Stored energy in MWh.
    pub energy: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StorageError {
    #[error("storage parameter `{0}` out of range")]
    InvalidSpec(&'static str),
    #[error("state of charge would become {energy} MWh, outside [0, {capacity}]")]
    SocViolation { energy: f64, capacity: f64 },
    #[error("losses of {loss} MWh exceed what {energy} MWh plus a full charge can cover")]
    Stranded { energy: f64, loss: f64 },
}

/// Slack admitted on the SoC box before an update is rejected.
pub const SOC_TOLERANCE: f64 = 1e-9;

impl<T: Scalar> StorageSpec<T> {
    pub fn validate(&self) -> Result<(), StorageError> {
        let nonneg = |x: T| x >= T::zero() && x.is_finite();
        if !nonneg(self.capacity) {
            return Err(StorageError::InvalidSpec("capacity"));
        }
        if !nonneg(self.power_bound) {
            return Err(StorageError::InvalidSpec("power_bound"));
        }
        if !nonneg(self.loss) {
            return Err(StorageError::InvalidSpec("loss"));
        }
        if !(self.initial_soc >= T::zero() && self.initial_soc <= T::one()) {
            return Err(StorageError::InvalidSpec("initial_soc"));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<StorageState<T>, StorageError> {
        self.validate()?;
        Ok(StorageState {
            spec: self.clone(),
            energy: self.capacity * self.initial_soc,
        })
    }

    pub fn cast<U: Scalar>(&self) -> StorageSpec<U> {
        StorageSpec {
            host_bus: self.host_bus.clone(),
            capacity: cast(self.capacity),
            power_bound: cast(self.power_bound),
            loss: cast(self.loss),
            initial_soc: cast(self.initial_soc),
        }
    }
}

impl<T: Scalar> StorageState<T> {
    /// Interval of admissible flexibility for the next step: the power box
    /// intersected with what keeps the next SoC inside `[0, capacity]`.
    pub fn feasible_flex_bounds(&self) -> Result<(T, T), StorageError> {
        let spec = &self.spec;
        let after_loss = self.energy - spec.loss;
        if after_loss + spec.power_bound < T::zero() {
            return Err(StorageError::Stranded {
                energy: self.energy.as_f64(),
                loss: spec.loss.as_f64(),
            });
        }
        let max = spec.power_bound.min(after_loss);
        let min = (-spec.power_bound).max(after_loss - spec.capacity);
        Ok((min, max))
    }

    /// Advances one step. Results within [`SOC_TOLERANCE`] of a bound are
    /// snapped onto it.
    pub fn step_soc(&self, flex: T) -> Result<StorageState<T>, StorageError> {
        let capacity = self.spec.capacity;
        let next = self.energy - self.spec.loss - flex;
        let tol = T::lit(SOC_TOLERANCE);
        if !(next >= -tol && next <= capacity + tol) {
            return Err(StorageError::SocViolation {
                energy: next.as_f64(),
                capacity: capacity.as_f64(),
            });
        }
        Ok(StorageState {
            spec: self.spec.clone(),
            energy: next.max(T::zero()).min(capacity),
        })
    }

    pub fn soc_fraction(&self) -> T {
        if self.spec.capacity > T::zero() {
            self.energy / self.spec.capacity
        } else {
            T::zero()
        }
    }
}
