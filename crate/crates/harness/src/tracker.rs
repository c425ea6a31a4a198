/// Declares convergence once the per-cycle error has stayed below the
/// tolerance for `window` consecutive cycles. The verdict is latched.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTracker {
    pub window: usize,
    pub tolerance: f64,
    streak: usize,
    converged_at: Option<usize>,
}

impl ConvergenceTracker {
    pub fn new(window: usize, tolerance: f64) -> Self {
        assert!(window >= 1, "window must be at least 1");
        Self {
            window,
            tolerance,
            streak: 0,
            converged_at: None,
        }
    }

    /// Records the error of `cycle` and returns whether convergence has been
    /// reached so far.
    pub fn observe(&mut self, cycle: usize, error: f64) -> bool {
        if self.converged_at.is_some() {
            return true;
        }
        if error < self.tolerance {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        if self.streak >= self.window {
            self.converged_at = Some(cycle + 1 - self.window);
        }
        self.converged_at.is_some()
    }

    pub fn converged(&self) -> bool {
        self.converged_at.is_some()
    }

    /// First cycle of the qualifying window.
    pub fn converged_at(&self) -> Option<usize> {
        self.converged_at
    }
}
