/// Step-decay learning rate: `base · 2^{−⌊epoch/period⌋}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub period: usize,
}

impl LrSchedule {
    pub const PAPER_BASE: f64 = 1e-3;
    pub const PAPER_PERIOD: usize = 2000;
    pub const PAPER_EPOCHS: usize = 10_000;

    pub fn paper() -> Self {
        LrSchedule {
            base: Self::PAPER_BASE,
            period: Self::PAPER_PERIOD,
        }
    }

    /// Same number of halvings as the full schedule, spread over
    /// `total_epochs`.
    pub fn scaled(total_epochs: usize) -> Self {
        LrSchedule {
            base: Self::PAPER_BASE,
            period: (total_epochs * Self::PAPER_PERIOD / Self::PAPER_EPOCHS).max(1),
        }
    }

    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let halvings = (epoch / self.period.max(1)).min(1023) as i32;
        self.base * 2f64.powi(-halvings)
    }
}
