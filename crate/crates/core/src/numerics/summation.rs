/// Neumaier's variant of Kahan summation. Unlike plain Kahan it stays
/// accurate when an addend is larger in magnitude than the running sum,
/// which is the normal case for alternating series.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
    abs_sum: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
        self.abs_sum += value.abs();
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }

    /// Sum of absolute values of every term added so far.
    pub fn abs_total(&self) -> f64 {
        self.abs_sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatedSum {
    pub sum: f64,
    /// `sum(|t|) / max(|sum|, tiny)`; 1 for same-signed terms, large when
    /// the result is the small difference of large terms.
    pub cancellation_index: f64,
}

pub fn compensated_sum<I>(terms: I) -> CompensatedSum
where
    I: IntoIterator<Item = f64>,
{
    let mut acc = NeumaierSum::new();
    for t in terms {
        acc.add(t);
    }
    let sum = acc.total();
    let denom = sum.abs().max(f64::MIN_POSITIVE);
    let cancellation_index = if acc.abs_total() == 0.0 {
        1.0
    } else {
        acc.abs_total() / denom
    };
    CompensatedSum {
        sum,
        cancellation_index,
    }
}
