use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EpsilonSchedule {
    /// Linear from `start` to `end` over `fraction · total_steps`, then flat.
    Decaying { start: f64, end: f64, fraction: f64 },
    Constant { value: f64 },
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self::Decaying { start: 1.0, end: 0.05, fraction: 0.7 }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: usize, total_steps: usize) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Decaying { start, end, fraction } => {
                let span = fraction * total_steps as f64;
                if span <= 0.0 {
                    return end;
                }
                if step as f64 >= span {
                    return end;
                }
                start + (step as f64 / span) * (end - start)
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Self::Constant { value } => format!("Constant={value}"),
            Self::Decaying { .. } => "Decaying".to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn floor_reached_at_fraction() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.value(0, 1000), 1.0);
        assert!((s.value(350, 1000) - 0.525).abs() < 1e-12);
        assert_eq!(s.value(700, 1000), 0.05);
        assert!(s.value(699, 1000) > 0.05);
        assert_eq!(s.value(1000, 1000), 0.05);
    }

    proptest! {
        #[test]
        fn monotone_and_constant(total in 1usize..5000, a in 0usize..5000, b in 0usize..5000, c in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let d = EpsilonSchedule::default();
            prop_assert!(d.value(hi, total) <= d.value(lo, total));
            let k = EpsilonSchedule::Constant { value: c };
            prop_assert_eq!(k.value(lo, total), k.value(hi, total));
        }
    }
}
