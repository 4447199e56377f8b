use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownReport {
    /// First window starting a run of at least `run_length` flagged windows.
    pub first_flagged_window: Option<usize>,
    pub run_length: usize,
    pub flags: Vec<bool>,
}

/// Locates the first sustained run of flagged windows. Isolated flags are
/// tolerated.
pub fn detect_breakdown(flags: &[bool], run_length: usize) -> BreakdownReport {
    let need = run_length.max(1);
    let mut run = 0;
    let mut found = None;
    for (i, &f) in flags.iter().enumerate() {
        run = if f { run + 1 } else { 0 };
        if run == need {
            found = Some(i + 1 - need);
            break;
        }
    }
    BreakdownReport {
        first_flagged_window: found,
        run_length: need,
        flags: flags.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let mut f = vec![false; 10];
        f.extend([true; 5]);
        assert_eq!(detect_breakdown(&f, 3).first_flagged_window, Some(10));

        let mut f = vec![false; 10];
        f[4] = true;
        assert_eq!(detect_breakdown(&f, 3).first_flagged_window, None);

        let f = [true, true, false, true, true, true];
        assert_eq!(detect_breakdown(&f, 3).first_flagged_window, Some(3));
        assert_eq!(detect_breakdown(&f, 1).first_flagged_window, Some(0));
        assert_eq!(detect_breakdown(&[], 3).first_flagged_window, None);
    }
}
