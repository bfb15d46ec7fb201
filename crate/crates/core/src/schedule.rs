//! Measurement block schedules for the adaptive sampling stages.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlockSchedule {
    /// Equal blocks of the given size.
    Fixed(u64),
    /// Blocks `first, first*factor, first*factor^2, ...` (rounded up).
    Geometric { first: u64, factor: f64 },
}

impl BlockSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BlockSchedule::Fixed(0) => Err(Error::OutOfRange {
                what: "block size",
                detail: "0".into(),
            }),
            BlockSchedule::Geometric { first, factor } if first == 0 || !(factor >= 1.0) => {
                Err(Error::OutOfRange {
                    what: "geometric schedule",
                    detail: format!("first={first} factor={factor}"),
                })
            }
            _ => Ok(()),
        }
    }

    /// Cumulative sample totals at which the stopping rule is evaluated,
    /// ending exactly at `cap` when the cap is reached.
    pub fn checkpoints(&self, cap: u64) -> Checkpoints {
        Checkpoints {
            schedule: *self,
            cap,
            done: 0,
            block: match *self {
                BlockSchedule::Fixed(b) => b as f64,
                BlockSchedule::Geometric { first, .. } => first as f64,
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoints {
    schedule: BlockSchedule,
    cap: u64,
    done: u64,
    block: f64,
}

impl Iterator for Checkpoints {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.done >= self.cap {
            return None;
        }
        let step = (self.block.ceil() as u64).max(1);
        self.done = self.done.saturating_add(step).min(self.cap);
        if let BlockSchedule::Geometric { factor, .. } = self.schedule {
            self.block *= factor;
        }
        Some(self.done)
    }
}

impl fmt::Display for BlockSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockSchedule::Fixed(b) => write!(f, "fixed:{b}"),
            BlockSchedule::Geometric { first, factor } => write!(f, "geometric:{first}:{factor}"),
        }
    }
}

/// Parses `fixed:<size>` or `geometric:<first>:<factor>`.
impl FromStr for BlockSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad block schedule {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let sched = match parts.as_slice() {
            ["fixed", b] => BlockSchedule::Fixed(b.parse().map_err(|_| bad())?),
            ["geometric", first, factor] => BlockSchedule::Geometric {
                first: first.parse().map_err(|_| bad())?,
                factor: factor.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        sched.validate()?;
        Ok(sched)
    }
}
