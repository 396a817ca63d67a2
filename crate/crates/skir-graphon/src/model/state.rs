use std::fmt;
use std::str::FromStr;

/// The four SKIR compartments, in the fixed order used for all indexing.
///
/// `S` is uninformed, `K` spreads the truth, `I` spreads the rumor, `R` has
/// lost interest. The discriminants give the array index of each state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(usize)]
pub enum StateId {
    S = 0,
    K = 1,
    I = 2,
    R = 3,
}

impl StateId {
    /// All states in index order.
    pub const ALL: [StateId; 4] = [StateId::S, StateId::K, StateId::I, StateId::R];

    /// Number of states.
    pub const COUNT: usize = 4;

    /// Array index of this state.
    #[inline]
    pub const fn index(self) -> usize {
        self as usize
    }

    /// Inverse of [`StateId::index`].
    pub const fn from_index(i: usize) -> Option<StateId> {
        match i {
            0 => Some(StateId::S),
            1 => Some(StateId::K),
            2 => Some(StateId::I),
            3 => Some(StateId::R),
            _ => None,
        }
    }

    /// One-letter label, as used in CSV output.
    pub const fn label(self) -> &'static str {
        match self {
            StateId::S => "S",
            StateId::K => "K",
            StateId::I => "I",
            StateId::R => "R",
        }
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S" => Ok(StateId::S),
            "K" => Ok(StateId::K),
            "I" => Ok(StateId::I),
            "R" => Ok(StateId::R),
            other => Err(format!("unknown state label {other:?}")),
        }
    }
}
