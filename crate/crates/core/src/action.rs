use serde::{Deserialize, Serialize};

/// Query decision for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Silent,
    Pull,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Silent, Action::Pull];

    /// The query indicator alpha in {0, 1}.
    pub fn indicator(self) -> f64 {
        match self {
            Action::Silent => 0.0,
            Action::Pull => 1.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_pull(self) -> bool {
        self == Action::Pull
    }

    pub fn from_pull(pull: bool) -> Self {
        if pull {
            Action::Pull
        } else {
            Action::Silent
        }
    }
}
