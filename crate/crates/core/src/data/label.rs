use std::fmt;

/// Driver state. Manifest codes are 1 (Alert) and 2 (Drowsy); network class
/// indices are 0 and 1. This is the only place the mapping is defined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Alert,
    Drowsy,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Alert, Label::Drowsy];
    pub const NUM_CLASSES: usize = 2;

    pub fn code(self) -> u8 {
        match self {
            Label::Alert => 1,
            Label::Drowsy => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Label::Alert),
            2 => Some(Label::Drowsy),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::Alert => 0,
            Label::Drowsy => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Alert => "Alert",
            Label::Drowsy => "Drowsy",
        }
    }

    pub fn class_names() -> Vec<String> {
        Self::ALL.iter().map(|l| l.name().to_string()).collect()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
