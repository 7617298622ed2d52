use std::fmt;
use std::str::FromStr;

/// The four behaviours the classifier scores and the policy is commanded with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Skill {
    KeepStill,
    Walk,
    Run,
    Jump,
}

impl Skill {
    pub const ALL: [Skill; 4] = [Skill::KeepStill, Skill::Walk, Skill::Run, Skill::Jump];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Skill> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Skill::KeepStill => "keep_still",
            Skill::Walk => "walk",
            Skill::Run => "run",
            Skill::Jump => "jump",
        }
    }

    pub fn one_hot(self) -> [f32; 4] {
        let mut v = [0.0; 4];
        v[self.index()] = 1.0;
        v
    }

    pub fn bit(self) -> u8 {
        1 << self.index()
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Skill {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Skill::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::Error::Invalid(format!("unknown skill `{s}`")))
    }
}
