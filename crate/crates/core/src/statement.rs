//! Conditional-independence statements `X ⫫ Y | Z` over named variables.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::hash::{Hash, Hasher};

/// A set of variable symbols, kept sorted.
pub type VarSet = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatementError {
    #[error("statement side {0} is empty")]
    EmptySide(&'static str),
    #[error("variable {0} appears in more than one of x, y, z")]
    Overlap(String),
}

/// `x ⫫ y | z`.
///
/// The statement remembers the orientation it was built with (the
/// composition rules single out `x`), but equality, ordering and hashing
/// all go through the canonical form: the lexicographically smaller of
/// `{x, y}` first. `X ⫫ Y | Z` and `Y ⫫ X | Z` therefore compare equal.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawStatement", into = "RawStatement"))]
pub struct CiStatement {
    x: VarSet,
    y: VarSet,
    z: VarSet,
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct RawStatement {
    x: Vec<String>,
    y: Vec<String>,
    #[serde(default)]
    z: Vec<String>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawStatement> for CiStatement {
    type Error = StatementError;
    fn try_from(raw: RawStatement) -> Result<Self, Self::Error> {
        CiStatement::new(raw.x, raw.y, raw.z)
    }
}

#[cfg(feature = "serde")]
impl From<CiStatement> for RawStatement {
    fn from(s: CiStatement) -> Self {
        RawStatement {
            x: s.x.into_iter().collect(),
            y: s.y.into_iter().collect(),
            z: s.z.into_iter().collect(),
        }
    }
}

impl CiStatement {
    pub fn new<X, Y, Z, S>(x: X, y: Y, z: Z) -> Result<Self, StatementError>
    where
        X: IntoIterator<Item = S>,
        Y: IntoIterator<Item = S>,
        Z: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let x: VarSet = x.into_iter().map(Into::into).collect();
        let y: VarSet = y.into_iter().map(Into::into).collect();
        let z: VarSet = z.into_iter().map(Into::into).collect();
        Self::from_sets(x, y, z)
    }

    pub fn from_sets(x: VarSet, y: VarSet, z: VarSet) -> Result<Self, StatementError> {
        if x.is_empty() {
            return Err(StatementError::EmptySide("x"));
        }
        if y.is_empty() {
            return Err(StatementError::EmptySide("y"));
        }
        if let Some(v) = x.intersection(&y).next() {
            return Err(StatementError::Overlap(v.clone()));
        }
        if let Some(v) = x.intersection(&z).chain(y.intersection(&z)).next() {
            return Err(StatementError::Overlap(v.clone()));
        }
        Ok(CiStatement { x, y, z })
    }

    pub fn x(&self) -> &VarSet {
        &self.x
    }

    pub fn y(&self) -> &VarSet {
        &self.y
    }

    pub fn z(&self) -> &VarSet {
        &self.z
    }

    /// Same statement with `x` and `y` swapped.
    pub fn swapped(&self) -> CiStatement {
        CiStatement { x: self.y.clone(), y: self.x.clone(), z: self.z.clone() }
    }

    pub fn is_canonical(&self) -> bool {
        self.x <= self.y
    }

    pub fn canonical(&self) -> CiStatement {
        if self.is_canonical() {
            self.clone()
        } else {
            self.swapped()
        }
    }

    /// Raw orientation equality, ignoring canonicalization.
    pub fn same_orientation(&self, other: &CiStatement) -> bool {
        self.x == other.x && self.y == other.y && self.z == other.z
    }

    /// Every variable mentioned.
    pub fn variables(&self) -> VarSet {
        self.x.iter().chain(&self.y).chain(&self.z).cloned().collect()
    }

    fn key(&self) -> (&VarSet, &VarSet, &VarSet) {
        if self.x <= self.y {
            (&self.x, &self.y, &self.z)
        } else {
            (&self.y, &self.x, &self.z)
        }
    }
}

impl PartialEq for CiStatement {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for CiStatement {}

impl PartialOrd for CiStatement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CiStatement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl Hash for CiStatement {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

fn write_set(f: &mut fmt::Formatter<'_>, set: &VarSet) -> fmt::Result {
    if set.len() == 1 {
        return write!(f, "{}", set.iter().next().unwrap());
    }
    f.write_str("{")?;
    for (i, v) in set.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        f.write_str(v)?;
    }
    f.write_str("}")
}

impl fmt::Display for CiStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_set(f, &self.x)?;
        f.write_str(" ⫫ ")?;
        write_set(f, &self.y)?;
        if !self.z.is_empty() {
            f.write_str(" | ")?;
            write_set(f, &self.z)?;
        }
        Ok(())
    }
}

/// Stable identifier string for a statement, independent of orientation.
pub fn statement_key(s: &CiStatement) -> String {
    let (x, y, z) = s.key();
    let join = |set: &VarSet| set.iter().cloned().collect::<Vec<_>>().join(",");
    alloc::format!("{}|{}|{}", join(x), join(y), join(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_overlap_and_empty_sides() {
        assert_eq!(
            CiStatement::new(["A"], ["A"], Vec::<&str>::new()),
            Err(StatementError::Overlap("A".into()))
        );
        assert_eq!(
            CiStatement::new(["A"], ["B"], ["B"]),
            Err(StatementError::Overlap("B".into()))
        );
        assert_eq!(
            CiStatement::new(Vec::<&str>::new(), ["B"], ["C"]),
            Err(StatementError::EmptySide("x"))
        );
    }

    #[test]
    fn symmetric_forms_compare_equal() {
        let a = CiStatement::new(["H"], ["I"], ["F"]).unwrap();
        let b = CiStatement::new(["I"], ["H"], ["F"]).unwrap();
        assert_eq!(a, b);
        assert!(!a.same_orientation(&b));
        assert_eq!(statement_key(&a), statement_key(&b));
        assert_eq!(format!("{}", b.canonical()), "H ⫫ I | F");
    }
}
