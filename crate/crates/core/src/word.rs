use std::fmt;
use std::str::FromStr;

/// A word in the generators of a finitely presented group.
///
/// Letters are signed, 1-based generator indices: `3` is the third generator,
/// `-3` its inverse. Zero is never a valid letter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<i32>);

impl Word {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Panics on a zero letter.
    pub fn new(letters: Vec<i32>) -> Self {
        assert!(letters.iter().all(|&l| l != 0), "zero is not a letter");
        Self(letters)
    }

    pub fn letter(l: i32) -> Self {
        Self::new(vec![l])
    }

    /// `g^k` for a single generator letter.
    pub fn power(l: i32, k: usize) -> Self {
        Self::new(vec![l; k])
    }

    /// `a b a⁻¹ b⁻¹`.
    pub fn commutator(a: i32, b: i32) -> Self {
        Self::new(vec![a, b, -a, -b])
    }

    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.iter().rev().map(|l| -l).collect())
    }

    pub fn concat(&self, other: &Word) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }

    pub fn push(&mut self, l: i32) {
        assert!(l != 0, "zero is not a letter");
        self.0.push(l);
    }

    /// Cancels adjacent `x x⁻¹` pairs.
    pub fn reduced(&self) -> Self {
        let mut out: Vec<i32> = Vec::with_capacity(self.0.len());
        for &l in &self.0 {
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Self(out)
    }

    /// Largest generator index referenced.
    pub fn max_generator(&self) -> usize {
        self.0.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let letters = s
            .split_whitespace()
            .map(|t| match t.parse::<i32>() {
                Ok(0) => Err("zero is not a letter".to_string()),
                Ok(l) => Ok(l),
                Err(e) => Err(format!("bad letter {t:?}: {e}")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self(letters))
    }
}

impl From<Vec<i32>> for Word {
    fn from(v: Vec<i32>) -> Self {
        Self::new(v)
    }
}
