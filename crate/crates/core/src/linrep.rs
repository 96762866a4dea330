//! Linear representations of finitely presented groups.
//!
//! A [`Representation`] stores one complex `n × n` matrix per generator
//! together with the relation words it is supposed to satisfy. Real
//! representations are stored in the same complex matrices with a
//! [`Field::Real`] tag so that every downstream routine has a single code path.
//!
//! Symmetric powers use the monomial basis of degree-`k` exponent vectors in
//! lexicographic order, highest first: for `n = 2, k = 2` the basis is
//! `x², xy, y²`. Exterior powers use increasing index sets in lexicographic
//! order, so `∧ᵏA` has the `k × k` minors of `A` as entries.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::word::Word;

pub type Cx = Complex64;
pub type MatrixN = DMatrix<Cx>;

/// Largest functor output dimension we are willing to build.
pub const MAX_FUNCTOR_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepError {
    #[error("generator {index} is not an {n}x{n} matrix")]
    Shape { index: usize, n: usize },
    #[error("generator {index} has non-finite entries")]
    NonFinite { index: usize },
    #[error("generator {index} has |det| = {det:e}, outside [1e-6, 1e6]")]
    Singular { index: usize, det: f64 },
    #[error("word references generator {letter} but only {count} exist")]
    BadLetter { letter: i32, count: usize },
    #[error("functor output dimension {dim} exceeds the budget {MAX_FUNCTOR_DIM}")]
    Resource { dim: usize },
    #[error("invalid power {k} for dimension {n}")]
    BadPower { k: usize, n: usize },
    #[error("representation needs at least one generator")]
    NoGenerators,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, RepError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn as_str(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }
}

/// A homomorphism from a finitely presented group to `GL_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    n: usize,
    field: Field,
    generators: Vec<MatrixN>,
    inverses: Vec<MatrixN>,
    relations: Vec<Word>,
    label: String,
    projective: bool,
}

impl Representation {
    /// Validates shapes, finiteness, invertibility and relation letters.
    /// Relations are *not* checked here; see [`check_relations`].
    pub fn new(
        label: impl Into<String>,
        field: Field,
        generators: Vec<MatrixN>,
        relations: Vec<Word>,
        projective: bool,
    ) -> Result<Self> {
        let n = generators.first().ok_or(RepError::NoGenerators)?.nrows();
        let mut inverses = Vec::with_capacity(generators.len());
        for (index, g) in generators.iter().enumerate() {
            if g.nrows() != n || g.ncols() != n {
                return Err(RepError::Shape { index, n });
            }
            if g.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(RepError::NonFinite { index });
            }
            let det = g.determinant().norm();
            if !(1e-6..=1e6).contains(&det) {
                return Err(RepError::Singular { index, det });
            }
            let inv = g
                .clone()
                .try_inverse()
                .ok_or(RepError::Singular { index, det })?;
            inverses.push(inv);
        }
        let count = generators.len();
        for w in &relations {
            if let Some(&letter) = w
                .letters()
                .iter()
                .find(|l| l.unsigned_abs() as usize > count)
            {
                return Err(RepError::BadLetter { letter, count });
            }
        }
        Ok(Self {
            n,
            field,
            generators,
            inverses,
            relations,
            label: label.into(),
            projective,
        })
    }

    /// Every generator maps to the identity.
    pub fn trivial(n: usize, generator_count: usize, relations: Vec<Word>) -> Self {
        let gens = vec![MatrixN::identity(n, n); generator_count];
        Self::new("trivial", Field::Real, gens, relations, false).expect("identity is valid")
    }

    /// Builds a real representation from 2×2 real matrices.
    pub fn from_real_2x2(
        label: impl Into<String>,
        mats: &[[[f64; 2]; 2]],
        relations: Vec<Word>,
        projective: bool,
    ) -> Result<Self> {
        let gens = mats
            .iter()
            .map(|m| {
                MatrixN::from_row_slice(
                    2,
                    2,
                    &[m[0][0], m[0][1], m[1][0], m[1][1]].map(|x| Cx::new(x, 0.0)),
                )
            })
            .collect();
        Self::new(label, Field::Real, gens, relations, projective)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn generators(&self) -> &[MatrixN] {
        &self.generators
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub fn relations(&self) -> &[Word] {
        &self.relations
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn projective(&self) -> bool {
        self.projective
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Image of a single signed, 1-based letter.
    pub fn letter_image(&self, letter: i32) -> &MatrixN {
        let i = letter.unsigned_abs() as usize - 1;
        if letter > 0 {
            &self.generators[i]
        } else {
            &self.inverses[i]
        }
    }

    /// Replaces the generator images, keeping relations and metadata.
    pub fn with_generators(&self, generators: Vec<MatrixN>, field: Field) -> Result<Self> {
        Self::new(
            self.label.clone(),
            field,
            generators,
            self.relations.clone(),
            self.projective,
        )
    }

    /// `g ↦ X g X⁻¹`.
    pub fn conjugated(&self, x: &MatrixN) -> Result<Self> {
        let xi = x
            .clone()
            .try_inverse()
            .ok_or(RepError::Singular { index: 0, det: 0.0 })?;
        let gens = self.generators.iter().map(|g| x * g * &xi).collect();
        let field = if x.iter().any(|z| z.im != 0.0) {
            Field::Complex
        } else {
            self.field
        };
        self.with_generators(gens, field)
    }

    /// Every generator has determinant one within `tol`.
    pub fn has_unit_determinant(&self, tol: f64) -> bool {
        self.generators
            .iter()
            .all(|g| (g.determinant() - Cx::new(1.0, 0.0)).norm() < tol)
    }

    fn check_letter(&self, letter: i32) -> Result<()> {
        if letter == 0 || letter.unsigned_abs() as usize > self.generators.len() {
            return Err(RepError::BadLetter {
                letter,
                count: self.generators.len(),
            });
        }
        Ok(())
    }
}

/// `ρ(w)`: the product of letter images in word order.
pub fn eval_word(rep: &Representation, w: &Word) -> Result<MatrixN> {
    let mut m = MatrixN::identity(rep.n, rep.n);
    for &l in w.letters() {
        rep.check_letter(l)?;
        m *= rep.letter_image(l);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationReport {
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Index of the relation achieving `max_residual`.
    pub worst: Option<usize>,
    /// Each residual divided by `Π max(1, ‖ρ(ℓ)‖/√n)` over the letters `ℓ`
    /// of its relation, the rounding scale of the product.
    pub scaled: Vec<f64>,
    pub max_scaled: f64,
}

impl RelationReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }

    /// Like [`passes`](Self::passes) on the scaled residuals, for
    /// representations with large entries.
    pub fn passes_scaled(&self, tol: f64) -> bool {
        self.max_scaled <= tol
    }
}

/// Frobenius residual `‖ρ(w) − I‖`, or `min ‖ρ(w) ∓ I‖` for projective
/// representations, for every relation.
pub fn check_relations(rep: &Representation) -> RelationReport {
    let id = MatrixN::identity(rep.n, rep.n);
    let residuals: Vec<f64> = rep
        .relations
        .iter()
        .map(|w| {
            let m = eval_word(rep, w).expect("letters validated at construction");
            let plus = (&m - &id).norm();
            if rep.projective {
                plus.min((&m + &id).norm())
            } else {
                plus
            }
        })
        .collect();
    let root_n = (rep.n as f64).sqrt();
    let scaled: Vec<f64> = rep
        .relations
        .iter()
        .zip(&residuals)
        .map(|(w, r)| {
            let scale: f64 = w
                .letters()
                .iter()
                .map(|&l| (rep.letter_image(l).norm() / root_n).max(1.0))
                .product();
            r / scale
        })
        .collect();
    let max_scaled = scaled.iter().copied().fold(0.0, f64::max);
    let (worst, max_residual) = residuals
        .iter()
        .copied()
        .enumerate()
        .fold((None, 0.0f64), |(wi, wv), (i, v)| {
            if v > wv || wi.is_none() {
                (Some(i), v)
            } else {
                (wi, wv)
            }
        });
    RelationReport {
        residuals,
        max_residual,
        worst,
        scaled,
        max_scaled,
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Degree-`k` exponent vectors in `n` variables, lexicographic, highest first.
pub fn monomial_basis(n: usize, k: usize) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(n, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k as u32, &mut Vec::new(), &mut out);
    out
}

/// Increasing `k`-subsets of `0..n` in lexicographic order.
pub fn index_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `Symᵏ(A)` in the canonical monomial basis.
///
/// Column `α` holds the coefficients of `∏ᵢ (A eᵢ)^{αᵢ}` expanded in the
/// basis, which makes `A ↦ Symᵏ(A)` multiplicative.
pub fn sym_matrix(a: &MatrixN, k: usize) -> MatrixN {
    let n = a.nrows();
    let basis = monomial_basis(n, k);
    let index: HashMap<&[u32], usize> = basis
        .iter()
        .enumerate()
        .map(|(i, e)| (e.as_slice(), i))
        .collect();
    let dim = basis.len();
    let mut out = MatrixN::zeros(dim, dim);
    for (col, alpha) in basis.iter().enumerate() {
        let mut poly: HashMap<Vec<u32>, Cx> = HashMap::new();
        poly.insert(vec![0; n], Cx::new(1.0, 0.0));
        for (i, &ai) in alpha.iter().enumerate() {
            for _ in 0..ai {
                let mut next: HashMap<Vec<u32>, Cx> = HashMap::with_capacity(poly.len() * n);
                for (e, c) in &poly {
                    for j in 0..n {
                        let coeff = a[(j, i)];
                        if coeff == Cx::new(0.0, 0.0) {
                            continue;
                        }
                        let mut e2 = e.clone();
                        e2[j] += 1;
                        *next.entry(e2).or_insert(Cx::new(0.0, 0.0)) += c * coeff;
                    }
                }
                poly = next;
            }
        }
        for (e, c) in poly {
            out[(index[e.as_slice()], col)] = c;
        }
    }
    out
}

/// `∧ᵏ(A)`: entry `(I, J)` is the minor `det A[I, J]`.
pub fn ext_matrix(a: &MatrixN, k: usize) -> MatrixN {
    let n = a.nrows();
    let subsets = index_subsets(n, k);
    let dim = subsets.len();
    let mut out = MatrixN::zeros(dim, dim);
    for (r, rows) in subsets.iter().enumerate() {
        for (c, cols) in subsets.iter().enumerate() {
            let minor = MatrixN::from_fn(k, k, |i, j| a[(rows[i], cols[j])]);
            out[(r, c)] = minor.determinant();
        }
    }
    out
}

/// `Symᵏ ∘ ρ`.
pub fn sym_power(rep: &Representation, k: usize) -> Result<Representation> {
    if k == 0 {
        return Err(RepError::BadPower { k, n: rep.n });
    }
    let dim = binomial(rep.n + k - 1, k);
    if dim > MAX_FUNCTOR_DIM {
        return Err(RepError::Resource { dim });
    }
    let gens = rep.generators.iter().map(|g| sym_matrix(g, k)).collect();
    // Odd powers keep the sign ambiguity of a projective representation.
    let projective = rep.projective && k % 2 == 1;
    Representation::new(
        format!("sym{k}({})", rep.label),
        rep.field,
        gens,
        rep.relations.clone(),
        projective,
    )
}

/// `∧ᵏ ∘ ρ`.
pub fn ext_power(rep: &Representation, k: usize) -> Result<Representation> {
    if k == 0 || k > rep.n {
        return Err(RepError::BadPower { k, n: rep.n });
    }
    let dim = binomial(rep.n, k);
    if dim > MAX_FUNCTOR_DIM {
        return Err(RepError::Resource { dim });
    }
    let gens = rep.generators.iter().map(|g| ext_matrix(g, k)).collect();
    let projective = rep.projective && k % 2 == 1;
    Representation::new(
        format!("ext{k}({})", rep.label),
        rep.field,
        gens,
        rep.relations.clone(),
        projective,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Unitary,
    ReducibleSuspected,
    ElementarySuspected,
    NonElementarySuspected,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Unitary => "unitary",
            Classification::ReducibleSuspected => "reducible-suspected",
            Classification::ElementarySuspected => "elementary-suspected",
            Classification::NonElementarySuspected => "non-elementary-suspected",
        }
    }
}

/// Dimension of the algebra spanned by words of length at most `max_len`.
///
/// By Burnside's theorem a representation is irreducible exactly when this
/// reaches `n²`.
fn word_algebra_dim(rep: &Representation, max_len: usize) -> usize {
    let n = rep.n;
    let full = n * n;
    let mut basis: Vec<Vec<Cx>> = Vec::new();
    let try_add = |m: &MatrixN, basis: &mut Vec<Vec<Cx>>| -> bool {
        let mut v: Vec<Cx> = m.iter().copied().collect();
        let scale = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if scale == 0.0 {
            return false;
        }
        v.iter_mut().for_each(|z| *z /= scale);
        // Two passes of modified Gram–Schmidt.
        for _ in 0..2 {
            for b in basis.iter() {
                let dot: Cx = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                v.iter_mut().zip(b).for_each(|(y, x)| *y -= dot * x);
            }
        }
        let rest = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if rest > 1e-8 {
            v.iter_mut().for_each(|z| *z /= rest);
            basis.push(v);
            true
        } else {
            false
        }
    };
    let mut frontier = vec![MatrixN::identity(n, n)];
    try_add(&frontier[0], &mut basis);
    for _ in 0..max_len {
        let mut next = Vec::new();
        for m in &frontier {
            for l in 1..=rep.generator_count() as i32 {
                for letter in [l, -l] {
                    let p = m * rep.letter_image(letter);
                    if try_add(&p, &mut basis) {
                        next.push(p);
                    }
                    if basis.len() == full {
                        return full;
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    basis.len()
}

fn spectral_radius(m: &MatrixN) -> f64 {
    m.eigenvalues()
        .map(|ev| ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

/// Heuristic classification. Only [`Classification::Unitary`] is a
/// certificate; the other outcomes are suspicions from a finite word sample.
///
/// `budget` bounds both the number of random words sampled and the word length
/// used for the irreducibility span.
pub fn classify(rep: &Representation, budget: usize) -> Classification {
    let id = MatrixN::identity(rep.n, rep.n);
    if rep
        .generators
        .iter()
        .all(|g| (g.adjoint() * g - &id).norm() < 1e-9)
    {
        return Classification::Unitary;
    }
    if word_algebra_dim(rep, budget.max(2 * rep.n)) < rep.n * rep.n {
        return Classification::ReducibleSuspected;
    }
    // Look for loxodromic (pinching) elements among random words.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c1a5);
    let g = rep.generator_count() as i32;
    let mut loxodromic: Vec<MatrixN> = Vec::new();
    for _ in 0..budget.max(16) {
        let len = rng.gen_range(1..=8);
        let w = Word::new(
            (0..len)
                .map(|_| {
                    let l = rng.gen_range(1..=g);
                    if rng.gen_bool(0.5) {
                        l
                    } else {
                        -l
                    }
                })
                .collect(),
        );
        let m = eval_word(rep, &w).expect("valid letters");
        let det_scale = m.determinant().norm().powf(1.0 / rep.n as f64);
        if spectral_radius(&m) / det_scale > 1.0 + 1e-6 {
            loxodromic.push(m);
        }
    }
    if loxodromic.is_empty() {
        return Classification::ElementarySuspected;
    }
    if rep.n == 2 {
        // Twisting: two loxodromics without a common fixed point have
        // commutator trace different from 2.
        let twisted = loxodromic.iter().enumerate().any(|(i, a)| {
            loxodromic[i + 1..].iter().any(|b| {
                let (ai, bi) = (a.clone().try_inverse(), b.clone().try_inverse());
                match (ai, bi) {
                    (Some(ai), Some(bi)) => {
                        let c = a * b * ai * bi;
                        (c.trace() - Cx::new(2.0, 0.0)).norm() > 1e-6
                    }
                    _ => false,
                }
            })
        });
        if !twisted {
            return Classification::ElementarySuspected;
        }
    }
    Classification::NonElementarySuspected
}

fn format_entry(z: Cx, field: Field) -> String {
    match field {
        Field::Real => format!("{}", z.re),
        Field::Complex => {
            if z.im.is_sign_negative() {
                format!("{}-{}i", z.re, -z.im)
            } else {
                format!("{}+{}i", z.re, z.im)
            }
        }
    }
}

/// Parses `re`, `re+imi`, `re-imi` or `imi`.
pub fn parse_entry(tok: &str) -> std::result::Result<Cx, String> {
    let bad = || format!("bad matrix entry {tok:?}");
    if let Some(body) = tok.strip_suffix('i') {
        // Split at the last sign that does not belong to an exponent.
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&i| {
                (bytes[i] == b'+' || bytes[i] == b'-')
                    && !matches!(bytes[i - 1], b'e' | b'E')
            })
            .ok_or_else(bad)?;
        let re: f64 = body[..split].parse().map_err(|_| bad())?;
        let im_str = &body[split..];
        let im: f64 = match im_str {
            "+" => 1.0,
            "-" => -1.0,
            s => s.parse().map_err(|_| bad())?,
        };
        Ok(Cx::new(re, im))
    } else {
        Ok(Cx::new(tok.parse().map_err(|_| bad())?, 0.0))
    }
}

/// Serializes to the line-oriented representation file format.
pub fn write_rep(rep: &Representation) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "n={} field={} projective={} label={}",
        rep.n,
        rep.field.as_str(),
        u8::from(rep.projective),
        rep.label
    );
    for g in &rep.generators {
        for r in 0..rep.n {
            let row: Vec<String> = (0..rep.n)
                .map(|c| format_entry(g[(r, c)], rep.field))
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s.push('\n');
    }
    s.push_str("relations:\n");
    for w in &rep.relations {
        let _ = writeln!(s, "{w}");
    }
    s
}

/// Parses the representation file format written by [`write_rep`].
pub fn parse_rep(text: &str) -> Result<Representation> {
    let perr = |line: usize, msg: String| RepError::Parse { line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| perr(1, "empty file".into()))?;
    let mut n = None;
    let mut field = None;
    let mut projective = false;
    let mut label = String::new();
    let mut rest = header.trim();
    while !rest.is_empty() {
        if let Some(l) = rest.strip_prefix("label=") {
            label = l.to_string();
            break;
        }
        let (tok, tail) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
        rest = tail.trim_start();
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| perr(hline, format!("expected key=value, got {tok:?}")))?;
        match k {
            "n" => n = Some(v.parse::<usize>().map_err(|e| perr(hline, e.to_string()))?),
            "field" => {
                field = Some(match v {
                    "real" => Field::Real,
                    "complex" => Field::Complex,
                    _ => return Err(perr(hline, format!("unknown field {v:?}"))),
                })
            }
            "projective" => {
                projective = match v {
                    "0" => false,
                    "1" => true,
                    _ => return Err(perr(hline, format!("projective must be 0 or 1, got {v:?}"))),
                }
            }
            _ => return Err(perr(hline, format!("unknown header key {k:?}"))),
        }
    }
    let n = n.ok_or_else(|| perr(hline, "missing n=".into()))?;
    if n == 0 {
        return Err(perr(hline, "n must be positive".into()));
    }
    let field = field.ok_or_else(|| perr(hline, "missing field=".into()))?;

    let mut rows: Vec<Vec<Cx>> = Vec::new();
    let mut relations = Vec::new();
    let mut in_relations = false;
    for (ln, line) in lines {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if t == "relations:" {
            in_relations = true;
            continue;
        }
        if in_relations {
            relations.push(t.parse::<Word>().map_err(|m| perr(ln, m))?);
        } else {
            let row = t
                .split_whitespace()
                .map(parse_entry)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|m| perr(ln, m))?;
            if row.len() != n {
                return Err(perr(ln, format!("expected {n} entries, got {}", row.len())));
            }
            if field == Field::Real && row.iter().any(|z| z.im != 0.0) {
                return Err(perr(ln, "complex entry in a real representation".into()));
            }
            rows.push(row);
        }
    }
    if rows.len() % n != 0 {
        return Err(perr(0, format!("{} matrix rows is not a multiple of n={n}", rows.len())));
    }
    let gens = rows
        .chunks(n)
        .map(|block| MatrixN::from_fn(n, n, |r, c| block[r][c]))
        .collect();
    Representation::new(label, field, gens, relations, projective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, proptest};

    fn c(re: f64) -> Cx {
        Cx::new(re, 0.0)
    }

    fn m2(a: f64, b: f64, cc: f64, d: f64) -> MatrixN {
        MatrixN::from_row_slice(2, 2, &[c(a), c(b), c(cc), c(d)])
    }

    fn random_sl2(rng: &mut ChaCha8Rng) -> MatrixN {
        let a: f64 = rng.gen_range(-2.0..2.0);
        let b: f64 = rng.gen_range(-2.0..2.0);
        let cc: f64 = rng.gen_range(-2.0..2.0);
        let d = (1.0 + b * cc) / if a.abs() < 0.1 { 0.1 } else { a };
        let a = if a.abs() < 0.1 { 0.1 } else { a };
        m2(a, b, cc, d)
    }

    fn random_cmat(rng: &mut ChaCha8Rng, n: usize) -> MatrixN {
        MatrixN::from_fn(n, n, |_, _| Cx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn eval_word_basics() {
        let rep = Representation::new(
            "t",
            Field::Real,
            vec![m2(2.0, 1.0, 1.0, 1.0), m2(1.0, 3.0, 0.0, 1.0)],
            vec![],
            false,
        )
        .unwrap();
        assert_eq!(eval_word(&rep, &Word::empty()).unwrap(), MatrixN::identity(2, 2));
        let w = Word::new(vec![1, -2, 2, 1, -1]);
        let m = eval_word(&rep, &w.concat(&w.inverse())).unwrap();
        assert!((m - MatrixN::identity(2, 2)).norm() < 1e-10);
        assert!(matches!(
            eval_word(&rep, &Word::letter(3)),
            Err(RepError::BadLetter { .. })
        ));
    }

    #[test]
    fn relation_report() {
        let rel = vec![Word::commutator(1, 2), Word::power(1, 3)];
        let trivial = Representation::trivial(3, 2, rel);
        let r = check_relations(&trivial);
        assert_eq!(r.max_residual, 0.0);
        assert!(r.passes(0.0));

        // Rotation by 2π/3 satisfies a³ = I; perturbing one entry by 1e-3 breaks it.
        let (s, co) = (2.0 * std::f64::consts::PI / 3.0).sin_cos();
        let rot = m2(co, -s, s, co);
        let rep = Representation::new("r", Field::Real, vec![rot.clone()], vec![Word::power(1, 3)], false)
            .unwrap();
        assert!(check_relations(&rep).max_residual < 1e-12);
        let mut bad = rot;
        bad[(0, 1)] += c(1e-3);
        let rep = rep.with_generators(vec![bad], Field::Real).unwrap();
        let r = check_relations(&rep);
        assert!(r.max_residual > 1e-4);
        assert!(r.max_scaled > 1e-4 && !r.passes_scaled(1e-6));
        assert_eq!(r.worst, Some(0));
    }

    #[test]
    fn rejects_singular_and_bad_letters() {
        assert!(matches!(
            Representation::new("x", Field::Real, vec![m2(1.0, 0.0, 0.0, 0.0)], vec![], false),
            Err(RepError::Singular { .. })
        ));
        assert!(matches!(
            Representation::new("x", Field::Real, vec![m2(1.0, 0.0, 0.0, 1.0)], vec![Word::letter(-2)], false),
            Err(RepError::BadLetter { .. })
        ));
    }

    #[test]
    fn monomial_order_is_lex_highest_first() {
        assert_eq!(monomial_basis(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(monomial_basis(3, 1), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(monomial_basis(3, 2).len(), 6);
        assert_eq!(index_subsets(4, 2).len(), 6);
        assert_eq!(index_subsets(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn sym_examples() {
        let a = m2(1.7, 0.3, -0.2, 0.9);
        assert_eq!(sym_matrix(&a, 1), a);
        // Oracle: diag(λ, 1/λ) acts on x², xy, y² by λ², 1, λ⁻².
        let l = 1.9;
        let s = sym_matrix(&m2(l, 0.0, 0.0, 1.0 / l), 2);
        let expect = MatrixN::from_diagonal(&nalgebra::DVector::from_vec(vec![c(l * l), c(1.0), c(1.0 / (l * l))]));
        assert!((s - expect).norm() < 1e-14);
        // Oracle for a general matrix: (ax + cy)² etc. with columns x ↦ ax + cy.
        let (p, q, r, t) = (1.2, -0.7, 0.4, 2.0);
        let s = sym_matrix(&m2(p, q, r, t), 2);
        // column x²: (p x + r y)² = p² x² + 2pr xy + r² y²
        let col0 = [p * p, 2.0 * p * r, r * r];
        // column xy: (p x + r y)(q x + t y)
        let col1 = [p * q, p * t + r * q, r * t];
        let col2 = [q * q, 2.0 * q * t, t * t];
        for i in 0..3 {
            assert!((s[(i, 0)].re - col0[i]).abs() < 1e-14);
            assert!((s[(i, 1)].re - col1[i]).abs() < 1e-14);
            assert!((s[(i, 2)].re - col2[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn ext_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_cmat(&mut rng, 4);
        assert_eq!(ext_matrix(&a, 1), a);
        // Oracle: 2×2 minors by the explicit ad − bc expansion.
        let e = ext_matrix(&a, 2);
        let subsets = index_subsets(4, 2);
        for (r, rs) in subsets.iter().enumerate() {
            for (cc, cs) in subsets.iter().enumerate() {
                let minor = a[(rs[0], cs[0])] * a[(rs[1], cs[1])] - a[(rs[0], cs[1])] * a[(rs[1], cs[0])];
                assert!((e[(r, cc)] - minor).norm() < 1e-13);
            }
        }
        let top = ext_matrix(&a, 4);
        assert!((top[(0, 0)] - a.determinant()).norm() < 1e-12);
    }

    #[test]
    fn ext_top_of_unit_det_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rep = Representation::new(
            "sl2",
            Field::Real,
            vec![random_sl2(&mut rng), random_sl2(&mut rng)],
            vec![],
            false,
        )
        .unwrap();
        let top = ext_power(&rep, 2).unwrap();
        assert_eq!(top.n(), 1);
        for g in top.generators() {
            assert!((g[(0, 0)] - c(1.0)).norm() < 1e-12);
        }
        assert!(ext_power(&rep, 3).is_err());
        assert!(sym_power(&rep, 0).is_err());
        assert!(matches!(sym_power(&rep, 300), Err(RepError::Resource { .. })));
    }

    #[test]
    fn functor_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rep = Representation::new("r", Field::Complex, vec![random_cmat(&mut rng, 3)], vec![], false)
            .unwrap();
        let a = ext_power(&sym_power(&rep, 1).unwrap(), 2).unwrap();
        let b = ext_power(&rep, 2).unwrap();
        assert_eq!(a.generators(), b.generators());
    }

    #[test]
    fn classify_examples() {
        let (s, co) = (0.7f64).sin_cos();
        let su2_a = MatrixN::from_row_slice(2, 2, &[Cx::new(co, 0.0), Cx::new(0.0, s), Cx::new(0.0, s), Cx::new(co, 0.0)]);
        let su2_b = MatrixN::from_row_slice(2, 2, &[Cx::new(co, s), c(0.0), c(0.0), Cx::new(co, -s)]);
        let unitary = Representation::new("u", Field::Complex, vec![su2_a, su2_b], vec![], false).unwrap();
        assert_eq!(classify(&unitary, 32), Classification::Unitary);

        let upper = Representation::new(
            "b",
            Field::Real,
            vec![m2(2.0, 1.0, 0.0, 0.5), m2(3.0, -1.0, 0.0, 1.0 / 3.0)],
            vec![],
            false,
        )
        .unwrap();
        assert_eq!(classify(&upper, 32), Classification::ReducibleSuspected);
        assert_eq!(classify(&Representation::trivial(2, 2, vec![]), 8), Classification::Unitary);

        // Non-unitary but bounded: an elliptic conjugated by a shear.
        let (s, co) = (1.1f64).sin_cos();
        let ell = Representation::new("e", Field::Real, vec![m2(co, -s, s, co)], vec![], false)
            .unwrap()
            .conjugated(&m2(1.0, 3.0, 0.0, 1.0))
            .unwrap();
        assert_ne!(classify(&ell, 32), Classification::NonElementarySuspected);

        let free = Representation::new(
            "f",
            Field::Real,
            vec![m2(2.0, 1.0, 1.0, 1.0), m2(1.0, 0.0, 2.0, 1.0)],
            vec![],
            false,
        )
        .unwrap();
        assert_eq!(classify(&free, 32), Classification::NonElementarySuspected);
    }

    #[test]
    fn file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rep = Representation::new(
            "my rep",
            Field::Complex,
            vec![random_cmat(&mut rng, 3), random_cmat(&mut rng, 3)],
            vec![Word::commutator(1, 2), Word::new(vec![1, 1, -2])],
            true,
        )
        .unwrap();
        let text = write_rep(&rep);
        assert!(text.starts_with("n=3 field=complex projective=1 label=my rep\n"));
        assert_eq!(parse_rep(&text).unwrap(), rep);
        assert_eq!(parse_entry("1e-3-2.5e+2i").unwrap(), Cx::new(1e-3, -250.0));
        assert_eq!(parse_entry("-1+1i").unwrap(), Cx::new(-1.0, 1.0));
        assert!(parse_rep("n=2 field=real\n1 0\n0\n").is_err());
        assert!(parse_rep("n=1 field=real\n1+2i\n").is_err());
    }

    proptest! {
        #[test]
        fn homomorphism(seed in 0u64..1000, l1 in 0usize..20, l2 in 0usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rep = Representation::new(
                "r",
                Field::Real,
                vec![random_sl2(&mut rng), random_sl2(&mut rng), random_sl2(&mut rng)],
                vec![],
                false,
            ).unwrap();
            let mut word = |len: usize| Word::new((0..len).map(|_| {
                let l = rng.gen_range(1..=3);
                if rng.gen_bool(0.5) { l } else { -l }
            }).collect());
            let (w1, w2) = (word(l1), word(l2));
            let lhs = eval_word(&rep, &w1.concat(&w2)).unwrap();
            let rhs = eval_word(&rep, &w1).unwrap() * eval_word(&rep, &w2).unwrap();
            // Rounding scales with the product of the factor norms, not with
            // the norm of a product that may have cancelled.
            let scale: f64 = w1.concat(&w2).letters().iter().map(|&l| rep.letter_image(l).norm()).product();
            prop_assert!((&lhs - &rhs).norm() < 1e-12 * (1.0 + scale));
        }

        #[test]
        fn sym_is_multiplicative(seed in 0u64..1000, k in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = (random_sl2(&mut rng), random_sl2(&mut rng));
            let lhs = sym_matrix(&(&a * &b), k);
            let rhs = sym_matrix(&a, k) * sym_matrix(&b, k);
            prop_assert!((&lhs - &rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        }

        #[test]
        fn ext_is_multiplicative(seed in 0u64..1000, k in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = (random_cmat(&mut rng, 4), random_cmat(&mut rng, 4));
            let lhs = ext_matrix(&(&a * &b), k);
            let rhs = ext_matrix(&a, k) * ext_matrix(&b, k);
            prop_assert!((&lhs - &rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        }

        #[test]
        fn sym_determinant(seed in 0u64..1000, k in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Random unit-determinant 3×3: normalize a random matrix.
            let a = random_cmat(&mut rng, 3);
            let d = a.determinant();
            let a = a / d.powf(1.0 / 3.0);
            let dim = binomial(3 + k - 1, k);
            let expect = a.determinant().powf((k * dim) as f64 / 3.0);
            let got = sym_matrix(&a, k).determinant();
            prop_assert!((got - expect).norm() < 1e-8, "{got} vs {expect}");
        }
    }
}
