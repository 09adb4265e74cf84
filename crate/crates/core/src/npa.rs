//! Monomial algebra over the two parties' ±1 observables and the symbolic
//! NPA moment matrix.
//!
//! Each observable squares to the identity and the parties' algebras commute,
//! so every word reduces to a canonical form: Alice letters first, then Bob
//! letters, with no adjacent repeats inside either party's word. The level-k
//! basis collects all reduced words of total length ≤ k; the moment matrix
//! assigns to entry (i, j) the equivalence class of basis[i]† · basis[j],
//! identifying each monomial with its adjoint so the matrix is real symmetric.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::bell::{BellFunctional, Scenario};
use crate::error::{Error, Result};
use crate::par;
use crate::sdp::{SparseSymMat, StandardFormSdp};

/// Party label for a raw operator letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    A,
    B,
}

/// One raw operator letter, e.g. A3 = `Letter { party: A, setting: 3 }`.
/// Settings are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter {
    pub party: Party,
    pub setting: u16,
}

impl Letter {
    pub fn a(setting: u16) -> Self {
        Self {
            party: Party::A,
            setting,
        }
    }

    pub fn b(setting: u16) -> Self {
        Self {
            party: Party::B,
            setting,
        }
    }
}

/// A reduced word over the party observables, in canonical form.
///
/// Ordering (used for basis layout and canonical class representatives):
/// total length first, then Bob-word length, then the two words
/// lexicographically. This puts the identity first and, per length, Alice-only
/// words before mixed words before Bob-only words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    total_len: u32,
    b_len: u32,
    a_word: Vec<u16>,
    b_word: Vec<u16>,
}

/// Cancels adjacent equal letters (X² = 1) with a stack pass; applied to a
/// concatenation of reduced words this removes exactly the junction collapse,
/// iterated to fixed point.
fn cancel(letters: impl IntoIterator<Item = u16>) -> Vec<u16> {
    let mut stack: Vec<u16> = Vec::new();
    for l in letters {
        if stack.last() == Some(&l) {
            stack.pop();
        } else {
            stack.push(l);
        }
    }
    stack
}

impl Monomial {
    fn from_words(a_word: Vec<u16>, b_word: Vec<u16>) -> Self {
        debug_assert!(a_word.windows(2).all(|w| w[0] != w[1]));
        debug_assert!(b_word.windows(2).all(|w| w[0] != w[1]));
        Self {
            total_len: (a_word.len() + b_word.len()) as u32,
            b_len: b_word.len() as u32,
            a_word,
            b_word,
        }
    }

    pub fn identity() -> Self {
        Self::from_words(Vec::new(), Vec::new())
    }

    /// The length-1 word A_x.
    pub fn alice(x: u16) -> Self {
        Self::from_words(vec![x], Vec::new())
    }

    /// The length-1 word B_y.
    pub fn bob(y: u16) -> Self {
        Self::from_words(Vec::new(), vec![y])
    }

    /// The length-2 word A_x B_y.
    pub fn correlator(x: u16, y: u16) -> Self {
        Self::from_words(vec![x], vec![y])
    }

    pub fn is_identity(&self) -> bool {
        self.total_len == 0
    }

    pub fn len(&self) -> usize {
        self.total_len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.total_len == 0
    }

    pub fn a_word(&self) -> &[u16] {
        &self.a_word
    }

    pub fn b_word(&self) -> &[u16] {
        &self.b_word
    }

    /// Adjoint: Hermitian generators, so each party's word reverses. The
    /// reversal of a reduced word is reduced.
    pub fn adjoint(&self) -> Self {
        let mut a = self.a_word.clone();
        let mut b = self.b_word.clone();
        a.reverse();
        b.reverse();
        Self::from_words(a, b)
    }

    /// Product of two reduced monomials, reduced again.
    pub fn product(&self, rhs: &Self) -> Self {
        let a = cancel(self.a_word.iter().chain(rhs.a_word.iter()).copied());
        let b = cancel(self.b_word.iter().chain(rhs.b_word.iter()).copied());
        Self::from_words(a, b)
    }

    /// Canonical representative of the {m, m†} pair: the smaller of the two
    /// in the monomial ordering. Moment-matrix classes identify a monomial
    /// with its adjoint (real symmetric matrix convention).
    pub fn adjoint_class_rep(&self) -> Self {
        let adj = self.adjoint();
        if adj < *self {
            adj
        } else {
            self.clone()
        }
    }
}

impl fmt::Display for Monomial {
    /// `A1A2B3` style; the identity prints as `1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "1");
        }
        for x in &self.a_word {
            write!(f, "A{x}")?;
        }
        for y in &self.b_word {
            write!(f, "B{y}")?;
        }
        Ok(())
    }
}

/// Reduces a raw operator sequence to its canonical monomial: Bob letters
/// commuted past Alice letters, adjacent duplicates cancelled within each
/// party's word, iterated to fixed point.
pub fn reduce(scenario: &Scenario, word: &[Letter]) -> Result<Monomial> {
    for l in word {
        let bound = match l.party {
            Party::A => scenario.inputs_a(),
            Party::B => scenario.inputs_b(),
        };
        if l.setting == 0 || l.setting as usize > bound {
            return Err(Error::InvalidArgument(format!(
                "setting {} out of range for party with {} inputs",
                l.setting, bound
            )));
        }
    }
    let a = cancel(
        word.iter()
            .filter(|l| l.party == Party::A)
            .map(|l| l.setting),
    );
    let b = cancel(
        word.iter()
            .filter(|l| l.party == Party::B)
            .map(|l| l.setting),
    );
    Ok(Monomial::from_words(a, b))
}

/// Default cap on the moment-matrix side length accepted by [`build_basis`].
pub const DEFAULT_BASIS_CAP: usize = 20_000;

/// Closed-form basis size: Σ_{a+b≤k} N_A(a)·N_B(b) with N(0) = 1 and
/// N(ℓ) = m(m−1)^{ℓ−1} reduced words of length ℓ per party.
pub fn basis_size(scenario: &Scenario, level: u32) -> u128 {
    let words_of_len = |m: u128, l: u32| -> u128 {
        match l {
            0 => 1,
            _ => m * (m.saturating_sub(1)).pow(l - 1),
        }
    };
    let ma = scenario.inputs_a() as u128;
    let mb = scenario.inputs_b() as u128;
    let mut total = 0u128;
    for a in 0..=level {
        for b in 0..=(level - a) {
            total += words_of_len(ma, a) * words_of_len(mb, b);
        }
    }
    total
}

/// Ordered level-k monomial basis for a scenario. `monomials[0]` is the
/// identity.
#[derive(Debug, Clone)]
pub struct Basis {
    scenario: Scenario,
    level: u32,
    monomials: Vec<Monomial>,
}

impl Basis {
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Monomial> {
        self.monomials.iter()
    }
}

impl std::ops::Index<usize> for Basis {
    type Output = Monomial;

    fn index(&self, i: usize) -> &Monomial {
        &self.monomials[i]
    }
}

/// All reduced per-party words of each length up to `max_len`, generated in
/// lexicographic order per length.
fn party_words(m: u16, max_len: u32) -> Vec<Vec<Vec<u16>>> {
    let mut by_len: Vec<Vec<Vec<u16>>> = vec![vec![Vec::new()]];
    for _ in 1..=max_len {
        let prev = by_len.last().unwrap();
        let mut next = Vec::new();
        for w in prev {
            for s in 1..=m {
                if w.last() != Some(&s) {
                    let mut ext = w.clone();
                    ext.push(s);
                    next.push(ext);
                }
            }
        }
        by_len.push(next);
    }
    by_len
}

/// Builds the level-k basis with the default size cap.
pub fn build_basis(scenario: Scenario, level: u32) -> Result<Basis> {
    build_basis_capped(scenario, level, DEFAULT_BASIS_CAP)
}

/// Builds the level-k basis, refusing if the closed-form size exceeds `cap`.
pub fn build_basis_capped(scenario: Scenario, level: u32, cap: usize) -> Result<Basis> {
    if level == 0 {
        return Err(Error::InvalidArgument("NPA level must be at least 1".into()));
    }
    let size = basis_size(&scenario, level);
    if size > cap as u128 {
        return Err(Error::BasisTooLarge { size, cap });
    }
    let ma = scenario.inputs_a();
    let mb = scenario.inputs_b();
    if ma > u16::MAX as usize || mb > u16::MAX as usize {
        return Err(Error::TooLarge("more than 65535 settings per party".into()));
    }
    let a_words = party_words(ma as u16, level);
    let b_words = party_words(mb as u16, level);

    // Loop order (total length, then Bob length ascending, then lexicographic
    // within each party list) emits monomials already in canonical order.
    let mut monomials = Vec::with_capacity(size as usize);
    for total in 0..=level {
        for b_len in 0..=total {
            let a_len = total - b_len;
            for a in &a_words[a_len as usize] {
                for b in &b_words[b_len as usize] {
                    monomials.push(Monomial::from_words(a.clone(), b.clone()));
                }
            }
        }
    }
    debug_assert!(monomials.windows(2).all(|w| w[0] < w[1]));
    debug_assert_eq!(monomials.len() as u128, size);
    Ok(Basis {
        scenario,
        level,
        monomials,
    })
}

/// Symbolic n×n moment matrix: every entry carries the class id of the
/// reduced monomial basis[i]†·basis[j], with a monomial and its adjoint
/// sharing a class. Class 0 is the identity and occupies exactly the
/// diagonal.
#[derive(Debug, Clone)]
pub struct SymbolicMomentMatrix {
    scenario: Scenario,
    level: u32,
    basis: Vec<Monomial>,
    n: usize,
    entry_class: Vec<u32>,
    classes: Vec<Monomial>,
    class_lookup: HashMap<Monomial, u32>,
    class_cells: Vec<Vec<(u32, u32)>>,
}

/// Builds the symbolic moment matrix of a basis. Deterministic: class ids
/// are assigned in row-major upper-triangle scan order regardless of internal
/// parallelism.
pub fn build_moment_matrix(basis: &Basis) -> SymbolicMomentMatrix {
    let n = basis.len();
    assert!(n > 0, "basis must be nonempty");
    debug_assert!(basis[0].is_identity());
    let adjoints: Vec<Monomial> = basis.iter().map(Monomial::adjoint).collect();

    // Upper-triangle flattening: cell k = (i, j), i ≤ j.
    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .collect();
    let monomials = &basis.monomials;
    let cell_monos: Vec<Monomial> = par::map_range(cells.len(), |k| {
        let (i, j) = cells[k];
        adjoints[i].product(&monomials[j]).adjoint_class_rep()
    });

    let mut classes: Vec<Monomial> = Vec::new();
    let mut class_lookup: HashMap<Monomial, u32> = HashMap::new();
    let mut entry_class = vec![0u32; n * n];
    for (k, mono) in cell_monos.into_iter().enumerate() {
        let (i, j) = cells[k];
        let id = *class_lookup.entry(mono).or_insert_with_key(|m| {
            classes.push(m.clone());
            (classes.len() - 1) as u32
        });
        entry_class[i * n + j] = id;
        entry_class[j * n + i] = id;
    }
    debug_assert!(classes[0].is_identity());

    let mut class_cells: Vec<Vec<(u32, u32)>> = vec![Vec::new(); classes.len()];
    for i in 0..n {
        for j in 0..n {
            class_cells[entry_class[i * n + j] as usize].push((i as u32, j as u32));
        }
    }

    SymbolicMomentMatrix {
        scenario: basis.scenario(),
        level: basis.level(),
        basis: basis.monomials.clone(),
        n,
        entry_class,
        classes,
        class_lookup,
        class_cells,
    }
}

impl SymbolicMomentMatrix {
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &[Monomial] {
        &self.basis
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of_cell(&self, i: usize, j: usize) -> u32 {
        self.entry_class[i * self.n + j]
    }

    /// Canonical monomial of a class.
    pub fn class_monomial(&self, id: u32) -> &Monomial {
        &self.classes[id as usize]
    }

    /// Class id of a monomial (under the adjoint identification), if it
    /// occurs anywhere in the matrix.
    pub fn class_of(&self, m: &Monomial) -> Option<u32> {
        self.class_lookup.get(&m.adjoint_class_rep()).copied()
    }

    /// All cells (row-major, full grid) whose entry belongs to a class.
    pub fn cells_of_class(&self, id: u32) -> &[(u32, u32)] {
        &self.class_cells[id as usize]
    }
}

/// Assembles the standard-form primal SDP of the NPA relaxation:
///
///   max ⟨C, X⟩  s.t.  ⟨A_i, X⟩ = b_i,  X ⪰ 0.
///
/// The objective distributes each functional coefficient uniformly over the
/// cells of its monomial class (any distribution is equivalent under the
/// equality constraints, and the uniform one is symmetric by construction).
/// Constraints: one unit constraint per diagonal cell, then for each class
/// occupying several off-diagonal cell pairs a chain of equalities tying each
/// pair to the class's first pair. The diagonal cells all carry the identity
/// class and are pinned by the unit constraints, so the identity class is not
/// chained; this keeps the constraint matrices linearly independent and puts
/// the identity matrix in their span.
pub fn assemble_primal(
    f: &BellFunctional,
    mm: &SymbolicMomentMatrix,
) -> Result<StandardFormSdp> {
    if f.scenario() != mm.scenario() {
        return Err(Error::ScenarioMismatch(format!(
            "functional on {} but moment matrix built for {}",
            f.scenario(),
            mm.scenario()
        )));
    }
    let n = mm.n();
    let mut c = DMatrix::<f64>::zeros(n, n);
    let mut add_term = |mono: Monomial, coeff: f64| -> Result<()> {
        if coeff == 0.0 {
            return Ok(());
        }
        let id = mm.class_of(&mono).ok_or_else(|| {
            Error::ScenarioMismatch(format!("monomial {mono} absent from the moment matrix"))
        })?;
        let cells = mm.cells_of_class(id);
        let share = coeff / cells.len() as f64;
        for &(i, j) in cells {
            c[(i as usize, j as usize)] += share;
        }
        Ok(())
    };

    add_term(Monomial::identity(), f.constant_offset())?;
    for x in 1..=f.scenario().inputs_a() {
        add_term(Monomial::alice(x as u16), f.marginal_a(x))?;
    }
    for y in 1..=f.scenario().inputs_b() {
        add_term(Monomial::bob(y as u16), f.marginal_b(y))?;
    }
    for x in 1..=f.scenario().inputs_a() {
        for y in 1..=f.scenario().inputs_b() {
            add_term(Monomial::correlator(x as u16, y as u16), f.correlator(x, y))?;
        }
    }

    let mut constraints: Vec<SparseSymMat> = Vec::with_capacity(n);
    for i in 0..n {
        constraints.push(SparseSymMat::from_entries(
            n,
            vec![(i as u32, i as u32, 1.0)],
        )?);
    }
    for id in 1..mm.num_classes() as u32 {
        let pairs: Vec<(u32, u32)> = mm
            .cells_of_class(id)
            .iter()
            .copied()
            .filter(|&(i, j)| i < j)
            .collect();
        debug_assert!(mm.cells_of_class(id).iter().all(|&(i, j)| i != j));
        if pairs.len() < 2 {
            continue;
        }
        let first = pairs[0];
        for &(i, j) in &pairs[1..] {
            constraints.push(SparseSymMat::from_entries(
                n,
                vec![(i, j, 1.0), (first.0, first.1, -1.0)],
            )?);
        }
    }

    let m = constraints.len();
    let mut b = DVector::<f64>::zeros(m);
    for i in 0..n {
        b[i] = 1.0;
    }
    StandardFormSdp::new(c, constraints, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{chsh, i3322};

    fn sc(a: usize, b: usize) -> Scenario {
        Scenario::new(a, b).unwrap()
    }

    #[test]
    fn reduce_examples() {
        let s = sc(2, 2);
        let m = reduce(&s, &[Letter::a(1), Letter::a(1)]).unwrap();
        assert!(m.is_identity());

        let m = reduce(&s, &[Letter::b(2), Letter::a(1)]).unwrap();
        assert_eq!(m, Monomial::correlator(1, 2));

        let m = reduce(
            &s,
            &[
                Letter::a(1),
                Letter::a(2),
                Letter::a(2),
                Letter::b(1),
                Letter::b(1),
            ],
        )
        .unwrap();
        assert_eq!(m, Monomial::alice(1));
    }

    #[test]
    fn reduce_rejects_bad_setting() {
        let s = sc(2, 2);
        assert!(reduce(&s, &[Letter::a(3)]).is_err());
        assert!(reduce(&s, &[Letter::b(0)]).is_err());
    }

    #[test]
    fn adjoint_examples() {
        assert_eq!(Monomial::identity().adjoint(), Monomial::identity());
        let a12 = Monomial::alice(1).product(&Monomial::alice(2));
        let a21 = Monomial::alice(2).product(&Monomial::alice(1));
        assert_eq!(a12.adjoint(), a21);
        let ab = Monomial::correlator(1, 2);
        assert_eq!(ab.adjoint(), ab);
    }

    #[test]
    fn basis_counts_match_paper_sizes() {
        assert_eq!(build_basis(sc(3, 3), 1).unwrap().len(), 7);
        assert_eq!(build_basis(sc(3, 3), 2).unwrap().len(), 28);
        assert_eq!(build_basis(sc(3, 3), 3).unwrap().len(), 88);
        assert_eq!(build_basis(sc(130, 130), 1).unwrap().len(), 261);
        assert_eq!(build_basis(sc(2, 2), 1).unwrap().len(), 5);
    }

    #[test]
    fn basis_level_one_layout() {
        let basis = build_basis(sc(2, 2), 1).unwrap();
        let names: Vec<String> = basis.iter().map(|m| m.to_string()).collect();
        assert_eq!(names, vec!["1", "A1", "A2", "B1", "B2"]);
    }

    #[test]
    fn basis_guards() {
        assert!(matches!(
            build_basis(sc(2, 2), 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            build_basis_capped(sc(130, 130), 2, 1000),
            Err(Error::BasisTooLarge { .. })
        ));
    }

    #[test]
    fn moment_matrix_diagonal_is_identity_class() {
        for (s, level) in [(sc(2, 2), 2), (sc(3, 3), 2), (sc(2, 3), 3)] {
            let mm = build_moment_matrix(&build_basis(s, level).unwrap());
            for i in 0..mm.n() {
                assert_eq!(mm.class_of_cell(i, i), 0, "diagonal cell {i}");
            }
            // Identity occurs nowhere off the diagonal: u†v = 1 iff u = v.
            for i in 0..mm.n() {
                for j in 0..mm.n() {
                    if i != j {
                        assert_ne!(mm.class_of_cell(i, j), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn chsh_level1_class_structure() {
        let mm = build_moment_matrix(&build_basis(sc(2, 2), 1).unwrap());
        // 11 classes: identity, A1, A2, B1, B2, A1A2, B1B2 and four AxBy.
        assert_eq!(mm.num_classes(), 11);
        // Entry (A1 row, B1 col) is the A1B1 product.
        let a1b1 = mm.class_of(&Monomial::correlator(1, 1)).unwrap();
        assert_eq!(mm.class_of_cell(1, 3), a1b1);
        // Symmetry of classes.
        for i in 0..mm.n() {
            for j in 0..mm.n() {
                assert_eq!(mm.class_of_cell(i, j), mm.class_of_cell(j, i));
            }
        }
    }

    #[test]
    fn one_and_two_body_monomials_present_at_level_one() {
        let mm = build_moment_matrix(&build_basis(sc(3, 3), 1).unwrap());
        for x in 1..=3u16 {
            assert!(mm.class_of(&Monomial::alice(x)).is_some());
            assert!(mm.class_of(&Monomial::bob(x)).is_some());
            for y in 1..=3u16 {
                assert!(mm.class_of(&Monomial::correlator(x, y)).is_some());
            }
        }
    }

    #[test]
    fn assemble_b_vector_layout() {
        let mm = build_moment_matrix(&build_basis(sc(3, 3), 2).unwrap());
        let sdp = assemble_primal(&i3322(), &mm).unwrap();
        let n = mm.n();
        assert!(sdp.rhs().iter().take(n).all(|&v| v == 1.0));
        assert!(sdp.rhs().iter().skip(n).all(|&v| v == 0.0));
        assert!(sdp.m() > n, "level 2 must include chaining constraints");
    }

    #[test]
    fn assemble_zero_functional_gives_zero_objective() {
        let mm = build_moment_matrix(&build_basis(sc(2, 2), 1).unwrap());
        let zero = BellFunctional::zero(sc(2, 2));
        let sdp = assemble_primal(&zero, &mm).unwrap();
        assert!(sdp.objective().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn assemble_rejects_scenario_mismatch() {
        let mm = build_moment_matrix(&build_basis(sc(3, 3), 1).unwrap());
        assert!(matches!(
            assemble_primal(&chsh(), &mm),
            Err(Error::ScenarioMismatch(_))
        ));
    }

    #[test]
    fn chsh_objective_contracts_to_tsirelson_on_optimal_moments() {
        // Hand-built 5×5 moment matrix of the Tsirelson-optimal correlations:
        // zero marginals, ⟨A1A2⟩ = ⟨B1B2⟩ = 0, ⟨AxBy⟩ = ±1/√2.
        let mm = build_moment_matrix(&build_basis(sc(2, 2), 1).unwrap());
        let sdp = assemble_primal(&chsh(), &mm).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut x = DMatrix::<f64>::identity(5, 5);
        // Basis order: 1, A1, A2, B1, B2.
        let corr = [((1, 3), r), ((1, 4), r), ((2, 3), r), ((2, 4), -r)];
        for ((i, j), v) in corr {
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
        let val = sdp.objective().dot(&x);
        assert!((val - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12, "{val}");
    }

    #[test]
    fn chsh_level1_has_no_chain_constraints() {
        // Every off-diagonal class occupies a single unordered pair at level
        // 1, so the SDP has exactly the n unit diagonal constraints.
        let mm = build_moment_matrix(&build_basis(sc(2, 2), 1).unwrap());
        let sdp = assemble_primal(&chsh(), &mm).unwrap();
        assert_eq!(sdp.m(), 5);
    }
}
