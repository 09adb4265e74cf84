//! Two-party, two-outcome Bell functionals in correlator form.
//!
//! Observables take values ±1, so a functional is a linear combination of
//! one-body terms ⟨A_x⟩, ⟨B_y⟩ and two-body terms ⟨A_x B_y⟩ plus an optional
//! constant. This module provides the built-in CHSH and I3322 inequalities,
//! the seeded `R_xx22` random family, a text parser/serializer, and a
//! brute-force local-bound oracle.

use std::fmt;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// Measurement scenario: number of settings per party. Outcomes are always
/// two (±1-valued observables).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scenario {
    inputs_a: usize,
    inputs_b: usize,
}

impl Scenario {
    pub const OUTCOMES: usize = 2;

    pub fn new(inputs_a: usize, inputs_b: usize) -> Result<Self> {
        if inputs_a == 0 || inputs_b == 0 {
            return Err(Error::InvalidArgument(
                "each party needs at least one measurement setting".into(),
            ));
        }
        Ok(Self { inputs_a, inputs_b })
    }

    /// Symmetric scenario with `x` settings per side.
    pub fn square(x: usize) -> Result<Self> {
        Self::new(x, x)
    }

    pub fn inputs_a(&self) -> usize {
        self.inputs_a
    }

    pub fn inputs_b(&self) -> usize {
        self.inputs_b
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.inputs_a, self.inputs_b)
    }
}

/// A Bell functional in ±1-observable form:
///
/// Σ_x a_x ⟨A_x⟩ + Σ_y b_y ⟨B_y⟩ + Σ_{x,y} c_{xy} ⟨A_x B_y⟩ + k.
///
/// Coefficient containers always match the scenario dimensions; correlators
/// are stored row-major in `x`. Values are immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    scenario: Scenario,
    marginal_a: Vec<f64>,
    marginal_b: Vec<f64>,
    correlator: Vec<f64>,
    constant_offset: f64,
}

impl BellFunctional {
    pub fn new(
        scenario: Scenario,
        marginal_a: Vec<f64>,
        marginal_b: Vec<f64>,
        correlator: Vec<f64>,
        constant_offset: f64,
    ) -> Result<Self> {
        let (ma, mb) = (scenario.inputs_a(), scenario.inputs_b());
        if marginal_a.len() != ma || marginal_b.len() != mb || correlator.len() != ma * mb {
            return Err(Error::Dimension(format!(
                "coefficients ({}, {}, {}) do not match scenario {scenario}",
                marginal_a.len(),
                marginal_b.len(),
                correlator.len()
            )));
        }
        let all_finite = marginal_a
            .iter()
            .chain(marginal_b.iter())
            .chain(correlator.iter())
            .chain(std::iter::once(&constant_offset))
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::NonFinite("Bell functional coefficient".into()));
        }
        Ok(Self {
            scenario,
            marginal_a,
            marginal_b,
            correlator,
            constant_offset,
        })
    }

    pub fn zero(scenario: Scenario) -> Self {
        let (ma, mb) = (scenario.inputs_a(), scenario.inputs_b());
        Self {
            scenario,
            marginal_a: vec![0.0; ma],
            marginal_b: vec![0.0; mb],
            correlator: vec![0.0; ma * mb],
            constant_offset: 0.0,
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// Coefficient of ⟨A_x⟩; `x` is 1-based.
    pub fn marginal_a(&self, x: usize) -> f64 {
        self.marginal_a[x - 1]
    }

    /// Coefficient of ⟨B_y⟩; `y` is 1-based.
    pub fn marginal_b(&self, y: usize) -> f64 {
        self.marginal_b[y - 1]
    }

    /// Coefficient of ⟨A_x B_y⟩; indices are 1-based.
    pub fn correlator(&self, x: usize, y: usize) -> f64 {
        self.correlator[(x - 1) * self.scenario.inputs_b() + (y - 1)]
    }

    pub fn constant_offset(&self) -> f64 {
        self.constant_offset
    }

    pub fn marginals_a(&self) -> &[f64] {
        &self.marginal_a
    }

    pub fn marginals_b(&self) -> &[f64] {
        &self.marginal_b
    }

    /// Row-major correlator coefficients.
    pub fn correlators(&self) -> &[f64] {
        &self.correlator
    }

    /// Number of stored coefficients (marginals plus correlators).
    pub fn coefficient_count(&self) -> usize {
        self.marginal_a.len() + self.marginal_b.len() + self.correlator.len()
    }

    /// Negated functional.
    pub fn negated(&self) -> Self {
        Self {
            scenario: self.scenario,
            marginal_a: self.marginal_a.iter().map(|v| -v).collect(),
            marginal_b: self.marginal_b.iter().map(|v| -v).collect(),
            correlator: self.correlator.iter().map(|v| -v).collect(),
            constant_offset: -self.constant_offset,
        }
    }
}

/// The CHSH functional ⟨A1B1⟩ + ⟨A1B2⟩ + ⟨A2B1⟩ − ⟨A2B2⟩ on the (2, 2)
/// scenario. Classical bound 2, quantum maximum 2√2.
pub fn chsh() -> BellFunctional {
    let scenario = Scenario::new(2, 2).expect("static scenario");
    BellFunctional::new(
        scenario,
        vec![0.0, 0.0],
        vec![0.0, 0.0],
        vec![1.0, 1.0, 1.0, -1.0],
        0.0,
    )
    .expect("static coefficients")
}

/// The I3322 functional in its −1/+1 formulation on the (3, 3) scenario:
///
/// ⟨A1⟩ − ⟨A2⟩ + ⟨B1⟩ − ⟨B2⟩ − ⟨A1B1⟩ + ⟨A1B2⟩ + ⟨A1B3⟩ + ⟨A2B1⟩ − ⟨A2B2⟩
/// + ⟨A2B3⟩ + ⟨A3B1⟩ + ⟨A3B2⟩.
///
/// Classical bound 4.
pub fn i3322() -> BellFunctional {
    let scenario = Scenario::new(3, 3).expect("static scenario");
    BellFunctional::new(
        scenario,
        vec![1.0, -1.0, 0.0],
        vec![1.0, -1.0, 0.0],
        vec![
            -1.0, 1.0, 1.0, //
            1.0, -1.0, 1.0, //
            1.0, 1.0, 0.0,
        ],
        0.0,
    )
    .expect("static coefficients")
}

/// Seeded random functional with `x` settings per side and every marginal and
/// correlator coefficient drawn independently and uniformly from [−1, 1].
///
/// Determinism contract: the generator is xoshiro256++ seeded through
/// SplitMix64 expansion of `seed` (the algorithm's reference 64-bit
/// initialization). Each coefficient consumes one 64-bit output, mapped to
/// [−1, 1) as `2 · (u >> 11) · 2⁻⁵³ − 1` (53-bit mantissa scaling). Draw
/// order: all ⟨A_x⟩ coefficients in index order, then all ⟨B_y⟩, then the
/// correlators row-major in `x`. Equal `(x, seed)` pairs therefore produce
/// bit-identical functionals.
pub fn random_rxx22(x: usize, seed: u64) -> Result<BellFunctional> {
    if x == 0 {
        return Err(Error::InvalidArgument(
            "R_xx22 needs at least one setting per side".into(),
        ));
    }
    let scenario = Scenario::square(x)?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut draw = move || 2.0 * ((rng.next_u64() >> 11) as f64 * 2f64.powi(-53)) - 1.0;
    let marginal_a: Vec<f64> = (0..x).map(|_| draw()).collect();
    let marginal_b: Vec<f64> = (0..x).map(|_| draw()).collect();
    let correlator: Vec<f64> = (0..x * x).map(|_| draw()).collect();
    BellFunctional::new(scenario, marginal_a, marginal_b, correlator, 0.0)
}

/// Serializes a functional in the text format accepted by
/// [`parse_functional`]: a `scenario m_A m_B` header followed by one line per
/// nonzero term, `A<x> <coeff>`, `B<y> <coeff>` and `A<x> B<y> <coeff>`, in
/// canonical order (Alice marginals, Bob marginals, correlators row-major).
///
/// The format has no constant term, so a nonzero `constant_offset` is
/// rejected rather than silently dropped.
pub fn serialize_functional(f: &BellFunctional) -> Result<String> {
    if f.constant_offset() != 0.0 {
        return Err(Error::InvalidArgument(
            "the functional file format cannot represent a constant offset".into(),
        ));
    }
    let (ma, mb) = (f.scenario.inputs_a(), f.scenario.inputs_b());
    let mut out = format!("scenario {ma} {mb}\n");
    for x in 1..=ma {
        let v = f.marginal_a(x);
        if v != 0.0 {
            out.push_str(&format!("A{x} {v}\n"));
        }
    }
    for y in 1..=mb {
        let v = f.marginal_b(y);
        if v != 0.0 {
            out.push_str(&format!("B{y} {v}\n"));
        }
    }
    for x in 1..=ma {
        for y in 1..=mb {
            let v = f.correlator(x, y);
            if v != 0.0 {
                out.push_str(&format!("A{x} B{y} {v}\n"));
            }
        }
    }
    Ok(out)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

enum PartyIndex {
    A(usize),
    B(usize),
}

fn parse_party_token(line: usize, token: &str) -> Result<PartyIndex> {
    let (party, digits) = token.split_at(1);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(parse_err(line, format!("malformed operator token `{token}`")));
    }
    let idx: usize = digits
        .parse()
        .map_err(|_| parse_err(line, format!("setting index out of range in `{token}`")))?;
    if idx == 0 {
        return Err(parse_err(line, format!("setting indices are 1-based: `{token}`")));
    }
    match party {
        "A" => Ok(PartyIndex::A(idx)),
        "B" => Ok(PartyIndex::B(idx)),
        _ => Err(parse_err(line, format!("malformed operator token `{token}`"))),
    }
}

fn parse_coeff(line: usize, token: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("malformed coefficient `{token}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite coefficient `{token}`")));
    }
    Ok(v)
}

/// Parses the functional file format.
///
/// `#` begins a comment (to end of line); blank lines are ignored; the first
/// effective line must be `scenario <m_A> <m_B>`; each term may appear at
/// most once; missing terms are zero. Errors carry the 1-based line number.
pub fn parse_functional(text: &str) -> Result<BellFunctional> {
    let mut scenario: Option<Scenario> = None;
    let mut marginal_a: Vec<f64> = Vec::new();
    let mut marginal_b: Vec<f64> = Vec::new();
    let mut correlator: Vec<f64> = Vec::new();
    let mut seen_a: Vec<bool> = Vec::new();
    let mut seen_b: Vec<bool> = Vec::new();
    let mut seen_corr: Vec<bool> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = body.split_whitespace().collect();

        let Some(sc) = scenario else {
            if tokens.len() != 3 || tokens[0] != "scenario" {
                return Err(parse_err(line, "expected `scenario <m_A> <m_B>` header"));
            }
            let ma: usize = tokens[1]
                .parse()
                .map_err(|_| parse_err(line, format!("malformed setting count `{}`", tokens[1])))?;
            let mb: usize = tokens[2]
                .parse()
                .map_err(|_| parse_err(line, format!("malformed setting count `{}`", tokens[2])))?;
            let sc = Scenario::new(ma, mb)
                .map_err(|e| parse_err(line, format!("invalid scenario: {e}")))?;
            marginal_a = vec![0.0; ma];
            marginal_b = vec![0.0; mb];
            correlator = vec![0.0; ma * mb];
            seen_a = vec![false; ma];
            seen_b = vec![false; mb];
            seen_corr = vec![false; ma * mb];
            scenario = Some(sc);
            continue;
        };

        let (ma, mb) = (sc.inputs_a(), sc.inputs_b());
        match tokens.len() {
            2 => {
                let coeff = parse_coeff(line, tokens[1])?;
                match parse_party_token(line, tokens[0])? {
                    PartyIndex::A(x) => {
                        if x > ma {
                            return Err(parse_err(
                                line,
                                format!("setting index {x} exceeds m_A={ma}"),
                            ));
                        }
                        if seen_a[x - 1] {
                            return Err(parse_err(line, format!("duplicate term A{x}")));
                        }
                        seen_a[x - 1] = true;
                        marginal_a[x - 1] = coeff;
                    }
                    PartyIndex::B(y) => {
                        if y > mb {
                            return Err(parse_err(
                                line,
                                format!("setting index {y} exceeds m_B={mb}"),
                            ));
                        }
                        if seen_b[y - 1] {
                            return Err(parse_err(line, format!("duplicate term B{y}")));
                        }
                        seen_b[y - 1] = true;
                        marginal_b[y - 1] = coeff;
                    }
                }
            }
            3 => {
                let coeff = parse_coeff(line, tokens[2])?;
                let first = parse_party_token(line, tokens[0])?;
                let second = parse_party_token(line, tokens[1])?;
                let (PartyIndex::A(x), PartyIndex::B(y)) = (first, second) else {
                    return Err(parse_err(
                        line,
                        "correlator terms must be written `A<x> B<y> <coeff>`",
                    ));
                };
                if x > ma {
                    return Err(parse_err(line, format!("setting index {x} exceeds m_A={ma}")));
                }
                if y > mb {
                    return Err(parse_err(line, format!("setting index {y} exceeds m_B={mb}")));
                }
                let k = (x - 1) * mb + (y - 1);
                if seen_corr[k] {
                    return Err(parse_err(line, format!("duplicate term A{x} B{y}")));
                }
                seen_corr[k] = true;
                correlator[k] = coeff;
            }
            _ => return Err(parse_err(line, format!("malformed term `{body}`"))),
        }
    }

    let scenario = scenario.ok_or_else(|| parse_err(1, "missing `scenario` header"))?;
    BellFunctional::new(scenario, marginal_a, marginal_b, correlator, 0.0)
}

/// Maximum admissible `m_A + m_B` for [`local_bound_bruteforce`].
pub const LOCAL_BOUND_MAX_SETTINGS: usize = 26;

/// Classical (local) bound: the maximum of the functional over all
/// deterministic ±1 assignments to every A_x and B_y. A lower bound on the
/// quantum value and hence on any valid NPA bound. Used as a test oracle.
///
/// Enumerates the smaller party's 2^m assignments; the other party's optimal
/// response is the analytic sign choice per setting.
pub fn local_bound_bruteforce(f: &BellFunctional) -> Result<f64> {
    let (ma, mb) = (f.scenario.inputs_a(), f.scenario.inputs_b());
    if ma + mb > LOCAL_BOUND_MAX_SETTINGS {
        return Err(Error::TooLarge(format!(
            "local bound enumeration supports m_A + m_B <= {LOCAL_BOUND_MAX_SETTINGS}, got {}",
            ma + mb
        )));
    }
    // Enumerate the smaller side so the loop count is at most 2^13.
    let enumerate_alice = ma <= mb;
    let (m_enum, m_resp) = if enumerate_alice { (ma, mb) } else { (mb, ma) };
    let marg_enum: &[f64] = if enumerate_alice {
        &f.marginal_a
    } else {
        &f.marginal_b
    };
    let marg_resp: &[f64] = if enumerate_alice {
        &f.marginal_b
    } else {
        &f.marginal_a
    };
    let corr = &f.correlator;
    let corr_at = |e: usize, r: usize| -> f64 {
        if enumerate_alice {
            corr[e * mb + r]
        } else {
            corr[r * mb + e]
        }
    };

    let assignments: usize = 1 << m_enum;
    let best = crate::par::max_range(assignments, |bits| {
        let sign = |s: usize| -> f64 {
            if bits >> s & 1 == 1 {
                1.0
            } else {
                -1.0
            }
        };
        let mut value = 0.0;
        for s in 0..m_enum {
            value += sign(s) * marg_enum[s];
        }
        for r in 0..m_resp {
            let mut t = marg_resp[r];
            for s in 0..m_enum {
                t += sign(s) * corr_at(s, r);
            }
            value += t.abs();
        }
        value
    });
    Ok(best + f.constant_offset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chsh_coefficients() {
        let f = chsh();
        assert_eq!(f.scenario(), Scenario::new(2, 2).unwrap());
        assert_eq!(f.correlator(1, 1), 1.0);
        assert_eq!(f.correlator(1, 2), 1.0);
        assert_eq!(f.correlator(2, 1), 1.0);
        assert_eq!(f.correlator(2, 2), -1.0);
        assert_eq!(f.marginal_a(1), 0.0);
        assert_eq!(f.marginal_b(2), 0.0);
    }

    #[test]
    fn i3322_coefficients() {
        let f = i3322();
        assert_eq!(f.scenario(), Scenario::new(3, 3).unwrap());
        assert_eq!(f.correlator(1, 1), -1.0);
        assert_eq!(f.correlator(3, 3), 0.0);
        assert_eq!(f.correlator(2, 3), 1.0);
        assert_eq!(f.marginal_a(1), 1.0);
        assert_eq!(f.marginal_a(2), -1.0);
        assert_eq!(f.marginal_b(2), -1.0);
        assert_eq!(f.marginal_b(3), 0.0);
    }

    #[test]
    fn rxx22_shape_and_range() {
        let f = random_rxx22(2, 7).unwrap();
        assert_eq!(f.coefficient_count(), 8);
        let f = random_rxx22(130, 7).unwrap();
        assert_eq!(f.coefficient_count(), 2 * 130 + 130 * 130);
        let in_range = |v: &f64| (-1.0..=1.0).contains(v);
        assert!(f.marginals_a().iter().all(in_range));
        assert!(f.marginals_b().iter().all(in_range));
        assert!(f.correlators().iter().all(in_range));
    }

    #[test]
    fn rxx22_determinism() {
        let a = random_rxx22(5, 42).unwrap();
        let b = random_rxx22(5, 42).unwrap();
        assert_eq!(a, b);
        let c = random_rxx22(5, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rxx22_rejects_zero_settings() {
        assert!(matches!(
            random_rxx22(0, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn parse_chsh_text() {
        let text = "scenario 2 2\nA1 B1 1\nA1 B2 1\nA2 B1 1\nA2 B2 -1";
        assert_eq!(parse_functional(text).unwrap(), chsh());
    }

    #[test]
    fn parse_empty_body_is_zero_functional() {
        let f = parse_functional("scenario 1 1").unwrap();
        assert_eq!(f, BellFunctional::zero(Scenario::new(1, 1).unwrap()));
    }

    #[test]
    fn parse_rejects_out_of_range_setting() {
        let err = parse_functional("scenario 2 2\nA3 B1 1").unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("exceeds m_A=2"), "{msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_duplicates_and_junk() {
        assert!(parse_functional("scenario 2 2\nA1 1\nA1 2").is_err());
        assert!(parse_functional("scenario 2 2\nB1 A1 1").is_err());
        assert!(parse_functional("scenario 2 2\nA1 B1").is_err());
        assert!(parse_functional("A1 B1 1").is_err());
        assert!(parse_functional("scenario 2 2\nA1 B1 nan").is_err());
    }

    #[test]
    fn parse_handles_comments_and_blanks() {
        let text = "# functional\n\nscenario 2 2 # header\nA1 0.5 # term\n";
        let f = parse_functional(text).unwrap();
        assert_eq!(f.marginal_a(1), 0.5);
    }

    #[test]
    fn serialize_round_trips_builtins() {
        for f in [chsh(), i3322(), random_rxx22(4, 99).unwrap()] {
            let text = serialize_functional(&f).unwrap();
            assert_eq!(parse_functional(&text).unwrap(), f);
        }
    }

    #[test]
    fn serialize_rejects_constant_offset() {
        let sc = Scenario::new(1, 1).unwrap();
        let f = BellFunctional::new(sc, vec![0.0], vec![0.0], vec![0.0], 1.5).unwrap();
        assert!(serialize_functional(&f).is_err());
    }

    #[test]
    fn local_bounds_of_builtins() {
        assert_eq!(local_bound_bruteforce(&chsh()).unwrap(), 2.0);
        assert_eq!(local_bound_bruteforce(&i3322()).unwrap(), 4.0);
        let zero = BellFunctional::zero(Scenario::new(3, 2).unwrap());
        assert_eq!(local_bound_bruteforce(&zero).unwrap(), 0.0);
    }

    #[test]
    fn local_bound_refuses_oversized_scenarios() {
        let f = BellFunctional::zero(Scenario::new(20, 7).unwrap());
        assert!(matches!(local_bound_bruteforce(&f), Err(Error::TooLarge(_))));
    }

    // Independent oracle: full 2^(mA+mB) enumeration without the analytic
    // best-response shortcut.
    fn local_bound_exhaustive(f: &BellFunctional) -> f64 {
        let (ma, mb) = (f.scenario().inputs_a(), f.scenario().inputs_b());
        let mut best = f64::NEG_INFINITY;
        for bits in 0..(1usize << (ma + mb)) {
            let a = |x: usize| if bits >> (x - 1) & 1 == 1 { 1.0 } else { -1.0 };
            let b = |y: usize| {
                if bits >> (ma + y - 1) & 1 == 1 {
                    1.0
                } else {
                    -1.0
                }
            };
            let mut v = f.constant_offset();
            for x in 1..=ma {
                v += f.marginal_a(x) * a(x);
            }
            for y in 1..=mb {
                v += f.marginal_b(y) * b(y);
            }
            for x in 1..=ma {
                for y in 1..=mb {
                    v += f.correlator(x, y) * a(x) * b(y);
                }
            }
            best = best.max(v);
        }
        best
    }

    #[test]
    fn local_bound_matches_exhaustive_enumeration() {
        for seed in 0..20 {
            for x in 1..=4 {
                let f = random_rxx22(x, seed).unwrap();
                let fast = local_bound_bruteforce(&f).unwrap();
                let slow = local_bound_exhaustive(&f);
                assert!(
                    (fast - slow).abs() <= 1e-12 * (1.0 + slow.abs()),
                    "x={x} seed={seed}: {fast} vs {slow}"
                );
            }
        }
    }
}
