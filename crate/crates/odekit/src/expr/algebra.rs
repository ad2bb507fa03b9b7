//! Normal-form machinery: distribute products over sums, merge powers of a
//! common base, merge exponential factors, and collect like terms. The
//! antiderivative table, the equation classifiers, and the coefficient
//! matchers all work on this normal form rather than on raw trees.

use std::collections::BTreeMap;

use num_rational::Rational64;

use crate::expr::{f64_to_rat, rat_to_f64, Expr, Symbol};

/// One product term of a sum-of-products normal form: a numeric coefficient,
/// non-exponential factors keyed by the rendered base (so structurally equal
/// bases share an entry), and at most one merged exponential factor.
#[derive(Clone, Debug)]
pub(crate) struct Term {
    pub coeff: f64,
    pub factors: BTreeMap<String, (Expr, Rational64)>,
    /// Argument of a merged `exp(...)` factor; canonical, no constant addend.
    pub exp_arg: Option<Expr>,
}

impl Term {
    fn constant(c: f64) -> Term {
        Term {
            coeff: c,
            factors: BTreeMap::new(),
            exp_arg: None,
        }
    }

    fn factor(base: Expr, exponent: Rational64) -> Term {
        let mut t = Term::constant(1.0);
        t.push_factor(base, exponent);
        t
    }

    fn push_factor(&mut self, base: Expr, exponent: Rational64) {
        if exponent == Rational64::from_integer(0) {
            return;
        }
        let key = base.to_string();
        let entry = self
            .factors
            .entry(key)
            .or_insert_with(|| (base, Rational64::from_integer(0)));
        entry.1 += exponent;
        if entry.1 == Rational64::from_integer(0) {
            let key = entry.0.to_string();
            self.factors.remove(&key);
        }
    }

    fn merge_exp(&mut self, arg: Expr) {
        let combined = match self.exp_arg.take() {
            Some(prev) => prev + arg,
            None => arg,
        };
        self.absorb_exp_arg(combined);
    }

    /// Canonicalises an exponential argument, folding any constant addend
    /// into the coefficient.
    fn absorb_exp_arg(&mut self, arg: Expr) {
        let arg = expand(&arg);
        let addends = if arg.is_zero() {
            Vec::new()
        } else {
            match arg {
                Expr::Sum(ts) => ts,
                other => vec![other],
            }
        };
        let mut rest = Vec::new();
        for a in addends {
            match a {
                Expr::Constant(c) if c.exp().is_finite() => self.coeff *= c.exp(),
                other => rest.push(other),
            }
        }
        self.exp_arg = match rest.len() {
            0 => None,
            1 => Some(rest.pop().unwrap()),
            _ => Some(Expr::Sum(rest)),
        };
    }

    fn mul(&self, other: &Term) -> Term {
        let mut out = self.clone();
        out.coeff *= other.coeff;
        for (base, exponent) in other.factors.values() {
            out.push_factor(base.clone(), *exponent);
        }
        if let Some(arg) = &other.exp_arg {
            out.merge_exp(arg.clone());
        }
        out
    }

    /// Raises the term to a rational power where that is exact; `None` means
    /// the caller must treat the base as opaque.
    fn pow(&self, r: Rational64) -> Option<Term> {
        if r.is_integer() {
            let n = r.to_integer();
            if n.unsigned_abs() > i32::MAX as u64 {
                return None;
            }
            let coeff = self.coeff.powi(n as i32);
            if !coeff.is_finite() {
                return None;
            }
            let mut out = Term::constant(coeff);
            for (base, exponent) in self.factors.values() {
                out.push_factor(base.clone(), exponent * r);
            }
            if let Some(arg) = &self.exp_arg {
                out.absorb_exp_arg(Expr::num(rat_to_f64(r)) * arg.clone());
            }
            return Some(out);
        }
        // Fractional power: exact only for a positive constant, a lone unit
        // factor, or a pure exponential.
        if self.factors.is_empty() && self.exp_arg.is_none() {
            return (self.coeff > 0.0).then(|| Term::constant(self.coeff.powf(rat_to_f64(r))));
        }
        if self.coeff == 1.0 && self.exp_arg.is_none() && self.factors.len() == 1 {
            let (base, exponent) = self.factors.values().next().unwrap().clone();
            return Some(Term::factor(base, exponent * r));
        }
        if self.coeff == 1.0 && self.factors.is_empty() {
            let arg = self.exp_arg.clone().unwrap();
            let mut out = Term::constant(1.0);
            out.absorb_exp_arg(Expr::num(rat_to_f64(r)) * arg);
            return Some(out);
        }
        None
    }

    pub fn depends_on(&self, sym: Symbol) -> bool {
        self.factors.values().any(|(b, _)| b.depends_on(sym))
            || self.exp_arg.as_ref().is_some_and(|a| a.depends_on(sym))
    }

    /// Deterministic identity of everything but the coefficient.
    fn signature(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        for (key, (_, exponent)) in &self.factors {
            let _ = write!(s, "{key}^{exponent};");
        }
        if let Some(arg) = &self.exp_arg {
            let _ = write!(s, "exp[{arg}]");
        }
        s
    }

    pub fn to_expr(&self) -> Expr {
        let mut factors = vec![Expr::Constant(self.coeff)];
        for (base, exponent) in self.factors.values() {
            factors.push(base.clone().pow(*exponent));
        }
        if let Some(arg) = &self.exp_arg {
            factors.push(arg.clone().exp());
        }
        Expr::Product(factors).simplify()
    }
}

/// Merges terms with equal signature; drops exact-zero terms; deterministic
/// (signature-sorted) order.
pub(crate) fn collect_terms(terms: &[Term]) -> Vec<Term> {
    let mut map: BTreeMap<String, Term> = BTreeMap::new();
    for t in terms {
        match map.entry(t.signature()) {
            std::collections::btree_map::Entry::Occupied(mut e) => e.get_mut().coeff += t.coeff,
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(t.clone());
            }
        }
    }
    map.into_values().filter(|t| t.coeff != 0.0).collect()
}

pub(crate) fn terms_to_expr(terms: &[Term]) -> Expr {
    let collected = collect_terms(terms);
    Expr::Sum(collected.iter().map(Term::to_expr).collect()).simplify()
}

/// Sum-of-products normal form with like terms collected.
pub fn expand(e: &Expr) -> Expr {
    terms_to_expr(&expand_terms(e))
}

pub(crate) fn expand_terms(e: &Expr) -> Vec<Term> {
    match e {
        Expr::Constant(c) => vec![Term::constant(*c)],
        Expr::Var(_) => vec![Term::factor(e.clone(), Rational64::from_integer(1))],
        Expr::Sum(ts) => ts.iter().flat_map(expand_terms).collect(),
        Expr::Product(fs) => {
            let mut acc = vec![Term::constant(1.0)];
            for f in fs {
                let rhs = expand_terms(f);
                let mut next = Vec::with_capacity(acc.len() * rhs.len());
                for a in &acc {
                    for b in &rhs {
                        next.push(a.mul(b));
                    }
                }
                acc = next;
            }
            acc
        }
        Expr::Power(base, r) => {
            if *r == Rational64::from_integer(0) {
                return vec![Term::constant(1.0)];
            }
            let tb = collect_terms(&expand_terms(base));
            if tb.is_empty() {
                // Base collapsed to zero.
                return if *r > Rational64::from_integer(0) {
                    Vec::new()
                } else {
                    vec![Term::factor(Expr::zero(), *r)]
                };
            }
            if tb.len() == 1 {
                if let Some(t) = tb[0].pow(*r) {
                    return vec![t];
                }
                return vec![Term::factor(tb[0].to_expr(), *r)];
            }
            if r.is_integer() && *r.numer() >= 2 && *r.numer() <= 8 {
                let n = r.to_integer();
                let mut acc = tb.clone();
                for _ in 1..n {
                    let mut next = Vec::with_capacity(acc.len() * tb.len());
                    for a in &acc {
                        for b in &tb {
                            next.push(a.mul(b));
                        }
                    }
                    acc = collect_terms(&next);
                }
                return acc;
            }
            vec![Term::factor(terms_to_expr(&tb), *r)]
        }
        Expr::Exp(u) => {
            let mut t = Term::constant(1.0);
            t.absorb_exp_arg((**u).clone());
            vec![t]
        }
        Expr::Ln(u) => vec![Term::factor(expand(u).ln(), Rational64::from_integer(1))],
        Expr::AbsLn(u) => vec![Term::factor(
            expand(u).abs_ln(),
            Rational64::from_integer(1),
        )],
        Expr::Sin(u) => vec![Term::factor(expand(u).sin(), Rational64::from_integer(1))],
        Expr::Cos(u) => vec![Term::factor(expand(u).cos(), Rational64::from_integer(1))],
        Expr::Quadrature(_) => vec![Term::factor(e.clone(), Rational64::from_integer(1))],
    }
}

/// Reads `e` as a polynomial in `sym`: ascending coefficient expressions,
/// none of which mention `sym`. `None` if `sym` occurs with a negative or
/// fractional exponent or inside a function argument.
pub fn collect_poly_in(e: &Expr, sym: Symbol) -> Option<Vec<Expr>> {
    let var_key = Expr::Var(sym).to_string();
    let mut buckets: BTreeMap<usize, Vec<Term>> = BTreeMap::new();
    let mut max_deg = 0usize;
    for t in collect_terms(&expand_terms(e)) {
        let mut rest = t.clone();
        let degree = match rest.factors.remove(&var_key) {
            None => 0usize,
            Some((_, r)) => {
                if !r.is_integer() || *r.numer() < 0 {
                    return None;
                }
                *r.numer() as usize
            }
        };
        if rest.depends_on(sym) {
            return None;
        }
        max_deg = max_deg.max(degree);
        buckets.entry(degree).or_default().push(rest);
    }
    let mut coeffs = vec![Expr::zero(); max_deg + 1];
    for (deg, terms) in buckets {
        coeffs[deg] = terms_to_expr(&terms);
    }
    Some(coeffs)
}

/// Reads `e` as a polynomial in `sym` with purely numeric coefficients.
pub fn collect_poly_constants(e: &Expr, sym: Symbol) -> Option<Vec<f64>> {
    collect_poly_in(e, sym)?
        .iter()
        .map(|c| c.constant_value())
        .collect()
}

/// Reads `e` as `a*sym + b` with `a`, `b` free of `sym`.
pub fn linear_in(e: &Expr, sym: Symbol) -> Option<(Expr, Expr)> {
    let coeffs = collect_poly_in(e, sym)?;
    if coeffs.len() > 2 {
        return None;
    }
    let b = coeffs.first().cloned().unwrap_or_else(Expr::zero);
    let a = coeffs.get(1).cloned().unwrap_or_else(Expr::zero);
    Some((a, b))
}

/// `exp` of an antiderivative, with `c*ln|v|` and `c*ln(v)` addends turned
/// into `v^c` factors. Taking `v^c` rather than `|v|^c` picks the positive
/// branch; an integrating factor is only ever used up to a nonzero constant
/// multiple on an interval avoiding the singularity, so the choice is free.
pub fn exp_of(u: &Expr) -> Expr {
    let su = u.simplify();
    let addends = match su {
        Expr::Sum(ts) => ts,
        other => vec![other],
    };
    let mut factors = Vec::new();
    let mut rest = Vec::new();
    for t in addends {
        match log_multiple(&t) {
            Some((v, c)) => factors.push(v.pow(c)),
            None => rest.push(t),
        }
    }
    if !rest.is_empty() {
        factors.push(Expr::Sum(rest).simplify().exp());
    }
    Expr::Product(factors).simplify()
}

/// Matches `c * ln(v)` or `c * ln|v|` with rational `c`.
fn log_multiple(t: &Expr) -> Option<(Expr, Rational64)> {
    match t {
        Expr::Ln(v) | Expr::AbsLn(v) => Some(((**v).clone(), Rational64::from_integer(1))),
        Expr::Product(fs) => {
            let mut c = 1.0;
            let mut inner = None;
            for f in fs {
                match f {
                    Expr::Constant(k) => c *= k,
                    Expr::Ln(v) | Expr::AbsLn(v) if inner.is_none() => inner = Some((**v).clone()),
                    _ => return None,
                }
            }
            Some((inner?, f64_to_rat(c)?))
        }
        _ => None,
    }
}
