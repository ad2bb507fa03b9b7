//! Dense real-coefficient polynomials, complex root extraction, and partial
//! fraction decomposition of proper rational functions.
//!
//! Coefficients are stored in ascending degree order. Root finding uses
//! closed forms through degree two and Durand-Kerner iteration above that,
//! followed by conjugate symmetrization, multiplicity clustering within
//! 1e-8, and a Newton refinement of each cluster center on the matching
//! derivative. An m-fold root of a degree >= 3 polynomial is resolved only
//! to about machine-epsilon^(1/m), so it may be reported as a tight group
//! of simple roots rather than one multiple root; each reported root still
//! passes the residual gate.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute spacing below which two computed roots merge into one multiple
/// root.
const CLUSTER_TOL: f64 = 1e-8;

/// Relative imaginary magnitude below which a computed root snaps to the
/// real axis.
const REAL_SNAP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    // Invariant: last entry nonzero; the zero polynomial is the empty vec.
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients, trimming trailing
    /// exact zeros.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `c * s^degree`.
    pub fn monomial(degree: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; degree + 1];
        coeffs[degree] = c;
        Polynomial::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `s^k`, zero beyond the stored degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        Polynomial::new(coeffs)
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&a| a * c).collect())
    }

    /// Same roots, leading coefficient one. The zero polynomial stays zero.
    pub fn monic(&self) -> Polynomial {
        if self.is_zero() {
            Polynomial::zero()
        } else {
            self.scale(1.0 / self.leading())
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    /// Long division returning `(quotient, remainder)`.
    pub fn divide(&self, divisor: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        if divisor.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let dd = divisor.degree().unwrap();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; self.coeffs.len().saturating_sub(dd)];
        while rem.len() > dd {
            let k = rem.len() - 1 - dd;
            let factor = rem[rem.len() - 1] / divisor.leading();
            quot[k] = factor;
            for (j, &c) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= factor * c;
            }
            rem.pop();
        }
        Ok((Polynomial::new(quot), Polynomial::new(rem)))
    }

    /// Monic polynomial with the given real roots.
    pub fn from_roots(roots: &[f64]) -> Polynomial {
        let mut p = Polynomial::constant(1.0);
        for &r in roots {
            p = p.mul(&Polynomial::new(vec![-r, 1.0]));
        }
        p
    }

    /// Expands `lead * prod (s - root)^multiplicity` over a conjugate
    /// symmetric root list, discarding the residual imaginary round-off.
    pub fn from_complex_roots(lead: f64, roots: &[Root]) -> Polynomial {
        let mut c = vec![Complex64::new(lead, 0.0)];
        for root in roots {
            for _ in 0..root.multiplicity {
                let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
                for (k, &a) in c.iter().enumerate() {
                    next[k] -= a * root.value;
                    next[k + 1] += a;
                }
                c = next;
            }
        }
        Polynomial::new(c.into_iter().map(|z| z.re).collect())
    }

    /// All complex roots with multiplicities, sorted by real then imaginary
    /// part. Fails with [`Error::ZeroPolynomial`] on the zero polynomial and
    /// [`Error::RootsNotConverged`] when the iteration cannot certify a
    /// root.
    pub fn roots(&self) -> Result<Vec<Root>> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        // Peel exact roots at the origin first; they are common and exact.
        let zeros = self.coeffs.iter().take_while(|&&c| c == 0.0).count();
        let reduced = Polynomial::new(self.coeffs[zeros..].to_vec());
        let mut out = Vec::new();
        if zeros > 0 {
            out.push(Root {
                value: Complex64::new(0.0, 0.0),
                multiplicity: zeros,
            });
        }
        match reduced.degree().unwrap() {
            0 => {}
            1 => out.push(Root {
                value: Complex64::new(-reduced.coeff(0) / reduced.coeff(1), 0.0),
                multiplicity: 1,
            }),
            2 => out.extend(quadratic_roots(
                reduced.coeff(2),
                reduced.coeff(1),
                reduced.coeff(0),
            )),
            _ => out.extend(durand_kerner(&reduced)?),
        }
        out.sort_by(|a, b| {
            a.value
                .re
                .total_cmp(&b.value.re)
                .then(a.value.im.total_cmp(&b.value.im))
        });
        Ok(out)
    }
}

/// A root of a real polynomial together with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

impl Root {
    pub fn simple(value: Complex64) -> Self {
        Root {
            value,
            multiplicity: 1,
        }
    }

    pub fn is_real(&self) -> bool {
        self.value.im == 0.0
    }
}

/// Stable closed form for `a s^2 + b s + c`, merging a numerically repeated
/// pair into one double root.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<Root> {
    let disc = b * b - 4.0 * a * c;
    if disc.abs() <= 1e-14 * (b * b + 4.0 * (a * c).abs()) {
        return vec![Root {
            value: Complex64::new(-b / (2.0 * a), 0.0),
            multiplicity: 2,
        }];
    }
    if disc > 0.0 {
        // Avoid cancellation between -b and the root of the discriminant.
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let (r1, r2) = if b == 0.0 {
            let r = (disc.sqrt()) / (2.0 * a);
            (r, -r)
        } else {
            (q / a, c / q)
        };
        vec![
            Root::simple(Complex64::new(r1, 0.0)),
            Root::simple(Complex64::new(r2, 0.0)),
        ]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a).abs();
        vec![
            Root::simple(Complex64::new(re, -im)),
            Root::simple(Complex64::new(re, im)),
        ]
    }
}

fn durand_kerner(p: &Polynomial) -> Result<Vec<Root>> {
    let monic = p.monic();
    let n = monic.degree().unwrap();
    let deriv = monic.derivative();
    let max_coeff = monic.coeffs().iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let max_coeff_input = p.coeffs().iter().fold(0.0_f64, |m, c| m.max(c.abs()));

    // Standard spiral start inside the Cauchy root bound.
    let radius = 1.0 + max_coeff;
    let seed = Complex64::new(0.4, 0.9);
    let mut z = Vec::with_capacity(n);
    let mut w = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        w *= seed;
        z.push(radius * w);
    }

    for _ in 0..500 {
        let mut max_delta = 0.0_f64;
        let mut max_mag = 0.0_f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex64::new(f64::MIN_POSITIVE, 0.0);
            }
            let delta = monic.eval_complex(z[i]) / denom;
            z[i] -= delta;
            max_delta = max_delta.max(delta.norm());
            max_mag = max_mag.max(z[i].norm());
        }
        // Multiple roots never reach this threshold; clustering below
        // absorbs their residual scatter.
        if max_delta <= 1e-13 * (1.0 + max_mag) {
            break;
        }
    }

    // One round of Newton polish sharpens simple roots to machine accuracy.
    for zi in z.iter_mut() {
        for _ in 0..2 {
            let dp = deriv.eval_complex(*zi);
            if dp.norm() == 0.0 {
                break;
            }
            *zi -= monic.eval_complex(*zi) / dp;
        }
    }

    // Real coefficients: snap near-real roots, then force exact conjugate
    // pairing on the rest.
    for zi in z.iter_mut() {
        if zi.im.abs() <= REAL_SNAP_TOL * (1.0 + zi.norm()) {
            zi.im = 0.0;
        }
    }
    pair_conjugates(&mut z);

    let clusters = cluster(&z);
    let mut out = Vec::with_capacity(clusters.len());
    for (center, multiplicity) in clusters {
        let refined = refine_center(&monic, center, multiplicity);
        out.push(Root {
            value: refined,
            multiplicity,
        });
    }
    mirror_conjugate_centers(&mut out);

    for root in &out {
        let residual = p.eval_complex(root.value).norm();
        if residual > 1e-10 * (1.0 + max_coeff_input) {
            return Err(Error::RootsNotConverged);
        }
    }
    Ok(out)
}

/// Replaces near-conjugate pairs `(u, l)` with an exactly conjugate pair.
fn pair_conjugates(z: &mut [Complex64]) {
    let mut used = vec![false; z.len()];
    for i in 0..z.len() {
        if z[i].im <= 0.0 || used[i] {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, zj) in z.iter().enumerate() {
            if zj.im >= 0.0 || used[j] {
                continue;
            }
            let d = (zj.conj() - z[i]).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            let avg = 0.5 * (z[i] + z[j].conj());
            z[i] = avg;
            z[j] = avg.conj();
            used[i] = true;
            used[j] = true;
        }
    }
}

/// Single-linkage clustering of the polished iterates; each cluster is one
/// root whose multiplicity is the cluster size.
fn cluster(z: &[Complex64]) -> Vec<(Complex64, usize)> {
    let n = z.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            if (z[i] - z[j]).norm() <= CLUSTER_TOL {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: Vec<(Complex64, usize)> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (i, &zi) in z.iter().enumerate() {
        let root = find(&mut parent, i);
        match labels.iter().position(|&l| l == root) {
            Some(k) => {
                groups[k].0 += zi;
                groups[k].1 += 1;
            }
            None => {
                labels.push(root);
                groups.push((z[i], 1));
            }
        }
    }
    groups
        .into_iter()
        .map(|(sum, count)| (sum / count as f64, count))
        .collect()
}

/// Newton refinement of a multiplicity-m cluster center on the (m-1)-th
/// derivative, where the root is simple.
fn refine_center(monic: &Polynomial, center: Complex64, multiplicity: usize) -> Complex64 {
    let mut q = monic.clone();
    for _ in 1..multiplicity {
        q = q.derivative();
    }
    let dq = q.derivative();
    let mut c = center;
    for _ in 0..40 {
        let d = dq.eval_complex(c);
        if d.norm() == 0.0 {
            break;
        }
        let step = q.eval_complex(c) / d;
        c -= step;
        if step.norm() <= 1e-14 * (1.0 + c.norm()) {
            break;
        }
    }
    if center.im == 0.0 {
        // Real centers must stay real; Newton in complex arithmetic can
        // only drift off the axis through round-off.
        c.im = 0.0;
    }
    c
}

/// Rewrites each lower half-plane center as the exact conjugate of its
/// upper half-plane partner.
fn mirror_conjugate_centers(roots: &mut [Root]) {
    for i in 0..roots.len() {
        if roots[i].value.im <= 0.0 {
            continue;
        }
        let target = roots[i].value.conj();
        let mult = roots[i].multiplicity;
        let mut best: Option<(usize, f64)> = None;
        for (j, r) in roots.iter().enumerate() {
            if r.value.im >= 0.0 || r.multiplicity != mult {
                continue;
            }
            let d = (r.value - target).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, d)) = best {
            if d <= CLUSTER_TOL * (1.0 + target.norm()) {
                roots[j].value = target;
            }
        }
    }
}

/// A ratio of real polynomials with a monic denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
}

impl RationalFunction {
    /// Normalizes the denominator to be monic.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let lead = den.leading();
        Ok(RationalFunction {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
        })
    }

    pub fn from_polynomial(p: Polynomial) -> Self {
        RationalFunction {
            num: p,
            den: Polynomial::constant(1.0),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    /// True when the numerator degree is strictly below the denominator's.
    pub fn is_proper(&self) -> bool {
        match (self.num.degree(), self.den.degree()) {
            (None, _) => true,
            (Some(n), Some(d)) => n < d,
            (Some(_), None) => false,
        }
    }

    /// Cross-multiplied sum; equal denominators skip the product.
    pub fn add(&self, other: &RationalFunction) -> Result<RationalFunction> {
        if self.den == other.den {
            return RationalFunction::new(self.num.add(&other.num), self.den.clone());
        }
        RationalFunction::new(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn scale(&self, c: f64) -> RationalFunction {
        RationalFunction {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let d = self.den.eval(s);
        if d == 0.0 {
            return Err(Error::domain(format!("rational function pole at {s}")));
        }
        Ok(self.num.eval(s) / d)
    }
}

/// One summand `residue / (s - pole)^multiplicity` of a partial fraction
/// expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialFractionTerm {
    pub residue: Complex64,
    pub pole: Complex64,
    pub multiplicity: usize,
}

/// Expands a strictly proper rational function into partial fractions,
/// locating the poles with [`Polynomial::roots`].
pub fn partial_fractions(r: &RationalFunction) -> Result<Vec<PartialFractionTerm>> {
    if !r.is_proper() {
        return Err(Error::ImproperRational {
            num: r.num.degree().unwrap_or(0),
            den: r.den.degree().unwrap_or(0),
        });
    }
    let poles = r.den.roots()?;
    partial_fractions_factored(r.num(), r.den.leading(), &poles)
}

/// Partial fractions of `num / (lead * prod (s - pole)^multiplicity)` with
/// the pole locations supplied by the caller. The numerator degree must stay
/// below the factored denominator's.
pub fn partial_fractions_factored(
    num: &Polynomial,
    lead: f64,
    poles: &[Root],
) -> Result<Vec<PartialFractionTerm>> {
    let den_degree: usize = poles.iter().map(|r| r.multiplicity).sum();
    if let Some(nd) = num.degree() {
        if nd >= den_degree {
            return Err(Error::ImproperRational {
                num: nd,
                den: den_degree,
            });
        }
    }
    let mut terms = Vec::new();
    for (idx, pole) in poles.iter().enumerate() {
        let m = pole.multiplicity;
        // Local Taylor expansion of numerator and cofactor around the pole;
        // dividing the two series yields the residues of all m orders.
        let a = taylor_coeffs(num, pole.value, m);
        let b = cofactor_taylor_coeffs(lead, poles, idx, pole.value, m);
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..m {
            let mut s = a[k];
            for j in 1..=k {
                s -= b[j] * c[k - j];
            }
            c[k] = s / b[0];
        }
        for (k, &residue) in c.iter().enumerate() {
            let residue = if pole.value.im == 0.0 {
                // A real pole of a real rational function has real
                // residues; drop the round-off imaginary part.
                Complex64::new(residue.re, 0.0)
            } else {
                residue
            };
            terms.push(PartialFractionTerm {
                residue,
                pole: pole.value,
                multiplicity: m - k,
            });
        }
    }
    enforce_conjugate_residues(&mut terms);
    Ok(terms)
}

/// Ascending Taylor coefficients of `p` about `center`, truncated to `len`
/// terms, via repeated synthetic division.
fn taylor_coeffs(p: &Polynomial, center: Complex64, len: usize) -> Vec<Complex64> {
    let mut d: Vec<Complex64> = p
        .coeffs()
        .iter()
        .rev()
        .map(|&c| Complex64::new(c, 0.0))
        .collect();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        if d.is_empty() {
            out.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for v in d.iter_mut() {
            acc = acc * center + *v;
            *v = acc;
        }
        out.push(d.pop().unwrap());
    }
    out
}

/// Ascending Taylor coefficients about `center` of the denominator with the
/// `skip`-th pole factor removed, truncated to `len` terms.
fn cofactor_taylor_coeffs(
    lead: f64,
    poles: &[Root],
    skip: usize,
    center: Complex64,
    len: usize,
) -> Vec<Complex64> {
    let mut q = vec![Complex64::new(0.0, 0.0); len];
    q[0] = Complex64::new(lead, 0.0);
    for (j, root) in poles.iter().enumerate() {
        if j == skip {
            continue;
        }
        let d = center - root.value;
        for _ in 0..root.multiplicity {
            for k in (0..len).rev() {
                let lower = if k > 0 {
                    q[k - 1]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                q[k] = q[k] * d + lower;
            }
        }
    }
    q
}

/// Conjugate pole pairs must carry conjugate residues; copy the upper
/// half-plane values onto their partners.
fn enforce_conjugate_residues(terms: &mut [PartialFractionTerm]) {
    for i in 0..terms.len() {
        if terms[i].pole.im <= 0.0 {
            continue;
        }
        let pole = terms[i].pole.conj();
        let mult = terms[i].multiplicity;
        let residue = terms[i].residue.conj();
        for term in terms.iter_mut() {
            if term.multiplicity == mult
                && (term.pole - pole).norm() <= CLUSTER_TOL * (1.0 + pole.norm())
                && term.pole.im < 0.0
            {
                term.residue = residue;
                break;
            }
        }
    }
}
