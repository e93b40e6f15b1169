//! Truncated Taylor jets: a value together with its first `order` derivatives
//! at a point, with arithmetic that propagates derivatives exactly.
//!
//! Jets are the currency of the diagonalization engine. Every coefficient
//! evaluator hands back a jet of the requested order, and each diagonalization
//! step consumes exactly one derivative order (it differentiates the symbols
//! once). Storing derivatives rather than Taylor coefficients keeps the
//! formulas close to how they are written on paper; conversions to Taylor form
//! happen only inside composition.
//!
//! Two concrete types are provided: [`Jet`] over `f64` for coefficient
//! functions of time, and [`ComplexJet`] over `Complex64` for the diagonal and
//! off-diagonal symbols. Both truncate to the smaller order when operands of
//! different orders meet, mirroring the order budget of the symbol hierarchy.

use num_complex::Complex64;

fn binomial_row(k: usize) -> Vec<f64> {
    let mut row = vec![1.0; k + 1];
    for j in 1..=k {
        row[j] = row[j - 1] * (k - j + 1) as f64 / j as f64;
    }
    row
}

/// Real-valued truncated jet: `ds[k]` is the k-th derivative at the point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    ds: Vec<f64>,
}

impl Jet {
    /// Builds a jet from derivatives `[f, f', f'', ...]`.
    pub fn new(ds: Vec<f64>) -> Self {
        assert!(!ds.is_empty(), "jet needs at least the value");
        Jet { ds }
    }

    /// Constant function: all derivatives vanish.
    pub fn constant(value: f64, order: usize) -> Self {
        let mut ds = vec![0.0; order + 1];
        ds[0] = value;
        Jet { ds }
    }

    /// The identity coordinate `t`: derivative 1, all higher derivatives 0.
    pub fn variable(value: f64, order: usize) -> Self {
        let mut ds = vec![0.0; order + 1];
        ds[0] = value;
        if order >= 1 {
            ds[1] = 1.0;
        }
        Jet { ds }
    }

    pub fn order(&self) -> usize {
        self.ds.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.ds[0]
    }

    /// k-th derivative. Panics beyond the stored order: that is a order-budget
    /// violation by the caller, not a numerical condition.
    pub fn d(&self, k: usize) -> f64 {
        assert!(
            k <= self.order(),
            "derivative order {k} exceeds jet order {}",
            self.order()
        );
        self.ds[k]
    }

    /// The jet of f', one order shorter.
    pub fn derivative(&self) -> Jet {
        assert!(
            self.order() >= 1,
            "cannot differentiate an order-0 jet; the order budget is exhausted"
        );
        Jet::new(self.ds[1..].to_vec())
    }

    pub fn truncated(&self, order: usize) -> Jet {
        let n = order.min(self.order());
        Jet::new(self.ds[..=n].to_vec())
    }

    pub fn neg(&self) -> Jet {
        Jet::new(self.ds.iter().map(|d| -d).collect())
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet::new(self.ds.iter().map(|d| c * d).collect())
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let n = self.order().min(other.order());
        Jet::new((0..=n).map(|k| self.ds[k] + other.ds[k]).collect())
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let n = self.order().min(other.order());
        Jet::new((0..=n).map(|k| self.ds[k] - other.ds[k]).collect())
    }

    /// Leibniz product rule.
    pub fn mul(&self, other: &Jet) -> Jet {
        let n = self.order().min(other.order());
        let mut out = vec![0.0; n + 1];
        for (k, slot) in out.iter_mut().enumerate() {
            let binom = binomial_row(k);
            let mut acc = 0.0;
            for j in 0..=k {
                // structural zeros annihilate the term, so an honest
                // infinite derivative in one factor cannot poison entries
                // where the other factor vanishes identically
                if self.ds[j] == 0.0 || other.ds[k - j] == 0.0 {
                    continue;
                }
                acc += binom[j] * self.ds[j] * other.ds[k - j];
            }
            *slot = acc;
        }
        Jet::new(out)
    }

    /// Quotient by recursion on the Leibniz rule; denominator value must be
    /// nonzero.
    pub fn div(&self, other: &Jet) -> Jet {
        assert!(other.ds[0] != 0.0, "jet division by zero value");
        let n = self.order().min(other.order());
        let mut h = vec![0.0; n + 1];
        for k in 0..=n {
            let binom = binomial_row(k);
            let mut acc = self.ds[k];
            for j in 0..k {
                acc -= binom[j] * h[j] * other.ds[k - j];
            }
            h[k] = acc / other.ds[0];
        }
        Jet::new(h)
    }

    fn to_taylor(&self) -> Vec<f64> {
        let mut fact = 1.0;
        self.ds
            .iter()
            .enumerate()
            .map(|(k, d)| {
                if k > 0 {
                    fact *= k as f64;
                }
                d / fact
            })
            .collect()
    }

    fn from_taylor(a: &[f64]) -> Jet {
        let mut fact = 1.0;
        Jet::new(
            a.iter()
                .enumerate()
                .map(|(k, c)| {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    c * fact
                })
                .collect(),
        )
    }

    /// Post-composes with an outer function given by its derivatives at
    /// `self.value()`: result is the jet of `f(self(t))`. `outer[k]` must be
    /// the k-th derivative of f at the inner value, `k = 0..=order`.
    pub fn chain(&self, outer: &[f64]) -> Jet {
        let n = self.order().min(outer.len() - 1);
        // Horner evaluation of the outer Taylor polynomial in the shifted
        // inner series (constant term dropped), all truncated to order n.
        let mut s = self.truncated(n).to_taylor();
        s[0] = 0.0;
        let mut fact = 1.0;
        let b: Vec<f64> = outer[..=n]
            .iter()
            .enumerate()
            .map(|(k, d)| {
                if k > 0 {
                    fact *= k as f64;
                }
                d / fact
            })
            .collect();
        let mut r = vec![0.0; n + 1];
        r[0] = b[n];
        for k in (0..n).rev() {
            // r <- r * s + b[k], truncated.
            let mut nr = vec![0.0; n + 1];
            for i in 0..=n {
                if r[i] == 0.0 {
                    continue;
                }
                for j in 0..=(n - i) {
                    // same annihilation convention as in `mul`
                    if s[j] == 0.0 {
                        continue;
                    }
                    nr[i + j] += r[i] * s[j];
                }
            }
            nr[0] += b[k];
            r = nr;
        }
        Jet::from_taylor(&r)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let outer: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4]).collect();
        self.chain(&outer)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let outer: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4]).collect();
        self.chain(&outer)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let outer = vec![e; self.order() + 1];
        self.chain(&outer)
    }

    pub fn ln(&self) -> Jet {
        let u = self.value();
        assert!(u > 0.0, "jet ln of non-positive value");
        let mut outer = vec![0.0; self.order() + 1];
        outer[0] = u.ln();
        // d^k ln u = (-1)^{k-1} (k-1)! / u^k
        let mut c = 1.0;
        for (k, slot) in outer.iter_mut().enumerate().skip(1) {
            if k > 1 {
                c *= -((k - 1) as f64);
            }
            *slot = c / u.powi(k as i32);
        }
        self.chain(&outer)
    }

    /// Real power `u^a`. At `u = 0` the derivatives of fractional powers are
    /// genuinely infinite and are reported as such rather than masked.
    pub fn powf(&self, a: f64) -> Jet {
        let u = self.value();
        let mut outer = vec![0.0; self.order() + 1];
        let mut coef = 1.0;
        for (k, slot) in outer.iter_mut().enumerate() {
            if k > 0 {
                coef *= a - (k - 1) as f64;
            }
            *slot = coef * u.powf(a - k as f64);
        }
        self.chain(&outer)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }
}

/// Builds an order-`order` jet of `f` at `t` by central finite differences
/// with step `h`. Only for cross-checking closed-form jets in tests and for
/// user-supplied coefficients without derivative expressions; accuracy is
/// O(h^2) and degrades with order.
pub fn finite_difference_jet<F: Fn(f64) -> f64>(f: &F, t: f64, order: usize, h: f64) -> Jet {
    // Central stencils on the symmetric grid t + j h, |j| <= order.
    let mut ds = vec![0.0; order + 1];
    ds[0] = f(t);
    for (k, slot) in ds.iter_mut().enumerate().skip(1) {
        // k-th derivative: iterated central difference, stencil width k+1.
        let mut acc = 0.0;
        let binom = binomial_row(k);
        for j in 0..=k {
            let x = t + (k as f64 / 2.0 - j as f64) * h;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom[j] * f(x);
        }
        *slot = acc / h.powi(k as i32);
    }
    Jet::new(ds)
}

/// Complex-valued truncated jet of a function of a real variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexJet {
    ds: Vec<Complex64>,
}

impl ComplexJet {
    pub fn new(ds: Vec<Complex64>) -> Self {
        assert!(!ds.is_empty(), "jet needs at least the value");
        ComplexJet { ds }
    }

    pub fn constant(value: Complex64, order: usize) -> Self {
        let mut ds = vec![Complex64::ZERO; order + 1];
        ds[0] = value;
        ComplexJet { ds }
    }

    pub fn from_real(jet: &Jet) -> Self {
        ComplexJet::new((0..=jet.order()).map(|k| Complex64::new(jet.d(k), 0.0)).collect())
    }

    pub fn order(&self) -> usize {
        self.ds.len() - 1
    }

    pub fn value(&self) -> Complex64 {
        self.ds[0]
    }

    pub fn d(&self, k: usize) -> Complex64 {
        assert!(
            k <= self.order(),
            "derivative order {k} exceeds jet order {}",
            self.order()
        );
        self.ds[k]
    }

    pub fn derivative(&self) -> ComplexJet {
        assert!(
            self.order() >= 1,
            "cannot differentiate an order-0 jet; the order budget is exhausted"
        );
        ComplexJet::new(self.ds[1..].to_vec())
    }

    /// Complex conjugate. Since the variable is real, the jet of the
    /// conjugated function is the entrywise conjugate.
    pub fn truncated(&self, order: usize) -> ComplexJet {
        assert!(order <= self.order(), "cannot extend a jet by truncation");
        ComplexJet::new(self.ds[..=order].to_vec())
    }

    pub fn conj(&self) -> ComplexJet {
        ComplexJet::new(self.ds.iter().map(|d| d.conj()).collect())
    }

    pub fn re(&self) -> Jet {
        Jet::new(self.ds.iter().map(|d| d.re).collect())
    }

    pub fn im(&self) -> Jet {
        Jet::new(self.ds.iter().map(|d| d.im).collect())
    }

    pub fn neg(&self) -> ComplexJet {
        ComplexJet::new(self.ds.iter().map(|d| -d).collect())
    }

    pub fn scale(&self, c: Complex64) -> ComplexJet {
        ComplexJet::new(self.ds.iter().map(|d| c * d).collect())
    }

    pub fn add(&self, other: &ComplexJet) -> ComplexJet {
        let n = self.order().min(other.order());
        ComplexJet::new((0..=n).map(|k| self.ds[k] + other.ds[k]).collect())
    }

    pub fn sub(&self, other: &ComplexJet) -> ComplexJet {
        let n = self.order().min(other.order());
        ComplexJet::new((0..=n).map(|k| self.ds[k] - other.ds[k]).collect())
    }

    pub fn mul(&self, other: &ComplexJet) -> ComplexJet {
        let n = self.order().min(other.order());
        let mut out = vec![Complex64::ZERO; n + 1];
        for (k, slot) in out.iter_mut().enumerate() {
            let binom = binomial_row(k);
            let mut acc = Complex64::ZERO;
            for j in 0..=k {
                acc += binom[j] * self.ds[j] * other.ds[k - j];
            }
            *slot = acc;
        }
        ComplexJet::new(out)
    }

    pub fn div(&self, other: &ComplexJet) -> ComplexJet {
        assert!(other.ds[0].norm() > 0.0, "jet division by zero value");
        let n = self.order().min(other.order());
        let mut h = vec![Complex64::ZERO; n + 1];
        for k in 0..=n {
            let binom = binomial_row(k);
            let mut acc = self.ds[k];
            for j in 0..k {
                acc -= binom[j] * h[j] * other.ds[k - j];
            }
            h[k] = acc / other.ds[0];
        }
        ComplexJet::new(h)
    }
}
