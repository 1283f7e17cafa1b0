//! Scalar reverse-mode automatic differentiation on a flat append-only tape.
//!
//! Every operation pushes one node holding its operands' indices and the
//! local partial derivatives evaluated at record time, so a single reverse
//! sweep (descending node index, fixed accumulation order) yields exact
//! gradients of one scalar root with respect to every leaf. All arithmetic is
//! f64; complex values are handled as explicit real pairs ([`ComplexVar`]).
//!
//! Design constraints this module commits to:
//! - a tape is rebuilt from scratch for every batch ([`Tape::clear`] keeps
//!   the allocation); there is no graph reuse or caching across batches,
//! - nodes have at most two parents; n-ary sums are folded chains of adds,
//!   which keeps every local partial exactly 1.0,
//! - `ln`, `log2` and `sqrt` require strictly positive inputs and report a
//!   [`AdError::DomainError`] instead of producing a NaN,
//! - operators (`+`, `-`, `*`, `/`, unary `-`) are total on finite values and
//!   panic only on programming errors (mixing tapes, dividing by an exact
//!   zero); data-dependent failure paths go through the fallible methods.
//!
//! `clear` invalidates all outstanding [`Var`]s of that tape; using one
//! afterwards is a logic error (indices are stale, values are not).

use std::cell::RefCell;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    /// Tried to put a NaN or infinity onto the tape.
    #[error("cannot lift non-finite value {0} onto the tape")]
    InvalidValue(f64),
    /// An operation was applied outside its domain, e.g. `ln(0)`.
    #[error("{op} applied to {arg} (outside its domain) at node {node}")]
    DomainError {
        op: &'static str,
        node: usize,
        arg: f64,
    },
    /// The variable handed to `backward` lives on a different tape.
    #[error("variable does not belong to this tape")]
    TapeMismatch,
}

/// Operation kinds recorded on the tape. Only used for diagnostics; the
/// reverse sweep needs nothing beyond parents and partials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Ln,
    Log2,
    Sqrt,
    Square,
    AddConst,
    SubFromConst,
    MulConst,
    ConstOver,
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
    op: OpKind,
}

/// Append-only record of a scalar computation.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to one scalar on a tape. Copyable; carries its forward value so
/// reading it never touches the tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: u32,
    value: f64,
}

/// Complex scalar as a pair of tape variables.
#[derive(Clone, Copy)]
pub struct ComplexVar<'t> {
    pub re: Var<'t>,
    pub im: Var<'t>,
}

impl<'t> ComplexVar<'t> {
    /// |z|^2 = re^2 + im^2, recorded as two squares and an add.
    pub fn magnitude_squared(self) -> Var<'t> {
        self.re.square() + self.im.square()
    }
}

/// Adjoints of every node after a reverse sweep.
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    /// d(root)/d(v). Valid for any node of the swept tape, leaves included.
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.adjoints[v.index as usize]
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn with_capacity(nodes: usize) -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(nodes)),
        }
    }

    /// Number of nodes currently recorded.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Drops all nodes but keeps the allocation. Outstanding `Var`s of this
    /// tape become invalid.
    pub fn clear(&self) {
        self.nodes.borrow_mut().clear();
    }

    /// Which operation produced a variable; diagnostic only.
    pub fn op_of(&self, v: Var<'_>) -> OpKind {
        self.nodes.borrow()[v.index as usize].op
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len() as u32;
        nodes.push(node);
        index
    }

    /// Puts a new leaf holding `value` onto the tape.
    pub fn lift(&self, value: f64) -> Result<Var<'_>, AdError> {
        if !value.is_finite() {
            return Err(AdError::InvalidValue(value));
        }
        let index = self.push(Node {
            parents: [NONE, NONE],
            partials: [0.0, 0.0],
            op: OpKind::Leaf,
        });
        Ok(Var {
            tape: self,
            index,
            value,
        })
    }

    /// Folds a slice into a single sum. Every local partial is exactly 1, so
    /// the gradient of the sum with respect to each term is exactly 1.
    pub fn sum<'t>(&'t self, terms: &[Var<'t>]) -> Result<Var<'t>, AdError> {
        match terms.split_first() {
            None => self.lift(0.0),
            Some((&first, rest)) => Ok(rest.iter().fold(first, |acc, &v| acc + v)),
        }
    }

    /// Reverse sweep seeding d(root)/d(root) = 1. Adjoints accumulate in
    /// descending node order; the order is fixed, so repeated sweeps are
    /// bit-identical.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients, AdError> {
        if !std::ptr::eq(self, root.tape) {
            return Err(AdError::TapeMismatch);
        }
        let nodes = self.nodes.borrow();
        let mut adjoints = vec![0.0; nodes.len()];
        let root_index = root.index as usize;
        adjoints[root_index] = 1.0;
        for i in (0..=root_index).rev() {
            let a = adjoints[i];
            if a == 0.0 {
                continue;
            }
            let node = &nodes[i];
            if node.parents[0] != NONE {
                adjoints[node.parents[0] as usize] += a * node.partials[0];
            }
            if node.parents[1] != NONE {
                adjoints[node.parents[1] as usize] += a * node.partials[1];
            }
        }
        Ok(Gradients { adjoints })
    }
}

impl<'t> Var<'t> {
    pub fn value(self) -> f64 {
        self.value
    }

    fn unary(self, op: OpKind, value: f64, partial: f64) -> Var<'t> {
        let index = self.tape.push(Node {
            parents: [self.index, NONE],
            partials: [partial, 0.0],
            op,
        });
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    fn binary(self, rhs: Var<'t>, op: OpKind, value: f64, pl: f64, pr: f64) -> Var<'t> {
        assert!(
            std::ptr::eq(self.tape, rhs.tape),
            "operands recorded on different tapes"
        );
        let index = self.tape.push(Node {
            parents: [self.index, rhs.index],
            partials: [pl, pr],
            op,
        });
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    pub fn exp(self) -> Var<'t> {
        let v = self.value.exp();
        self.unary(OpKind::Exp, v, v)
    }

    pub fn ln(self) -> Result<Var<'t>, AdError> {
        if self.value <= 0.0 {
            return Err(AdError::DomainError {
                op: "ln",
                node: self.index as usize,
                arg: self.value,
            });
        }
        Ok(self.unary(OpKind::Ln, self.value.ln(), 1.0 / self.value))
    }

    pub fn log2(self) -> Result<Var<'t>, AdError> {
        if self.value <= 0.0 {
            return Err(AdError::DomainError {
                op: "log2",
                node: self.index as usize,
                arg: self.value,
            });
        }
        Ok(self.unary(
            OpKind::Log2,
            self.value.log2(),
            1.0 / (self.value * std::f64::consts::LN_2),
        ))
    }

    pub fn sqrt(self) -> Result<Var<'t>, AdError> {
        if self.value <= 0.0 {
            return Err(AdError::DomainError {
                op: "sqrt",
                node: self.index as usize,
                arg: self.value,
            });
        }
        let v = self.value.sqrt();
        Ok(self.unary(OpKind::Sqrt, v, 0.5 / v))
    }

    pub fn square(self) -> Var<'t> {
        self.unary(OpKind::Square, self.value * self.value, 2.0 * self.value)
    }
}

impl<'t> std::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, OpKind::Add, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> std::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, OpKind::Sub, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> std::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(
            rhs,
            OpKind::Mul,
            self.value * rhs.value,
            rhs.value,
            self.value,
        )
    }
}

impl<'t> std::ops::Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        assert!(rhs.value != 0.0, "division by a zero-valued variable");
        let inv = 1.0 / rhs.value;
        self.binary(
            rhs,
            OpKind::Div,
            self.value * inv,
            inv,
            -self.value * inv * inv,
        )
    }
}

impl<'t> std::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(OpKind::Neg, -self.value, -1.0)
    }
}

impl<'t> std::ops::Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.unary(OpKind::AddConst, self.value + c, 1.0)
    }
}

impl<'t> std::ops::Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, v: Var<'t>) -> Var<'t> {
        v + self
    }
}

impl<'t> std::ops::Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.unary(OpKind::AddConst, self.value - c, 1.0)
    }
}

impl<'t> std::ops::Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, v: Var<'t>) -> Var<'t> {
        v.unary(OpKind::SubFromConst, self - v.value, -1.0)
    }
}

impl<'t> std::ops::Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.unary(OpKind::MulConst, self.value * c, c)
    }
}

impl<'t> std::ops::Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, v: Var<'t>) -> Var<'t> {
        v * self
    }
}

impl<'t> std::ops::Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, c: f64) -> Var<'t> {
        assert!(c != 0.0, "division by a zero constant");
        let inv = 1.0 / c;
        self.unary(OpKind::MulConst, self.value * inv, inv)
    }
}

impl<'t> std::ops::Div<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn div(self, v: Var<'t>) -> Var<'t> {
        assert!(v.value != 0.0, "division by a zero-valued variable");
        let value = self / v.value;
        v.unary(OpKind::ConstOver, value, -value / v.value)
    }
}

/// log(sum(exp(x_i))) with the running maximum subtracted before
/// exponentiating, so the result is finite whenever the inputs are. The
/// maximum is located by value; the subtraction happens on the tape, which
/// keeps the gradient exact.
pub fn log_sum_exp<'t>(tape: &'t Tape, xs: &[Var<'t>]) -> Result<Var<'t>, AdError> {
    assert!(!xs.is_empty(), "log_sum_exp of an empty slice");
    let mut arg_max = 0;
    for (i, x) in xs.iter().enumerate() {
        if x.value() > xs[arg_max].value() {
            arg_max = i;
        }
    }
    let m = xs[arg_max];
    let shifted: Vec<Var<'t>> = xs.iter().map(|&x| (x - m).exp()).collect();
    // The arg-max term contributes exp(0) = 1, so the sum is >= 1 and ln is
    // always in domain.
    let total = tape.sum(&shifted)?;
    Ok(m + total.ln()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central finite difference of a rebuildable scalar function.
    fn central_fd(mut f: impl FnMut(&[f64]) -> f64, at: &[f64], i: usize, h: f64) -> f64 {
        let mut hi = at.to_vec();
        let mut lo = at.to_vec();
        hi[i] += h;
        lo[i] -= h;
        (f(&hi) - f(&lo)) / (2.0 * h)
    }

    #[test]
    fn lift_stores_value_and_errors_on_non_finite() {
        let tape = Tape::new();
        let x = tape.lift(2.5).unwrap();
        assert_eq!(x.value(), 2.5);
        assert!(matches!(
            tape.lift(f64::NAN),
            Err(AdError::InvalidValue(_))
        ));
        assert!(matches!(
            tape.lift(f64::INFINITY),
            Err(AdError::InvalidValue(_))
        ));
    }

    #[test]
    fn forward_values_of_primitives() {
        let tape = Tape::new();
        let a = tape.lift(2.0).unwrap();
        let b = tape.lift(3.0).unwrap();
        assert_eq!(tape.op_of(a), OpKind::Leaf);
        assert_eq!(tape.op_of(a * b), OpKind::Mul);
        assert_eq!((a * b).value(), 6.0);
        assert_eq!((a + b).value(), 5.0);
        assert_eq!((a - b).value(), -1.0);
        assert_eq!((a / b).value(), 2.0 / 3.0);
        assert_eq!((-a).value(), -2.0);
        assert_eq!(a.square().value(), 4.0);
        assert_eq!(a.exp().value(), 2.0f64.exp());
        assert_eq!(a.ln().unwrap().value(), 2.0f64.ln());
        assert_eq!(a.sqrt().unwrap().value(), 2.0f64.sqrt());
        assert_eq!(a.log2().unwrap().value(), 1.0);
    }

    #[test]
    fn ln_of_zero_is_a_domain_error() {
        let tape = Tape::new();
        let z = tape.lift(0.0).unwrap();
        match z.ln() {
            Err(AdError::DomainError { op, .. }) => assert_eq!(op, "ln"),
            other => panic!("expected DomainError, got {:?}", other.map(|v| v.value())),
        }
        assert!(z.log2().is_err());
        assert!(tape.lift(-1.0).unwrap().sqrt().is_err());
    }

    #[test]
    fn backward_product_rule() {
        let tape = Tape::new();
        let x = tape.lift(3.0).unwrap();
        let y = tape.lift(5.0).unwrap();
        let g = tape.backward(x * y).unwrap();
        assert_eq!(g.wrt(x), 5.0);
        assert_eq!(g.wrt(y), 3.0);
    }

    #[test]
    fn backward_log2_partial() {
        let tape = Tape::new();
        let x = tape.lift(2.0).unwrap();
        let g = tape.backward(x.log2().unwrap()).unwrap();
        let expected = 1.0 / (2.0 * std::f64::consts::LN_2);
        assert!((g.wrt(x) - expected).abs() < 1e-15);
    }

    #[test]
    fn backward_constant_over_variable() {
        let tape = Tape::new();
        let x = tape.lift(2.0).unwrap();
        let r = 3.0 / x;
        assert_eq!(r.value(), 1.5);
        assert_eq!(tape.op_of(r), OpKind::ConstOver);
        let g = tape.backward(r).unwrap();
        assert_eq!(g.wrt(x), -0.75);
    }

    #[test]
    fn backward_across_tapes_is_rejected() {
        let t1 = Tape::new();
        let t2 = Tape::new();
        let x = t1.lift(1.0).unwrap();
        let _ = x.exp();
        let y = t2.lift(1.0).unwrap();
        assert!(matches!(t1.backward(y), Err(AdError::TapeMismatch)));
    }

    #[test]
    fn sum_reduce_partials_are_exactly_one() {
        let tape = Tape::new();
        let xs: Vec<Var> = (0..57).map(|i| tape.lift(0.1 * i as f64).unwrap()).collect();
        let total = tape.sum(&xs).unwrap();
        let g = tape.backward(total).unwrap();
        for &x in &xs {
            assert_eq!(g.wrt(x), 1.0);
        }
    }

    // Gradient of sum_i w_i*log2(w_i) at w = (0.5, 0.5). Each component is
    // log2(w) + 1/ln(2) = -1 + 1/ln(2); the finite-difference oracle below
    // re-derives it.
    #[test]
    fn entropy_term_gradient_matches_oracle() {
        let f = |w: &[f64]| -> f64 {
            let tape = Tape::new();
            let vars: Vec<Var> = w.iter().map(|&v| tape.lift(v).unwrap()).collect();
            let terms: Vec<Var> = vars.iter().map(|&v| v * v.log2().unwrap()).collect();
            tape.sum(&terms).unwrap().value()
        };
        let at = [0.5, 0.5];
        let expected = -1.0 + 1.0 / std::f64::consts::LN_2; // 0.4426950408889634

        let tape = Tape::new();
        let w: Vec<Var> = at.iter().map(|&v| tape.lift(v).unwrap()).collect();
        let terms: Vec<Var> = w.iter().map(|&v| v * v.log2().unwrap()).collect();
        let root = tape.sum(&terms).unwrap();
        let g = tape.backward(root).unwrap();

        for i in 0..2 {
            let fd = central_fd(f, &at, i, 1e-6);
            assert!((g.wrt(w[i]) - expected).abs() < 1e-12);
            assert!((g.wrt(w[i]) - fd).abs() / fd.abs().max(1.0) < 1e-9);
        }
    }

    #[test]
    fn backward_is_deterministic() {
        let run = || -> (f64, Vec<f64>) {
            let tape = Tape::new();
            let xs: Vec<Var> = (1..20)
                .map(|i| tape.lift(0.37 * i as f64).unwrap())
                .collect();
            let mut acc = tape.lift(0.0).unwrap();
            for (i, &x) in xs.iter().enumerate() {
                let t = if i % 3 == 0 {
                    x.exp() * 0.001
                } else if i % 3 == 1 {
                    (x + 1.0).ln().unwrap() * x
                } else {
                    x.square() / (x + 2.0)
                };
                acc = acc + t;
            }
            let g = tape.backward(acc).unwrap();
            (acc.value(), xs.iter().map(|&x| g.wrt(x)).collect())
        };
        let (v1, g1) = run();
        let (v2, g2) = run();
        assert!(v1.to_bits() == v2.to_bits());
        assert!(g1
            .iter()
            .zip(&g2)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn clear_keeps_capacity_and_empties_tape() {
        let tape = Tape::with_capacity(128);
        let x = tape.lift(1.0).unwrap();
        let _ = x.exp() + x;
        assert_eq!(tape.len(), 3);
        tape.clear();
        assert!(tape.is_empty());
        let y = tape.lift(2.0).unwrap();
        assert_eq!(tape.len(), 1);
        assert_eq!(y.value(), 2.0);
    }

    #[test]
    fn log_sum_exp_handles_widely_spread_inputs() {
        let tape = Tape::new();
        let xs = [
            tape.lift(-1000.0).unwrap(),
            tape.lift(-1001.5).unwrap(),
            tape.lift(-999.25).unwrap(),
        ];
        let l = log_sum_exp(&tape, &xs).unwrap();
        let plain = {
            let m: f64 = -999.25;
            m + ((-1000.0f64 - m).exp() + (-1001.5f64 - m).exp() + 1.0).ln()
        };
        assert!((l.value() - plain).abs() < 1e-12);
        assert!(l.value().is_finite());
        // Gradients form a softmax and sum to one.
        let g = tape.backward(l).unwrap();
        let total: f64 = xs.iter().map(|&x| g.wrt(x)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    /// Composite function exercising every operation kind; checked against
    /// central differences over a spread of magnitudes.
    fn composite<'t>(_tape: &'t Tape, x: &[Var<'t>; 3]) -> Var<'t> {
        let [a, b, c] = *x;
        let z = ComplexVar { re: a, im: b };
        let t1 = z.magnitude_squared().sqrt().unwrap();
        // The exp argument is bounded in magnitude by construction.
        let t2 = ((a - b) / (a.square() + b.square() + c.square() + 1.0).sqrt().unwrap())
            .exp()
            * 0.25;
        let t3 = (t1 + t2 + 1e-4).ln().unwrap();
        let t4 = 2.5 * a + (3.0 - b) + (-c) * 0.5;
        t3 * t4 + (t1 + 2.0).log2().unwrap()
    }

    #[test]
    fn composite_gradients_match_central_differences() {
        // Magnitudes from 1e-3 to 1e3 as representative leaf values.
        let cases: [[f64; 3]; 5] = [
            [0.001, 0.002, 0.004],
            [0.5, 0.25, 1.5],
            [3.0, 2.0, 1.0],
            [150.0, 30.0, 8.0],
            [1000.0, 0.001, 5.0],
        ];
        for at in cases {
            let f = |v: &[f64]| -> f64 {
                let tape = Tape::new();
                let x = [
                    tape.lift(v[0]).unwrap(),
                    tape.lift(v[1]).unwrap(),
                    tape.lift(v[2]).unwrap(),
                ];
                composite(&tape, &x).value()
            };
            let tape = Tape::new();
            let x = [
                tape.lift(at[0]).unwrap(),
                tape.lift(at[1]).unwrap(),
                tape.lift(at[2]).unwrap(),
            ];
            let root = composite(&tape, &x);
            let g = tape.backward(root).unwrap();
            for i in 0..3 {
                let h = 1e-6 * at[i].abs().max(1.0);
                let fd = central_fd(f, &at, i, h);
                let err = (g.wrt(x[i]) - fd).abs() / fd.abs().max(1.0);
                assert!(
                    err <= 1e-6,
                    "component {i} at {at:?}: ad={} fd={fd} err={err}",
                    g.wrt(x[i])
                );
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn gradients_match_fd_on_random_inputs(
            a in 1e-3f64..10.0,
            b in 1e-3f64..10.0,
            c in 1e-3f64..10.0,
        ) {
            let at = [a, b, c];
            let f = |v: &[f64]| -> f64 {
                let tape = Tape::new();
                let x = [
                    tape.lift(v[0]).unwrap(),
                    tape.lift(v[1]).unwrap(),
                    tape.lift(v[2]).unwrap(),
                ];
                composite(&tape, &x).value()
            };
            let tape = Tape::new();
            let x = [
                tape.lift(a).unwrap(),
                tape.lift(b).unwrap(),
                tape.lift(c).unwrap(),
            ];
            let root = composite(&tape, &x);
            let g = tape.backward(root).unwrap();
            for i in 0..3 {
                let fd = central_fd(f, &at, i, 1e-6 * at[i].max(1.0));
                let err = (g.wrt(x[i]) - fd).abs() / fd.abs().max(1.0);
                proptest::prop_assert!(err <= 1e-6);
            }
        }
    }
}
