//! Rank-1 constraint systems and the sink abstraction circuits are written against.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use ark_ff::{One, Zero};
use ark_relations::r1cs::{
    ConstraintSystemRef, LinearCombination, SynthesisError, Variable as ArkVariable,
};

use crate::field::Fr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    One,
    Input(usize),
    Witness(usize),
}

/// Sparse linear combination of variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lc(pub Vec<(Var, Fr)>);

impl Lc {
    pub fn zero() -> Self {
        Lc(Vec::new())
    }

    pub fn constant(c: Fr) -> Self {
        if c.is_zero() {
            Lc::zero()
        } else {
            Lc(vec![(Var::One, c)])
        }
    }

    pub fn from_u64(c: u64) -> Self {
        Self::constant(Fr::from(c))
    }

    pub fn var(v: Var) -> Self {
        Lc(vec![(v, Fr::one())])
    }

    pub fn add_term(&mut self, v: Var, c: Fr) {
        if !c.is_zero() {
            self.0.push((v, c));
        }
    }

    pub fn add_scaled(&mut self, other: &Lc, c: Fr) {
        if c.is_zero() {
            return;
        }
        self.0.extend(other.0.iter().map(|(v, k)| (*v, *k * c)));
    }

    pub fn scale(mut self, c: Fr) -> Self {
        if c.is_zero() {
            return Lc::zero();
        }
        for (_, k) in self.0.iter_mut() {
            *k *= c;
        }
        self
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn compact(self) -> Self {
        if self.0.len() < 2 {
            return self;
        }
        let mut map: BTreeMap<Var, Fr> = BTreeMap::new();
        for (v, c) in self.0 {
            *map.entry(v).or_insert_with(Fr::zero) += c;
        }
        Lc(map.into_iter().filter(|(_, c)| !c.is_zero()).collect())
    }
}

impl From<Var> for Lc {
    fn from(v: Var) -> Self {
        Lc::var(v)
    }
}

impl Add for Lc {
    type Output = Lc;
    fn add(mut self, rhs: Lc) -> Lc {
        self.0.extend(rhs.0);
        self
    }
}

impl Add<&Lc> for Lc {
    type Output = Lc;
    fn add(mut self, rhs: &Lc) -> Lc {
        self.0.extend_from_slice(&rhs.0);
        self
    }
}

impl Sub for Lc {
    type Output = Lc;
    fn sub(self, rhs: Lc) -> Lc {
        self + (-rhs)
    }
}

impl Sub<&Lc> for Lc {
    type Output = Lc;
    fn sub(mut self, rhs: &Lc) -> Lc {
        self.0.extend(rhs.0.iter().map(|(v, c)| (*v, -*c)));
        self
    }
}

impl Neg for Lc {
    type Output = Lc;
    fn neg(self) -> Lc {
        self.scale(-Fr::one())
    }
}

impl Mul<Fr> for Lc {
    type Output = Lc;
    fn mul(self, rhs: Fr) -> Lc {
        self.scale(rhs)
    }
}

/// Anything a circuit can be synthesized into.
pub trait ConstraintSink {
    fn alloc_input(&mut self, value: Fr) -> Var;
    fn alloc_witness(&mut self, value: Fr) -> Var;
    fn enforce(&mut self, a: Lc, b: Lc, c: Lc);
    fn value(&self, v: Var) -> Fr;

    fn eval(&self, lc: &Lc) -> Fr {
        lc.0.iter().map(|(v, c)| self.value(*v) * c).sum()
    }
}

/// In-memory constraint system with a full assignment.
#[derive(Clone, Debug, Default)]
pub struct R1cs {
    inputs: Vec<Fr>,
    witness: Vec<Fr>,
    constraints: Vec<(Lc, Lc, Lc)>,
}

impl R1cs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_witness(&self) -> usize {
        self.witness.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn inputs(&self) -> &[Fr] {
        &self.inputs
    }

    pub fn constraints(&self) -> &[(Lc, Lc, Lc)] {
        &self.constraints
    }

    /// Overwrites a public input, e.g. to test a tampered statement.
    pub fn set_input(&mut self, i: usize, value: Fr) {
        self.inputs[i] = value;
    }

    pub fn set_witness(&mut self, i: usize, value: Fr) {
        self.witness[i] = value;
    }

    /// Index of the first violated constraint, if any.
    pub fn first_unsatisfied(&self) -> Option<usize> {
        self.constraints
            .iter()
            .position(|(a, b, c)| self.eval(a) * self.eval(b) != self.eval(c))
    }

    pub fn is_satisfied(&self) -> bool {
        self.first_unsatisfied().is_none()
    }

    /// Constraint matrices with merged terms, for structural comparison.
    pub fn structure(&self) -> Vec<[Lc; 3]> {
        self.constraints
            .iter()
            .map(|(a, b, c)| [a.clone().compact(), b.clone().compact(), c.clone().compact()])
            .collect()
    }
}

impl ConstraintSink for R1cs {
    fn alloc_input(&mut self, value: Fr) -> Var {
        self.inputs.push(value);
        Var::Input(self.inputs.len() - 1)
    }

    fn alloc_witness(&mut self, value: Fr) -> Var {
        self.witness.push(value);
        Var::Witness(self.witness.len() - 1)
    }

    fn enforce(&mut self, a: Lc, b: Lc, c: Lc) {
        self.constraints.push((a, b, c));
    }

    fn value(&self, v: Var) -> Fr {
        match v {
            Var::One => Fr::one(),
            Var::Input(i) => self.inputs[i],
            Var::Witness(i) => self.witness[i],
        }
    }
}

/// Forwards synthesis into an arkworks constraint system.
pub struct ArkSink {
    cs: ConstraintSystemRef<Fr>,
    inputs: Vec<(ArkVariable, Fr)>,
    witness: Vec<(ArkVariable, Fr)>,
    error: Option<SynthesisError>,
}

impl ArkSink {
    pub fn new(cs: ConstraintSystemRef<Fr>) -> Self {
        Self { cs, inputs: Vec::new(), witness: Vec::new(), error: None }
    }

    fn ark(&self, v: Var) -> ArkVariable {
        match v {
            Var::One => ArkVariable::One,
            Var::Input(i) => self.inputs[i].0,
            Var::Witness(i) => self.witness[i].0,
        }
    }

    fn convert(&self, lc: Lc) -> LinearCombination<Fr> {
        LinearCombination(lc.0.into_iter().map(|(v, c)| (c, self.ark(v))).collect())
    }

    pub fn finish(self) -> Result<(), SynthesisError> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

impl ConstraintSink for ArkSink {
    fn alloc_input(&mut self, value: Fr) -> Var {
        let v = self.cs.new_input_variable(|| Ok(value)).unwrap_or_else(|e| {
            self.error.get_or_insert(e);
            ArkVariable::Zero
        });
        self.inputs.push((v, value));
        Var::Input(self.inputs.len() - 1)
    }

    fn alloc_witness(&mut self, value: Fr) -> Var {
        let v = self.cs.new_witness_variable(|| Ok(value)).unwrap_or_else(|e| {
            self.error.get_or_insert(e);
            ArkVariable::Zero
        });
        self.witness.push((v, value));
        Var::Witness(self.witness.len() - 1)
    }

    fn enforce(&mut self, a: Lc, b: Lc, c: Lc) {
        let (a, b, c) = (self.convert(a), self.convert(b), self.convert(c));
        if let Err(e) = self.cs.enforce_constraint(a, b, c) {
            self.error.get_or_insert(e);
        }
    }

    fn value(&self, v: Var) -> Fr {
        match v {
            Var::One => Fr::one(),
            Var::Input(i) => self.inputs[i].1,
            Var::Witness(i) => self.witness[i].1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ark_relations::r1cs::ConstraintSystem;

    #[test]
    fn evaluation_and_satisfaction() {
        let mut cs = R1cs::new();
        let x = cs.alloc_input(Fr::from(3u64));
        let y = cs.alloc_witness(Fr::from(9u64));
        cs.enforce(Lc::var(x), Lc::var(x), Lc::var(y));
        assert!(cs.is_satisfied());
        cs.set_input(0, Fr::from(4u64));
        assert_eq!(cs.first_unsatisfied(), Some(0));
    }

    #[test]
    fn compact_merges_terms() {
        let a = Lc::var(Var::Witness(1)) + Lc::var(Var::Witness(1)) - Lc::var(Var::Witness(2))
            + Lc::var(Var::Witness(2));
        let c = a.compact();
        assert_eq!(c.0, vec![(Var::Witness(1), Fr::from(2u64))]);
    }

    #[test]
    fn ark_sink_mirrors_constraints() {
        let cs = ConstraintSystem::<Fr>::new_ref();
        let mut sink = ArkSink::new(cs.clone());
        let x = sink.alloc_input(Fr::from(5u64));
        let y = sink.alloc_witness(Fr::from(25u64));
        sink.enforce(Lc::var(x), Lc::var(x), Lc::var(y));
        sink.finish().unwrap();
        assert_eq!(cs.num_constraints(), 1);
        assert!(cs.is_satisfied().unwrap());
    }
}
