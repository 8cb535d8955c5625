//! User-defined function registry.
//!
//! A function is registered either with a generic body ([`GenericFunction`]),
//! differentiated by evaluating it on dual numbers, or with a hand-coded
//! gradient callback.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::{Dual, Plain, Real, Scalar};

/// Failure inside a user function body.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum UserFnError {
    #[error("user function did not converge within {0} iterations")]
    IterationLimit(usize),
    #[error("user function domain error: {0}")]
    Domain(String),
    #[error("second-order derivatives of user-defined functions are not supported")]
    SecondOrderUnsupported,
    #[error("user function expects {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FunctionError {
    #[error("function `{0}` is already registered")]
    Duplicate(String),
    #[error("function `{0}` registered without autodiff needs a derivative callback")]
    MissingDerivative(String),
    #[error("function `{0}` must take at least one argument")]
    ZeroArity(String),
    #[error("unknown function `{0}`")]
    Unknown(String),
    #[error("function `{name}` takes {expected} arguments, called with {got}")]
    Arity { name: String, expected: usize, got: usize },
}

/// A function body written once against [`Scalar`], so it can run on plain
/// reals and on dual numbers.
///
/// ```
/// use amlkit::nlexpr::{GenericFunction, UserFnError};
/// use amlkit::scalar::Scalar;
///
/// struct Hypot;
/// impl GenericFunction for Hypot {
///     fn call<S: Scalar>(&self, a: &[S]) -> Result<S, UserFnError> {
///         Ok((a[0] * a[0] + a[1] * a[1]).sqrt())
///     }
/// }
/// ```
pub trait GenericFunction: Send + Sync + 'static {
    fn call<S: Scalar>(&self, args: &[S]) -> Result<S, UserFnError>;
}

/// Object-safe evaluation surface stored in the registry.
pub trait UserFunctionBody<T: Real>: Send + Sync {
    fn eval(&self, args: &[T]) -> Result<T, UserFnError>;
    /// Value and directional derivative along the dual parts of `args`.
    fn eval_dual(&self, args: &[Dual<T>]) -> Result<Dual<T>, UserFnError>;
    fn gradient(&self, args: &[T], out: &mut [T]) -> Result<(), UserFnError>;
}

/// Forward-mode wrapper around a [`GenericFunction`]. Gradients cost one
/// dual evaluation per argument.
pub struct Autodiff<F>(pub F);

impl<T: Real, F: GenericFunction> UserFunctionBody<T> for Autodiff<F> {
    fn eval(&self, args: &[T]) -> Result<T, UserFnError> {
        self.0.call(Plain::wrap_slice(args)).map(|p| p.0)
    }

    fn eval_dual(&self, args: &[Dual<T>]) -> Result<Dual<T>, UserFnError> {
        self.0.call(args)
    }

    fn gradient(&self, args: &[T], out: &mut [T]) -> Result<(), UserFnError> {
        let mut seeded: Vec<Dual<T>> = args.iter().map(|&a| Dual::constant(a)).collect();
        for i in 0..args.len() {
            seeded[i].deriv = T::one();
            out[i] = self.0.call(&seeded)?.deriv;
            seeded[i].deriv = T::zero();
        }
        Ok(())
    }
}

type ValueFn<T> = dyn Fn(&[T]) -> T + Send + Sync;
type GradFn<T> = dyn Fn(&[T], &mut [T]) + Send + Sync;

/// A function with a user-supplied gradient callback.
pub struct HandCoded<T> {
    value: Box<ValueFn<T>>,
    grad: Box<GradFn<T>>,
}

impl<T: Real> UserFunctionBody<T> for HandCoded<T> {
    fn eval(&self, args: &[T]) -> Result<T, UserFnError> {
        Ok((self.value)(args))
    }

    fn eval_dual(&self, args: &[Dual<T>]) -> Result<Dual<T>, UserFnError> {
        let primal: Vec<T> = args.iter().map(|a| a.value).collect();
        let mut g = vec![T::zero(); args.len()];
        (self.grad)(&primal, &mut g);
        let deriv = g.iter().zip(args).fold(T::zero(), |acc, (&gi, a)| acc + gi * a.deriv);
        Ok(Dual::new((self.value)(&primal), deriv))
    }

    fn gradient(&self, args: &[T], out: &mut [T]) -> Result<(), UserFnError> {
        (self.grad)(args, out);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FnId(pub(crate) usize);

impl FnId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone)]
pub struct UserFunction<T> {
    pub name: String,
    pub arity: usize,
    pub(crate) body: Arc<dyn UserFunctionBody<T>>,
    pub autodiff: bool,
}

impl<T> fmt::Debug for UserFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserFunction")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("autodiff", &self.autodiff)
            .finish()
    }
}

impl<T: Real> UserFunction<T> {
    pub fn body(&self) -> &dyn UserFunctionBody<T> {
        self.body.as_ref()
    }
}

#[derive(Clone, Debug)]
pub struct FunctionRegistry<T> {
    functions: Vec<UserFunction<T>>,
    by_name: HashMap<String, FnId>,
}

impl<T: Real> Default for FunctionRegistry<T> {
    fn default() -> Self {
        FunctionRegistry { functions: Vec::new(), by_name: HashMap::new() }
    }
}

impl<T: Real> FunctionRegistry<T> {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(
        &mut self,
        name: &str,
        arity: usize,
        autodiff: bool,
        body: Arc<dyn UserFunctionBody<T>>,
    ) -> Result<FnId, FunctionError> {
        if self.by_name.contains_key(name) {
            return Err(FunctionError::Duplicate(name.to_string()));
        }
        if arity == 0 {
            return Err(FunctionError::ZeroArity(name.to_string()));
        }
        let id = FnId(self.functions.len());
        self.functions.push(UserFunction { name: name.to_string(), arity, body, autodiff });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// Registers a generic body; derivatives come from dual-number evaluation.
    pub fn register_autodiff<F: GenericFunction>(
        &mut self,
        name: &str,
        arity: usize,
        f: F,
    ) -> Result<FnId, FunctionError> {
        self.insert(name, arity, true, Arc::new(Autodiff(f)))
    }

    /// Registers a plain body with a hand-coded gradient. A `None` gradient is
    /// rejected.
    pub fn register_with_gradient<F, G>(
        &mut self,
        name: &str,
        arity: usize,
        value: F,
        gradient: Option<G>,
    ) -> Result<FnId, FunctionError>
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
        G: Fn(&[T], &mut [T]) + Send + Sync + 'static,
    {
        let grad = gradient.ok_or_else(|| FunctionError::MissingDerivative(name.to_string()))?;
        self.insert(name, arity, false, Arc::new(HandCoded { value: Box::new(value), grad: Box::new(grad) }))
    }

    pub fn lookup(&self, name: &str) -> Option<FnId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: FnId) -> &UserFunction<T> {
        &self.functions[id.0]
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Resolves `name` and checks the call arity.
    pub fn resolve(&self, name: &str, nargs: usize) -> Result<FnId, FunctionError> {
        let id = self.lookup(name).ok_or_else(|| FunctionError::Unknown(name.to_string()))?;
        let expected = self.functions[id.0].arity;
        if expected != nargs {
            return Err(FunctionError::Arity { name: name.to_string(), expected, got: nargs });
        }
        Ok(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Square;
    impl GenericFunction for Square {
        fn call<S: Scalar>(&self, a: &[S]) -> Result<S, UserFnError> {
            Ok(a[0] * a[0])
        }
    }

    #[test]
    fn duplicate_name_rejected() {
        let mut r = FunctionRegistry::<f64>::new();
        r.register_autodiff("sq", 1, Square).unwrap();
        assert_eq!(r.register_autodiff("sq", 1, Square), Err(FunctionError::Duplicate("sq".into())));
    }

    #[test]
    fn hand_coded_needs_gradient() {
        let mut r = FunctionRegistry::<f64>::new();
        let none: Option<fn(&[f64], &mut [f64])> = None;
        assert!(matches!(
            r.register_with_gradient("f", 2, |a: &[f64]| a[0] * a[1], none),
            Err(FunctionError::MissingDerivative(_))
        ));
        let id = r
            .register_with_gradient(
                "f",
                2,
                |a: &[f64]| a[0] * a[1],
                Some(|a: &[f64], g: &mut [f64]| {
                    g[0] = a[1];
                    g[1] = a[0];
                }),
            )
            .unwrap();
        let mut g = [0.0; 2];
        r.get(id).body().gradient(&[3.0, 4.0], &mut g).unwrap();
        assert_eq!(g, [4.0, 3.0]);
    }

    #[test]
    fn autodiff_gradient_and_dual_agree() {
        let mut r = FunctionRegistry::<f64>::new();
        let id = r.register_autodiff("sq", 1, Square).unwrap();
        let body = r.get(id).body();
        let mut g = [0.0];
        body.gradient(&[3.0], &mut g).unwrap();
        assert_eq!(g[0], 6.0);
        assert_eq!(body.eval_dual(&[Dual::new(3.0, 2.0)]).unwrap(), Dual::new(9.0, 12.0));
    }

    #[test]
    fn resolve_checks_arity() {
        let mut r = FunctionRegistry::<f64>::new();
        r.register_autodiff("sq", 1, Square).unwrap();
        assert!(matches!(r.resolve("sq", 2), Err(FunctionError::Arity { .. })));
        assert!(matches!(r.resolve("nope", 1), Err(FunctionError::Unknown(_))));
    }
}
