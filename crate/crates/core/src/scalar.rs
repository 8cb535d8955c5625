//! Scalar abstractions shared by every numeric module.
//!
//! [`Real`] is the storage type of models, graphs and solvers (`f32` or
//! `f64`). [`Scalar`] is the arithmetic surface that user-defined function
//! bodies are written against; it is implemented for every `Real` and for
//! [`Dual`], so one body runs both on plain values and on dual numbers.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point storage type: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the literal is unrepresentable,
    /// which never happens for finite `f64` into `f32`/`f64`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn erf(self) -> Self;
}

impl Real for f64 {
    fn erf(self) -> Self {
        libm::erf(self)
    }
}

impl Real for f32 {
    fn erf(self) -> Self {
        libm::erff(self)
    }
}

/// Arithmetic available to generic user-function bodies.
pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    type Real: Real;

    fn constant(v: Self::Real) -> Self;
    /// Primal (value) part.
    fn primal(self) -> Self::Real;

    fn lit(v: f64) -> Self {
        Self::constant(Self::Real::of(v))
    }

    fn abs(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn erf(self) -> Self;
    fn powi(self, e: i32) -> Self;
    fn powf(self, e: Self::Real) -> Self;
}

macro_rules! forward_float_methods {
    ($real:ty, $get:expr, $wrap:expr) => {
        #[inline]
        fn abs(self) -> Self {
            $wrap(Float::abs($get(self)))
        }
        #[inline]
        fn exp(self) -> Self {
            $wrap(Float::exp($get(self)))
        }
        #[inline]
        fn ln(self) -> Self {
            $wrap(Float::ln($get(self)))
        }
        #[inline]
        fn sqrt(self) -> Self {
            $wrap(Float::sqrt($get(self)))
        }
        #[inline]
        fn sin(self) -> Self {
            $wrap(Float::sin($get(self)))
        }
        #[inline]
        fn cos(self) -> Self {
            $wrap(Float::cos($get(self)))
        }
        #[inline]
        fn tan(self) -> Self {
            $wrap(Float::tan($get(self)))
        }
        #[inline]
        fn erf(self) -> Self {
            $wrap(Real::erf($get(self)))
        }
        #[inline]
        fn powi(self, e: i32) -> Self {
            $wrap(Float::powi($get(self), e))
        }
        #[inline]
        fn powf(self, e: $real) -> Self {
            $wrap(Float::powf($get(self), e))
        }
    };
}

macro_rules! impl_scalar_for_float {
    ($t:ty) => {
        impl Scalar for $t {
            type Real = $t;
            #[inline]
            fn constant(v: $t) -> Self {
                v
            }
            #[inline]
            fn primal(self) -> $t {
                self
            }
            forward_float_methods!($t, |x: $t| x, |x: $t| x);
        }
    };
}

impl_scalar_for_float!(f32);
impl_scalar_for_float!(f64);

/// A plain real wrapped so that generic code over any [`Real`] can run
/// [`Scalar`] arithmetic on it.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
#[repr(transparent)]
pub struct Plain<T>(pub T);

impl<T> Plain<T> {
    /// Views a slice of reals as plain scalars.
    pub fn wrap_slice(xs: &[T]) -> &[Plain<T>] {
        // SAFETY: Plain<T> is repr(transparent) over T.
        unsafe { std::slice::from_raw_parts(xs.as_ptr() as *const Plain<T>, xs.len()) }
    }
}

macro_rules! plain_binop {
    ($tr:ident, $m:ident, $atr:ident, $am:ident, $op:tt) => {
        impl<T: Real> $tr for Plain<T> {
            type Output = Self;
            #[inline]
            fn $m(self, o: Self) -> Self {
                Plain(self.0 $op o.0)
            }
        }
        impl<T: Real> $atr for Plain<T> {
            #[inline]
            fn $am(&mut self, o: Self) {
                self.0 = self.0 $op o.0;
            }
        }
    };
}

plain_binop!(Add, add, AddAssign, add_assign, +);
plain_binop!(Sub, sub, SubAssign, sub_assign, -);
plain_binop!(Mul, mul, MulAssign, mul_assign, *);
plain_binop!(Div, div, DivAssign, div_assign, /);

impl<T: Real> Neg for Plain<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Plain(-self.0)
    }
}

impl<T: Real> Scalar for Plain<T> {
    type Real = T;
    #[inline]
    fn constant(v: T) -> Self {
        Plain(v)
    }
    #[inline]
    fn primal(self) -> T {
        self.0
    }
    forward_float_methods!(T, |x: Plain<T>| x.0, Plain);
}

/// Dual number `value + deriv·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual<T> {
    pub value: T,
    pub deriv: T,
}

impl<T: Real> Dual<T> {
    pub fn new(value: T, deriv: T) -> Self {
        Dual { value, deriv }
    }

    /// A constant: zero derivative part.
    pub fn constant(value: T) -> Self {
        Dual { value, deriv: T::zero() }
    }

    /// An independent variable seeded with unit derivative.
    pub fn variable(value: T) -> Self {
        Dual { value, deriv: T::one() }
    }

    #[inline]
    fn chain(self, value: T, slope: T) -> Self {
        Dual { value, deriv: slope * self.deriv }
    }
}

impl<T: Real> PartialOrd for Dual<T> {
    /// Orders by the value part only; branches in generic code follow the
    /// primal computation.
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual { value: self.value + o.value, deriv: self.deriv + o.deriv }
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual { value: self.value - o.value, deriv: self.deriv - o.deriv }
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual {
            value: self.value * o.value,
            deriv: self.value * o.deriv + self.deriv * o.value,
        }
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let v = self.value / o.value;
        Dual { value: v, deriv: (self.deriv - v * o.deriv) / o.value }
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual { value: -self.value, deriv: -self.deriv }
    }
}

impl<T: Real> AddAssign for Dual<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Dual<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> MulAssign for Dual<T> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Real> DivAssign for Dual<T> {
    #[inline]
    fn div_assign(&mut self, o: Self) {
        *self = *self / o;
    }
}

impl<T: Real> Scalar for Dual<T> {
    type Real = T;

    fn constant(v: T) -> Self {
        Dual::constant(v)
    }

    fn primal(self) -> T {
        self.value
    }

    fn abs(self) -> Self {
        // subgradient 0 at the kink
        let s = if self.value > T::zero() {
            T::one()
        } else if self.value < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        self.chain(self.value.abs(), s)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }

    fn ln(self) -> Self {
        self.chain(self.value.ln(), self.value.recip())
    }

    fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        self.chain(r, T::of(0.5) / r)
    }

    fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }

    fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }

    fn tan(self) -> Self {
        let t = self.value.tan();
        self.chain(t, T::one() + t * t)
    }

    fn erf(self) -> Self {
        let slope = T::of(std::f64::consts::FRAC_2_SQRT_PI) * (-self.value * self.value).exp();
        self.chain(Real::erf(self.value), slope)
    }

    fn powi(self, e: i32) -> Self {
        let slope = if e == 0 {
            T::zero()
        } else {
            T::from_i32(e).unwrap() * self.value.powi(e - 1)
        };
        self.chain(self.value.powi(e), slope)
    }

    fn powf(self, e: T) -> Self {
        let slope = if e == T::zero() { T::zero() } else { e * self.value.powf(e - T::one()) };
        self.chain(self.value.powf(e), slope)
    }
}
