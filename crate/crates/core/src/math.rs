//! Elementary functions through `num_traits::Float`: the platform libm with the
//! `std` feature, the pure-Rust `libm` crate otherwise.

use num_traits::Float;

pub use libm::{erfc, lgamma};

macro_rules! unary {
    ($($name:ident => $method:ident),* $(,)?) => {
        $(
            #[inline]
            pub fn $name(x: f64) -> f64 {
                Float::$method(x)
            }
        )*
    };
}

unary! {
    log => ln,
    log10 => log10,
    log1p => ln_1p,
    exp => exp,
    sqrt => sqrt,
    sin => sin,
    cos => cos,
    asin => asin,
    acos => acos,
    floor => floor,
    ceil => ceil,
    round => round,
    trunc => trunc,
    fabs => abs,
}

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    Float::powf(x, y)
}
