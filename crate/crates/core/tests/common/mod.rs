#![allow(dead_code)]

use rbsde_core::generators::{funding_generator, linear_generator, CashFlows, Generator, RateSchedule, ZeroGenerator};
use rbsde_core::{Adapted, EventTree, Rational, Scalar};

pub fn q(n: i64, d: i64) -> Rational {
    Rational::ratio(n, d)
}

/// Binomial tree with `u = 1 + up/100`, `d = 1 - down/100`.
pub fn tree<S: Scalar>(depth: usize, s0: i64, up: i64, down: i64, prob_tenths: i64) -> EventTree<S> {
    EventTree::binomial(
        S::from_int(s0),
        S::ratio(100 + up, 100),
        S::ratio(100 - down, 100),
        depth,
        S::one(),
        S::ratio(prob_tenths, 10),
    )
    .unwrap()
}

pub fn scenario_a<S: Scalar>() -> EventTree<S> {
    tree(2, 100, 20, 10, 5)
}

pub fn put<S: Scalar>(t: &EventTree<S>, strike: i64) -> Adapted<S> {
    Adapted::from_fn(t, |n| (S::from_int(strike) - t.price(n)[0].clone()).pos())
}

pub fn call<S: Scalar>(t: &EventTree<S>, strike: i64) -> Adapted<S> {
    Adapted::from_fn(t, |n| (t.price(n)[0].clone() - S::from_int(strike)).pos())
}

/// Index into a fixed menu of drivers: zero, single-rate 3%, differential 1%/6%.
pub fn generator<S: Scalar + 'static>(which: u8) -> Box<dyn Generator<S>> {
    match which % 3 {
        0 => Box::new(ZeroGenerator),
        1 => Box::new(linear_generator(S::ratio(3, 100))),
        _ => Box::new(funding_generator(RateSchedule::new(S::ratio(1, 100), S::ratio(6, 100)).unwrap())),
    }
}

pub fn flows_from<S: Scalar>(t: &EventTree<S>, vals: &[i64]) -> CashFlows<S> {
    CashFlows::new(Adapted::from_fn(t, |n| S::ratio(vals[n.0 % vals.len()], 4)))
}

pub fn adapted_from<S: Scalar>(t: &EventTree<S>, vals: &[i64]) -> Adapted<S> {
    Adapted::from_fn(t, |n| S::from_int(vals[n.0 % vals.len()]))
}
