//! Generators selectable by name from a scenario file.

use std::collections::BTreeMap;

use rbsde_core::generators::{
    discount_generator, funding_generator, linear_generator, Generator, RateSchedule, ZeroGenerator,
};
use rbsde_core::Scalar;

use crate::num::Num;

/// Named numeric parameters. Every parameter must be consumed.
#[derive(Debug, Clone)]
pub struct Params {
    values: BTreeMap<String, Num>,
}

impl Params {
    pub fn new(values: BTreeMap<String, Num>) -> Self {
        Params { values }
    }

    pub fn take<S: Scalar>(&mut self, key: &str) -> Result<S, String> {
        let v = self.values.remove(key).ok_or_else(|| format!("missing parameter {key:?}"))?;
        v.to_scalar().map_err(|e| format!("parameter {key:?}: {e}"))
    }

    pub fn take_or<S: Scalar>(&mut self, key: &str, default: S) -> Result<S, String> {
        if self.values.contains_key(key) {
            self.take(key)
        } else {
            Ok(default)
        }
    }

    /// Fails on parameters nobody asked for.
    pub fn finish(self) -> Result<(), String> {
        match self.values.keys().next() {
            Some(k) => Err(format!("unknown parameter {k:?}")),
            None => Ok(()),
        }
    }
}

pub struct BuiltGenerator<S> {
    pub generator: Box<dyn Generator<S>>,
    /// The generator is linear in `(y, z)`, so issuer and holder prices must coincide.
    pub linear: bool,
}

type Factory<S> = Box<dyn Fn(&mut Params) -> Result<BuiltGenerator<S>, String>>;

pub struct GeneratorRegistry<S> {
    factories: BTreeMap<String, Factory<S>>,
}

impl<S: Scalar + 'static> Default for GeneratorRegistry<S> {
    fn default() -> Self {
        Self::builtin()
    }
}

impl<S: Scalar + 'static> GeneratorRegistry<S> {
    pub fn empty() -> Self {
        GeneratorRegistry { factories: BTreeMap::new() }
    }

    /// `zero`, `discount {rate}`, `linear {rate}`, `funding {r_lend, r_borrow}`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("zero", |_| Ok(BuiltGenerator { generator: Box::new(ZeroGenerator), linear: true }));
        r.register("discount", |p| {
            let g = discount_generator(p.take::<S>("rate")?).map_err(|e| e.to_string())?;
            Ok(BuiltGenerator { generator: Box::new(g), linear: true })
        });
        r.register("linear", |p| {
            let rate = p.take::<S>("rate")?;
            RateSchedule::new(rate.clone(), rate.clone()).map_err(|e| e.to_string())?;
            Ok(BuiltGenerator { generator: Box::new(linear_generator(rate)), linear: true })
        });
        r.register("funding", |p| {
            let rates =
                RateSchedule::new(p.take::<S>("r_lend")?, p.take::<S>("r_borrow")?).map_err(|e| e.to_string())?;
            let linear = rates.r_lend == rates.r_borrow;
            Ok(BuiltGenerator { generator: Box::new(funding_generator(rates)), linear })
        });
        r
    }

    pub fn register(
        &mut self,
        name: &str,
        factory: impl Fn(&mut Params) -> Result<BuiltGenerator<S>, String> + 'static,
    ) {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: BTreeMap<String, Num>) -> Result<BuiltGenerator<S>, String> {
        let factory = self.factories.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.names().collect();
            format!("unknown generator {name:?} (known: {})", known.join(", "))
        })?;
        let mut params = Params::new(params);
        let built = factory(&mut params)?;
        params.finish()?;
        Ok(built)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rbsde_core::generators::FnGenerator;
    use rbsde_core::Rational;

    fn params(kv: &[(&str, &str)]) -> BTreeMap<String, Num> {
        kv.iter().map(|(k, v)| (k.to_string(), Num::from(*v))).collect()
    }

    #[test]
    fn builtins() {
        let r = GeneratorRegistry::<Rational>::builtin();
        let f = r.build("funding", params(&[("r_lend", "0.01"), ("r_borrow", "0.05")])).unwrap();
        assert!(!f.linear);
        let f = r.build("funding", params(&[("r_lend", "0.03"), ("r_borrow", "0.03")])).unwrap();
        assert!(f.linear);
        assert!(r.build("funding", params(&[("r_lend", "0.05"), ("r_borrow", "0.01")])).is_err());
        assert!(r.build("zero", params(&[("rate", "1")])).is_err());
        assert!(r.build("linear", params(&[])).is_err());
        assert!(r.build("nope", params(&[])).is_err());
    }

    #[test]
    fn custom_by_name() {
        let mut r = GeneratorRegistry::<f64>::builtin();
        r.register("scaled", |p| {
            let c: f64 = p.take("c")?;
            let g = FnGenerator::new("scaled", c.abs(), 0.0, move |_t: &f64, y: &f64, _z: &[f64], _s: &[f64]| -c * y);
            Ok(BuiltGenerator { generator: Box::new(g), linear: true })
        });
        let g = r.build("scaled", params(&[("c", "0.5")])).unwrap();
        assert_eq!(g.generator.eval(&0.0, &2.0, &[0.0], &[1.0]), -1.0);
    }
}
