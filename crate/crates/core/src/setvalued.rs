//! Proximal-point projections onto the convex sets of the contact and
//! friction laws, and the residual whose root encodes each law.
//!
//! Every law used in this crate is scalar: a bilateral constraint projects
//! onto the whole line, a unilateral one onto the non-negative half-line and
//! a planar or rotational friction law onto a centred interval ("disc") whose
//! radius is the admissible friction impulse.

use crate::error::{Error, Result};
use crate::scalar::{sign, Real};

/// Projection target of a prox law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexSet<T> {
    /// The whole real line (bilateral constraint).
    FullLine,
    /// `{x >= 0}` (unilateral contact).
    NonNegHalfLine,
    /// `{|x| <= radius}` (Coulomb friction disc).
    Disc(T),
}

impl<T: Real> ConvexSet<T> {
    /// Builds a friction disc, rejecting negative or non-finite radii.
    pub fn disc(radius: T) -> Result<Self> {
        if !(radius >= T::zero()) || !radius.is_finite() {
            return Err(Error::param("radius", format!("{radius:e} is not a finite value >= 0")));
        }
        Ok(ConvexSet::Disc(radius))
    }

    /// Radius of a disc, `None` for the other kinds.
    pub fn radius(&self) -> Option<T> {
        match *self {
            ConvexSet::Disc(r) => Some(r),
            _ => None,
        }
    }

    /// Membership test. The disc boundary belongs to the set.
    pub fn contains(&self, x: T) -> bool {
        match *self {
            ConvexSet::FullLine => true,
            ConvexSet::NonNegHalfLine => x >= T::zero(),
            ConvexSet::Disc(r) => x.abs() <= r,
        }
    }
}

/// Nearest point of `set` to `x`.
pub fn prox<T: Real>(x: T, set: ConvexSet<T>) -> T {
    match set {
        ConvexSet::FullLine => x,
        ConvexSet::NonNegHalfLine => x.max(T::zero()),
        ConvexSet::Disc(r) => {
            if x.abs() <= r {
                x
            } else {
                r * sign(x)
            }
        }
    }
}

/// Which case of the prox equation an iterate falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `lambda - r * gdot` lies inside the set: the constraint is closed /
    /// sticking and the residual reduces to `r * gdot`.
    Interior,
    /// The argument was projected onto the boundary of the set.
    Boundary,
}

/// Value of the prox residual together with the branch that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxResidualBranch<T> {
    pub branch: Branch,
    pub value: T,
}

/// `lambda - prox_C(lambda - r * gdot)`, split into its two cases.
pub fn prox_residual<T: Real>(
    lambda: T,
    gdot: T,
    r: T,
    set: ConvexSet<T>,
) -> Result<ProxResidualBranch<T>> {
    if !(r > T::zero()) {
        return Err(Error::param("r", format!("{r:e} must be > 0")));
    }
    let arg = lambda - r * gdot;
    if set.contains(arg) {
        Ok(ProxResidualBranch {
            branch: Branch::Interior,
            value: r * gdot,
        })
    } else {
        Ok(ProxResidualBranch {
            branch: Branch::Boundary,
            value: lambda - prox(arg, set),
        })
    }
}

/// Single-valued Coulomb law for a sliding contact: `-sign(gdot_t) * mu * |lambda_n|`.
///
/// Fails with [`Error::SetValued`] when `gdot_t == 0`.
pub fn coulomb_sliding_force<T: Real>(gdot_t: T, mu: T, lambda_n: T) -> Result<T> {
    if !(mu >= T::zero()) {
        return Err(Error::param("mu", format!("{mu:e} must be >= 0")));
    }
    if gdot_t == T::zero() {
        return Err(Error::SetValued);
    }
    Ok(-sign(gdot_t) * mu * lambda_n.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prox_examples() {
        assert_eq!(prox(5.0, ConvexSet::NonNegHalfLine), 5.0);
        assert_eq!(prox(-3.0, ConvexSet::NonNegHalfLine), 0.0);
        assert_eq!(prox(-5.0, ConvexSet::Disc(2.0)), -2.0);
        assert_eq!(prox(7.0, ConvexSet::FullLine), 7.0);
        // boundary tie is returned unchanged
        assert_eq!(prox(2.0, ConvexSet::Disc(2.0)), 2.0);
        assert_eq!(prox(-2.0, ConvexSet::Disc(2.0)), -2.0);
    }

    #[test]
    fn disc_constructor_rejects_bad_radius() {
        assert!(ConvexSet::disc(-1.0).is_err());
        assert!(ConvexSet::disc(f64::NAN).is_err());
        assert_eq!(ConvexSet::disc(0.0).unwrap().radius(), Some(0.0));
    }

    #[test]
    fn residual_examples() {
        let a = prox_residual(1.0, 0.0, 10.0, ConvexSet::Disc(2.0)).unwrap();
        assert_eq!(a.branch, Branch::Interior);
        assert_eq!(a.value, 0.0);

        let b = prox_residual(0.0, -1.0, 1.0, ConvexSet::Disc(0.5)).unwrap();
        assert_eq!(b.branch, Branch::Boundary);
        assert_eq!(b.value, -0.5);

        let c = prox_residual(3.0f64, 0.1, 10.0, ConvexSet::NonNegHalfLine).unwrap();
        assert_eq!(c.branch, Branch::Interior);
        assert!((c.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_rejects_non_positive_r() {
        assert!(prox_residual(0.0, 0.0, 0.0, ConvexSet::<f64>::FullLine).is_err());
        assert!(prox_residual(0.0, 0.0, -1.0, ConvexSet::<f64>::FullLine).is_err());
    }

    #[test]
    fn sliding_force_examples() {
        assert!((coulomb_sliding_force(2.0f64, 0.3, 10.0).unwrap() + 3.0).abs() < 1e-15);
        assert!((coulomb_sliding_force(-1.0f64, 0.3, 10.0).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(coulomb_sliding_force(1.0, 0.0, 10.0).unwrap(), 0.0);
        assert_eq!(coulomb_sliding_force(0.0, 0.3, 10.0), Err(Error::SetValued));
    }

    #[test]
    fn works_in_single_precision() {
        assert_eq!(prox(-5.0f32, ConvexSet::Disc(2.0f32)), -2.0f32);
        let b = prox_residual(0.0f32, -1.0, 1.0, ConvexSet::Disc(0.5)).unwrap();
        assert_eq!(b.value, -0.5f32);
    }

    /// Independent statement of each law by case enumeration.
    fn law_holds(lambda: f64, gdot: f64, set: ConvexSet<f64>) -> bool {
        match set {
            ConvexSet::FullLine => gdot == 0.0,
            ConvexSet::NonNegHalfLine => {
                gdot >= 0.0 && lambda >= 0.0 && (gdot == 0.0 || lambda == 0.0)
            }
            ConvexSet::Disc(rho) => {
                if gdot == 0.0 {
                    lambda.abs() <= rho
                } else {
                    lambda == -rho * gdot.signum()
                }
            }
        }
    }

    fn grid() -> Vec<f64> {
        (-12..=12).map(|i| i as f64 * 0.25).collect()
    }

    fn roots(r: f64, set: ConvexSet<f64>) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &l in &grid() {
            for &g in &grid() {
                if prox_residual(l, g, r, set).unwrap().value.abs() <= 1e-12 {
                    out.push((l, g));
                }
            }
        }
        out
    }

    #[test]
    fn residual_roots_are_exactly_the_law() {
        for set in [
            ConvexSet::FullLine,
            ConvexSet::NonNegHalfLine,
            ConvexSet::Disc(1.0),
            ConvexSet::Disc(0.0),
        ] {
            for r in [0.1, 1.0, 10.0] {
                for &l in &grid() {
                    for &g in &grid() {
                        let root = prox_residual(l, g, r, set).unwrap().value.abs() <= 1e-12;
                        assert_eq!(root, law_holds(l, g, set), "{set:?} r={r} l={l} g={g}");
                    }
                }
            }
        }
    }

    #[test]
    fn root_set_does_not_depend_on_r() {
        for set in [ConvexSet::FullLine, ConvexSet::NonNegHalfLine, ConvexSet::Disc(1.5)] {
            let base = roots(1.0, set);
            assert!(!base.is_empty());
            assert_eq!(roots(0.1, set), base);
            assert_eq!(roots(10.0, set), base);
        }
    }

    fn any_set() -> impl Strategy<Value = ConvexSet<f64>> {
        prop_oneof![
            Just(ConvexSet::FullLine),
            Just(ConvexSet::NonNegHalfLine),
            (0.0..50.0f64).prop_map(ConvexSet::Disc),
        ]
    }

    proptest! {
        #[test]
        fn prox_is_idempotent(x in -1e3..1e3f64, set in any_set()) {
            let p = prox(x, set);
            prop_assert_eq!(prox(p, set), p);
        }

        #[test]
        fn prox_is_non_expansive(x in -1e3..1e3f64, y in -1e3..1e3f64, set in any_set()) {
            prop_assert!((prox(x, set) - prox(y, set)).abs() <= (x - y).abs());
        }

        #[test]
        fn prox_lands_in_set(x in -1e3..1e3f64, set in any_set()) {
            let p = prox(x, set);
            match set {
                ConvexSet::Disc(r) => prop_assert!(p.abs() <= r * (1.0 + 1e-12)),
                _ => prop_assert!(set.contains(p)),
            }
        }

        #[test]
        fn residual_value_matches_definition(
            l in -10.0..10.0f64, g in -10.0..10.0f64, r in 0.01..100.0f64, set in any_set()
        ) {
            let res = prox_residual(l, g, r, set).unwrap();
            let direct = l - prox(l - r * g, set);
            prop_assert!((res.value - direct).abs() <= 1e-12 * (1.0 + l.abs() + (r * g).abs()));
        }
    }
}
