//! Operators addressable by a string id such as `Hv`, `Pk:4` or
//! `POmega:l=2,i=5`, with the geometry they need built once per grid.

use std::fmt;
use std::str::FromStr;

use crate::adapted::AdaptedGrid;
use crate::bumps::{psi, psi_plus, LPFamily};
use crate::error::{invalid, Error, Result};
use crate::fields::FieldSpec;
use crate::grid::{multiplier_apply_real, ConeSpec, GridFunction2D};
use crate::tiles::DyadicInterval;
use crate::transforms::{
    class_outputs, commutator_assembly, cone_project, h_l, h_v_with, hv_symbol, l_max, main_term_on, p_k, p_omega,
    row_hilbert, HvOptions, SlopeClasses,
};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpId {
    Id,
    Scale(f64),
    Hv,
    Hl(i32),
    Pk(i32),
    PtildeK(i32),
    PtildeKAdj(i32),
    POmega(DyadicInterval),
    /// Cone projection with the given half-angle slope.
    Cone(f64),
    Main,
    Comm(i32),
    /// `sgn(xi1)`, the transform along `(1, 0)`.
    RowHilbert,
}

fn keyed(body: &str, key: &str) -> Option<String> {
    body.split(',').find_map(|kv| {
        let (k, v) = kv.split_once('=')?;
        (k.trim() == key).then(|| v.trim().to_string())
    })
}

fn num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Invalid(format!("bad {what} '{s}'")))
}

/// `Comm:3` or `Comm:l=3`.
fn scalar_arg<T: FromStr>(body: &str, key: &str) -> Result<T> {
    num(&keyed(body, key).unwrap_or_else(|| body.to_string()), key)
}

impl FromStr for OpId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, body) = s.split_once(':').unwrap_or((s, ""));
        let need = |what: &str| -> Result<()> {
            if body.is_empty() {
                return invalid(format!("operator {name} needs {what}"));
            }
            Ok(())
        };
        Ok(match name {
            "Id" => OpId::Id,
            "Scale" => {
                need("a factor")?;
                OpId::Scale(scalar_arg(body, "c")?)
            }
            "Hv" => OpId::Hv,
            "RowHilbert" => OpId::RowHilbert,
            "Main" => OpId::Main,
            "Hl" => {
                need("l")?;
                OpId::Hl(scalar_arg(body, "l")?)
            }
            "Pk" => {
                need("k")?;
                OpId::Pk(scalar_arg(body, "k")?)
            }
            "PtildeK" => {
                need("k")?;
                OpId::PtildeK(scalar_arg(body, "k")?)
            }
            "PtildeKAdj" => {
                need("k")?;
                OpId::PtildeKAdj(scalar_arg(body, "k")?)
            }
            "Comm" => {
                need("l")?;
                OpId::Comm(scalar_arg(body, "l")?)
            }
            "Cone" => OpId::Cone(if body.is_empty() { 1.0 } else { scalar_arg(body, "slope")? }),
            "POmega" => {
                let l = keyed(body, "l").ok_or_else(|| Error::Invalid("POmega needs l=..".into()))?;
                let i = keyed(body, "i").ok_or_else(|| Error::Invalid("POmega needs i=..".into()))?;
                OpId::POmega(DyadicInterval::new(num(&l, "l")?, num(&i, "i")?)?)
            }
            _ => return invalid(format!("unknown operator '{s}'")),
        })
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpId::Id => write!(f, "Id"),
            OpId::Scale(c) => write!(f, "Scale:{c}"),
            OpId::Hv => write!(f, "Hv"),
            OpId::Hl(l) => write!(f, "Hl:{l}"),
            OpId::Pk(k) => write!(f, "Pk:{k}"),
            OpId::PtildeK(k) => write!(f, "PtildeK:{k}"),
            OpId::PtildeKAdj(k) => write!(f, "PtildeKAdj:{k}"),
            OpId::POmega(w) => write!(f, "POmega:l={},i={}", w.l, w.i),
            OpId::Cone(s) => write!(f, "Cone:{s}"),
            OpId::Main => write!(f, "Main"),
            OpId::Comm(l) => write!(f, "Comm:l={l}"),
            OpId::RowHilbert => write!(f, "RowHilbert"),
        }
    }
}

/// An operator bound to a field and a grid size.
#[derive(Clone, Debug)]
pub struct Operator {
    pub id: OpId,
    pub spec: FieldSpec,
    pub n: usize,
    pub opts: HvOptions,
    adapted: Option<AdaptedGrid>,
}

impl Operator {
    pub fn new(id: OpId, spec: FieldSpec, n: usize) -> Result<Self> {
        Self::with_options(id, spec, n, HvOptions::default())
    }

    pub fn with_options(id: OpId, spec: FieldSpec, n: usize, opts: HvOptions) -> Result<Self> {
        crate::grid::check_n(n)?;
        spec.validate()?;
        let fam = LPFamily::for_grid(n);
        let check_k = |k: i32| -> Result<()> {
            if !fam.contains(k) {
                return Err(Error::Domain(format!("k = {k} outside [{}, {}] for n = {n}", fam.k_min, fam.k_max)));
            }
            Ok(())
        };
        match id {
            OpId::Pk(k) | OpId::PtildeK(k) | OpId::PtildeKAdj(k) => check_k(k)?,
            OpId::Hl(l) if l > l_max(n) => return Err(Error::Domain(format!("Hl:{l} not resolvable at n = {n}"))),
            OpId::Comm(l) if l < 0 => return invalid(format!("commutator needs l >= 0, got {l}")),
            OpId::Scale(c) if !c.is_finite() => return invalid("non-finite scale"),
            OpId::Cone(s) => {
                ConeSpec::new(s)?;
            }
            _ => {}
        }
        if matches!(id, OpId::Main | OpId::Comm(_)) && spec.u.classes().is_none() {
            return Err(Error::Unsupported(format!("{id} needs a slope function with finitely many values")));
        }
        let adapted = match id {
            OpId::PtildeK(_) | OpId::PtildeKAdj(_) | OpId::Main | OpId::Comm(_) => Some(AdaptedGrid::new(&spec, n)?),
            _ => None,
        };
        Ok(Operator { id, spec, n, opts, adapted })
    }

    pub fn parse(id: &str, spec: FieldSpec, n: usize) -> Result<Self> {
        Self::new(id.parse()?, spec, n)
    }

    fn ag(&self) -> &AdaptedGrid {
        self.adapted.as_ref().expect("adapted grid built in new")
    }

    fn check(&self, f: &GridFunction2D) -> Result<()> {
        if f.n != self.n {
            return invalid(format!("input is {}x{}, operator built for n = {}", f.n, f.n, self.n));
        }
        Ok(())
    }

    pub fn apply(&self, f: &GridFunction2D) -> Result<GridFunction2D> {
        self.check(f)?;
        match self.id {
            OpId::Id => Ok(f.clone()),
            OpId::Scale(c) => Ok(f.scale(C64::new(c, 0.0))),
            OpId::Hv => h_v_with(f, &self.spec, self.opts),
            OpId::Hl(l) => h_l(f, &self.spec, l),
            OpId::Pk(k) => p_k(f, k),
            OpId::PtildeK(k) => self.ag().apply(&[f], |s| psi(k, s)),
            OpId::PtildeKAdj(k) => self.ag().apply_adjoint(f, |s| psi(k, s)),
            OpId::POmega(w) => p_omega(f, &w),
            OpId::Cone(s) => cone_project(f, ConeSpec::new(s)?),
            OpId::Main => main_term_on(self.ag(), f, &self.spec, self.opts),
            OpId::Comm(l) => commutator_assembly(self.ag(), f, &self.spec, l, self.opts),
            OpId::RowHilbert => row_hilbert(f),
        }
    }

    /// Whether [`Operator::apply_adjoint`] is available.
    pub fn has_adjoint(&self) -> bool {
        match self.id {
            OpId::Main | OpId::Comm(_) => false,
            OpId::Hv | OpId::Hl(_) => self.spec.u.classes().is_some(),
            _ => true,
        }
    }

    pub fn apply_adjoint(&self, g: &GridFunction2D) -> Result<GridFunction2D> {
        self.check(g)?;
        if !self.has_adjoint() {
            return Err(Error::Unsupported(format!("no adjoint for {} with this field", self.id)));
        }
        match self.id {
            OpId::Hv => {
                let (lo, hi) = (self.opts.l_min, l_max(self.n));
                self.class_adjoint(g, &|a, x1, x2| hv_symbol(lo, hi, x1 + a * x2))
            }
            OpId::Hl(l) => self.class_adjoint(g, &|a, x1, x2| psi_plus(l, x1 + a * x2)),
            OpId::PtildeK(k) => self.ag().apply_adjoint(g, |s| psi(k, s)),
            OpId::PtildeKAdj(k) => self.ag().apply(&[g], |s| psi(k, s)),
            // real symbols: self-adjoint
            OpId::Scale(c) => Ok(g.scale(C64::new(c, 0.0))),
            _ => self.apply(g),
        }
    }

    /// Transpose of `x -> m(a(x), D) f (x)`: `sum_c m(a_c, D)(1_c g)` (real symbol).
    fn class_adjoint(&self, g: &GridFunction2D, symbol: &(impl Fn(f64, f64, f64) -> f64 + Sync)) -> Result<GridFunction2D> {
        let cl = SlopeClasses::new(&self.spec, self.n).expect("checked by has_adjoint");
        let mut out = GridFunction2D::zeros(self.n);
        for (c, &a) in cl.values.iter().enumerate() {
            let masked = GridFunction2D {
                n: self.n,
                values: g
                    .values
                    .iter()
                    .zip(&cl.index)
                    .map(|(&v, &ci)| if ci == c { v } else { C64::default() })
                    .collect(),
            };
            out.add_assign(&multiplier_apply_real(&masked, |x1, x2| symbol(a, x1, x2))?);
        }
        Ok(out)
    }
}

/// `H_v P_k f` for every band `k` of the grid, in order.
pub fn hv_bands(f: &GridFunction2D, spec: &FieldSpec, opts: HvOptions) -> Result<Vec<GridFunction2D>> {
    let n = f.n;
    let hi = l_max(n);
    let fam = LPFamily::for_grid(n);
    match SlopeClasses::new(spec, n) {
        Some(cl) => fam
            .iter()
            .map(|k| {
                let parts =
                    class_outputs(f, &cl, &|a, x1, x2| C64::new(hv_symbol(opts.l_min, hi, x1 + a * x2) * psi(k, x2), 0.0))?;
                Ok(GridFunction2D {
                    n,
                    values: cl.index.iter().enumerate().map(|(p, &c)| parts[c].values[p]).collect(),
                })
            })
            .collect(),
        None => fam.iter().map(|k| h_v_with(&p_k(f, k)?, spec, opts)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::USpec;
    use crate::grid::random_bandlimited;

    #[test]
    fn ids_round_trip() {
        for s in ["Id", "Scale:2", "Hv", "Hl:3", "Pk:4", "PtildeK:2", "PtildeKAdj:2", "POmega:l=2,i=5", "Cone:1", "Main", "Comm:l=3", "RowHilbert"] {
            let id: OpId = s.parse().unwrap();
            assert_eq!(id.to_string().parse::<OpId>().unwrap(), id, "{s}");
        }
        assert_eq!("Comm:3".parse::<OpId>().unwrap(), OpId::Comm(3));
        assert!("Pk".parse::<OpId>().is_err());
        assert!("Foo:1".parse::<OpId>().is_err());
        assert!("POmega:l=2".parse::<OpId>().is_err());
    }

    #[test]
    fn grid_ranges_checked() {
        let spec = FieldSpec::one_variable(USpec::constant(0.0)).unwrap();
        assert!(matches!(Operator::parse("Pk:9", spec.clone(), 64), Err(Error::Domain(_))));
        assert!(Operator::parse("Pk:4", spec.clone(), 64).is_ok());
        let smooth = FieldSpec::one_variable(USpec::Smooth(vec![[1.0, 0.3, 0.0]])).unwrap();
        assert!(matches!(Operator::parse("Main", smooth, 64), Err(Error::Unsupported(_))));
    }

    #[test]
    fn adjoints_pair() {
        let spec = FieldSpec::sinusoidal(0.05, USpec::steps(vec![0.0, 0.4], vec![0.5, -0.25])).unwrap();
        let n = 32;
        let f = random_bandlimited(1, n, ConeSpec::default(), (0, 3)).unwrap();
        let g = random_bandlimited(2, n, ConeSpec::default(), (0, 3)).unwrap();
        for id in ["Hv", "Hl:2", "Pk:2", "PtildeK:2", "PtildeKAdj:1", "POmega:l=1,i=3", "Cone", "Scale:-1.5"] {
            let op = Operator::parse(id, spec.clone(), n).unwrap();
            let lhs = op.apply(&f).unwrap().inner(&g);
            let rhs = f.inner(&op.apply_adjoint(&g).unwrap());
            assert!((lhs - rhs).norm() < 1e-10, "{id}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn band_pieces_sum_to_lp_sum() {
        let spec = FieldSpec::sinusoidal(0.05, USpec::steps(vec![0.0, 0.5], vec![0.25, -0.5])).unwrap();
        let f = random_bandlimited(4, 64, ConeSpec::default(), (0, 4)).unwrap();
        let opts = HvOptions::default();
        let mut sum = GridFunction2D::zeros(64);
        for b in hv_bands(&f, &spec, opts).unwrap() {
            sum.add_assign(&b);
        }
        let want = crate::transforms::hv_lp_sum(&f, &spec, opts).unwrap();
        assert!(sum.rel_l2(&want) < 1e-12);
    }
}
