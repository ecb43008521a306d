//! Block-annihilation strategies, registered by name.
//!
//! The GSVD route is canonical: its parameters annihilate by construction.
//! The polar route is kept selectable because its parameter formula only
//! annihilates exactly when the polar factors commute; it reports the
//! residual it achieved and still yields a valid orthogonal reflector.

use std::collections::BTreeMap;

use crate::dense::{DenseMatrix, Diagonal};
use crate::eigen::jacobi_eigh;
use crate::error::{Error, Result};
use crate::reflector::{annihilating_reflector, polar_factor, polar_route_alpha, BlockReflector};

/// A way of building the block reflector that clears the lower block of a
/// stacked pair.
pub trait AnnihilationRoute: Send + Sync {
    fn name(&self) -> &'static str;

    fn build(&self, a11: &DenseMatrix, a21: &DenseMatrix) -> Result<RouteOutcome>;
}

pub struct RouteOutcome {
    pub reflector: BlockReflector,
    /// Human-readable remark, e.g. the polar route's achieved residual.
    pub note: Option<String>,
}

/// Canonical route: GSVD factors used directly as (U, V, α, β).
pub struct GsvdRoute;

impl AnnihilationRoute for GsvdRoute {
    fn name(&self) -> &'static str {
        "gsvd"
    }

    fn build(&self, a11: &DenseMatrix, a21: &DenseMatrix) -> Result<RouteOutcome> {
        Ok(RouteOutcome {
            reflector: annihilating_reflector(a11, a21)?,
            note: None,
        })
    }
}

/// Unitary-symmetric route: polar factors of both blocks supply U and V,
/// the candidate (α, β) comes from the closed-form parameter formula and
/// is diagonalized into the reflector's basis.
pub struct PolarRoute;

impl AnnihilationRoute for PolarRoute {
    fn name(&self) -> &'static str {
        "polar"
    }

    fn build(&self, a11: &DenseMatrix, a21: &DenseMatrix) -> Result<RouteOutcome> {
        let p11 = polar_factor(a11)?;
        let p21 = polar_factor(a21)?;
        let params = polar_route_alpha(&p11.symmetric, &p21.symmetric)?;
        // α and β share an eigenbasis; rotating U and V into it leaves a
        // reflector with diagonal parameters.
        let (w, alpha_vals) = jacobi_eigh(&params.alpha, 1e-14)?;
        let beta_vals: Vec<f64> = alpha_vals
            .values()
            .iter()
            .map(|a| (1.0 - a * a).max(0.0).sqrt())
            .collect();
        let reflector = BlockReflector::new(
            p11.unitary.matmul(&w)?,
            p21.unitary.matmul(&w)?,
            Diagonal::new(alpha_vals.values().to_vec()),
            Diagonal::new(beta_vals),
        )?;
        let scale = (a11.frobenius_sq() + a21.frobenius_sq()).sqrt();
        Ok(RouteOutcome {
            reflector,
            note: Some(format!(
                "polar route annihilation residual {:.3e} (relative {:.3e})",
                params.residual,
                params.residual / scale.max(f64::MIN_POSITIVE)
            )),
        })
    }
}

/// All known routes keyed by name.
pub fn registry() -> BTreeMap<&'static str, Box<dyn AnnihilationRoute>> {
    let mut map: BTreeMap<&'static str, Box<dyn AnnihilationRoute>> = BTreeMap::new();
    map.insert("gsvd", Box::new(GsvdRoute));
    map.insert("polar", Box::new(PolarRoute));
    map
}

pub fn lookup(name: &str) -> Result<Box<dyn AnnihilationRoute>> {
    let mut map = registry();
    map.remove(name).ok_or_else(|| {
        Error::Usage(format!(
            "unknown annihilation route `{}`; known routes: {}",
            name,
            registry().keys().copied().collect::<Vec<_>>().join(", ")
        ))
    })
}
