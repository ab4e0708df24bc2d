//! Carrying capacity, cooperation and competition kernels.
//!
//! `B` and `C` are stored for every displacement `-2L..=2L`, so `B_{x-z}`
//! is defined for all pairs of lattice sites without wraparound.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::space::PhenotypeSpace;

/// Smallest capacity value kept; Gaussian tails are clamped here.
pub const CAPACITY_FLOOR: f64 = 1e-300;

/// How to fill the carrying capacity `K` over `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CapacitySpec {
    /// `exp(-|x - center|^exponent / (2 variance))`; `exponent` defaults to 2.
    Gaussian {
        variance: f64,
        #[serde(default)]
        center: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exponent: Option<f64>,
    },
    /// `1{|x| <= radius}`, with zeros lifted to the capacity floor.
    Rectangular { radius: usize },
    Constant { value: f64 },
    /// Explicit values for `x = -L..=L`.
    Table { values: Vec<f64> },
}

/// How to fill a symmetric interaction kernel (`B` or `C`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InteractionSpec {
    /// `exp(-z² / (2 variance))`; an infinite variance gives the constant 1.
    Gaussian { variance: f64 },
    /// `b + (1 - b) 1{|z| >= m}`.
    Step { b: f64, m: usize },
    /// `1{|z| <= radius}`.
    Rectangular { radius: usize },
    Constant { value: f64 },
    /// Values for `z = 0..=2L`, extended symmetrically.
    Table { values: Vec<f64> },
}

/// Everything needed to build a [`KernelSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub half_width: usize,
    pub capacity: CapacitySpec,
    pub cooperation: InteractionSpec,
    #[serde(default = "unit_interaction")]
    pub competition: InteractionSpec,
    /// Require symmetric unimodal `K` with `K_0 = 1` and step-form `B`.
    #[serde(default)]
    pub assumption1: bool,
}

fn unit_interaction() -> InteractionSpec {
    InteractionSpec::Constant { value: 1.0 }
}

/// Parameters of a step-form cooperation kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepForm {
    pub b: f64,
    pub m: usize,
}

/// Validated kernels on a fixed lattice, with the interaction matrices
/// `S_{xz} = K_x B_{x-z} K_z` and `C_{x-z}` precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    space: PhenotypeSpace,
    capacity: Vec<f64>,
    cooperation: Vec<f64>,
    competition: Vec<f64>,
    step: Option<StepForm>,
    interaction: Vec<f64>,
    competition_matrix: Vec<f64>,
}

impl KernelSet {
    /// `capacity` over `E`; `cooperation`/`competition` over `-2L..=2L`.
    pub fn new(
        space: PhenotypeSpace,
        capacity: Vec<f64>,
        cooperation: Vec<f64>,
        competition: Vec<f64>,
    ) -> Result<Self> {
        let n = space.len();
        let span = 4 * space.half_width() + 1;
        if capacity.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: capacity.len(),
            });
        }
        for (name, v) in [("cooperation", &cooperation), ("competition", &competition)] {
            if v.len() != span {
                return Err(Error::DimensionMismatch {
                    expected: span,
                    actual: v.len(),
                });
            }
            if v.iter().any(|b| !(0.0..=1.0).contains(b)) {
                return Err(invalid(
                    if name == "cooperation" { "cooperation" } else { "competition" },
                    "values must lie in [0, 1]",
                ));
            }
            if (0..span).any(|i| v[i] != v[span - 1 - i]) {
                return Err(invalid(
                    if name == "cooperation" { "cooperation" } else { "competition" },
                    "kernel must be symmetric",
                ));
            }
        }
        if let Some(i) = capacity.iter().position(|k| !(*k > 0.0 && *k <= 1.0)) {
            return Err(invalid(
                "capacity",
                format!("K at site {} is {}, must lie in (0, 1]", space.site(i), capacity[i]),
            ));
        }
        let offset = 2 * space.half_width();
        let mut interaction = vec![0.0; n * n];
        let mut competition_matrix = vec![0.0; n * n];
        for x in 0..n {
            for z in 0..n {
                let d = x + offset - z;
                interaction[x * n + z] = capacity[x] * cooperation[d] * capacity[z];
                competition_matrix[x * n + z] = competition[d];
            }
        }
        Ok(Self {
            space,
            capacity,
            cooperation,
            competition,
            step: None,
            interaction,
            competition_matrix,
        })
    }

    /// Kernels in the form of the structural hypothesis: `K` symmetric and
    /// unimodal with `K_0 = 1`, `B_z = b + (1 - b) 1{|z| >= m}`, `C = 1 - B`.
    pub fn assumption1(space: PhenotypeSpace, capacity: Vec<f64>, b: f64, m: usize) -> Result<Self> {
        let set = Self::step_form(space, capacity, b, m)?;
        set.check_assumption1()?;
        Ok(set)
    }

    /// Step-form `B` and `C = 1 - B` with an arbitrary capacity.
    pub fn step_form(space: PhenotypeSpace, capacity: Vec<f64>, b: f64, m: usize) -> Result<Self> {
        let cooperation = InteractionSpec::Step { b, m }.fill(space)?;
        let competition = cooperation.iter().map(|v| 1.0 - v).collect();
        let mut set = Self::new(space, capacity, cooperation, competition)?;
        set.step = Some(StepForm { b, m });
        Ok(set)
    }

    /// Builds kernels from a declarative spec.
    pub fn from_spec(spec: &KernelSpec) -> Result<Self> {
        let space = PhenotypeSpace::new(spec.half_width)?;
        let capacity = spec.capacity.fill(space)?;
        let cooperation = spec.cooperation.fill(space)?;
        let competition = spec.competition.fill(space)?;
        let mut set = Self::new(space, capacity, cooperation, competition)?;
        if let InteractionSpec::Step { b, m } = spec.cooperation {
            set.step = Some(StepForm { b, m });
        }
        if spec.assumption1 {
            set.check_assumption1()?;
        }
        Ok(set)
    }

    /// Checks symmetry, unimodality, `K_0 = 1` and step-form `B`.
    pub fn check_assumption1(&self) -> Result<()> {
        let n = self.space.len();
        let l = self.space.half_width();
        let k = &self.capacity;
        if self.step.is_none() {
            return Err(Error::Hypothesis("cooperation kernel is not step-form".into()));
        }
        if k[l] != 1.0 {
            return Err(Error::Hypothesis(format!("K_0 = {} != 1", k[l])));
        }
        if (0..n).any(|i| k[i] != k[n - 1 - i]) {
            return Err(Error::Hypothesis("K is not symmetric".into()));
        }
        if (l..n - 1).any(|i| k[i + 1] > k[i]) {
            return Err(Error::Hypothesis("K is not unimodal".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn space(&self) -> PhenotypeSpace {
        self.space
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.capacity.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.capacity.is_empty()
    }

    /// `K` indexed by storage index.
    #[inline]
    pub fn capacity(&self) -> &[f64] {
        &self.capacity
    }

    /// `K_x` for phenotype `x`.
    pub fn k(&self, x: i64) -> f64 {
        self.capacity[self.space.idx(x)]
    }

    /// `B_z` for displacement `z ∈ [-2L, 2L]`.
    pub fn b(&self, z: i64) -> f64 {
        self.cooperation[(z + 2 * self.space.half_width() as i64) as usize]
    }

    /// `C_z` for displacement `z ∈ [-2L, 2L]`.
    pub fn c(&self, z: i64) -> f64 {
        self.competition[(z + 2 * self.space.half_width() as i64) as usize]
    }

    pub fn cooperation(&self) -> &[f64] {
        &self.cooperation
    }

    pub fn competition(&self) -> &[f64] {
        &self.competition
    }

    pub fn step(&self) -> Option<StepForm> {
        self.step
    }

    /// Row-major `S_{xz} = K_x B_{x-z} K_z`, so that `m = S π`.
    #[inline]
    pub fn interaction(&self) -> &[f64] {
        &self.interaction
    }

    #[inline]
    pub fn interaction_row(&self, x: usize) -> &[f64] {
        let n = self.len();
        &self.interaction[x * n..(x + 1) * n]
    }

    /// Row-major `C_{x-z}`.
    #[inline]
    pub fn competition_row(&self, x: usize) -> &[f64] {
        let n = self.len();
        &self.competition_matrix[x * n..(x + 1) * n]
    }
}

impl CapacitySpec {
    pub fn fill(&self, space: PhenotypeSpace) -> Result<Vec<f64>> {
        let values: Vec<f64> = match self {
            CapacitySpec::Gaussian {
                variance,
                center,
                exponent,
            } => {
                if !(*variance > 0.0) {
                    return Err(invalid("capacity.variance", "must be positive"));
                }
                let p = exponent.unwrap_or(2.0);
                if !(p > 0.0) {
                    return Err(invalid("capacity.exponent", "must be positive"));
                }
                space
                    .sites()
                    .map(|x| (-((x - center).abs() as f64).powf(p) / (2.0 * variance)).exp())
                    .collect()
            }
            CapacitySpec::Rectangular { radius } => space
                .sites()
                .map(|x| if x.unsigned_abs() as usize <= *radius { 1.0 } else { 0.0 })
                .collect(),
            CapacitySpec::Constant { value } => {
                if !(*value > 0.0 && *value <= 1.0) {
                    return Err(invalid("capacity.value", "must lie in (0, 1]"));
                }
                vec![*value; space.len()]
            }
            CapacitySpec::Table { values } => {
                if values.len() != space.len() {
                    return Err(invalid(
                        "capacity.values",
                        format!("expected {} values, got {}", space.len(), values.len()),
                    ));
                }
                values.clone()
            }
        };
        let mut clamped = 0;
        let values = values
            .into_iter()
            .map(|k| {
                if k < CAPACITY_FLOOR {
                    clamped += 1;
                    CAPACITY_FLOOR
                } else {
                    k
                }
            })
            .collect();
        if clamped > 0 {
            log::warn!("{clamped} capacity values clamped to {CAPACITY_FLOOR:e}");
        }
        Ok(values)
    }
}

impl InteractionSpec {
    /// Values for displacements `-2L..=2L`.
    pub fn fill(&self, space: PhenotypeSpace) -> Result<Vec<f64>> {
        let reach = 2 * space.half_width() as i64;
        let at = |z: i64| -> Result<f64> {
            Ok(match self {
                InteractionSpec::Gaussian { variance } => {
                    if !(*variance > 0.0) {
                        return Err(invalid("kernel.variance", "must be positive"));
                    }
                    if variance.is_infinite() {
                        1.0
                    } else {
                        (-((z * z) as f64) / (2.0 * variance)).exp()
                    }
                }
                InteractionSpec::Step { b, m } => {
                    if !(0.0..=1.0).contains(b) {
                        return Err(invalid("kernel.b", "must lie in [0, 1]"));
                    }
                    if *m < 1 || *m as i64 > reach {
                        return Err(invalid("kernel.m", format!("must lie in [1, {reach}]")));
                    }
                    if z.unsigned_abs() as usize >= *m {
                        1.0
                    } else {
                        *b
                    }
                }
                InteractionSpec::Rectangular { radius } => {
                    if z.unsigned_abs() as usize <= *radius {
                        1.0
                    } else {
                        0.0
                    }
                }
                InteractionSpec::Constant { value } => {
                    if !(0.0..=1.0).contains(value) {
                        return Err(invalid("kernel.value", "must lie in [0, 1]"));
                    }
                    *value
                }
                InteractionSpec::Table { values } => {
                    if values.len() != reach as usize + 1 {
                        return Err(invalid(
                            "kernel.values",
                            format!("expected {} values for z = 0..=2L", reach + 1),
                        ));
                    }
                    values[z.unsigned_abs() as usize]
                }
            })
        };
        (-reach..=reach).map(at).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_capacity_matches_closed_form() {
        // exp(-x^2/20) at x = 10 is e^-5
        let e = PhenotypeSpace::new(14).unwrap();
        let k = CapacitySpec::Gaussian {
            variance: 10.0,
            center: 0,
            exponent: None,
        }
        .fill(e)
        .unwrap();
        assert!((k[e.idx(10)] - 0.006_737_946_999_085_467).abs() < 1e-15);
        assert_eq!(k[e.idx(0)], 1.0);
    }

    #[test]
    fn step_cooperation_switches_at_m() {
        let e = PhenotypeSpace::new(14).unwrap();
        let set = KernelSet::from_spec(&KernelSpec {
            half_width: 14,
            capacity: CapacitySpec::Gaussian {
                variance: 10.0,
                center: 0,
                exponent: None,
            },
            cooperation: InteractionSpec::Step { b: 0.01, m: 10 },
            competition: unit_interaction(),
            assumption1: true,
        })
        .unwrap();
        assert_eq!(set.b(9), 0.01);
        assert_eq!(set.b(-9), 0.01);
        assert_eq!(set.b(10), 1.0);
        assert_eq!(set.b(-28), 1.0);
        assert_eq!(set.space(), e);
        assert_eq!(set.step(), Some(StepForm { b: 0.01, m: 10 }));
    }

    #[test]
    fn unit_b_collapses_step() {
        let e = PhenotypeSpace::new(3).unwrap();
        let b = InteractionSpec::Step { b: 1.0, m: 2 }.fill(e).unwrap();
        assert!(b.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn tiny_gaussian_tail_is_clamped_not_zero() {
        let e = PhenotypeSpace::new(50).unwrap();
        let k = CapacitySpec::Gaussian {
            variance: 1.0,
            center: 0,
            exponent: None,
        }
        .fill(e)
        .unwrap();
        assert!(k.iter().all(|&v| v >= CAPACITY_FLOOR));
        assert_eq!(k[0], CAPACITY_FLOOR);
    }

    #[test]
    fn invalid_ranges_name_the_field() {
        let e = PhenotypeSpace::new(3).unwrap();
        let err = InteractionSpec::Step { b: 1.5, m: 2 }.fill(e).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "kernel.b", .. }));
        let err = InteractionSpec::Step { b: 0.5, m: 7 }.fill(e).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "kernel.m", .. }));
        let err = CapacitySpec::Gaussian {
            variance: -1.0,
            center: 0,
            exponent: None,
        }
        .fill(e)
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "capacity.variance", .. }));
    }

    #[test]
    fn assumption1_rejects_bimodal_capacity() {
        let e = PhenotypeSpace::new(2).unwrap();
        let err = KernelSet::assumption1(e, vec![0.5, 0.2, 1.0, 0.2, 0.5], 0.1, 2).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
        assert!(KernelSet::assumption1(e, vec![0.2, 0.5, 1.0, 0.5, 0.2], 0.1, 2).is_ok());
    }

    #[test]
    fn asymmetric_kernel_rejected() {
        let e = PhenotypeSpace::new(1).unwrap();
        let err = KernelSet::new(e, vec![1.0; 3], vec![0.0, 0.1, 0.2, 0.3, 0.4], vec![1.0; 5]);
        assert!(err.is_err());
    }
}
