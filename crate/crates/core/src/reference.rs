//! Reference Gaussian mixture, hole regions and the hole visiting order.
//!
//! Hole indices are zero-based throughout the library; exported artifacts
//! number holes from 1.

use crate::error::{Error, Result};
use crate::field::{CellMask, Cov2, GridSpec, Point, ScalarField};

/// Tolerance on the sum of mixture weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Default Mahalanobis radius of a hole (about 98.9% of component mass).
pub const DEFAULT_KAPPA: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Point,
    pub cov: Cov2,
}

impl MixtureComponent {
    pub fn new(weight: f64, mean: Point, cov: Cov2) -> Self {
        Self { weight, mean, cov }
    }
}

/// Weighted Gaussian components together with their grid-sampled density.
#[derive(Debug, Clone)]
pub struct ReferenceMixture {
    components: Vec<MixtureComponent>,
    rho_star: ScalarField,
}

impl ReferenceMixture {
    /// Validates the weights and samples `sum_i weight_i * N(mean_i, cov_i)`.
    ///
    /// The sampled density is not renormalised; component mass truncated by
    /// the domain boundary is simply missing.
    pub fn build(components: Vec<MixtureComponent>, spec: GridSpec) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidMixture(
                "mixture weights: no components".into(),
            ));
        }
        for (i, c) in components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight < 1.0) && !(components.len() == 1 && c.weight == 1.0) {
                return Err(Error::InvalidMixture(format!(
                    "mixture weights: component {} has weight {} outside (0, 1)",
                    i + 1,
                    c.weight
                )));
            }
            if !c.mean.is_finite() {
                return Err(Error::InvalidMixture(format!(
                    "component {} has a non-finite mean",
                    i + 1
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidMixture(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }

        let mut rho_star = ScalarField::zeros(spec);
        for c in &components {
            let norm = 1.0 / (2.0 * std::f64::consts::PI * c.cov.det().sqrt());
            for (i, v) in rho_star.values_mut().iter_mut().enumerate() {
                let d = spec.center_of(i) - c.mean;
                *v += c.weight * norm * (-0.5 * c.cov.mahalanobis_sq(d)).exp();
            }
        }
        Ok(Self {
            components,
            rho_star,
        })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn rho_star(&self) -> &ScalarField {
        &self.rho_star
    }

    pub fn spec(&self) -> &GridSpec {
        self.rho_star.spec()
    }

    /// Mahalanobis-ellipse mask of every component.
    pub fn hole_masks(&self, kappa: f64) -> Result<HoleSet> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kappa must be positive (got {kappa})"
            )));
        }
        let spec = *self.spec();
        let limit = kappa * kappa;
        let holes = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| HoleRegion {
                component: i,
                kappa,
                mask: CellMask::from_fn(&spec, |_, p| c.cov.mahalanobis_sq(p - c.mean) <= limit),
            })
            .collect();
        Ok(HoleSet::new(holes, &spec))
    }

    /// Hole minimising the summed agent distance divided by its weight.
    ///
    /// Distances are summed in ascending order so the result does not depend
    /// on agent labelling. Ties go to the lowest index.
    pub fn initial_target(&self, agents: &[Point]) -> Result<usize> {
        if agents.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one agent is required".into(),
            ));
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, c) in self.components.iter().enumerate() {
            let mut d: Vec<f64> = agents.iter().map(|a| a.distance(c.mean)).collect();
            d.sort_by(f64::total_cmp);
            let score = d.iter().sum::<f64>() / c.weight;
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, i));
            }
        }
        Ok(best.map(|(_, i)| i).expect("mixture is non-empty"))
    }

    /// Greedy nearest-neighbour order over component means starting at `first`.
    pub fn build_tour(&self, first: usize) -> Result<Tour> {
        let m = self.components.len();
        if first >= m {
            return Err(Error::InvalidConfig(format!(
                "tour start {first} out of range for {m} holes"
            )));
        }
        let mut order = Vec::with_capacity(m);
        let mut visited = vec![false; m];
        let mut current = first;
        visited[first] = true;
        order.push(first);
        while order.len() < m {
            let from = self.components[current].mean;
            let next = (0..m)
                .filter(|&i| !visited[i])
                .min_by(|&a, &b| {
                    let da = from.distance_sq(self.components[a].mean);
                    let db = from.distance_sq(self.components[b].mean);
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("unvisited hole remains");
            visited[next] = true;
            order.push(next);
            current = next;
        }
        Ok(Tour { order })
    }
}

/// Cells of one component's Mahalanobis ellipse.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleRegion {
    pub component: usize,
    pub kappa: f64,
    pub mask: CellMask,
}

/// All hole regions plus the derived hole union and free region.
#[derive(Debug, Clone)]
pub struct HoleSet {
    holes: Vec<HoleRegion>,
    omega2: CellMask,
    omega1: CellMask,
}

impl HoleSet {
    fn new(holes: Vec<HoleRegion>, spec: &GridSpec) -> Self {
        let omega2 = holes
            .iter()
            .fold(CellMask::empty(spec), |acc, h| acc.union(&h.mask));
        let omega1 = omega2.complement();
        Self {
            holes,
            omega2,
            omega1,
        }
    }

    pub fn holes(&self) -> &[HoleRegion] {
        &self.holes
    }

    pub fn get(&self, i: usize) -> &HoleRegion {
        &self.holes[i]
    }

    pub fn len(&self) -> usize {
        self.holes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.holes.is_empty()
    }

    /// Union of all hole masks.
    pub fn omega2(&self) -> &CellMask {
        &self.omega2
    }

    /// Complement of the hole union.
    pub fn omega1(&self) -> &CellMask {
        &self.omega1
    }
}

/// Fixed cyclic visiting order; `order[0]` is the start hole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tour {
    order: Vec<usize>,
}

impl Tour {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn start(&self) -> usize {
        self.order[0]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Hole at tour position `pos`, wrapping around.
    pub fn hole_at(&self, pos: usize) -> usize {
        self.order[pos % self.order.len()]
    }
}

/// The four-hole mixture used in the reference experiment.
pub fn four_hole_components() -> Vec<MixtureComponent> {
    let c = |w: f64, m: [f64; 2], sxx: f64, syy: f64| {
        MixtureComponent::new(w, m.into(), Cov2::diag(sxx, syy).expect("valid covariance"))
    };
    vec![
        c(0.3, [120.0, 320.0], 25.0, 15.0),
        c(0.2, [80.0, 100.0], 15.0, 20.0),
        c(0.4, [300.0, 120.0], 20.0, 20.0),
        c(0.1, [320.0, 320.0], 10.0, 15.0),
    ]
}

/// Initial agent positions of the reference experiment.
pub fn four_hole_agents() -> Vec<Point> {
    vec![
        Point::new(180.0, 175.0),
        Point::new(200.0, 300.0),
        Point::new(300.0, 200.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_holes() -> ReferenceMixture {
        ReferenceMixture::build(four_hole_components(), GridSpec::default()).unwrap()
    }

    fn iso(w: f64, x: f64, y: f64) -> MixtureComponent {
        MixtureComponent::new(w, Point::new(x, y), Cov2::diag(20.0, 20.0).unwrap())
    }

    #[test]
    fn single_component_integrates_to_one() {
        let m = ReferenceMixture::build(
            vec![MixtureComponent::new(
                1.0,
                Point::new(200.0, 200.0),
                Cov2::diag(20.0, 20.0).unwrap(),
            )],
            GridSpec::default(),
        )
        .unwrap();
        assert!((m.rho_star().integrate(None).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn weight_sum_violation_is_rejected() {
        let err = ReferenceMixture::build(
            vec![iso(0.5, 100.0, 100.0), iso(0.6, 300.0, 300.0)],
            GridSpec::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMixture(ref s) if s.contains("mixture weights")));
    }

    #[test]
    fn four_hole_mixture_peaks_at_means() {
        let m = four_holes();
        let spec = *m.spec();
        for c in m.components() {
            let (ix, iy) = spec.cell_of(c.mean).unwrap();
            let centre = m.rho_star().get(ix, iy);
            for (ox, oy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let n = m
                    .rho_star()
                    .get((ix as i64 + ox) as usize, (iy as i64 + oy) as usize);
                assert!(n <= centre);
            }
        }
    }

    #[test]
    fn hole_contains_its_mean() {
        let m = four_holes();
        for kappa in [0.1, 1.0, 3.0] {
            let holes = m.hole_masks(kappa).unwrap();
            for (i, c) in m.components().iter().enumerate() {
                // means sit on cell corners, so test the four surrounding cells
                let idx = m.spec().cell_index_of(c.mean).unwrap();
                let centre = m.spec().center_of(idx);
                if c.cov.mahalanobis_sq(centre - c.mean) <= kappa * kappa {
                    assert!(holes.get(i).mask.contains(idx));
                }
            }
        }
        let exact =
            ReferenceMixture::build(vec![iso(1.0, 101.0, 101.0)], GridSpec::default()).unwrap();
        let idx = exact
            .spec()
            .cell_index_of(Point::new(101.0, 101.0))
            .unwrap();
        assert!(exact.hole_masks(1e-6).unwrap().get(0).mask.contains(idx));
    }

    #[test]
    fn four_holes_are_disjoint_and_partition() {
        let holes = four_holes().hole_masks(3.0).unwrap();
        for a in 0..holes.len() {
            for b in a + 1..holes.len() {
                assert!(!holes.get(a).mask.intersects(&holes.get(b).mask));
            }
        }
        assert_eq!(
            holes.omega1().count() + holes.omega2().count(),
            GridSpec::default().len()
        );
        assert!(!holes.omega1().intersects(holes.omega2()));
    }

    #[test]
    fn initial_target_weighs_distance_by_alpha() {
        let spec = GridSpec::default();
        let m = ReferenceMixture::build(vec![iso(0.2, 110.0, 100.0), iso(0.8, 130.0, 100.0)], spec)
            .unwrap();
        // distances 10 (score 50) and 30 (score 37.5)
        assert_eq!(m.initial_target(&[Point::new(100.0, 100.0)]).unwrap(), 1);
    }

    #[test]
    fn initial_target_equal_distances_pick_heaviest() {
        let m = ReferenceMixture::build(
            vec![
                iso(0.25, 100.0, 200.0),
                iso(0.5, 300.0, 200.0),
                iso(0.25, 200.0, 300.0),
            ],
            GridSpec::default(),
        )
        .unwrap();
        let p = Point::new(200.0, 200.0);
        assert_eq!(m.initial_target(&[p]).unwrap(), 1);
    }

    #[test]
    fn four_hole_initial_target_is_hole_three() {
        assert_eq!(four_holes().initial_target(&four_hole_agents()).unwrap(), 2);
    }

    #[test]
    fn tour_single_component() {
        let m = ReferenceMixture::build(vec![iso(1.0, 50.0, 50.0)], GridSpec::default()).unwrap();
        assert_eq!(m.build_tour(0).unwrap().order(), &[0]);
    }

    #[test]
    fn tour_collinear_means() {
        let m = ReferenceMixture::build(
            vec![
                iso(0.3, 0.0, 200.0),
                iso(0.3, 100.0, 200.0),
                iso(0.4, 250.0, 200.0),
            ],
            GridSpec::default(),
        )
        .unwrap();
        assert_eq!(m.build_tour(0).unwrap().order(), &[0, 1, 2]);
        assert!(m.build_tour(3).is_err());
    }

    #[test]
    fn tour_wraps() {
        let t = four_holes().build_tour(2).unwrap();
        assert_eq!(t.hole_at(0), 2);
        assert_eq!(t.hole_at(t.len()), 2);
        let mut sorted = t.order().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }
}
