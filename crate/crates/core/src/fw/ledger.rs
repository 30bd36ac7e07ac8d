use super::Domain;

/// Weights below this are dropped after each step.
pub const PRUNE_BELOW: f64 = 1e-15;

/// Convex-combination history of an iterate.
///
/// `origin_weight` carries the mass of a start point that is not an atom
/// (the zero vector for the l1 ball). The first full step with `alpha = 1`
/// wipes it out.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateLedger<A> {
    pub atoms: Vec<(f64, A)>,
    pub origin_weight: f64,
    pub k: usize,
}

impl<A: Clone> IterateLedger<A> {
    pub fn from_atom(atom: A) -> Self {
        Self { atoms: vec![(1.0, atom)], origin_weight: 0.0, k: 0 }
    }

    pub fn at_origin() -> Self {
        Self { atoms: Vec::new(), origin_weight: 1.0, k: 0 }
    }

    /// Records `x <- (1 - alpha) x + alpha s`.
    pub fn step<D: Domain<Atom = A>>(&mut self, domain: &D, alpha: f64, atom: &A) {
        let beta = 1.0 - alpha;
        self.origin_weight *= beta;
        if self.origin_weight < PRUNE_BELOW {
            self.origin_weight = 0.0;
        }
        for (w, _) in &mut self.atoms {
            *w *= beta;
        }
        self.atoms.retain(|(w, _)| *w >= PRUNE_BELOW);
        match self.atoms.iter_mut().find(|(_, a)| domain.same_atom(a, atom)) {
            Some((w, _)) => *w += alpha,
            None if alpha >= PRUNE_BELOW => self.atoms.push((alpha, atom.clone())),
            None => {}
        }
        self.k += 1;
    }

    pub fn weight_sum(&self) -> f64 {
        self.origin_weight + self.atoms.iter().map(|(w, _)| w).sum::<f64>()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|(w, _)| *w)
    }

    /// Rebuilds `sum_j w_j s_j` from scratch through the domain.
    pub fn reconstruct<D: Domain<Atom = A>>(&self, domain: &D) -> Option<D::Point> {
        let mut cum = 0.0;
        let mut point = None;
        if self.origin_weight > 0.0 {
            point = Some(domain.origin()?);
            cum = self.origin_weight;
        }
        for (w, a) in &self.atoms {
            cum += w;
            match point.as_mut() {
                None => point = Some(domain.atom_point(a)),
                Some(p) if cum > 0.0 => domain.blend(p, w / cum, a),
                Some(_) => {}
            }
        }
        point
    }

    /// Largest per-coordinate deviation between `cached` and a rebuild.
    pub fn verify<D: Domain<Atom = A>>(&self, domain: &D, cached: &D::Point) -> f64 {
        match self.reconstruct(domain) {
            Some(p) => domain.max_abs_diff(&p, cached),
            None => f64::INFINITY,
        }
    }
}
