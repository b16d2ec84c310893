//! Exact brute-force computations on tiny discrete instances.
//!
//! Everything here is deterministic and generator-free: data likelihoods,
//! per-layer bound terms, optimal tabular layers, appended-layer partial
//! sums, prior-entropy gaps, ensemble partition functions and normalized
//! ensemble distributions, all by explicit enumeration with compensated
//! summation. The Monte Carlo estimators elsewhere in the crate are tested
//! against these routines.

use ndarray::{Array1, Array2, ArrayView1};

use crate::cascade::CascadeModel;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metamodel::MetaModel;
use crate::models::tabular::TabularModel;
use crate::multiplicative::{ComponentModel, MultiplicativeEnsemble};
use crate::numerics::{log_sum_exp, softplus, CompensatedSum};
use crate::space::Space;

/// Joint state budget for exact enumeration.
pub const MAX_JOINT_STATES: u128 = 1 << 22;

fn discrete_states(space: Space) -> Result<usize> {
    space
        .state_count()
        .filter(|&c| c <= MAX_JOINT_STATES)
        .map(|c| c as usize)
        .ok_or_else(|| match space.state_count() {
            Some(c) => Error::SizeTooLarge {
                states: c,
                cap: MAX_JOINT_STATES,
            },
            None => Error::Unsupported("exact enumeration needs discrete spaces".into()),
        })
}

/// A chain whose every variable space is discrete and small enough to
/// enumerate jointly.
pub struct EnumerableCascade<'a> {
    cascade: &'a CascadeModel,
    /// State counts for levels 0 (visible) .. k (top hidden).
    level_states: Vec<usize>,
}

/// Whether a chain qualifies for exact enumeration.
pub fn is_enumerable(cascade: &CascadeModel) -> bool {
    EnumerableCascade::new(cascade).is_ok()
}

impl<'a> EnumerableCascade<'a> {
    pub fn new(cascade: &'a CascadeModel) -> Result<Self> {
        let mut level_states = vec![discrete_states(cascade.visible_space())?];
        let mut joint: u128 = level_states[0] as u128;
        for m in cascade.models() {
            let s = discrete_states(m.hidden_space())?;
            joint = joint.saturating_mul(s as u128);
            if joint > MAX_JOINT_STATES {
                return Err(Error::SizeTooLarge {
                    states: joint,
                    cap: MAX_JOINT_STATES,
                });
            }
            level_states.push(s);
        }
        Ok(EnumerableCascade {
            cascade,
            level_states,
        })
    }

    pub fn cascade(&self) -> &CascadeModel {
        self.cascade
    }

    pub fn level_states(&self) -> &[usize] {
        &self.level_states
    }

    fn space_at(&self, level: usize) -> Space {
        if level == 0 {
            self.cascade.visible_space()
        } else {
            self.cascade.models()[level - 1].hidden_space()
        }
    }

    /// Backward messages b_i(h_i) = log sum over everything above level i of
    /// the top-down factors; b_{k-1} is the top model's visible marginal.
    fn backward_messages(&self) -> Result<Vec<Vec<f64>>> {
        let k = self.cascade.len();
        let models = self.cascade.models();
        // b[level] covers level in 1..=k-1 (for k == 1 there are none).
        let mut messages: Vec<Vec<f64>> = Vec::new();
        if k == 1 {
            return Ok(messages);
        }
        let top = &models[k - 1];
        let top_space = self.space_at(k - 1);
        let mut b: Vec<f64> = (0..self.level_states[k - 1])
            .map(|s| {
                top.log_marginal_visible_one(
                    top_space.state_point(s).view(),
                    1,
                    &mut crate::rng::seeded(0),
                )
                .map(|e| e.value)
            })
            .collect::<Result<_>>()?;
        messages.push(b.clone());
        for i in (1..k - 1).rev() {
            let model = &models[i]; // m_{i+1} bridging level i -> i+1
            let lower_space = self.space_at(i);
            let upper_space = self.space_at(i + 1);
            let mut next = Vec::with_capacity(self.level_states[i]);
            for lo in 0..self.level_states[i] {
                let lo_point = lower_space.state_point(lo);
                let mut terms = Vec::with_capacity(self.level_states[i + 1]);
                for hi in 0..self.level_states[i + 1] {
                    let hi_point = upper_space.state_point(hi);
                    terms.push(
                        exact_conditional_visible_log(model, lo_point.view(), hi_point.view())?
                            + b[hi],
                    );
                }
                next.push(log_sum_exp(&terms));
            }
            messages.push(next.clone());
            b = next;
        }
        messages.reverse(); // messages[0] is b_1, .., messages[k-2] is b_{k-1}
        Ok(messages)
    }

    /// Exact log p(x) via the backward recursion.
    pub fn log_marginal(&self, x: ArrayView1<f64>) -> Result<f64> {
        let k = self.cascade.len();
        let models = self.cascade.models();
        if k == 1 {
            return models[0]
                .log_marginal_visible_one(x, 1, &mut crate::rng::seeded(0))
                .map(|e| e.value);
        }
        let messages = self.backward_messages()?;
        let b1 = &messages[0];
        let h1_space = self.space_at(1);
        let mut terms = Vec::with_capacity(self.level_states[1]);
        for h1 in 0..self.level_states[1] {
            let h1_point = h1_space.state_point(h1);
            terms.push(exact_conditional_visible_log(&models[0], x, h1_point.view())? + b1[h1]);
        }
        Ok(log_sum_exp(&terms))
    }

    /// Exact log p(x) by enumerating the full joint hidden product; only for
    /// checking the recursion against a second enumeration order.
    pub fn log_marginal_bruteforce(&self, x: ArrayView1<f64>) -> Result<f64> {
        let k = self.cascade.len();
        let models = self.cascade.models();
        let hidden_counts = &self.level_states[1..];
        let total: usize = hidden_counts.iter().product();
        let mut terms = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rest = flat;
            let mut states = Vec::with_capacity(k);
            for &c in hidden_counts {
                states.push(rest % c);
                rest /= c;
            }
            let mut acc = 0.0;
            // Top joint factor m_k(h_{k-1}, h_k); h_0 = x.
            let top_lower = if k == 1 {
                x.to_owned()
            } else {
                self.space_at(k - 1).state_point(states[k - 2])
            };
            let top_upper = self.space_at(k).state_point(states[k - 1]);
            acc += exact_joint_log(&models[k - 1], top_lower.view(), top_upper.view())?;
            for i in (0..k - 1).rev() {
                let lower = if i == 0 {
                    x.to_owned()
                } else {
                    self.space_at(i).state_point(states[i - 1])
                };
                let upper = self.space_at(i + 1).state_point(states[i]);
                acc += exact_conditional_visible_log(&models[i], lower.view(), upper.view())?;
            }
            terms.push(acc);
        }
        Ok(log_sum_exp(&terms))
    }

    /// Exact E_D[log p(x)].
    pub fn data_loglik(&self, data: &Dataset) -> Result<f64> {
        let w = data.probability_weights();
        let mut acc = CompensatedSum::new();
        for i in 0..data.n() {
            acc.add(w[i] * self.log_marginal(data.point(i))?);
        }
        Ok(acc.value())
    }

    /// Exact posterior marginals q(h_level | x) for level = 1..=depth.
    fn posterior_marginals(&self, x: ArrayView1<f64>, depth: usize) -> Result<Vec<Vec<f64>>> {
        let models = self.cascade.models();
        let mut out = Vec::with_capacity(depth);
        let mut current: Vec<f64> = vec![1.0];
        let mut current_points: Vec<Array1<f64>> = vec![x.to_owned()];
        for level in 1..=depth {
            let model = &models[level - 1];
            let upper_space = self.space_at(level);
            let n_upper = self.level_states[level];
            let mut next = vec![0.0f64; n_upper];
            let mut sums: Vec<CompensatedSum> = vec![CompensatedSum::new(); n_upper];
            for (lo_idx, lo_point) in current_points.iter().enumerate() {
                let mass = current[lo_idx];
                if mass == 0.0 {
                    continue;
                }
                for hi in 0..n_upper {
                    let hi_point = upper_space.state_point(hi);
                    let lp = exact_posterior_log(model, hi_point.view(), lo_point.view())?;
                    sums[hi].add(mass * lp.exp());
                }
            }
            for hi in 0..n_upper {
                next[hi] = sums[hi].value();
            }
            out.push(next.clone());
            current = next;
            current_points = (0..n_upper).map(|s| upper_space.state_point(s)).collect();
        }
        Ok(out)
    }

    /// Exact per-layer bound terms L_1..L_k.
    pub fn bound_terms(&self, data: &Dataset) -> Result<Vec<f64>> {
        let k = self.cascade.len();
        let models = self.cascade.models();
        let w = data.probability_weights();
        let mut terms: Vec<CompensatedSum> = vec![CompensatedSum::new(); k];
        // Precompute per-level log marginals of each state.
        let mut up_logs: Vec<Vec<f64>> = Vec::with_capacity(k - 1);
        let mut down_logs: Vec<Vec<f64>> = Vec::with_capacity(k - 1);
        for level in 1..k {
            let space = self.space_at(level);
            let n_states = self.level_states[level];
            let mut up = Vec::with_capacity(n_states);
            let mut down = Vec::with_capacity(n_states);
            for s in 0..n_states {
                let p = space.state_point(s);
                up.push(
                    models[level]
                        .log_marginal_visible_one(p.view(), 1, &mut crate::rng::seeded(0))?
                        .value,
                );
                down.push(models[level - 1].log_marginal_hidden_one(p.view())?.value);
            }
            up_logs.push(up);
            down_logs.push(down);
        }
        for i in 0..data.n() {
            let x = data.point(i);
            terms[0].add(
                w[i] * models[0]
                    .log_marginal_visible_one(x, 1, &mut crate::rng::seeded(0))?
                    .value,
            );
            if k > 1 {
                let qs = self.posterior_marginals(x, k - 1)?;
                for level in 1..k {
                    let q = &qs[level - 1];
                    let mut acc = CompensatedSum::new();
                    for (s, &mass) in q.iter().enumerate() {
                        if mass > 0.0 {
                            acc.add(mass * (up_logs[level - 1][s] - down_logs[level - 1][s]));
                        }
                    }
                    terms[level].add(w[i] * acc.value());
                }
            }
        }
        Ok(terms.into_iter().map(|t| t.value()).collect())
    }

    /// Aggregate posterior marginal of the top hidden variable under the
    /// data: sum_x p_D(x) q(h_k | x).
    pub fn aggregate_top_marginal(&self, data: &Dataset) -> Result<Array1<f64>> {
        let k = self.cascade.len();
        let w = data.probability_weights();
        let n_states = self.level_states[k];
        let mut sums: Vec<CompensatedSum> = vec![CompensatedSum::new(); n_states];
        for i in 0..data.n() {
            let qs = self.posterior_marginals(data.point(i), k)?;
            let q_top = &qs[k - 1];
            for s in 0..n_states {
                sums[s].add(w[i] * q_top[s]);
            }
        }
        Ok(Array1::from_iter(sums.into_iter().map(|s| s.value())))
    }

    /// Exact prior-entropy gap of the top model:
    /// E_D E_q[log m_k(h_k)] - E_{m_k(h_k)}[log m_k(h_k)].
    pub fn convergence_gap(&self, data: &Dataset) -> Result<f64> {
        let k = self.cascade.len();
        let top = &self.cascade.models()[k - 1];
        let space = self.space_at(k);
        let n_states = self.level_states[k];
        let log_prior: Vec<f64> = (0..n_states)
            .map(|s| top.log_marginal_hidden_one(space.state_point(s).view()).map(|e| e.value))
            .collect::<Result<_>>()?;
        let agg = self.aggregate_top_marginal(data)?;
        let mut first = CompensatedSum::new();
        let mut second = CompensatedSum::new();
        for s in 0..n_states {
            if agg[s] > 0.0 {
                first.add(agg[s] * log_prior[s]);
            }
            let p = log_prior[s].exp();
            if p > 0.0 {
                second.add(p * log_prior[s]);
            }
        }
        Ok(first.value() - second.value())
    }
}

/// Exact log p(v, h) of one model.
pub fn exact_joint_log(model: &MetaModel, v: ArrayView1<f64>, h: ArrayView1<f64>) -> Result<f64> {
    match model {
        MetaModel::Rbm(r) => {
            let p = &r.params;
            let mut acc = p.b_visible.dot(&v) + p.c_hidden.dot(&h);
            for i in 0..p.v() {
                for j in 0..p.h() {
                    acc += v[i] * p.w[[i, j]] * h[j];
                }
            }
            Ok(acc - r.log_partition()?)
        }
        MetaModel::Tabular(t) => {
            let vi = t.visible_space().state_index(v)?;
            let hi = t.hidden_space().state_index(h)?;
            Ok(t.joint[[vi, hi]].ln())
        }
        _ => Err(Error::Unsupported(
            "exact joint only for discrete families".into(),
        )),
    }
}

/// Exact log m(v | h).
pub fn exact_conditional_visible_log(
    model: &MetaModel,
    v: ArrayView1<f64>,
    h: ArrayView1<f64>,
) -> Result<f64> {
    match model {
        MetaModel::Rbm(r) => {
            let p = &r.params;
            let mut acc = 0.0;
            for i in 0..p.v() {
                let a = p.b_visible[i] + p.w.row(i).dot(&h);
                acc += v[i] * a - softplus(a);
            }
            Ok(acc)
        }
        MetaModel::Tabular(t) => {
            let vi = t.visible_space().state_index(v)?;
            let hi = t.hidden_space().state_index(h)?;
            Ok((t.joint[[vi, hi]] / t.hidden_marginal()[hi]).ln())
        }
        _ => Err(Error::Unsupported(
            "exact conditionals only for discrete families".into(),
        )),
    }
}

/// Exact log m(h | v).
pub fn exact_posterior_log(
    model: &MetaModel,
    h: ArrayView1<f64>,
    v: ArrayView1<f64>,
) -> Result<f64> {
    match model {
        MetaModel::Rbm(r) => {
            let p = &r.params;
            let mut acc = 0.0;
            for j in 0..p.h() {
                let a = p.c_hidden[j] + p.w.column(j).dot(&v);
                acc += h[j] * a - softplus(a);
            }
            Ok(acc)
        }
        MetaModel::Tabular(t) => {
            let vi = t.visible_space().state_index(v)?;
            let hi = t.hidden_space().state_index(h)?;
            Ok((t.joint[[vi, hi]] / t.visible_marginal()[vi]).ln())
        }
        _ => Err(Error::Unsupported(
            "exact posteriors only for discrete families".into(),
        )),
    }
}

/// Exact E_D[log p_k(x)] of an enumerable chain.
pub fn exact_data_loglik(cascade: &CascadeModel, data: &Dataset) -> Result<f64> {
    EnumerableCascade::new(cascade)?.data_loglik(data)
}

/// Exact per-layer bound terms of an enumerable chain.
pub fn exact_bound_terms(cascade: &CascadeModel, data: &Dataset) -> Result<Vec<f64>> {
    EnumerableCascade::new(cascade)?.bound_terms(data)
}

/// Exact log p(x) of an enumerable chain at one point.
pub fn exact_cascade_log_marginal(cascade: &CascadeModel, x: ArrayView1<f64>) -> Result<f64> {
    EnumerableCascade::new(cascade)?.log_marginal(x)
}

/// The best possible next layer: a tabular model whose visible marginal is
/// exactly the aggregate posterior of the chain below it (the empirical
/// distribution itself when there is no chain). The conditional rows tying
/// the new hidden variable to the visible one may be supplied; by default
/// they are uniform.
pub fn optimal_top_model(
    prefix: Option<&CascadeModel>,
    data: &Dataset,
    hidden: Space,
    conditional: Option<&Array2<f64>>,
) -> Result<TabularModel> {
    let (visible, marginal) = match prefix {
        None => {
            let visible = data.space();
            let n_states = discrete_states(visible)?;
            let w = data.probability_weights();
            let mut sums: Vec<CompensatedSum> = vec![CompensatedSum::new(); n_states];
            for i in 0..data.n() {
                sums[visible.state_index(data.point(i))?].add(w[i]);
            }
            (
                visible,
                Array1::from_iter(sums.into_iter().map(|s| s.value())),
            )
        }
        Some(chain) => {
            let inst = EnumerableCascade::new(chain)?;
            let marginal = inst.aggregate_top_marginal(data)?;
            (chain.top_hidden_space(), marginal)
        }
    };
    let n_vis = marginal.len();
    let n_hid = discrete_states(hidden)?;
    let mut joint = Array2::zeros((n_vis, n_hid));
    for v in 0..n_vis {
        for h in 0..n_hid {
            let c = match conditional {
                Some(rows) => rows[[v, h]],
                None => 1.0 / n_hid as f64,
            };
            joint[[v, h]] = marginal[v] * c;
        }
    }
    // Compensate any drift so the table passes its own normalization check.
    let total = crate::numerics::sum_compensated(joint.iter().cloned());
    joint.mapv_inplace(|p| p / total);
    TabularModel::new(visible, hidden, joint)
}

/// With the layer at 1-based position `k` already optimal, every partial
/// sum of the terms added by later layers must be <= 0. Returns the largest
/// partial sum max_j sum_{i=k+1..j} L_i of the full chain.
pub fn max_appended_partial_sum(
    cascade: &CascadeModel,
    data: &Dataset,
    k: usize,
) -> Result<f64> {
    let terms = exact_bound_terms(cascade, data)?;
    if k >= terms.len() {
        return Err(Error::BadParams(
            "no layers are appended after position k".into(),
        ));
    }
    let mut best = f64::NEG_INFINITY;
    let mut acc = CompensatedSum::new();
    for t in &terms[k..] {
        acc.add(*t);
        best = best.max(acc.value());
    }
    Ok(best)
}

/// Exact prior-entropy gap of an enumerable chain's top model.
pub fn exact_convergence_gap(cascade: &CascadeModel, data: &Dataset) -> Result<f64> {
    EnumerableCascade::new(cascade)?.convergence_gap(data)
}

fn component_exact_log_density(model: &ComponentModel, x: ArrayView1<f64>) -> Result<f64> {
    match model {
        ComponentModel::Meta(m) => m.exact_log_marginal_visible(x),
        ComponentModel::Cascade(c) => exact_cascade_log_marginal(c, x),
    }
}

/// Exact ln Z of an ensemble over an enumerable shared visible space.
pub fn exact_log_partition(ens: &MultiplicativeEnsemble) -> Result<f64> {
    let space = ens.visible_space();
    let n_states = discrete_states(space)?;
    let mut terms = Vec::with_capacity(n_states);
    for s in 0..n_states {
        let x = space.state_point(s);
        let mut acc = 0.0;
        for comp in &ens.components {
            acc += comp.alpha * component_exact_log_density(&comp.model, x.view())?;
        }
        terms.push(acc);
    }
    Ok(log_sum_exp(&terms))
}

/// Exact normalized distribution of an ensemble over its enumerable visible
/// space, indexed by state.
pub fn exact_ensemble_distribution(ens: &MultiplicativeEnsemble) -> Result<Array1<f64>> {
    let space = ens.visible_space();
    let n_states = discrete_states(space)?;
    let log_z = exact_log_partition(ens)?;
    let mut out = Array1::zeros(n_states);
    for s in 0..n_states {
        let x = space.state_point(s);
        let mut acc = 0.0;
        for comp in &ens.components {
            acc += comp.alpha * component_exact_log_density(&comp.model, x.view())?;
        }
        out[s] = (acc - log_z).exp();
    }
    Ok(out)
}

/// Random small discrete chains for fuzz harnesses: a mix of Boltzmann
/// machines and strictly positive tables whose joint state count stays
/// within `max_total_states`.
pub fn random_discrete_cascade(
    rng: &mut crate::rng::Prng,
    levels: usize,
    max_total_states: u128,
) -> Result<CascadeModel> {
    use rand::Rng;
    assert!(levels >= 1);
    loop {
        let mut spaces = Vec::with_capacity(levels + 1);
        spaces.push(Space::binary(rng.random_range(2..=4)));
        for _ in 0..levels {
            if rng.random::<f64>() < 0.5 {
                spaces.push(Space::binary(rng.random_range(1..=3)));
            } else {
                spaces.push(Space::categorical(rng.random_range(2..=5)));
            }
        }
        let joint: u128 = spaces
            .iter()
            .map(|s| s.state_count().unwrap())
            .product();
        if joint > max_total_states {
            continue;
        }
        let mut models: Vec<MetaModel> = Vec::with_capacity(levels);
        let mut ok = true;
        for w in spaces.windows(2) {
            let (vis, hid) = (w[0], w[1]);
            let both_binary =
                matches!(vis, Space::Binary { .. }) && matches!(hid, Space::Binary { .. });
            if both_binary && rng.random::<f64>() < 0.5 {
                let v = vis.point_dim();
                let h = hid.point_dim();
                let params = crate::models::rbm::RbmParams {
                    w: Array2::from_shape_fn((v, h), |_| (rng.random::<f64>() - 0.5) * 2.0),
                    b_visible: Array1::from_shape_fn(v, |_| (rng.random::<f64>() - 0.5) * 2.0),
                    c_hidden: Array1::from_shape_fn(h, |_| (rng.random::<f64>() - 0.5) * 2.0),
                };
                match crate::models::rbm::RbmModel::new(params) {
                    Ok(m) => models.push(m.into()),
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            } else {
                match TabularModel::random(vis, hid, rng) {
                    Ok(m) => models.push(m.into()),
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if !ok {
            continue;
        }
        return CascadeModel::new(models);
    }
}

/// A random dataset of distinct-ish rows from a discrete space.
pub fn random_discrete_dataset(
    space: Space,
    n: usize,
    rng: &mut crate::rng::Prng,
) -> Result<Dataset> {
    use rand::Rng;
    let n_states = discrete_states(space)?;
    let mut rows = Array2::zeros((n, space.point_dim()));
    for i in 0..n {
        let s = rng.random_range(0..n_states);
        rows.row_mut(i).assign(&space.state_point(s));
    }
    Dataset::new(rows, space)
}
