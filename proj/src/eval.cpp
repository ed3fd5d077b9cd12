#include "overlap/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace overlap {

namespace {

double logsumexp_row(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

// argmax with ties going to the smallest index
int argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  int best = 0;
  for (int j = 1; j < v.size(); ++j) {
    if (v[j] > v[best]) best = j;
  }
  return best;
}

std::vector<int> class_counts(const FeatureTable& t) {
  const int k = t.num_classes();
  if (k < 1) throw std::invalid_argument("feature table has no labels");
  std::vector<int> counts(k, 0);
  for (int l : t.labels) {
    if (l < 0) throw std::invalid_argument("negative class label");
    ++counts[l];
  }
  return counts;
}

}  // namespace

int FeatureTable::num_classes() const {
  int k = -1;
  for (int l : labels) k = std::max(k, l);
  return k + 1;
}

FeatureTable features_from_encoder(const EncoderParams& p,
                                   const LabeledSphereDataset& dataset) {
  FeatureTable t;
  t.features = encoder_forward_batch(p, dataset.points);
  t.labels = dataset.labels;
  t.ids.resize(dataset.size());
  for (int i = 0; i < dataset.size(); ++i) t.ids[i] = i;
  return t;
}

Mat class_means(const FeatureTable& t) {
  const auto counts = class_counts(t);
  for (size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw std::invalid_argument("class_means: class " + std::to_string(c) +
                                  " is empty");
    }
  }
  Mat mu = Mat::Zero(static_cast<Eigen::Index>(counts.size()), t.dim());
  for (int i = 0; i < t.size(); ++i) {
    mu.row(t.labels[i]) += t.features.row(i);
  }
  for (size_t c = 0; c < counts.size(); ++c) {
    mu.row(static_cast<Eigen::Index>(c)) /= counts[c];
  }
  return mu;
}

double mean_ce_loss(const FeatureTable& t) {
  const Mat mu = class_means(t);
  const Mat logits = t.features * mu.transpose(); // n x K
  double total = 0.0;
  for (int i = 0; i < t.size(); ++i) {
    total += logsumexp_row(logits.row(i)) - logits(i, t.labels[i]);
  }
  return total / t.size();
}

ProbeResult linear_probe(const FeatureTable& train, const FeatureTable& test,
                         const ProbeConfig& cfg) {
  if (train.dim() != test.dim()) {
    throw std::invalid_argument("linear_probe: feature dimensions differ");
  }
  const int k = train.num_classes();
  if (k < 2) {
    throw std::invalid_argument("linear_probe: training set has fewer than two classes");
  }
  {
    const auto counts = class_counts(train);
    int nonempty = 0;
    for (int c : counts) nonempty += c > 0 ? 1 : 0;
    if (nonempty < 2) {
      throw std::invalid_argument("linear_probe: degenerate training labels");
    }
  }
  for (int l : test.labels) {
    if (l < 0 || l >= k) {
      throw std::invalid_argument("linear_probe: test label outside the training label set");
    }
  }

  const int n = train.size();
  Mat w = Mat::Zero(k, train.dim());
  Mat probs(n, k);
  double ce = 0.0;
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    const Mat logits = train.features * w.transpose();
    ce = 0.0;
    for (int i = 0; i < n; ++i) {
      const double lse = logsumexp_row(logits.row(i));
      ce += lse - logits(i, train.labels[i]);
      probs.row(i) = (logits.row(i).array() - lse).exp().matrix();
    }
    ce /= n;
    for (int i = 0; i < n; ++i) probs(i, train.labels[i]) -= 1.0;
    const Mat grad = probs.transpose() * train.features / n;
    if (grad.norm() <= cfg.tol) break;
    w -= cfg.learning_rate * grad;
  }

  auto accuracy = [&w](const FeatureTable& t) {
    if (t.size() == 0) return 0.0;
    const Mat logits = t.features * w.transpose();
    int hits = 0;
    for (int i = 0; i < t.size(); ++i) {
      if (argmax_row(logits.row(i)) == t.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / t.size();
  };

  ProbeResult out;
  out.train_acc = accuracy(train);
  out.test_acc = accuracy(test);
  out.train_ce = ce;
  out.iters = it;
  out.weights = std::move(w);
  return out;
}

double conditional_variance(const FeatureTable& t) {
  const Mat mu = class_means(t); // validates nonempty classes
  double total = 0.0;
  for (int i = 0; i < t.size(); ++i) {
    total += (t.features.row(i) - mu.row(t.labels[i])).squaredNorm();
  }
  return total / t.size();
}

AlignmentErrorEstimate alignment_error(const EncoderParams& p,
                                       const LabeledSphereDataset& dataset,
                                       double r, int n_pairs, Rng& rng) {
  if (n_pairs < 1) {
    throw std::invalid_argument("alignment_error: n_pairs must be >= 1");
  }
  const int dim = dataset.ambient_dim();
  Mat xs(n_pairs, dim), xps(n_pairs, dim);
  for (int i = 0; i < n_pairs; ++i) {
    const Vec x = dataset.points.row(rng.uniform_int(dataset.size())).transpose();
    xs.row(i) = x.transpose();
    xps.row(i) = augment(x, r, rng).transpose();
  }
  const Mat za = encoder_forward_batch(p, xs);
  const Mat zp = encoder_forward_batch(p, xps);
  AlignmentErrorEstimate est;
  est.pairs = n_pairs;
  double sum = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    const double e = (za.row(i) - zp.row(i)).norm();
    est.max_eps = std::max(est.max_eps, e);
    sum += e;
  }
  est.mean_eps = sum / n_pairs;
  return est;
}

InfonceEstimate empirical_infonce(const EncoderParams& p,
                                  const LabeledSphereDataset& dataset, double r,
                                  int negatives, int n_draws, Rng& rng) {
  if (negatives < 1) {
    throw std::invalid_argument("empirical_infonce: negatives must be >= 1");
  }
  if (n_draws < 1) {
    throw std::invalid_argument("empirical_infonce: n_draws must be >= 1");
  }
  const int dim = dataset.ambient_dim();
  const int n = dataset.size();
  const int chunk = std::max(1, 16384 / negatives);

  double sum = 0.0, sumsq = 0.0;
  int done = 0;
  Mat xs(chunk, dim), xps(chunk, dim), xns(chunk * negatives, dim);
  while (done < n_draws) {
    const int c = std::min(chunk, n_draws - done);
    for (int i = 0; i < c; ++i) {
      const Vec x = dataset.points.row(rng.uniform_int(n)).transpose();
      xs.row(i) = x.transpose();
      xps.row(i) = augment(x, r, rng).transpose();
      for (int j = 0; j < negatives; ++j) {
        const Vec xm = dataset.points.row(rng.uniform_int(n)).transpose();
        xns.row(i * negatives + j) = augment(xm, r, rng).transpose();
      }
    }
    const Mat za = encoder_forward_batch(p, xs.topRows(c));
    const Mat zp = encoder_forward_batch(p, xps.topRows(c));
    const Mat zn = encoder_forward_batch(p, xns.topRows(c * negatives));
    for (int i = 0; i < c; ++i) {
      const Eigen::RowVectorXd sims =
          za.row(i) * zn.middleRows(i * negatives, negatives).transpose();
      const double l = -za.row(i).dot(zp.row(i)) + logsumexp_row(sims);
      sum += l;
      sumsq += l * l;
    }
    done += c;
  }

  InfonceEstimate est;
  est.negatives = negatives;
  est.draws = n_draws;
  est.value = sum / n_draws;
  if (n_draws > 1) {
    const double var =
        std::max(0.0, (sumsq - sum * sum / n_draws) / (n_draws - 1));
    est.std_error = std::sqrt(var / n_draws);
  }
  return est;
}

std::vector<double> lse_approximation_error(const FeatureTable& t,
                                            const std::vector<int>& m_list,
                                            int trials, Rng& rng) {
  if (trials < 1) {
    throw std::invalid_argument("lse_approximation_error: trials must be >= 1");
  }
  const int n = t.size();
  for (int m : m_list) {
    if (m < 1 || m > n) {
      throw std::invalid_argument(
          "lse_approximation_error: every M must lie in [1, n]");
    }
  }
  std::vector<double> errors(m_list.size(), 0.0);
  Vec exps(n);
  for (int trial = 0; trial < trials; ++trial) {
    const int anchor = rng.uniform_int(n);
    const Vec sims = t.features * t.features.row(anchor).transpose();
    exps = sims.array().exp().matrix();
    const double exact = std::log(exps.mean());
    for (size_t mi = 0; mi < m_list.size(); ++mi) {
      const int m = m_list[mi];
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += exps[rng.uniform_int(n)];
      errors[mi] += std::abs(std::log(s / m) - exact);
    }
  }
  for (double& e : errors) e /= trials;
  return errors;
}

BoundsReport bounds_report(const EncoderParams& p,
                           const LabeledSphereDataset& dataset, double r, int m,
                           int k, const AugmentationGraph& g, Rng& rng,
                           const BoundsOptions& opt) {
  if (g.n != dataset.size()) {
    throw std::invalid_argument("bounds_report: graph/dataset size mismatch");
  }
  if (m < 1 || k < 1) {
    throw std::invalid_argument("bounds_report: m and k must be >= 1");
  }

  const FeatureTable table = features_from_encoder(p, dataset);

  BoundsReport rep;
  rep.m = m;
  rep.k = k;
  rep.log_m_over_k = std::log(static_cast<double>(m) / k);
  rep.l_ce_mu = mean_ce_loss(table);
  rep.var_cond = conditional_variance(table);

  const InfonceEstimate est =
      empirical_infonce(p, dataset, r, m, opt.infonce_draws, rng);
  rep.l_nce = est.value;
  rep.l_nce_std_error = est.std_error;

  rep.epsilon = alignment_error(p, dataset, r, opt.eps_pairs, rng).max_eps;
  rep.diameter = intra_class_diameter(g).max_diameter;
  rep.lse_error_estimate =
      lse_approximation_error(table, {m}, opt.lse_trials, rng)[0];

  const double slack = 3.0 * rep.l_nce_std_error + rep.lse_error_estimate;
  rep.upper_slack = slack;
  rep.lower_slack = slack;

  const double lhs = rep.l_ce_mu + rep.log_m_over_k;
  const double sqrt_var = std::sqrt(rep.var_cond);
  const double upper_rhs = rep.l_nce + sqrt_var + slack;
  const double lower_rhs = rep.l_nce - sqrt_var - 0.5 * rep.var_cond - slack;
  rep.upper_margin = upper_rhs - lhs;
  rep.lower_margin = lhs - lower_rhs;
  rep.upper_holds = lhs <= upper_rhs;
  rep.lower_holds = lhs >= lower_rhs;
  if (rep.diameter) {
    rep.weak_upper_holds = lhs <= rep.l_nce + *rep.diameter * rep.epsilon + slack;
  }
  return rep;
}

CounterexampleResult uniform_counterexample(int n, int k, int m,
                                            std::uint64_t seed) {
  if (k < 2) {
    throw std::invalid_argument("uniform_counterexample: need at least two classes");
  }
  if (n < 100 * k) {
    throw std::invalid_argument("uniform_counterexample: need n >= 100k");
  }
  if (m < 2) {
    throw std::invalid_argument("uniform_counterexample: need feature dim >= 2");
  }

  Rng rng(seed);
  FeatureTable t;
  t.features.resize(n, m);
  t.ids.resize(n);
  t.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    t.features.row(i) = sample_sphere_uniform(m, rng).transpose();
    t.ids[i] = i;
    t.labels[i] = rng.uniform_int(k);
  }

  const int n_train = static_cast<int>(0.8 * n);
  FeatureTable train, test;
  train.features = t.features.topRows(n_train);
  test.features = t.features.bottomRows(n - n_train);
  train.ids.assign(t.ids.begin(), t.ids.begin() + n_train);
  test.ids.assign(t.ids.begin() + n_train, t.ids.end());
  train.labels.assign(t.labels.begin(), t.labels.begin() + n_train);
  test.labels.assign(t.labels.begin() + n_train, t.labels.end());

  CounterexampleResult out;
  out.probe_acc = linear_probe(train, test).test_acc;
  out.table = std::move(t);
  return out;
}

}  // namespace overlap
