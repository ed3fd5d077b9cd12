#include "overlap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "overlap/eval.hpp"
#include "overlap/graph.hpp"

namespace overlap {

namespace {

Mat augmented_points(const LabeledSphereDataset& dataset, int views, double r,
                     std::uint64_t seed) {
  if (views < 2) {
    throw std::invalid_argument("augmented views: need at least 2 per source");
  }
  Rng rng(seed);
  Mat pts(dataset.size() * views, dataset.ambient_dim());
  for (int i = 0; i < dataset.size(); ++i) {
    const Vec x = dataset.points.row(i).transpose();
    for (int j = 0; j < views; ++j) {
      pts.row(i * views + j) = augment(x, r, rng).transpose();
    }
  }
  return pts;
}

void fill_ids(AugmentedFeatureSet& s, int sources, int views) {
  s.views_per_source = views;
  s.source_id.resize(sources * views);
  s.view_index.resize(sources * views);
  for (int i = 0; i < sources; ++i) {
    for (int j = 0; j < views; ++j) {
      s.source_id[i * views + j] = i;
      s.view_index[i * views + j] = j;
    }
  }
}

}  // namespace

AugmentedFeatureSet build_augmented_features(const EncoderParams& p,
                                             const LabeledSphereDataset& dataset,
                                             int views, double r,
                                             std::uint64_t seed) {
  AugmentedFeatureSet s;
  s.features = encoder_forward_batch(p, augmented_points(dataset, views, r, seed));
  fill_ids(s, dataset.size(), views);
  return s;
}

AugmentedFeatureSet build_augmented_inputs(const LabeledSphereDataset& dataset,
                                           int views, double r,
                                           std::uint64_t seed) {
  AugmentedFeatureSet s;
  s.features = augmented_points(dataset, views, r, seed);
  fill_ids(s, dataset.size(), views);
  return s;
}

ConfusionReport confusion_ratio_all(const AugmentedFeatureSet& s, int k) {
  const int n = s.rows();
  if (n < 2) {
    throw std::invalid_argument("confusion_ratio_all: need at least two rows");
  }
  if (k < 1 || k > n - 1) {
    throw std::invalid_argument("confusion_ratio_all: k must lie in [1, n-1]");
  }
  if (static_cast<int>(s.source_id.size()) != n) {
    throw std::invalid_argument("confusion_ratio_all: source ids missing");
  }

  ConfusionReport report;
  report.k = k;
  report.views = s.views_per_source;
  report.cr_values.resize(n);

  // Candidate ordering: squared distance ascending, row index ascending.
  struct Cand {
    double d2;
    int idx;
  };
  auto better = [](const Cand& a, const Cand& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.idx < b.idx);
  };

  Vec d2(n);
  std::vector<Cand> heap; // max-heap on `better` (worst candidate on top)
  heap.reserve(k + 1);
  auto heap_cmp = [&better](const Cand& a, const Cand& b) { return better(a, b); };

  double acr_sum = 0.0;
  for (int q = 0; q < n; ++q) {
    d2 = (s.features.rowwise() - s.features.row(q)).rowwise().squaredNorm();
    heap.clear();
    for (int i = 0; i < n; ++i) {
      if (i == q) continue; // the query row is excluded from its own pool
      const Cand c{d2[i], i};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end(), heap_cmp);
      } else if (better(c, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), heap_cmp);
        heap.back() = c;
        std::push_heap(heap.begin(), heap.end(), heap_cmp);
      }
    }
    int foreign = 0;
    for (const Cand& c : heap) {
      if (s.source_id[c.idx] != s.source_id[q]) ++foreign;
    }
    const double cr = static_cast<double>(foreign) / k;
    report.cr_values[q] = cr;
    acr_sum += cr;
  }
  report.acr = acr_sum / n;
  return report;
}

double arc_score(double acr_init, double acr_final) {
  if (acr_init < 0.0 || acr_init > 1.0 || acr_final < 0.0 || acr_final > 1.0) {
    throw std::invalid_argument("arc_score: inputs must lie in [0, 1]");
  }
  if (acr_init == 1.0) {
    return std::numeric_limits<double>::infinity();
  }
  return (1.0 - acr_final) / (1.0 - acr_init);
}

std::vector<SweepRow> acr_sweep(
    const LabeledSphereDataset& train, const LabeledSphereDataset& test,
    const EncoderParams& encoder_init,
    const std::vector<std::pair<double, EncoderParams>>& encoder_final_per_r,
    int views, int k, std::uint64_t seed, double connect_factor) {
  std::vector<SweepRow> rows;
  rows.reserve(encoder_final_per_r.size());
  Rng base(seed);
  std::uint64_t stream = 0;
  for (const auto& [r, enc_final] : encoder_final_per_r) {
    const std::uint64_t view_seed = base.fork(stream++).seed();
    // same augmented views for the initial and final encoders
    const Mat pts = augmented_points(train, views, r, view_seed);
    AugmentedFeatureSet set_init, set_final;
    set_init.features = encoder_forward_batch(encoder_init, pts);
    set_final.features = encoder_forward_batch(enc_final, pts);
    fill_ids(set_init, train.size(), views);
    fill_ids(set_final, train.size(), views);

    SweepRow row;
    row.r = r;
    row.acr_init = confusion_ratio_all(set_init, k).acr;
    row.acr_final = confusion_ratio_all(set_final, k).acr;
    row.arc = arc_score(row.acr_init, row.acr_final);

    const FeatureTable ftrain = features_from_encoder(enc_final, train);
    const FeatureTable ftest = features_from_encoder(enc_final, test);
    row.probe_acc = linear_probe(ftrain, ftest).test_acc;

    row.diameter =
        intra_class_diameter(build_graph(train, r, connect_factor)).max_diameter;
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(),
            [](const SweepRow& a, const SweepRow& b) { return a.r < b.r; });
  return rows;
}

MetricsProbe make_training_probe(const LabeledSphereDataset& dataset, double r,
                                 int views, int k, int max_sources,
                                 std::uint64_t seed) {
  // Fixed source subsample, fixed augmentation seed: traces stay comparable
  // across epochs.
  LabeledSphereDataset subset;
  const int n = std::min(max_sources, dataset.size());
  subset.points = dataset.points.topRows(n);
  subset.labels.assign(dataset.labels.begin(), dataset.labels.begin() + n);
  subset.caps = dataset.caps;
  subset.seed = dataset.seed;

  return [subset = std::move(subset), r, views, k, seed](
             const EncoderParams& params, int epoch) -> std::pair<double, double> {
    Rng rng(Rng(seed).fork(static_cast<std::uint64_t>(epoch)).seed());
    const AugmentedFeatureSet set =
        build_augmented_features(params, subset, views, r, rng.seed());
    const double acr = confusion_ratio_all(set, k).acr;
    Rng eps_rng = rng.fork(1);
    const double eps =
        alignment_error(params, subset, r, 2000, eps_rng).max_eps;
    return {acr, eps};
  };
}

}  // namespace overlap
