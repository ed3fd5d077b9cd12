#include "overlap/graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace overlap {

namespace {

struct DisjointSet {
  std::vector<int> parent;
  std::vector<int> size;

  explicit DisjointSet(int n) : parent(n), size(n, 1) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }

  int find(int v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
  }
};

double row_distance(const Mat& points, int i, int j) {
  const double dot =
      std::clamp(points.row(i).dot(points.row(j)), -1.0, 1.0);
  return std::acos(dot);
}

int max_label(const std::vector<int>& labels) {
  int k = -1;
  for (int l : labels) k = std::max(k, l);
  return k;
}

// Fixed-size bitset rows for frontier-expansion BFS on dense subgraphs.
class BitMatrix {
 public:
  BitMatrix(int rows, int cols)
      : cols_(cols), words_((cols + 63) / 64), data_(static_cast<size_t>(rows) * words_, 0) {}

  void set(int r, int c) {
    data_[static_cast<size_t>(r) * words_ + c / 64] |= 1ULL << (c % 64);
  }
  const std::uint64_t* row(int r) const {
    return data_.data() + static_cast<size_t>(r) * words_;
  }
  int words() const { return words_; }
  int cols() const { return cols_; }

 private:
  int cols_;
  int words_;
  std::vector<std::uint64_t> data_;
};

// Eccentricity of `start` in the graph given by bitset adjacency, or nullopt
// if not every vertex is reachable.
std::optional<int> bfs_eccentricity(const BitMatrix& adj, int start) {
  const int words = adj.words();
  const int n = adj.cols();
  std::vector<std::uint64_t> reached(words, 0), frontier(words, 0), next(words, 0);
  reached[start / 64] |= 1ULL << (start % 64);
  frontier = reached;
  int ecc = 0;
  int reached_count = 1;
  while (reached_count < n) {
    std::fill(next.begin(), next.end(), 0);
    for (int w = 0; w < words; ++w) {
      std::uint64_t bits = frontier[w];
      while (bits) {
        const int v = w * 64 + std::countr_zero(bits);
        bits &= bits - 1;
        const std::uint64_t* row = adj.row(v);
        for (int x = 0; x < words; ++x) next[x] |= row[x];
      }
    }
    int fresh = 0;
    for (int w = 0; w < words; ++w) {
      next[w] &= ~reached[w];
      fresh += std::popcount(next[w]);
      reached[w] |= next[w];
    }
    if (fresh == 0) return std::nullopt;
    frontier = next;
    reached_count += fresh;
    ++ecc;
  }
  return ecc;
}

}  // namespace

int AugmentationGraph::num_classes() const {
  return has_labels() ? max_label(labels) + 1 : 0;
}

std::vector<std::vector<int>> AugmentationGraph::adjacency() const {
  std::vector<std::vector<int>> adj(n);
  for (const GraphEdge& e : edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  return adj;
}

AugmentationGraph build_graph(const LabeledSphereDataset& dataset, double r,
                              double connect_factor) {
  if (r < 0.0) throw std::invalid_argument("build_graph: r must be >= 0");
  if (connect_factor <= 0.0) {
    throw std::invalid_argument("build_graph: connect_factor must be > 0");
  }
  AugmentationGraph g;
  g.n = dataset.size();
  g.r = r;
  g.connect_factor = connect_factor;
  g.labels = dataset.labels;
  const double cutoff = connect_factor * r;
  for (int i = 0; i < g.n; ++i) {
    for (int j = i + 1; j < g.n; ++j) {
      const double d = row_distance(dataset.points, i, j);
      if (d <= cutoff) g.edges.push_back({i, j, d});
    }
  }
  return g;
}

std::vector<int> connected_components(const AugmentationGraph& g) {
  DisjointSet dsu(g.n);
  for (const GraphEdge& e : g.edges) dsu.unite(e.i, e.j);
  std::vector<int> component(g.n, -1);
  int next_id = 0;
  for (int v = 0; v < g.n; ++v) {
    const int root = dsu.find(v);
    if (component[root] == -1) component[root] = next_id++;
    component[v] = component[root];
  }
  return component;
}

std::vector<bool> classwise_connected(const AugmentationGraph& g) {
  if (!g.has_labels()) {
    throw std::invalid_argument("classwise_connected: graph has no labels");
  }
  const int k = g.num_classes();
  std::vector<int> class_size(k, 0);
  for (int l : g.labels) ++class_size[l];
  for (int c = 0; c < k; ++c) {
    if (class_size[c] == 0) {
      throw std::invalid_argument("classwise_connected: class " +
                                  std::to_string(c) + " has no vertices");
    }
  }
  DisjointSet dsu(g.n);
  for (const GraphEdge& e : g.edges) {
    if (g.labels[e.i] == g.labels[e.j]) dsu.unite(e.i, e.j);
  }
  std::vector<int> root_of_class(k, -1);
  std::vector<bool> connected(k, true);
  for (int v = 0; v < g.n; ++v) {
    const int c = g.labels[v];
    const int root = dsu.find(v);
    if (root_of_class[c] == -1) {
      root_of_class[c] = root;
    } else if (root_of_class[c] != root) {
      connected[c] = false;
    }
  }
  return connected;
}

EdgeLabelStats label_consistency_violations(const AugmentationGraph& g) {
  if (!g.has_labels()) {
    throw std::invalid_argument(
        "label_consistency_violations: graph has no labels");
  }
  EdgeLabelStats stats;
  for (const GraphEdge& e : g.edges) {
    if (g.labels[e.i] == g.labels[e.j]) {
      ++stats.intra_edges;
    } else {
      ++stats.inter_edges;
    }
  }
  const long total = stats.inter_edges + stats.intra_edges;
  stats.inter_fraction =
      total == 0 ? 0.0 : static_cast<double>(stats.inter_edges) / total;
  return stats;
}

DiameterReport intra_class_diameter(const AugmentationGraph& g) {
  if (!g.has_labels()) {
    throw std::invalid_argument("intra_class_diameter: graph has no labels");
  }
  const int k = g.num_classes();
  DiameterReport report;
  report.per_class.resize(k);

  std::vector<std::vector<int>> members(k);
  for (int v = 0; v < g.n; ++v) members[g.labels[v]].push_back(v);
  std::vector<int> local(g.n, -1);

  for (int c = 0; c < k; ++c) {
    const auto& verts = members[c];
    const int nk = static_cast<int>(verts.size());
    if (nk == 0) {
      report.per_class[c] = 0;
      continue;
    }
    for (int i = 0; i < nk; ++i) local[verts[i]] = i;
    BitMatrix adj(nk, nk);
    for (const GraphEdge& e : g.edges) {
      if (g.labels[e.i] == c && g.labels[e.j] == c) {
        adj.set(local[e.i], local[e.j]);
        adj.set(local[e.j], local[e.i]);
      }
    }
    std::optional<int> diameter = 0;
    for (int s = 0; s < nk; ++s) {
      const auto ecc = bfs_eccentricity(adj, s);
      if (!ecc) {
        diameter = std::nullopt;
        break;
      }
      diameter = std::max(*diameter, *ecc);
    }
    report.per_class[c] = diameter;
    for (int v : verts) local[v] = -1;
  }

  report.max_diameter = 0;
  for (const auto& d : report.per_class) {
    if (!d) {
      report.max_diameter = std::nullopt;
      break;
    }
    report.max_diameter = std::max(*report.max_diameter, *d);
  }
  return report;
}

CriticalRadii critical_radii(const LabeledSphereDataset& dataset) {
  const int n = dataset.size();
  if (n < 2) {
    throw std::invalid_argument("critical_radii: need at least two samples");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  CriticalRadii out;
  out.r1 = inf;
  out.r2 = 0.0;
  std::vector<double> nn(n, inf);
  double min_inter = inf;
  bool has_inter = false;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = row_distance(dataset.points, i, j);
      out.r1 = std::min(out.r1, d);
      out.r2 = std::max(out.r2, d);
      nn[i] = std::min(nn[i], d);
      nn[j] = std::min(nn[j], d);
      if (dataset.labels[i] != dataset.labels[j]) {
        has_inter = true;
        min_inter = std::min(min_inter, d);
      }
    }
  }
  out.d_n = *std::max_element(nn.begin(), nn.end());
  if (has_inter) out.r3 = 0.5 * min_inter;

  // Prim with on-the-fly distances; the bottleneck edge of the minimum
  // spanning tree equals the connectivity threshold distance.
  std::vector<double> dist_to_tree(n, inf);
  std::vector<bool> in_tree(n, false);
  in_tree[0] = true;
  for (int v = 1; v < n; ++v) dist_to_tree[v] = row_distance(dataset.points, 0, v);
  double bottleneck = 0.0;
  for (int step = 1; step < n; ++step) {
    int best = -1;
    for (int v = 0; v < n; ++v) {
      if (!in_tree[v] && (best == -1 || dist_to_tree[v] < dist_to_tree[best])) {
        best = v;
      }
    }
    bottleneck = std::max(bottleneck, dist_to_tree[best]);
    in_tree[best] = true;
    for (int v = 0; v < n; ++v) {
      if (!in_tree[v]) {
        dist_to_tree[v] =
            std::min(dist_to_tree[v], row_distance(dataset.points, best, v));
      }
    }
  }
  out.c_n = bottleneck;
  return out;
}

std::vector<ScalingRecord> scaling_experiment(const std::vector<int>& n_list,
                                              int dim, int trials,
                                              std::uint64_t seed) {
  if (dim < 1) {
    throw std::invalid_argument("scaling_experiment: dim must be >= 1");
  }
  if (trials < 1) {
    throw std::invalid_argument("scaling_experiment: trials must be >= 1");
  }
  const int ambient = dim + 1;
  const double region_area = 1.0;
  const double unit_ball_volume =
      std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0 + 1.0);
  const Vec pole = Vec::Unit(ambient, ambient - 1);

  std::vector<ScalingRecord> records;
  Rng base(seed);
  std::uint64_t stream = 0;
  for (int n : n_list) {
    if (n < 2) {
      throw std::invalid_argument("scaling_experiment: every N must be >= 2");
    }
    for (int t = 0; t < trials; ++t) {
      Rng rng = base.fork(stream++);
      LabeledSphereDataset ds =
          make_dataset(1, n, {pole}, CapExtent::area(region_area), rng.seed());
      const CriticalRadii rad = critical_radii(ds);
      ScalingRecord rec;
      rec.n_samples = n;
      rec.dim = dim;
      rec.trial = t;
      rec.c_n = rad.c_n;
      rec.d_n = rad.d_n;
      rec.region_area = region_area;
      rec.unit_ball_volume = unit_ball_volume;
      const double logn = std::log(static_cast<double>(n));
      rec.statistic_cn = std::pow(rad.c_n, dim) * n * static_cast<double>(n) / logn;
      rec.statistic_dn = std::pow(rad.d_n, dim) * n * static_cast<double>(n) / logn;
      rec.alt_statistic_cn = std::pow(rad.c_n, dim) * n / logn;
      records.push_back(rec);
    }
  }
  return records;
}

}  // namespace overlap
