#include "overlap/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace overlap {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::string& expected_prefix) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  if (line.rfind(expected_prefix, 0) != 0) {
    throw std::runtime_error(path + ": unexpected header '" + line + "'");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_line(line));
  }
  return rows;
}

}  // namespace

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path());
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

void write_json(const std::string& path, const Json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return Json::parse(in);
}

void write_dataset_csv(const std::string& path, const LabeledSphereDataset& ds) {
  std::ostringstream out;
  out << "id,label";
  for (int c = 0; c < ds.ambient_dim(); ++c) out << ",x" << c;
  out << "\n";
  for (int i = 0; i < ds.size(); ++i) {
    out << i << "," << ds.labels[i];
    for (int c = 0; c < ds.ambient_dim(); ++c) out << "," << fmt(ds.points(i, c));
    out << "\n";
  }
  write_text_atomic(path, out.str());
}

void write_edges_csv(const std::string& path, const AugmentationGraph& g) {
  std::ostringstream out;
  out << "i,j,distance\n";
  for (const GraphEdge& e : g.edges) {
    out << e.i << "," << e.j << "," << fmt(e.dist) << "\n";
  }
  write_text_atomic(path, out.str());
}

void write_components_csv(const std::string& path,
                          const std::vector<int>& components,
                          const std::vector<int>& labels) {
  std::ostringstream out;
  out << "id,component,label\n";
  for (size_t i = 0; i < components.size(); ++i) {
    out << i << "," << components[i] << ","
        << (i < labels.size() ? std::to_string(labels[i]) : "") << "\n";
  }
  write_text_atomic(path, out.str());
}

void write_scaling_csv(const std::string& path,
                       const std::vector<ScalingRecord>& records) {
  std::ostringstream out;
  out << "N,d,trial,c_N,d_N,S,V_u,statistic_cN,statistic_dN,alt_statistic_cN\n";
  for (const ScalingRecord& r : records) {
    out << r.n_samples << "," << r.dim << "," << r.trial << "," << fmt(r.c_n)
        << "," << fmt(r.d_n) << "," << fmt(r.region_area) << ","
        << fmt(r.unit_ball_volume) << "," << fmt(r.statistic_cn) << ","
        << fmt(r.statistic_dn) << "," << fmt(r.alt_statistic_cn) << "\n";
  }
  write_text_atomic(path, out.str());
}

void write_feature_csv(const std::string& path, const FeatureTable& t) {
  std::ostringstream out;
  out << "id,label";
  for (int c = 0; c < t.dim(); ++c) out << ",z" << c;
  out << "\n";
  for (int i = 0; i < t.size(); ++i) {
    out << t.ids[i] << "," << t.labels[i];
    for (int c = 0; c < t.dim(); ++c) out << "," << fmt(t.features(i, c));
    out << "\n";
  }
  write_text_atomic(path, out.str());
}

FeatureTable read_feature_csv(const std::string& path) {
  const auto rows = read_csv(path, "id,label");
  if (rows.empty()) throw std::runtime_error(path + ": no feature rows");
  const int m = static_cast<int>(rows.front().size()) - 2;
  if (m < 1) throw std::runtime_error(path + ": no feature columns");
  FeatureTable t;
  t.features.resize(static_cast<Eigen::Index>(rows.size()), m);
  t.ids.resize(rows.size());
  t.labels.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (static_cast<int>(r.size()) != m + 2) {
      throw std::runtime_error(path + ": ragged row " + std::to_string(i));
    }
    t.ids[i] = std::stoi(r[0]);
    t.labels[i] = std::stoi(r[1]);
    for (int c = 0; c < m; ++c) t.features(static_cast<Eigen::Index>(i), c) = std::stod(r[c + 2]);
  }
  for (Eigen::Index i = 0; i < t.features.rows(); ++i) {
    const double norm = t.features.row(i).norm();
    if (std::abs(norm - 1.0) > 1e-6) {
      if (norm < 1e-12) {
        throw std::runtime_error(path + ": zero feature row " + std::to_string(i));
      }
      t.features.row(i) /= norm;
      t.renormalized = true;
    }
  }
  return t;
}

void write_augmented_csv(const std::string& path, const AugmentedFeatureSet& s) {
  std::ostringstream out;
  out << "source_id,view_index";
  for (Eigen::Index c = 0; c < s.features.cols(); ++c) out << ",z" << c;
  out << "\n";
  for (int i = 0; i < s.rows(); ++i) {
    out << s.source_id[i] << "," << s.view_index[i];
    for (Eigen::Index c = 0; c < s.features.cols(); ++c) {
      out << "," << fmt(s.features(i, c));
    }
    out << "\n";
  }
  write_text_atomic(path, out.str());
}

AugmentedFeatureSet read_augmented_csv(const std::string& path) {
  const auto rows = read_csv(path, "source_id,view_index");
  if (rows.empty()) throw std::runtime_error(path + ": no rows");
  const int m = static_cast<int>(rows.front().size()) - 2;
  if (m < 1) throw std::runtime_error(path + ": no feature columns");
  AugmentedFeatureSet s;
  s.features.resize(static_cast<Eigen::Index>(rows.size()), m);
  s.source_id.resize(rows.size());
  s.view_index.resize(rows.size());
  std::vector<int> views_of_source;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (static_cast<int>(r.size()) != m + 2) {
      throw std::runtime_error(path + ": ragged row " + std::to_string(i));
    }
    s.source_id[i] = std::stoi(r[0]);
    s.view_index[i] = std::stoi(r[1]);
    if (s.source_id[i] < 0) throw std::runtime_error(path + ": negative source id");
    if (s.source_id[i] >= static_cast<int>(views_of_source.size())) {
      views_of_source.resize(s.source_id[i] + 1, 0);
    }
    ++views_of_source[s.source_id[i]];
    for (int c = 0; c < m; ++c) {
      s.features(static_cast<Eigen::Index>(i), c) = std::stod(r[c + 2]);
    }
  }
  for (size_t src = 0; src < views_of_source.size(); ++src) {
    if (views_of_source[src] != views_of_source[0]) {
      throw std::runtime_error(path + ": source " + std::to_string(src) +
                               " does not have exactly C rows");
    }
  }
  s.views_per_source = views_of_source.empty() ? 0 : views_of_source[0];
  for (Eigen::Index i = 0; i < s.features.rows(); ++i) {
    const double norm = s.features.row(i).norm();
    if (std::abs(norm - 1.0) > 1e-6) {
      if (norm < 1e-12) {
        throw std::runtime_error(path + ": zero feature row " + std::to_string(i));
      }
      s.features.row(i) /= norm;
    }
  }
  return s;
}

void write_trace_csv(const std::string& path, const TrainingTrace& trace) {
  std::ostringstream out;
  out << "epoch,loss,acr,eps\n";
  for (const EpochRecord& r : trace.records) {
    out << r.epoch << "," << fmt(r.loss) << ","
        << (r.acr ? fmt(*r.acr) : "") << "," << (r.eps ? fmt(*r.eps) : "")
        << "\n";
  }
  write_text_atomic(path, out.str());
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "r,acr_init,acr_final,arc,probe_acc,diameter\n";
  for (const SweepRow& row : rows) {
    out << fmt(row.r) << "," << fmt(row.acr_init) << "," << fmt(row.acr_final)
        << "," << fmt(row.arc) << "," << fmt(row.probe_acc) << ","
        << (row.diameter ? std::to_string(*row.diameter) : "inf") << "\n";
  }
  write_text_atomic(path, out.str());
}

namespace {

Json matrix_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  if (static_cast<Eigen::Index>(j.size()) != rows) {
    throw std::runtime_error("checkpoint: matrix row count mismatch");
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) {
      throw std::runtime_error("checkpoint: matrix column count mismatch");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

Vec vector_from_json(const Json& j, Eigen::Index size) {
  if (static_cast<Eigen::Index>(j.size()) != size) {
    throw std::runtime_error("checkpoint: vector size mismatch");
  }
  Vec v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

void save_checkpoint_json(const std::string& path, const EncoderParams& p) {
  Json j;
  j["h"] = p.hidden_dim();
  j["d"] = p.input_dim();
  j["m"] = p.output_dim();
  j["activation"] = to_string(p.activation);
  j["w1"] = matrix_to_json(p.w1);
  j["b1"] = std::vector<double>(p.b1.data(), p.b1.data() + p.b1.size());
  j["w2"] = matrix_to_json(p.w2);
  j["b2"] = std::vector<double>(p.b2.data(), p.b2.data() + p.b2.size());
  write_json(path, j);
}

EncoderParams load_checkpoint_json(const std::string& path) {
  const Json j = read_json(path);
  EncoderParams p;
  const int h = j.at("h").get<int>();
  const int d = j.at("d").get<int>();
  const int m = j.at("m").get<int>();
  p.activation = activation_from_string(j.at("activation").get<std::string>());
  p.w1 = matrix_from_json(j.at("w1"), h, d);
  p.b1 = vector_from_json(j.at("b1"), h);
  p.w2 = matrix_from_json(j.at("w2"), m, h);
  p.b2 = vector_from_json(j.at("b2"), m);
  return p;
}

Json bounds_to_json(const BoundsReport& rep) {
  Json j;
  j["l_nce"] = rep.l_nce;
  j["l_nce_std_error"] = rep.l_nce_std_error;
  j["l_ce_mu"] = rep.l_ce_mu;
  j["var_cond"] = rep.var_cond;
  j["m"] = rep.m;
  j["k"] = rep.k;
  j["log_m_over_k"] = rep.log_m_over_k;
  j["epsilon"] = rep.epsilon;
  j["diameter"] = rep.diameter ? Json(*rep.diameter) : Json(nullptr);
  j["lse_error_estimate"] = rep.lse_error_estimate;
  j["upper_slack"] = rep.upper_slack;
  j["lower_slack"] = rep.lower_slack;
  j["upper_holds"] = rep.upper_holds;
  j["lower_holds"] = rep.lower_holds;
  j["upper_margin"] = rep.upper_margin;
  j["lower_margin"] = rep.lower_margin;
  j["weak_upper_holds"] =
      rep.weak_upper_holds ? Json(*rep.weak_upper_holds) : Json(nullptr);
  return j;
}

Json confusion_to_json(const ConfusionReport& rep) {
  Json j;
  j["acr"] = rep.acr;
  j["k"] = rep.k;
  j["views"] = rep.views;
  j["distance"] = rep.distance;
  j["cr_values"] = rep.cr_values;
  return j;
}

}  // namespace overlap
