#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "overlap/encoder.hpp"
#include "overlap/eval.hpp"
#include "overlap/graph.hpp"
#include "overlap/metrics.hpp"
#include "overlap/sphere.hpp"

namespace overlap {

using Json = nlohmann::json;

// All writers are atomic: content goes to a temp file in the target
// directory, then a rename.
void write_text_atomic(const std::string& path, const std::string& content);
void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

// CSV: id,label,x0,...,xd
void write_dataset_csv(const std::string& path, const LabeledSphereDataset& ds);

// CSV: i,j,distance
void write_edges_csv(const std::string& path, const AugmentationGraph& g);

// CSV: id,component,label
void write_components_csv(const std::string& path,
                          const std::vector<int>& components,
                          const std::vector<int>& labels);

// CSV: N,d,trial,c_N,d_N,S,V_u,statistic_cN,statistic_dN,alt_statistic_cN
void write_scaling_csv(const std::string& path,
                       const std::vector<ScalingRecord>& records);

// CSV: id,label,z0,...,z{m-1}
void write_feature_csv(const std::string& path, const FeatureTable& t);
// Rows deviating from unit norm by more than 1e-6 are re-normalized and the
// table is flagged.
FeatureTable read_feature_csv(const std::string& path);

// CSV: source_id,view_index,z0,...
void write_augmented_csv(const std::string& path, const AugmentedFeatureSet& s);
AugmentedFeatureSet read_augmented_csv(const std::string& path);

// CSV: epoch,loss,acr,eps (empty cells where metrics were not evaluated)
void write_trace_csv(const std::string& path, const TrainingTrace& trace);

// CSV: r,acr_init,acr_final,arc,probe_acc,diameter ("inf" for infinite)
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

// JSON checkpoint with shape header {h, d, m, activation} and weights.
void save_checkpoint_json(const std::string& path, const EncoderParams& p);
EncoderParams load_checkpoint_json(const std::string& path);

Json bounds_to_json(const BoundsReport& rep);
Json confusion_to_json(const ConfusionReport& rep);

}  // namespace overlap
