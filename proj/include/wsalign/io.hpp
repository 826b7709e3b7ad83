#pragma once

#include <string>
#include <vector>

#include "wsalign/dataset.hpp"
#include "wsalign/engine.hpp"
#include "wsalign/experiments.hpp"
#include "wsalign/federated.hpp"
#include "wsalign/merge.hpp"
#include "wsalign/model.hpp"
#include "wsalign/scope.hpp"

namespace wsalign {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Checkpoint JSON: {"arch_id": ..., "seed": ..., "layers": [{"name", "shape",
// "values"}]}, values row-major at 17 significant digits. Loading validates
// shapes against arch_id and rejects non-finite values.
void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);
std::string checkpoint_to_json(const Model& m);
Model checkpoint_from_json(const std::string& text, const std::string& origin);

// CSV artifacts. Every float is rendered with fmt17 so reruns diff clean.
std::string metrics_csv(const std::vector<EpochRecord>& log);
std::string curve_csv(const InterpolationCurve& curve);
std::string round_log_csv(const std::vector<RoundRecord>& rounds);
std::string scope_trajectory_csv(const std::vector<RoundRecord>& rounds);
std::string landscape_csv(const LandscapeGrid& grid);
std::string scope_csv(const WeightScope& scope);

// JSON reports.
std::string barrier_json(const BarrierReport& report);
std::string scope_json(const WeightScope& scope, const std::string& model_id);
std::string target_json(const ScopeTarget& target);
std::string permutation_json(const Permutation& perm,
                             const std::vector<std::string>& layer_names);
std::string condition_matrix_json(const ConditionMatrixResult& result);
std::string condition_matrix_csv(const ConditionMatrixResult& result);
std::string wsa_barrier_study_json(const WsaBarrierStudyResult& result);
std::string scaling_study_csv(const ScalingStudyResult& result);
std::string lambda_sweep_csv(const LambdaSweepResult& result);
std::string predefined_ablation_csv(const PredefinedAblationResult& result);

ScopeTarget target_from_json(const std::string& text,
                             const std::string& origin);
Permutation permutation_from_json(const std::string& text,
                                  const std::string& origin);

}  // namespace wsalign
