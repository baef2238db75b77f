#pragma once

#include "sdid/bayes_update.hpp"
#include "sdid/bench_sim.hpp"
#include "sdid/damage_id.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sdid {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Attached to every file the CLI writes.
struct Provenance {
  std::string scenario;
  std::uint64_t seed = 0;
  /// "intact", "damaged" or empty for reports spanning both.
  std::string stage;
  std::string config_hash;
  std::string version = kVersion;
};

Json to_json(const Provenance& p);
Provenance provenance_from_json(const Json& j);

Json to_json(const ModelDefinition& def);
ModelDefinition model_from_json(const Json& j);

/// Scenario metadata: model, true parameters, sensors, noise settings.
Json to_json(const Scenario& sc);
Scenario scenario_from_json(const Json& j);

/// One observation: eigenvalues (rad^2/s^2), frequencies (Hz, informational),
/// shapes as one array per mode, and reduced-coordinate sensor DOFs. Readers
/// derive eigenvalues from frequencies when only the latter are given.
Json to_json(const ModalData& m);
ModalData modal_data_from_json(const Json& j);

struct MeasurementFile {
  std::vector<ModalData> observations;
  Provenance provenance;
};

Json to_json(const MeasurementFile& f);
MeasurementFile measurements_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

/// Text of `j` exactly as write_json stores it.
std::string dump(const Json& j);

MeasurementFile read_measurements(const std::filesystem::path& path);
ModelDefinition read_model(const std::filesystem::path& path);

/// Per-parameter mean/std, theta_hat, convergence flag and outer trace.
Json posterior_report(const PosteriorEstimate& est, const Provenance& p);
/// theta_hat of a posterior report.
ParameterVector baseline_from_report(const Json& report);

/// Support, magnitudes and per-iteration threshold traces.
Json damage_report(const DamageResult& res, const Provenance& p);

Json comparison_report(const std::vector<ComparisonRow>& rows, const Vector& truth,
                       const Provenance& p);

// CSV writers. Column schemas are given by the header line each emits.

/// element,theta_hat,mean,std
void write_posterior_csv(const std::filesystem::path& path, const PosteriorEstimate& est);
/// iteration,relative_increment,residue_norm,sigma2,alpha,inner_iters
void write_update_trace_csv(const std::filesystem::path& path, const PosteriorEstimate& est);
/// element,theta_dmg,active
void write_damage_csv(const std::filesystem::path& path, const DamageResult& res);
/// outer_iteration,bo_iteration,lambda,loss,incumbent
void write_bo_trace_csv(const std::filesystem::path& path, const DamageResult& res);
/// method,relative_error,converged,iterations
void write_comparison_csv(const std::filesystem::path& path, const std::vector<ComparisonRow>& rows);
/// element,truth,stls,lasso,ridge
void write_comparison_elements_csv(const std::filesystem::path& path,
                                   const std::vector<ComparisonRow>& rows, const Vector& truth);

}  // namespace sdid
