#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nvspade/harness.hpp"

namespace nvspade {

/// Parses a JSON experiment description; absent keys keep their defaults. Throws ConfigError.
ExperimentConfig config_from_json_string(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON (sorted keys, every field present).
std::string config_to_json_string(const ExperimentConfig& config);
/// FNV-1a of the canonical JSON, 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Shortest round-trip decimal form.
std::string format_double(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& row();
  CsvTable& cell(const std::string& v);
  CsvTable& cell(double v);
  CsvTable& cell(std::int64_t v);
  CsvTable& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
  CsvTable& cell(std::uint64_t v);

  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Creates `dir` and checks `run.json`: a recorded hash different from `hash` is a ConfigError
/// unless `force` is set.
void prepare_output_dir(const std::filesystem::path& dir, const std::string& hash, bool force);
/// Writes run.json with the canonical config, its hash and a JSON summary object (as text).
void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& config, const std::string& summary_json);

CsvTable scene_table(const Positions& positions, const Vec& brightnesses);
CsvTable positions_table(const ProtocolResult& result);
CsvTable brightness_table(const ProtocolResult& result);
/// gamma, emitter, I_hat, I_fit, pipeline
CsvTable trace_table(const ProtocolResult& result, FieldModel kind, double chi);
CsvTable field_fit_table(const ProtocolResult& result);
CsvTable metrics_table(const ProtocolResult& result);
std::string protocol_summary_json(const ProtocolResult& result);

CsvTable monte_carlo_table(const MonteCarloResult& result);
CsvTable monte_carlo_summary_table(const MonteCarloResult& result);
std::string monte_carlo_summary_json(const MonteCarloResult& result);

CsvTable fisher_table(const std::vector<FisherRow>& rows);

CsvTable bayes_trajectory_table(const BayesDemoResult& result);
CsvTable posterior_table(const std::vector<std::string>& names, const std::vector<const PosteriorGrid*>& grids);
std::string bayes_summary_json(const BayesDemoResult& result);

CsvTable ykl_modes_table(const YklModeTable& table);

}  // namespace nvspade
