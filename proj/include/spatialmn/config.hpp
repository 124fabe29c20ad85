#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spatialmn/downstream.hpp"
#include "spatialmn/gibbs.hpp"
#include "spatialmn/simulation.hpp"

namespace smn {

struct SampleInput {
  std::filesystem::path expression;
  std::filesystem::path coords;
};

struct InputConfig {
  std::vector<SampleInput> samples;
  bool normalize = true;
  double trim_quantile = 0.0;
  bool intersect_genes = false;
  /// Subtract each gene's mean across cells before fitting.
  bool center_rows = true;
  /// Output directory of an earlier fit, read by the downstream commands.
  std::filesystem::path fit_dir;
};

struct DownstreamConfig {
  double cutoff = 0.1;
  Index k = 3;
  Index clusters = 5;
  int restarts = 10;
  Index k_max = 10;
  Index clusters_max = 10;
  NegativeWeights negatives = NegativeWeights::clamp;
  int max_lag = 50;
  int sample = 1;  ///< 1-based sample whose column correlation is used
};

/// JSON configuration with sections {input, gibbs, scenario, downstream,
/// output}. Every key is optional.
struct RunConfig {
  InputConfig input;
  GibbsConfig gibbs;
  SimScenario scenario;
  DownstreamConfig downstream;
  std::filesystem::path out_dir = "out";

  /// Relative input paths resolve against `base_dir`.
  static RunConfig from_json_text(const std::string& text, const std::filesystem::path& base_dir = {});
  static RunConfig from_file(const std::filesystem::path& path);

  /// Canonical JSON (sorted keys, fully resolved); the manifest hash input.
  std::string to_json_text() const;

  /// Sets the seed of both the sampler and the scenario.
  void set_seed(std::uint64_t seed);
  void set_threads(int threads);
};

}  // namespace smn
