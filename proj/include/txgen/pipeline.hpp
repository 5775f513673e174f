// Orchestration and the artifact's I/O surface: dataset CSV schema,
// temporal splits, summary statistics, feature export for external
// detectors, JSON configuration, and the end-to-end pipeline.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "txgen/anomaly.hpp"
#include "txgen/backbone.hpp"
#include "txgen/embedder.hpp"
#include "txgen/fidelity.hpp"
#include "txgen/grpo.hpp"
#include "txgen/model.hpp"
#include "txgen/monitor.hpp"

namespace txgen {

struct SplitError : Error {
  using Error::Error;
};
struct StageError : Error {
  std::string stage;
  StageError(std::string stage_name, const std::string& msg)
      : Error("[" + stage_name + "] " + msg), stage(std::move(stage_name)) {}
};

// ---------------------------------------------------------------------------
// Timestamps and CSV
// ---------------------------------------------------------------------------

std::string format_iso8601(int64_t epoch_seconds);
int64_t parse_iso8601(const std::string& s);  // throws IoError

// Transactions CSV, exact column order:
// Timestamp,From Bank,From Account,To Bank,To Account,Amount Paid,
// Payment Currency,Amount Received,Receiving Currency,Payment Format,
// is_laundering
void export_csv(const TransactionLog& log, const std::string& path);
// Imported logs carry transactions only; profiles load separately.
TransactionLog import_csv(const std::string& path);

void export_persons_csv(const Population& pop, const std::string& path);
void export_merchants_csv(const Population& pop, const std::string& path);
Population import_profiles(const std::string& persons_path,
                           const std::string& merchants_path);

// ---------------------------------------------------------------------------
// Splits and summaries
// ---------------------------------------------------------------------------

struct DatasetSplit {
  std::size_t train_end = 0;  // [0, train_end)
  std::size_t val_end = 0;    // [train_end, val_end)
  std::size_t test_end = 0;   // [val_end, test_end) == n
};

// Contiguous temporal 6:2:2 split; val/test get floor(n/5) rows each and the
// remainder stays in train. Throws SplitError below 10 rows.
DatasetSplit make_splits(const TransactionLog& log);

struct SummaryRecord {
  int64_t days = 0;
  std::size_t accounts = 0;
  std::size_t transactions = 0;
  std::size_t laundering = 0;
  double one_per_n = 0.0;
  bool one_per_n_defined = false;
};

SummaryRecord summarize(const TransactionLog& log);

// Per-edge monitor features plus labels; with_profiles appends sender and
// receiver profile columns for the first ceil(fraction * A) attributes of
// the canonical order (region, age_band, occupation, income_tier,
// base_daily_intensity, amount_scale, amount_dispersion, exploration_rate).
void export_features(const TransactionLog& log, bool with_profiles,
                     double profile_fraction, const std::string& path);
std::size_t profile_columns_for_fraction(double fraction);  // ceil(f * A)
inline constexpr std::size_t kProfileAttributeCount = 8;

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct PipelineConfig {
  uint64_t seed = 42;
  PopulationConfig population = PopulationConfig::defaults();
  BackboneConfig backbone;
  GrpoConfig grpo;
  EmbedderConfig embedder;
  MonitorTrainConfig monitor;
  double target_prevalence = 0.00153;
  int monitor_negative_sample = 20'000;  // backbone rows used as negatives
  int monitor_positive_replicas = 40;    // seed instantiations as positives
  int eval_context_edges = 2'000;        // held-out slice behind the scorer
  int rollout_extra_steps = 4;           // policy edits when diversifying
  int max_variants = 20'000;
  std::string out_dir = "out";

  void validate() const;
  static PipelineConfig from_json_file(const std::string& path);
};

struct PipelineOutputs {
  std::string transactions_csv;
  std::string persons_csv;
  std::string merchants_csv;
  std::string monitor_path;
  std::string policy_path;
  std::string grpo_log_csv;
  std::string clusters_path;
  std::string embedding_reports_csv;
  std::string invariants_daily_csv;
  std::string invariants_summary_csv;
  std::string tail_fits_csv;
  std::string splits_csv;
  std::string summary_csv;
  SummaryRecord summary;
};

// backbone -> monitor pre-training -> GRPO hardening -> variant synthesis ->
// embedding -> fidelity -> exports. Deterministic under (config, seed); any
// stage failure removes files written so far and rethrows as StageError.
PipelineOutputs run_pipeline(const PipelineConfig& config);

// Report writers shared by the pipeline and the CLI.
void write_fidelity_csvs(const FidelityReport& report, const std::string& daily_path,
                         const std::string& summary_path,
                         const std::string& tails_path,
                         const std::string& dataset_label);
void write_embedding_reports_csv(const std::vector<EmbeddingReport>& reports,
                                 const std::string& path);
void write_grpo_log_csv(const std::vector<GrpoTrainingRow>& rows,
                        const std::string& path);
void write_split_files(const TransactionLog& log, const DatasetSplit& split,
                       const std::string& dir);
void write_summary_csv(const SummaryRecord& summary, const std::string& path);

uint64_t hash_file(const std::string& path);  // FNV-1a over bytes

}  // namespace txgen
