// Reference detection monitor: engineered per-edge features, a logistic
// scorer trained by deterministic gradient descent, and the F1/AUC/AP
// composite used as the adversarial signal.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "txgen/model.hpp"

namespace txgen {

struct EdgeFeatures {
  static constexpr int kDim = 16;
  std::array<double, kDim> v{};
  static const std::array<std::string_view, kDim>& names();
};

// Precomputes per-account and per-pair indices over a time-sorted log so
// single-edge extraction is O(log n). Window statistics cover transactions
// strictly preceding the edge (log order) within `window_seconds`; the burst
// count looks both ways within `burst_half_window` of the sender's events.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const TransactionLog& log,
                            int64_t window_seconds = 7 * 24 * 3600,
                            int64_t burst_half_window = 3600);
  EdgeFeatures extract(std::size_t index) const;
  std::size_t size() const { return log_->transactions.size(); }

 private:
  struct AccountSeries {
    std::vector<std::size_t> tx_index;    // log indices, ascending
    std::vector<int64_t> timestamp;       // parallel to tx_index
    std::vector<int32_t> out_flag;        // 1 when account is sender
    std::vector<double> cum_log_amount;   // prefix sums over participations
    std::vector<int32_t> cum_out;         // prefix count of initiations
  };
  const TransactionLog* log_;
  int64_t window_;
  int64_t burst_half_;
  std::vector<AccountSeries> series_;
  std::vector<int32_t> from_series_, to_series_;       // per edge
  std::vector<std::size_t> from_pos_, to_pos_;          // position within series
  std::vector<std::vector<std::size_t>> pair_positions_;  // per-pair sender positions
  std::vector<int32_t> pair_id_;
  std::vector<std::size_t> pair_rank_;
};

// Convenience single-edge form; builds the index each call.
EdgeFeatures extract_edge_features(const TransactionLog& log, std::size_t index);

struct CompositeWeights {
  double w_f1 = 1.0 / 3.0;
  double w_auc = 1.0 / 3.0;
  double w_ap = 1.0 / 3.0;
};

struct MetricsReport {
  double f1 = 0.0;
  double auc = 0.0;
  double ap = 0.0;
  double composite = 0.0;
};

// AUC with midrank tie handling, AP by step interpolation over descending
// scores (ties broken by input order), F1 at `threshold` (score >= threshold
// flags positive). Throws MetricsError on degenerate label sets.
MetricsReport compute_metrics(std::span<const double> scores,
                              std::span<const uint8_t> labels, double threshold,
                              const CompositeWeights& weights = {});

struct MonitorModel {
  std::vector<double> weights;
  double bias = 0.0;
  double decision_threshold = 0.5;
  std::vector<double> feat_mean;
  std::vector<double> feat_std;

  double score(const EdgeFeatures& f) const;  // sigmoid probability
};

struct MonitorTrainConfig {
  int iterations = 400;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  double val_fraction = 0.25;
  uint64_t shuffle_seed = 7;
};

// Deterministic full-batch logistic regression; the decision threshold is the
// F1 maximizer on a held-out validation slice. Throws MetricsError when only
// one class is present.
MonitorModel train_monitor(const std::vector<EdgeFeatures>& features,
                           const std::vector<uint8_t>& labels,
                           const MonitorTrainConfig& config = {});

// Scores an edge subset of the log with the model; pure.
MetricsReport score_graph(const MonitorModel& model, const TransactionLog& log,
                          std::span<const std::size_t> edge_subset,
                          const CompositeWeights& weights = {});

void save_monitor(const MonitorModel& model, const std::string& path);
MonitorModel load_monitor(const std::string& path);

}  // namespace txgen
