// Graph-invariant and heavy-tail diagnostics over generated logs: daily
// undirected simple projections, connectivity/core/mixing statistics, and
// MLE power-law tail fits with fixed-percentile and KS-minimizing cutoffs.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "txgen/model.hpp"

namespace txgen {

// Undirected simple graph over dense node ids [0, n); no self-loops, no
// parallel edges.
struct UGraph {
  std::size_t n = 0;
  std::vector<std::pair<int32_t, int32_t>> edges;
};

inline constexpr int64_t kSecondsPerDay = 86'400;

// Calendar-day index of a timestamp (UTC days since epoch).
inline int64_t day_of(int64_t timestamp) {
  return timestamp >= 0 ? timestamp / kSecondsPerDay
                        : (timestamp - (kSecondsPerDay - 1)) / kSecondsPerDay;
}

// Nodes = accounts active on `day`, edges = distinct unordered pairs that
// transacted that day. Empty graph when the day has no transactions.
UGraph daily_projection(const TransactionLog& log, int64_t day);

struct DailyInvariants {
  int64_t day = 0;
  std::size_t active_nodes = 0;
  std::size_t edge_count = 0;
  double gcc_ratio = 0.0;        // |largest component| / active nodes
  int n_components = 0;
  int max_kcore = 0;
  double max_core_fraction = 0.0;
  double assortativity = 0.0;
  bool assortativity_defined = false;  // false on degree-regular graphs
  double transitivity = 0.0;           // 3*triangles / connected triples
};

DailyInvariants graph_invariants(const UGraph& g);

enum class TailVariable : uint8_t { degree_unique, degree_tx_count, strength, amount };
std::string_view to_string(TailVariable v);

struct TailSamples {
  TailVariable variable;
  std::vector<double> values;  // strictly positive
};

// Per-account aggregates over the full log; each transaction contributes one
// count to both sender and receiver. Zero-valued samples are dropped.
std::array<TailSamples, 4> compute_tail_variables(const TransactionLog& log);

struct XminMode {
  enum class Kind : uint8_t { fixed_percentile, automatic };
  Kind kind = Kind::automatic;
  double percentile = 0.0;  // used by fixed_percentile

  static XminMode fixed(double pct) {
    return {Kind::fixed_percentile, pct};
  }
  static XminMode automatic() { return {Kind::automatic, 0.0}; }
};
std::string xmin_mode_label(const XminMode& m);

struct TailFitReport {
  TailVariable variable = TailVariable::amount;
  XminMode mode;
  double x_min = 0.0;
  std::size_t n = 0;       // total sample count
  std::size_t n_tail = 0;  // samples >= x_min
  double alpha = 0.0;      // clamped to [alpha_lo, alpha_hi]
  double alpha_unclamped = 0.0;
  bool boundary_flag = false;
  double ks_d = 0.0;
  // Power-law vs lognormal comparison; populated when enough tail samples.
  bool has_lr = false;
  double r_loglik = 0.0;
  double p_value = 1.0;
};

struct TailFitOptions {
  double alpha_lo = 1.0;
  double alpha_hi = 3.0;
  std::size_t min_tail = 10;
  std::size_t max_auto_candidates = 500;
  std::size_t min_lr_tail = 30;  // minimum tail size for the LN comparison
  bool with_lognormal_comparison = true;
};

// Continuous MLE fit; `mode` selects the cutoff rule. Throws FitError when
// fewer than options.min_tail samples remain above the cutoff.
TailFitReport fit_power_law(const TailSamples& samples, const XminMode& mode,
                            const TailFitOptions& options = {});

// KS distance between the empirical tail CDF (samples >= x_min) and the
// fitted model F(x) = 1 - (x/x_min)^-(alpha-1), evaluated at both step sides.
double ks_distance(std::span<const double> samples, double alpha, double x_min);

struct LognormalComparison {
  double r = 0.0;  // loglik(power law) - loglik(lognormal); < 0 favors LN
  double p = 1.0;  // two-sided normal p-value of the normalized statistic
  double mu = 0.0;
  double sigma = 1.0;
  bool converged = false;
};

// Fits a lognormal truncated at x_min to the tail by MLE and compares
// likelihoods against the tail power law fitted by `fit_power_law`'s rule.
LognormalComparison compare_lognormal(std::span<const double> samples, double x_min);

struct InvariantSummary {
  DailyInvariants mean;
  DailyInvariants stddev;
  std::size_t days = 0;
};

struct FidelityReport {
  std::vector<DailyInvariants> daily;
  InvariantSummary summary;
  std::vector<TailFitReport> tails;  // 4 variables x 3 modes
};

InvariantSummary summarize_invariants(const std::vector<DailyInvariants>& daily);

FidelityReport fidelity_report(const TransactionLog& log,
                               const TailFitOptions& options = {});

}  // namespace txgen
