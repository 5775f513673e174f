// Agent-based generator of normal transactions. Each hourly window samples
// initiators (per-person Poisson), selects counterparties from a four-term
// mixture (locality, decayed memory, merchant attractiveness, exploration),
// samples event attributes, and feeds the interactions back into the state.
// A daily scenario controller modulates aggregate volume and region mix.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "txgen/model.hpp"

namespace txgen {

struct MixtureWeights {
  double local = 0.10;
  double memory = 0.25;
  double merchant = 0.55;
  double explore = 0.10;
  void validate() const;  // simplex up to 1e-9
};

struct ScenarioConfig {
  double shock_sigma = 0.02;
  double shock_bound = 0.1;  // |eta| clamp before exponentiation
  double min_factor = 0.7;
  double max_factor = 1.45;
  double weekend_multiplier = 1.0;           // applied on days 5,6 of each week
  std::map<int64_t, double> holiday_multipliers;  // day index -> multiplier
  double region_jitter_sigma = 0.03;
  double region_jitter_bound = 0.15;
};

struct ScenarioModifiers {
  int64_t day = -1;
  double global_intensity_factor = 1.0;
  // Calendar-free random-walk level; calendar multipliers apply on top of
  // this so a holiday does not permanently shift the walk.
  double base_factor = 1.0;
  std::vector<double> region_mix;  // simplex over the population's regions
};

// Decayed pair preferences and region hotspots. Weights decay lazily: each
// entry stores its last-touched hour and the accessor applies
// gamma^(elapsed), which matches eager per-window decay exactly in closed
// form.
struct InteractionState {
  struct Entry {
    double weight = 0.0;
    int64_t hour = 0;
  };
  std::vector<std::unordered_map<int32_t, Entry>> memory;  // per initiator
  std::vector<Entry> region_hotspots;                      // per region id
  int64_t last_window = -1;
  double decay_per_hour = 0.995;

  double memory_weight(int initiator, int counterparty, int64_t at_hour) const;
  double memory_weight(int initiator, int counterparty) const {
    return memory_weight(initiator, counterparty, last_window);
  }
  double hotspot_weight(std::size_t region_id, int64_t at_hour) const;
};

struct AmountModel {
  double p_tail = 0.01;
  double tail_alpha = 2.9255;  // density exponent of the Pareto tail
  double tail_threshold = 40'000.0;
};

struct BackboneConfig {
  int horizon_days = 30;
  int64_t start_timestamp = 1'767'225'600;  // 2026-01-01T00:00:00Z
  MixtureWeights mixture;
  double memory_decay_per_hour = 0.995;
  double memory_increment = 1.0;
  double memory_prune_epsilon = 1e-4;
  int region_pool_size = 256;
  // Person visibility when drawing the same-region candidate pool:
  // weight = max(base_daily_intensity, floor)^exponent. Zero keeps the pool
  // uniform; the default biases it toward active accounts, the person
  // analogue of merchant attractiveness.
  double person_attractiveness_exponent = 1.0;
  double person_attractiveness_floor = 1e-3;
  AmountModel amount;
  ScenarioConfig scenario;
  // Payment-format mix conditioned on counterparty kind, indexed by
  // PaymentFormat order (mobile, card, transfer, cash, cheque).
  std::vector<double> person_format_probs = {0.40, 0.06, 0.34, 0.14, 0.06};
  std::vector<double> merchant_format_probs = {0.46, 0.34, 0.09, 0.08, 0.03};
  std::string currency = "USD";
  // Optional multi-currency: with probability `share`, the receiving side is
  // settled in `currency` at `rate` units per payment-currency unit. Empty
  // by default (single currency).
  struct FxEntry {
    std::string currency;
    double rate = 1.0;
    double share = 0.0;
  };
  std::vector<FxEntry> fx_table;

  void validate() const;  // throws ConfigError
};

// Region names in stable order plus per-account region ids; shared by the
// scenario controller and the counterparty sampler.
struct RegionTable {
  std::vector<std::string> names;
  std::vector<int32_t> account_region;  // per population index
  explicit RegionTable(const Population& pop);
  int id_of(const std::string& name) const;
};

ScenarioModifiers initial_scenario(const RegionTable& regions);

// Daily update: bounded multiplicative shock on the walk level, clamp, then
// calendar multipliers; region mix gets a bounded jitter and renormalizes.
ScenarioModifiers step_scenario(int64_t day, const ScenarioModifiers& prev,
                                const ScenarioConfig& cfg, RngStream rng);

// Poisson initiations per person for one hourly window;
// lambda = base_daily_intensity * diurnal[hour%24] * global factor.
// Zero-count entries are omitted. Person indices, canonical order.
std::vector<std::pair<int32_t, int64_t>> sample_initiators(
    int64_t hour, const Population& pop, const ScenarioModifiers& scenario,
    const RngStream& rng);

// Counterparty sampling machinery with precomputed merchant/region tables.
// The candidate set is all merchants plus a bounded same-region person
// sample plus the initiator's remembered partners. The pick is a weighted
// mixture of normalized components: locality (uniform over same-region
// candidates, share scaled by the scenario's region mix), decayed memory
// (proportional to pair weights), merchant attractiveness (proportional to
// operating scale), and exploration (uniform over the candidate union).
class CounterpartySampler {
 public:
  CounterpartySampler(const Population& pop, const RegionTable& regions,
                      int region_pool_size,
                      double person_attractiveness_exponent = 1.0,
                      double person_attractiveness_floor = 1e-3);
  // Returns a population index, or -1 when no candidate exists.
  int select(int initiator, const InteractionState& state,
             const ScenarioModifiers& scenario, const MixtureWeights& weights,
             int64_t at_hour, RngStream& rng) const;

 private:
  struct AliasTable {
    std::vector<double> accept;
    std::vector<int32_t> alias;
    std::vector<int32_t> items;
    void build(const std::vector<int32_t>& ids, const std::vector<double>& w);
    int32_t draw(RngStream& rng) const;
    bool empty() const { return items.empty(); }
  };
  const Population* pop_;
  const RegionTable* regions_;
  int pool_size_;
  std::vector<std::vector<int32_t>> region_persons_;
  std::vector<AliasTable> region_person_alias_;
  std::vector<std::vector<int32_t>> region_merchants_;
  std::vector<int32_t> merchants_;
  std::vector<double> merchant_cum_scale_;
  double merchant_total_scale_ = 0.0;
};

// Convenience single-call form mirroring the sampler.
int select_counterparty(int initiator, const InteractionState& state,
                        const Population& pop, const ScenarioModifiers& scenario,
                        const MixtureWeights& weights, RngStream& rng);

// Amount, timestamp within the hour, format conditioned on counterparty
// kind; labels always benign.
Transaction sample_event_attributes(int initiator, int counterparty,
                                    int64_t hour, const Population& pop,
                                    const BackboneConfig& cfg, RngStream& rng);

// Eager-contract state update: decays every weight by gamma^(hour -
// last_window), adds increments for observed pairs and counterparty regions,
// advances last_window.
void update_interaction_state(InteractionState& state,
                              const std::vector<std::pair<int32_t, int32_t>>& pairs,
                              int64_t hour, double decay,
                              const RegionTable& regions,
                              double increment = 1.0,
                              double prune_epsilon = 0.0);

struct BackboneStats {
  int64_t events = 0;
  int64_t skipped_no_candidates = 0;
};

TransactionLog generate_backbone(const Population& pop, const BackboneConfig& cfg,
                                 uint64_t seed, BackboneStats* stats = nullptr);

}  // namespace txgen
