#include "txgen/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace txgen {

void MixtureWeights::validate() const {
  for (double w : {local, memory, merchant, explore}) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw ConfigError("mixture: weights must be finite and >= 0");
    }
  }
  if (std::abs(local + memory + merchant + explore - 1.0) > 1e-9) {
    throw ConfigError("mixture: weights must sum to 1");
  }
}

void BackboneConfig::validate() const {
  if (horizon_days < 1) throw ConfigError("backbone: horizon must be >= 1 day");
  mixture.validate();
  if (memory_decay_per_hour <= 0.0 || memory_decay_per_hour >= 1.0) {
    throw ConfigError("backbone: memory decay must lie in (0, 1)");
  }
  if (region_pool_size < 1) throw ConfigError("backbone: region pool must be >= 1");
  if (amount.p_tail < 0.0 || amount.p_tail > 1.0) {
    throw ConfigError("backbone: tail probability must lie in [0, 1]");
  }
  if (amount.tail_alpha <= 1.0 || amount.tail_threshold <= 0.0) {
    throw ConfigError("backbone: tail model requires alpha > 1, threshold > 0");
  }
  if (scenario.min_factor <= 0.0 || scenario.max_factor < scenario.min_factor) {
    throw ConfigError("backbone: scenario clamp band invalid");
  }
  auto check_fmt = [](const std::vector<double>& probs, const char* what) {
    if (probs.size() != kPaymentFormatCount) {
      throw ConfigError(std::string("backbone: ") + what + " needs 5 entries");
    }
    double total = 0.0;
    for (double p : probs) {
      if (p < 0.0) throw ConfigError(std::string("backbone: ") + what + " negative");
      total += p;
    }
    if (total <= 0.0) throw ConfigError(std::string("backbone: ") + what + " zero-sum");
  };
  check_fmt(person_format_probs, "person format mix");
  check_fmt(merchant_format_probs, "merchant format mix");
  double fx_total = 0.0;
  for (const auto& fx : fx_table) {
    if (fx.currency.empty() || fx.rate <= 0.0 || fx.share < 0.0) {
      throw ConfigError("backbone: fx entries need currency, rate > 0, share >= 0");
    }
    fx_total += fx.share;
  }
  if (fx_total > 1.0) throw ConfigError("backbone: fx shares exceed 1");
}

RegionTable::RegionTable(const Population& pop) {
  std::map<std::string, int> seen;
  account_region.resize(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const std::string& r = pop.region(i);
    auto [it, inserted] = seen.emplace(r, static_cast<int>(seen.size()));
    if (inserted) names.push_back(r);
    account_region[i] = it->second;
  }
}

int RegionTable::id_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

double InteractionState::memory_weight(int initiator, int counterparty,
                                       int64_t at_hour) const {
  if (initiator < 0 || initiator >= static_cast<int>(memory.size())) return 0.0;
  auto it = memory[initiator].find(counterparty);
  if (it == memory[initiator].end()) return 0.0;
  const int64_t elapsed = at_hour - it->second.hour;
  if (elapsed <= 0) return it->second.weight;
  return it->second.weight * std::pow(decay_per_hour, static_cast<double>(elapsed));
}

double InteractionState::hotspot_weight(std::size_t region_id,
                                        int64_t at_hour) const {
  if (region_id >= region_hotspots.size()) return 0.0;
  const Entry& e = region_hotspots[region_id];
  const int64_t elapsed = at_hour - e.hour;
  if (elapsed <= 0) return e.weight;
  return e.weight * std::pow(decay_per_hour, static_cast<double>(elapsed));
}

ScenarioModifiers initial_scenario(const RegionTable& regions) {
  ScenarioModifiers s;
  s.day = -1;
  // Start from the population's empirical region composition.
  std::vector<double> counts(regions.names.size(), 0.0);
  for (int32_t r : regions.account_region) counts[r] += 1.0;
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  s.region_mix.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    s.region_mix[i] = total > 0.0 ? counts[i] / total
                                  : 1.0 / static_cast<double>(counts.size());
  }
  return s;
}

ScenarioModifiers step_scenario(int64_t day, const ScenarioModifiers& prev,
                                const ScenarioConfig& cfg, RngStream rng) {
  if (day != prev.day + 1) {
    throw GenerationError("step_scenario: days must advance one at a time");
  }
  ScenarioModifiers next = prev;
  next.day = day;
  double eta = cfg.shock_sigma > 0.0 ? rng.normal(0.0, cfg.shock_sigma) : 0.0;
  eta = std::clamp(eta, -cfg.shock_bound, cfg.shock_bound);
  next.base_factor =
      std::clamp(prev.base_factor * std::exp(eta), cfg.min_factor, cfg.max_factor);
  double calendar = 1.0;
  const int64_t dow = ((day % 7) + 7) % 7;
  if (dow == 5 || dow == 6) calendar *= cfg.weekend_multiplier;
  auto it = cfg.holiday_multipliers.find(day);
  if (it != cfg.holiday_multipliers.end()) calendar *= it->second;
  next.global_intensity_factor =
      std::clamp(next.base_factor * calendar, cfg.min_factor, cfg.max_factor);

  if (!next.region_mix.empty()) {
    double total = 0.0;
    for (auto& w : next.region_mix) {
      double zeta = cfg.region_jitter_sigma > 0.0
                        ? rng.normal(0.0, cfg.region_jitter_sigma)
                        : 0.0;
      zeta = std::clamp(zeta, -cfg.region_jitter_bound, cfg.region_jitter_bound);
      w = std::max(w * std::exp(zeta), 1e-12);
      total += w;
    }
    for (auto& w : next.region_mix) w /= total;
  }
  return next;
}

std::vector<std::pair<int32_t, int64_t>> sample_initiators(
    int64_t hour, const Population& pop, const ScenarioModifiers& scenario,
    const RngStream& rng) {
  std::vector<std::pair<int32_t, int64_t>> out;
  const int hour_of_day = static_cast<int>(((hour % 24) + 24) % 24);
  const RngStream base = rng.fork(static_cast<uint64_t>(hour));
  for (std::size_t p = 0; p < pop.persons.size(); ++p) {
    const EntityProfile& prof = pop.persons[p];
    const double lambda = prof.base_daily_intensity *
                          prof.diurnal_profile[hour_of_day] *
                          scenario.global_intensity_factor;
    if (lambda <= 0.0) continue;
    RngStream prng = base.fork(static_cast<uint64_t>(p));
    const int64_t count = prng.poisson(lambda);
    if (count > 0) out.emplace_back(static_cast<int32_t>(p), count);
  }
  return out;
}

void CounterpartySampler::AliasTable::build(const std::vector<int32_t>& ids,
                                            const std::vector<double>& w) {
  items = ids;
  const std::size_t n = ids.size();
  accept.assign(n, 1.0);
  alias.assign(n, 0);
  if (n == 0) return;
  double total = 0.0;
  for (double x : w) total += x;
  std::vector<double> scaled(n);
  std::vector<int32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = w[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<int32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const int32_t s = small.back();
    small.pop_back();
    const int32_t l = large.back();
    accept[s] = scaled[s];
    alias[s] = l;
    scaled[l] -= 1.0 - scaled[s];
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
}

int32_t CounterpartySampler::AliasTable::draw(RngStream& rng) const {
  const std::size_t i = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<int64_t>(items.size()) - 1));
  return rng.next_double() < accept[i] ? items[i] : items[alias[i]];
}

CounterpartySampler::CounterpartySampler(const Population& pop,
                                         const RegionTable& regions,
                                         int region_pool_size,
                                         double person_attractiveness_exponent,
                                         double person_attractiveness_floor)
    : pop_(&pop), regions_(&regions), pool_size_(region_pool_size) {
  region_persons_.resize(regions.names.size());
  region_merchants_.resize(regions.names.size());
  for (std::size_t i = 0; i < pop.persons.size(); ++i) {
    region_persons_[regions.account_region[i]].push_back(static_cast<int32_t>(i));
  }
  region_person_alias_.resize(regions.names.size());
  for (std::size_t r = 0; r < region_persons_.size(); ++r) {
    std::vector<double> weights;
    weights.reserve(region_persons_[r].size());
    for (int32_t p : region_persons_[r]) {
      const double base = std::max(pop.persons[p].base_daily_intensity,
                                   person_attractiveness_floor);
      weights.push_back(std::pow(base, person_attractiveness_exponent));
    }
    region_person_alias_[r].build(region_persons_[r], weights);
  }
  for (std::size_t m = 0; m < pop.merchants.size(); ++m) {
    const int32_t idx = static_cast<int32_t>(pop.persons.size() + m);
    merchants_.push_back(idx);
    region_merchants_[regions.account_region[idx]].push_back(idx);
    merchant_total_scale_ += pop.merchants[m].operating_scale;
    merchant_cum_scale_.push_back(merchant_total_scale_);
  }
}

int CounterpartySampler::select(int initiator, const InteractionState& state,
                                const ScenarioModifiers& scenario,
                                const MixtureWeights& weights, int64_t at_hour,
                                RngStream& rng) const {
  const Population& pop = *pop_;
  const int region = regions_->account_region[initiator];
  const double mix_r = region < static_cast<int>(scenario.region_mix.size())
                           ? scenario.region_mix[region]
                           : 0.0;

  // Memory partners (persons and merchants), decayed to the current hour.
  std::vector<int32_t> mem_ids;
  std::vector<double> mem_weights;
  double mem_total = 0.0;
  std::size_t mem_persons = 0;
  std::size_t mem_persons_region = 0;
  if (initiator < static_cast<int>(state.memory.size())) {
    const auto& slots = state.memory[initiator];
    mem_ids.reserve(slots.size());
    for (const auto& [cid, entry] : slots) {
      const int64_t elapsed = at_hour - entry.hour;
      const double w =
          elapsed <= 0
              ? entry.weight
              : entry.weight * std::pow(state.decay_per_hour,
                                        static_cast<double>(elapsed));
      if (w <= 0.0) continue;
      mem_ids.push_back(cid);
      mem_weights.push_back(w);
      mem_total += w;
      if (!pop.is_merchant(cid)) {
        ++mem_persons;
        if (regions_->account_region[cid] == region) ++mem_persons_region;
      }
    }
    // Canonical order so the categorical draw is schedule-independent.
    std::vector<std::size_t> order(mem_ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return mem_ids[a] < mem_ids[b]; });
    std::vector<int32_t> ids2(mem_ids.size());
    std::vector<double> w2(mem_ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      ids2[i] = mem_ids[order[i]];
      w2[i] = mem_weights[order[i]];
    }
    mem_ids = std::move(ids2);
    mem_weights = std::move(w2);
  }
  std::unordered_set<int32_t> mem_lookup(mem_ids.begin(), mem_ids.end());

  // Same-region person sample, disjoint from memory partners and initiator.
  // Drawn by profile attractiveness so active accounts are more visible.
  const auto& region_pool = region_persons_[region];
  std::vector<int32_t> sample;
  if (static_cast<int>(region_pool.size()) <= pool_size_ + 1) {
    for (int32_t p : region_pool) {
      if (p != initiator && !mem_lookup.count(p)) sample.push_back(p);
    }
  } else {
    std::unordered_set<int32_t> picked;
    const AliasTable& table = region_person_alias_[region];
    for (int tries = 0; tries < pool_size_; ++tries) {
      const int32_t p = table.draw(rng);
      if (p == initiator || mem_lookup.count(p)) continue;
      if (picked.insert(p).second) sample.push_back(p);
    }
  }

  const std::size_t region_merchant_count = region_merchants_[region].size();
  const std::size_t candidates =
      sample.size() + mem_persons + merchants_.size();
  if (candidates == 0 && mem_ids.empty()) return -1;

  // Weighted mixture of normalized components: each weight is the share of
  // picks routed to that component when it is non-empty. The scenario's
  // region mix scales the local share (neutral at the uniform mix), so hot
  // regions see more local ties. Groups are disjoint by construction
  // (merchants global, memory persons, fresh same-region sample).
  const double local_members = static_cast<double>(
      sample.size() + mem_persons_region + region_merchant_count);
  const double n_regions = static_cast<double>(regions_->names.size());
  const double mass_local =
      local_members > 0.0 ? weights.local * mix_r * n_regions : 0.0;
  const double mass_memory = mem_total > 0.0 ? weights.memory : 0.0;
  const double mass_merchant =
      !merchants_.empty() ? weights.merchant : 0.0;
  const double mass_explore = candidates > 0 ? weights.explore : 0.0;
  const std::array<double, 4> masses = {mass_local, mass_memory, mass_merchant,
                                        mass_explore};
  const double total_mass =
      masses[0] + masses[1] + masses[2] + masses[3];
  if (total_mass <= 0.0) return -1;

  const std::size_t component = rng.categorical(masses);
  switch (component) {
    case 0: {  // local: uniform over same-region members of the pool
      double target = rng.next_double() * local_members;
      if (target < static_cast<double>(sample.size())) {
        return sample[static_cast<std::size_t>(target)];
      }
      target -= static_cast<double>(sample.size());
      if (target < static_cast<double>(mem_persons_region)) {
        std::size_t want = static_cast<std::size_t>(target);
        for (std::size_t i = 0; i < mem_ids.size(); ++i) {
          const int32_t cid = mem_ids[i];
          if (!pop.is_merchant(cid) && regions_->account_region[cid] == region) {
            if (want == 0) return cid;
            --want;
          }
        }
      }
      const auto& rm = region_merchants_[region];
      if (!rm.empty()) {
        return rm[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int64_t>(rm.size()) - 1))];
      }
      return -1;
    }
    case 1: {  // memory, proportional to decayed weights
      const std::size_t i = rng.categorical(mem_weights);
      return mem_ids[i];
    }
    case 2: {  // merchant, proportional to operating scale
      const double target = rng.next_double() * merchant_total_scale_;
      const auto it = std::lower_bound(merchant_cum_scale_.begin(),
                                       merchant_cum_scale_.end(), target);
      const std::size_t i = std::min(
          static_cast<std::size_t>(it - merchant_cum_scale_.begin()),
          merchants_.size() - 1);
      return merchants_[i];
    }
    default: {  // explore: uniform over the candidate union
      double target = rng.next_double() * static_cast<double>(candidates);
      if (target < static_cast<double>(sample.size())) {
        return sample[static_cast<std::size_t>(target)];
      }
      target -= static_cast<double>(sample.size());
      if (target < static_cast<double>(mem_persons)) {
        std::size_t want = static_cast<std::size_t>(target);
        for (std::size_t i = 0; i < mem_ids.size(); ++i) {
          if (!pop.is_merchant(mem_ids[i])) {
            if (want == 0) return mem_ids[i];
            --want;
          }
        }
      }
      target -= static_cast<double>(mem_persons);
      const std::size_t i = std::min(static_cast<std::size_t>(target),
                                     merchants_.size() - 1);
      return merchants_.empty() ? -1 : merchants_[i];
    }
  }
}

int select_counterparty(int initiator, const InteractionState& state,
                        const Population& pop, const ScenarioModifiers& scenario,
                        const MixtureWeights& weights, RngStream& rng) {
  RegionTable regions(pop);
  CounterpartySampler sampler(pop, regions, 256, 1.0, 1e-3);
  return sampler.select(initiator, state, scenario, weights, state.last_window,
                        rng);
}

Transaction sample_event_attributes(int initiator, int counterparty,
                                    int64_t hour, const Population& pop,
                                    const BackboneConfig& cfg, RngStream& rng) {
  if (initiator == counterparty) {
    throw GenerationError("sample_event_attributes: self transaction");
  }
  const EntityProfile& prof = pop.persons[initiator];
  Transaction tx;
  tx.timestamp = cfg.start_timestamp + hour * 3600 + rng.uniform_int(0, 3599);
  tx.from = pop.account(initiator);
  tx.to = pop.account(counterparty);
  double amount;
  if (cfg.amount.p_tail > 0.0 && rng.next_double() < cfg.amount.p_tail) {
    amount = rng.pareto(cfg.amount.tail_alpha, cfg.amount.tail_threshold);
  } else {
    amount = rng.lognormal(prof.amount_scale, prof.amount_dispersion);
  }
  tx.amount_paid = std::max(round_cents(amount), 0.01);
  tx.amount_received = tx.amount_paid;
  tx.payment_currency = tx.receiving_currency = cfg.currency;
  if (!cfg.fx_table.empty()) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (const auto& fx : cfg.fx_table) {
      acc += fx.share;
      if (u < acc) {
        tx.receiving_currency = fx.currency;
        tx.amount_received = std::max(round_cents(tx.amount_paid * fx.rate), 0.01);
        break;
      }
    }
  }
  const auto& fmt_probs = pop.is_merchant(counterparty)
                              ? cfg.merchant_format_probs
                              : cfg.person_format_probs;
  tx.payment_format = static_cast<PaymentFormat>(rng.categorical(fmt_probs));
  tx.is_laundering = false;
  return tx;
}

void update_interaction_state(InteractionState& state,
                              const std::vector<std::pair<int32_t, int32_t>>& pairs,
                              int64_t hour, double decay,
                              const RegionTable& regions, double increment,
                              double prune_epsilon) {
  if (hour <= state.last_window) {
    throw GenerationError("update_interaction_state: hour must advance");
  }
  state.decay_per_hour = decay;
  if (state.region_hotspots.size() < regions.names.size()) {
    state.region_hotspots.resize(regions.names.size());
  }
  auto touch = [&](InteractionState::Entry& e, double add) {
    const int64_t elapsed = hour - e.hour;
    const double carried =
        elapsed > 0 && e.weight > 0.0
            ? e.weight * std::pow(decay, static_cast<double>(elapsed))
            : (elapsed > 0 ? 0.0 : e.weight);
    e.weight = carried + add;
    e.hour = hour;
  };
  for (const auto& [from, to] : pairs) {
    if (from >= static_cast<int32_t>(state.memory.size())) {
      state.memory.resize(static_cast<std::size_t>(from) + 1);
    }
    touch(state.memory[from][to], increment);
    const int32_t region = regions.account_region[to];
    touch(state.region_hotspots[region], increment);
  }
  if (prune_epsilon > 0.0) {
    for (auto& slots : state.memory) {
      std::erase_if(slots, [&](const auto& kv) {
        const int64_t elapsed = hour - kv.second.hour;
        const double w =
            elapsed > 0
                ? kv.second.weight * std::pow(decay, static_cast<double>(elapsed))
                : kv.second.weight;
        return w < prune_epsilon;
      });
    }
  }
  state.last_window = hour;
}

TransactionLog generate_backbone(const Population& pop, const BackboneConfig& cfg,
                                 uint64_t seed, BackboneStats* stats) {
  cfg.validate();
  if (pop.persons.empty()) {
    throw ConfigError("generate_backbone: need at least one person");
  }
  RegionTable regions(pop);
  CounterpartySampler sampler(pop, regions, cfg.region_pool_size,
                              cfg.person_attractiveness_exponent,
                              cfg.person_attractiveness_floor);
  InteractionState state;
  state.memory.resize(pop.persons.size());
  state.region_hotspots.resize(regions.names.size());
  state.decay_per_hour = cfg.memory_decay_per_hour;
  state.last_window = -1;

  RngStream root(seed);
  const RngStream scenario_rng = root.fork("backbone.scenario");
  const RngStream init_rng = root.fork("backbone.initiators");
  const RngStream event_rng = root.fork("backbone.events");

  TransactionLog log;
  log.profiles = pop;
  ScenarioModifiers scenario = initial_scenario(regions);
  BackboneStats local_stats;

  std::vector<Transaction> window_txs;
  std::vector<std::pair<int32_t, int32_t>> window_pairs;
  for (int64_t day = 0; day < cfg.horizon_days; ++day) {
    scenario = step_scenario(day, scenario, cfg.scenario,
                             scenario_rng.fork(static_cast<uint64_t>(day)));
    for (int h = 0; h < 24; ++h) {
      const int64_t hour = day * 24 + h;
      const auto initiators = sample_initiators(hour, pop, scenario, init_rng);
      window_txs.clear();
      window_pairs.clear();
      for (const auto& [person, count] : initiators) {
        const RngStream person_rng =
            event_rng.fork(static_cast<uint64_t>(hour))
                .fork(static_cast<uint64_t>(person));
        // Per-person effective mixture: the profile's exploration rate
        // replaces the configured explore share.
        const EntityProfile& prof = pop.persons[person];
        MixtureWeights weights = cfg.mixture;
        {
          const double e = std::clamp(prof.exploration_rate, 0.0, 1.0);
          const double rest = weights.local + weights.memory + weights.merchant;
          const double scale = rest > 0.0 ? (1.0 - e) / rest : 0.0;
          weights.local *= scale;
          weights.memory *= scale;
          weights.merchant *= scale;
          weights.explore = e;
        }
        for (int64_t k = 0; k < count; ++k) {
          RngStream pick_rng =
              person_rng.fork(static_cast<uint64_t>(k)).fork("pick");
          RngStream attr_rng =
              person_rng.fork(static_cast<uint64_t>(k)).fork("attr");
          const int counterparty =
              sampler.select(person, state, scenario, weights, hour, pick_rng);
          if (counterparty < 0) {
            ++local_stats.skipped_no_candidates;
            continue;
          }
          window_txs.push_back(sample_event_attributes(person, counterparty,
                                                       hour, pop, cfg, attr_rng));
          window_pairs.emplace_back(person, counterparty);
          ++local_stats.events;
        }
      }
      // Canonical pair order keeps the state identical regardless of the
      // initiator scheduling above.
      std::sort(window_pairs.begin(), window_pairs.end());
      update_interaction_state(state, window_pairs, hour,
                               cfg.memory_decay_per_hour, regions,
                               cfg.memory_increment, cfg.memory_prune_epsilon);
      std::stable_sort(window_txs.begin(), window_txs.end(),
                       [](const Transaction& a, const Transaction& b) {
                         return a.timestamp < b.timestamp;
                       });
      log.transactions.insert(log.transactions.end(), window_txs.begin(),
                              window_txs.end());
    }
  }
  if (stats != nullptr) *stats = local_stats;
  return log;
}

}  // namespace txgen
