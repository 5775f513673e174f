#include "txgen/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace txgen {

std::string account_key(const AccountRef& ref) {
  if (ref.bank_id.empty() || ref.account_id.empty()) {
    throw ValidationError("account_key: bank_id and account_id must be non-empty");
  }
  std::string key;
  key.reserve(ref.bank_id.size() + 1 + ref.account_id.size());
  key += ref.bank_id;
  key += ':';
  key += ref.account_id;
  return key;
}

const AccountRef& Population::account(std::size_t idx) const {
  return idx < persons.size() ? persons[idx].account
                              : merchants[idx - persons.size()].account;
}

const std::string& Population::region(std::size_t idx) const {
  return idx < persons.size() ? persons[idx].region
                              : merchants[idx - persons.size()].region;
}

void Population::rebuild_index() {
  index_.clear();
  index_.reserve(size());
  for (std::size_t i = 0; i < persons.size(); ++i) {
    index_.emplace(account_key(persons[i].account), static_cast<int>(i));
  }
  for (std::size_t i = 0; i < merchants.size(); ++i) {
    index_.emplace(account_key(merchants[i].account),
                   static_cast<int>(persons.size() + i));
  }
}

int Population::find(const std::string& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? -1 : it->second;
}

int Population::find(const AccountRef& ref) const {
  return find(account_key(ref));
}

std::string_view to_string(PaymentFormat f) {
  switch (f) {
    case PaymentFormat::mobile: return "mobile";
    case PaymentFormat::card: return "card";
    case PaymentFormat::transfer: return "transfer";
    case PaymentFormat::cash: return "cash";
    case PaymentFormat::cheque: return "cheque";
  }
  return "unknown";
}

std::optional<PaymentFormat> parse_payment_format(std::string_view s) {
  if (s == "mobile") return PaymentFormat::mobile;
  if (s == "card") return PaymentFormat::card;
  if (s == "transfer") return PaymentFormat::transfer;
  if (s == "cash") return PaymentFormat::cash;
  if (s == "cheque") return PaymentFormat::cheque;
  return std::nullopt;
}

std::string_view to_string(TxViolation v) {
  switch (v) {
    case TxViolation::EmptyEndpoint: return "EmptyEndpoint";
    case TxViolation::SelfTransaction: return "SelfTransaction";
    case TxViolation::NegativeAmount: return "NegativeAmount";
    case TxViolation::CurrencyAmountMismatch: return "CurrencyAmountMismatch";
  }
  return "Unknown";
}

std::vector<TxViolation> validate_transaction(const Transaction& tx) {
  std::vector<TxViolation> out;
  const bool from_ok = !tx.from.bank_id.empty() && !tx.from.account_id.empty();
  const bool to_ok = !tx.to.bank_id.empty() && !tx.to.account_id.empty();
  if (!from_ok || !to_ok) out.push_back(TxViolation::EmptyEndpoint);
  if (from_ok && to_ok && tx.from == tx.to) {
    out.push_back(TxViolation::SelfTransaction);
  }
  if (tx.amount_paid < 0.0 || tx.amount_received < 0.0) {
    out.push_back(TxViolation::NegativeAmount);
  }
  if (tx.payment_currency == tx.receiving_currency &&
      tx.amount_paid != tx.amount_received) {
    out.push_back(TxViolation::CurrencyAmountMismatch);
  }
  return out;
}

std::vector<std::string> validate_log(const TransactionLog& log) {
  std::vector<std::string> problems;
  int64_t prev = INT64_MIN;
  const bool have_profiles = log.profiles.size() > 0;
  for (std::size_t i = 0; i < log.transactions.size(); ++i) {
    const Transaction& tx = log.transactions[i];
    if (tx.timestamp < prev) {
      problems.push_back("row " + std::to_string(i) + ": timestamp decreases");
    }
    prev = tx.timestamp;
    for (TxViolation v : validate_transaction(tx)) {
      problems.push_back("row " + std::to_string(i) + ": " +
                         std::string(to_string(v)));
    }
    if (have_profiles) {
      if (log.profiles.find(tx.from) < 0 || log.profiles.find(tx.to) < 0) {
        problems.push_back("row " + std::to_string(i) + ": endpoint without profile");
      }
    }
  }
  return problems;
}

void CategoricalDist::validate(std::string_view what) const {
  if (values.empty() || values.size() != probs.size()) {
    throw ConfigError(std::string(what) + ": values/probs size mismatch or empty");
  }
  double total = 0.0;
  for (double p : probs) {
    if (p < 0.0 || !std::isfinite(p)) {
      throw ConfigError(std::string(what) + ": negative or non-finite probability");
    }
    total += p;
  }
  if (total <= 0.0) throw ConfigError(std::string(what) + ": zero-sum marginal");
}

const std::string& CategoricalDist::sample(RngStream& rng) const {
  return values[rng.categorical(probs)];
}

double round_cents(double amount) {
  return std::round(amount * 100.0) / 100.0;
}

// ---------------------------------------------------------------------------
// Default configuration tables
// ---------------------------------------------------------------------------

namespace {

std::array<double, 24> normalized(std::array<double, 24> a) {
  double s = std::accumulate(a.begin(), a.end(), 0.0);
  for (auto& v : a) v /= s;
  return a;
}

std::vector<std::array<double, 24>> default_archetypes() {
  // Daytime, commuter (bimodal), night owl, flat.
  std::array<double, 24> daytime{};
  for (int h = 0; h < 24; ++h) {
    daytime[h] = 0.2 + 3.0 * std::exp(-0.5 * std::pow((h - 14.0) / 4.5, 2.0));
  }
  std::array<double, 24> commuter{};
  for (int h = 0; h < 24; ++h) {
    commuter[h] = 0.15 + 2.0 * std::exp(-0.5 * std::pow((h - 8.0) / 1.8, 2.0)) +
                  2.4 * std::exp(-0.5 * std::pow((h - 18.5) / 2.2, 2.0));
  }
  std::array<double, 24> night{};
  for (int h = 0; h < 24; ++h) {
    double d = std::min(std::abs(h - 23.0), std::abs(h + 1.0));
    night[h] = 0.15 + 2.5 * std::exp(-0.5 * std::pow(d / 3.0, 2.0));
  }
  std::array<double, 24> flat{};
  flat.fill(1.0);
  return {normalized(daytime), normalized(commuter), normalized(night),
          normalized(flat)};
}

}  // namespace

PopulationConfig PopulationConfig::defaults() {
  PopulationConfig c;
  c.region_marginal.values = {"R1", "R2", "R3", "R4", "R5", "R6", "R7", "R8"};
  c.region_marginal.probs = {0.18, 0.16, 0.15, 0.13, 0.12, 0.11, 0.08, 0.07};

  c.age_band_marginal.values = {"18-25", "26-35", "36-45",
                                "46-55", "56-65", "65+"};
  c.age_band_marginal.probs = {0.12, 0.24, 0.22, 0.18, 0.14, 0.10};

  const std::vector<std::string> occupations = {
      "service",      "retail",    "engineer",  "healthcare", "education",
      "finance",      "transport", "construction", "agriculture",
      "self_employed"};
  const std::vector<double> occ_base = {0.16, 0.13, 0.11, 0.10, 0.09,
                                        0.08, 0.09, 0.09, 0.07, 0.08};
  const std::array<double, 4> tilt = {0.35, 0.0, -0.25, 0.10};
  for (std::size_t r = 0; r < c.region_marginal.values.size(); ++r) {
    CategoricalDist d;
    d.values = occupations;
    d.probs.resize(occupations.size());
    double total = 0.0;
    for (std::size_t j = 0; j < occupations.size(); ++j) {
      d.probs[j] = occ_base[j] * (1.0 + tilt[(r + j) % tilt.size()]);
      total += d.probs[j];
    }
    for (auto& p : d.probs) p /= total;
    c.occupation_given_region[c.region_marginal.values[r]] = std::move(d);
  }

  const std::vector<std::string> tiers = {"low", "lower_mid", "mid",
                                          "upper_mid", "high"};
  // Rough income profile per occupation: higher index -> richer mix.
  const std::map<std::string, std::array<double, 5>> income_rows = {
      {"service", {0.34, 0.34, 0.22, 0.08, 0.02}},
      {"retail", {0.30, 0.34, 0.24, 0.09, 0.03}},
      {"engineer", {0.04, 0.14, 0.34, 0.32, 0.16}},
      {"healthcare", {0.08, 0.22, 0.34, 0.24, 0.12}},
      {"education", {0.12, 0.28, 0.36, 0.18, 0.06}},
      {"finance", {0.03, 0.10, 0.27, 0.34, 0.26}},
      {"transport", {0.22, 0.36, 0.28, 0.11, 0.03}},
      {"construction", {0.18, 0.34, 0.30, 0.14, 0.04}},
      {"agriculture", {0.36, 0.34, 0.20, 0.08, 0.02}},
      {"self_employed", {0.20, 0.24, 0.26, 0.18, 0.12}},
  };
  for (const auto& [occ, row] : income_rows) {
    CategoricalDist d;
    d.values = tiers;
    d.probs.assign(row.begin(), row.end());
    c.income_given_occupation[occ] = std::move(d);
  }

  c.business_type_marginal.values = {
      "grocery",   "restaurant", "electronics", "clothing",
      "utilities", "telecom",    "transport",   "entertainment",
      "healthcare", "education", "marketplace", "fuel"};
  c.business_type_marginal.probs = {0.16, 0.13, 0.08, 0.09, 0.10, 0.07,
                                    0.08, 0.07, 0.06, 0.05, 0.06, 0.05};

  c.amount_scale_by_tier = {
      {"low", std::log(75.0)},       {"lower_mid", std::log(106.0)},
      {"mid", std::log(150.0)},      {"upper_mid", std::log(212.0)},
      {"high", std::log(300.0)},
  };

  c.diurnal_archetypes = default_archetypes();
  c.diurnal_archetype_probs = {0.45, 0.30, 0.10, 0.15};
  return c;
}

void PopulationConfig::validate() const {
  if (n_persons < 0 || n_merchants < 0) {
    throw ConfigError("population: counts must be >= 0");
  }
  if (n_banks < 1) throw ConfigError("population: n_banks must be >= 1");
  region_marginal.validate("region_marginal");
  age_band_marginal.validate("age_band_marginal");
  business_type_marginal.validate("business_type_marginal");
  for (const auto& region : region_marginal.values) {
    auto it = occupation_given_region.find(region);
    if (it == occupation_given_region.end()) {
      throw ConfigError("population: missing occupation table for region " + region);
    }
    it->second.validate("occupation_given_region[" + region + "]");
    for (const auto& occ : it->second.values) {
      auto jt = income_given_occupation.find(occ);
      if (jt == income_given_occupation.end()) {
        throw ConfigError("population: missing income table for occupation " + occ);
      }
      jt->second.validate("income_given_occupation[" + occ + "]");
    }
  }
  if (diurnal_archetypes.empty() ||
      diurnal_archetypes.size() != diurnal_archetype_probs.size()) {
    throw ConfigError("population: diurnal archetypes/probs mismatch");
  }
  if (intensity_log_sigma < 0.0 || amount_scale_jitter < 0.0 ||
      amount_dispersion_jitter < 0.0) {
    throw ConfigError("population: negative prior scale");
  }
  if (exploration_min < 0.0 || exploration_max > 1.0 ||
      exploration_min > exploration_max) {
    throw ConfigError("population: exploration bounds must satisfy 0 <= min <= max <= 1");
  }
  if (merchant_scale_alpha <= 1.0 || merchant_scale_min <= 0.0) {
    throw ConfigError("population: merchant scale prior invalid");
  }
}

std::map<std::string, double> PopulationConfig::implied_occupation_marginal() const {
  std::map<std::string, double> out;
  double region_total =
      std::accumulate(region_marginal.probs.begin(), region_marginal.probs.end(), 0.0);
  for (std::size_t r = 0; r < region_marginal.values.size(); ++r) {
    const auto& table = occupation_given_region.at(region_marginal.values[r]);
    double p_region = region_marginal.probs[r] / region_total;
    double occ_total =
        std::accumulate(table.probs.begin(), table.probs.end(), 0.0);
    for (std::size_t j = 0; j < table.values.size(); ++j) {
      out[table.values[j]] += p_region * table.probs[j] / occ_total;
    }
  }
  return out;
}

std::map<std::string, double> PopulationConfig::implied_income_marginal() const {
  std::map<std::string, double> out;
  for (const auto& [occ, p_occ] : implied_occupation_marginal()) {
    const auto& table = income_given_occupation.at(occ);
    double total = std::accumulate(table.probs.begin(), table.probs.end(), 0.0);
    for (std::size_t j = 0; j < table.values.size(); ++j) {
      out[table.values[j]] += p_occ * table.probs[j] / total;
    }
  }
  return out;
}

namespace {

std::string bank_name(int b) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "B%02d", b + 1);
  return buf;
}

std::array<double, 24> jittered_diurnal(const std::array<double, 24>& base,
                                        double jitter, RngStream& rng) {
  std::array<double, 24> out{};
  double total = 0.0;
  for (int h = 0; h < 24; ++h) {
    double f = std::exp(rng.normal(0.0, jitter));
    out[h] = std::max(base[h] * f, 0.0);
    total += out[h];
  }
  for (auto& v : out) v /= total;
  // Exact simplex normalization: push the residual into the largest bin.
  double rem = 1.0 - std::accumulate(out.begin(), out.end(), 0.0);
  auto it = std::max_element(out.begin(), out.end());
  *it += rem;
  return out;
}

}  // namespace

Population sample_profiles(const PopulationConfig& config, uint64_t seed) {
  config.validate();
  Population pop;
  pop.persons.reserve(config.n_persons);
  pop.merchants.reserve(config.n_merchants);

  RngStream root(seed);
  RngStream persons_rng = root.fork("profiles.persons");
  for (int i = 0; i < config.n_persons; ++i) {
    RngStream rng = persons_rng.fork(static_cast<uint64_t>(i));
    EntityProfile p;
    char acct[16];
    std::snprintf(acct, sizeof(acct), "P%07d", i + 1);
    p.account = {bank_name(static_cast<int>(
                     rng.uniform_int(0, config.n_banks - 1))),
                 acct};
    p.region = config.region_marginal.sample(rng);
    p.age_band = config.age_band_marginal.sample(rng);
    p.occupation = config.occupation_given_region.at(p.region).sample(rng);
    p.income_tier = config.income_given_occupation.at(p.occupation).sample(rng);
    p.base_daily_intensity =
        std::min(rng.lognormal(config.intensity_log_median, config.intensity_log_sigma),
                 config.intensity_cap);
    p.amount_scale = config.amount_scale_by_tier.at(p.income_tier) +
                     rng.normal(0.0, config.amount_scale_jitter);
    p.amount_dispersion = std::clamp(
        config.amount_dispersion_base +
            std::abs(rng.normal(0.0, config.amount_dispersion_jitter)),
        config.amount_dispersion_min, config.amount_dispersion_max);
    std::size_t arch = rng.categorical(config.diurnal_archetype_probs);
    p.diurnal_profile =
        jittered_diurnal(config.diurnal_archetypes[arch], config.diurnal_jitter, rng);
    p.exploration_rate = rng.uniform(config.exploration_min, config.exploration_max);
    pop.persons.push_back(std::move(p));
  }

  RngStream merchants_rng = root.fork("profiles.merchants");
  for (int i = 0; i < config.n_merchants; ++i) {
    RngStream rng = merchants_rng.fork(static_cast<uint64_t>(i));
    MerchantProfile m;
    char acct[16];
    std::snprintf(acct, sizeof(acct), "M%06d", i + 1);
    m.account = {bank_name(static_cast<int>(
                     rng.uniform_int(0, config.n_banks - 1))),
                 acct};
    m.region = config.region_marginal.sample(rng);
    m.business_type = config.business_type_marginal.sample(rng);
    m.operating_scale = std::min(
        rng.pareto(config.merchant_scale_alpha, config.merchant_scale_min),
        config.merchant_scale_cap);
    pop.merchants.push_back(std::move(m));
  }

  pop.rebuild_index();
  return pop;
}

}  // namespace txgen
