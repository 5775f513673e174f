// Domain types shared by every other module: accounts, profiles,
// transactions, logs, and the population sampler.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "txgen/rng.hpp"

namespace txgen {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct GenerationError : Error {
  using Error::Error;
};
struct MetricsError : Error {
  using Error::Error;
};
struct FitError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Accounts
// ---------------------------------------------------------------------------

struct AccountRef {
  std::string bank_id;
  std::string account_id;
  bool operator==(const AccountRef&) const = default;
  auto operator<=>(const AccountRef&) const = default;
};

// Canonical "bank:account" key; unique across banks. Throws ValidationError
// when either field is empty.
std::string account_key(const AccountRef& ref);

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

struct EntityProfile {
  AccountRef account;
  std::string region;
  std::string age_band;
  std::string occupation;
  std::string income_tier;
  double base_daily_intensity = 0.0;  // expected initiations per day
  double amount_scale = 0.0;          // log of median transaction amount
  double amount_dispersion = 1.0;     // std of log amounts
  std::array<double, 24> diurnal_profile{};  // sums to 1
  double exploration_rate = 0.1;             // in [0, 1]
  bool operator==(const EntityProfile&) const = default;
};

struct MerchantProfile {
  AccountRef account;
  std::string region;
  std::string business_type;
  double operating_scale = 1.0;  // attractiveness weight, > 0
  bool operator==(const MerchantProfile&) const = default;
};

// Persons first, then merchants; index() maps a canonical key to a dense id
// in [0, size()), with merchants occupying [persons.size(), size()).
struct Population {
  std::vector<EntityProfile> persons;
  std::vector<MerchantProfile> merchants;

  std::size_t size() const { return persons.size() + merchants.size(); }
  bool is_merchant(std::size_t idx) const { return idx >= persons.size(); }
  const AccountRef& account(std::size_t idx) const;
  const std::string& region(std::size_t idx) const;

  void rebuild_index();
  int find(const std::string& key) const;  // -1 when absent
  int find(const AccountRef& ref) const;

  bool operator==(const Population& o) const {
    return persons == o.persons && merchants == o.merchants;
  }

 private:
  std::unordered_map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// Transactions
// ---------------------------------------------------------------------------

enum class PaymentFormat : uint8_t { mobile, card, transfer, cash, cheque };
inline constexpr int kPaymentFormatCount = 5;

std::string_view to_string(PaymentFormat f);
std::optional<PaymentFormat> parse_payment_format(std::string_view s);

struct Transaction {
  int64_t timestamp = 0;  // epoch seconds, UTC
  AccountRef from;
  AccountRef to;
  double amount_paid = 0.0;
  std::string payment_currency;
  double amount_received = 0.0;
  std::string receiving_currency;
  PaymentFormat payment_format = PaymentFormat::transfer;
  bool is_laundering = false;
  bool operator==(const Transaction&) const = default;
};

enum class TxViolation : uint8_t {
  EmptyEndpoint,
  SelfTransaction,
  NegativeAmount,
  CurrencyAmountMismatch,
};
std::string_view to_string(TxViolation v);

// Returns every violated invariant; an empty list means the row is valid.
std::vector<TxViolation> validate_transaction(const Transaction& tx);

struct TransactionLog {
  std::vector<Transaction> transactions;  // non-decreasing timestamps
  Population profiles;
};

// Checks temporal ordering, per-row validity, and (when profiles are present)
// endpoint coverage. Returns human-readable problems, empty when clean.
std::vector<std::string> validate_log(const TransactionLog& log);

// ---------------------------------------------------------------------------
// Population sampling
// ---------------------------------------------------------------------------

struct CategoricalDist {
  std::vector<std::string> values;
  std::vector<double> probs;
  void validate(std::string_view what) const;  // throws ConfigError
  const std::string& sample(RngStream& rng) const;
};

struct PopulationConfig {
  int n_persons = 48'500;
  int n_merchants = 1'500;
  int n_banks = 12;

  CategoricalDist region_marginal;
  CategoricalDist age_band_marginal;
  // Chained conditionals: region -> occupation -> income tier.
  std::map<std::string, CategoricalDist> occupation_given_region;
  std::map<std::string, CategoricalDist> income_given_occupation;
  CategoricalDist business_type_marginal;

  // Behavioral priors.
  double intensity_log_median = -4.45;  // lognormal intensity prior
  double intensity_log_sigma = 2.4;
  double intensity_cap = 15.0;                        // events/day
  std::map<std::string, double> amount_scale_by_tier;  // log-median by tier
  double amount_scale_jitter = 0.22;
  double amount_dispersion_base = 0.60;
  double amount_dispersion_jitter = 0.10;
  double amount_dispersion_min = 0.3;
  double amount_dispersion_max = 1.6;
  double exploration_min = 0.02;
  double exploration_max = 0.18;
  double merchant_scale_alpha = 1.8;  // Pareto density exponent
  double merchant_scale_min = 1.0;
  double merchant_scale_cap = 1e4;
  std::vector<std::array<double, 24>> diurnal_archetypes;
  std::vector<double> diurnal_archetype_probs;
  double diurnal_jitter = 0.15;

  static PopulationConfig defaults();
  void validate() const;  // throws ConfigError

  // Marginal over occupations / income tiers implied by the chained
  // conditionals; used by tests and reporting.
  std::map<std::string, double> implied_occupation_marginal() const;
  std::map<std::string, double> implied_income_marginal() const;
};

// Deterministic under (config, seed).
Population sample_profiles(const PopulationConfig& config, uint64_t seed);

// Rounds to cent granularity; all generator-produced amounts pass through
// this so CSV round-trips are exact.
double round_cents(double amount);

}  // namespace txgen
