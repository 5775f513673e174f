#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <set>
#include <string>

#include "txgen/model.hpp"

using namespace txgen;

TEST_CASE("account_key formats and validates") {
  CHECK(account_key({"12", "A77"}) == "12:A77");
  CHECK(account_key({"0", "0"}) == "0:0");
  CHECK_THROWS_AS(account_key({"", "A"}), ValidationError);
  CHECK_THROWS_AS(account_key({"B", ""}), ValidationError);
}

TEST_CASE("account_key is injective over random distinct refs") {
  RngStream rng(7);
  std::set<std::pair<std::string, std::string>> refs;
  std::set<std::string> keys;
  while (refs.size() < 10'000) {
    AccountRef r{"B" + std::to_string(rng.uniform_int(0, 99)),
                 "A" + std::to_string(rng.uniform_int(0, 1'000'000))};
    if (refs.emplace(r.bank_id, r.account_id).second) {
      keys.insert(account_key(r));
    }
  }
  CHECK(keys.size() == refs.size());
}

namespace {

Transaction well_formed() {
  Transaction tx;
  tx.timestamp = 1'700'000'000;
  tx.from = {"B1", "A1"};
  tx.to = {"B1", "A2"};
  tx.amount_paid = tx.amount_received = 100.0;
  tx.payment_currency = tx.receiving_currency = "USD";
  tx.payment_format = PaymentFormat::mobile;
  return tx;
}

}  // namespace

TEST_CASE("validate_transaction reports each violated invariant") {
  CHECK(validate_transaction(well_formed()).empty());

  Transaction neg = well_formed();
  neg.amount_paid = -1.0;
  auto v = validate_transaction(neg);
  REQUIRE(v.size() == 2);  // negative amount also breaks same-currency equality
  CHECK(v[0] == TxViolation::NegativeAmount);

  Transaction mismatch = well_formed();
  mismatch.amount_received = 99.0;
  v = validate_transaction(mismatch);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == TxViolation::CurrencyAmountMismatch);

  Transaction self = well_formed();
  self.to = self.from;
  v = validate_transaction(self);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == TxViolation::SelfTransaction);

  Transaction fx = well_formed();
  fx.receiving_currency = "EUR";
  fx.amount_received = 92.0;
  CHECK(validate_transaction(fx).empty());
}

TEST_CASE("sample_profiles: empty counts, determinism, invariants") {
  PopulationConfig cfg = PopulationConfig::defaults();
  cfg.n_persons = 0;
  cfg.n_merchants = 0;
  Population empty = sample_profiles(cfg, 1);
  CHECK(empty.size() == 0);

  cfg.n_persons = 500;
  cfg.n_merchants = 40;
  Population a = sample_profiles(cfg, 99);
  Population b = sample_profiles(cfg, 99);
  CHECK(a == b);
  Population c = sample_profiles(cfg, 100);
  CHECK_FALSE(a == c);

  for (const auto& p : a.persons) {
    double total = 0.0;
    for (double v : p.diurnal_profile) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.base_daily_intensity >= 0.0);
    CHECK(p.exploration_rate >= 0.0);
    CHECK(p.exploration_rate <= 1.0);
    CHECK(p.amount_dispersion > 0.0);
  }
  for (const auto& m : a.merchants) CHECK(m.operating_scale > 0.0);

  // Index round-trips.
  CHECK(a.find(a.persons[17].account) == 17);
  CHECK(a.find(a.merchants[5].account) == static_cast<int>(a.persons.size()) + 5);
  CHECK(a.find("nope:nope") == -1);
}

TEST_CASE("sample_profiles rejects invalid marginals") {
  PopulationConfig cfg = PopulationConfig::defaults();
  cfg.region_marginal.probs[0] = -0.5;
  CHECK_THROWS_AS(sample_profiles(cfg, 1), ConfigError);
  cfg = PopulationConfig::defaults();
  for (auto& p : cfg.age_band_marginal.probs) p = 0.0;
  CHECK_THROWS_AS(sample_profiles(cfg, 1), ConfigError);
}

TEST_CASE("empirical attribute marginals stay within TV 0.02 of config") {
  PopulationConfig cfg = PopulationConfig::defaults();
  cfg.n_persons = 10'000;
  cfg.n_merchants = 0;
  Population pop = sample_profiles(cfg, 2024);

  auto tv_distance = [](const std::map<std::string, double>& expected,
                        const std::map<std::string, double>& observed) {
    double tv = 0.0;
    for (const auto& [k, p] : expected) {
      auto it = observed.find(k);
      tv += std::abs(p - (it == observed.end() ? 0.0 : it->second));
    }
    return tv / 2.0;
  };

  std::map<std::string, double> region_obs, age_obs, occ_obs, inc_obs;
  for (const auto& p : pop.persons) {
    region_obs[p.region] += 1.0;
    age_obs[p.age_band] += 1.0;
    occ_obs[p.occupation] += 1.0;
    inc_obs[p.income_tier] += 1.0;
  }
  for (auto* m : {&region_obs, &age_obs, &occ_obs, &inc_obs}) {
    for (auto& [k, v] : *m) v /= cfg.n_persons;
  }

  std::map<std::string, double> region_exp;
  for (std::size_t i = 0; i < cfg.region_marginal.values.size(); ++i) {
    region_exp[cfg.region_marginal.values[i]] = cfg.region_marginal.probs[i];
  }
  std::map<std::string, double> age_exp;
  for (std::size_t i = 0; i < cfg.age_band_marginal.values.size(); ++i) {
    age_exp[cfg.age_band_marginal.values[i]] = cfg.age_band_marginal.probs[i];
  }
  CHECK(tv_distance(region_exp, region_obs) < 0.02);
  CHECK(tv_distance(age_exp, age_obs) < 0.02);
  CHECK(tv_distance(cfg.implied_occupation_marginal(), occ_obs) < 0.02);
  CHECK(tv_distance(cfg.implied_income_marginal(), inc_obs) < 0.02);
}

TEST_CASE("round_cents") {
  CHECK(round_cents(10.004) == doctest::Approx(10.0));
  CHECK(round_cents(10.005) == doctest::Approx(10.01));
  CHECK(round_cents(0.0) == 0.0);
}
