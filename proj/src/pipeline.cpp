#include "txgen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace txgen {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Timestamps
// ---------------------------------------------------------------------------

namespace {

// Civil-day conversions (Howard Hinnant's algorithms); avoids timezone state.
int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

}  // namespace

std::string format_iso8601(int64_t epoch_seconds) {
  int64_t days = epoch_seconds / 86'400;
  int64_t rem = epoch_seconds % 86'400;
  if (rem < 0) {
    rem += 86'400;
    --days;
  }
  int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lld",
                static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3600),
                static_cast<long long>((rem / 60) % 60),
                static_cast<long long>(rem % 60));
  return buf;
}

int64_t parse_iso8601(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &sec) != 6) {
    throw IoError("parse_iso8601: malformed timestamp '" + s + "'");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 ||
      mi > 59 || sec < 0 || sec > 60) {
    throw IoError("parse_iso8601: out-of-range field in '" + s + "'");
  }
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) *
             86'400 +
         h * 3600 + mi * 60 + sec;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kTxHeader =
    "Timestamp,From Bank,From Account,To Bank,To Account,Amount Paid,"
    "Payment Currency,Amount Received,Receiving Currency,Payment Format,"
    "is_laundering";

std::string format_amount(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::vector<std::string> split_line(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_amount(const std::string& s, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw IoError("import_csv: line " + std::to_string(line_no) +
                  ": bad amount '" + s + "'");
  }
  return v;
}

}  // namespace

void export_csv(const TransactionLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("export_csv: cannot open " + path);
  out << kTxHeader << "\n";
  for (const Transaction& tx : log.transactions) {
    out << format_iso8601(tx.timestamp) << ',' << tx.from.bank_id << ','
        << tx.from.account_id << ',' << tx.to.bank_id << ',' << tx.to.account_id
        << ',' << format_amount(tx.amount_paid) << ',' << tx.payment_currency
        << ',' << format_amount(tx.amount_received) << ','
        << tx.receiving_currency << ',' << to_string(tx.payment_format) << ','
        << (tx.is_laundering ? '1' : '0') << "\n";
  }
  if (!out) throw IoError("export_csv: write failed for " + path);
}

TransactionLog import_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("import_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("import_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTxHeader) {
    throw IoError("import_csv: header mismatch in " + path);
  }
  TransactionLog log;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_line(line);
    if (f.size() != 11) {
      throw IoError("import_csv: line " + std::to_string(line_no) +
                    ": expected 11 fields, got " + std::to_string(f.size()));
    }
    Transaction tx;
    tx.timestamp = parse_iso8601(f[0]);
    tx.from = {f[1], f[2]};
    tx.to = {f[3], f[4]};
    tx.amount_paid = parse_amount(f[5], line_no);
    tx.payment_currency = f[6];
    tx.amount_received = parse_amount(f[7], line_no);
    tx.receiving_currency = f[8];
    auto fmt = parse_payment_format(f[9]);
    if (!fmt.has_value()) {
      throw IoError("import_csv: line " + std::to_string(line_no) +
                    ": unknown payment format '" + f[9] + "'");
    }
    tx.payment_format = *fmt;
    if (f[10] != "0" && f[10] != "1") {
      throw IoError("import_csv: line " + std::to_string(line_no) +
                    ": label must be 0 or 1");
    }
    tx.is_laundering = f[10] == "1";
    log.transactions.push_back(std::move(tx));
  }
  return log;
}

void export_persons_csv(const Population& pop, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("export_persons_csv: cannot open " + path);
  out << "Bank,Account,Region,Age Band,Occupation,Income Tier,"
         "Base Daily Intensity,Amount Scale,Amount Dispersion,Exploration Rate";
  for (int h = 0; h < 24; ++h) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), ",D%02d", h);
    out << buf;
  }
  out << "\n";
  char buf[48];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v);
    out << buf;
  };
  for (const EntityProfile& p : pop.persons) {
    out << p.account.bank_id << ',' << p.account.account_id << ',' << p.region
        << ',' << p.age_band << ',' << p.occupation << ',' << p.income_tier;
    num(p.base_daily_intensity);
    num(p.amount_scale);
    num(p.amount_dispersion);
    num(p.exploration_rate);
    for (double v : p.diurnal_profile) num(v);
    out << "\n";
  }
}

void export_merchants_csv(const Population& pop, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("export_merchants_csv: cannot open " + path);
  out << "Bank,Account,Region,Business Type,Operating Scale\n";
  char buf[48];
  for (const MerchantProfile& m : pop.merchants) {
    std::snprintf(buf, sizeof(buf), "%.17g", m.operating_scale);
    out << m.account.bank_id << ',' << m.account.account_id << ',' << m.region
        << ',' << m.business_type << ',' << buf << "\n";
  }
}

Population import_profiles(const std::string& persons_path,
                           const std::string& merchants_path) {
  Population pop;
  {
    std::ifstream in(persons_path);
    if (!in) throw IoError("import_profiles: cannot open " + persons_path);
    std::string line;
    std::getline(in, line);
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto f = split_line(line);
      if (f.size() != 10 + 24) {
        throw IoError("import_profiles: persons line " + std::to_string(line_no));
      }
      EntityProfile p;
      p.account = {f[0], f[1]};
      p.region = f[2];
      p.age_band = f[3];
      p.occupation = f[4];
      p.income_tier = f[5];
      p.base_daily_intensity = std::stod(f[6]);
      p.amount_scale = std::stod(f[7]);
      p.amount_dispersion = std::stod(f[8]);
      p.exploration_rate = std::stod(f[9]);
      for (int h = 0; h < 24; ++h) p.diurnal_profile[h] = std::stod(f[10 + h]);
      pop.persons.push_back(std::move(p));
    }
  }
  {
    std::ifstream in(merchants_path);
    if (!in) throw IoError("import_profiles: cannot open " + merchants_path);
    std::string line;
    std::getline(in, line);
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto f = split_line(line);
      if (f.size() != 5) {
        throw IoError("import_profiles: merchants line " + std::to_string(line_no));
      }
      MerchantProfile m;
      m.account = {f[0], f[1]};
      m.region = f[2];
      m.business_type = f[3];
      m.operating_scale = std::stod(f[4]);
      pop.merchants.push_back(std::move(m));
    }
  }
  pop.rebuild_index();
  return pop;
}

// ---------------------------------------------------------------------------
// Splits and summaries
// ---------------------------------------------------------------------------

DatasetSplit make_splits(const TransactionLog& log) {
  const std::size_t n = log.transactions.size();
  if (n < 10) throw SplitError("make_splits: need at least 10 rows");
  DatasetSplit s;
  const std::size_t val = n / 5;
  const std::size_t test = n / 5;
  s.train_end = n - val - test;
  s.val_end = s.train_end + val;
  s.test_end = n;
  return s;
}

SummaryRecord summarize(const TransactionLog& log) {
  SummaryRecord rec;
  rec.transactions = log.transactions.size();
  if (log.transactions.empty()) return rec;
  std::unordered_map<std::string, char> seen;
  for (const Transaction& tx : log.transactions) {
    seen.emplace(account_key(tx.from), 0);
    seen.emplace(account_key(tx.to), 0);
    if (tx.is_laundering) ++rec.laundering;
  }
  rec.accounts = seen.size();
  rec.days = day_of(log.transactions.back().timestamp) -
             day_of(log.transactions.front().timestamp) + 1;
  if (rec.laundering > 0) {
    rec.one_per_n = static_cast<double>(rec.transactions) /
                    static_cast<double>(rec.laundering);
    rec.one_per_n_defined = true;
  }
  return rec;
}

std::size_t profile_columns_for_fraction(double fraction) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw ConfigError("profile fraction must lie in [0, 1]");
  }
  return static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(kProfileAttributeCount) - 1e-12));
}

void export_features(const TransactionLog& log, bool with_profiles,
                     double profile_fraction, const std::string& path) {
  const std::size_t attr_count =
      with_profiles ? profile_columns_for_fraction(profile_fraction) : 0;
  static const std::array<std::string_view, kProfileAttributeCount> kAttrs = {
      "region",       "age_band",        "occupation",
      "income_tier",  "base_daily_intensity", "amount_scale",
      "amount_dispersion", "exploration_rate"};

  std::ofstream out(path);
  if (!out) throw IoError("export_features: cannot open " + path);
  out << "tx_index";
  for (auto name : EdgeFeatures::names()) out << ',' << name;
  for (std::size_t a = 0; a < attr_count; ++a) out << ",sender_" << kAttrs[a];
  for (std::size_t a = 0; a < attr_count; ++a) out << ",receiver_" << kAttrs[a];
  out << ",is_laundering\n";

  FeatureExtractor extractor(log);
  char buf[48];
  auto emit_profile = [&](const AccountRef& ref) {
    const int idx = log.profiles.find(ref);
    const EntityProfile* person =
        idx >= 0 && !log.profiles.is_merchant(idx)
            ? &log.profiles.persons[static_cast<std::size_t>(idx)]
            : nullptr;
    const MerchantProfile* merchant =
        idx >= 0 && log.profiles.is_merchant(idx)
            ? &log.profiles.merchants[static_cast<std::size_t>(idx) -
                                      log.profiles.persons.size()]
            : nullptr;
    for (std::size_t a = 0; a < attr_count; ++a) {
      out << ',';
      if (person != nullptr) {
        switch (a) {
          case 0: out << person->region; break;
          case 1: out << person->age_band; break;
          case 2: out << person->occupation; break;
          case 3: out << person->income_tier; break;
          case 4:
            std::snprintf(buf, sizeof(buf), "%.17g", person->base_daily_intensity);
            out << buf;
            break;
          case 5:
            std::snprintf(buf, sizeof(buf), "%.17g", person->amount_scale);
            out << buf;
            break;
          case 6:
            std::snprintf(buf, sizeof(buf), "%.17g", person->amount_dispersion);
            out << buf;
            break;
          case 7:
            std::snprintf(buf, sizeof(buf), "%.17g", person->exploration_rate);
            out << buf;
            break;
        }
      } else if (merchant != nullptr && a == 0) {
        out << merchant->region;
      }
      // Merchant rows leave person-only attributes empty.
    }
  };

  for (std::size_t i = 0; i < log.transactions.size(); ++i) {
    const EdgeFeatures f = extractor.extract(i);
    out << i;
    for (double v : f.v) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    if (with_profiles) {
      emit_profile(log.transactions[i].from);
      emit_profile(log.transactions[i].to);
    }
    out << ',' << (log.transactions[i].is_laundering ? '1' : '0') << "\n";
  }
}

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

void write_fidelity_csvs(const FidelityReport& report, const std::string& daily_path,
                         const std::string& summary_path,
                         const std::string& tails_path,
                         const std::string& dataset_label) {
  {
    std::ofstream out(daily_path);
    if (!out) throw IoError("write_fidelity_csvs: cannot open " + daily_path);
    out << "day,active_nodes,edges,gcc_ratio,n_components,max_kcore,"
           "max_core_fraction,assortativity,assortativity_defined,transitivity\n";
    char buf[160];
    for (const auto& d : report.daily) {
      std::snprintf(buf, sizeof(buf), "%lld,%zu,%zu,%.6f,%d,%d,%.6f,%.6f,%d,%.6f",
                    static_cast<long long>(d.day), d.active_nodes, d.edge_count,
                    d.gcc_ratio, d.n_components, d.max_kcore,
                    d.max_core_fraction, d.assortativity,
                    d.assortativity_defined ? 1 : 0, d.transitivity);
      out << buf << "\n";
    }
  }
  {
    std::ofstream out(summary_path);
    if (!out) throw IoError("write_fidelity_csvs: cannot open " + summary_path);
    out << "metric,mean,std\n";
    char buf[120];
    auto row = [&](const char* name, double mean, double sd) {
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f", name, mean, sd);
      out << buf << "\n";
    };
    row("gcc_ratio", report.summary.mean.gcc_ratio, report.summary.stddev.gcc_ratio);
    row("n_components", report.summary.mean.n_components,
        report.summary.stddev.n_components);
    row("max_kcore", report.summary.mean.max_kcore, report.summary.stddev.max_kcore);
    row("max_core_fraction", report.summary.mean.max_core_fraction,
        report.summary.stddev.max_core_fraction);
    row("assortativity", report.summary.mean.assortativity,
        report.summary.stddev.assortativity);
    row("transitivity", report.summary.mean.transitivity,
        report.summary.stddev.transitivity);
  }
  {
    std::ofstream out(tails_path);
    if (!out) throw IoError("write_fidelity_csvs: cannot open " + tails_path);
    out << "dataset,distribution,xmin_mode,tail_pct,x_min,n,n_tail,alpha,"
           "alpha_unclamped,boundary,D,R,p\n";
    char buf[240];
    for (const auto& t : report.tails) {
      const bool fixed = t.mode.kind == XminMode::Kind::fixed_percentile;
      std::snprintf(buf, sizeof(buf),
                    "%s,%s,%s,%s,%.6f,%zu,%zu,%.6f,%.6f,%d,%.6f,%s,%s",
                    dataset_label.c_str(),
                    std::string(to_string(t.variable)).c_str(),
                    fixed ? "fixed_percentile" : "auto",
                    fixed ? std::to_string(static_cast<int>(t.mode.percentile)).c_str()
                          : "--",
                    t.x_min, t.n, t.n_tail, t.alpha, t.alpha_unclamped,
                    t.boundary_flag ? 1 : 0, t.ks_d,
                    t.has_lr ? std::to_string(t.r_loglik).c_str() : "--",
                    t.has_lr ? std::to_string(t.p_value).c_str() : "--");
      out << buf << "\n";
    }
  }
}

void write_embedding_reports_csv(const std::vector<EmbeddingReport>& reports,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_embedding_reports_csv: cannot open " + path);
  out << "cluster_id,accepted,rejection_reason,edges_added\n";
  for (const auto& r : reports) {
    out << r.cluster_id << ',' << (r.accepted ? 1 : 0) << ','
        << to_string(r.reason) << ',' << r.edges_added << "\n";
  }
}

void write_grpo_log_csv(const std::vector<GrpoTrainingRow>& rows,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_grpo_log_csv: cannot open " + path);
  out << "iteration,mean_return,mean_composite\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.8f,%.8f", r.iteration, r.mean_return,
                  r.mean_composite);
    out << buf << "\n";
  }
}

void write_split_files(const TransactionLog& log, const DatasetSplit& split,
                       const std::string& dir) {
  auto emit = [&](std::size_t begin, std::size_t end, const std::string& name) {
    TransactionLog part;
    part.transactions.assign(log.transactions.begin() + begin,
                             log.transactions.begin() + end);
    export_csv(part, (fs::path(dir) / name).string());
  };
  emit(0, split.train_end, "train.csv");
  emit(split.train_end, split.val_end, "val.csv");
  emit(split.val_end, split.test_end, "test.csv");
}

void write_summary_csv(const SummaryRecord& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_summary_csv: cannot open " + path);
  out << "days,accounts,transactions,laundering,one_per_n\n";
  char buf[128];
  if (summary.one_per_n_defined) {
    std::snprintf(buf, sizeof(buf), "%lld,%zu,%zu,%zu,%.2f",
                  static_cast<long long>(summary.days), summary.accounts,
                  summary.transactions, summary.laundering, summary.one_per_n);
  } else {
    std::snprintf(buf, sizeof(buf), "%lld,%zu,%zu,%zu,--",
                  static_cast<long long>(summary.days), summary.accounts,
                  summary.transactions, summary.laundering);
  }
  out << buf << "\n";
}

uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("hash_file: cannot open " + path);
  uint64_t h = 0xCBF29CE484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void PipelineConfig::validate() const {
  population.validate();
  backbone.validate();
  grpo.validate();
  if (target_prevalence <= 0.0 || target_prevalence > 0.05) {
    throw ConfigError("pipeline: target prevalence must lie in (0, 0.05]");
  }
  if (out_dir.empty()) throw ConfigError("pipeline: out_dir required");
}

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void load_categorical(const json& j, const char* key, CategoricalDist& dist) {
  if (!j.contains(key)) return;
  const json& d = j.at(key);
  dist.values = d.at("values").get<std::vector<std::string>>();
  dist.probs = d.at("probs").get<std::vector<double>>();
}

}  // namespace

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  PipelineConfig cfg;
  maybe(j, "seed", cfg.seed);
  maybe(j, "target_prevalence", cfg.target_prevalence);
  maybe(j, "out_dir", cfg.out_dir);
  maybe(j, "monitor_negative_sample", cfg.monitor_negative_sample);
  maybe(j, "monitor_positive_replicas", cfg.monitor_positive_replicas);
  maybe(j, "eval_context_edges", cfg.eval_context_edges);
  maybe(j, "rollout_extra_steps", cfg.rollout_extra_steps);
  maybe(j, "max_variants", cfg.max_variants);
  if (j.contains("population")) {
    const json& p = j.at("population");
    maybe(p, "n_persons", cfg.population.n_persons);
    maybe(p, "n_merchants", cfg.population.n_merchants);
    maybe(p, "n_banks", cfg.population.n_banks);
    maybe(p, "intensity_log_median", cfg.population.intensity_log_median);
    maybe(p, "intensity_log_sigma", cfg.population.intensity_log_sigma);
    maybe(p, "intensity_cap", cfg.population.intensity_cap);
    maybe(p, "merchant_scale_alpha", cfg.population.merchant_scale_alpha);
    maybe(p, "merchant_scale_cap", cfg.population.merchant_scale_cap);
    load_categorical(p, "region_marginal", cfg.population.region_marginal);
    load_categorical(p, "age_band_marginal", cfg.population.age_band_marginal);
    load_categorical(p, "business_type_marginal",
                     cfg.population.business_type_marginal);
  }
  if (j.contains("backbone")) {
    const json& b = j.at("backbone");
    maybe(b, "horizon_days", cfg.backbone.horizon_days);
    maybe(b, "start_timestamp", cfg.backbone.start_timestamp);
    maybe(b, "memory_decay_per_hour", cfg.backbone.memory_decay_per_hour);
    maybe(b, "region_pool_size", cfg.backbone.region_pool_size);
    if (b.contains("mixture")) {
      const json& m = b.at("mixture");
      maybe(m, "local", cfg.backbone.mixture.local);
      maybe(m, "memory", cfg.backbone.mixture.memory);
      maybe(m, "merchant", cfg.backbone.mixture.merchant);
      maybe(m, "explore", cfg.backbone.mixture.explore);
    }
    if (b.contains("amount")) {
      const json& a = b.at("amount");
      maybe(a, "p_tail", cfg.backbone.amount.p_tail);
      maybe(a, "tail_alpha", cfg.backbone.amount.tail_alpha);
      maybe(a, "tail_threshold", cfg.backbone.amount.tail_threshold);
    }
    if (b.contains("scenario")) {
      const json& s = b.at("scenario");
      maybe(s, "shock_sigma", cfg.backbone.scenario.shock_sigma);
      maybe(s, "shock_bound", cfg.backbone.scenario.shock_bound);
      maybe(s, "min_factor", cfg.backbone.scenario.min_factor);
      maybe(s, "max_factor", cfg.backbone.scenario.max_factor);
      maybe(s, "weekend_multiplier", cfg.backbone.scenario.weekend_multiplier);
      if (s.contains("holiday_multipliers")) {
        for (const auto& [day, mult] : s.at("holiday_multipliers").items()) {
          cfg.backbone.scenario.holiday_multipliers[std::stoll(day)] =
              mult.get<double>();
        }
      }
    }
  }
  if (j.contains("grpo")) {
    const json& g = j.at("grpo");
    maybe(g, "group_size", cfg.grpo.group_size);
    maybe(g, "t_max", cfg.grpo.t_max);
    maybe(g, "lambda_mon", cfg.grpo.lambda_mon);
    maybe(g, "epsilon", cfg.grpo.epsilon);
    maybe(g, "learning_rate", cfg.grpo.learning_rate);
    maybe(g, "iterations", cfg.grpo.iterations);
    maybe(g, "invalid_penalty", cfg.grpo.invalid_penalty);
    maybe(g, "invalid_termination_count", cfg.grpo.invalid_termination_count);
    maybe(g, "temperature", cfg.grpo.temperature);
    if (g.contains("budget")) {
      maybe(g.at("budget"), "max_edits", cfg.grpo.budget.max_edits);
      maybe(g.at("budget"), "max_new_nodes", cfg.grpo.budget.max_new_nodes);
    }
  }
  if (j.contains("embedder")) {
    const json& e = j.at("embedder");
    maybe(e, "burst_cap_multiplier", cfg.embedder.burst_cap_multiplier);
    maybe(e, "activity_window_days", cfg.embedder.activity_window_days);
    maybe(e, "max_assignments", cfg.embedder.max_assignments);
    maybe(e, "max_anchor_tries", cfg.embedder.max_anchor_tries);
  }
  if (j.contains("monitor")) {
    const json& m = j.at("monitor");
    maybe(m, "iterations", cfg.monitor.iterations);
    maybe(m, "learning_rate", cfg.monitor.learning_rate);
    maybe(m, "l2", cfg.monitor.l2);
    maybe(m, "val_fraction", cfg.monitor.val_fraction);
    maybe(m, "shuffle_seed", cfg.monitor.shuffle_seed);
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

// Training rows for the reference monitor: a deterministic sample of
// backbone edges as negatives plus seed-cluster instantiations as positives.
void build_monitor_training_set(const TransactionLog& backbone_log,
                                const std::vector<IllicitCluster>& seeds,
                                const PipelineConfig& cfg, RngStream rng,
                                std::vector<EdgeFeatures>& features,
                                std::vector<uint8_t>& labels) {
  FeatureExtractor extractor(backbone_log);
  const std::size_t n = backbone_log.transactions.size();
  const std::size_t want =
      std::min<std::size_t>(cfg.monitor_negative_sample, n);
  RngStream neg_rng = rng.fork("negatives");
  std::vector<std::size_t> picks;
  if (want == n) {
    picks.resize(n);
    std::iota(picks.begin(), picks.end(), 0);
  } else {
    for (std::size_t i = 0; i < want; ++i) {
      picks.push_back(static_cast<std::size_t>(
          neg_rng.uniform_int(0, static_cast<int64_t>(n) - 1)));
    }
  }
  for (std::size_t idx : picks) {
    features.push_back(extractor.extract(idx));
    labels.push_back(0);
  }

  const int64_t t0 = backbone_log.transactions.front().timestamp;
  const int64_t t1 = backbone_log.transactions.back().timestamp;
  RngStream pos_rng = rng.fork("positives");
  for (int rep = 0; rep < cfg.monitor_positive_replicas; ++rep) {
    const IllicitCluster& seed = seeds[rep % seeds.size()];
    RngStream r = pos_rng.fork(static_cast<uint64_t>(rep));
    TransactionLog mini;
    const int64_t anchor = t0 + r.uniform_int(0, std::max<int64_t>(t1 - t0, 1));
    for (const auto& e : seed.edges) {
      Transaction tx;
      tx.timestamp = anchor + e.rel_time;
      tx.from = {"XT", "r" + std::to_string(e.from_role) + "_" + std::to_string(rep)};
      tx.to = {"XT", "r" + std::to_string(e.to_role) + "_" + std::to_string(rep)};
      tx.amount_paid = tx.amount_received = e.amount;
      tx.payment_currency = tx.receiving_currency = cfg.backbone.currency;
      tx.payment_format = cfg.embedder.laundering_format;
      tx.is_laundering = true;
      mini.transactions.push_back(std::move(tx));
    }
    std::stable_sort(mini.transactions.begin(), mini.transactions.end(),
                     [](const Transaction& a, const Transaction& b) {
                       return a.timestamp < b.timestamp;
                     });
    FeatureExtractor mini_extractor(mini);
    for (std::size_t i = 0; i < mini.transactions.size(); ++i) {
      features.push_back(mini_extractor.extract(i));
      labels.push_back(1);
    }
  }
}

TransactionLog held_out_context(const TransactionLog& backbone_log,
                                int max_edges) {
  // Final slice of the backbone, capped; serves as the fixed benign context.
  TransactionLog ctx;
  const std::size_t n = backbone_log.transactions.size();
  const std::size_t take = std::min<std::size_t>(max_edges, n);
  ctx.transactions.assign(backbone_log.transactions.end() - take,
                          backbone_log.transactions.end());
  return ctx;
}

}  // namespace

PipelineOutputs run_pipeline(const PipelineConfig& config) {
  config.validate();
  std::vector<std::string> written;
  auto track = [&](const std::string& path) {
    written.push_back(path);
    return path;
  };
  auto cleanup = [&]() {
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  };

  try {
    fs::create_directories(config.out_dir);
  } catch (const std::exception& e) {
    throw StageError("setup", e.what());
  }
  const fs::path dir(config.out_dir);
  PipelineOutputs out;
  RngStream root(config.seed);

  try {
    // Stage 1: population + backbone.
    Population pop;
    TransactionLog backbone_log;
    try {
      pop = sample_profiles(config.population, root.fork("population").key());
      backbone_log = generate_backbone(pop, config.backbone,
                                       root.fork("backbone").key());
      if (backbone_log.transactions.empty()) {
        throw GenerationError("backbone produced no transactions");
      }
    } catch (const std::exception& e) {
      throw StageError("generate", e.what());
    }

    // Stage 2: monitor pre-training on backbone + seed clusters.
    const std::vector<IllicitCluster> seeds = builtin_seed_clusters();
    MonitorModel monitor;
    try {
      std::vector<EdgeFeatures> features;
      std::vector<uint8_t> labels;
      build_monitor_training_set(backbone_log, seeds, config,
                                 root.fork("monitor"), features, labels);
      monitor = train_monitor(features, labels, config.monitor);
    } catch (const std::exception& e) {
      throw StageError("monitor", e.what());
    }

    // Stage 3: GRPO hardening.
    GrpoResult grpo_result;
    TransactionLog context =
        held_out_context(backbone_log, config.eval_context_edges);
    try {
      ClusterScorer scorer(monitor, context);
      grpo_result = run_grpo(seeds, scorer, config.grpo, root.fork("grpo").key());
    } catch (const std::exception& e) {
      throw StageError("harden", e.what());
    }

    // Stage 4: variant synthesis + embedding to the target prevalence.
    TransactionLog final_log;
    std::vector<EmbeddingReport> reports;
    std::vector<IllicitCluster> variants;
    try {
      const double p = config.target_prevalence;
      const std::size_t n0 = backbone_log.transactions.size();
      double mean_edges = 0.0;
      for (const auto& c : grpo_result.hardened) {
        mean_edges += static_cast<double>(c.edges.size());
      }
      mean_edges /= static_cast<double>(grpo_result.hardened.size());
      const double needed_edges = p * static_cast<double>(n0) / (1.0 - p);
      std::size_t n_variants = static_cast<std::size_t>(
          std::ceil(needed_edges / std::max(mean_edges, 1.0) * 1.6)) + 4;
      n_variants = std::min<std::size_t>(n_variants, config.max_variants);
      RngStream vr = root.fork("variants");
      for (std::size_t i = 0; i < n_variants; ++i) {
        const IllicitCluster& base =
            grpo_result.hardened[i % grpo_result.hardened.size()];
        IllicitCluster v = policy_rollout(grpo_result.policy, base, config.grpo,
                                          config.rollout_extra_steps,
                                          vr.fork(static_cast<uint64_t>(i)));
        v.id = base.id + "_v" + std::to_string(i);
        variants.push_back(std::move(v));
      }
      auto embedded = embed_all(variants, backbone_log, p, config.embedder,
                                root.fork("embed").key());
      final_log = std::move(embedded.first);
      reports = std::move(embedded.second);
      backbone_log = TransactionLog{};  // large at full scale
    } catch (const std::exception& e) {
      throw StageError("embed", e.what());
    }

    // Stage 5: fidelity + exports.
    try {
      FidelityReport fid = fidelity_report(final_log);
      out.transactions_csv = track((dir / "transactions.csv").string());
      export_csv(final_log, out.transactions_csv);
      out.persons_csv = track((dir / "persons.csv").string());
      export_persons_csv(pop, out.persons_csv);
      out.merchants_csv = track((dir / "merchants.csv").string());
      export_merchants_csv(pop, out.merchants_csv);
      out.monitor_path = track((dir / "monitor.txt").string());
      save_monitor(monitor, out.monitor_path);
      out.policy_path = track((dir / "policy.txt").string());
      save_policy(grpo_result.policy, out.policy_path);
      out.grpo_log_csv = track((dir / "grpo_training_log.csv").string());
      write_grpo_log_csv(grpo_result.training_log, out.grpo_log_csv);
      out.clusters_path = track((dir / "hardened_clusters.txt").string());
      save_clusters(grpo_result.hardened, out.clusters_path);
      out.embedding_reports_csv = track((dir / "embedding_reports.csv").string());
      write_embedding_reports_csv(reports, out.embedding_reports_csv);
      out.invariants_daily_csv = track((dir / "invariants_daily.csv").string());
      out.invariants_summary_csv = track((dir / "invariants_summary.csv").string());
      out.tail_fits_csv = track((dir / "tail_fits.csv").string());
      write_fidelity_csvs(fid, out.invariants_daily_csv,
                          out.invariants_summary_csv, out.tail_fits_csv,
                          "generated");
      const DatasetSplit split = make_splits(final_log);
      track((dir / "train.csv").string());
      track((dir / "val.csv").string());
      track((dir / "test.csv").string());
      write_split_files(final_log, split, dir.string());
      out.splits_csv = (dir / "train.csv").string();
      out.summary_csv = track((dir / "summary.csv").string());
      out.summary = summarize(final_log);
      write_summary_csv(out.summary, out.summary_csv);
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError("report", e.what());
    }
    return out;
  } catch (...) {
    cleanup();
    throw;
  }
}

}  // namespace txgen
