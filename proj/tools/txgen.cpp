// txgen CLI: end-to-end dataset generation plus stage-wise tools for
// hardening, embedding, diagnostics, splits, summaries, and feature export.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "txgen/pipeline.hpp"

namespace fs = std::filesystem;
using namespace txgen;

namespace {

// Stage-specific exit codes; 0 = success, 2 = usage/config.
enum ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kGenerate = 3,
  kHarden = 4,
  kEmbed = 5,
  kAnalyze = 6,
  kSplit = 7,
  kSummarize = 8,
  kExportFeatures = 9,
  kIo = 10,
};

PipelineConfig load_config(const std::string& config_path, uint64_t seed,
                           bool seed_set, const std::string& out_dir) {
  PipelineConfig cfg;
  if (!config_path.empty()) cfg = PipelineConfig::from_json_file(config_path);
  if (seed_set) cfg.seed = seed;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  return cfg;
}

TransactionLog load_log_with_optional_profiles(const std::string& input,
                                               const std::string& persons,
                                               const std::string& merchants) {
  TransactionLog log = import_csv(input);
  if (!persons.empty() && !merchants.empty()) {
    log.profiles = import_profiles(persons, merchants);
  }
  return log;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic transaction-graph benchmark generator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "JSON configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed, "Root seed (64-bit)");

  auto* generate = app.add_subcommand(
      "generate", "Run the full pipeline: backbone, monitor, hardening, "
                  "embedding, diagnostics, exports");

  auto* harden = app.add_subcommand(
      "harden", "Train the edit policy against a backbone CSV and write "
                "hardened clusters");
  std::string harden_backbone, harden_clusters;
  harden->add_option("--backbone", harden_backbone, "Backbone transactions CSV")
      ->required()
      ->check(CLI::ExistingFile);
  harden->add_option("--clusters", harden_clusters,
                     "Seed cluster file (defaults to the built-in library)");

  auto* embed = app.add_subcommand("embed",
                                   "Embed clusters into a backbone CSV");
  std::string embed_backbone, embed_clusters, embed_persons, embed_merchants;
  double embed_prevalence = 0.00153;
  embed->add_option("--backbone", embed_backbone, "Backbone transactions CSV")
      ->required()
      ->check(CLI::ExistingFile);
  embed->add_option("--clusters", embed_clusters, "Cluster file to embed")
      ->required()
      ->check(CLI::ExistingFile);
  embed->add_option("--persons", embed_persons, "persons.csv for profiles")
      ->required()
      ->check(CLI::ExistingFile);
  embed->add_option("--merchants", embed_merchants, "merchants.csv for profiles")
      ->required()
      ->check(CLI::ExistingFile);
  embed->add_option("--prevalence", embed_prevalence,
                    "Target laundering share in (0, 0.05]");

  auto* analyze = app.add_subcommand(
      "analyze", "Graph-invariant and tail diagnostics for a transactions CSV");
  std::string analyze_input, analyze_label = "dataset";
  analyze->add_option("--input", analyze_input, "Transactions CSV")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--label", analyze_label, "Dataset label in reports");

  auto* split = app.add_subcommand("split", "Write 6:2:2 temporal splits");
  std::string split_input;
  split->add_option("--input", split_input, "Transactions CSV")
      ->required()
      ->check(CLI::ExistingFile);

  auto* summarize_cmd = app.add_subcommand("summarize", "Dataset summary line");
  std::string summarize_input;
  summarize_cmd->add_option("--input", summarize_input, "Transactions CSV")
      ->required()
      ->check(CLI::ExistingFile);

  auto* feats = app.add_subcommand("export-features",
                                   "Per-edge feature table for detectors");
  std::string feats_input, feats_persons, feats_merchants, feats_out;
  bool with_profiles = false;
  double fraction = 1.0;
  feats->add_option("--input", feats_input, "Transactions CSV")
      ->required()
      ->check(CLI::ExistingFile);
  feats->add_option("--persons", feats_persons, "persons.csv (for profiles)");
  feats->add_option("--merchants", feats_merchants, "merchants.csv");
  feats->add_flag("--with-profiles", with_profiles, "Append profile columns");
  feats->add_option("--fraction", fraction,
                    "Fraction of profile attributes to keep, in [0, 1]");
  feats->add_option("--output", feats_out, "Output CSV (default <out>/features.csv)");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;
  const std::string dir = out_dir.empty() ? "out" : out_dir;

  try {
    if (generate->parsed()) {
      PipelineConfig cfg;
      try {
        cfg = load_config(config_path, seed, seed_set, out_dir);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
      }
      try {
        PipelineOutputs outs = run_pipeline(cfg);
        std::printf("wrote %s\n", outs.transactions_csv.c_str());
        std::printf("days=%lld accounts=%zu transactions=%zu laundering=%zu",
                    static_cast<long long>(outs.summary.days),
                    outs.summary.accounts, outs.summary.transactions,
                    outs.summary.laundering);
        if (outs.summary.one_per_n_defined) {
          std::printf(" one_per_n=%.2f", outs.summary.one_per_n);
        }
        std::printf("\n");
        return kOk;
      } catch (const StageError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        if (e.stage == "generate") return kGenerate;
        if (e.stage == "monitor" || e.stage == "harden") return kHarden;
        if (e.stage == "embed") return kEmbed;
        if (e.stage == "report") return kAnalyze;
        return kGenerate;
      }
    }

    if (harden->parsed()) {
      PipelineConfig cfg = load_config(config_path, seed, seed_set, out_dir);
      TransactionLog backbone_log = import_csv(harden_backbone);
      std::vector<IllicitCluster> seeds = harden_clusters.empty()
                                              ? builtin_seed_clusters()
                                              : load_clusters(harden_clusters);
      TransactionLog context;
      const std::size_t take = std::min<std::size_t>(
          cfg.eval_context_edges, backbone_log.transactions.size());
      context.transactions.assign(backbone_log.transactions.end() - take,
                                  backbone_log.transactions.end());
      FeatureExtractor extractor(backbone_log);
      std::vector<EdgeFeatures> features;
      std::vector<uint8_t> labels;
      RngStream rng(cfg.seed);
      for (std::size_t i = 0; i < backbone_log.transactions.size() &&
                              i < static_cast<std::size_t>(cfg.monitor_negative_sample);
           ++i) {
        features.push_back(extractor.extract(i));
        labels.push_back(backbone_log.transactions[i].is_laundering ? 1 : 0);
      }
      bool has_positive = false;
      for (uint8_t l : labels) has_positive |= l != 0;
      if (!has_positive) {
        // Instantiate seeds as positives the same way the pipeline does.
        const int64_t t0 = backbone_log.transactions.front().timestamp;
        for (int rep = 0; rep < cfg.monitor_positive_replicas; ++rep) {
          const IllicitCluster& seed_cluster = seeds[rep % seeds.size()];
          TransactionLog mini;
          for (const auto& e : seed_cluster.edges) {
            Transaction tx;
            tx.timestamp = t0 + e.rel_time + rep * 3600;
            tx.from = {"XT", "r" + std::to_string(e.from_role)};
            tx.to = {"XT", "r" + std::to_string(e.to_role)};
            tx.amount_paid = tx.amount_received = e.amount;
            tx.payment_currency = tx.receiving_currency = cfg.backbone.currency;
            tx.payment_format = cfg.embedder.laundering_format;
            tx.is_laundering = true;
            mini.transactions.push_back(tx);
          }
          std::stable_sort(mini.transactions.begin(), mini.transactions.end(),
                           [](const Transaction& a, const Transaction& b) {
                             return a.timestamp < b.timestamp;
                           });
          FeatureExtractor me(mini);
          for (std::size_t i = 0; i < mini.transactions.size(); ++i) {
            features.push_back(me.extract(i));
            labels.push_back(1);
          }
        }
      }
      MonitorModel monitor = train_monitor(features, labels, cfg.monitor);
      ClusterScorer scorer(monitor, context);
      GrpoResult result = run_grpo(seeds, scorer, cfg.grpo, cfg.seed);
      fs::create_directories(dir);
      save_clusters(result.hardened, (fs::path(dir) / "hardened_clusters.txt").string());
      save_policy(result.policy, (fs::path(dir) / "policy.txt").string());
      save_monitor(monitor, (fs::path(dir) / "monitor.txt").string());
      write_grpo_log_csv(result.training_log,
                         (fs::path(dir) / "grpo_training_log.csv").string());
      for (std::size_t c = 0; c < result.hardened.size(); ++c) {
        std::printf("%s: S %.4f -> %.4f\n", result.hardened[c].id.c_str(),
                    result.seed_composite[c], result.hardened_composite[c]);
      }
      return kOk;
    }

    if (embed->parsed()) {
      PipelineConfig cfg = load_config(config_path, seed, seed_set, out_dir);
      TransactionLog log = load_log_with_optional_profiles(
          embed_backbone, embed_persons, embed_merchants);
      std::vector<IllicitCluster> clusters = load_clusters(embed_clusters);
      auto [embedded, reports] =
          embed_all(clusters, log, embed_prevalence, cfg.embedder, cfg.seed);
      fs::create_directories(dir);
      export_csv(embedded, (fs::path(dir) / "transactions.csv").string());
      write_embedding_reports_csv(
          reports, (fs::path(dir) / "embedding_reports.csv").string());
      const SummaryRecord s = summarize(embedded);
      std::printf("transactions=%zu laundering=%zu\n", s.transactions, s.laundering);
      return kOk;
    }

    if (analyze->parsed()) {
      TransactionLog log = import_csv(analyze_input);
      FidelityReport rep = fidelity_report(log);
      fs::create_directories(dir);
      write_fidelity_csvs(rep, (fs::path(dir) / "invariants_daily.csv").string(),
                          (fs::path(dir) / "invariants_summary.csv").string(),
                          (fs::path(dir) / "tail_fits.csv").string(),
                          analyze_label);
      std::printf("days=%zu gcc=%.4f assortativity=%.4f transitivity=%.4f\n",
                  rep.summary.days, rep.summary.mean.gcc_ratio,
                  rep.summary.mean.assortativity, rep.summary.mean.transitivity);
      return kOk;
    }

    if (split->parsed()) {
      TransactionLog log = import_csv(split_input);
      const DatasetSplit s = make_splits(log);
      fs::create_directories(dir);
      write_split_files(log, s, dir);
      std::printf("train=%zu val=%zu test=%zu\n", s.train_end,
                  s.val_end - s.train_end, s.test_end - s.val_end);
      return kOk;
    }

    if (summarize_cmd->parsed()) {
      TransactionLog log = import_csv(summarize_input);
      const SummaryRecord s = summarize(log);
      fs::create_directories(dir);
      write_summary_csv(s, (fs::path(dir) / "summary.csv").string());
      if (s.one_per_n_defined) {
        std::printf("days=%lld accounts=%zu transactions=%zu laundering=%zu "
                    "one_per_n=%.2f\n",
                    static_cast<long long>(s.days), s.accounts, s.transactions,
                    s.laundering, s.one_per_n);
      } else {
        std::printf("days=%lld accounts=%zu transactions=%zu laundering=%zu\n",
                    static_cast<long long>(s.days), s.accounts, s.transactions,
                    s.laundering);
      }
      return kOk;
    }

    if (feats->parsed()) {
      TransactionLog log = load_log_with_optional_profiles(
          feats_input, feats_persons, feats_merchants);
      fs::create_directories(dir);
      const std::string path =
          feats_out.empty() ? (fs::path(dir) / "features.csv").string() : feats_out;
      export_features(log, with_profiles, fraction, path);
      std::printf("wrote %s\n", path.c_str());
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    if (harden->parsed()) return kHarden;
    if (embed->parsed()) return kEmbed;
    if (analyze->parsed()) return kAnalyze;
    if (split->parsed()) return kSplit;
    if (summarize_cmd->parsed()) return kSummarize;
    if (feats->parsed()) return kExportFeatures;
    return kGenerate;
  }
  return kOk;
}
