#include "txgen/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>

namespace txgen {

const std::array<std::string_view, EdgeFeatures::kDim>& EdgeFeatures::names() {
  static const std::array<std::string_view, kDim> kNames = {
      "log_amount",        "hour_sin",          "hour_cos",
      "fmt_mobile",        "fmt_card",          "fmt_transfer",
      "fmt_cash",          "fmt_cheque",        "sender_out_degree",
      "sender_in_degree",  "receiver_out_degree", "receiver_in_degree",
      "sender_mean_log_amount", "receiver_mean_log_amount",
      "repeated_pair_count", "sender_burst_count"};
  return kNames;
}

FeatureExtractor::FeatureExtractor(const TransactionLog& log,
                                   int64_t window_seconds,
                                   int64_t burst_half_window)
    : log_(&log), window_(window_seconds), burst_half_(burst_half_window) {
  const auto& txs = log.transactions;
  std::unordered_map<std::string, int32_t> account_ids;
  std::unordered_map<uint64_t, int32_t> pair_ids;
  from_series_.resize(txs.size());
  to_series_.resize(txs.size());
  from_pos_.resize(txs.size());
  to_pos_.resize(txs.size());
  pair_id_.resize(txs.size());
  pair_rank_.resize(txs.size());

  auto intern = [&](const AccountRef& a) {
    auto [it, inserted] =
        account_ids.emplace(account_key(a), static_cast<int32_t>(account_ids.size()));
    if (inserted) series_.emplace_back();
    return it->second;
  };

  for (std::size_t i = 0; i < txs.size(); ++i) {
    const Transaction& tx = txs[i];
    const int32_t s = intern(tx.from);
    const int32_t r = intern(tx.to);
    auto append = [&](int32_t acct, bool is_sender, std::size_t& pos_out) {
      AccountSeries& se = series_[acct];
      pos_out = se.tx_index.size();
      const double log_amt =
          std::log1p(is_sender ? tx.amount_paid : tx.amount_received);
      const double prev_cum = se.cum_log_amount.empty() ? 0.0 : se.cum_log_amount.back();
      const int32_t prev_out = se.cum_out.empty() ? 0 : se.cum_out.back();
      se.tx_index.push_back(i);
      se.timestamp.push_back(tx.timestamp);
      se.out_flag.push_back(is_sender ? 1 : 0);
      se.cum_log_amount.push_back(prev_cum + log_amt);
      se.cum_out.push_back(prev_out + (is_sender ? 1 : 0));
    };
    from_series_[i] = s;
    to_series_[i] = r;
    append(s, true, from_pos_[i]);
    append(r, false, to_pos_[i]);

    const uint64_t pk = hash_combine(static_cast<uint64_t>(s) << 1,
                                     static_cast<uint64_t>(r) + 0x51ED2701ULL);
    auto [pit, pnew] = pair_ids.emplace(pk, static_cast<int32_t>(pair_ids.size()));
    if (pnew) pair_positions_.emplace_back();
    pair_id_[i] = pit->second;
    pair_rank_[i] = pair_positions_[pit->second].size();
    pair_positions_[pit->second].push_back(i);
  }
}

EdgeFeatures FeatureExtractor::extract(std::size_t index) const {
  const auto& txs = log_->transactions;
  if (index >= txs.size()) throw Error("extract: edge index out of range");
  const Transaction& tx = txs[index];
  EdgeFeatures f;
  f.v[0] = std::log1p(std::max(tx.amount_paid, 0.0));
  const double hour_frac =
      static_cast<double>(((tx.timestamp % 86'400) + 86'400) % 86'400) / 3600.0;
  f.v[1] = std::sin(2.0 * M_PI * hour_frac / 24.0);
  f.v[2] = std::cos(2.0 * M_PI * hour_frac / 24.0);
  f.v[3 + static_cast<int>(tx.payment_format)] = 1.0;

  // Window = participations of the account strictly before this edge in log
  // order, no older than window_ seconds.
  auto window_stats = [&](int32_t acct, std::size_t pos, double& out_deg,
                          double& in_deg, double& mean_log) {
    const AccountSeries& se = series_[acct];
    const int64_t cutoff = tx.timestamp - window_;
    auto begin_it = std::lower_bound(se.timestamp.begin(),
                                     se.timestamp.begin() + pos, cutoff);
    const std::size_t b = static_cast<std::size_t>(begin_it - se.timestamp.begin());
    const std::size_t count = pos - b;
    if (count == 0) {
      out_deg = in_deg = mean_log = 0.0;
      return;
    }
    const int32_t outs = se.cum_out[pos - 1] - (b > 0 ? se.cum_out[b - 1] : 0);
    out_deg = static_cast<double>(outs);
    in_deg = static_cast<double>(count) - out_deg;
    const double sum =
        se.cum_log_amount[pos - 1] - (b > 0 ? se.cum_log_amount[b - 1] : 0.0);
    mean_log = sum / static_cast<double>(count);
  };
  window_stats(from_series_[index], from_pos_[index], f.v[8], f.v[9], f.v[12]);
  window_stats(to_series_[index], to_pos_[index], f.v[10], f.v[11], f.v[13]);

  // Repeated ordered pair within the window.
  {
    const auto& positions = pair_positions_[pair_id_[index]];
    const int64_t cutoff = tx.timestamp - window_;
    std::size_t count = 0;
    for (std::size_t k = pair_rank_[index]; k-- > 0;) {
      if (txs[positions[k]].timestamp < cutoff) break;
      ++count;
    }
    f.v[14] = static_cast<double>(count);
  }

  // Sender burst: other transactions initiated by the sender within +-1h.
  {
    const AccountSeries& se = series_[from_series_[index]];
    auto lo = std::lower_bound(se.timestamp.begin(), se.timestamp.end(),
                               tx.timestamp - burst_half_);
    auto hi = std::upper_bound(se.timestamp.begin(), se.timestamp.end(),
                               tx.timestamp + burst_half_);
    const std::size_t a = static_cast<std::size_t>(lo - se.timestamp.begin());
    const std::size_t b = static_cast<std::size_t>(hi - se.timestamp.begin());
    int32_t outs = 0;
    if (b > a) {
      outs = se.cum_out[b - 1] - (a > 0 ? se.cum_out[a - 1] : 0);
    }
    f.v[15] = static_cast<double>(outs) - 1.0;  // exclude this edge
    if (f.v[15] < 0.0) f.v[15] = 0.0;
  }
  return f;
}

EdgeFeatures extract_edge_features(const TransactionLog& log, std::size_t index) {
  return FeatureExtractor(log).extract(index);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

MetricsReport compute_metrics(std::span<const double> scores,
                              std::span<const uint8_t> labels, double threshold,
                              const CompositeWeights& weights) {
  if (scores.size() != labels.size()) {
    throw MetricsError("compute_metrics: scores/labels size mismatch");
  }
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (uint8_t l : labels) positives += l ? 1 : 0;
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricsError("compute_metrics: need both classes for AUC/AP");
  }

  MetricsReport rep;

  // AUC via midranks: (sum of positive ranks - P(P+1)/2) / (P*N).
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] < scores[b];
    });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
      const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
      i = j + 1;
    }
    double pos_rank_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (labels[k]) pos_rank_sum += rank[k];
    }
    const double p = static_cast<double>(positives);
    rep.auc = (pos_rank_sum - p * (p + 1.0) / 2.0) /
              (p * static_cast<double>(negatives));
  }

  // AP by prefix enumeration over descending scores, ties by input order.
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] > scores[b];
    });
    double ap = 0.0;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (labels[order[k]]) {
        ++tp;
        const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
        ap += precision / static_cast<double>(positives);
      }
    }
    rep.ap = ap;
  }

  // F1 at the given threshold (score >= threshold flags positive).
  {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const bool pred = scores[k] >= threshold;
      if (pred && labels[k]) {
        ++tp;
      } else if (pred && !labels[k]) {
        ++fp;
      } else if (!pred && labels[k]) {
        ++fn;
      }
    }
    const double denom = 2.0 * tp + fp + fn;
    rep.f1 = denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
  }

  rep.composite =
      weights.w_f1 * rep.f1 + weights.w_auc * rep.auc + weights.w_ap * rep.ap;
  return rep;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

double MonitorModel::score(const EdgeFeatures& f) const {
  double z = bias;
  for (int i = 0; i < EdgeFeatures::kDim; ++i) {
    const double sd = feat_std.empty() ? 1.0 : feat_std[i];
    const double mu = feat_mean.empty() ? 0.0 : feat_mean[i];
    z += weights[i] * ((f.v[i] - mu) / sd);
  }
  return 1.0 / (1.0 + std::exp(-z));
}

MonitorModel train_monitor(const std::vector<EdgeFeatures>& features,
                           const std::vector<uint8_t>& labels,
                           const MonitorTrainConfig& config) {
  if (features.size() != labels.size() || features.empty()) {
    throw MetricsError("train_monitor: bad inputs");
  }
  std::size_t positives = 0;
  for (uint8_t l : labels) positives += l ? 1 : 0;
  if (positives == 0 || positives == labels.size()) {
    throw MetricsError("train_monitor: need both classes");
  }

  const int d = EdgeFeatures::kDim;
  const std::size_t n = features.size();

  // Deterministic shuffle, then carve the validation slice from the back.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(config.shuffle_seed);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(config.val_fraction * static_cast<double>(n)));
  n_val = std::min(n_val, n - 2);
  std::size_t n_train = n - n_val;
  // Both classes must appear in the training slice.
  auto slice_has_both = [&](std::size_t count) {
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < count; ++i) {
      (labels[order[i]] ? pos : neg) = true;
      if (pos && neg) return true;
    }
    return false;
  };
  if (!slice_has_both(n_train)) {
    n_train = n;
    n_val = 0;
  }

  MonitorModel model;
  model.weights.assign(d, 0.0);
  model.feat_mean.assign(d, 0.0);
  model.feat_std.assign(d, 1.0);
  for (std::size_t i = 0; i < n_train; ++i) {
    for (int j = 0; j < d; ++j) model.feat_mean[j] += features[order[i]].v[j];
  }
  for (int j = 0; j < d; ++j) model.feat_mean[j] /= static_cast<double>(n_train);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n_train; ++i) {
    for (int j = 0; j < d; ++j) {
      const double dv = features[order[i]].v[j] - model.feat_mean[j];
      var[j] += dv * dv;
    }
  }
  for (int j = 0; j < d; ++j) {
    model.feat_std[j] = std::sqrt(var[j] / static_cast<double>(n_train));
    if (model.feat_std[j] < 1e-9) model.feat_std[j] = 1.0;
  }

  std::vector<double> x(n_train * d);
  std::vector<double> y(n_train);
  for (std::size_t i = 0; i < n_train; ++i) {
    for (int j = 0; j < d; ++j) {
      x[i * d + j] =
          (features[order[i]].v[j] - model.feat_mean[j]) / model.feat_std[j];
    }
    y[i] = labels[order[i]] ? 1.0 : 0.0;
  }

  std::vector<double> grad(d);
  for (int it = 0; it < config.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n_train; ++i) {
      double z = model.bias;
      const double* row = &x[i * d];
      for (int j = 0; j < d; ++j) z += model.weights[j] * row[j];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double err = p - y[i];
      for (int j = 0; j < d; ++j) grad[j] += err * row[j];
      grad_b += err;
    }
    const double inv_n = 1.0 / static_cast<double>(n_train);
    const double lr =
        config.learning_rate / (1.0 + 0.01 * static_cast<double>(it));
    for (int j = 0; j < d; ++j) {
      model.weights[j] -=
          lr * (grad[j] * inv_n + config.l2 * model.weights[j]);
    }
    model.bias -= lr * grad_b * inv_n;
  }

  // Threshold = best F1 over validation scores (training slice when no
  // validation rows carry both classes).
  std::vector<double> val_scores;
  std::vector<uint8_t> val_labels;
  const std::size_t vb = n_val > 0 ? n_train : 0;
  const std::size_t ve = n_val > 0 ? n : n_train;
  bool vpos = false, vneg = false;
  for (std::size_t i = vb; i < ve; ++i) {
    (labels[order[i]] ? vpos : vneg) = true;
  }
  const bool use_val = n_val > 0 && vpos && vneg;
  const std::size_t tb = use_val ? vb : 0;
  const std::size_t te = use_val ? ve : n_train;
  for (std::size_t i = tb; i < te; ++i) {
    val_scores.push_back(model.score(features[order[i]]));
    val_labels.push_back(labels[order[i]]);
  }
  std::vector<double> cand = val_scores;
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  double best_f1 = -1.0;
  std::size_t best_i = 0;
  for (std::size_t ci = 0; ci < cand.size(); ++ci) {
    const double t = cand[ci];
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < val_scores.size(); ++i) {
      const bool pred = val_scores[i] >= t;
      if (pred && val_labels[i]) {
        ++tp;
      } else if (pred && !val_labels[i]) {
        ++fp;
      } else if (!pred && val_labels[i]) {
        ++fn;
      }
    }
    const double denom = 2.0 * tp + fp + fn;
    const double f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    if (f1 > best_f1) {
      best_f1 = f1;
      best_i = ci;
    }
  }
  // Midpoint between the winning cutoff and the next score below it, so the
  // boundary sits between classes instead of on a validation point.
  double best_t = cand.empty() ? 0.5 : cand[best_i];
  if (best_i > 0) best_t = 0.5 * (cand[best_i] + cand[best_i - 1]);
  model.decision_threshold = std::clamp(best_t, 1e-9, 1.0 - 1e-9);
  return model;
}

MetricsReport score_graph(const MonitorModel& model, const TransactionLog& log,
                          std::span<const std::size_t> edge_subset,
                          const CompositeWeights& weights) {
  if (edge_subset.empty()) {
    throw MetricsError("score_graph: empty edge subset");
  }
  FeatureExtractor extractor(log);
  std::vector<double> scores;
  std::vector<uint8_t> labels;
  scores.reserve(edge_subset.size());
  labels.reserve(edge_subset.size());
  for (std::size_t idx : edge_subset) {
    scores.push_back(model.score(extractor.extract(idx)));
    labels.push_back(log.transactions[idx].is_laundering ? 1 : 0);
  }
  return compute_metrics(scores, labels, model.decision_threshold, weights);
}

void save_monitor(const MonitorModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_monitor: cannot open " + path);
  out << "monitor v1\n";
  out << "dim " << model.weights.size() << "\n";
  char buf[64];
  auto emit = [&](const char* name, std::span<const double> xs) {
    out << name;
    for (double v : xs) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      out << buf;
    }
    out << "\n";
  };
  emit("mean", model.feat_mean);
  emit("std", model.feat_std);
  emit("weights", model.weights);
  std::snprintf(buf, sizeof(buf), "%.17g", model.bias);
  out << "bias " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", model.decision_threshold);
  out << "threshold " << buf << "\n";
}

MonitorModel load_monitor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_monitor: cannot open " + path);
  std::string word;
  std::string version;
  in >> word >> version;
  if (word != "monitor" || version != "v1") {
    throw IoError("load_monitor: unrecognized header");
  }
  std::size_t dim = 0;
  in >> word >> dim;
  if (word != "dim" || dim == 0) throw IoError("load_monitor: bad dim");
  MonitorModel model;
  auto read_vec = [&](const char* name, std::vector<double>& xs) {
    in >> word;
    if (word != name) throw IoError(std::string("load_monitor: expected ") + name);
    xs.resize(dim);
    for (auto& v : xs) in >> v;
  };
  read_vec("mean", model.feat_mean);
  read_vec("std", model.feat_std);
  read_vec("weights", model.weights);
  in >> word >> model.bias;
  if (word != "bias") throw IoError("load_monitor: expected bias");
  in >> word >> model.decision_threshold;
  if (word != "threshold") throw IoError("load_monitor: expected threshold");
  if (!in) throw IoError("load_monitor: truncated file");
  return model;
}

}  // namespace txgen
