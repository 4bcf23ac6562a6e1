#pragma once

// Monte-Carlo campaign over random four-qubit states: per-state records,
// running statistics and histograms.

#include "coa/assist.hpp"
#include "coa/io.hpp"
#include "coa/state.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace coa {

struct McConfig {
  std::uint64_t n_states = 1000;
  std::uint64_t seed = 0;
  bool six_pair = false;
  int hist_bins = 60;
  int workers = 0;  // 0: one per hardware thread
  Sampler sampler = Sampler::gauss_phase;

  void validate() const {
    if (n_states < 1) throw std::invalid_argument("n_states must be >= 1");
    if (hist_bins < 2) throw std::invalid_argument("hist_bins must be >= 2");
    if (workers < 0) throw std::invalid_argument("workers must be >= 0");
  }
};

struct StateRecord {
  std::uint64_t index = 0;
  double csharp = 0.0;
  double cflat = 0.0;
  double relative_gain = 0.0;
  int rank_class = 0;
  double six_csharp = 0.0;  // only filled with six_pair
  double six_cflat = 0.0;
  double six_relative_gain = 0.0;
};

struct HistBin {
  double left = 0.0;
  double right = 0.0;
  double density = 0.0;
};

/// Density histogram with uniform bins over [min, max]; a constant list gets
/// the unit range centered on its value.
inline std::vector<HistBin> emit_histogram(const std::vector<double>& values, int bins) {
  if (values.empty()) throw std::invalid_argument("emit_histogram: no values");
  if (bins < 2) throw std::invalid_argument("emit_histogram: bins must be >= 2");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("emit_histogram: non-finite value");
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn, hi = *mx;
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double v : values) {
    auto k = static_cast<long>((v - lo) / width);
    k = std::clamp<long>(k, 0, bins - 1);
    counts[static_cast<std::size_t>(k)] += 1.0;
  }
  std::vector<HistBin> out(static_cast<std::size_t>(bins));
  const double n = static_cast<double>(values.size());
  for (int k = 0; k < bins; ++k) {
    const double left = lo + k * width;
    const double right = k == bins - 1 ? hi : lo + (k + 1) * width;
    out[static_cast<std::size_t>(k)] = {left, right, counts[static_cast<std::size_t>(k)] / (n * (right - left))};
  }
  return out;
}

/// Running mean and sample variance.
class Welford {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct QuantityStats {
  double mean_csharp = 0.0;
  double mean_cflat = 0.0;
  double mean_relative_gain = 0.0;  // over states with a finite gain
  double var_csharp = 0.0;
  double var_cflat = 0.0;
  double var_relative_gain = 0.0;
  std::uint64_t infinite_gain_count = 0;
  double frac_gain_below_5pct = 0.0;
  std::uint64_t diagonal_violations = 0;  // cflat > csharp + 1e-9
  std::vector<HistBin> hist_csharp, hist_cflat, hist_relative_gain;
};

struct McStats {
  std::uint64_t n_states = 0;
  std::uint64_t seed = 0;
  std::string sampler;
  QuantityStats single;
  std::optional<QuantityStats> six_pair;
};

/// Average of csharp and cflat over the six choices of keeper pair.
inline std::pair<double, double> six_pair_average(const FourQubitPure& psi) {
  double cs = 0.0, cf = 0.0;
  for (const char* pair : {"AB", "AC", "AD", "BC", "BD", "CD"}) {
    const Mat4 q = q_matrix(permute_parties(psi, keeper_permutation(pair)));
    cs += csharp(q);
    cf += cflat(q).value;
  }
  return {cs / 6.0, cf / 6.0};
}

inline StateRecord evaluate_state(const FourQubitPure& psi, std::uint64_t index, bool six_pair) {
  StateRecord r;
  r.index = index;
  const Mat4 q = q_matrix(psi);
  const Eigen::Vector4d sv = Eigen::JacobiSVD<Mat4>(q).singularValues();
  r.csharp = sv.sum();
  r.cflat = cflat(q).value;
  r.relative_gain = relative_gain(r.csharp, r.cflat);
  r.rank_class = rank_of(sv);
  if (six_pair) {
    std::tie(r.six_csharp, r.six_cflat) = six_pair_average(psi);
    r.six_relative_gain = relative_gain(r.six_csharp, r.six_cflat);
  }
  return r;
}

/// Accumulates records in index order.
class StatsAccumulator {
 public:
  explicit StatsAccumulator(bool six_pair) : six_(six_pair) {}

  void add(const StateRecord& r) {
    single_.add(r.csharp, r.cflat, r.relative_gain);
    if (six_) six_acc_.add(r.six_csharp, r.six_cflat, r.six_relative_gain);
  }

  McStats finish(const McConfig& cfg) const {
    McStats s;
    s.n_states = single_.cs.count();
    s.seed = cfg.seed;
    s.sampler = cfg.sampler == Sampler::gauss_phase ? "gauss_phase" : "haar";
    s.single = single_.finish(cfg.hist_bins);
    if (six_) s.six_pair = six_acc_.finish(cfg.hist_bins);
    return s;
  }

 private:
  struct Acc {
    Welford cs, cf, gain;
    std::uint64_t infinite = 0, below5 = 0, violations = 0;
    std::vector<double> v_cs, v_cf, v_gain;

    void add(double c_sharp, double c_flat, double g) {
      cs.add(c_sharp);
      cf.add(c_flat);
      v_cs.push_back(c_sharp);
      v_cf.push_back(c_flat);
      if (std::isfinite(g)) {
        gain.add(g);
        v_gain.push_back(g);
      } else {
        ++infinite;
      }
      if (g < 0.05) ++below5;
      if (c_flat > c_sharp + 1e-9) ++violations;
    }

    QuantityStats finish(int bins) const {
      QuantityStats q;
      q.mean_csharp = cs.mean();
      q.mean_cflat = cf.mean();
      q.mean_relative_gain = gain.mean();
      q.var_csharp = cs.variance();
      q.var_cflat = cf.variance();
      q.var_relative_gain = gain.variance();
      q.infinite_gain_count = infinite;
      q.frac_gain_below_5pct = cs.count() ? static_cast<double>(below5) / static_cast<double>(cs.count()) : 0.0;
      q.diagonal_violations = violations;
      if (!v_cs.empty()) {
        q.hist_csharp = emit_histogram(v_cs, bins);
        q.hist_cflat = emit_histogram(v_cf, bins);
      }
      if (!v_gain.empty()) q.hist_relative_gain = emit_histogram(v_gain, bins);
      return q;
    }
  };

  bool six_;
  Acc single_, six_acc_;
};

/// Evaluates states in blocks on worker threads and hands the records to
/// `sink` strictly in index order, so output does not depend on the number
/// of workers.
inline McStats run_batch(const McConfig& cfg, const std::function<void(const StateRecord&)>& sink = {}) {
  cfg.validate();
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = cfg.workers > 0 ? static_cast<std::size_t>(cfg.workers) : hw;
  constexpr std::uint64_t kBlock = 2048;
  StatsAccumulator acc(cfg.six_pair);
  std::vector<StateRecord> block;
  for (std::uint64_t start = 0; start < cfg.n_states; start += kBlock) {
    const std::uint64_t len = std::min(kBlock, cfg.n_states - start);
    block.assign(len, StateRecord{});
    std::atomic<std::uint64_t> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    auto work = [&] {
      try {
        for (std::uint64_t k = next++; k < len; k = next++) {
          const std::uint64_t i = start + k;
          block[k] = evaluate_state(random_state(cfg.seed, i, cfg.sampler), i, cfg.six_pair);
        }
      } catch (...) {
        const std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
        next = len;
      }
    };
    const std::size_t n_threads = std::min<std::size_t>(workers, len);
    if (n_threads <= 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(n_threads);
      for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
    }
    if (err) std::rethrow_exception(err);
    for (const StateRecord& r : block) {
      acc.add(r);
      if (sink) sink(r);
    }
  }
  return acc.finish(cfg);
}

// ---- output files ----

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_header(bool six_pair) {
  std::string h = "index,csharp,cflat,relative_gain,rank_class";
  if (six_pair) h += ",six_csharp,six_cflat,six_relative_gain";
  return h;
}

inline std::string csv_row(const StateRecord& r, bool six_pair) {
  std::string s = std::to_string(r.index) + "," + fmt_double(r.csharp) + "," + fmt_double(r.cflat) + "," +
                  fmt_double(r.relative_gain) + "," + std::to_string(r.rank_class);
  if (six_pair) s += "," + fmt_double(r.six_csharp) + "," + fmt_double(r.six_cflat) + "," + fmt_double(r.six_relative_gain);
  return s;
}

inline std::string histogram_csv(const std::vector<HistBin>& h) {
  std::string s = "bin_left,bin_right,density\n";
  for (const HistBin& b : h) s += fmt_double(b.left) + "," + fmt_double(b.right) + "," + fmt_double(b.density) + "\n";
  return s;
}

inline json quantity_to_json(const QuantityStats& q) {
  auto hist = [](const std::vector<HistBin>& h) {
    json a = json::array();
    for (const HistBin& b : h) a.push_back({b.left, b.right, b.density});
    return a;
  };
  return {{"mean_csharp", q.mean_csharp},
          {"mean_cflat", q.mean_cflat},
          {"mean_relative_gain", q.mean_relative_gain},
          {"var_csharp", q.var_csharp},
          {"var_cflat", q.var_cflat},
          {"var_relative_gain", q.var_relative_gain},
          {"infinite_gain_count", q.infinite_gain_count},
          {"frac_gain_below_5pct", q.frac_gain_below_5pct},
          {"diagonal_violations", q.diagonal_violations},
          {"histograms",
           {{"csharp", hist(q.hist_csharp)}, {"cflat", hist(q.hist_cflat)}, {"relative_gain", hist(q.hist_relative_gain)}}}};
}

inline json stats_to_json(const McStats& s) {
  json j = quantity_to_json(s.single);
  j["n_states"] = s.n_states;
  j["seed"] = s.seed;
  j["sampler"] = s.sampler;
  j["six_pair_variants"] = s.six_pair ? quantity_to_json(*s.six_pair) : json(nullptr);
  return j;
}

/// I/O failure during a campaign; `written` records had been emitted.
class CampaignIoError : public std::runtime_error {
 public:
  CampaignIoError(const std::string& what, std::uint64_t written)
      : std::runtime_error(what + " (after " + std::to_string(written) + " records)"), written_(written) {}
  std::uint64_t written() const { return written_; }

 private:
  std::uint64_t written_;
};

/// Runs the campaign and writes per_state.csv, stats.json and hist_*.csv to `dir`.
inline McStats run_campaign(const McConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CampaignIoError("cannot create '" + dir.string() + "': " + ec.message(), 0);
  std::ofstream csv(dir / "per_state.csv", std::ios::binary);
  if (!csv) throw CampaignIoError("cannot write '" + (dir / "per_state.csv").string() + "'", 0);
  csv << csv_header(cfg.six_pair) << "\n";
  std::uint64_t written = 0;
  const McStats stats = run_batch(cfg, [&](const StateRecord& r) {
    csv << csv_row(r, cfg.six_pair) << "\n";
    if (!csv) throw CampaignIoError("write to per_state.csv failed", written);
    ++written;
  });
  csv.close();
  if (!csv) throw CampaignIoError("closing per_state.csv failed", written);
  try {
    write_text((dir / "stats.json").string(), stats_to_json(stats).dump(2) + "\n");
    write_text((dir / "hist_csharp.csv").string(), histogram_csv(stats.single.hist_csharp));
    write_text((dir / "hist_cflat.csv").string(), histogram_csv(stats.single.hist_cflat));
    write_text((dir / "hist_relative_gain.csv").string(), histogram_csv(stats.single.hist_relative_gain));
    if (stats.six_pair) {
      write_text((dir / "hist_six_csharp.csv").string(), histogram_csv(stats.six_pair->hist_csharp));
      write_text((dir / "hist_six_cflat.csv").string(), histogram_csv(stats.six_pair->hist_cflat));
      write_text((dir / "hist_six_relative_gain.csv").string(), histogram_csv(stats.six_pair->hist_relative_gain));
    }
  } catch (const std::runtime_error& e) {
    throw CampaignIoError(e.what(), written);
  }
  return stats;
}

}  // namespace coa
