#pragma once

// Command-line front end. Exit codes: 0 success, 1 runtime error, 2 usage error.

#include "coa/assist.hpp"
#include "coa/io.hpp"
#include "coa/mc.hpp"
#include "coa/povm.hpp"
#include "coa/state.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace coa {

namespace cli_detail {

inline std::string num(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

inline std::string num(const std::optional<double>& v) { return v ? num(*v) : "n/a"; }

inline std::string cnum(cplx z) {
  std::ostringstream os;
  os << num(z.real()) << (std::signbit(z.imag()) ? " - " : " + ") << num(std::abs(z.imag())) << "i";
  return os.str();
}

inline void print_matrix(std::ostream& out, const std::string& name, const Mat2& m) {
  out << name << ":\n";
  for (int r = 0; r < 2; ++r) out << "  [" << cnum(m(r, 0)) << ", " << cnum(m(r, 1)) << "]\n";
}

inline FourQubitPure load_state(const std::string& path, const std::string& pair) {
  FourQubitPure psi = read_state_file(path).state;
  if (!pair.empty() && pair != "AB") psi = permute_parties(psi, keeper_permutation(pair));
  return psi;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  CLI::App app{"Concurrence of assistance with local measurements"};
  app.name("coa");
  app.require_subcommand(1);

  std::string state_path, pair = "AB", party = "C", out_path, sampler = "gauss_phase", fixture_name;
  bool as_json = false, six_pair = false;
  int restarts = 64, bins = 60, workers = 0;
  std::uint64_t seed = 0, n_states = 0;

  const std::vector<std::string> pairs{"AB", "AC", "AD", "BC", "BD", "CD"};

  auto* compute = app.add_subcommand("compute", "C#, C-flat, relative gain and verdict for a state");
  compute->add_option("--state", state_path, "state file (JSON)")->required();
  compute->add_option("--pair", pair, "keeper pair")->check(CLI::IsMember(pairs));
  compute->add_flag("--json", as_json, "emit the report as JSON");

  auto* certify = app.add_subcommand("certify", "locality certificate for a state");
  certify->add_option("--state", state_path, "state file (JSON)")->required();
  certify->add_flag("--json", as_json, "emit the certificate as JSON");

  auto* sample = app.add_subcommand("sample", "Monte-Carlo campaign over random states");
  sample->add_option("--n", n_states, "number of states")->required()->check(CLI::PositiveNumber);
  sample->add_option("--seed", seed, "RNG seed")->required();
  sample->add_flag("--six-pair", six_pair, "also average over the six keeper pairs");
  out_path = "sample_out";
  sample->add_option("--out", out_path, "output directory")->capture_default_str();
  sample->add_option("--bins", bins, "histogram bins")->capture_default_str()->check(CLI::Range(2, 1000000));
  sample->add_option("--workers", workers, "worker threads (0 = all cores)")->capture_default_str()->check(CLI::NonNegativeNumber);
  sample->add_option("--sampler", sampler, "state distribution")->capture_default_str()->check(CLI::IsMember({"gauss_phase", "haar"}));

  auto* povm = app.add_subcommand("povm", "four-outcome POVM search on the first assistant");
  povm->add_option("--state", state_path, "state file (JSON)")->required();
  povm->add_option("--party", party, "measuring party")->capture_default_str()->check(CLI::IsMember({"C", "D"}));
  povm->add_option("--restarts", restarts, "random restarts")->capture_default_str()->check(CLI::PositiveNumber);
  povm->add_option("--seed", seed, "RNG seed")->capture_default_str();
  povm->add_flag("--json", as_json, "emit the result as JSON");

  auto* fixture_cmd = app.add_subcommand("fixture", "write a built-in state to a file");
  fixture_cmd->add_option("name", fixture_name, "fixture name")->required()->check(CLI::IsMember(fixture_names()));
  fixture_cmd->add_option("--out", out_path, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*compute) {
      const FourQubitPure psi = load_state(state_path, pair);
      const Report r = make_report(psi);
      if (as_json) {
        out << report_to_json(r).dump(2) << "\n";
      } else {
        out << "pair           " << pair << "\n"
            << "csharp         " << num(r.csharp) << "\n"
            << "cflat          " << num(r.cflat) << "\n"
            << "relative_gain  " << num(r.relative_gain) << "\n"
            << "rank_class     " << r.rank_class << "\n"
            << "verdict        " << to_string(r.verdict) << "\n";
      }
    } else if (*certify) {
      const FourQubitPure psi = load_state(state_path, "AB");
      const LocalityCertificate c = locality_certificate(psi);
      if (as_json) {
        out << certificate_to_json(c).dump(2) << "\n";
      } else {
        out << "rank_class        " << c.rank_class << "\n"
            << "sigma             " << num(c.sigma(0)) << " " << num(c.sigma(1)) << " " << num(c.sigma(2)) << " "
            << num(c.sigma(3)) << "\n"
            << "phi               " << num(c.phi) << "\n"
            << "pattern_residual  " << num(c.pattern_residual) << "\n"
            << "verdict           " << to_string(c.verdict) << "\n";
        if (c.local_basis) {
          out << "basis_value       " << num(c.basis_value) << "\n";
          print_matrix(out, "w_c", c.local_basis->w_c);
          print_matrix(out, "w_d", c.local_basis->w_d);
        }
      }
    } else if (*sample) {
      McConfig cfg;
      cfg.n_states = n_states;
      cfg.seed = seed;
      cfg.six_pair = six_pair;
      cfg.hist_bins = bins;
      cfg.workers = workers;
      cfg.sampler = parse_sampler(sampler);
      const McStats s = run_campaign(cfg, out_path);
      out << "states              " << s.n_states << "\n"
          << "mean_csharp         " << num(s.single.mean_csharp) << "\n"
          << "mean_cflat          " << num(s.single.mean_cflat) << "\n"
          << "mean_relative_gain  " << num(s.single.mean_relative_gain) << "\n";
      if (s.six_pair) {
        out << "six_pair mean_csharp  " << num(s.six_pair->mean_csharp) << "\n"
            << "six_pair mean_cflat   " << num(s.six_pair->mean_cflat) << "\n";
      }
      out << "output              " << out_path << "\n";
    } else if (*povm) {
      const FourQubitPure psi = load_state(state_path, "AB");
      PovmOptions opt;
      opt.restarts = restarts;
      opt.seed = seed;
      const PovmResult r = povm_optimize(psi, parse_party(party), opt);
      if (as_json) {
        out << povm_to_json(r).dump(2) << "\n";
      } else {
        out << "party          " << to_string(r.party) << "\n"
            << "value          " << num(r.value) << "  (lower bound)\n"
            << "cflat          " << num(r.cflat) << "\n"
            << "gain_over_cflat " << num(r.value - r.cflat) << "\n"
            << "csharp         " << num(r.csharp) << "\n";
        for (std::size_t k = 0; k < 4; ++k) print_matrix(out, "E" + std::to_string(k + 1), r.povm[k]);
      }
    } else if (*fixture_cmd) {
      const Fixture f = fixture(fixture_name);
      write_text(out_path, state_to_json(f.state, f.label).dump(2) + "\n");
      out << "wrote " << fixture_name << " to " << out_path << "\n";
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace coa
