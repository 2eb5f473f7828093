// Command-line front end. Data matrices hold one sample per row (T x n);
// dictionaries are n x K; code matrices are T x K.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ldict/io.hpp"
#include "ldict/learner.hpp"
#include "ldict/oracle.hpp"
#include "ldict/stationarity.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNotConverged = 2;

ldict::Dataset dataset_from_rows(const ldict::Matrix& X, double eps) {
  if (X.rows() == 0 || X.cols() == 0)
    throw ldict::IoError("data matrix is empty");
  ldict::Dataset data(X.cols());
  for (ldict::Index t = 0; t < X.rows(); ++t)
    data.add(ldict::Sample(X.row(t).transpose(), eps));
  return data;
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

int run_synth(const std::string& out_dir, long n, long K_true, long T,
              long sparsity, double eps, double noise, std::uint64_t seed,
              bool binary) {
  auto [data, D_true] = ldict::synth_dataset(n, K_true, T, sparsity, eps,
                                             noise, seed);
  ldict::Matrix X(T, n);
  for (ldict::Index t = 0; t < T; ++t)
    X.row(t) = data.samples[static_cast<std::size_t>(t)].x.transpose();
  const auto fmt =
      binary ? ldict::MatrixFormat::Binary : ldict::MatrixFormat::Csv;
  const char* ext = binary ? ".bin" : ".csv";
  ldict::write_matrix(join_path(out_dir, std::string("X") + ext), X, fmt);
  ldict::write_matrix(join_path(out_dir, std::string("D_true") + ext), D_true,
                      fmt);
  std::cout << "wrote " << T << " samples of dimension " << n << " to "
            << out_dir << "\n";
  return kExitOk;
}

int run_encode(const ldict::RunConfig& cfg, const std::string& dict_path) {
  const ldict::Matrix X = ldict::read_matrix(cfg.input);
  const ldict::Matrix D = ldict::read_matrix(dict_path);
  if (D.rows() != X.cols())
    throw ldict::IoError("dictionary rows must match sample dimension");
  ldict::CostModel cm(cfg.cost_model().kind, D.cols());
  const ldict::ThresholdModel tm = cfg.threshold_model();
  ldict::Matrix F(X.rows(), D.cols());
  ldict::Matrix costs(X.rows(), 1);
  bool all_converged = true;
  for (ldict::Index t = 0; t < X.rows(); ++t) {
    const ldict::Vector x = X.row(t).transpose();
    const double eps_t = ldict::effective_threshold(tm, x, t);
    const ldict::Encoding e = ldict::encode(x, D, cm, eps_t, cfg.params);
    F.row(t) = e.f.transpose();
    costs(t, 0) = e.cost;
    all_converged = all_converged && (e.converged || e.cost == 0.0);
  }
  const auto fmt =
      cfg.binary ? ldict::MatrixFormat::Binary : ldict::MatrixFormat::Csv;
  const char* ext = cfg.binary ? ".bin" : ".csv";
  ldict::write_matrix(join_path(cfg.output_dir, std::string("F") + ext), F,
                      fmt);
  ldict::write_matrix(join_path(cfg.output_dir, std::string("costs") + ext),
                      costs, fmt);
  std::cout << "encoded " << X.rows() << " samples, mean cost "
            << costs.col(0).mean() << "\n";
  return all_converged ? kExitOk : kExitNotConverged;
}

int run_learn(const ldict::RunConfig& cfg) {
  const ldict::Matrix X = ldict::read_matrix(cfg.input);
  const ldict::Dataset raw = dataset_from_rows(X, cfg.eps);
  const ldict::CostModel cm = cfg.cost_model();
  const ldict::ThresholdModel tm = cfg.threshold_model();
  ldict::SolverParams params = cfg.params;
  params.init = cfg.init == "random" ? ldict::InitMethod::RandomUnit
                                     : ldict::InitMethod::DataColumns;

  ldict::LearnResult res;
  if (cfg.method == "batch") {
    res = ldict::learn_batch(raw, cm, tm, params);
  } else if (cfg.method == "baseline") {
    res = ldict::learn_baseline(raw, cm, tm, params);
  } else if (cfg.method == "online") {
    auto [kept, dropped] = ldict::filter_samples(raw, tm);
    (void)dropped;
    const ldict::Dictionary D0 =
        ldict::init_dictionary(kept, cm.K, params.init, params.seed);
    res = ldict::learn_online(ldict::make_stream(raw, cfg.epochs), cm, tm,
                              params, D0);
  } else {
    throw ldict::IoError("method must be batch, online or baseline");
  }

  const auto fmt =
      cfg.binary ? ldict::MatrixFormat::Binary : ldict::MatrixFormat::Csv;
  const char* ext = cfg.binary ? ".bin" : ".csv";
  ldict::write_matrix(join_path(cfg.output_dir, std::string("D") + ext),
                      res.D.D, fmt);
  if (!res.encodings.empty()) {
    ldict::Matrix F(static_cast<ldict::Index>(res.encodings.size()), cm.K);
    for (std::size_t t = 0; t < res.encodings.size(); ++t)
      F.row(static_cast<ldict::Index>(t)) = res.encodings[t].f.transpose();
    ldict::write_matrix(join_path(cfg.output_dir, std::string("F") + ext), F,
                        fmt);
  }
  ldict::write_trace(res.trace, join_path(cfg.output_dir, "trace.csv"));
  if (!res.trace.empty())
    std::cout << "final objective " << res.trace.back().objective << " after "
              << res.trace.size() << " trace records\n";
  return res.converged ? kExitOk : kExitNotConverged;
}

int run_check(const ldict::RunConfig& cfg, const std::string& dict_path) {
  const ldict::Matrix X = ldict::read_matrix(cfg.input);
  const ldict::Matrix D = ldict::read_matrix(dict_path);
  if (D.rows() != X.cols())
    throw ldict::IoError("dictionary rows must match sample dimension");
  ldict::Dictionary dict;
  dict.D = D;
  ldict::CostModel cm(cfg.cost_model().kind, D.cols());
  const ldict::ThresholdModel tm = cfg.threshold_model();
  auto [kept, dropped] = ldict::filter_samples(dataset_from_rows(X, cfg.eps), tm);
  if (dropped > 0) std::cout << "dropped " << dropped << " trivial samples\n";
  const ldict::StationarityReport rep =
      ldict::stationarity_residual(dict, kept, cm, tm, cfg.params);
  std::cout << "stationarity_residual " << rep.residual
            << (rep.usable ? "" : " (separator checks failed, indicative only)")
            << "\n";
  if (cfg.params.delta > 0.0) {
    const double fp = ldict::fixed_point_residual(dict, kept, cm, tm, cfg.params);
    std::cout << "fixed_point_residual " << fp << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"error-constrained dictionary learning toolkit"};
  app.require_subcommand(1);

  std::string out_dir = ".";
  std::string config_path;
  std::string dict_path;
  std::string method;
  bool binary = false;
  long n = 16, K_true = 32, T = 500, sparsity = 3;
  double eps = 0.1, noise = 0.05, p_order = 1.0;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto* synth = app.add_subcommand("synth", "generate a planted dataset");
  synth->add_option("--n", n, "signal dimension");
  synth->add_option("--K-true", K_true, "planted dictionary size");
  synth->add_option("--T", T, "number of samples");
  synth->add_option("--sparsity", sparsity, "nonzeros per planted code");
  synth->add_option("--eps", eps, "error threshold");
  synth->add_option("--noise", noise, "noise radius");
  synth->add_option("--seed", seed, "random seed");
  synth->add_option("--out", out_dir, "output directory");
  synth->add_flag("--binary", binary, "write binary matrices");

  auto* encode = app.add_subcommand("encode", "encode samples at a dictionary");
  encode->add_option("--config", config_path, "JSON config")->required();
  encode->add_option("--dict", dict_path, "dictionary matrix")->required();
  encode->add_option_function<std::uint64_t>(
      "--seed", [&](const std::uint64_t& s) { seed = s; seed_set = true; },
      "override config seed");

  auto* learn = app.add_subcommand("learn", "learn a dictionary");
  learn->add_option("--config", config_path, "JSON config")->required();
  learn->add_option("--method", method, "batch | online | baseline");
  learn->add_option_function<std::uint64_t>(
      "--seed", [&](const std::uint64_t& s) { seed = s; seed_set = true; },
      "override config seed");

  auto* check = app.add_subcommand("check", "stationarity diagnostics");
  check->add_option("--config", config_path, "JSON config")->required();
  check->add_option("--dict", dict_path, "dictionary matrix")->required();

  auto* calib = app.add_subcommand("calibrate-r", "fit the surrogate constant");
  calib->add_option("--p", p_order, "cost homogeneity order");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return run_synth(out_dir, n, K_true, T, sparsity, eps, noise, seed,
                       binary);
    if (calib->parsed()) {
      std::printf("%.12g\n", ldict::oracle::calibrate_r(p_order));
      return kExitOk;
    }
    ldict::RunConfig cfg = ldict::RunConfig::load(config_path);
    if (seed_set) cfg.params.seed = seed;
    if (!method.empty()) cfg.method = method;
    if (encode->parsed()) return run_encode(cfg, dict_path);
    if (learn->parsed()) return run_learn(cfg);
    if (check->parsed()) return run_check(cfg, dict_path);
  } catch (const ldict::EncodingInfeasible& e) {
    std::cerr << "not converged: " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const ldict::UnboundedProblem& e) {
    std::cerr << "not converged: " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
